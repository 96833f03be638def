"""Command-line experiment driver.

Subcommands::

    generate   draw a scenario from generator settings and write it to a file
    solve      lower-bound bisection followed by ESA on one scenario
    gap-hist   histogram of R - R_lb over every feasible placement
    sweep-c    delay of every method over cache sizes and seeds
    verify     recompute the rows of a sweep and compare

Every output file is deterministic for a given invocation; only the
``wall_time`` column of sweep rows is exempt.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .milp import EXACT, RELAX_ROUND, SolverError
from .model import (
    Placement,
    Scenario,
    ScenarioError,
    SearchParams,
    dumps_placement,
    load_scenario,
    save_scenario,
)
from .nlr import expected_nlr, expected_nlr_monte_carlo, lower_bound_nlr
from .scenario import GeneratorConfig, generate, load_config
from .search import (
    INFEASIBLE,
    SearchError,
    SolveOutcome,
    baseline_delay,
    baseline_placement,
    bisect_lower_bound,
    esa,
)

CSV_VERSION = 1
METHODS = ("lower-bound", "esa-ilp", "esa-rra", "popularity", "random")
SWEEP_COLUMNS = [
    "csv_version", "experiment", "cache", "seed", "method", "status", "delay", "exact_nlr",
    "lb_nlr", "feasible", "iterations", "solver_calls", "halvings", "scenario_file",
    "placement", "error", "wall_time",
]
SUMMARY_COLUMNS = ["csv_version", "experiment", "cache", "method", "runs", "failures",
                   "mean_delay", "mean_exact_nlr", "mean_lb_nlr"]
HIST_COLUMNS = ["csv_version", "bin_low", "bin_high", "count"]
NON_GOLDEN = ("wall_time",)

EXIT_FEASIBLE = 0
EXIT_INFEASIBLE = 3
EXIT_ERROR = 4

ENUMERATION_LIMIT = 10**8
ZERO_GAP_TOL = 1e-12
VERIFY_TOL = 1e-9


# --------------------------------------------------------------------------- records

@dataclass
class ExperimentRecord:
    """Rows of one sweep together with the settings that produced them."""

    experiment: str
    config: dict
    rows: List[dict] = field(default_factory=list)

    def manifest(self) -> dict:
        return {"experiment": self.experiment, "version": __version__, "csv_version": CSV_VERSION,
                "config": self.config}


def encode_placement(placement: Placement) -> str:
    """Compact text form ``f.i=k`` of the nonzero counts, space separated."""
    return " ".join(f"{f}.{i}={placement.counts[f, i]}" for f, i in np.argwhere(placement.counts > 0))


def decode_placement(text: str, shape: Tuple[int, int]) -> Placement:
    x = np.zeros(shape, dtype=np.int64)
    for item in text.split():
        cell, k = item.split("=")
        f, i = cell.split(".")
        x[int(f), int(i)] = int(k)
    return Placement(x)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, bool):
        return "1" if v else "0"
    return str(v)


def write_csv(path, columns: Sequence[str], rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c, "")) for c in columns])


def read_csv(path) -> List[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


# --------------------------------------------------------------------------- methods

def run_methods(scenario: Scenario, params: SearchParams, methods: Sequence[str], seed: int,
                **solver_kw) -> Dict[str, Tuple[Optional[SolveOutcome], str, float]]:
    """Run each method once; returns ``method -> (outcome, error, seconds)``.

    ``esa-ilp`` starts from the lower-bound outcome, which is computed once
    and shared. ``esa-rra`` starts from the relax-round bisection.
    Relax-round and the random baseline use ``seed``.
    """
    out = {}
    shared = {}

    def lower_bound():
        if "lb" not in shared:
            shared["lb"] = bisect_lower_bound(scenario, params, EXACT, seed, **solver_kw)
        return shared["lb"]

    runners = {
        "lower-bound": lower_bound,
        "esa-ilp": lambda: esa(scenario, params, lower_bound(), EXACT, seed, **solver_kw),
        "esa-rra": lambda: esa(scenario, params,
                               bisect_lower_bound(scenario, params, RELAX_ROUND, seed, **_lp_kw(solver_kw)),
                               RELAX_ROUND, seed, **_lp_kw(solver_kw)),
        "popularity": lambda: baseline_delay(scenario, baseline_placement(scenario, "popularity"),
                                             params, "popularity"),
        "random": lambda: baseline_delay(scenario, baseline_placement(scenario, "random", seed),
                                         params, "random"),
    }
    for m in methods:
        if m not in runners:
            raise ValueError(f"unknown method {m!r}")
        t0 = time.perf_counter()
        try:
            res, err = runners[m](), ""
        except (SearchError, SolverError, ValueError) as exc:
            res, err = None, f"{type(exc).__name__}: {exc}"
        out[m] = (res, err, time.perf_counter() - t0)
    return out


def _lp_kw(solver_kw):
    return {k: v for k, v in solver_kw.items() if k == "lp_method"}


def outcome_row(outcome: Optional[SolveOutcome], method: str, error: str = "") -> dict:
    if outcome is None:
        return {"method": method, "status": "error", "delay": math.nan, "exact_nlr": math.nan,
                "lb_nlr": math.nan, "feasible": False, "iterations": 0, "solver_calls": 0,
                "halvings": 0, "placement": "", "error": error}
    return {"method": method, "status": outcome.status, "delay": outcome.delay,
            "exact_nlr": outcome.exact_nlr, "lb_nlr": outcome.lb_nlr, "feasible": outcome.feasible,
            "iterations": outcome.iterations, "solver_calls": outcome.solver_calls,
            "halvings": outcome.halvings, "placement": encode_placement(outcome.placement),
            "error": error}


# --------------------------------------------------------------------------- gap enumeration

def file_columns(scenario: Scenario, f: int) -> np.ndarray:
    """All per-user count vectors for file ``f`` that respect its own limits."""
    U = scenario.num_users
    s = int(scenario.recover_segments[f])
    caps = np.minimum(scenario.cache_capacity, s)
    cols = np.array(list(itertools.product(*[range(int(c) + 1) for c in caps])), dtype=np.int64)
    cols = cols.reshape(-1, U)
    return cols[cols.sum(axis=1) <= scenario.max_segments[f]]


def _usage_states(scenario: Scenario) -> Tuple[np.ndarray, np.ndarray]:
    """Every cache-usage vector in mixed-radix order, and the radix weights."""
    cap = scenario.cache_capacity.astype(np.int64)
    radix = np.concatenate([[1], np.cumprod(cap[:-1] + 1)])
    usage = np.array(list(itertools.product(*[range(int(c) + 1) for c in cap[::-1]])))[:, ::-1]
    return usage[np.argsort(usage @ radix)], radix


def _transitions(scenario: Scenario, usage: np.ndarray, radix: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """``step[s, c]``: state after adding column ``c`` to state ``s``, or -1 on overflow."""
    after = usage[:, None, :] + cols[None, :, :]
    return np.where((after <= scenario.cache_capacity).all(axis=2), after @ radix, -1)


def _log10_columns(scenario: Scenario) -> List[float]:
    """log10 of an upper bound on each file's column count (ignores S_max)."""
    caps = scenario.cache_capacity.astype(float)
    return [float(np.log10(np.minimum(caps, s) + 1).sum()) for s in scenario.recover_segments]


def placement_count(scenario: Scenario, table_limit: int = 10**7) -> int:
    """Number of feasible placements, counted by a DP over files.

    The DP runs over cache-usage states. Returns ``-1`` when the
    state-by-column transition table would exceed ``table_limit`` entries.
    """
    n_states = float(np.prod(scenario.cache_capacity.astype(float) + 1))
    if n_states * 10 ** max(_log10_columns(scenario)) > table_limit:
        return -1
    cols = [file_columns(scenario, f) for f in range(scenario.num_files)]
    n_states = int(n_states)
    usage, radix = _usage_states(scenario)
    ways = np.zeros(n_states, dtype=object)
    ways[0] = 1
    for c in cols:
        step = _transitions(scenario, usage, radix, c)
        nxt = np.zeros(n_states, dtype=object)
        s, k = np.nonzero(step >= 0)
        np.add.at(nxt, step[s, k], ways[s])
        ways = nxt
    return int(ways.sum())


def file_terms(scenario: Scenario, T: float) -> List[Tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Per-file ``(columns, R terms, R_lb terms)``.

    Both objectives split into a sum over files, where file ``f``'s term
    depends only on its column ``x[f, :]``. Terms are computed on a copy of
    the scenario with limits lifted so that one placement can hold the
    same column for every file at once.
    """
    U, F = scenario.num_users, scenario.num_files
    smax = int(scenario.recover_segments.max())
    loose = scenario.replace(cache_capacity=np.full(U, F * smax),
                             max_segments=U * scenario.recover_segments)
    cols = [file_columns(scenario, f) for f in range(F)]
    exact = [np.zeros(len(c)) for c in cols]
    lb = [np.zeros(len(c)) for c in cols]
    index = [{tuple(c): n for n, c in enumerate(cf)} for cf in cols]
    for col in itertools.product(range(smax + 1), repeat=U):
        hits = [(f, index[f][col]) for f in range(F) if col in index[f]]
        if not hits:
            continue
        x = np.zeros((F, U), dtype=np.int64)
        for f, _ in hits:
            x[f] = col
        r = expected_nlr(loose, x, T).per_pair
        rl = lower_bound_nlr(loose, x, T).per_pair
        for f, n in hits:
            w = scenario.popularity[f] / U
            exact[f][n] = float(np.dot(w, r[f]))
            lb[f][n] = float(np.dot(w, rl[f]))
    return [(cols[f], exact[f], lb[f]) for f in range(F)]


class EnumerationTooLarge(ValueError):
    def __init__(self, count: int, log10_bound: float = math.nan):
        if count < 0:
            shown = f"up to 10^{log10_bound:.1f} placements (too many cache states to count exactly)"
        else:
            shown = f"{count} placements"
        super().__init__(f"refusing to enumerate {shown}; limit is {ENUMERATION_LIMIT}")
        self.count = count


def enumerate_gaps(scenario: Scenario, T: float, limit: int = ENUMERATION_LIMIT):
    """``(exact, lower_bound)`` NLR arrays over every feasible placement.

    Placements are built file by file. A partial placement is tracked only
    through its cache usage, encoded as one mixed-radix state index, so
    extending it by a column is a table lookup; overflowing extensions are
    dropped as soon as they appear.
    """
    n = placement_count(scenario)
    if n < 0:
        # product of per-file column counts, an upper bound on the placement count
        raise EnumerationTooLarge(n, sum(_log10_columns(scenario)))
    if n > limit:
        raise EnumerationTooLarge(n)
    usage, radix = _usage_states(scenario)
    state = np.zeros(1, dtype=np.int64)
    r = np.zeros(1)
    rl = np.zeros(1)
    for cols, ex, lo in file_terms(scenario, T):
        nxt = _transitions(scenario, usage, radix, cols)[state]
        a, b = np.nonzero(nxt >= 0)
        state = nxt[a, b]
        r = r[a] + ex[b]
        rl = rl[a] + lo[b]
    return r, rl


def gap_histogram(gaps: np.ndarray, bins: int) -> Tuple[np.ndarray, np.ndarray]:
    hi = max(float(gaps.max()), ZERO_GAP_TOL) if gaps.size else 1.0
    return np.histogram(gaps, bins=bins, range=(min(0.0, float(gaps.min())), hi))


# --------------------------------------------------------------------------- sweep

def _sweep_task(task):
    cfg, C, seed, methods, solver_kw, out_dir = task
    config = GeneratorConfig(**cfg).replace(cache_capacity=C, seed=seed)
    scenario = generate(config)
    # stored relative to the sweep directory so the output does not depend on cwd
    scen_path = f"scenarios/c{C}_seed{seed}.json" if out_dir else ""
    if scen_path:
        save_scenario(scenario, Path(out_dir) / scen_path)
    params = SearchParams.for_scenario(scenario, **solver_kw.pop("search", {}))
    results = run_methods(scenario, params, methods, seed, **solver_kw)
    rows = []
    for m in methods:
        res, err, secs = results[m]
        row = outcome_row(res, m, err)
        row.update(cache=C, seed=seed, wall_time=round(secs, 3), scenario_file=scen_path or "")
        rows.append(row)
    return rows


def sweep_cache(config: GeneratorConfig, caches: Sequence[int], seeds: Sequence[int],
                methods: Sequence[str] = METHODS, workers: int = 1, experiment: str = "sweep-c",
                out_dir: Optional[Path] = None, search: Optional[dict] = None,
                **solver_kw) -> ExperimentRecord:
    """Run every method for each ``(C, seed)``; rows come back in a fixed order.

    Runs are independent and may execute in parallel; results are sorted by
    cache size, seed and method before being returned, so output never
    depends on scheduling.
    """
    tasks = []
    for C in caches:
        for seed in seeds:
            kw = dict(solver_kw)
            kw["search"] = dict(search or {})
            tasks.append((config.to_dict(), int(C), int(seed), tuple(methods), kw,
                          str(out_dir) if out_dir else ""))
    if out_dir:
        (Path(out_dir) / "scenarios").mkdir(parents=True, exist_ok=True)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_sweep_task, tasks))
    else:
        chunks = [_sweep_task(t) for t in tasks]
    order = {m: k for k, m in enumerate(methods)}
    rows = sorted((r for chunk in chunks for r in chunk),
                  key=lambda r: (r["cache"], r["seed"], order[r["method"]]))
    for r in rows:
        r["csv_version"] = CSV_VERSION
        r["experiment"] = experiment
    snapshot = {"generator": config.to_dict(), "caches": list(map(int, caches)),
                "seeds": list(map(int, seeds)), "methods": list(methods),
                "search": dict(search or {}), "solver": dict(solver_kw)}
    return ExperimentRecord(experiment, snapshot, rows)


def summarize(record: ExperimentRecord) -> List[dict]:
    """Mean delay and NLRs per ``(C, method)`` over runs that produced a result."""
    groups: Dict[Tuple[int, str], List[dict]] = {}
    for r in record.rows:
        groups.setdefault((int(r["cache"]), r["method"]), []).append(r)
    out = []
    methods = record.config.get("methods", METHODS)
    for (C, m) in sorted(groups, key=lambda k: (k[0], list(methods).index(k[1]))):
        rows = groups[(C, m)]
        good = [r for r in rows if r["status"] != "error"]
        mean = lambda key: float(np.mean([float(r[key]) for r in good])) if good else math.nan
        out.append({"csv_version": CSV_VERSION, "experiment": record.experiment, "cache": C,
                    "method": m, "runs": len(rows), "failures": len(rows) - len(good),
                    "mean_delay": mean("delay"), "mean_exact_nlr": mean("exact_nlr"),
                    "mean_lb_nlr": mean("lb_nlr")})
    return out


def write_sweep(record: ExperimentRecord, out_dir: Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(out_dir / "runs.csv", SWEEP_COLUMNS, record.rows)
    write_csv(out_dir / "summary.csv", SUMMARY_COLUMNS, summarize(record))
    (out_dir / "manifest.json").write_text(json.dumps(record.manifest(), indent=2, sort_keys=True) + "\n",
                                           encoding="utf-8")


def verify_rows(rows: List[dict], manifest: dict, limit: Optional[int] = None,
                base: Path = Path(".")) -> List[str]:
    """Recompute sweep rows from their scenario files and compare.

    Each row is rerun from its stored scenario, seed and method; status,
    placement and every numeric column except wall time must agree (numbers
    to within ``1e-9``). The stored placement is also re-evaluated directly.
    Scenario paths are resolved against ``base``, the sweep directory.
    Returns a list of mismatch descriptions.
    """
    cfg = manifest["config"]
    solver_kw = dict(cfg.get("solver", {}))
    search = dict(cfg.get("search", {}))
    problems = []
    for n, row in enumerate(rows[:limit] if limit else rows):
        tag = f"row {n + 1} ({row['method']}, C={row['cache']}, seed={row['seed']})"
        if row["status"] == "error":
            continue
        scenario = load_scenario(Path(base) / row["scenario_file"])
        params = SearchParams.for_scenario(scenario, **search)
        placement = decode_placement(row["placement"], scenario.shape)
        T = float(row["delay"])
        direct = {"exact_nlr": expected_nlr(scenario, placement, T, detail=False).total,
                  "lb_nlr": lower_bound_nlr(scenario, placement, T, detail=False).total}
        for key, val in direct.items():
            if abs(val - float(row[key])) > VERIFY_TOL:
                problems.append(f"{tag}: stored placement gives {key}={val!r}, row has {row[key]}")
        res, err, _ = run_methods(scenario, params, [row["method"]], int(row["seed"]), **solver_kw)[row["method"]]
        fresh = outcome_row(res, row["method"], err)
        if fresh["status"] != row["status"] or fresh["placement"] != row["placement"]:
            problems.append(f"{tag}: recomputed status/placement differ")
        for key in ("delay", "exact_nlr", "lb_nlr"):
            if abs(float(fresh[key]) - float(row[key])) > VERIFY_TOL:
                problems.append(f"{tag}: recomputed {key}={fresh[key]!r}, row has {row[key]}")
    return problems


# --------------------------------------------------------------------------- CLI

def _add_generator_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("scenario generation")
    g.add_argument("--config", type=Path, help="JSON generator config; flags below override it")
    g.add_argument("--users", type=int, help="number of users N_u")
    g.add_argument("--files", type=int, help="number of files N_f")
    g.add_argument("--cache", type=int, help="cache capacity C per user")
    g.add_argument("--budget", type=int, help="segments per contact B")
    g.add_argument("--nlr-limit", type=float, help="NLR limit R'")
    g.add_argument("--t-max", type=float, help="largest delay window T_max")
    g.add_argument("--seed", type=int, help="scenario seed")


def _add_search_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("search")
    g.add_argument("--eta", type=float, default=1.0, help="ESA step (default 1)")
    g.add_argument("--epsilon", type=float, default=1e-6, help="bisection tolerance (default 1e-6)")
    g.add_argument("--node-limit", type=int, default=10**6, help="branch-and-bound node budget")
    g.add_argument("--ilp-backend", choices=["bnb", "highs"], default="bnb")
    g.add_argument("--lp-method", choices=["auto", "simplex", "highs"], default="auto")


def config_from_args(args) -> GeneratorConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else GeneratorConfig()
    names = {"users": "num_users", "files": "num_files", "cache": "cache_capacity",
             "budget": "contact_budget", "nlr_limit": "nlr_limit", "t_max": "delay_limit", "seed": "seed"}
    changes = {field_: getattr(args, flag) for flag, field_ in names.items()
               if getattr(args, flag, None) is not None}
    return cfg.replace(**changes)


def scenario_from_args(args) -> Scenario:
    if getattr(args, "scenario", None):
        sc = load_scenario(args.scenario)
        changes = {}
        if getattr(args, "nlr_limit", None) is not None:
            changes["nlr_limit"] = args.nlr_limit
        if getattr(args, "t_max", None) is not None:
            changes["delay_limit"] = args.t_max
        return sc.replace(**changes) if changes else sc
    return generate(config_from_args(args))


def _solver_kw(args) -> dict:
    return {"node_limit": args.node_limit, "ilp_backend": args.ilp_backend, "lp_method": args.lp_method}


def cmd_generate(args) -> int:
    cfg = config_from_args(args)
    save_scenario(generate(cfg), args.out)
    print(f"wrote {args.out}")
    return EXIT_FEASIBLE


def solve_report(scenario: Scenario, params: SearchParams, method: str, seed: int,
                 samples: int = 0, **solver_kw) -> Tuple[str, SolveOutcome, SolveOutcome]:
    """Run the lower-bound bisection, then ESA, and format a plain-text report."""
    lb = bisect_lower_bound(scenario, params, EXACT, seed, **solver_kw)
    if method == "esa-ilp":
        start = lb
        out = esa(scenario, params, start, EXACT, seed, **solver_kw)
    else:
        start = bisect_lower_bound(scenario, params, RELAX_ROUND, seed, **_lp_kw(solver_kw))
        out = esa(scenario, params, start, RELAX_ROUND, seed, **_lp_kw(solver_kw))
    lines = [
        f"method: {method}",
        f"nlr_limit: {scenario.nlr_limit!r}",
        f"lower_bound_status: {lb.status}",
        f"lower_bound_delay: {lb.delay!r}",
        f"esa_start_delay: {start.delay!r}",
        f"status: {out.status}",
        f"delay: {out.delay!r}",
        f"exact_nlr: {out.exact_nlr!r}",
        f"lb_nlr: {out.lb_nlr!r}",
        f"feasible: {str(out.feasible).lower()}",
        f"esa_iterations: {out.iterations}",
        f"esa_halvings: {out.halvings}",
        f"segments_cached: {int(out.placement.counts.sum())}",
    ]
    if samples > 0:
        est, se = expected_nlr_monte_carlo(scenario, out.placement, out.delay, samples, seed=seed)
        lines.append(f"monte_carlo_nlr: {est!r} +- {se!r} ({samples} samples)")
    return "\n".join(lines) + "\n", lb, out


def cmd_solve(args) -> int:
    scenario = scenario_from_args(args)
    params = SearchParams.for_scenario(scenario, step=args.eta, tolerance=args.epsilon)
    report, lb, out = solve_report(scenario, params, args.method, args.seed or 0, args.samples,
                                   **_solver_kw(args))
    sys.stdout.write(report)
    if args.report:
        Path(args.report).write_text(report, encoding="utf-8")
    if args.placement_out:
        Path(args.placement_out).write_text(dumps_placement(out.placement), encoding="utf-8")
    if out.status == INFEASIBLE or not out.feasible:
        return EXIT_INFEASIBLE
    return EXIT_FEASIBLE


def cmd_gap_hist(args) -> int:
    scenario = scenario_from_args(args)
    r, rl = enumerate_gaps(scenario, args.window)
    gaps = r - rl
    counts, edges = gap_histogram(gaps, args.bins)
    rows = [{"csv_version": CSV_VERSION, "bin_low": float(edges[k]), "bin_high": float(edges[k + 1]),
             "count": int(counts[k])} for k in range(len(counts))]
    if args.out:
        write_csv(args.out, HIST_COLUMNS, rows)
    zero = float(np.mean(np.abs(gaps) <= ZERO_GAP_TOL))
    print(f"placements: {gaps.size}")
    print(f"zero_gap_fraction: {zero!r}")
    print(f"max_gap: {float(gaps.max())!r}")
    print(f"min_gap: {float(gaps.min())!r}")
    return EXIT_FEASIBLE


def cmd_sweep(args) -> int:
    cfg = config_from_args(args)
    seeds = list(range(args.seed or 0, (args.seed or 0) + args.seeds))
    search = {"step": args.eta, "tolerance": args.epsilon}
    record = sweep_cache(cfg, args.caches, seeds, args.methods, workers=args.workers,
                         out_dir=args.out, search=search, **_solver_kw(args))
    write_sweep(record, args.out)
    for row in summarize(record):
        print(f"C={row['cache']} {row['method']:<11} mean_delay={row['mean_delay']:.6f} "
              f"runs={row['runs']} failures={row['failures']}")
    return EXIT_FEASIBLE


def cmd_verify(args) -> int:
    out = Path(args.sweep_dir)
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    problems = verify_rows(read_csv(out / "runs.csv"), manifest, args.limit, base=out)
    for p in problems:
        print(p)
    print("verify: ok" if not problems else f"verify: {len(problems)} mismatch(es)")
    return EXIT_FEASIBLE if not problems else EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="d2dcache", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a generated scenario")
    _add_generator_flags(p)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="lower bound and ESA on one scenario")
    p.add_argument("--scenario", type=Path, help="scenario file (otherwise generated from flags)")
    _add_generator_flags(p)
    _add_search_flags(p)
    p.add_argument("--method", choices=["esa-ilp", "esa-rra"], default="esa-ilp")
    p.add_argument("--samples", type=int, default=0, help="Monte Carlo samples for a cross-check")
    p.add_argument("--placement-out", type=Path)
    p.add_argument("--report", type=Path)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("gap-hist", help="histogram of R - R_lb over all placements")
    p.add_argument("--scenario", type=Path)
    _add_generator_flags(p)
    p.add_argument("--window", type=float, required=True, help="delay window T")
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_gap_hist)

    p = sub.add_parser("sweep-c", help="delay of each method over cache sizes")
    _add_generator_flags(p)
    _add_search_flags(p)
    p.add_argument("--caches", type=int, nargs="+", default=[2, 3, 4, 5])
    p.add_argument("--seeds", type=int, default=20, help="number of consecutive seeds")
    p.add_argument("--methods", nargs="+", choices=METHODS, default=list(METHODS))
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="recompute the rows of a sweep")
    p.add_argument("sweep_dir", type=Path)
    p.add_argument("--limit", type=int, help="only check the first N rows")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, SearchError, SolverError, EnumerationTooLarge, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
