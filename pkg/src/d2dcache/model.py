"""Problem-instance types, placement feasibility and scenario files.

A :class:`Scenario` is the immutable description of a D2D caching instance.
A :class:`Placement` holds the number of coded segments of every file cached
at every user. Scenario files are JSON documents with a fixed key order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import List, NamedTuple, Optional, Sequence, Union

import numpy as np

__all__ = [
    "ScenarioError",
    "ScenarioParseError",
    "DimensionError",
    "Scenario",
    "Placement",
    "SearchParams",
    "Violation",
    "check_feasible",
    "is_feasible",
    "dumps_scenario",
    "loads_scenario",
    "save_scenario",
    "load_scenario",
    "scenario_roundtrip",
    "dumps_placement",
    "loads_placement",
    "FORMAT_TAG",
    "FORMAT_VERSION",
]

FORMAT_TAG = "d2dcache-scenario"
FORMAT_VERSION = 1
PLACEMENT_TAG = "d2dcache-placement"

POPULARITY_TOL = 1e-9


class ScenarioError(ValueError):
    """A scenario violates one of its invariants."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ScenarioParseError(ScenarioError):
    """A scenario document could not be parsed."""

    def __init__(self, message, field=None, line=None):
        super().__init__(message, field=field)
        self.line = line


class DimensionError(ValueError):
    """Array shapes disagree with the scenario they are used with."""


def _frozen_array(values, dtype, name, ndim):
    arr = np.array(values, dtype=dtype, copy=True)
    if arr.ndim != ndim:
        raise ScenarioError(f"{name}: expected {ndim}-d array, got shape {arr.shape}", field=name)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Scenario:
    """Immutable D2D caching instance.

    Arrays are indexed ``[file, user]`` for popularity and ``[user, user]``
    for contact rates. All arrays are read-only copies of the inputs.
    """

    num_users: int
    num_files: int
    cache_capacity: np.ndarray
    contact_budget: int
    contact_rate: np.ndarray
    popularity: np.ndarray
    recover_segments: np.ndarray
    max_segments: np.ndarray
    nlr_limit: float
    delay_limit: float
    zipf_shape: np.ndarray = field(default=None)

    def __post_init__(self):
        U, F = int(self.num_users), int(self.num_files)
        if U < 1:
            raise ScenarioError("num_users must be positive", field="num_users")
        if F < 1:
            raise ScenarioError("num_files must be positive", field="num_files")
        object.__setattr__(self, "num_users", U)
        object.__setattr__(self, "num_files", F)

        cap = _frozen_array(self.cache_capacity, np.int64, "cache_capacity", 1)
        rate = _frozen_array(self.contact_rate, np.float64, "contact_rate", 2)
        pop = _frozen_array(self.popularity, np.float64, "popularity", 2)
        rec = _frozen_array(self.recover_segments, np.int64, "recover_segments", 1)
        smax = _frozen_array(self.max_segments, np.int64, "max_segments", 1)
        zipf = self.zipf_shape
        if zipf is None:
            zipf = np.zeros(U)
        zipf = _frozen_array(zipf, np.float64, "zipf_shape", 1)

        if cap.shape != (U,):
            raise ScenarioError(f"cache_capacity: expected length {U}", field="cache_capacity")
        if np.any(cap < 0):
            raise ScenarioError("cache_capacity must be nonnegative", field="cache_capacity")
        if int(self.contact_budget) < 1:
            raise ScenarioError("contact_budget must be positive", field="contact_budget")
        object.__setattr__(self, "contact_budget", int(self.contact_budget))

        if rate.shape != (U, U):
            raise ScenarioError(f"contact_rate: expected shape {(U, U)}", field="contact_rate")
        if not np.all(np.isfinite(rate)):
            raise ScenarioError("contact_rate must be finite", field="contact_rate")
        if np.any(rate < 0):
            i, j = np.argwhere(rate < 0)[0]
            raise ScenarioError(
                f"contact_rate[{i}][{j}] = {rate[i, j]!r} is negative", field="contact_rate"
            )
        if np.any(np.diag(rate) != 0):
            raise ScenarioError("contact_rate diagonal must be zero", field="contact_rate")
        if not np.array_equal(rate, rate.T):
            raise ScenarioError("contact_rate must be symmetric", field="contact_rate")

        if pop.shape != (F, U):
            raise ScenarioError(f"popularity: expected shape {(F, U)}", field="popularity")
        if not np.all(np.isfinite(pop)) or np.any(pop < 0) or np.any(pop > 1):
            raise ScenarioError("popularity entries must lie in [0, 1]", field="popularity")
        sums = pop.sum(axis=0)
        bad = np.flatnonzero(np.abs(sums - 1.0) > POPULARITY_TOL)
        if bad.size:
            i = int(bad[0])
            raise ScenarioError(
                f"popularity for user {i} sums to {sums[i]!r}, expected 1", field="popularity"
            )

        if rec.shape != (F,) or np.any(rec < 1):
            raise ScenarioError("recover_segments must be positive, one per file", field="recover_segments")
        if smax.shape != (F,) or np.any(smax < 1):
            raise ScenarioError("max_segments must be positive, one per file", field="max_segments")
        if np.any(smax < rec):
            f = int(np.flatnonzero(smax < rec)[0])
            raise ScenarioError(
                f"max_segments[{f}] < recover_segments[{f}]", field="max_segments"
            )
        if zipf.shape != (U,) or np.any(zipf < 0):
            raise ScenarioError("zipf_shape must be nonnegative, one per user", field="zipf_shape")

        nlr = float(self.nlr_limit)
        if not 0.0 <= nlr <= 1.0:
            raise ScenarioError("nlr_limit must lie in [0, 1]", field="nlr_limit")
        tmax = float(self.delay_limit)
        if not (tmax > 0 and math.isfinite(tmax)):
            raise ScenarioError("delay_limit must be positive", field="delay_limit")

        object.__setattr__(self, "cache_capacity", cap)
        object.__setattr__(self, "contact_rate", rate)
        object.__setattr__(self, "popularity", pop)
        object.__setattr__(self, "recover_segments", rec)
        object.__setattr__(self, "max_segments", smax)
        object.__setattr__(self, "zipf_shape", zipf)
        object.__setattr__(self, "nlr_limit", nlr)
        object.__setattr__(self, "delay_limit", tmax)

    @property
    def shape(self):
        """``(num_files, num_users)``, the shape of a placement matrix."""
        return (self.num_files, self.num_users)

    def replace(self, **changes) -> "Scenario":
        """Return a copy with some fields replaced (the original is untouched)."""
        kwargs = {f.name: getattr(self, f.name) for f in fields(self)}
        kwargs.update(changes)
        return Scenario(**kwargs)

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        for f in fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            if isinstance(a, np.ndarray):
                if a.shape != b.shape or not np.array_equal(a, b):
                    return False
            elif a != b:
                return False
        return True

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Placement:
    """Segment counts ``counts[f, i]`` of file ``f`` cached at user ``i``."""

    counts: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.counts)
        if arr.ndim != 2:
            raise DimensionError(f"placement must be 2-d, got shape {arr.shape}")
        if arr.size and not np.issubdtype(arr.dtype, np.integer):
            if not np.all(arr == np.round(arr)):
                raise ValueError("placement counts must be integers")
        arr = np.array(arr, dtype=np.int64, copy=True)
        if np.any(arr < 0):
            raise ValueError("placement counts must be nonnegative")
        arr.setflags(write=False)
        object.__setattr__(self, "counts", arr)

    @classmethod
    def zeros(cls, scenario: Scenario) -> "Placement":
        return cls(np.zeros(scenario.shape, dtype=np.int64))

    @property
    def shape(self):
        return self.counts.shape

    def __eq__(self, other):
        if not isinstance(other, Placement):
            return NotImplemented
        return self.counts.shape == other.counts.shape and np.array_equal(self.counts, other.counts)

    def __hash__(self):
        return hash((self.counts.shape, self.counts.tobytes()))


@dataclass(frozen=True)
class SearchParams:
    """Delay-search settings: bracket ``[t_min, t_max]``, ESA step, tolerance."""

    t_min: float = 0.0
    t_max: float = 400.0
    step: float = 1.0
    tolerance: float = 1e-6

    def __post_init__(self):
        if not self.t_min >= 0:
            raise ValueError("t_min must be nonnegative")
        if not self.t_max > 0 or self.t_max <= self.t_min:
            raise ValueError("t_max must be positive and exceed t_min")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if not self.step > self.tolerance:
            raise ValueError("step must exceed tolerance")

    @classmethod
    def for_scenario(cls, scenario: Scenario, **kw) -> "SearchParams":
        kw.setdefault("t_max", scenario.delay_limit)
        return cls(**kw)


class Violation(NamedTuple):
    """One violated placement constraint.

    ``constraint`` is ``"capacity"`` (index = user), ``"budget"``
    (index = file) or ``"level"`` (index = ``(file, user)``); ``amount`` is
    how far the bound is exceeded.
    """

    constraint: str
    index: object
    amount: int


def _counts(placement) -> np.ndarray:
    if isinstance(placement, Placement):
        return placement.counts
    return np.asarray(placement)


def check_feasible(scenario: Scenario, placement) -> List[Violation]:
    """List every violated placement constraint; an empty list means feasible.

    Raises
    ------
    DimensionError
        If the placement shape does not match ``(num_files, num_users)``.
    """
    x = _counts(placement)
    if x.shape != scenario.shape:
        raise DimensionError(
            f"placement shape {x.shape} does not match scenario {scenario.shape}"
        )
    out = []
    rec = scenario.recover_segments
    for f, i in np.argwhere(x > rec[:, None]):
        out.append(Violation("level", (int(f), int(i)), int(x[f, i] - rec[f])))
    for f, i in np.argwhere(x < 0):
        out.append(Violation("level", (int(f), int(i)), int(-x[f, i])))
    used = x.sum(axis=0)
    for i in np.flatnonzero(used > scenario.cache_capacity):
        out.append(Violation("capacity", int(i), int(used[i] - scenario.cache_capacity[i])))
    spread = x.sum(axis=1)
    for f in np.flatnonzero(spread > scenario.max_segments):
        out.append(Violation("budget", int(f), int(spread[f] - scenario.max_segments[f])))
    return out


def is_feasible(scenario: Scenario, placement) -> bool:
    return not check_feasible(scenario, placement)


# ---------------------------------------------------------------------------
# serialization

_FIELD_ORDER = (
    "num_users",
    "num_files",
    "contact_budget",
    "nlr_limit",
    "delay_limit",
    "cache_capacity",
    "recover_segments",
    "max_segments",
    "zipf_shape",
    "popularity",
    "contact_rate",
)
_INT_ARRAYS = {"cache_capacity", "recover_segments", "max_segments"}
_FLOAT_ARRAYS = {"zipf_shape", "popularity", "contact_rate"}


def _to_builtin(name, value):
    if name in _INT_ARRAYS:
        return [int(v) for v in value]
    if name in _FLOAT_ARRAYS:
        return np.asarray(value, dtype=float).tolist()
    if name in ("nlr_limit", "delay_limit"):
        return float(value)
    return int(value)


def dumps_scenario(scenario: Scenario) -> str:
    """Serialize to canonical JSON text (fixed key order, exact floats)."""
    doc = {"format": FORMAT_TAG, "version": FORMAT_VERSION}
    for name in _FIELD_ORDER:
        doc[name] = _to_builtin(name, getattr(scenario, name))
    # Python's float repr is the shortest string that round-trips bit-exactly.
    lines = ["{"]
    items = list(doc.items())
    for n, (key, value) in enumerate(items):
        comma = "," if n < len(items) - 1 else ""
        if isinstance(value, list) and value and isinstance(value[0], list):
            rows = [json.dumps(row, allow_nan=False) for row in value]
            body = ",\n    ".join(rows)
            lines.append(f'  "{key}": [\n    {body}\n  ]{comma}')
        else:
            lines.append(f'  "{key}": {json.dumps(value, allow_nan=False)}{comma}')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _reject_constant(token):
    raise ValueError(f"non-finite number {token!r}")


def loads_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document.

    Raises
    ------
    ScenarioParseError
        Malformed JSON (with line number), wrong format tag or missing field.
    ScenarioError
        The document parses but violates a scenario invariant.
    """
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"line {exc.lineno}: {exc.msg}", line=exc.lineno) from exc
    except ValueError as exc:
        raise ScenarioParseError(str(exc)) from exc
    if not isinstance(doc, dict):
        raise ScenarioParseError("scenario document must be a JSON object")
    if doc.get("format") != FORMAT_TAG:
        raise ScenarioParseError(f"format tag must be {FORMAT_TAG!r}", field="format")
    if doc.get("version") != FORMAT_VERSION:
        raise ScenarioParseError(
            f"unsupported version {doc.get('version')!r}", field="version"
        )
    kwargs = {}
    for name in _FIELD_ORDER:
        if name not in doc:
            raise ScenarioParseError(f"missing field {name!r}", field=name)
        kwargs[name] = doc[name]
    unknown = set(doc) - set(_FIELD_ORDER) - {"format", "version"}
    if unknown:
        raise ScenarioParseError(f"unknown field(s) {sorted(unknown)}", field=sorted(unknown)[0])
    for name in ("num_users", "num_files", "contact_budget"):
        if not isinstance(kwargs[name], int) or isinstance(kwargs[name], bool):
            raise ScenarioParseError(f"{name} must be an integer", field=name)
    for name in _INT_ARRAYS:
        vals = kwargs[name]
        if not isinstance(vals, list) or not all(
            isinstance(v, int) and not isinstance(v, bool) for v in vals
        ):
            raise ScenarioParseError(f"{name} must be a list of integers", field=name)
    try:
        return Scenario(**kwargs)
    except ScenarioError:
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioParseError(str(exc)) from exc


def save_scenario(scenario: Scenario, path: Union[str, Path]) -> None:
    Path(path).write_text(dumps_scenario(scenario), encoding="utf-8")


def load_scenario(path: Union[str, Path]) -> Scenario:
    return loads_scenario(Path(path).read_text(encoding="utf-8"))


def scenario_roundtrip(scenario: Scenario) -> Scenario:
    """Serialize then parse; the result compares equal to the input."""
    return loads_scenario(dumps_scenario(scenario))


def dumps_placement(placement: Placement) -> str:
    doc = {"format": PLACEMENT_TAG, "version": FORMAT_VERSION, "counts": placement.counts.tolist()}
    return json.dumps(doc) + "\n"


def loads_placement(text: str, scenario: Optional[Scenario] = None) -> Placement:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"line {exc.lineno}: {exc.msg}", line=exc.lineno) from exc
    if not isinstance(doc, dict) or doc.get("format") != PLACEMENT_TAG:
        raise ScenarioParseError(f"format tag must be {PLACEMENT_TAG!r}", field="format")
    placement = Placement(np.array(doc["counts"], dtype=np.int64).reshape(len(doc["counts"]), -1))
    if scenario is not None and placement.shape != scenario.shape:
        raise DimensionError(f"placement shape {placement.shape} does not match scenario {scenario.shape}")
    return placement
