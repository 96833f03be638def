"""Independent reference computations used by the tests.

These deliberately avoid the package's own numerics: Poisson laws come from
scipy.stats, expectations are plain enumerations over contact counts, and
optima are found by exhaustive search.
"""

import itertools
import math

import numpy as np
from scipy.stats import poisson

from d2dcache.model import Scenario


def random_scenario(rng, U, F, smax=3, cmax=3, bmax=2, nlr_limit=0.5, delay_limit=400.0,
                    rate_scale=1 / 1088):
    """A small scenario with random popularity, rates and segment counts."""
    lam = rng.gamma(4.43, rate_scale, size=(U, U))
    lam = np.triu(lam, 1)
    lam = lam + lam.T
    pop = rng.dirichlet(np.ones(F), size=U).T
    S = rng.integers(1, smax + 1, F)
    return Scenario(num_users=U, num_files=F, cache_capacity=rng.integers(0, cmax + 1, U),
                    contact_budget=int(rng.integers(1, bmax + 1)), contact_rate=lam, popularity=pop,
                    recover_segments=S, max_segments=S * rng.integers(1, 4, F),
                    nlr_limit=nlr_limit, delay_limit=delay_limit)


def random_placement(rng, sc):
    """Random feasible placement: random counts, then trimmed to the limits."""
    F, U = sc.shape
    x = np.array([[rng.integers(0, sc.recover_segments[f] + 1) for _ in range(U)] for f in range(F)])
    for i in range(U):
        while x[:, i].sum() > sc.cache_capacity[i]:
            f = rng.choice(np.flatnonzero(x[:, i]))
            x[f, i] -= 1
    for f in range(F):
        while x[f].sum() > sc.max_segments[f]:
            i = rng.choice(np.flatnonzero(x[f]))
            x[f, i] -= 1
    return x


def transfer_law(mu, B, k):
    """``{value: probability}`` of ``min(B*M, k)`` with ``M ~ Poisson(mu)``."""
    if k == 0:
        return {0: 1.0}
    top = math.ceil(k / B)
    law = {}
    for m in range(top):
        law[B * m] = law.get(B * m, 0.0) + float(poisson.pmf(m, mu))
    law[k] = law.get(k, 0.0) + float(poisson.sf(top - 1, mu))
    return law


def truncated_mean(mu, B, k):
    """``E[min(B*M, k)]`` by summing far into the tail."""
    if k == 0:
        return 0.0
    m = np.arange(0, int(mu + 40 * math.sqrt(mu + 1) + 60))
    return float(np.sum(np.minimum(B * m, k) * poisson.pmf(m, mu)))


def pair_terms(sc, x, T, f, i):
    """``(E[max(S_rec - S, 0)], max(S_rec - E S, 0))`` for one (file, user), by enumeration."""
    s = int(sc.recover_segments[f])
    laws = [transfer_law(sc.contact_rate[i, j] * T, sc.contact_budget, int(x[f, j]))
            for j in range(sc.num_users) if j != i]
    exact = 0.0
    mean = float(x[f, i])
    for law in laws:
        mean += sum(v * p for v, p in law.items())
    for combo in itertools.product(*[list(law.items()) for law in laws]):
        total = x[f, i] + sum(v for v, _ in combo)
        p = math.prod(q for _, q in combo)
        exact += p * max(s - total, 0)
    return exact, max(s - mean, 0.0)


def nlr_pair(sc, x, T):
    """Exact and lower-bound NLR totals by brute-force enumeration."""
    F, U = sc.shape
    r = rl = 0.0
    for f in range(F):
        s = sc.recover_segments[f]
        for i in range(U):
            a, b = pair_terms(sc, x, T, f, i)
            r += sc.popularity[f, i] * a / s
            rl += sc.popularity[f, i] * b / s
    return r / U, rl / U


def feasible(sc, x):
    return ((x >= 0).all() and (x <= sc.recover_segments[:, None]).all()
            and (x.sum(axis=0) <= sc.cache_capacity).all() and (x.sum(axis=1) <= sc.max_segments).all())


def all_placements(sc):
    F, U = sc.shape
    ranges = [range(int(min(sc.recover_segments[f], sc.cache_capacity[i])) + 1)
              for f in range(F) for i in range(U)]
    for v in itertools.product(*ranges):
        x = np.array(v, dtype=np.int64).reshape(F, U)
        if feasible(sc, x):
            yield x


def lb_total(sc, x, T):
    """Lower-bound NLR from :func:`truncated_mean` (no enumeration of contact counts)."""
    F, U = sc.shape
    tot = 0.0
    for f in range(F):
        s = sc.recover_segments[f]
        for i in range(U):
            es = x[f, i] + sum(truncated_mean(sc.contact_rate[i, j] * T, sc.contact_budget, int(x[f, j]))
                               for j in range(U) if j != i)
            tot += sc.popularity[f, i] * max(s - es, 0.0) / s
    return tot / U


def brute_min_lb(sc, T):
    """``min_x R_lb(x, T)`` over every feasible placement."""
    F, U = sc.shape
    cols = _columns(sc)
    terms = []
    for f in range(F):
        terms.append([_column_lb(sc, f, c, T) for c in cols[f]])
    return _min_over_columns(sc, cols, terms)


def brute_min_exact(sc, T, cols=None):
    """``min_x R(x, T)`` over every feasible placement (the NLR-optimal value)."""
    F, U = sc.shape
    cols = _columns(sc) if cols is None else cols
    terms = [[_column_exact(sc, f, c, T) for c in cols[f]] for f in range(F)]
    return _min_over_columns(sc, cols, terms)


def _columns(sc):
    F, U = sc.shape
    out = []
    for f in range(F):
        s = int(sc.recover_segments[f])
        cs = [np.array(c) for c in itertools.product(*[range(min(s, int(sc.cache_capacity[i])) + 1)
                                                      for i in range(U)])
              if sum(c) <= sc.max_segments[f]]
        out.append(cs)
    return out


def _column_exact(sc, f, col, T):
    x = np.zeros(sc.shape, dtype=np.int64)
    x[f] = col
    s = sc.recover_segments[f]
    return sum(sc.popularity[f, i] * pair_terms(sc, x, T, f, i)[0] / s for i in range(sc.num_users)) / sc.num_users


def _column_lb(sc, f, col, T):
    x = np.zeros(sc.shape, dtype=np.int64)
    x[f] = col
    s = sc.recover_segments[f]
    return sum(sc.popularity[f, i] * pair_terms(sc, x, T, f, i)[1] / s for i in range(sc.num_users)) / sc.num_users


def _min_over_columns(sc, cols, terms):
    """Min-plus DP over files with the per-user cache usage as state."""
    U = sc.num_users
    best = {tuple([0] * U): 0.0}
    for f, (cs, ts) in enumerate(zip(cols, terms)):
        nxt = {}
        for used, val in best.items():
            for c, t in zip(cs, ts):
                u = tuple(int(a + b) for a, b in zip(used, c))
                if any(u[i] > sc.cache_capacity[i] for i in range(U)):
                    continue
                v = val + t
                if v < nxt.get(u, math.inf):
                    nxt[u] = v
        best = nxt
    return min(best.values())


def grid_threshold(value_at, limit, t_min, t_max, eps):
    """Smallest ``T`` (to within ``eps``, upper side) with ``value_at(T) <= limit``; None if none."""
    if value_at(t_max) > limit:
        return None
    if value_at(t_min) <= limit:
        return t_min
    lo, hi = t_min, t_max
    while hi - lo > eps:
        mid = 0.5 * (lo + hi)
        if value_at(mid) <= limit:
            hi = mid
        else:
            lo = mid
    return hi
