"""Cardinality handling: choose a support of at most K assets, then re-solve on it.

Every model exposes ``solve_on(support) -> (objective, weights)`` which solves
its continuous problem restricted to ``support`` (weights are full length).
The strategies below only ever talk to that callback.
"""

import time
from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from ..errors import ContractViolation, InfeasibleError
from . import tolerances


@dataclass(frozen=True)
class ExactEnumerate:
    """Provably best support.

    Small searches (``C(n, K) <= brute_limit``) enumerate every support;
    larger ones run a depth-first branch-and-bound whose node bounds are the
    continuous relaxation on the non-excluded assets.  ``node_limit`` caps the
    tree; hitting it returns the incumbent flagged ``node-limit``.
    """

    max_n: int | None = None
    brute_limit: int = 20_000
    node_limit: int = 5_000


@dataclass(frozen=True)
class RelaxSelectReoptimize:
    """Solve on all assets, keep the K largest positive weights, re-solve."""


@dataclass(frozen=True)
class SwapLocalSearch:
    """Start from RelaxSelectReoptimize and apply improving single swaps."""

    max_sweeps: int = 10


def parse_strategy(spec):
    """Build a strategy from a name or a ``{"name": ..., **params}`` mapping."""
    if isinstance(spec, (ExactEnumerate, RelaxSelectReoptimize, SwapLocalSearch)):
        return spec
    if spec is None:
        return RelaxSelectReoptimize()
    if isinstance(spec, str):
        spec = {"name": spec}
    spec = dict(spec)
    name = spec.pop("name", None)
    table = {"ExactEnumerate": ExactEnumerate, "RelaxSelectReoptimize": RelaxSelectReoptimize,
             "SwapLocalSearch": SwapLocalSearch}
    if name not in table:
        raise ContractViolation(f"unknown selection strategy {name!r}; expected one of {sorted(table)}")
    try:
        return table[name](**spec)
    except TypeError as exc:
        raise ContractViolation(f"bad parameters for {name}: {exc}") from None


@dataclass
class SelectionResult:
    support: np.ndarray
    weights: np.ndarray
    objective: float
    status: str = "optimal"
    evaluations: int = 0


class _Evaluator:
    """Memoised wrapper around ``solve_on`` keyed by the sorted support."""

    def __init__(self, solve_on, deadline):
        self.solve_on = solve_on
        self.cache = {}
        self.deadline = deadline

    def __call__(self, support):
        key = tuple(sorted(int(i) for i in support))
        if key not in self.cache:
            try:
                obj, w = self.solve_on(np.array(key, dtype=int))
            except InfeasibleError:
                obj, w = np.inf, None
            self.cache[key] = (float(obj), w)
        return self.cache[key]

    @property
    def expired(self):
        return self.deadline is not None and time.perf_counter() > self.deadline


def _positive(w, pool=None):
    idx = np.flatnonzero(w > tolerances.SUPPORT)
    if pool is not None:
        idx = idx[np.isin(idx, pool)]
    return idx


def _top_k(w, K):
    idx = _positive(w)
    if idx.size <= K:
        return idx
    order = np.lexsort((idx, -w[idx]))
    return np.sort(idx[order[:K]])


def _relax_select(ev, n, K):
    obj, w = ev(np.arange(n))
    if w is None:
        raise InfeasibleError("relaxation over the full universe is infeasible")
    support = _top_k(w, K)
    if support.size == _positive(w).size:
        return support, obj, w
    obj2, w2 = ev(support)
    if w2 is None:
        return support, np.inf, None
    return support, obj2, w2


def _gap(best):
    return 1e-9 * max(abs(best), 1e-300) if np.isfinite(best) else 0.0


def search_support(n, K, solve_on, strategy=None, seed=0, time_limit=None, zero_lower=True):
    """Run a selection strategy and return a :class:`SelectionResult`.

    ``zero_lower`` says that assets may sit at weight 0 inside a support, so
    K-subsets dominate smaller ones; with positive holding floors the exact
    search must also visit smaller supports.
    """
    strategy = parse_strategy(strategy)
    if K < 1:
        raise ContractViolation("cardinality K must be at least 1")
    deadline = None if time_limit is None else time.perf_counter() + float(time_limit)
    ev = _Evaluator(solve_on, deadline)

    if K >= n:
        obj, w = ev(np.arange(n))
        if w is None:
            raise InfeasibleError("problem is infeasible on the full universe")
        return SelectionResult(np.arange(n), w, obj, "degenerate", len(ev.cache))

    if isinstance(strategy, ExactEnumerate):
        if strategy.max_n is not None and n > strategy.max_n:
            raise ContractViolation(f"ExactEnumerate limited to n <= {strategy.max_n}, got n={n}")
        sizes = [K] if zero_lower else list(range(1, K + 1))
        count = sum(comb(n, k) for k in sizes)
        if count <= min(strategy.brute_limit, tolerances.ENUMERATION_LIMIT):
            return _brute(ev, n, sizes)
        if not zero_lower:
            raise ContractViolation(
                f"exact search over {count} supports needs zero holding floors for branch-and-bound")
        return _branch_and_bound(ev, n, K, strategy.node_limit)

    support, obj, w = _relax_select(ev, n, K)
    if isinstance(strategy, RelaxSelectReoptimize) or w is None:
        status = "heuristic" if w is not None else "infeasible"
        return SelectionResult(support, w, obj, status, len(ev.cache))
    return _swap(ev, n, K, support, obj, w, strategy.max_sweeps, seed)


def _brute(ev, n, sizes):
    best = (np.inf, None, None)
    status = "optimal"
    for k in sizes:
        for combo in combinations(range(n), k):
            obj, w = ev(combo)
            if obj < best[0]:
                best = (obj, np.array(combo), w)
            if ev.expired:
                status = "timeout"
                break
        if status == "timeout":
            break
    if best[2] is None:
        raise InfeasibleError("no support admits a feasible solution")
    return SelectionResult(_positive(best[2]), best[2], best[0], status, len(ev.cache))


def _branch_and_bound(ev, n, K, node_limit):
    universe = frozenset(range(n))
    _, inc_obj, inc_w = _relax_select(ev, n, K)
    status = "optimal"
    stack = [(frozenset(), frozenset())]
    nodes = 0

    def offer(obj, w):
        nonlocal inc_obj, inc_w
        if w is not None and obj < inc_obj:
            inc_obj, inc_w = obj, w

    while stack:
        if nodes >= node_limit:
            status = "node-limit"
            break
        if ev.expired:
            status = "timeout"
            break
        nodes += 1
        forced, excluded = stack.pop()
        avail = universe - excluded
        if len(avail) <= K:
            offer(*ev(avail))
            continue
        bound, w = ev(avail)
        if w is None or bound >= inc_obj - _gap(inc_obj):
            continue
        supp = _positive(w)
        if supp.size <= K:
            offer(bound, w)
            continue
        # probing: an asset whose removal lifts the bound past the incumbent
        # belongs to every improving support in this subtree
        forced = set(forced)
        for j in supp[np.argsort(-w[supp], kind="stable")]:
            if len(forced) > K:
                break
            if j in forced:
                continue
            bj, _ = ev(avail - {int(j)})
            if bj >= inc_obj - _gap(inc_obj):
                forced.add(int(j))
        if len(forced) > K:
            continue
        if len(forced) == K:
            offer(*ev(forced))
            continue
        free = np.array([j for j in supp if int(j) not in forced])
        j = int(free[np.argmax(w[free])])
        stack.append((frozenset(forced), excluded | {j}))
        stack.append((frozenset(forced | {j}), excluded))
    if inc_w is None:
        raise InfeasibleError("no support admits a feasible solution")
    return SelectionResult(_positive(inc_w), inc_w, inc_obj, status, len(ev.cache))


def _swap(ev, n, K, support, obj, w, max_sweeps, seed):
    rng = np.random.default_rng(seed)
    current = set(int(i) for i in support)
    for _ in range(max_sweeps):
        improved = False
        # one sweep offers every member of the starting support a swap partner
        for i in rng.permutation(sorted(current)):
            outside = [j for j in range(n) if j not in current]
            for j in rng.permutation(outside):
                if ev.expired:
                    return SelectionResult(_positive(w), w, obj, "timeout", len(ev.cache))
                trial = (current - {int(i)}) | {int(j)}
                o, wt = ev(trial)
                if wt is not None and o < obj - _gap(obj):
                    current, obj, w = trial, o, wt
                    improved = True
                    break
        if not improved:
            break
    return SelectionResult(_positive(w), w, obj, "heuristic", len(ev.cache))
