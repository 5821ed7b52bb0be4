"""Rooted orienteering and k-TSP solvers plus the bi-criteria wrapper.

Two interchangeable backends:

* ExactOrienteer - subset dynamic program (Held-Karp states over
  positive-profit vertices) that answers both "max profit within budget"
  and "min length reaching profit lambda" exactly. Approximation factor
  rho = 1. Intended for <= ~13 candidate vertices.
* GreedyOrienteer - budget-feasible cheapest-insertion with 2-opt
  improvement; no optimality guarantee, deterministic, any size.

`bicrit_orient` turns a k-TSP oracle into a bi-criteria orienteering
solver by binary search on the profit target lambda in
[min positive profit, n * max profit]: it keeps the largest lambda whose
min-length tour fits within rho * budget and stops once the bracket
width drops below epsilon, returning the feasible endpoint's tour. With
the exact backend this guarantees profit >= optimum - epsilon at closed
length <= budget.

Vertices with zero profit are never allowed on a returned tour: the
repetition machinery relies on profit zeroing to keep its tours
vertex-disjoint, so detours through consumed vertices must be impossible
(they would also waste distance).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InputError, SizeError
from .model import EMPTY_TOUR, Metric, Tour, tour_length

LENGTH_TOL = 1e-9
PROFIT_TOL = 1e-12

DEFAULT_EXACT_LIMIT = 14


@dataclass(frozen=True)
class OrientInstance:
    """Budget-limited profit collection on a rooted metric."""

    metric: Metric
    profit: np.ndarray
    budget: float
    excluded: frozenset[int] = frozenset()

    def __post_init__(self):
        p = np.array(self.profit, dtype=float)
        if p.shape != (self.metric.n,):
            raise InputError("need one profit per vertex")
        if np.any(p < 0):
            raise InputError("profits must be nonnegative")
        p[self.metric.root] = 0.0
        for v in self.excluded:
            p[v] = 0.0
        p.setflags(write=False)
        object.__setattr__(self, "profit", p)
        if self.budget < 0:
            raise InputError("budget must be nonnegative")


@dataclass(frozen=True)
class OrientSolution:
    tour: Tour
    profit_collected: float
    length: float


EMPTY_SOLUTION = OrientSolution(EMPTY_TOUR, 0.0, 0.0)


def _candidates(metric: Metric, profit: np.ndarray, excluded=frozenset()) -> list[int]:
    return [
        v
        for v in range(metric.n)
        if v != metric.root and v not in excluded and profit[v] > 0.0
    ]


@lru_cache(maxsize=32)
def _masks_by_popcount(m: int) -> tuple[np.ndarray, ...]:
    idx = np.arange(1 << m, dtype=np.int64)
    counts = np.zeros(1 << m, dtype=np.int64)
    for b in range(m):
        counts += (idx >> b) & 1
    return tuple(idx[counts == s] for s in range(m + 1))


class ExactOrienteer:
    """Subset DP over positive-profit vertices: for every vertex subset, the
    minimum closed-tour length and total profit. Answers orienteering and
    k-TSP queries exactly."""

    rho = 1.0

    def __init__(self, metric: Metric, profit, excluded=frozenset(), limit: int = DEFAULT_EXACT_LIMIT):
        profit = np.asarray(profit, dtype=float)
        cand = _candidates(metric, profit, excluded)
        if len(cand) > limit - 1:
            raise SizeError(
                f"{len(cand)} candidate vertices exceed the exact limit "
                f"({limit - 1} non-root); use the greedy backend"
            )
        self.metric = metric
        self.cand = cand
        m = len(cand)
        self.m = m
        if m == 0:
            self.closed_len = np.zeros(1)
            self.mask_profit = np.zeros(1)
            return
        d = metric.dist
        root = metric.root
        D = d[np.ix_(cand, cand)]
        d_root = d[root, cand].astype(float)
        size = 1 << m
        INF = np.inf
        # dp[mask, last] = shortest open path root -> ... -> last over `mask`.
        dp = np.full((size, m), INF)
        for b in range(m):
            dp[1 << b, b] = d_root[b]
        layers = _masks_by_popcount(m)
        for s in range(2, m + 1):
            masks = layers[s]
            for last in range(m):
                bit = 1 << last
                sel = masks[(masks & bit) != 0]
                if sel.size == 0:
                    continue
                prev = sel ^ bit
                # min over the previous endpoint of path(prev) + step to `last`
                dp[sel, last] = np.min(dp[prev] + D[:, last][None, :], axis=1)
        self.dp = dp
        closed = dp + d_root[None, :]
        self.best_last = np.argmin(closed, axis=1)
        self.closed_len = np.min(closed, axis=1)
        self.closed_len[0] = 0.0
        idx = np.arange(size, dtype=np.int64)
        mp = np.zeros(size)
        for b, v in enumerate(cand):
            mp[(idx >> b) & 1 == 1] += profit[v]
        self.mask_profit = mp
        # Pareto view for k-TSP queries: masks sorted by profit with the
        # suffix-minimum closed length.
        order = np.argsort(mp, kind="stable")
        self._sorted_profit = mp[order]
        sorted_len = self.closed_len[order]
        suffix_best = np.empty(size, dtype=np.int64)
        best = size - 1
        best_len = INF
        for t in range(size - 1, -1, -1):
            if sorted_len[t] < best_len:
                best_len = sorted_len[t]
                best = t
            suffix_best[t] = best
        self._order_masks = order
        self._suffix_best = suffix_best

    def _reconstruct(self, mask: int) -> tuple[int, ...]:
        if mask == 0:
            return ()
        seq: list[int] = []
        last = int(self.best_last[mask])
        while mask:
            seq.append(self.cand[last])
            pm = mask ^ (1 << last)
            if pm == 0:
                break
            vals = self.dp[pm] + self.metric.dist[
                np.ix_(self.cand, [self.cand[last]])
            ].ravel()
            # pick the predecessor consistent with the stored optimum
            prev = int(np.argmin(np.where(np.isfinite(self.dp[pm]), vals, np.inf)))
            mask, last = pm, prev
        seq.reverse()
        return tuple(seq)

    def _solution(self, mask: int) -> OrientSolution:
        vs = self._reconstruct(mask)
        return OrientSolution(
            Tour(vs), float(self.mask_profit[mask]), float(self.closed_len[mask])
        )

    def orient(self, budget: float) -> OrientSolution:
        """Max-profit subset whose optimal closed tour fits the budget;
        ties broken toward shorter tours."""
        if self.m == 0:
            return EMPTY_SOLUTION
        feas = self.closed_len <= budget + LENGTH_TOL
        if not np.any(feas):
            return EMPTY_SOLUTION
        profits = np.where(feas, self.mask_profit, -np.inf)
        best_p = profits.max()
        if best_p <= 0.0:
            return EMPTY_SOLUTION
        tied = np.flatnonzero(profits >= best_p - PROFIT_TOL)
        mask = int(tied[np.argmin(self.closed_len[tied])])
        return self._solution(mask)

    def ktsp(self, lam: float) -> OrientSolution | None:
        """Min-length closed tour collecting profit >= lam; None if the total
        available profit falls short."""
        if lam <= PROFIT_TOL:
            return EMPTY_SOLUTION
        if self.m == 0:
            return None
        lo = int(np.searchsorted(self._sorted_profit, lam - PROFIT_TOL, side="left"))
        if lo >= len(self._sorted_profit):
            return None
        mask = int(self._order_masks[self._suffix_best[lo]])
        return self._solution(mask)


class GreedyOrienteer:
    """Deterministic cheapest-insertion heuristic with 2-opt improvement.

    rho is the budget stretch the caller grants to tours produced through
    the bi-criteria search; the heuristic itself carries no approximation
    guarantee, so tours are simply kept budget-feasible.
    """

    def __init__(self, metric: Metric, profit, excluded=frozenset(), rho: float = 1.0):
        self.metric = metric
        self.profit = np.asarray(profit, dtype=float)
        self.cand = _candidates(metric, self.profit, excluded)
        self.rho = rho

    def _insertion_cost(self, seq: list[int], v: int) -> tuple[float, int]:
        """Cheapest position to splice v into the closed tour root-seq-root."""
        d = self.metric.dist
        root = self.metric.root
        stops = [root] + seq + [root]
        best = np.inf
        pos = 0
        for t in range(len(stops) - 1):
            a, b = stops[t], stops[t + 1]
            delta = d[a, v] + d[v, b] - d[a, b]
            if delta < best - 1e-15:
                best = delta
                pos = t
        return float(best), pos

    def _two_opt(self, seq: list[int]) -> list[int]:
        d = self.metric.dist
        root = self.metric.root
        improved = True
        guard = 0
        while improved and guard < 60:
            improved = False
            guard += 1
            stops = [root] + seq + [root]
            for a in range(len(stops) - 3):
                for b in range(a + 2, len(stops) - 1):
                    delta = (
                        d[stops[a], stops[b]]
                        + d[stops[a + 1], stops[b + 1]]
                        - d[stops[a], stops[a + 1]]
                        - d[stops[b], stops[b + 1]]
                    )
                    if delta < -1e-12:
                        stops[a + 1 : b + 1] = reversed(stops[a + 1 : b + 1])
                        improved = True
            seq = stops[1:-1]
        return seq

    def _finish(self, seq: list[int]) -> OrientSolution:
        seq = self._two_opt(seq)
        tour = Tour(tuple(seq))
        return OrientSolution(
            tour,
            float(self.profit[list(seq)].sum()) if seq else 0.0,
            tour_length(self.metric, tour, True),
        )

    def _insert_sweep(self, seq: list[int], length: float, remaining: list[int], budget: float):
        inserted = False
        while remaining:
            best_ratio = -np.inf
            pick = None
            for v in remaining:
                delta, pos = self._insertion_cost(seq, v)
                if length + delta > budget + LENGTH_TOL:
                    continue
                ratio = self.profit[v] / delta if delta > 1e-15 else np.inf
                if ratio > best_ratio:
                    best_ratio = ratio
                    pick = (v, pos, delta)
            if pick is None:
                break
            v, pos, delta = pick
            seq.insert(pos, v)
            length += delta
            remaining.remove(v)
            inserted = True
        return seq, length, inserted

    def orient(self, budget: float) -> OrientSolution:
        seq: list[int] = []
        length = 0.0
        remaining = list(self.cand)
        # insertion sweeps interleaved with 2-opt: shortening the tour can
        # free budget for further insertions
        for _ in range(3):
            seq, length, inserted = self._insert_sweep(seq, length, remaining, budget)
            shortened = self._two_opt(seq)
            new_length = tour_length(self.metric, Tour(tuple(shortened)), True)
            improved = new_length < length - 1e-12
            seq, length = shortened, new_length
            if not inserted and not improved:
                break
        sol = OrientSolution(
            Tour(tuple(seq)),
            float(self.profit[list(seq)].sum()) if seq else 0.0,
            length,
        )
        if sol.length > budget + LENGTH_TOL:  # 2-opt never lengthens; safety net
            return EMPTY_SOLUTION
        return sol

    def ktsp(self, lam: float) -> OrientSolution | None:
        if lam <= PROFIT_TOL:
            return EMPTY_SOLUTION
        total = float(self.profit[self.cand].sum()) if self.cand else 0.0
        if total < lam - PROFIT_TOL:
            return None
        seq: list[int] = []
        collected = 0.0
        remaining = list(self.cand)
        while collected < lam - PROFIT_TOL and remaining:
            best_key = None
            pick = None
            for v in remaining:
                delta, pos = self._insertion_cost(seq, v)
                ratio = self.profit[v] / delta if delta > 1e-15 else np.inf
                key = (ratio, -delta)
                if best_key is None or key > best_key:
                    best_key = key
                    pick = (v, pos)
            v, pos = pick
            seq.insert(pos, v)
            collected += self.profit[v]
            remaining.remove(v)
        return self._finish(seq)


def make_backend(
    metric: Metric,
    profit,
    excluded=frozenset(),
    exact_limit: int = DEFAULT_EXACT_LIMIT,
    rho: float = 1.0,
    force: str | None = None,
):
    """Pick the exact backend whenever the candidate set is small enough,
    the greedy one otherwise. `force` in {"exact", "greedy"} overrides."""
    profit = np.asarray(profit, dtype=float)
    cand = _candidates(metric, profit, excluded)
    if force == "exact" or (force is None and len(cand) <= exact_limit - 1):
        return ExactOrienteer(metric, profit, excluded, limit=max(exact_limit, len(cand) + 1))
    return GreedyOrienteer(metric, profit, excluded, rho=rho)


def solve_exact(inst: OrientInstance, limit: int = DEFAULT_EXACT_LIMIT) -> OrientSolution:
    """Exact orienteering: maximum profit within the budget, min length among
    maximum-profit tours. Raises SizeError above the exact limit."""
    if inst.metric.n > limit:
        raise SizeError(
            f"n={inst.metric.n} exceeds the exact limit {limit}; use solve_heuristic"
        )
    solver = ExactOrienteer(inst.metric, inst.profit, inst.excluded, limit=limit)
    return solver.orient(inst.budget)


def solve_heuristic(inst: OrientInstance) -> OrientSolution:
    """Feasible orienteering tour (closed length <= budget), no optimality
    guarantee; deterministic for a given instance."""
    solver = GreedyOrienteer(inst.metric, inst.profit, inst.excluded)
    return solver.orient(inst.budget)


def solve_ktsp(
    metric: Metric,
    profit,
    lam: float,
    excluded=frozenset(),
    exact_limit: int = DEFAULT_EXACT_LIMIT,
    force: str | None = None,
) -> OrientSolution | None:
    """Closed tour with collected profit >= lam: minimum length with the exact
    backend, merely feasible with the greedy one. Returns None when the total
    available profit is below lam (the binary search treats this as length
    infinity)."""
    backend = make_backend(metric, profit, excluded, exact_limit, force=force)
    return backend.ktsp(lam)


def bicrit_orient(
    inst: OrientInstance,
    epsilon: float,
    rho: float = 1.0,
    exact_limit: int = DEFAULT_EXACT_LIMIT,
    force: str | None = None,
    backend=None,
) -> OrientSolution:
    """Binary-search bi-criteria orienteering over a k-TSP oracle.

    Searches profit targets lambda in [min positive profit, n * max profit];
    a probe is feasible when the oracle tour has closed length <= rho *
    budget. The bracket shrinks until its width is at most epsilon and the
    feasible endpoint's tour is returned, so with the exact backend the
    result collects at least the exact orienteering optimum minus epsilon
    while spending at most rho * budget.
    """
    if epsilon <= 0:
        raise InputError("epsilon must be positive")
    if rho < 1:
        raise InputError("rho must be at least 1")
    if backend is None:
        backend = make_backend(
            inst.metric, inst.profit, inst.excluded, exact_limit, rho=rho, force=force
        )
    positive = inst.profit[inst.profit > 0.0]
    if positive.size == 0:
        return EMPTY_SOLUTION
    allowance = rho * inst.budget + LENGTH_TOL
    lo = float(positive.min())
    hi = float(inst.metric.n * positive.max())
    sol_hi = backend.ktsp(hi)
    if sol_hi is not None and sol_hi.length <= allowance:
        return sol_hi
    best = backend.ktsp(lo)
    if best is None or best.length > allowance:
        return EMPTY_SOLUTION
    while hi - lo > epsilon:
        mid = 0.5 * (lo + hi)
        sol = backend.ktsp(mid)
        if sol is not None and sol.length <= allowance:
            lo, best = mid, sol
        else:
            hi = mid
    return best
