"""Probability that some T of n independent discrete costs fit a budget.

Computing P[T within B] := P[exists a size-T subset with total cost <= B]
exactly is NP-hard, so `alg_dp` discretizes each cost to floor(C * n / B)
(truncated at n + 1) and computes the probability that the T smallest
discretized costs sum to at most n. The result is sandwiched:

    P[T within B]  <=  alg_dp(costs, T, B)  <=  P[T within 2B].

The table entry P[i, j, l, m] is the probability that, among the first i
discretized costs, the j smallest sum to l and the j-th smallest equals
m. Entries with j > i, m > l, or m * j < l are impossible and stay zero.
The j = 1 layer comes from the closed form P[min of first i = l]; deeper
layers follow a recursion that branches on the i-th cost being above,
below, or exactly at the j-th smallest value m (the last branch uses
inclusion-exclusion to force the j-th smallest of the first i - 1 costs
to be at least m). The answer for target T is the sum of the layer
(i = n, j = T) over l <= n.

`brute_force_prob` is the independent oracle: it enumerates every
outcome combination and checks the T cheapest directly.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .dists import DiscreteDist
from .errors import InputError, SizeError

# Entries this far below zero indicate a real table inconsistency rather
# than float noise from the inclusion-exclusion branch.
NEG_TOL = 1e-12

BRUTE_FORCE_LIMIT = 10**6


def discretize(costs, budget: float) -> list[DiscreteDist]:
    """Map each support value v to min(floor(v * n / budget), n + 1),
    merging probabilities that collide."""
    if budget <= 0:
        raise InputError("budget must be positive")
    n = len(costs)
    out = []
    for d in costs:
        vals = [float(min(math.floor(v * n / budget), n + 1)) for v in d.support]
        out.append(DiscreteDist.of(vals, d.probs, tol=1e-9))
    return out


def _pmf_tables(dbar: list[DiscreteDist], top: int) -> np.ndarray:
    """pmf[i, x] = P[dbar_i = x] for x in 0..top."""
    n = len(dbar)
    pmf = np.zeros((n, top + 1))
    for i, d in enumerate(dbar):
        for v, p in zip(d.support, d.probs):
            pmf[i, int(v)] += p
    return pmf


def alg_dp(costs, target: int, budget: float, return_table: bool = False):
    """Sandwiched fit probability for selecting `target` of the given costs
    within `budget`. target = 0 always fits; target > len(costs) never does."""
    n = len(costs)
    if budget <= 0:
        raise InputError("budget must be positive")
    if target < 0:
        raise InputError("target must be nonnegative")
    if target == 0:
        return (1.0, None) if return_table else 1.0
    if target > n:
        return (0.0, None) if return_table else 0.0

    dbar = discretize(costs, budget)
    T = target
    pmf = _pmf_tables(dbar, n + 1)  # values live in 0..n+1
    # Tail probabilities over the value grid 0..n (the recursion never needs
    # P[> m] or P[= m] for m beyond n, and values above n cannot be part of
    # a qualifying sum).
    geq = np.zeros((n, n + 2))  # geq[i, x] = P[dbar_i >= x], x in 0..n+1
    for i in range(n):
        geq[i] = pmf[i][::-1].cumsum()[::-1]

    L = n + 1  # l and m each range over 0..n
    # cur[j, l, m] holds P[i, j, l, m] for the current i (j in 1..min(i, T)).
    cur = np.zeros((T + 1, L, L))
    prev = np.zeros((T + 1, L, L))

    ls = np.arange(L)
    for i in range(1, n + 1):
        cur.fill(0.0)
        # j = 1: the minimum of the first i costs equals l (and m = l).
        prod_geq = np.prod(geq[:i, :n + 1], axis=0)  # P[all >= l]
        prod_gt = np.prod(geq[:i, 1 : n + 2], axis=0)  # P[all > l] = P[all >= l+1]
        cur[1, ls, ls] = prod_geq - prod_gt
        jmax = min(i, T)
        for j in range(2, jmax + 1):
            pj = prev[j]
            pj1 = prev[j - 1]
            p_i = pmf[i - 1]
            gt_i = geq[i - 1]
            # cost_i above m: it stays outside the j smallest.
            out = pj * gt_i[1 : L + 1][None, :]
            # cost_i = u < m: it joins the j smallest; the (j-1) smallest of
            # the first i-1 costs sum to l-u with (j-1)-th smallest still m.
            for u in range(0, n + 1):
                pu = p_i[u]
                if pu == 0.0 or u >= L:
                    continue
                if u == 0:
                    block = pj1
                else:
                    block = np.zeros_like(pj1)
                    block[u:, :] = pj1[:-u, :]
                mask = np.zeros(L)
                mask[u + 1 :] = 1.0  # only columns m > u
                out += pu * block * mask[None, :]
            # cost_i = m: include it as the j-th smallest; force the j-th
            # smallest of the first i-1 costs to be >= m via
            # inclusion-exclusion.
            cs = np.cumsum(pj1, axis=1)  # cs[l, m] = sum_{w<=m} pj1[l, w]
            A = np.zeros((L, L))
            for m in range(L):
                if m == 0:
                    A[:, 0] = cs[:, 0]
                else:
                    A[m:, m] = cs[:-m, m]  # row l reads cs[l-m, m]
            diag = pj.copy()  # diag[l, m] = sum_{u>=0} pj[l-u, m-u]
            for l in range(1, L):
                diag[l, 1:] += diag[l - 1, :-1]
            B = np.zeros((L, L))
            B[1:, 1:] = diag[:-1, :-1]  # shift by u >= 1
            out += p_i[:L][None, :] * (A - B)
            low = out.min()
            if low < -NEG_TOL:
                raise ArithmeticError(
                    f"dp table inconsistency: entry {low} at layer i={i}, j={j}"
                )
            np.clip(out, 0.0, None, out=out)
            cur[j] = out
        cur, prev = prev, cur
    table = prev  # layers for i = n
    value = float(table[T].sum())
    value = min(max(value, 0.0), 1.0)
    if return_table:
        return value, table
    return value


def brute_force_prob(costs, target: int, budget: float, limit: int = BRUTE_FORCE_LIMIT) -> float:
    """Exact fit probability by enumerating all outcome combinations and
    summing those whose `target` cheapest realizations total at most budget."""
    n = len(costs)
    if target <= 0:
        return 1.0
    if target > n:
        return 0.0
    combos = 1
    for d in costs:
        combos *= len(d.support)
        if combos > limit:
            raise SizeError(f"{combos}+ outcome combinations exceed the limit {limit}")
    total = 0.0
    for picks in itertools.product(*(range(len(d.support)) for d in costs)):
        p = 1.0
        vals = []
        for d, t in zip(costs, picks):
            p *= d.probs[t]
            vals.append(d.support[t])
        vals.sort()
        if sum(vals[:target]) <= budget:
            total += p
    return min(total, 1.0)


def max_fit_target(costs, budget: float, prob_threshold: float) -> int:
    """Largest T with alg_dp(costs, T, budget) >= prob_threshold, found by
    binary search (the fit probability is nonincreasing in T; T = 0 always
    qualifies)."""
    n = len(costs)
    lo, hi = 0, n
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if alg_dp(costs, mid, budget) >= prob_threshold:
            lo = mid
        else:
            hi = mid - 1
    return lo
