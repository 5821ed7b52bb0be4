"""Constant repetitions of bi-criteria orienteering with profit zeroing.

One call produces the scale tour for a single (phase, scale) pair: the
bi-criteria solver runs `params.reps` times with budget gamma^phase and
error epsilon; after every repetition the profits of the vertices it
visited drop to zero, so later repetitions solve the residual instance
and the repetition tours stay vertex-disjoint. All repetitions are
recorded, including trailing empty ones (the accounting counts them).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import EMPTY_TOUR, Metric, ParamSet, Tour
from .orienteering import DEFAULT_EXACT_LIMIT, OrientInstance, bicrit_orient


@dataclass(frozen=True)
class RepResult:
    tours: tuple[Tour, ...]
    combined: Tour  # concatenation in repetition order (vertex-disjoint)
    per_rep_profit: tuple[float, ...]

    @property
    def vertices(self) -> tuple[int, ...]:
        return self.combined.vertices


def _reachable_positive(metric: Metric, w: np.ndarray, allowance: float) -> bool:
    root = metric.root
    for v in range(metric.n):
        if v != root and w[v] > 0.0 and 2.0 * metric.dist[root, v] <= allowance:
            return True
    return False


def alg_rep(
    profits,
    metric: Metric,
    phase: int,
    params: ParamSet,
    rho: float = 1.0,
    exact_limit: int = DEFAULT_EXACT_LIMIT,
    force: str | None = None,
) -> RepResult:
    """Run the repetition loop for one phase budget. `profits` are per-vertex
    expectations in [0, 1]; they are copied, never mutated in place."""
    budget = params.gamma**phase
    allowance = rho * budget + 1e-9
    w = np.array(profits, dtype=float)
    tours: list[Tour] = []
    rep_profits: list[float] = []
    for _ in range(params.reps):
        # Once no positive-profit vertex fits a round trip within the
        # allowance, every further repetition is empty; skip the solves.
        if not _reachable_positive(metric, w, allowance):
            remaining = params.reps - len(tours)
            tours.extend([EMPTY_TOUR] * remaining)
            rep_profits.extend([0.0] * remaining)
            break
        sol = bicrit_orient(
            OrientInstance(metric, w, budget),
            params.epsilon,
            rho=rho,
            exact_limit=exact_limit,
            force=force,
        )
        tours.append(sol.tour)
        rep_profits.append(sol.profit_collected)
        if sol.tour.vertices:
            w[list(sol.tour.vertices)] = 0.0
    combined: list[int] = []
    for t in tours:
        combined.extend(t.vertices)
    return RepResult(tuple(tours), Tour(tuple(combined)), tuple(rep_profits))
