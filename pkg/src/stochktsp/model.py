"""Core types: metric, instance, tours, plans, solver parameters.

All types are immutable after construction and safe to share between
workers. Distances live in a dense n-by-n matrix; instances are desk
scale, so there is no sparse machinery. Solvers assume the metric has
been rescaled so every off-diagonal distance is at least 1 (phase
budgets start at gamma^0 = 1, which must not reach any vertex).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dists import ZERO_DIST, DiscreteDist
from .errors import DegenerateMetricError, InputError

METRIC_TOL = 1e-9

REWARD = "reward"
COST = "cost"


@dataclass(frozen=True)
class Metric:
    """Finite metric with a distinguished root vertex."""

    dist: np.ndarray
    root: int = 0

    def __post_init__(self):
        d = np.array(self.dist, dtype=float)
        d.setflags(write=False)
        object.__setattr__(self, "dist", d)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise InputError(f"distance matrix must be square, got shape {d.shape}")
        if not (0 <= self.root < d.shape[0]):
            raise InputError(f"root {self.root} out of range for n={d.shape[0]}")

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    def d(self, u: int, v: int) -> float:
        return float(self.dist[u, v])

    def min_offdiag(self) -> float:
        if self.n < 2:
            return math.inf
        d = self.dist.copy()
        np.fill_diagonal(d, np.inf)
        return float(d.min())

    def max_dist(self) -> float:
        return float(self.dist.max()) if self.n > 1 else 0.0


@dataclass(frozen=True)
class Violation:
    kind: str  # "diagonal" | "asymmetry" | "triangle" | "negative"
    where: tuple[int, ...]
    detail: str


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    violations: tuple[Violation, ...]


def validate_metric(m: Metric, tol: float = METRIC_TOL) -> ValidationResult:
    """Report every violated metric invariant with the offending indices."""
    d = m.dist
    bad: list[Violation] = []
    n = m.n
    for v in range(n):
        if abs(d[v, v]) > tol:
            bad.append(Violation("diagonal", (v,), f"dist[{v}][{v}] = {d[v, v]}"))
    neg = np.argwhere(d < -tol)
    for u, v in neg:
        bad.append(Violation("negative", (int(u), int(v)), f"dist[{u}][{v}] = {d[u, v]}"))
    asym = np.argwhere(np.abs(d - d.T) > tol)
    for u, v in asym:
        if u < v:
            bad.append(
                Violation("asymmetry", (int(u), int(v)), f"{d[u, v]} != {d[v, u]}")
            )
    # Triangle inequality over all ordered triples; n is small by design.
    for u in range(n):
        slack = d[u, :][:, None] + d  # slack[v, w] = d[u,v] + d[v,w]
        viol = np.argwhere(d[u][None, :] > slack + tol)
        for v, w in viol:
            bad.append(
                Violation(
                    "triangle",
                    (u, int(v), int(w)),
                    f"dist[{u}][{w}] = {d[u, w]} > {d[u, v]} + {d[v, w]}",
                )
            )
    return ValidationResult(ok=not bad, violations=tuple(bad))


def rescale_metric(m: Metric) -> tuple[Metric, float]:
    """Scale the metric up so every off-diagonal distance is >= 1.

    Returns (scaled metric, factor s) with output = input * s. The factor is
    1/min off-diagonal distance when that minimum is below 1, else 1
    (rescaling only ever scales up). Raises DegenerateMetricError when all
    off-diagonal distances are zero.
    """
    if m.n < 2:
        return m, 1.0
    lo = m.min_offdiag()
    if lo <= 0.0:
        raise DegenerateMetricError("all-zero or zero off-diagonal distance")
    if lo >= 1.0:
        return m, 1.0
    s = 1.0 / lo
    return Metric(m.dist * s, m.root), s


@dataclass(frozen=True)
class Tour:
    """Ordered distinct non-root vertices; interpreted as a rooted closed walk."""

    vertices: tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.vertices)

    def __iter__(self):
        return iter(self.vertices)


EMPTY_TOUR = Tour(())


def _check_tour(m: Metric, t: Tour) -> None:
    vs = t.vertices
    if len(set(vs)) != len(vs):
        raise InputError(f"tour repeats a vertex: {vs}")
    for v in vs:
        if v == m.root:
            raise InputError("tour must not contain the root")
        if not (0 <= v < m.n):
            raise InputError(f"tour vertex {v} out of range")


def tour_length(m: Metric, t: Tour, include_return: bool = True) -> float:
    """Length of the rooted walk through the tour; empty tours have length 0."""
    _check_tour(m, t)
    vs = t.vertices
    if not vs:
        return 0.0
    total = m.d(m.root, vs[0])
    for a, b in zip(vs, vs[1:]):
        total += m.d(a, b)
    if include_return:
        total += m.d(vs[-1], m.root)
    return total


@dataclass(frozen=True)
class ParamSet:
    """Solver knobs; `paper()` gives the published constants, `desk()` a
    small-instance preset that keeps plans readable at n <= a few dozen."""

    gamma: float = 1.1
    epsilon: float = 1e-5
    reps: int = 6000
    rich_threshold: float = 1.0 / 300.0
    dp_prob: float = 0.2
    cost_budget_mult_dp: float = 3.0
    cost_budget_mult_select: float = 6.0
    include_return_leg: bool = True
    max_phases: int | None = None  # None: derived from the instance

    def __post_init__(self):
        if not self.gamma > 1:
            raise InputError("gamma must exceed 1")
        if not self.epsilon > 0:
            raise InputError("epsilon must be positive")
        if self.reps < 1:
            raise InputError("reps must be a positive integer")
        if not (0 < self.dp_prob < 1):
            raise InputError("dp_prob must lie in (0, 1)")

    @staticmethod
    def paper(**overrides) -> "ParamSet":
        return replace(ParamSet(), **overrides)

    @staticmethod
    def desk(**overrides) -> "ParamSet":
        base = ParamSet(gamma=2.0, reps=8, rich_threshold=0.25)
        return replace(base, **overrides)

    def resolve_max_phases(self, metric: Metric) -> int:
        """Safety cap: once gamma^i covers a full tour of everything, any
        feasible plan is complete, so a few phases beyond that suffice."""
        if self.max_phases is not None:
            return self.max_phases
        span = max(2.0 * metric.n * max(metric.max_dist(), 1.0), self.gamma)
        return int(math.ceil(math.log(span, self.gamma))) + 4


PRESETS = {"paper": ParamSet.paper, "desk": ParamSet.desk}


@dataclass(frozen=True)
class Instance:
    """Metric plus the per-vertex reward or cost distributions and target k."""

    metric: Metric
    mode: str
    k: int
    dists: tuple[DiscreteDist, ...]

    def __post_init__(self):
        if self.mode not in (REWARD, COST):
            raise InputError(f"mode must be '{REWARD}' or '{COST}'")
        if self.k < 0:
            raise InputError("target k must be nonnegative")
        if len(self.dists) != self.metric.n:
            raise InputError("need one distribution per vertex")
        # The root never carries reward/cost; force the zero distribution.
        ds = list(self.dists)
        ds[self.metric.root] = ZERO_DIST
        if self.mode == REWARD:
            fixed = []
            for v, d in enumerate(ds):
                if v == self.metric.root:
                    fixed.append(d)
                    continue
                vals = []
                for x in d.support:
                    r = round(x)
                    if abs(x - r) > 1e-9:
                        raise InputError(
                            f"reward support must be integral, vertex {v} has {x}"
                        )
                    if r > self.k:
                        raise InputError(
                            f"reward support exceeds target: vertex {v} has {r} > k={self.k}"
                        )
                    vals.append(float(r))
                fixed.append(DiscreteDist(tuple(vals), d.probs))
            ds = fixed
        object.__setattr__(self, "dists", tuple(ds))

    @property
    def n(self) -> int:
        return self.metric.n

    @property
    def root(self) -> int:
        return self.metric.root


def rescale_instance(inst: Instance) -> tuple[Instance, float]:
    """Rescale the metric to min distance 1; in cost mode the cost
    distributions are multiplied by the same factor, preserving objective
    ratios. Reward values are untouched (they are counts, not lengths)."""
    metric, s = rescale_metric(inst.metric)
    if s == 1.0:
        return inst, 1.0
    dists = inst.dists
    if inst.mode == COST:
        dists = tuple(d.scaled(s) for d in dists)
    return Instance(metric, inst.mode, inst.k, dists), s


@dataclass(frozen=True)
class Plan:
    """Phase-indexed rooted tours; the fixed probing order of a solver run.

    The traversal visits each phase tour as a closed loop (root to root),
    so the travel charged to a plan prefix is the sum of closed lengths of
    the finished phases plus the open prefix of the current one.
    """

    phases: tuple[tuple[int, Tour], ...]
    params: ParamSet
    truncated: bool = False  # max_phases hit with vertices still unplanned

    def order(self) -> tuple[int, ...]:
        out: list[int] = []
        for _, t in self.phases:
            out.extend(t.vertices)
        return tuple(out)

    def vertex_set(self) -> frozenset[int]:
        return frozenset(self.order())

    def total_length(self, metric: Metric) -> float:
        return sum(tour_length(metric, t, True) for _, t in self.phases)

    def phase_of_position(self) -> tuple[int, ...]:
        """Phase index of each position in the concatenated visit order."""
        out: list[int] = []
        for i, t in self.phases:
            out.extend([i] * len(t))
        return tuple(out)


@dataclass(frozen=True)
class ProbeTrace:
    """Outcome of walking a plan (or adaptive policy) on one realization."""

    visited: tuple[int, ...]
    traveled: float
    objective: float
    success: bool
    stop_phase: int  # -1 when the target was met before any phase began
    selected: dict[int, float] = field(default_factory=dict)  # cost mode only
    spent_select_1: tuple[float, ...] = ()  # per entered phase, cost mode
    spent_select_2: tuple[float, ...] = ()
