"""Instance families for tests and benchmarks.

Every family is deterministic given (family, seed): the same spec always
produces byte-identical instances. Emitted metrics are valid and rescaled
so the minimum off-diagonal distance is 1. `oracle_safe` variants append
a deterministic fallback vertex so the adaptive oracle's almost-sure
feasibility certificate holds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dists import DiscreteDist
from .errors import InputError
from .model import COST, REWARD, Instance, Metric, rescale_instance, validate_metric

FAMILIES = ("star", "line", "euclid", "heavy_tail_reward", "pandora_cost")


@dataclass(frozen=True)
class GenSpec:
    family: str
    n: int
    k: int
    seed: int
    mode: str = REWARD
    oracle_safe: bool = False
    # family parameters (all optional)
    dist_range: tuple[float, float] = (1.0, 4.0)  # spoke / gap range
    support_size: int = 3
    cost_range: tuple[float, float] = (0.0, 4.0)
    jackpot_coeff: float = 10.0  # heavy_tail_reward: P[R=k] = min(1, c/sqrt(k))

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InputError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.n < 2:
            raise InputError("need n >= 2 (root plus at least one vertex)")
        if self.k < 0:
            raise InputError("k must be nonnegative")
        if self.support_size < 1:
            raise InputError("support_size must be positive")
        if self.family == "heavy_tail_reward" and self.mode != REWARD:
            raise InputError("heavy_tail_reward is a reward-mode family")
        if self.family == "pandora_cost" and self.mode != COST:
            raise InputError("pandora_cost is a cost-mode family")


def _star_metric(spokes: np.ndarray) -> Metric:
    """Star with the root at the hub; leaf-to-leaf distance is the spoke sum
    (the unique metric completion of a star)."""
    n = len(spokes) + 1
    d = np.zeros((n, n))
    d[0, 1:] = spokes
    d[1:, 0] = spokes
    for a in range(1, n):
        for b in range(1, n):
            if a != b:
                d[a, b] = spokes[a - 1] + spokes[b - 1]
    return Metric(d, root=0)


def _line_metric(gaps: np.ndarray) -> Metric:
    pos = np.concatenate([[0.0], np.cumsum(gaps)])
    d = np.abs(pos[:, None] - pos[None, :])
    return Metric(d, root=0)


def _euclid_metric(rng: np.random.Generator, n: int) -> Metric:
    pts = rng.random((n, 2))
    d = np.linalg.norm(pts[:, None] - pts[None, :], axis=2)
    return Metric(d, root=0)


def _random_reward_dist(rng: np.random.Generator, k: int, support_size: int) -> DiscreteDist:
    size = int(rng.integers(1, support_size + 1))
    vals = sorted(set(int(x) for x in rng.integers(0, k + 1, size=size)))
    probs = rng.random(len(vals)) + 0.05
    probs = probs / probs.sum()
    return DiscreteDist.of([float(v) for v in vals], probs)


def _random_cost_dist(rng: np.random.Generator, lo: float, hi: float, support_size: int) -> DiscreteDist:
    size = int(rng.integers(1, support_size + 1))
    vals = sorted(set(round(float(x), 6) for x in rng.uniform(lo, hi, size=size)))
    probs = rng.random(len(vals)) + 0.05
    probs = probs / probs.sum()
    return DiscreteDist.of(vals, probs)


def generate(spec: GenSpec) -> Instance:
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    k = spec.k
    build = {
        "star": _gen_star,
        "line": _gen_line,
        "euclid": _gen_euclid,
        "heavy_tail_reward": _gen_heavy_tail,
        "pandora_cost": _gen_pandora,
    }[spec.family]
    inst = build(spec, rng)
    if spec.oracle_safe:
        inst = _add_fallback(spec, inst)
    inst, _ = rescale_instance(inst)
    check = validate_metric(inst.metric)
    if not check.ok:  # families are metric by construction; belt and braces
        raise InputError(f"generated metric invalid: {check.violations[:3]}")
    return inst


def _mode_dists(spec: GenSpec, rng: np.random.Generator, n: int) -> list[DiscreteDist]:
    out = [DiscreteDist.point(0.0)]
    for _ in range(n - 1):
        if spec.mode == REWARD:
            out.append(_random_reward_dist(rng, spec.k, spec.support_size))
        else:
            lo, hi = spec.cost_range
            out.append(_random_cost_dist(rng, lo, hi, spec.support_size))
    return out


def _gen_star(spec: GenSpec, rng: np.random.Generator) -> Instance:
    lo, hi = spec.dist_range
    spokes = rng.uniform(lo, hi, size=spec.n - 1)
    return Instance(_star_metric(spokes), spec.mode, spec.k, tuple(_mode_dists(spec, rng, spec.n)))


def _gen_line(spec: GenSpec, rng: np.random.Generator) -> Instance:
    lo, hi = spec.dist_range
    gaps = rng.uniform(lo, hi, size=spec.n - 1)
    return Instance(_line_metric(gaps), spec.mode, spec.k, tuple(_mode_dists(spec, rng, spec.n)))


def _gen_euclid(spec: GenSpec, rng: np.random.Generator) -> Instance:
    metric = _euclid_metric(rng, spec.n)
    if metric.min_offdiag() <= 0.0:
        raise InputError("degenerate euclidean sample (coincident points)")
    return Instance(metric, spec.mode, spec.k, tuple(_mode_dists(spec, rng, spec.n)))


def _gen_heavy_tail(spec: GenSpec, rng: np.random.Generator) -> Instance:
    """The classic trap for expectation-greedy probing: a cheap cluster
    supplies all but sqrt(k) of the target deterministically, and the
    remainder can come from either a safe deterministic-sqrt(k) vertex or a
    jackpot vertex paying k with probability ~ c/sqrt(k)."""
    k = spec.k
    if k < 4:
        raise InputError("heavy_tail_reward needs k >= 4")
    root_k = int(math.ceil(math.sqrt(k)))
    cluster_total = k - root_k
    n_cluster = max(spec.n - 3, 1)
    base = cluster_total // n_cluster
    rewards = [base] * n_cluster
    rewards[0] += cluster_total - base * n_cluster
    rewards = [min(r, k) for r in rewards]
    spokes = [1.0] * n_cluster
    far = 2.0
    spokes += [far, far]  # jackpot and safe vertex at equal distance
    dists: list[DiscreteDist] = [DiscreteDist.point(0.0)]
    dists += [DiscreteDist.point(float(r)) for r in rewards]
    p_jackpot = min(1.0, spec.jackpot_coeff / math.sqrt(k))
    if p_jackpot >= 1.0:
        dists.append(DiscreteDist.point(float(k)))
    else:
        dists.append(DiscreteDist.of([0.0, float(k)], [1.0 - p_jackpot, p_jackpot]))
    dists.append(DiscreteDist.point(float(root_k)))
    return Instance(_star_metric(np.array(spokes)), REWARD, k, tuple(dists))


def _gen_pandora(spec: GenSpec, rng: np.random.Generator) -> Instance:
    """Fixed probing prices on a star: vertex i sits at distance price_i / 2,
    so a closed visit costs exactly its price."""
    lo, hi = spec.dist_range
    prices = rng.uniform(max(lo, 0.5), hi, size=spec.n - 1) * 2.0
    spokes = prices / 2.0
    dists = [DiscreteDist.point(0.0)]
    clo, chi = spec.cost_range
    for _ in range(spec.n - 1):
        dists.append(_random_cost_dist(rng, clo, chi, spec.support_size))
    return Instance(_star_metric(spokes), COST, spec.k, tuple(dists))


def _add_fallback(spec: GenSpec, inst: Instance) -> Instance:
    """Reward mode: append a vertex with deterministic reward k, making the
    almost-sure feasibility certificate hold. Cost mode: feasibility only
    needs k selectable vertices, which the caller's n already provides; the
    fallback adds one more cheap deterministic vertex for slack."""
    n = inst.n
    far = float(inst.metric.max_dist()) if n > 1 else 1.0
    d = np.zeros((n + 1, n + 1))
    d[:n, :n] = inst.metric.dist
    root = inst.metric.root
    for v in range(n):
        # star-like attachment through the root keeps the triangle inequality
        d[v, n] = d[n, v] = (0.0 if v == root else inst.metric.dist[v, root]) + far
    metric = Metric(d, root=root)
    if inst.mode == REWARD:
        extra = DiscreteDist.point(float(inst.k))
    else:
        extra = DiscreteDist.point(1.0)
    return Instance(metric, inst.mode, inst.k, inst.dists + (extra,))
