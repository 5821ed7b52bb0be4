"""Non-adaptive solver for stochastic-reward k-TSP.

Pre-processing builds a fixed plan in phases i = 0, 1, ...: phase i works
with tour budget gamma^i and explores truncation scales j = 0..floor(log2 k).
At scale j every unplanned vertex gets profit E[min(R_v * 2^j / k, 1)]
(truncate at k/2^j, rescale to [0,1]); the repetition loop tours as much of
that profit as it can, then a single residual orienteering solve measures
how much profit is still reachable outside the tours (the richness value).
The first scale whose richness reaches the configured threshold - or the
last scale - is critical: its tour, concatenated with the previous scale's
tour, becomes the phase tour. Deeper phases ignore vertices that are
already planned.

Probing walks the concatenated plan, banking every observed reward, and
stops at the first vertex where the running total reaches k. Only the
stopping point depends on the outcomes; the order never does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dists import reward_profit
from .errors import InputError
from .model import (
    REWARD,
    Instance,
    ParamSet,
    Plan,
    ProbeTrace,
    Tour,
)
from .orienteering import DEFAULT_EXACT_LIMIT, make_backend
from .repetition import RepResult, alg_rep


@dataclass(frozen=True)
class ScaleDebug:
    scale: int
    rep: RepResult
    richness: float  # residual orienteering profit after the repetitions


@dataclass(frozen=True)
class RewardPhaseDebug:
    phase: int
    scales: tuple[ScaleDebug, ...]
    critical_scale: int
    tour: Tour


@dataclass(frozen=True)
class RewardPlanDebug:
    phases: tuple[RewardPhaseDebug, ...]
    truncated: bool


def _dedup_concat(first: Tour, second: Tour) -> Tour:
    """Union of two scale tours, keeping the critical scale's order first."""
    seen = set()
    out: list[int] = []
    for v in list(first.vertices) + list(second.vertices):
        if v not in seen:
            seen.add(v)
            out.append(v)
    return Tour(tuple(out))


def build_reward_plan(
    inst: Instance,
    params: ParamSet,
    exact_limit: int = DEFAULT_EXACT_LIMIT,
    rho: float = 1.0,
    force_backend: str | None = None,
) -> tuple[Plan, RewardPlanDebug]:
    if inst.mode != REWARD:
        raise InputError("build_reward_plan requires a reward-mode instance")
    k = inst.k
    if k == 0:
        return Plan((), params), RewardPlanDebug((), False)
    metric = inst.metric
    n = metric.n
    num_scales = int(math.floor(math.log2(k))) + 1  # scales 0..floor(log2 k)
    max_phases = params.resolve_max_phases(metric)
    # Vertices that can ever contribute reward; the rest are never toured.
    interesting = {
        v
        for v in range(n)
        if v != metric.root and any(x >= 1 for x in inst.dists[v].support)
    }
    planned: set[int] = set()
    phases: list[tuple[int, Tour]] = []
    debug_phases: list[RewardPhaseDebug] = []
    truncated = False
    phase = 0
    while interesting - planned:
        if phase >= max_phases:
            truncated = True
            break
        prev_rep: RepResult | None = None  # scale -1 is empty
        scale_debugs: list[ScaleDebug] = []
        chosen: tuple[int, Tour] | None = None
        for j in range(num_scales):
            w = np.zeros(n)
            for v in range(n):
                if v != metric.root and v not in planned:
                    w[v] = reward_profit(inst.dists[v], k, j)
            rep = alg_rep(
                w, metric, phase, params,
                rho=rho, exact_limit=exact_limit, force=force_backend,
            )
            residual = w.copy()
            if rep.vertices:
                residual[list(rep.vertices)] = 0.0
            backend = make_backend(
                metric, residual, exact_limit=exact_limit, rho=rho, force=force_backend
            )
            richness = backend.orient(params.gamma**phase).profit_collected
            scale_debugs.append(ScaleDebug(j, rep, richness))
            if richness >= params.rich_threshold or j == num_scales - 1:
                prev_tour = prev_rep.combined if prev_rep is not None else Tour(())
                chosen = (j, _dedup_concat(rep.combined, prev_tour))
                break
            prev_rep = rep
        j_crit, phase_tour = chosen
        phases.append((phase, phase_tour))
        planned.update(phase_tour.vertices)
        debug_phases.append(
            RewardPhaseDebug(phase, tuple(scale_debugs), j_crit, phase_tour)
        )
        phase += 1
    plan = Plan(tuple(phases), params, truncated=truncated)
    return plan, RewardPlanDebug(tuple(debug_phases), truncated)


def probe_reward(plan: Plan, inst: Instance, outcomes) -> ProbeTrace:
    """Walk the plan on one realized outcome vector.

    Travel accounting: completed phase tours are charged their closed
    length; the stopping phase is charged the open prefix up to the
    stopping vertex plus, when `include_return_leg` is set, the leg back
    to the root. An exhausted plan (total reward below k) charges the
    full plan length and reports failure.
    """
    outcomes = np.asarray(outcomes, dtype=float)
    k = inst.k
    metric = inst.metric
    ret = plan.params.include_return_leg
    if k <= 0:
        return ProbeTrace((), 0.0, 0.0, True, -1)
    acc = 0.0
    traveled = 0.0
    visited: list[int] = []
    d = metric.dist
    root = metric.root
    for i, tour in plan.phases:
        cur = root
        for v in tour.vertices:
            traveled += d[cur, v]
            cur = v
            visited.append(v)
            acc += outcomes[v]
            if acc >= k:
                if ret:
                    traveled += d[cur, root]
                return ProbeTrace(tuple(visited), traveled, traveled, True, i)
        if cur != root:
            traveled += d[cur, root]
    if not ret and visited:
        traveled -= d[visited[-1], root]  # no return leg at the final stop
    last_phase = plan.phases[-1][0] if plan.phases else -1
    return ProbeTrace(tuple(visited), traveled, traveled, False, last_phase)
