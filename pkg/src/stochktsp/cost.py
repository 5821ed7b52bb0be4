"""Non-adaptive solver for stochastic-cost k-TSP.

Pre-processing mirrors the reward solver's phase structure, but the
profit of a vertex at scale j in phase i is the qualification probability
P[C_v <= gamma^i / 2^j], and every scale in 0..floor(i*log2(gamma)+log2 n)
is explored. For each scale the repetition tours (current scale plus the
previous one) are scored by the largest selection target that the
order-statistics DP certifies within budget `cost_budget_mult_dp * gamma^i`
at probability `dp_prob`; the critical scale maximizes that score (ties
to the smallest scale) and contributes the phase tour.

Probing runs two selection processes per phase i. Process 1 selects, from
vertices visited in earlier phases, as many still-unselected vertices as
possible within total cost gamma^i; Process 2 traverses the phase tour
(observing all its costs) and then selects from it within total cost
`cost_budget_mult_select * gamma^i`. Both use cheapest-first order, which
maximizes cardinality under a budget. Probing stops once k vertices are
selected; any visited vertex may be selected in a later phase, and its
observed cost never changes. After the planned tours run out, phases
continue with empty tours - Process 1 keeps selecting under growing
budgets - so a probe fails only when fewer than k vertices were visited
at all.

The objective of a probe is traveled distance plus the realized costs of
the selected vertices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dists import qualify_prob
from .dp import max_fit_target
from .errors import InfeasibleError, InputError
from .model import COST, Instance, ParamSet, Plan, ProbeTrace, Tour
from .orienteering import DEFAULT_EXACT_LIMIT
from .repetition import RepResult, alg_rep
from .reward import _dedup_concat

BUDGET_TOL = 1e-9


@dataclass(frozen=True)
class CostScaleDebug:
    scale: int
    rep: RepResult
    union: Tour  # this scale's tour joined with the previous scale's
    dp_target: int  # largest certified selection target for the union


@dataclass(frozen=True)
class CostPhaseDebug:
    phase: int
    num_scales: int
    scales: tuple[CostScaleDebug, ...]
    critical_scale: int
    tour: Tour


@dataclass(frozen=True)
class CostPlanDebug:
    phases: tuple[CostPhaseDebug, ...]
    truncated: bool


def scale_count(phase: int, n: int, gamma: float) -> int:
    """Scales explored in a phase: j = 0..floor(phase*log2(gamma)+log2 n)."""
    return int(math.floor(phase * math.log2(gamma) + math.log2(n))) + 1


def build_cost_plan(
    inst: Instance,
    params: ParamSet,
    exact_limit: int = DEFAULT_EXACT_LIMIT,
    rho: float = 1.0,
    force_backend: str | None = None,
) -> tuple[Plan, CostPlanDebug]:
    if inst.mode != COST:
        raise InputError("build_cost_plan requires a cost-mode instance")
    if inst.k > inst.n:
        raise InfeasibleError(f"target k={inst.k} exceeds the vertex count {inst.n}")
    if inst.k < 1:
        return Plan((), params), CostPlanDebug((), False)
    metric = inst.metric
    n = metric.n
    max_phases = params.resolve_max_phases(metric)
    planned: set[int] = set()
    all_nonroot = {v for v in range(n) if v != metric.root}
    phases: list[tuple[int, Tour]] = []
    debug_phases: list[CostPhaseDebug] = []
    truncated = False
    phase = 0
    while all_nonroot - planned:
        if phase >= max_phases:
            truncated = True
            break
        budget = params.gamma**phase
        num_scales = scale_count(phase, n, params.gamma)
        prev_rep: RepResult | None = None
        scale_debugs: list[CostScaleDebug] = []
        for j in range(num_scales):
            threshold = budget / 2.0**j
            w = np.zeros(n)
            for v in range(n):
                if v != metric.root and v not in planned:
                    w[v] = qualify_prob(inst.dists[v], threshold)
            rep = alg_rep(
                w, metric, phase, params,
                rho=rho, exact_limit=exact_limit, force=force_backend,
            )
            prev_tour = prev_rep.combined if prev_rep is not None else Tour(())
            union = _dedup_concat(rep.combined, prev_tour)
            costs = [inst.dists[v] for v in union.vertices]
            dp_target = max_fit_target(
                costs, params.cost_budget_mult_dp * budget, params.dp_prob
            )
            scale_debugs.append(CostScaleDebug(j, rep, union, dp_target))
            prev_rep = rep
        # critical scale: argmax of the certified targets, smallest scale wins ties
        j_crit = max(
            range(num_scales), key=lambda j: (scale_debugs[j].dp_target, -j)
        )
        phase_tour = scale_debugs[j_crit].union
        phases.append((phase, phase_tour))
        planned.update(phase_tour.vertices)
        debug_phases.append(
            CostPhaseDebug(phase, num_scales, tuple(scale_debugs), j_crit, phase_tour)
        )
        phase += 1
    plan = Plan(tuple(phases), params, truncated=truncated)
    return plan, CostPlanDebug(tuple(debug_phases), truncated)


def select_cheapest_first(pool_costs: list[tuple[float, int]], budget: float, cap: int):
    """Cheapest-first selection under a budget: returns (chosen vertices,
    spend). Sorting by cost maximizes cardinality among all subsets with
    total cost <= budget; ties break toward the lower vertex index."""
    chosen: list[int] = []
    spend = 0.0
    for c, v in sorted(pool_costs):
        if len(chosen) >= cap:
            break
        if spend + c <= budget + BUDGET_TOL:
            chosen.append(v)
            spend += c
    return chosen, spend


def probe_cost(plan: Plan, inst: Instance, outcomes, max_extra_phases: int = 200) -> ProbeTrace:
    """Walk the plan on one realized cost vector; see the module docstring
    for the phase semantics. `max_extra_phases` only guards the post-plan
    continuation loop; it is never reached on feasible traces because the
    Process-1 budget grows geometrically."""
    outcomes = np.asarray(outcomes, dtype=float)
    k = inst.k
    metric = inst.metric
    params = plan.params
    ret = params.include_return_leg
    d = metric.dist
    root = metric.root
    if k <= 0:
        return ProbeTrace((), 0.0, 0.0, True, -1)
    visited: list[int] = []
    selected: dict[int, float] = {}
    traveled = 0.0
    spent1: list[float] = []
    spent2: list[float] = []
    mult2 = params.cost_budget_mult_select
    stopped_in_tour = False

    def trace(success: bool, stop_phase: int) -> ProbeTrace:
        t = traveled
        if not ret and visited and not stopped_in_tour:
            # the walk ends wherever it stands; refund the final closing leg
            t -= d[visited[-1], root]
        objective = t + sum(selected.values())
        return ProbeTrace(
            tuple(visited), t, objective, success, stop_phase,
            dict(selected), tuple(spent1), tuple(spent2),
        )

    def run_phase(i: int, tour: Tour) -> bool:
        """Returns True when probing stops (k selected) during this phase."""
        nonlocal traveled
        budget1 = params.gamma**i
        pool1 = [(float(outcomes[v]), v) for v in visited if v not in selected]
        chosen, spend = select_cheapest_first(pool1, budget1, k - len(selected))
        for v in chosen:
            selected[v] = float(outcomes[v])
        spent1.append(spend)
        if len(selected) >= k:
            spent2.append(0.0)
            return True  # stopped at the root; no travel this phase
        cur = root
        for v in tour.vertices:
            traveled += d[cur, v]
            cur = v
            visited.append(v)
        pool2 = [(float(outcomes[v]), v) for v in tour.vertices if v not in selected]
        chosen, spend = select_cheapest_first(pool2, mult2 * budget1, k - len(selected))
        for v in chosen:
            selected[v] = float(outcomes[v])
        spent2.append(spend)
        if len(selected) >= k:
            nonlocal stopped_in_tour
            stopped_in_tour = True
            if ret and cur != root:
                traveled += d[cur, root]
            return True
        if cur != root:
            traveled += d[cur, root]  # close the phase tour and continue
        return False

    last_phase = -1
    for i, tour in plan.phases:
        last_phase = i
        if run_phase(i, tour):
            return trace(True, i)
    # Planned tours exhausted: keep running Selection-Process 1 with growing
    # budgets. Succeeds iff at least k vertices were visited at all.
    if len(visited) >= k:
        for i in range(last_phase + 1, last_phase + 1 + max_extra_phases):
            if run_phase(i, Tour(())):
                return trace(True, i)
    return trace(False, last_phase)
