"""Monte Carlo and exact evaluation of plans, plus desk-scale oracles.

Simulation draws one uniform variate per (trial, vertex) from a stream
keyed only by the seed, maps them through each vertex's inverse CDF, and
replays the probing policy per trial. Trial outcomes depend on the trial
index alone, never on the worker that processed it, so reports are
bit-identical for any --workers value; aggregation runs over the full
trial-ordered objective array.

The adaptive oracles compute the exact optimum over all adaptive
policies by memoized backward induction and are deliberately guarded to
micro instances; they anchor every approximation-ratio measurement.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .cost import probe_cost, select_cheapest_first
from .dists import expectation, qualify_prob
from .errors import InfeasibleError, InputError, SizeError
from .model import COST, EMPTY_TOUR as _EMPTY_TOUR, REWARD, Instance, Plan, ProbeTrace
from .reward import probe_reward

CHUNK_TRIALS = 4096  # fixed chunking keeps results independent of workers


@dataclass(frozen=True)
class SimReport:
    mean_objective: float
    stderr: float
    trials: int
    success_rate: float
    phase_entry_freq: tuple[float, ...]
    seed: int


@dataclass(frozen=True)
class ExactEval:
    value: float  # expected objective (failures charged per probe semantics)
    success_prob: float
    combos: int

    @property
    def feasible(self) -> bool:
        return self.success_prob >= 1.0 - 1e-12


@dataclass(frozen=True)
class OracleValue:
    value: float
    policy_size: int


def draw_outcomes(inst: Instance, trials: int, seed: int) -> np.ndarray:
    """(trials, n) matrix of realized values; row t is trial t's world."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    u = rng.random((trials, inst.n))
    out = np.empty((trials, inst.n))
    for v in range(inst.n):
        d = inst.dists[v]
        if len(d.support) == 1:
            out[:, v] = d.support[0]
        else:
            idx = np.searchsorted(d.cum_probs, u[:, v], side="right")
            out[:, v] = np.asarray(d.support)[np.minimum(idx, len(d.support) - 1)]
    return out


class PlanPolicy:
    """Adapter: replay a fixed plan through the mode's probe function."""

    def __init__(self, plan: Plan, mode: str):
        if mode not in (REWARD, COST):
            raise InputError(f"unknown mode {mode!r}")
        self.plan = plan
        self.mode = mode

    def probe(self, inst: Instance, outcomes) -> ProbeTrace:
        if self.mode == REWARD:
            return probe_reward(self.plan, inst, outcomes)
        return probe_cost(self.plan, inst, outcomes)

    def phase_indices(self) -> tuple[int, ...]:
        return tuple(i for i, _ in self.plan.phases)


def _fast_reward_batch(plan: Plan, inst: Instance, outcomes: np.ndarray):
    """Vectorized probe_reward over all trials; must agree with probe_reward
    trial by trial (covered by tests)."""
    metric = inst.metric
    ret = plan.params.include_return_leg
    order = plan.order()
    k = inst.k
    trials = outcomes.shape[0]
    if k <= 0:
        z = np.zeros(trials)
        return z, np.ones(trials, dtype=bool), np.full(trials, -1)
    phase_of = np.asarray(plan.phase_of_position(), dtype=int)
    d = metric.dist
    root = metric.root
    # travel charged when stopping at position p, and the full-plan charge
    stop_cost = np.zeros(len(order))
    run = 0.0
    cur = root
    phase_start = {}
    for p, v in enumerate(order):
        if p == 0 or phase_of[p] != phase_of[p - 1]:
            if cur != root:
                run += d[cur, root]
            cur = root
        run += d[cur, v]
        cur = v
        stop_cost[p] = run + (d[v, root] if ret else 0.0)
    full = run + (d[cur, root] if (cur != root and ret) else 0.0)
    if not order:
        full = 0.0
    vals = outcomes[:, list(order)] if order else np.zeros((trials, 0))
    cum = np.cumsum(vals, axis=1)
    reached = cum >= k
    success = reached.any(axis=1) if order else np.zeros(trials, dtype=bool)
    stop_pos = np.where(success, np.argmax(reached, axis=1) if order else 0, 0)
    objective = np.where(success, stop_cost[stop_pos] if order else 0.0, full)
    last_phase = plan.phases[-1][0] if plan.phases else -1
    stop_phase = np.where(success, phase_of[stop_pos] if order else -1, last_phase)
    return objective, success, stop_phase


def _run_chunk(policy, inst: Instance, outcomes: np.ndarray):
    objectives = np.empty(outcomes.shape[0])
    successes = np.empty(outcomes.shape[0], dtype=bool)
    stop_phases = np.empty(outcomes.shape[0], dtype=int)
    for t in range(outcomes.shape[0]):
        tr = policy.probe(inst, outcomes[t])
        objectives[t] = tr.objective
        successes[t] = tr.success
        stop_phases[t] = tr.stop_phase
    return objectives, successes, stop_phases


def simulate(
    plan_or_policy,
    inst: Instance,
    trials: int,
    seed: int,
    workers: int = 1,
) -> SimReport:
    """Estimate the expected objective of a plan or adaptive policy.

    Deterministic for fixed (instance, plan/policy, trials, seed); the
    worker count changes wall-clock time only.
    """
    if trials < 1:
        raise InputError("trials must be at least 1")
    policy = plan_or_policy
    if isinstance(plan_or_policy, Plan):
        policy = PlanPolicy(plan_or_policy, inst.mode)
    outcomes = draw_outcomes(inst, trials, seed)
    fast = (
        isinstance(policy, PlanPolicy)
        and policy.mode == REWARD
    )
    if fast:
        objectives, successes, stop_phases = _fast_reward_batch(
            policy.plan, inst, outcomes
        )
    else:
        chunks = [
            outcomes[s : s + CHUNK_TRIALS] for s in range(0, trials, CHUNK_TRIALS)
        ]
        if workers > 1 and len(chunks) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                parts = list(
                    pool.map(_run_chunk, *zip(*((policy, inst, c) for c in chunks)))
                )
        else:
            parts = [_run_chunk(policy, inst, c) for c in chunks]
        objectives = np.concatenate([p[0] for p in parts])
        successes = np.concatenate([p[1] for p in parts])
        stop_phases = np.concatenate([p[2] for p in parts])
    mean = float(np.mean(objectives))
    stderr = (
        float(np.std(objectives, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    )
    # empirical frequency of entering each plan phase (index = phase number)
    if isinstance(policy, PlanPolicy):
        phase_ids = policy.phase_indices()
    else:
        phase_ids = tuple(range(int(stop_phases.max()) + 1)) if trials else ()
    freq = []
    for i in phase_ids:
        entered = (~successes) | (stop_phases >= i)
        freq.append(float(np.mean(entered)))
    return SimReport(mean, stderr, trials, float(np.mean(successes)), tuple(freq), seed)


def _combo_guard(dists, limit=10**6) -> int:
    combos = 1
    for d in dists:
        combos *= len(d.support)
        if combos > limit:
            raise SizeError(f"outcome combinations exceed {limit}")
    return combos


def evaluate_exact(plan: Plan, inst: Instance) -> ExactEval:
    """Exact expected objective of a plan by outcome enumeration in visit
    order; outcomes beyond the stopping prefix integrate out."""
    order = plan.order()
    _combo_guard([inst.dists[v] for v in order])
    if inst.mode == REWARD:
        return _evaluate_exact_reward(plan, inst)
    return _evaluate_exact_cost(plan, inst)


def _evaluate_exact_reward(plan: Plan, inst: Instance) -> ExactEval:
    metric = inst.metric
    k = inst.k
    ret = plan.params.include_return_leg
    d = metric.dist
    root = metric.root
    order = plan.order()
    phase_of = plan.phase_of_position()
    if k <= 0:
        return ExactEval(0.0, 1.0, 1)
    # travel cost when stopping at position p (as in the batch prober)
    stop_cost = np.zeros(len(order))
    run = 0.0
    cur = root
    for p, v in enumerate(order):
        if p == 0 or phase_of[p] != phase_of[p - 1]:
            if cur != root:
                run += d[cur, root]
            cur = root
        run += d[cur, v]
        cur = v
        stop_cost[p] = run + (d[v, root] if ret else 0.0)
    full = run if not order else run + (d[cur, root] if ret else 0.0)
    total = 0.0
    succ = 0.0
    combos = 0

    def rec(pos: int, acc: float, prob: float):
        nonlocal total, succ, combos
        if acc >= k:
            total += prob * (stop_cost[pos - 1] if pos > 0 else 0.0)
            succ += prob
            combos += 1
            return
        if pos == len(order):
            total += prob * full
            combos += 1
            return
        dist = inst.dists[order[pos]]
        for v, p in zip(dist.support, dist.probs):
            rec(pos + 1, acc + v, prob * p)

    rec(0, 0.0, 1.0)
    return ExactEval(total, succ, combos)


def _evaluate_exact_cost(plan: Plan, inst: Instance) -> ExactEval:
    """Phase-wise enumeration: a phase's outcomes are only branched on when
    probing actually reaches that phase; everything beyond the stopping
    phase integrates out. The per-phase logic is probe_cost's, replayed on
    the enumerated prefix."""
    if inst.k <= 0:
        return ExactEval(0.0, 1.0, 1)
    k = inst.k
    params = plan.params
    metric = inst.metric
    d = metric.dist
    root = metric.root
    ret = params.include_return_leg
    mult2 = params.cost_budget_mult_select
    total = 0.0
    succ = 0.0
    combos = 0

    def phase_step(i, tour, visited, costs, selected_cost, selected_set, traveled):
        """Apply Process 1 / traverse / Process 2; returns the updated state
        and whether probing stopped ('tour'/'root') or continues (None)."""
        budget1 = params.gamma**i
        pool1 = [(costs[v], v) for v in visited if v not in selected_set]
        chosen, _ = select_cheapest_first(pool1, budget1, k - len(selected_set))
        selected_set = selected_set | set(chosen)
        selected_cost = selected_cost + sum(costs[v] for v in chosen)
        if len(selected_set) >= k:
            return visited, selected_cost, selected_set, traveled, "root"
        cur = root
        for v in tour.vertices:
            traveled += d[cur, v]
            cur = v
        visited = visited + tuple(tour.vertices)
        pool2 = [(costs[v], v) for v in tour.vertices if v not in selected_set]
        chosen, _ = select_cheapest_first(pool2, mult2 * budget1, k - len(selected_set))
        selected_set = selected_set | set(chosen)
        selected_cost = selected_cost + sum(costs[v] for v in chosen)
        if len(selected_set) >= k:
            if ret and cur != root:
                traveled += d[cur, root]
            return visited, selected_cost, selected_set, traveled, "tour"
        if cur != root:
            traveled += d[cur, root]
        return visited, selected_cost, selected_set, traveled, None

    def settle(prob, visited, costs, selected_cost, selected_set, traveled, last_phase, stopped):
        nonlocal total, succ, combos
        combos += 1
        if stopped is None:
            # planned tours exhausted; continue Process 1 with growing budgets
            i = last_phase
            while stopped is None and len(visited) >= k:
                i += 1
                visited, selected_cost, selected_set, traveled, stopped = phase_step(
                    i, _EMPTY_TOUR, visited, costs, selected_cost, selected_set, traveled
                )
                if i > last_phase + 400:
                    break
        if not ret and visited and stopped != "tour":
            traveled -= d[visited[-1], root]
        if stopped is not None:
            succ += prob
        total += prob * (traveled + selected_cost)

    def rec(phase_idx, prob, visited, costs, selected_cost, selected_set, traveled):
        if phase_idx == len(plan.phases):
            settle(prob, visited, costs, selected_cost, selected_set, traveled,
                   plan.phases[-1][0] if plan.phases else -1, None)
            return
        i, tour = plan.phases[phase_idx]
        branches = [((), prob)]
        for v in tour.vertices:
            dist = inst.dists[v]
            branches = [
                (vals + ((v, val),), pr * p)
                for vals, pr in branches
                for val, p in zip(dist.support, dist.probs)
            ]
        for vals, pr in branches:
            cc = dict(costs)
            cc.update({v: float(x) for v, x in vals})
            vis, sc, ss, tr, stopped = phase_step(
                i, tour, visited, cc, selected_cost, selected_set, traveled
            )
            if stopped is not None:
                settle(pr, vis, cc, sc, ss, tr, i, stopped)
            else:
                rec(phase_idx + 1, pr, vis, cc, sc, ss, tr)

    rec(0, 1.0, (), {}, 0.0, frozenset(), 0.0)
    return ExactEval(total, succ, combos)


def _as_feasibility_certificate(inst: Instance) -> bool:
    """Reward feasibility on every outcome path: visiting everything always
    yields at least k, i.e. the sum of minimum supports reaches k."""
    worst = sum(
        inst.dists[v].min_value for v in range(inst.n) if v != inst.root
    )
    return worst >= inst.k


def adaptive_opt_reward(
    inst: Instance,
    include_return: bool = True,
    max_n: int = 6,
    max_support: int = 3,
    max_k: int = 64,
) -> OracleValue:
    """Exact optimal adaptive expected travel cost (reward mode) by memoized
    backward induction on (current vertex, visited set, capped reward)."""
    if inst.mode != REWARD:
        raise InputError("reward-mode oracle on a non-reward instance")
    if inst.n > max_n:
        raise SizeError(f"oracle limited to n <= {max_n}")
    if any(len(d.support) > max_support for d in inst.dists):
        raise SizeError(f"oracle limited to support size <= {max_support}")
    if inst.k > max_k:
        raise SizeError(f"oracle limited to k <= {max_k}")
    if not _as_feasibility_certificate(inst):
        raise InfeasibleError(
            "oracle requires almost-sure feasibility (sum of minimum supports >= k)"
        )
    metric = inst.metric
    d = metric.dist
    root = metric.root
    ret = include_return
    k = inst.k
    others = tuple(v for v in range(inst.n) if v != root)

    @lru_cache(maxsize=None)
    def value(cur: int, visited: frozenset, acc: int) -> float:
        if acc >= k:
            return float(d[cur, root]) if ret else 0.0
        best = math.inf
        for v in others:
            if v in visited:
                continue
            dist = inst.dists[v]
            ev = d[cur, v]
            nxt = visited | frozenset([v])
            for val, p in zip(dist.support, dist.probs):
                ev += p * value(v, nxt, min(acc + int(val), k))
            best = min(best, ev)
        return best

    result = value(root, frozenset(), 0)
    return OracleValue(float(result), value.cache_info().currsize)


def adaptive_opt_cost(
    inst: Instance,
    include_return: bool = True,
    max_n: int = 5,
    max_support: int = 2,
) -> OracleValue:
    """Exact optimal adaptive expected total cost (cost mode, selection
    allowed at any visited vertex). State: (current vertex, visited set,
    k cheapest observed costs); deferring all selection to stopping time is
    lossless because selection cost does not depend on location."""
    if inst.mode != COST:
        raise InputError("cost-mode oracle on a non-cost instance")
    if inst.n > max_n:
        raise SizeError(f"oracle limited to n <= {max_n}")
    if any(len(d.support) > max_support for d in inst.dists):
        raise SizeError(f"oracle limited to support size <= {max_support}")
    k = inst.k
    metric = inst.metric
    root = metric.root
    others = tuple(v for v in range(inst.n) if v != root)
    if k > len(others):
        raise InfeasibleError(f"k={k} exceeds the {len(others)} selectable vertices")
    d = metric.dist
    if k <= 0:
        return OracleValue(0.0, 0)

    @lru_cache(maxsize=None)
    def value(cur: int, visited: frozenset, cheapest: tuple) -> float:
        best = math.inf
        if len(cheapest) >= k:
            best = sum(cheapest) + (float(d[cur, root]) if include_return else 0.0)
        for v in others:
            if v in visited:
                continue
            dist = inst.dists[v]
            ev = d[cur, v]
            nxt = visited | frozenset([v])
            for val, p in zip(dist.support, dist.probs):
                pool = tuple(sorted(cheapest + (float(val),))[:k])
                ev += p * value(v, nxt, pool)
            best = min(best, ev)
        return best

    result = value(root, frozenset(), ())
    return OracleValue(float(result), value.cache_info().currsize)


def fixed_order_value_reward(inst: Instance, order, include_return: bool = True) -> float:
    """Exact expected cost of visiting `order` until reward k is met
    (stop at the first qualifying prefix; failure charges the full walk)."""
    k = inst.k
    d = inst.metric.dist
    root = inst.metric.root
    if k <= 0:
        return 0.0

    def rec(pos: int, cur: int, acc: float, prob: float) -> float:
        if acc >= k:
            return prob * (d[cur, root] if include_return else 0.0)
        if pos == len(order):
            return prob * (d[cur, root] if include_return else 0.0)
        v = order[pos]
        step = prob * d[cur, v]
        dist = inst.dists[v]
        out = step
        for val, p in zip(dist.support, dist.probs):
            out += rec(pos + 1, v, acc + val, prob * p)
        return out

    return rec(0, root, 0.0, 1.0)


def fixed_order_value_cost(inst: Instance, order, include_return: bool = True) -> float:
    """Exact expected objective of visiting `order` with optimal stopping:
    at each step either stop (select the k cheapest observed; requires k
    observations) or continue to the next vertex in the order."""
    k = inst.k
    d = inst.metric.dist
    root = inst.metric.root
    if k <= 0:
        return 0.0
    if len(order) < k:
        raise InfeasibleError("order shorter than k")

    @lru_cache(maxsize=None)
    def value(pos: int, cheapest: tuple) -> float:
        cur = order[pos - 1] if pos > 0 else root
        stop = math.inf
        if len(cheapest) >= k:
            stop = sum(cheapest) + (d[cur, root] if include_return else 0.0)
        if pos == len(order):
            return stop
        v = order[pos]
        ev = d[cur, v]
        dist = inst.dists[v]
        for val, p in zip(dist.support, dist.probs):
            pool = tuple(sorted(cheapest + (float(val),))[:k])
            ev += p * value(pos + 1, pool)
        return min(stop, ev)

    return float(value(0, ()))


class GreedyAdaptivePolicy:
    """Naive adaptive baseline used only as a benchmark comparison row.

    Reward mode: repeatedly visit the unvisited vertex maximizing
    E[min(R_v, remaining target)] / d(current, v). Cost mode: maximize
    P[C_v <= theta] / d(current, v), where theta is the mean of the
    cheapest (in expectation) remaining candidates, one per outstanding
    selection; after observing a cost, select it when it beats theta.
    Leftover selections are filled cheapest-first at exhaustion.
    """

    def __init__(self, inst: Instance):
        self.mode = inst.mode

    def probe(self, inst: Instance, outcomes) -> ProbeTrace:
        if self.mode == REWARD:
            return self._probe_reward(inst, outcomes)
        return self._probe_cost(inst, outcomes)

    def _probe_reward(self, inst: Instance, outcomes) -> ProbeTrace:
        k = inst.k
        d = inst.metric.dist
        root = inst.metric.root
        if k <= 0:
            return ProbeTrace((), 0.0, 0.0, True, -1)
        unvisited = [v for v in range(inst.n) if v != root]
        cur = root
        acc = 0.0
        traveled = 0.0
        visited = []
        while unvisited:
            remaining = k - acc

            def score(v):
                trunc = sum(
                    min(val, remaining) * p
                    for val, p in zip(inst.dists[v].support, inst.dists[v].probs)
                )
                return trunc / d[cur, v]

            v = max(unvisited, key=lambda u: (score(u), -u))
            unvisited.remove(v)
            traveled += d[cur, v]
            cur = v
            visited.append(v)
            acc += outcomes[v]
            if acc >= k:
                traveled += d[cur, root]
                return ProbeTrace(tuple(visited), traveled, traveled, True, 0)
        traveled += d[cur, root] if cur != root else 0.0
        return ProbeTrace(tuple(visited), traveled, traveled, False, 0)

    def _probe_cost(self, inst: Instance, outcomes) -> ProbeTrace:
        k = inst.k
        d = inst.metric.dist
        root = inst.metric.root
        if k <= 0:
            return ProbeTrace((), 0.0, 0.0, True, -1)
        unvisited = [v for v in range(inst.n) if v != root]
        exp_cost = {v: expectation(inst.dists[v]) for v in unvisited}
        cur = root
        traveled = 0.0
        visited: list[int] = []
        selected: dict[int, float] = {}
        while unvisited and len(selected) < k:
            need = k - len(selected)
            pool = sorted(exp_cost[v] for v in unvisited)[:need]
            theta = sum(pool) / len(pool) if pool else 0.0

            def score(v):
                return qualify_prob(inst.dists[v], theta) / d[cur, v]

            v = max(unvisited, key=lambda u: (score(u), -u))
            unvisited.remove(v)
            traveled += d[cur, v]
            cur = v
            visited.append(v)
            c = float(outcomes[v])
            if c <= theta:
                selected[v] = c
        if len(selected) < k:
            spare = sorted(
                (float(outcomes[v]), v) for v in visited if v not in selected
            )
            for c, v in spare[: k - len(selected)]:
                selected[v] = c
        traveled += d[cur, root] if cur != root else 0.0
        success = len(selected) >= k
        objective = traveled + sum(selected.values())
        return ProbeTrace(
            tuple(visited), traveled, objective, success, 0, dict(selected)
        )


def greedy_adaptive_baseline(inst: Instance) -> GreedyAdaptivePolicy:
    return GreedyAdaptivePolicy(inst)


def enumerate_orders(inst: Instance):
    """All fixed visit orders over non-root vertices (micro instances only)."""
    others = [v for v in range(inst.n) if v != inst.root]
    if len(others) > 6:
        raise SizeError("order enumeration limited to 6 non-root vertices")
    return itertools.permutations(others)
