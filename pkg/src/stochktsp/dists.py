"""Finite discrete distributions over nonnegative reals.

A distribution is stored in normalized form: support strictly increasing,
duplicate values merged, probabilities nonnegative and summing to one.
All solver-facing quantities (expectations, truncated profits, qualification
probabilities) are computed from this normalized form.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InputError

# Probabilities must sum to 1 within this tolerance after normalization.
PROB_TOL = 1e-12


@dataclass(frozen=True)
class DiscreteDist:
    """Finite discrete distribution: value support[t] with probability probs[t]."""

    support: tuple[float, ...]
    probs: tuple[float, ...]

    @staticmethod
    def of(support, probs, tol: float = PROB_TOL) -> "DiscreteDist":
        """Build a normalized distribution: sort, merge duplicates, renormalize.

        Raises InputError on negative values/probabilities, length mismatch,
        or probabilities whose sum deviates from 1 by more than `tol`.
        """
        support = [float(v) for v in support]
        probs = [float(p) for p in probs]
        if len(support) != len(probs) or not support:
            raise InputError("support and probs must be nonempty and equal length")
        if any(v < 0 for v in support):
            raise InputError("support values must be nonnegative")
        if any(p < 0 for p in probs):
            raise InputError("probabilities must be nonnegative")
        total = sum(probs)
        if abs(total - 1.0) > tol:
            raise InputError(f"probabilities sum to {total!r}, expected 1 within {tol}")
        merged: dict[float, float] = {}
        for v, p in zip(support, probs):
            merged[v] = merged.get(v, 0.0) + p
        items = sorted((v, p) for v, p in merged.items() if p > 0.0)
        if not items:
            raise InputError("distribution has no positive-probability support")
        vals = tuple(v for v, _ in items)
        ps = [p for _, p in items]
        s = sum(ps)
        ps = tuple(p / s for p in ps)
        return DiscreteDist(vals, ps)

    @staticmethod
    def point(value: float) -> "DiscreteDist":
        return DiscreteDist.of([value], [1.0])

    @cached_property
    def cum_probs(self) -> np.ndarray:
        c = np.cumsum(np.asarray(self.probs, dtype=float))
        c[-1] = 1.0
        return c

    @property
    def min_value(self) -> float:
        return self.support[0]

    @property
    def max_value(self) -> float:
        return self.support[-1]

    def scaled(self, factor: float) -> "DiscreteDist":
        """Distribution of (factor * X); used when rescaling cost instances."""
        if factor <= 0:
            raise InputError("scale factor must be positive")
        return DiscreteDist(tuple(v * factor for v in self.support), self.probs)

    def is_zero(self) -> bool:
        return self.support == (0.0,)


ZERO_DIST = DiscreteDist((0.0,), (1.0,))


def expectation(d: DiscreteDist) -> float:
    return float(sum(v * p for v, p in zip(d.support, d.probs)))


def reward_profit(d: DiscreteDist, k: int, j: int) -> float:
    """Expected reward truncated at k/2^j and rescaled into [0, 1].

    Returns E[min(R * 2^j / k, 1)]. Scale j halves the truncation point:
    j = 0 truncates at the full target k, larger j at k/2^j. A target of
    k = 0 is already met and the profit is defined as 1.
    """
    if k < 0 or j < 0:
        raise InputError("k and j must be nonnegative")
    if k == 0:
        return 1.0
    scale = 2.0**j / k
    return float(sum(min(v * scale, 1.0) * p for v, p in zip(d.support, d.probs)))


def qualify_prob(d: DiscreteDist, threshold: float) -> float:
    """P[C <= threshold], with an inclusive boundary honored exactly."""
    if threshold < 0:
        return 0.0
    return float(sum(p for v, p in zip(d.support, d.probs) if v <= threshold))


def sample(d: DiscreteDist, rng: np.random.Generator) -> float:
    """Draw one value by inverse CDF; advances the generator state."""
    u = rng.random()
    idx = int(np.searchsorted(d.cum_probs, u, side="right"))
    return d.support[min(idx, len(d.support) - 1)]


def sample_from_uniform(d: DiscreteDist, u) -> np.ndarray:
    """Map uniforms in [0, 1) through the inverse CDF (vectorized)."""
    idx = np.searchsorted(d.cum_probs, np.asarray(u), side="right")
    vals = np.asarray(d.support, dtype=float)
    return vals[np.minimum(idx, len(d.support) - 1)]
