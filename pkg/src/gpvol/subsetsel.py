"""Training-sample activation policies.

A run over k training samples activates one sample at a time and switches
every g generations. Policies: ``static`` (one fixed sample), ``rss``
(uniform random with replacement), ``sss`` (sequential cycling), and the
adaptive pair ``asss``/``arss`` which walk the samples in descending order of
a difficulty weight recomputed after every activation. Sample indices are
1-based throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

POLICIES = ("static", "rss", "sss", "asss", "arss")
ADAPTIVE_POLICIES = ("asss", "arss")
ASSS_INITIAL_WEIGHT = 1.0


@dataclass(frozen=True)
class SubsetSchedule:
    """Which sample-activation policy a run uses, over k samples, switching
    every g generations."""

    policy: str
    k: int
    g: int
    static_sample: int = 1

    def __post_init__(self) -> None:
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}; expected one of {POLICIES}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.g < 1:
            raise ValueError(f"g must be >= 1, got {self.g}")
        if not 1 <= self.static_sample <= self.k:
            raise ValueError(
                f"static_sample must be in [1, {self.k}], got {self.static_sample}")

    @property
    def is_dynamic(self) -> bool:
        return self.policy != "static"

    @property
    def is_adaptive(self) -> bool:
        return self.policy in ADAPTIVE_POLICIES

    @staticmethod
    def static(sample_id: int, g: int = 1, k: int | None = None) -> "SubsetSchedule":
        return SubsetSchedule("static", k if k is not None else sample_id, g, sample_id)


@dataclass
class SampleStats:
    """Per-record squared errors collected over one activation window.

    ``sq_errors`` holds one array per generation the sample was active; each
    array has one entry per record of the sample.
    """

    sample_size: int
    sq_errors: list[np.ndarray] = field(default_factory=list)

    def add_generation(self, errors: np.ndarray) -> None:
        errors = np.asarray(errors, dtype=float)
        if errors.shape != (self.sample_size,):
            raise ValueError(
                f"expected {self.sample_size} per-record errors, got shape {errors.shape}")
        self.sq_errors.append(errors)

    @property
    def generations(self) -> int:
        return len(self.sq_errors)


def next_rss(k: int, rng) -> int:
    """Uniform draw over 1..k, with replacement across calls."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return rng.randrange(k) + 1


def next_sss(current: int, k: int) -> int:
    """Successor in the fixed cycle 1, 2, .., k, 1, .."""
    if not 1 <= current <= k:
        raise ValueError(f"current must be in [1, {k}], got {current}")
    return current + 1 if current < k else 1


def update_weight(stats: SampleStats) -> float:
    """Difficulty weight: total squared error over the activation window
    divided by (sample size * generations active)."""
    if stats.generations == 0:
        raise ValueError("stats cover zero generations")
    total = float(sum(float(np.sum(e)) for e in stats.sq_errors))
    return total / (stats.sample_size * stats.generations)


def reorder(samples: Sequence, weights: Sequence[float]) -> list:
    """Samples sorted by descending weight; ties keep their original order."""
    if len(samples) != len(weights):
        raise ValueError("samples and weights differ in length")
    order = sorted(range(len(samples)), key=lambda i: -weights[i])
    return [samples[i] for i in order]


@dataclass
class AdaptiveState:
    """Walk state for the adaptive policies."""

    weights: list[float]
    order: list[int]
    position: int = 0
    reorder_each_activation: bool = False
    remaining: set[int] = field(default_factory=set)

    @property
    def k(self) -> int:
        return len(self.weights)

    @staticmethod
    def for_asss(k: int, reorder_each_activation: bool = False) -> "AdaptiveState":
        weights = [ASSS_INITIAL_WEIGHT] * k
        return AdaptiveState(weights, reorder(list(range(1, k + 1)), weights),
                             0, reorder_each_activation)

    @staticmethod
    def for_arss(k: int, rng, reorder_each_activation: bool = False) -> "AdaptiveState":
        weights = [rng.random() for _ in range(k)]
        return AdaptiveState(weights, reorder(list(range(1, k + 1)), weights),
                             0, reorder_each_activation)

    def record_weight(self, sample_id: int, weight: float) -> None:
        self.weights[sample_id - 1] = weight


def next_adaptive(policy: str, state: AdaptiveState, rng=None) -> int:
    """Next sample for asss/arss: walk the difficulty ordering, reordering by
    the current weights at each pass boundary (or before every activation if
    the state asks for that)."""
    if policy not in ADAPTIVE_POLICIES:
        raise ValueError(f"policy {policy!r} is not adaptive")
    ids = list(range(1, state.k + 1))
    if state.reorder_each_activation:
        if not state.remaining:
            state.remaining = set(ids)
        pick = max(sorted(state.remaining), key=lambda i: state.weights[i - 1])
        state.remaining.discard(pick)
        return pick
    if state.position >= len(state.order):
        state.order = reorder(ids, state.weights)
        state.position = 0
    pick = state.order[state.position]
    state.position += 1
    return pick


class Scheduler:
    """Stateful sample activations for one evolution run.

    Consumes the run RNG only at construction (arss initial weights) and on
    rss draws, keeping runs reproducible under a fixed seed.
    """

    def __init__(self, schedule: SubsetSchedule, rng,
                 reorder_each_activation: bool = False):
        self.schedule = schedule
        self.current = 0
        self._state: AdaptiveState | None = None
        if schedule.policy == "asss":
            self._state = AdaptiveState.for_asss(schedule.k, reorder_each_activation)
        elif schedule.policy == "arss":
            self._state = AdaptiveState.for_arss(schedule.k, rng, reorder_each_activation)

    def weight_of(self, sample_id: int) -> float | None:
        if self._state is None:
            return None
        return self._state.weights[sample_id - 1]

    def first(self, rng) -> int:
        policy = self.schedule.policy
        if policy == "static":
            self.current = self.schedule.static_sample
        elif policy == "rss":
            self.current = next_rss(self.schedule.k, rng)
        elif policy == "sss":
            self.current = 1
        else:
            self.current = next_adaptive(policy, self._state, rng)
        return self.current

    def advance(self, stats: SampleStats | None, rng) -> int:
        """Finish the current activation (folding its stats into the weights
        for adaptive policies) and pick the next sample."""
        policy = self.schedule.policy
        if policy == "static":
            return self.current
        if policy in ADAPTIVE_POLICIES:
            if stats is not None and stats.generations > 0:
                self._state.record_weight(self.current, update_weight(stats))
            self.current = next_adaptive(policy, self._state, rng)
        elif policy == "rss":
            self.current = next_rss(self.schedule.k, rng)
        else:
            self.current = next_sss(self.current, self.schedule.k)
        return self.current
