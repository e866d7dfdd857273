"""Network environment: feasible action sets and channel success processes.

Channel randomness is consumed from per-arm generator substreams so that one
arm's draws never depend on how many draws another arm consumed.  The harness
derives those substreams with a documented counter-based split (see
``harness.substream``).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np


class ActionSet:
    """Finite set of feasible schedules, one binary incidence vector per action."""

    def __init__(self, incidence):
        inc = np.ascontiguousarray(incidence, dtype=np.int8)
        if inc.ndim != 2 or inc.shape[0] == 0 or inc.shape[1] == 0:
            raise ValueError("action set needs a nonempty 2-D incidence array")
        if not np.isin(inc, (0, 1)).all():
            raise ValueError("incidence entries must be 0 or 1")
        rows = [tuple(r) for r in inc.tolist()]
        if len(set(rows)) != len(rows):
            raise ValueError("duplicate incidence vectors in action set")
        if int(inc.sum(axis=1).max()) < 1:
            raise ValueError("at least one action must schedule an arm")
        self.incidence = inc
        self.incidence.setflags(write=False)

    @property
    def n_arms(self):
        return self.incidence.shape[1]

    @property
    def n_actions(self):
        return self.incidence.shape[0]

    @property
    def i_max(self):
        """Largest number of arms any single action schedules."""
        return int(self.incidence.sum(axis=1).max())

    @classmethod
    def one_of_k(cls, k):
        """One action per arm, a single arm scheduled per slot."""
        return cls(np.eye(k, dtype=np.int8))

    @classmethod
    def choose(cls, k, m):
        """All size-m subsets of k arms, in lexicographic order."""
        if not 1 <= m <= k:
            raise ValueError("subset size must be in [1, K]")
        rows = []
        for combo in combinations(range(k), m):
            row = [0] * k
            for j in combo:
                row[j] = 1
            rows.append(row)
        return cls(rows)

    def __eq__(self, other):
        return isinstance(other, ActionSet) and np.array_equal(
            self.incidence, other.incidence
        )

    def __repr__(self):
        return f"ActionSet(n_actions={self.n_actions}, K={self.n_arms}, i_max={self.i_max})"


def _check_rates(rates):
    r = np.asarray(rates, dtype=float)
    if r.ndim != 1 or r.size == 0:
        raise ValueError("rates must be a nonempty 1-D sequence")
    if np.any(r <= 0.0) or np.any(r > 1.0):
        raise ValueError("rates must lie in (0, 1]")
    return r


@dataclass(frozen=True)
class IIDChannel:
    """Per-arm Bernoulli successes with fixed rates."""

    rates: tuple

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(float(x) for x in _check_rates(self.rates)))

    @property
    def n_arms(self):
        return len(self.rates)


@dataclass(frozen=True)
class PiecewiseChannel:
    """Piecewise-stationary rates; segment i covers [start_i, start_{i+1})."""

    segments: tuple  # ((start_timeslot, rates), ...)

    def __post_init__(self):
        segs = []
        for start, rates in self.segments:
            segs.append((int(start), tuple(float(x) for x in _check_rates(rates))))
        if not segs:
            raise ValueError("need at least one segment")
        if segs[0][0] != 1:
            raise ValueError("first segment must start at timeslot 1")
        starts = [s for s, _ in segs]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("segment starts must be strictly increasing")
        k = len(segs[0][1])
        if any(len(r) != k for _, r in segs):
            raise ValueError("all segments must cover the same number of arms")
        object.__setattr__(self, "segments", tuple(segs))

    @property
    def n_arms(self):
        return len(self.segments[0][1])

    def segment_index(self, t):
        starts = np.array([s for s, _ in self.segments])
        return int(np.searchsorted(starts, t, side="right") - 1)


@dataclass(frozen=True)
class TraceChannel:
    """Successes replayed verbatim from a binary matrix, row t -> timeslot t."""

    matrix: np.ndarray  # (rows, K) in {0, 1}

    def __post_init__(self):
        m = np.ascontiguousarray(self.matrix, dtype=np.int8)
        if m.ndim != 2 or m.shape[0] == 0 or m.shape[1] == 0:
            raise ValueError("trace matrix must be nonempty and 2-D")
        if not np.isin(m, (0, 1)).all():
            raise ValueError("trace entries must be 0 or 1")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n_arms(self):
        return self.matrix.shape[1]

    @property
    def n_rows(self):
        return self.matrix.shape[0]


def rates_per_slot(model, horizon):
    """(T, K) matrix of per-slot success rates used for regret accounting.

    For traces the empirical full-trace column means stand in for the unknown
    ground-truth rates.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if isinstance(model, IIDChannel):
        return np.tile(np.asarray(model.rates), (horizon, 1))
    if isinstance(model, PiecewiseChannel):
        out = np.empty((horizon, model.n_arms))
        starts = [s for s, _ in model.segments] + [horizon + 1]
        for i, (_, rates) in enumerate(model.segments):
            lo, hi = starts[i], min(starts[i + 1], horizon + 1)
            if lo <= horizon:
                out[lo - 1 : hi - 1, :] = rates
        return out
    if isinstance(model, TraceChannel):
        if horizon > model.n_rows:
            raise ValueError("horizon exceeds trace length")
        return np.tile(model.matrix.mean(axis=0), (horizon, 1))
    raise TypeError(f"unknown channel model {type(model).__name__}")


def sample_successes(model, t, rngs):
    """Success indicator vector for timeslot t, one dedicated generator per arm."""
    if t < 1:
        raise ValueError("timeslots are 1-based")
    if isinstance(model, TraceChannel):
        if t > model.n_rows:
            raise IndexError(f"timeslot {t} beyond trace length {model.n_rows}")
        return model.matrix[t - 1].copy()
    if isinstance(model, IIDChannel):
        rates = model.rates
    elif isinstance(model, PiecewiseChannel):
        rates = model.segments[model.segment_index(t)][1]
    else:
        raise TypeError(f"unknown channel model {type(model).__name__}")
    out = np.empty(len(rates), dtype=np.int8)
    for k, rate in enumerate(rates):
        out[k] = rngs[k].random() < rate
    return out


def success_matrix(model, horizon, rngs):
    """(T, K) success matrix; consumes exactly one uniform per arm per slot.

    Equivalent to stacking ``sample_successes`` over t = 1..T with the same
    generators (per-arm substreams make the two paths draw identically).
    """
    if isinstance(model, TraceChannel):
        if horizon > model.n_rows:
            raise ValueError("horizon exceeds trace length")
        return model.matrix[:horizon].copy()
    rates = rates_per_slot(model, horizon)
    out = np.empty((horizon, rates.shape[1]), dtype=np.int8)
    for k in range(rates.shape[1]):
        out[:, k] = rngs[k].random(horizon) < rates[:, k]
    return out


@dataclass(frozen=True)
class StepOutcome:
    """Per-slot successes and the rewards surviving the action mask."""

    successes: np.ndarray
    rewards: np.ndarray


def apply_action(successes, action_index, actions):
    """Mask successes with the chosen action's incidence vector."""
    if not 0 <= action_index < actions.n_actions:
        raise IndexError(f"action index {action_index} out of range")
    succ = np.asarray(successes, dtype=np.int8)
    if succ.shape != (actions.n_arms,):
        raise ValueError("successes length must match the arm count")
    rewards = succ * actions.incidence[action_index]
    return StepOutcome(successes=succ, rewards=rewards)


def mean_rates(model, window):
    """Mean success rates over the inclusive timeslot window (lo, hi)."""
    lo, hi = int(window[0]), int(window[1])
    if lo < 1 or hi < lo:
        raise ValueError(f"empty or invalid window ({lo}, {hi})")
    if isinstance(model, IIDChannel):
        return np.asarray(model.rates, dtype=float)
    if isinstance(model, PiecewiseChannel):
        acc = np.zeros(model.n_arms)
        starts = [s for s, _ in model.segments] + [None]
        for i, (start, rates) in enumerate(model.segments):
            seg_lo = start
            seg_hi = (starts[i + 1] - 1) if starts[i + 1] is not None else hi
            a, b = max(lo, seg_lo), min(hi, seg_hi)
            if a <= b:
                acc += (b - a + 1) * np.asarray(rates)
        return acc / (hi - lo + 1)
    if isinstance(model, TraceChannel):
        if hi > model.n_rows:
            raise ValueError("window extends beyond trace length")
        return model.matrix[lo - 1 : hi].mean(axis=0)
    raise TypeError(f"unknown channel model {type(model).__name__}")
