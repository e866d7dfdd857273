"""UCB channel-rate estimation and the four scheduling policies.

Weight formulas, with U the UCB index, Z the head-of-line age, Q the virtual
queue length and TS the time-since-last-reward counter:

    age       : eta * U_k + Z_k
    qlen      : Q_k + eta * U_k
    tslr      : TS_k + eta * U_k
    qlen_tslr : Q_k + alpha * TS_k + eta * U_k

The played action maximizes the weight sum over its scheduled arms; ties go
to the lowest action index unless a tie-break generator is supplied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

POLICY_CODES = {"age": 0, "qlen": 1, "tslr": 2, "qlen_tslr": 3}


@dataclass(frozen=True)
class PolicyKind:
    kind: str
    eta: float
    alpha: float = 1.0

    def __post_init__(self):
        if self.kind not in POLICY_CODES:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if not self.eta > 0:
            raise ValueError("eta must be strictly positive")
        if not self.alpha > 0:
            raise ValueError("alpha must be strictly positive")

    @property
    def code(self):
        return POLICY_CODES[self.kind]


class UcbState:
    """Play counts and running reward means, one pair per arm.

    The mean is stored as an exact integer success count over plays, so
    ``means[k] * plays[k]`` is always an integer.
    """

    def __init__(self, plays, successes):
        self.plays = np.asarray(plays, dtype=np.int64)
        self.successes = np.asarray(successes, dtype=np.int64)
        if self.plays.shape != self.successes.shape:
            raise ValueError("plays and successes must have equal shape")
        if np.any(self.plays < 0) or np.any(self.successes < 0):
            raise ValueError("counts must be nonnegative")
        if np.any(self.successes > self.plays):
            raise ValueError("successes cannot exceed plays")

    @classmethod
    def fresh(cls, n_arms):
        return cls(np.zeros(n_arms, dtype=np.int64), np.zeros(n_arms, dtype=np.int64))

    @property
    def means(self):
        out = np.zeros(len(self.plays))
        played = self.plays > 0
        out[played] = self.successes[played] / self.plays[played]
        return out

    def copy(self):
        return UcbState(self.plays.copy(), self.successes.copy())

    def __eq__(self, other):
        return (
            isinstance(other, UcbState)
            and np.array_equal(self.plays, other.plays)
            and np.array_equal(self.successes, other.successes)
        )


def ucb_index(state, k, t):
    """Optimistic rate estimate for arm k at timeslot t (natural log bonus)."""
    if t < 1:
        raise ValueError("timeslots are 1-based")
    n = int(state.plays[k])
    if n == 0:
        return 1.0
    mean = int(state.successes[k]) / n
    return min(1.0, mean + math.sqrt(3.0 * math.log(t) / (2.0 * n)))


def ucb_indices(state, t):
    return np.array([ucb_index(state, k, t) for k in range(len(state.plays))])


def ucb_update(state, k, scheduled, reward):
    """One observation for arm k; unscheduled arms are left untouched."""
    if reward and not scheduled:
        raise ValueError("reward observed on an unscheduled arm")
    if not scheduled:
        return state
    out = state.copy()
    out.plays[k] += 1
    out.successes[k] += int(reward)
    return out


def policy_weights(kind, state, ages, qlens, tslr, t):
    """Per-arm weights for the given policy at timeslot t."""
    u = ucb_indices(state, t)
    ages = np.asarray(ages)
    qlens = np.asarray(qlens)
    tslr = np.asarray(tslr)
    if kind.kind == "age":
        return kind.eta * u + ages
    if kind.kind == "qlen":
        return qlens + kind.eta * u
    if kind.kind == "tslr":
        return tslr + kind.eta * u
    return qlens + kind.alpha * tslr + kind.eta * u


def select_action(weights, actions, rng=None):
    """Feasible action maximizing the scheduled-arm weight sum.

    Deterministic lowest-index tie-break by default; pass a generator to
    randomize among exact ties instead.

    Exhaustive enumeration, which is exact for the small action sets used
    here.  For structured sets a specialized argmax is the natural hook: with
    all size-m subsets feasible, the maximizer is simply the m largest
    weights.
    """
    w = np.asarray(weights, dtype=float)
    if w.shape != (actions.n_arms,):
        raise ValueError("weights length must match the arm count")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    inc = actions.incidence
    best, best_idx = -math.inf, 0
    ties = []
    for a in range(actions.n_actions):
        s = 0.0
        row = inc[a]
        for k in range(actions.n_arms):
            if row[k]:
                s += w[k]
        if s > best:
            best, best_idx = s, a
            ties = [a]
        elif s == best:
            ties.append(a)
    if rng is not None and len(ties) > 1:
        return ties[int(rng.random() * len(ties))]
    return best_idx


@dataclass
class TslrCounters:
    """Per-arm slots elapsed since the last unit reward."""

    values: np.ndarray

    @classmethod
    def fresh(cls, n_arms):
        return cls(np.zeros(n_arms, dtype=np.int64))


def tslr_update(counters, rewards):
    """Reset on reward, increment otherwise."""
    rewards = np.asarray(rewards)
    new = np.where(rewards == 1, 0, counters.values + 1)
    return TslrCounters(new.astype(np.int64))
