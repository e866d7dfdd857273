"""Per-arm virtual queue of delivery requests and its head-of-line age.

A delivery request arrives at the start of a timeslot with probability
``arrival_prob`` and departs FIFO at the end of a slot in which the arm earned
a reward.  The observable head-of-line age is clipped at zero: a request that
arrived this very slot has age 0, and an empty queue reports age 0.

Timeslot protocol, enforced by the state machine:
    1. ``begin_timeslot(t)``  - arrival draw
    2. ``snapshot(t)``        - policy reads age / queue length / pseudo-TSLR
    3. ``end_timeslot(t, r)`` - departure if the reward arrived
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass


class ProtocolError(RuntimeError):
    """Timeslot methods called out of order or twice."""


@dataclass(frozen=True)
class AgeSnapshot:
    """Queue state visible to a policy at decision time within one slot."""

    hol_age: int
    queue_len: int
    pseudo_tslr: int


class DeliveryQueue:
    """FIFO of arrival timestamps for one arm's pending delivery requests."""

    def __init__(self, arrival_prob, max_len=None):
        p = float(arrival_prob)
        if not 0.0 < p <= 1.0:
            raise ValueError(f"arrival probability must be in (0, 1], got {p}")
        self.arrival_prob = p
        self.max_len = max_len
        self.pending = deque()  # arrival timestamps, strictly increasing
        self.last_departed_arrival = None
        self.total_arrivals = 0
        self.total_departures = 0
        self._pseudo_tslr = 0
        self._t_begun = 0
        self._t_ended = 0

    def begin_timeslot(self, t, rng=None, *, arrival=None):
        """Draw (or replay) the slot-t arrival; returns the arrival indicator.

        ``arrival`` overrides the random draw so recorded sample paths can be
        replayed exactly.
        """
        if t <= self._t_begun or self._t_ended != self._t_begun:
            raise ProtocolError(f"begin_timeslot({t}) out of order")
        if arrival is None:
            if rng is None:
                raise ValueError("need an rng unless the arrival is forced")
            arrival = 1 if rng.random() < self.arrival_prob else 0
        arrival = int(arrival)
        self._t_begun = t
        if arrival:
            self.pending.append(t)
            self.total_arrivals += 1
            if self.max_len is not None and len(self.pending) > self.max_len:
                raise RuntimeError(
                    f"virtual queue exceeded its hard cap of {self.max_len} "
                    f"pending requests at timeslot {t}"
                )
        return arrival

    def snapshot(self, t):
        if self._t_begun != t:
            raise ProtocolError(f"snapshot({t}) before begin_timeslot({t})")
        if self.pending:
            return AgeSnapshot(
                hol_age=t - self.pending[0],
                queue_len=len(self.pending),
                pseudo_tslr=self._pseudo_tslr,
            )
        return AgeSnapshot(hol_age=0, queue_len=0, pseudo_tslr=self._pseudo_tslr)

    def end_timeslot(self, t, reward):
        """Apply the slot's reward; returns the departure indicator."""
        if self._t_begun != t:
            raise ProtocolError(f"end_timeslot({t}) before begin_timeslot({t})")
        if self._t_ended == t:
            raise ProtocolError(f"end_timeslot({t}) called twice")
        reward = int(reward)
        had_pending = bool(self.pending)
        # pseudo-TSLR increments only while an unserved request is pending
        if reward == 0 and had_pending:
            self._pseudo_tslr += 1
        else:
            self._pseudo_tslr = 0
        departure = 1 if (reward and had_pending) else 0
        if departure:
            self.last_departed_arrival = self.pending.popleft()
            self.total_departures += 1
        self._t_ended = t
        return departure

    def last_interarrival(self):
        """Gap between the current head's arrival and its departed predecessor.

        None until a departure has happened and a successor request exists.
        """
        if self.last_departed_arrival is None or not self.pending:
            return None
        return self.pending[0] - self.last_departed_arrival

    def __len__(self):
        return len(self.pending)


def hol_age_drift_oracle(pending, reward, t):
    """Predict the next slot's change in the clipped head-of-line age.

    ``pending`` is the post-arrival, pre-departure FIFO of arrival timestamps
    at slot t (only the first two entries matter).  With a pending head the
    age drops, on a departure, by the smaller of the head's own age-plus-one
    and the gap to its successor; without a pending head nothing moves.
    """
    pending = list(pending)[:2]
    if not pending:
        return 0
    head = pending[0]
    if not reward:
        return 1
    cap = t + 1 - head
    if len(pending) > 1:
        return 1 - min(cap, pending[1] - head)
    return 1 - cap
