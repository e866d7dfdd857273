"""Windowed throughput, regret, violation statistics, and analytic bounds.

The bound calculators evaluate three closed forms numerically: an upper bound
on the expected weighted age norm, the window size guaranteeing zero
throughput violation, and the regret bound.  The shared inner minimization
over the exponential tilt parameter runs a log-spaced grid scan followed by
golden-section refinement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class RunLog:
    """Per-timeslot records of one simulation run (one row per slot)."""

    slots: np.ndarray        # timeslot numbers, 1-based
    actions: np.ndarray      # chosen action index per slot
    rewards: np.ndarray      # (T, K) realized rewards
    hol_ages: np.ndarray     # (T, K) head-of-line ages at decision time
    queue_lens: np.ndarray   # (T, K) virtual queue lengths at decision time
    tslr: np.ndarray         # (T, K) time-since-last-reward at decision time
    oracle_rate: np.ndarray  # per-slot optimal static reward rate
    cum_reward: np.ndarray   # cumulative realized reward

    @property
    def n_slots(self):
        return len(self.slots)

    @property
    def n_arms(self):
        return self.rewards.shape[1]

    def is_contiguous(self):
        return self.n_slots > 0 and self.slots[0] == 1 and self.slots[-1] == self.n_slots


def _require_contiguous(log):
    if not log.is_contiguous():
        raise ValueError("this metric needs an unstrided log (slots 1..T)")


def windowed_throughput(log, k, t, window):
    """Fraction of the last `window` slots in which arm k delivered."""
    _require_contiguous(log)
    if t < window:
        raise ValueError(f"t={t} is smaller than the window {window}")
    if t > log.n_slots:
        raise ValueError(f"t={t} beyond the log horizon {log.n_slots}")
    return float(log.rewards[t - window : t, k].sum()) / window


def windowed_throughput_curve(rewards, window, ts):
    """(len(ts), K) windowed throughput at the given slots, via prefix sums."""
    ts = np.asarray(ts)
    if np.any(ts < window):
        raise ValueError("every requested slot must be >= the window size")
    cs = np.vstack([np.zeros((1, rewards.shape[1])), np.cumsum(rewards, axis=0)])
    return (cs[ts] - cs[ts - window]) / window


def violation(log, chi, window, t):
    """Per-arm requirement minus windowed throughput; positive means violating."""
    chi = np.asarray(chi, dtype=float)
    thr = np.array([windowed_throughput(log, k, t, window) for k in range(log.n_arms)])
    return chi - thr


def pseudo_regret(log, actions, rates, sigma_star_rate=None, upto=None):
    """Mean-form regret: optimal static rate minus expected reward, summed.

    Stationary logs only; nonstationary runs must go through
    ``cum_pseudo_regret_curve`` with per-slot oracle rates.
    """
    _require_contiguous(log)
    upto = log.n_slots if upto is None else int(upto)
    if not 1 <= upto <= log.n_slots:
        raise ValueError("upto outside the log horizon")
    if sigma_star_rate is None:
        rate0 = float(log.oracle_rate[0])
        if np.any(log.oracle_rate != rate0):
            raise ValueError(
                "nonstationary run log: supply per-segment oracle rates "
                "(see cum_pseudo_regret_curve)"
            )
        sigma_star_rate = rate0
    rates = np.asarray(rates, dtype=float)
    exp_reward = actions.incidence[log.actions[:upto]].astype(float) @ rates
    return float(np.sum(sigma_star_rate - exp_reward))


def cum_pseudo_regret_curve(action_indices, incidence, rates_per_slot, oracle_rate_per_slot):
    """Cumulative mean-form regret per slot, allowing per-slot rates."""
    exp_reward = np.sum(
        incidence[action_indices].astype(float) * np.asarray(rates_per_slot), axis=1
    )
    return np.cumsum(np.asarray(oracle_rate_per_slot) - exp_reward)


def realized_regret(log, sigma_star_rate, upto=None):
    """Regret variant substituting observed rewards for their means."""
    _require_contiguous(log)
    upto = log.n_slots if upto is None else int(upto)
    return float(upto * sigma_star_rate - log.cum_reward[upto - 1])


def age_norm(hol_ages, chi, eps, rates):
    """Euclidean norm of the ages weighted by sqrt((chi_k+eps)/rate_k)."""
    w = (np.asarray(chi) + eps) / np.asarray(rates)
    z = np.asarray(hol_ages, dtype=float)
    return np.sqrt((w * z * z).sum(axis=-1))


@dataclass(frozen=True)
class BoundInputs:
    """Instance parameters feeding the analytic bound formulas."""

    chi: tuple
    rates: tuple
    eta: float
    eps: float
    gamma: float
    i_max: int
    horizon: int
    slater_ok: bool = field(init=False)

    def __post_init__(self):
        chi = tuple(float(x) for x in self.chi)
        rates = tuple(float(x) for x in self.rates)
        if len(chi) != len(rates) or not chi:
            raise ValueError("chi and rates must be nonempty and equal length")
        vals = chi + rates + (self.eta, self.eps, self.gamma, float(self.i_max), float(self.horizon))
        if any(v <= 0 for v in vals):
            raise ValueError("all bound inputs must be strictly positive")
        object.__setattr__(self, "chi", chi)
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "slater_ok", self.eps <= self.gamma / 2.0)

    @property
    def n_arms(self):
        return len(self.chi)


def _theta_max(chi, rates):
    """Largest exponential tilt at which every per-arm factor stays defined."""
    return -(min(rates) / 2.0) * math.log1p(-min(chi))


def _tilt_product(chi, rates, theta):
    """Product of per-arm geometric MGF values at tilt 2*theta/rate_k.

    Returns inf when any factor's denominator is nonpositive (tilt too large).
    """
    a = 2.0 * theta / np.asarray(rates)
    e = np.exp(a)
    den = 1.0 - (1.0 - np.asarray(chi)) * e
    if np.any(den <= 0.0):
        return math.inf
    return float(np.prod(np.asarray(chi) * e / den))


def _tilt_objective(chi, rates, theta):
    g = _tilt_product(chi, rates, theta)
    if not math.isfinite(g):
        return math.inf
    v = 9.0 * g / (theta * theta)
    return v * math.log(32.0 * g / (theta * theta))


def _f_min(chi, rates, rel_tol=1e-6, grid_points=10_000):
    """Minimize the tilt objective over (0, theta_max] (grid + golden section)."""
    h = _theta_max(chi, rates)
    grid = np.geomspace(1e-8 * h, h, grid_points)
    vals = np.array([_tilt_objective(chi, rates, th) for th in grid])
    finite = np.isfinite(vals)
    if not finite.any():
        raise ValueError("tilt objective undefined on the whole grid")
    i = int(np.argmin(np.where(finite, vals, math.inf)))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = _tilt_objective(chi, rates, c)
    fd = _tilt_objective(chi, rates, d)
    while (b - a) > rel_tol * max(abs(a), abs(b)):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = _tilt_objective(chi, rates, c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = _tilt_objective(chi, rates, d)
    return min(fc, fd, vals[i])


def _inv_service_sum(inputs):
    return sum(1.0 / (c * r) for c, r in zip(inputs.chi, inputs.rates))


def age_norm_bound(inputs):
    """Upper bound on the expected weighted age norm at any timeslot."""
    g = inputs.gamma
    f = _f_min(inputs.chi, inputs.rates)
    return (
        8.0 * math.log(4.0 / g) / g * f
        + 4.0 / g * _inv_service_sum(inputs)
        + 4.0 * inputs.n_arms * inputs.eta / g
    )


def zero_violation_window(inputs):
    """Smallest window size guaranteeing zero throughput violation."""
    g, e = inputs.gamma, inputs.eps
    f = _f_min(inputs.chi, inputs.rates)
    return (
        8.0 * math.log(4.0 / g) / (g * e) * f
        + 4.0 / (g * e) * _inv_service_sum(inputs)
        + 4.0 * inputs.n_arms * inputs.eta / (g * e)
        + 1.0 / e
    )


def measured_age_window(chi, eps, mean_hol_age):
    """Per-arm zero-violation window from a measured mean head-of-line age."""
    chi = np.asarray(chi, dtype=float)
    return ((chi + eps) * np.asarray(mean_hol_age, dtype=float) + 1.0) / eps


def regret_bound(inputs):
    """Regret upper bound: slack cost + penalty cost + UCB exploration terms."""
    T = float(inputs.horizon)
    K = inputs.n_arms
    return (
        inputs.eps * K * T / inputs.gamma
        + T / inputs.eta * _inv_service_sum(inputs)
        + math.sqrt(56.0 * K * inputs.i_max * T * math.log(T))
        + K * math.pi**2 / 3.0
    )
