"""Optimal static policies over the action simplex via a dense simplex solver.

Three artifacts per instance: the reward-optimal feasible distribution over
actions, the maximal uniform slack by which any distribution can over-satisfy
every throughput requirement, and a distribution attaining that slack.  The
LPs are tiny (|actions| + a few rows), so a deterministic two-phase simplex
with Bland's anti-cycling rule solves them with no external dependencies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-10


@dataclass(frozen=True)
class StaticPolicy:
    """Time-invariant distribution over actions."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float).copy()
        if p.ndim != 1 or p.size == 0:
            raise ValueError("probs must be a nonempty vector")
        if np.any(p < -1e-9):
            raise ValueError("probabilities must be nonnegative")
        p[p < 0] = 0.0
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {p.sum()}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)


@dataclass(frozen=True)
class OracleReport:
    sigma_star: StaticPolicy | None
    objective_rate: float | None
    gamma_max: float
    sigma_gamma: StaticPolicy
    feasible: bool


class _Unbounded(RuntimeError):
    pass


def _pivot(tableau, reduced, basis, row, col):
    piv = tableau[row, col]
    tableau[row] = tableau[row] / piv
    for i in range(tableau.shape[0]):
        if i != row and tableau[i, col] != 0.0:
            tableau[i] = tableau[i] - tableau[i, col] * tableau[row]
    reduced[:] = reduced - reduced[col] * tableau[row, :-1]
    basis[row] = col


def _bland_iterate(tableau, reduced, basis, allowed):
    """Run Bland-rule pivots until no allowed column can improve the maximum."""
    m = tableau.shape[0]
    while True:
        col = -1
        for j in allowed:
            if reduced[j] > PIVOT_TOL:
                col = j
                break
        if col < 0:
            return
        row, best_ratio, best_var = -1, None, None
        for i in range(m):
            a = tableau[i, col]
            if a > PIVOT_TOL:
                ratio = tableau[i, -1] / a
                if (
                    best_ratio is None
                    or ratio < best_ratio - PIVOT_TOL
                    or (abs(ratio - best_ratio) <= PIVOT_TOL and basis[i] < best_var)
                ):
                    row, best_ratio, best_var = i, ratio, basis[i]
        if row < 0:
            raise _Unbounded("LP is unbounded")
        _pivot(tableau, reduced, basis, row, col)


def _reduced_costs(tableau, basis, cost):
    cb = cost[basis]
    return cost - cb @ tableau[:, :-1]


def simplex_max(c, A, b):
    """Maximize c.x subject to A x = b, x >= 0 (two-phase, Bland's rule).

    Returns (x, objective, basis, feasible).  Redundant rows discovered in
    phase one are dropped; the returned basis indexes original variables.
    """
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    c = np.array(c, dtype=float)
    m, n = A.shape
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    # phase one over [original | artificial] columns
    tableau = np.hstack([A, np.eye(m), b[:, None]])
    basis = list(range(n, n + m))
    cost1 = np.concatenate([np.zeros(n), -np.ones(m)])
    reduced = _reduced_costs(tableau, basis, cost1)
    _bland_iterate(tableau, reduced, basis, range(n))
    if -(cost1[basis] @ tableau[:, -1]) > 1e-8 * max(1.0, abs(b).max()):
        return None, None, None, False

    # drive leftover artificials out of the basis; all-zero rows are redundant
    drop = []
    for i in range(m):
        if basis[i] >= n:
            piv_col = next(
                (j for j in range(n) if abs(tableau[i, j]) > PIVOT_TOL), None
            )
            if piv_col is None:
                drop.append(i)
            else:
                _pivot(tableau, reduced, basis, i, piv_col)
    if drop:
        keep = [i for i in range(m) if i not in drop]
        tableau = tableau[keep]
        basis = [basis[i] for i in keep]

    reduced = _reduced_costs(tableau, basis, np.concatenate([c, np.zeros(m)]))
    _bland_iterate(tableau, reduced, basis, range(n))

    x = np.zeros(n)
    for i, v in enumerate(basis):
        if v < n:
            x[v] = tableau[i, -1]
    return x, float(c @ x), basis, True


def _service_matrix(rates, actions):
    # M[k, a] = rate_k * I_k(a): expected reward of arm k under action a
    return np.asarray(rates)[:, None] * actions.incidence.T.astype(float)


def service_rates(policy, rates, actions):
    """Per-arm expected reward per slot under a static policy."""
    return _service_matrix(rates, actions) @ policy.probs


def solve_optimal_static(rates, chi, actions):
    """Solve for the optimal static policy and the maximal slack policy.

    The slack LP (free slack variable split into a nonnegative pair) always
    has a solution; the optimal-policy LP is solved only when some
    distribution meets every requirement.

    The optimum may sit on a face with many optimal vertices; the fixed pivot
    rule makes the returned vertex reproducible, but downstream regret
    accounting should use ``objective_rate`` (unique) rather than the
    distribution itself.
    """
    rates = np.asarray(rates, dtype=float)
    chi = np.asarray(chi, dtype=float)
    if rates.shape != (actions.n_arms,) or chi.shape != (actions.n_arms,):
        raise ValueError("rates and chi must have one entry per arm")
    if np.any(rates <= 0) or np.any(rates > 1):
        raise ValueError("rates must lie in (0, 1]")
    if np.any(chi <= 0) or np.any(chi > 1):
        raise ValueError("chi must lie in (0, 1]")
    K = actions.n_arms
    n = actions.n_actions
    M = _service_matrix(rates, actions)

    # slack LP: vars [sigma, surplus, gamma+, gamma-]
    A = np.zeros((K + 1, n + K + 2))
    bvec = np.zeros(K + 1)
    A[0, :n] = 1.0
    bvec[0] = 1.0
    for k in range(K):
        A[1 + k, :n] = M[k]
        A[1 + k, n + k] = -1.0
        A[1 + k, n + K] = -1.0
        A[1 + k, n + K + 1] = 1.0
        bvec[1 + k] = chi[k]
    cvec = np.zeros(n + K + 2)
    cvec[n + K] = 1.0
    cvec[n + K + 1] = -1.0
    x, gamma_max, _, ok = simplex_max(cvec, A, bvec)
    if not ok:
        raise RuntimeError("slack LP unexpectedly infeasible")
    sigma_gamma = StaticPolicy(x[:n])
    feasible = gamma_max >= -1e-9

    sigma_star = None
    objective_rate = None
    if feasible:
        A2 = np.zeros((K + 1, n + K))
        A2[0, :n] = 1.0
        for k in range(K):
            A2[1 + k, :n] = M[k]
            A2[1 + k, n + k] = -1.0
        b2 = np.concatenate([[1.0], chi])
        c2 = np.concatenate([M.sum(axis=0), np.zeros(K)])
        x2, objective_rate, _, ok2 = simplex_max(c2, A2, b2)
        if not ok2:
            feasible = False
        else:
            sigma_star = StaticPolicy(x2[:n])
    return OracleReport(
        sigma_star=sigma_star,
        objective_rate=objective_rate,
        gamma_max=float(gamma_max),
        sigma_gamma=sigma_gamma,
        feasible=bool(feasible and gamma_max >= -1e-9),
    )


def unconstrained_best(rates, actions):
    """Highest expected per-slot reward over single actions (no requirements)."""
    totals = _service_matrix(rates, actions).sum(axis=0)
    idx = int(np.argmax(totals))
    return idx, float(totals[idx])


def mix_epsilon_tight(sigma_star, sigma_gamma, eps, gamma):
    """Convex mixture putting weight eps/gamma on the slack-attaining policy."""
    if gamma <= 0:
        raise ValueError("gamma must be strictly positive")
    if not 0 < eps <= gamma:
        raise ValueError("eps must lie in (0, gamma]")
    w = eps / gamma
    return StaticPolicy((1.0 - w) * sigma_star.probs + w * sigma_gamma.probs)


def sample_static(policy, rng):
    """One categorical draw of an action index."""
    cum = np.cumsum(policy.probs)
    idx = int(np.searchsorted(cum, rng.random(), side="right"))
    return min(idx, len(cum) - 1)


def sample_static_many(policy, rng, n):
    """n i.i.d. categorical draws (same stream layout as repeated single draws)."""
    cum = np.cumsum(policy.probs)
    idx = np.searchsorted(cum, rng.random(n), side="right")
    return np.minimum(idx, len(cum) - 1).astype(np.int64)
