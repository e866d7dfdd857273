# cython: boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled scheduling loop (hot path).

Mirrors ``_pykernel.simulate_policy`` exactly: same floating-point expression
order, same tie-breaking, same logging convention, so outputs are
bit-identical across backends.
"""

from libc.math cimport log, sqrt

import numpy as np

from libc.stdint cimport int8_t, int32_t, int64_t


def simulate_policy(successes, arrivals, incidence, int policy_code,
                    double eta, double alpha, tie_u=None):
    """See ``_pykernel.simulate_policy`` for the contract."""
    X_arr = np.ascontiguousarray(successes, dtype=np.int8)
    B_arr = np.ascontiguousarray(arrivals, dtype=np.int8)
    inc_arr = np.ascontiguousarray(incidence, dtype=np.int8)
    cdef const int8_t[:, ::1] X = X_arr
    cdef const int8_t[:, ::1] B = B_arr
    cdef const int8_t[:, ::1] inc = inc_arr
    cdef Py_ssize_t T = X.shape[0]
    cdef Py_ssize_t K = X.shape[1]
    cdef Py_ssize_t nA = inc.shape[0]
    if B.shape[0] != T or B.shape[1] != K or inc.shape[1] != K:
        raise ValueError("inconsistent array shapes")

    cdef bint use_tie = tie_u is not None
    cdef const double[::1] tie
    if use_tie:
        tie = np.ascontiguousarray(tie_u, dtype=np.float64)
        if tie.shape[0] != T:
            raise ValueError("tie_u must have one uniform per slot")
    else:
        tie = np.empty(1, dtype=np.float64)

    arr_times_np = np.zeros((K, T), dtype=np.int64)
    cdef int64_t[:, ::1] arr_times = arr_times_np
    cdef int64_t[::1] n_arr = np.zeros(K, dtype=np.int64)
    cdef int64_t[::1] head = np.zeros(K, dtype=np.int64)
    cdef int64_t[::1] plays = np.zeros(K, dtype=np.int64)
    cdef int64_t[::1] wins = np.zeros(K, dtype=np.int64)
    cdef int64_t[::1] tslr = np.zeros(K, dtype=np.int64)
    cdef int64_t[::1] ptslr = np.zeros(K, dtype=np.int64)

    out_actions = np.zeros(T, dtype=np.int32)
    out_rewards = np.zeros((T, K), dtype=np.int8)
    out_hol = np.zeros((T, K), dtype=np.int32)
    out_qlen = np.zeros((T, K), dtype=np.int32)
    out_tslr = np.zeros((T, K), dtype=np.int32)
    out_ptslr = np.zeros((T, K), dtype=np.int32)
    out_dep = np.zeros((T, K), dtype=np.int8)
    cdef int32_t[::1] acts = out_actions
    cdef int8_t[:, ::1] rews = out_rewards
    cdef int32_t[:, ::1] hol = out_hol
    cdef int32_t[:, ::1] qlen = out_qlen
    cdef int32_t[:, ::1] tsl = out_tslr
    cdef int32_t[:, ::1] ptsl = out_ptslr
    cdef int8_t[:, ::1] dep = out_dep

    cdef double[::1] w = np.zeros(K, dtype=np.float64)
    cdef int64_t[::1] zs = np.zeros(K, dtype=np.int64)
    cdef int64_t[::1] qs = np.zeros(K, dtype=np.int64)

    cdef Py_ssize_t i, k, a, a_best
    cdef int64_t t, q, z, n, r, d, n_tie, pick, seen
    cdef double logt, u, s, best
    cdef bint had_pending
    cdef double NEG_INF = float("-inf")

    for i in range(T):
        t = i + 1
        for k in range(K):
            if B[i, k]:
                arr_times[k, n_arr[k]] = t
                n_arr[k] += 1
        logt = log(<double> t)
        for k in range(K):
            q = n_arr[k] - head[k]
            if q > 0:
                z = t - arr_times[k, head[k]]
            else:
                z = 0
            qs[k] = q
            zs[k] = z
            n = plays[k]
            if n > 0:
                u = (<double> wins[k]) / (<double> n) + sqrt(3.0 * logt / (2.0 * (<double> n)))
                if u > 1.0:
                    u = 1.0
            else:
                u = 1.0
            if policy_code == 0:
                w[k] = eta * u + (<double> z)
            elif policy_code == 1:
                w[k] = (<double> q) + eta * u
            elif policy_code == 2:
                w[k] = (<double> tslr[k]) + eta * u
            else:
                w[k] = (<double> qs[k]) + alpha * (<double> tslr[k]) + eta * u

        best = NEG_INF
        a_best = 0
        n_tie = 0
        for a in range(nA):
            s = 0.0
            for k in range(K):
                if inc[a, k]:
                    s += w[k]
            if s > best:
                best = s
                a_best = a
                n_tie = 1
            elif s == best:
                n_tie += 1
        if use_tie and n_tie > 1:
            pick = <int64_t> (tie[i] * (<double> n_tie))
            if pick >= n_tie:
                pick = n_tie - 1
            seen = 0
            for a in range(nA):
                s = 0.0
                for k in range(K):
                    if inc[a, k]:
                        s += w[k]
                if s == best:
                    if seen == pick:
                        a_best = a
                        break
                    seen += 1

        acts[i] = <int32_t> a_best
        for k in range(K):
            if inc[a_best, k]:
                r = X[i, k]
            else:
                r = 0
            rews[i, k] = <int8_t> r
            had_pending = qs[k] > 0
            if r and had_pending:
                d = 1
            else:
                d = 0
            dep[i, k] = <int8_t> d
            tsl[i, k] = <int32_t> tslr[k]
            ptsl[i, k] = <int32_t> ptslr[k]
            hol[i, k] = <int32_t> zs[k]
            qlen[i, k] = <int32_t> qs[k]
            if d:
                head[k] += 1
            if inc[a_best, k]:
                plays[k] += 1
                wins[k] += r
            if r == 1:
                tslr[k] = 0
            else:
                tslr[k] += 1
            if r == 0 and had_pending:
                ptslr[k] += 1
            else:
                ptslr[k] = 0

    return {
        "actions": out_actions,
        "rewards": out_rewards,
        "hol_ages": out_hol,
        "queue_lens": out_qlen,
        "tslr": out_tslr,
        "pseudo_tslr": out_ptslr,
        "departures": out_dep,
    }
