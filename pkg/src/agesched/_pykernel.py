"""Pure-Python scheduling loop, the fallback for the compiled kernel.

Both backends must produce bit-identical outputs, so every floating-point
expression here is written in exactly the order the compiled kernel uses.
"""

from __future__ import annotations

import math

import numpy as np

_NEG_INF = float("-inf")


def simulate_policy(successes, arrivals, incidence, policy_code, eta, alpha, tie_u=None):
    """Run one policy over a pre-drawn sample path.

    successes:  (T, K) int8, per-slot channel success indicators
    arrivals:   (T, K) int8, per-slot delivery-request arrival indicators
    incidence:  (A, K) int8, feasible actions
    policy_code: 0=age, 1=qlen, 2=tslr, 3=qlen+tslr
    tie_u:      optional (T,) float64 uniforms for randomized tie-breaking

    Returns a dict of per-slot arrays: actions, rewards, hol_ages, queue_lens,
    tslr, pseudo_tslr, departures.  Queue state, TSLR, and pseudo-TSLR are
    logged at decision time (after the slot's arrival, before its departure).
    """
    X = np.asarray(successes, dtype=np.int8)
    B = np.asarray(arrivals, dtype=np.int8)
    inc = np.asarray(incidence, dtype=np.int8)
    T, K = X.shape
    nA = inc.shape[0]
    if B.shape != (T, K) or inc.shape[1] != K:
        raise ValueError("inconsistent array shapes")

    Xl = X.tolist()
    Bl = B.tolist()
    incl = inc.tolist()
    tie = tie_u.tolist() if tie_u is not None else None

    arr_times = [[] for _ in range(K)]  # arrival slots per arm
    head = [0] * K                      # pops so far per arm
    plays = [0] * K
    wins = [0] * K
    tslr = [0] * K
    ptslr = [0] * K

    out_actions = [0] * T
    out_rewards = [None] * T
    out_hol = [None] * T
    out_qlen = [None] * T
    out_tslr = [None] * T
    out_ptslr = [None] * T
    out_dep = [None] * T

    w = [0.0] * K
    zs = [0] * K
    qs = [0] * K

    for i in range(T):
        t = i + 1
        brow = Bl[i]
        for k in range(K):
            if brow[k]:
                arr_times[k].append(t)
        logt = math.log(t)
        for k in range(K):
            q = len(arr_times[k]) - head[k]
            z = t - arr_times[k][head[k]] if q > 0 else 0
            qs[k] = q
            zs[k] = z
            n = plays[k]
            if n > 0:
                u = wins[k] / n + math.sqrt(3.0 * logt / (2.0 * n))
                if u > 1.0:
                    u = 1.0
            else:
                u = 1.0
            if policy_code == 0:
                w[k] = eta * u + z
            elif policy_code == 1:
                w[k] = q + eta * u
            elif policy_code == 2:
                w[k] = tslr[k] + eta * u
            else:
                w[k] = q + alpha * tslr[k] + eta * u

        best = _NEG_INF
        a_best = 0
        n_tie = 0
        for a in range(nA):
            row = incl[a]
            s = 0.0
            for k in range(K):
                if row[k]:
                    s += w[k]
            if s > best:
                best = s
                a_best = a
                n_tie = 1
            elif s == best:
                n_tie += 1
        if tie is not None and n_tie > 1:
            pick = int(tie[i] * n_tie)
            if pick >= n_tie:
                pick = n_tie - 1
            seen = 0
            for a in range(nA):
                row = incl[a]
                s = 0.0
                for k in range(K):
                    if row[k]:
                        s += w[k]
                if s == best:
                    if seen == pick:
                        a_best = a
                        break
                    seen += 1

        arow = incl[a_best]
        xrow = Xl[i]
        rrow = [0] * K
        drow = [0] * K
        trow = [0] * K
        prow = [0] * K
        for k in range(K):
            r = xrow[k] if arow[k] else 0
            rrow[k] = r
            had_pending = qs[k] > 0
            d = 1 if (r and had_pending) else 0
            drow[k] = d
            trow[k] = tslr[k]
            prow[k] = ptslr[k]
            if d:
                head[k] += 1
            if arow[k]:
                plays[k] += 1
                wins[k] += r
            tslr[k] = 0 if r == 1 else tslr[k] + 1
            ptslr[k] = ptslr[k] + 1 if (r == 0 and had_pending) else 0

        out_actions[i] = a_best
        out_rewards[i] = rrow
        out_hol[i] = list(zs)
        out_qlen[i] = list(qs)
        out_tslr[i] = trow
        out_ptslr[i] = prow
        out_dep[i] = drow

    return {
        "actions": np.asarray(out_actions, dtype=np.int32),
        "rewards": np.asarray(out_rewards, dtype=np.int8),
        "hol_ages": np.asarray(out_hol, dtype=np.int32),
        "queue_lens": np.asarray(out_qlen, dtype=np.int32),
        "tslr": np.asarray(out_tslr, dtype=np.int32),
        "pseudo_tslr": np.asarray(out_ptslr, dtype=np.int32),
        "departures": np.asarray(out_dep, dtype=np.int8),
    }
