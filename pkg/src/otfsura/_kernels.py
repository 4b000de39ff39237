"""Numba-compiled hot loops: SCL polar decoding and Fisher-Yates shuffling."""

import numpy as np
from numba import njit

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_SM64_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SM64_M1 = np.uint64(0xBF58476D1CE4E5B9)
_SM64_M2 = np.uint64(0x94D049BB133111EB)


@njit(cache=True)
def _splitmix64(state):
    """One splitmix64 step: returns (mixed output, next state)."""
    state = (state + _SM64_GAMMA) & _MASK64
    z = state
    z = (z ^ (z >> np.uint64(30))) * _SM64_M1 & _MASK64
    z = (z ^ (z >> np.uint64(27))) * _SM64_M2 & _MASK64
    z = z ^ (z >> np.uint64(31))
    return z, state


@njit(cache=True)
def fisher_yates(n, seed):
    """Deterministic Fisher-Yates permutation of 0..n-1.

    Driven by the splitmix64 stream seeded with ``seed``; swap index is
    ``output % (i + 1)``.  This exact construction is a reproducibility
    contract shared by transmitter and receiver.
    """
    perm = np.arange(n, dtype=np.int64)
    state = np.uint64(seed)
    for i in range(n - 1, 0, -1):
        z, state = _splitmix64(state)
        j = int(z % np.uint64(i + 1))
        tmp = perm[i]
        perm[i] = perm[j]
        perm[j] = tmp
    return perm


@njit(cache=True)
def _calc_llrs(pbuf, cbuf, off, phi, n):
    """Refresh the decision LLR for leaf ``phi`` (min-sum f/g recursions)."""
    if phi == 0:
        lam0 = 1
    else:
        tz = 0
        x = phi
        while x & 1 == 0:
            tz += 1
            x >>= 1
        lam0 = n - tz
    for lam in range(lam0, n + 1):
        node = phi >> (n - lam)
        sz = 1 << (n - lam)
        po = off[lam]
        pi = off[lam - 1]
        if node & 1:
            # g: right branch, left sibling's partial sums known
            for b in range(sz):
                a = pbuf[pi + b]
                c = pbuf[pi + b + sz]
                if cbuf[0, po + b] == 0:
                    pbuf[po + b] = c + a
                else:
                    pbuf[po + b] = c - a
        else:
            # f: min-sum box-plus
            for b in range(sz):
                a = pbuf[pi + b]
                c = pbuf[pi + b + sz]
                s = 1.0
                if a < 0:
                    s = -s
                    a = -a
                if c < 0:
                    s = -s
                    c = -c
                pbuf[po + b] = s * (a if a < c else c)


@njit(cache=True)
def _push_partial_sums(cbuf, off, phi, n):
    """After deciding an odd leaf, fold partial sums back up the tree."""
    lam = n
    ph = phi
    while ph & 1 and lam > 0:
        sz = 1 << (n - lam)
        parity = (ph >> 1) & 1
        for b in range(sz):
            left = cbuf[0, off[lam] + b]
            right = cbuf[1, off[lam] + b]
            cbuf[parity, off[lam - 1] + b] = left ^ right
            cbuf[parity, off[lam - 1] + b + sz] = right
        ph >>= 1
        lam -= 1


@njit(cache=True)
def scl_decode_paths(llr_ch, frozen, list_size):
    """Successive-cancellation list decode over the natural-order transform.

    Returns ``(uhat, pm, active)``: up to ``list_size`` surviving decision
    vectors (full length N, frozen positions zero) and their path metrics
    (lower is better).  Path metric uses the min-sum penalty rule.
    """
    big_n = llr_ch.shape[0]
    n = 0
    while (1 << n) < big_n:
        n += 1
    size = 2 * big_n - 1
    lcap = list_size

    off = np.empty(n + 1, np.int64)
    off[0] = 0
    for lam in range(1, n + 1):
        off[lam] = off[lam - 1] + (1 << (n - lam + 1))

    pbufs = np.empty((lcap, size), np.float64)
    cbufs = np.zeros((lcap, 2, size), np.int8)
    uhat = np.zeros((lcap, big_n), np.int8)
    pm = np.full(lcap, np.inf)
    pm[0] = 0.0
    pbufs[0, :big_n] = llr_ch
    active = 1

    cand = np.empty(2 * lcap, np.float64)
    keepf = np.zeros(2 * lcap, np.int8)
    pm_next = np.empty(lcap, np.float64)
    free_slots = np.empty(lcap, np.int64)
    dpos = off[n]

    for phi in range(big_n):
        for l in range(active):
            _calc_llrs(pbufs[l], cbufs[l], off, phi, n)

        if frozen[phi] == 1:
            for l in range(active):
                d = pbufs[l, dpos]
                if d < 0:
                    pm[l] -= d
                cbufs[l, phi & 1, dpos] = 0
        else:
            for l in range(active):
                d = pbufs[l, dpos]
                pen = d if d >= 0 else -d
                if d < 0:
                    cand[2 * l] = pm[l] + pen
                    cand[2 * l + 1] = pm[l]
                else:
                    cand[2 * l] = pm[l]
                    cand[2 * l + 1] = pm[l] + pen
            nc = 2 * active
            keep = nc if nc <= lcap else lcap
            order = np.argsort(cand[:nc])
            for i in range(nc):
                keepf[i] = 0
            for i in range(keep):
                keepf[order[i]] = 1

            # free slots: parents with no surviving branch, then spare capacity
            nfree = 0
            for p in range(active):
                if keepf[2 * p] == 0 and keepf[2 * p + 1] == 0:
                    free_slots[nfree] = p
                    nfree += 1
            for s in range(active, lcap):
                free_slots[nfree] = s
                nfree += 1

            fidx = 0
            for p in range(active):
                k0 = keepf[2 * p]
                k1 = keepf[2 * p + 1]
                if k0 == 1 and k1 == 1:
                    s = free_slots[fidx]
                    fidx += 1
                    pbufs[s] = pbufs[p]
                    cbufs[s] = cbufs[p]
                    uhat[s] = uhat[p]
                    pm_next[s] = cand[2 * p + 1]
                    uhat[s, phi] = 1
                    cbufs[s, phi & 1, dpos] = 1
                    pm_next[p] = cand[2 * p]
                    uhat[p, phi] = 0
                    cbufs[p, phi & 1, dpos] = 0
                elif k0 == 1:
                    pm_next[p] = cand[2 * p]
                    uhat[p, phi] = 0
                    cbufs[p, phi & 1, dpos] = 0
                elif k1 == 1:
                    pm_next[p] = cand[2 * p + 1]
                    uhat[p, phi] = 1
                    cbufs[p, phi & 1, dpos] = 1
            active = keep
            for l in range(active):
                pm[l] = pm_next[l]

        if phi & 1:
            for l in range(active):
                _push_partial_sums(cbufs[l], off, phi, n)

    return uhat, pm, active
