"""Pure-Python kernels, used when the compiled extension is unavailable.

Same signatures and bit-identical results as ``_kernels.pyx``. Ball averages
go through exact integer arithmetic and are rounded once, so the values do not
depend on the order in which members are visited.
"""

import numpy as np

from ._exact import AveragePrefix, to_fixed

NAME = "python"


def _suffix_best(avg):
    """Running maximum from the right; ties keep the smaller group index."""
    G = len(avg)
    sval = [0.0] * G
    sidx = [0] * G
    best, bi = -1.0, 0
    for g in range(G - 1, -1, -1):
        if avg[g] >= best:
            best, bi = avg[g], g
        sval[g], sidx[g] = best, bi
    return sval, sidx


def maximal_general(dist, w, f, nthreads=0):
    """Max ball average containing each point, over every ``(center, threshold)``.

    Returns ``(values, argmax_center, argmax_threshold)``.
    """
    dist = np.asarray(dist, dtype=float)
    n = dist.shape[0]
    w_i, _ = to_fixed(w)
    f_i, f_s = to_fixed(f)
    wf_i = [a * b for a, b in zip(w_i, f_i)]
    val = np.full(n, -1.0)
    argc = np.full(n, -1, dtype=np.int64)
    argt = np.zeros(n)
    for c in range(n):
        row = dist[c]
        order = np.argsort(row, kind="stable")
        srow = row[order]
        ends = np.flatnonzero(np.r_[srow[1:] != srow[:-1], True])
        olist = order.tolist()
        avg = []
        num = den = 0
        start = 0
        for e in ends.tolist():
            for y in olist[start : e + 1]:
                num += wf_i[y]
                den += w_i[y]
            avg.append(num / (den * f_s))
            start = e + 1
        sval, sidx = _suffix_best(avg)
        sizes = np.diff(np.r_[-1, ends])
        gid = np.repeat(np.arange(len(ends)), sizes)
        cand = np.empty(n)
        cand[order] = np.asarray(sval)[gid]
        thr = np.empty(n)
        thr[order] = srow[ends[np.asarray(sidx)]][gid]
        # centers run in ascending order, so a strict win keeps the earliest center
        better = cand > val
        val[better] = cand[better]
        argc[better] = c
        argt[better] = thr[better]
    return val, argc, argt


def maximal_interval(xs, w, f, ids, nthreads=0):
    """Interval-space version; inputs sorted by coordinate.

    Balls are contiguous index ranges, grown outward from each center; range
    sums come from exact prefix sums. ``ids`` are the original point ids, used
    only to break ties toward the smaller center id. Centers are returned as
    positions in the sorted order.
    """
    xs = np.asarray(xs, dtype=float)
    n = xs.size
    pa = AveragePrefix(w, f)
    ids = np.asarray(ids).tolist()
    xl = xs.tolist()
    val = [-1.0] * n
    argc = [-1] * n
    argt = [0.0] * n
    inf = float("inf")
    for c in range(n):
        xc = xl[c]
        lo = hi = c
        left, right = c - 1, c + 1
        glo, ghi, thr, avg = [c], [c], [0.0], [pa.average(c, c + 1)]
        while left >= 0 or right < n:
            dl = abs(xl[left] - xc) if left >= 0 else inf
            dr = abs(xl[right] - xc) if right < n else inf
            t = min(dl, dr)
            while left >= 0 and abs(xl[left] - xc) == t:
                lo = left
                left -= 1
            while right < n and abs(xl[right] - xc) == t:
                hi = right
                right += 1
            glo.append(lo)
            ghi.append(hi)
            thr.append(t)
            avg.append(pa.average(lo, hi + 1))
        sval, sidx = _suffix_best(avg)
        for g in range(len(avg)):
            if g == 0:
                fresh = [c]
            else:
                fresh = list(range(glo[g], glo[g - 1])) + list(range(ghi[g - 1] + 1, ghi[g] + 1))
            b = sval[g]
            for y in fresh:
                if b > val[y] or (b == val[y] and ids[c] < ids[argc[y]]):
                    val[y] = b
                    argc[y] = c
                    argt[y] = thr[sidx[g]]
    return np.array(val), np.array(argc, dtype=np.int64), np.array(argt)


def quasi_triangle(dist, nthreads=0):
    """Smallest ``C1`` with ``d(x,y) <= C1 * max(d(x,z), d(z,y))`` for all triples."""
    d = np.asarray(dist, dtype=float)
    n = d.shape[0]
    best = 1.0
    with np.errstate(invalid="ignore", divide="ignore"):
        for z in range(n):
            m = np.maximum(d[:, z][:, None], d[z, :][None, :])
            r = np.where(m > 0, d / m, 0.0)
            best = max(best, float(r.max()))
    return best
