# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the all-balls maximal function.

Ball sums of ``w`` and of the exact products ``w * f`` (split with ``fma``)
are kept as nonoverlapping expansions, the representation behind
``math.fsum``. The average is then rounded once from the exact quotient, so it
is bit-identical to the pure-Python path. Must be compiled without
-ffast-math or FP contraction.
"""

import numpy as np

from cython.parallel cimport parallel, prange, threadid
from libc.math cimport fabs, fma, nextafter, INFINITY
from libc.stdint cimport uint64_t
from libc.stdlib cimport free, malloc, qsort
from libc.string cimport memcpy

NAME = "cython"

cdef enum:
    MAXP = 64


ctypedef struct pair_t:
    double d
    Py_ssize_t i


cdef int _cmp_pair(const void* a, const void* b) noexcept nogil:
    cdef const pair_t* pa = <const pair_t*>a
    cdef const pair_t* pb = <const pair_t*>b
    if pa.d < pb.d:
        return -1
    if pa.d > pb.d:
        return 1
    if pa.i < pb.i:
        return -1
    if pa.i > pb.i:
        return 1
    return 0


cdef inline int _grow(double* p, int m, double x) noexcept nogil:
    # adds x to the expansion p[0:m]; returns new length, -1 on overflow
    cdef int i = 0, j
    cdef double y, hi, lo, t
    for j in range(m):
        y = p[j]
        if fabs(x) < fabs(y):
            t = x
            x = y
            y = t
        hi = x + y
        lo = y - (hi - x)
        if lo != 0.0:
            p[i] = lo
            i += 1
        x = hi
    if x != 0.0:
        if i >= MAXP:
            return -1
        p[i] = x
        i += 1
    return i


cdef inline double _round(const double* p, int n) noexcept nogil:
    cdef double hi = 0.0, lo = 0.0, x, y, yr
    if n > 0:
        n -= 1
        hi = p[n]
        while n > 0:
            x = hi
            n -= 1
            y = p[n]
            hi = x + y
            yr = hi - x
            lo = y - yr
            if lo != 0.0:
                break
        if n > 0 and ((lo < 0.0 and p[n - 1] < 0.0) or (lo > 0.0 and p[n - 1] > 0.0)):
            y = lo * 2.0
            x = hi + y
            yr = x - hi
            if y == yr:
                hi = x
    return hi


cdef inline int _grow_prod(double* p, int m, double a, double b) noexcept nogil:
    # adds the exact product a * b
    cdef double hi = a * b
    cdef double lo = fma(a, b, -hi)
    m = _grow(p, m, hi)
    if m < 0 or lo == 0.0:
        return m
    return _grow(p, m, lo)


cdef inline int _residual_sign(const double* N, int mn, const double* D, int md,
                               double a, double h, double* R) noexcept nogil:
    # sign of N - (a + h) * D, exactly; h is zero or a power of two; 2 on overflow
    cdef int m = mn, j
    cdef double v
    memcpy(R, N, mn * sizeof(double))
    for j in range(md):
        m = _grow_prod(R, m, -a, D[j])
        if m < 0:
            return 2
        if h != 0.0:
            m = _grow(R, m, -h * D[j])
            if m < 0:
                return 2
    v = _round(R, m)
    return (v > 0.0) - (v < 0.0)


cdef inline bint _odd(double x) noexcept nogil:
    cdef uint64_t bits
    memcpy(&bits, &x, sizeof(double))
    return bits & 1


cdef inline int _divide(const double* N, int mn, const double* D, int md,
                        double* R, double* out) noexcept nogil:
    # correctly rounded N / D (round half to even) for N >= 0, D > 0
    cdef double n = _round(N, mn), d = _round(D, md), r, up, dn
    cdef int s, it
    if n == 0.0:
        out[0] = 0.0
        return 0
    r = n / d
    for it in range(16):
        up = nextafter(r, INFINITY)
        s = _residual_sign(N, mn, D, md, r, (up - r) * 0.5, R)
        if s == 2:
            return -1
        if s > 0 or (s == 0 and _odd(r)):
            r = up
            continue
        dn = nextafter(r, 0.0)
        s = _residual_sign(N, mn, D, md, dn, (r - dn) * 0.5, R)
        if s == 2:
            return -1
        if s < 0 or (s == 0 and _odd(r)):
            r = dn
            continue
        out[0] = r
        return 0
    return -1


cdef inline void _offer(double cand, Py_ssize_t center, double thr, Py_ssize_t y,
                        const Py_ssize_t* ids, double* val, Py_ssize_t* argc,
                        double* argt) noexcept nogil:
    cdef Py_ssize_t cur = argc[y]
    if cand > val[y] or (cand == val[y] and cur >= 0 and ids[center] < ids[cur]):
        val[y] = cand
        argc[y] = center
        argt[y] = thr


cdef int _center_general(Py_ssize_t c, Py_ssize_t n, const double* dist,
                         const double* w, const double* f, const Py_ssize_t* ids,
                         pair_t* pairs, double* avg, double* thr, Py_ssize_t* gstart,
                         double* pn, double* pd, double* R,
                         double* val, Py_ssize_t* argc, double* argt) noexcept nogil:
    cdef Py_ssize_t y, s, e, g, G = 0, q, bi = 0
    cdef int mn = 0, md = 0
    cdef double t, best
    for y in range(n):
        pairs[y].d = dist[c * n + y]
        pairs[y].i = y
    qsort(pairs, n, sizeof(pair_t), _cmp_pair)
    s = 0
    while s < n:
        t = pairs[s].d
        e = s
        while e < n and pairs[e].d == t:
            mn = _grow_prod(pn, mn, w[pairs[e].i], f[pairs[e].i])
            md = _grow(pd, md, w[pairs[e].i])
            if mn < 0 or md < 0:
                return -1
            e += 1
        if _divide(pn, mn, pd, md, R, &avg[G]) < 0:
            return -1
        thr[G] = t
        gstart[G] = s
        G += 1
        s = e
    gstart[G] = n
    best = -1.0
    g = G - 1
    while g >= 0:
        if avg[g] >= best:
            best = avg[g]
            bi = g
        for q in range(gstart[g], gstart[g + 1]):
            _offer(best, c, thr[bi], pairs[q].i, ids, val, argc, argt)
        g -= 1
    return 0


cdef inline int _range_expansion(const double* P, const int* L, Py_ssize_t lo, Py_ssize_t hi,
                                 double* buf) noexcept nogil:
    # exact expansion of values[lo:hi] from prefix expansions; returns its length
    cdef int m = L[hi], j
    memcpy(buf, P + hi * MAXP, m * sizeof(double))
    for j in range(L[lo]):
        m = _grow(buf, m, -P[lo * MAXP + j])
        if m < 0:
            return -1
    return m


# -- interval kernel -------------------------------------------------------------
#
# A candidate ball is a contiguous range [a, b) in coordinate order. Its average
# is first known only as a float interval [lo, hi] from double-double prefix
# sums; the exact, correctly rounded value (ex >= 0) is computed on demand when
# two intervals overlap, and once per point at the end.

ctypedef struct cand_t:
    double lo
    double hi
    double ex
    Py_ssize_t a
    Py_ssize_t b
    double thr


ctypedef struct ctx_t:
    const double* Pn
    const int* Ln
    const double* Pd
    const int* Ld
    const double* Hn
    const double* Tn
    const double* En
    const double* Hd
    const double* Td
    const double* Ed
    const long long* Z
    double* bn
    double* bd
    double* R


cdef inline void _dd_range(const double* H, const double* T, const double* E,
                           Py_ssize_t a, Py_ssize_t b, double* hi, double* lo, double* err) noexcept nogil:
    # sum(values[a:b]) = hi + lo + e with |e| <= err, from prefix sums H + T within E
    cdef double u = 1.1102230246251565e-16, s1, c1, s2, c2, bp, nh, c3
    s1 = H[b] - H[a]
    bp = s1 - H[b]
    c1 = (H[b] - (s1 - bp)) + (-H[a] - bp)
    s2 = T[b] - T[a]
    bp = s2 - T[b]
    c2 = (T[b] - (s2 - bp)) + (-T[a] - bp)
    nh = s1 + s2
    bp = nh - s1
    c3 = (s1 - (nh - bp)) + (s2 - bp)
    hi[0] = nh
    lo[0] = (c1 + c2) + c3
    err[0] = (4.0 * u * (fabs(c1) + fabs(c2) + fabs(c3)) + E[a] + E[b]) * (1.0 + 4.0 * u)


cdef inline double _half_ulp(double x) noexcept nogil:
    # half the smaller of the two gaps around a positive normal x
    cdef uint64_t bits
    cdef double p2
    memcpy(&bits, &x, 8)
    bits &= <uint64_t>0x7FF0000000000000
    memcpy(&p2, &bits, 8)
    if p2 == x:
        return p2 * 5.551115123125783e-17  # 2**-54 below a power of two
    return p2 * 1.1102230246251565e-16  # 2**-53


cdef inline void _enclose(ctx_t* cx, cand_t* k) noexcept nogil:
    # Settles the correctly rounded average when a double-double estimate puts
    # it strictly inside the rounding cell of q = fl(nh / dh); otherwise leaves
    # a float enclosure for the exact path.
    cdef double u = 1.1102230246251565e-16, u4 = 4.0 * u
    cdef double nh, nl, en, dh, dl, ed, q, q2, e, s, r, pr, t, bound, dlo
    if cx.Z[k.b] == cx.Z[k.a]:
        k.ex = 0.0
        k.lo = 0.0
        k.hi = 0.0
        return
    _dd_range(cx.Hn, cx.Tn, cx.En, k.a, k.b, &nh, &nl, &en)
    _dd_range(cx.Hd, cx.Td, cx.Ed, k.a, k.b, &dh, &dl, &ed)
    dlo = (dh + dl - ed) * (1.0 - u4)
    if 1e-280 < nh < 1e280 and 1e-280 < dh < 1e280 and dlo > 0.0:
        q = nh / dh
        # N - q D = r + nl - q dl + (error terms), with r exact
        r = fma(-q, dh, nh)
        pr = q * dl
        t = (r + nl) - pr
        bound = (u4 * (fabs(r) + fabs(nl) + fabs(pr)) + en + q * ed * (1.0 + u4)) * (1.0 + u4)
        # one correction step, then N - q2 D = s + (terms bounded below); e is exact
        q2 = q + t / dh
        if 1e-280 < q2 < 1e280:
            e = q - q2
            s = fma(e, dh, t)
            bound = (bound + 2.0 * u * fabs(s) + fabs(e) * (fabs(dl) + ed) * (1.0 + u4)) * (1.0 + u4)
            if (fabs(s) + bound) * (1.0 + u4) < _half_ulp(q2) * dlo * (1.0 - u4):
                k.ex = q2
                k.lo = q2
                k.hi = q2
                return
    k.ex = -1.0
    nh = nh + nl
    if nh - en <= 0.0 or dlo <= 0.0:
        k.lo = 0.0
        k.hi = INFINITY
    else:
        k.lo = (nh - en) * (1.0 - u4) / ((dh + dl + ed) * (1.0 + u4)) * (1.0 - u4)
        k.hi = (nh + en) * (1.0 + u4) / dlo * (1.0 + u4)


cdef inline int _resolve(ctx_t* cx, cand_t* k) noexcept nogil:
    cdef int mn, md
    if k.ex >= 0.0:
        return 0
    mn = _range_expansion(cx.Pn, cx.Ln, k.a, k.b, cx.bn)
    md = _range_expansion(cx.Pd, cx.Ld, k.a, k.b, cx.bd)
    if mn < 0 or md < 0 or _divide(cx.bn, mn, cx.bd, md, cx.R, &k.ex) < 0:
        return -1
    k.lo = k.ex
    k.hi = k.ex
    return 0


cdef inline int _wins(ctx_t* cx, cand_t* x, cand_t* y) noexcept nogil:
    # 1 if avg(x) > avg(y), 0 if less, 2 if equal; -1 on failure
    if x.lo > y.hi:
        return 1
    if x.hi < y.lo:
        return 0
    if _resolve(cx, x) < 0 or _resolve(cx, y) < 0:
        return -1
    if x.ex > y.ex:
        return 1
    if x.ex < y.ex:
        return 0
    return 2


cdef int _center_interval(ctx_t* cx, Py_ssize_t c, Py_ssize_t n, const double* xs,
                          const double* f, const Py_ssize_t* run_lo, const Py_ssize_t* run_hi,
                          const Py_ssize_t* ids, double* thr, Py_ssize_t* glo, Py_ssize_t* ghi,
                          double* val, Py_ssize_t* argc, double* argt) noexcept nogil:
    cdef Py_ssize_t lo = c, hi = c, left = c - 1, right = c + 1, G, g, y, idc = ids[c]
    cdef double xc = xs[c], dl, dr, t, v, bv, bt
    cdef cand_t best, k
    cdef int w
    thr[0] = 0.0
    glo[0] = c
    ghi[0] = c
    G = 1
    while left >= 0 or right < n:
        dl = fabs(xs[left] - xc) if left >= 0 else INFINITY
        dr = fabs(xs[right] - xc) if right < n else INFINITY
        t = dl if dl < dr else dr
        while left >= 0 and fabs(xs[left] - xc) == t:
            lo = left
            left -= 1
        while right < n and fabs(xs[right] - xc) == t:
            hi = right
            right += 1
        thr[G] = t
        glo[G] = lo
        ghi[G] = hi
        G += 1
    g = G - 1
    while g >= 0:
        k.a = glo[g]
        k.b = ghi[g] + 1
        k.thr = thr[g]
        if k.a >= run_lo[c] and k.b <= run_hi[c]:
            # f is constant on the ball, so the exact average is that constant
            k.ex = f[c]
            k.lo = k.ex
            k.hi = k.ex
        else:
            _enclose(cx, &k)
        if g == G - 1:
            best = k
        else:
            # ties go to the smaller threshold, i.e. the later group
            w = _wins(cx, &k, &best)
            if w < 0:
                return -1
            if w >= 1:
                best = k
        if best.ex < 0.0 and _resolve(cx, &best) < 0:
            return -1
        bv = best.ex
        bt = best.thr
        if g == 0:
            v = val[c]
            if bv > v or (bv == v and idc < ids[argc[c]]):
                val[c] = bv
                argc[c] = c
                argt[c] = bt
        else:
            for y in range(glo[g], glo[g - 1]):
                v = val[y]
                if bv > v or (bv == v and idc < ids[argc[y]]):
                    val[y] = bv
                    argc[y] = c
                    argt[y] = bt
            for y in range(ghi[g - 1] + 1, ghi[g] + 1):
                v = val[y]
                if bv > v or (bv == v and idc < ids[argc[y]]):
                    val[y] = bv
                    argc[y] = c
                    argt[y] = bt
        g -= 1
    return 0


cdef _merge(Py_ssize_t nt, Py_ssize_t n, double[:, ::1] val, Py_ssize_t[:, ::1] argc,
            double[:, ::1] argt, const Py_ssize_t[::1] ids):
    out_v = np.array(val[0], copy=True)
    out_c = np.array(argc[0], copy=True)
    out_t = np.array(argt[0], copy=True)
    cdef double[::1] ov = out_v
    cdef Py_ssize_t[::1] oc = out_c
    cdef double[::1] ot = out_t
    cdef Py_ssize_t k, y
    for k in range(1, nt):
        for y in range(n):
            if argc[k, y] < 0:
                continue
            if (oc[y] < 0 or val[k, y] > ov[y]
                    or (val[k, y] == ov[y] and ids[argc[k, y]] < ids[oc[y]])):
                ov[y] = val[k, y]
                oc[y] = argc[k, y]
                ot[y] = argt[k, y]
    return out_v, out_c.astype(np.int64), out_t


def maximal_general(dist, w, f, int nthreads=0):
    cdef const double[:, ::1] D = np.ascontiguousarray(dist, dtype=np.float64)
    cdef const double[::1] W = np.ascontiguousarray(w, dtype=np.float64)
    cdef const double[::1] F = np.ascontiguousarray(f, dtype=np.float64)
    cdef Py_ssize_t n = D.shape[0]
    cdef Py_ssize_t nt = max(1, min(nthreads if nthreads > 0 else 1, n))
    ids_arr = np.arange(n, dtype=np.intp)
    cdef const Py_ssize_t[::1] ids = ids_arr
    val_arr = np.full((nt, n), -1.0)
    argc_arr = np.full((nt, n), -1, dtype=np.intp)
    argt_arr = np.zeros((nt, n))
    cdef double[:, ::1] val = val_arr
    cdef Py_ssize_t[:, ::1] argc = argc_arr
    cdef double[:, ::1] argt = argt_arr
    cdef int failed = 0
    cdef Py_ssize_t c, tid
    cdef pair_t* pairs
    cdef double* avg
    cdef double* thr
    cdef Py_ssize_t* gstart
    cdef double* pn
    cdef double* pd
    cdef double* R
    if n == 0:
        return np.zeros(0), np.zeros(0, dtype=np.int64), np.zeros(0)
    with nogil, parallel(num_threads=nt):
        tid = threadid()
        pairs = <pair_t*>malloc(n * sizeof(pair_t))
        avg = <double*>malloc(n * sizeof(double))
        thr = <double*>malloc(n * sizeof(double))
        gstart = <Py_ssize_t*>malloc((n + 1) * sizeof(Py_ssize_t))
        pn = <double*>malloc(MAXP * sizeof(double))
        pd = <double*>malloc(MAXP * sizeof(double))
        R = <double*>malloc(MAXP * sizeof(double))
        for c in prange(n, schedule="dynamic"):
            if _center_general(c, n, &D[0, 0], &W[0], &F[0], &ids[0], pairs, avg, thr,
                               gstart, pn, pd, R, &val[tid, 0], &argc[tid, 0], &argt[tid, 0]) < 0:
                failed = 1
        free(pairs)
        free(avg)
        free(thr)
        free(gstart)
        free(pn)
        free(pd)
        free(R)
    if failed:
        raise OverflowError("exact summation expansion exceeded its capacity")
    return _merge(nt, n, val, argc, argt, ids)


cdef _prefix_expansions(const double[::1] w, const double[::1] f, bint product,
                        double[::1] P, int[::1] L, double[::1] H, double[::1] T, double[::1] E):
    # exact prefix expansions P of w (or of w * f, using exact products), plus
    # double-double prefix sums H + T. With every term fed through TwoSum,
    # |H + T - S| <= gamma_{m}^2 * sum|terms| for m terms; E pads that bound
    cdef Py_ssize_t n = w.shape[0], i
    cdef int m = 0, nt
    cdef double u = 1.1102230246251565e-16, terms[2], h = 0.0, tl = 0.0, s, bp, gm
    cdef int j
    L[0] = 0
    H[0] = 0.0
    T[0] = 0.0
    E[0] = 0.0
    for i in range(n):
        memcpy(&P[(i + 1) * MAXP], &P[i * MAXP], m * sizeof(double))
        if product:
            terms[0] = w[i] * f[i]
            terms[1] = fma(w[i], f[i], -terms[0])
            nt = 2
        else:
            terms[0] = w[i]
            nt = 1
        for j in range(nt):
            m = _grow(&P[(i + 1) * MAXP], m, terms[j])
            if m < 0:
                raise OverflowError("exact summation expansion exceeded its capacity")
            s = h + terms[j]
            bp = s - h
            tl += (h - (s - bp)) + (terms[j] - bp)
            h = s
        L[i + 1] = m
        H[i + 1] = h
        T[i + 1] = tl
        gm = 2.0 * (i + 1) * u
        E[i + 1] = 4.0 * gm * gm * (h + fabs(tl)) + 1e-270


def maximal_interval(xs, w, f, ids, int nthreads=0):
    cdef const double[::1] X = np.ascontiguousarray(xs, dtype=np.float64)
    cdef Py_ssize_t n = X.shape[0]
    cdef const Py_ssize_t[::1] IDS = np.ascontiguousarray(ids, dtype=np.intp)
    if n == 0:
        return np.zeros(0), np.zeros(0, dtype=np.int64), np.zeros(0)
    w_arr = np.ascontiguousarray(w, dtype=np.float64)
    f_arr = np.ascontiguousarray(f, dtype=np.float64)
    arrays = {}
    for key, product in (("n", True), ("d", False)):
        P = np.zeros((n + 1) * MAXP)
        L = np.zeros(n + 1, dtype=np.intc)
        H, T, E = np.zeros(n + 1), np.zeros(n + 1), np.zeros(n + 1)
        _prefix_expansions(w_arr, f_arr, product, P, L, H, T, E)
        arrays[key] = (P, L, H, T, E)
    cdef const double[::1] Pn = arrays["n"][0]
    cdef const int[::1] Ln = arrays["n"][1]
    cdef const double[::1] Hn = arrays["n"][2]
    cdef const double[::1] Tn = arrays["n"][3]
    cdef const double[::1] En = arrays["n"][4]
    cdef const double[::1] Pd = arrays["d"][0]
    cdef const int[::1] Ld = arrays["d"][1]
    cdef const double[::1] Hd = arrays["d"][2]
    cdef const double[::1] Td = arrays["d"][3]
    cdef const double[::1] Ed = arrays["d"][4]
    # maximal runs of equal f values, as [run_lo[i], run_hi[i]) around each i
    change = np.flatnonzero(f_arr[1:] != f_arr[:-1]) + 1
    starts = np.r_[0, change].astype(np.intp)
    ends = np.r_[change, n].astype(np.intp)
    cdef const Py_ssize_t[::1] RL = np.repeat(starts, ends - starts)
    cdef const Py_ssize_t[::1] RH = np.repeat(ends, ends - starts)
    cdef const double[::1] FS = f_arr
    # count of nonzero values before each index: all-zero ranges average to 0
    cdef const long long[::1] Z = np.r_[0, np.cumsum(f_arr != 0)].astype(np.int64)
    cdef Py_ssize_t nt = max(1, min(nthreads if nthreads > 0 else 1, n))
    val_arr = np.full((nt, n), -1.0)
    argc_arr = np.full((nt, n), -1, dtype=np.intp)
    argt_arr = np.zeros((nt, n))
    cdef double[:, ::1] val = val_arr
    cdef Py_ssize_t[:, ::1] argc = argc_arr
    cdef double[:, ::1] argt = argt_arr
    fail_arr = np.zeros(nt, dtype=np.intc)
    cdef int[::1] fail = fail_arr
    cdef Py_ssize_t c, tid
    cdef double* thr
    cdef Py_ssize_t* glo
    cdef Py_ssize_t* ghi
    cdef ctx_t cx
    cdef ctx_t base
    base.Pn = &Pn[0]
    base.Ln = &Ln[0]
    base.Pd = &Pd[0]
    base.Ld = &Ld[0]
    base.Hn = &Hn[0]
    base.Tn = &Tn[0]
    base.En = &En[0]
    base.Hd = &Hd[0]
    base.Td = &Td[0]
    base.Ed = &Ed[0]
    base.Z = &Z[0]
    with nogil, parallel(num_threads=nt):
        tid = threadid()
        cx = base
        cx.bn = <double*>malloc(MAXP * sizeof(double))
        cx.bd = <double*>malloc(MAXP * sizeof(double))
        cx.R = <double*>malloc(MAXP * sizeof(double))
        thr = <double*>malloc(n * sizeof(double))
        glo = <Py_ssize_t*>malloc(n * sizeof(Py_ssize_t))
        ghi = <Py_ssize_t*>malloc(n * sizeof(Py_ssize_t))
        for c in prange(n, schedule="dynamic"):
            if _center_interval(&cx, c, n, &X[0], &FS[0], &RL[0], &RH[0], &IDS[0],
                                thr, glo, ghi, &val[tid, 0], &argc[tid, 0],
                                &argt[tid, 0]) < 0:
                fail[tid] = 1
        free(cx.bn)
        free(cx.bd)
        free(cx.R)
        free(thr)
        free(glo)
        free(ghi)
    if fail_arr.any():
        raise OverflowError("exact summation expansion exceeded its capacity")
    return _merge(nt, n, val, argc, argt, IDS)


def quasi_triangle(dist, int nthreads=0):
    cdef const double[:, ::1] D = np.ascontiguousarray(dist, dtype=np.float64)
    cdef Py_ssize_t n = D.shape[0], x, y, z
    cdef double best = 1.0, m, a, b, dxy
    with nogil:
        for x in range(n):
            for y in range(n):
                if x == y:
                    continue
                dxy = D[x, y]
                for z in range(n):
                    a = D[x, z]
                    b = D[z, y]
                    m = a if a > b else b
                    a = dxy / m
                    if a > best:
                        best = a
    return best
