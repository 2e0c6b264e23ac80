# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: GF(2) row ranks, candidate scans and RK4.

Rows are uint64 bitsets, so every matrix handed to ``scan_block`` must
have at most 64 columns.  Loops run without the GIL so the enumeration
can spread blocks over a thread pool.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport ceil, floor, isfinite, fabs
from libc.stdint cimport uint64_t, int64_t, int32_t
from libcpp.vector cimport vector

cnp.import_array()

NAME = "cython"

cdef extern from *:
    int __builtin_ctzll(unsigned long long) nogil


cdef inline int _rank(const uint64_t* rows, Py_ssize_t n, uint64_t* piv) noexcept nogil:
    cdef uint64_t used = 0
    cdef uint64_t v
    cdef int b, rank = 0
    cdef Py_ssize_t i
    for i in range(n):
        v = rows[i]
        while v:
            b = __builtin_ctzll(v)
            if not (used >> b) & 1:
                piv[b] = v
                used |= (<uint64_t>1) << b
                rank += 1
                break
            v ^= piv[b]
    return rank


def rank_u64(rows):
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] arr = np.ascontiguousarray(rows, dtype=np.uint64)
    cdef uint64_t piv[64]
    cdef int r
    with nogil:
        r = _rank(<const uint64_t*>cnp.PyArray_DATA(arr), arr.shape[0], piv)
    return r


def scan_block(base, deltas, mat_off, check_start, check_target, int nfree, long long prefix, int low_bits):
    cdef const uint64_t[::1] b0 = np.ascontiguousarray(base, dtype=np.uint64)
    cdef Py_ssize_t nrows_total = b0.shape[0]
    cdef const uint64_t[:, ::1] dl = np.ascontiguousarray(
        np.asarray(deltas, dtype=np.uint64).reshape(nfree, nrows_total))
    cdef const int32_t[::1] moff = np.ascontiguousarray(mat_off, dtype=np.int32)
    cdef const int32_t[::1] cst = np.ascontiguousarray(check_start, dtype=np.int32)
    cdef const int32_t[::1] ctg = np.ascontiguousarray(check_target, dtype=np.int32)
    cdef Py_ssize_t nchecks = ctg.shape[0]
    cdef uint64_t[::1] rows = np.array(b0, dtype=np.uint64, copy=True)
    cdef Py_ssize_t nsteps = (<Py_ssize_t>1) << low_bits
    out_arr = np.empty(nsteps, dtype=np.uint64)
    cdef uint64_t[::1] out = out_arr
    cdef uint64_t high = (<uint64_t>prefix) << low_bits
    cdef uint64_t g = 0
    cdef uint64_t piv[64]
    cdef Py_ssize_t i, step, count = 0
    cdef int k, pos, c, m, total
    cdef bint ok
    with nogil:
        for k in range(nfree):
            if (high >> (nfree - 1 - k)) & 1:
                for i in range(nrows_total):
                    rows[i] ^= dl[k, i]
        for step in range(nsteps):
            if step:
                pos = __builtin_ctzll(<unsigned long long>step)
                g ^= (<uint64_t>1) << pos
                k = nfree - 1 - pos
                for i in range(nrows_total):
                    rows[i] ^= dl[k, i]
            ok = True
            for c in range(nchecks):
                total = 0
                for m in range(cst[c], cst[c + 1]):
                    total += _rank(&rows[moff[m]], moff[m + 1] - moff[m], piv)
                if total != ctg[c]:
                    ok = False
                    break
            if ok:
                out[count] = high | g
                count += 1
    res = out_arr[:count]
    res.sort()
    return res


cdef inline double _poly(const double* a, const double* b, double x, double lam) noexcept nogil:
    cdef double acc = 0.0
    cdef int k
    for k in range(5, -1, -1):
        acc = acc * x + (a[k] + b[k] * lam)
    return acc


cdef double TINY = 1e-300


def rk4_poly(a, b, double eps, double x0, double lam0, double h, long long nsteps,
             double lam_stop, double xlo, double xhi, double llo, double lhi,
             double spacing, double grid_step):
    cdef double ca[6]
    cdef double cb[6]
    cdef int k
    for k in range(6):
        ca[k] = float(a[k])
        cb[k] = float(b[k])
    cdef vector[double] samp
    cdef vector[int64_t] hk
    cdef vector[double] ht, hx
    cdef double x = x0, lam = lam0, t = 0.0, xs = x0, ls = lam0
    cdef double half = 0.5 * h, sixth = h / 6.0
    cdef double k1x, k1l, k2x, k2l, k3x, k3l, k4x, k4l, x2, l2, x3, l3, x4, l4, xn, ln
    cdef double gval, s, q = 0.0, qn = 0.0
    cdef long long i, steps = 0, kk, kmin, kmax
    cdef int code = 0
    samp.push_back(t); samp.push_back(x); samp.push_back(lam)
    if grid_step > 0.0:
        q = lam / grid_step
    with nogil:
        for i in range(nsteps):
            k1x = _poly(ca, cb, x, lam)
            k1l = eps * lam * (lam - 1.0)
            x2 = x + half * k1x
            l2 = lam + half * k1l
            k2x = _poly(ca, cb, x2, l2)
            k2l = eps * l2 * (l2 - 1.0)
            x3 = x + half * k2x
            l3 = lam + half * k2l
            k3x = _poly(ca, cb, x3, l3)
            k3l = eps * l3 * (l3 - 1.0)
            x4 = x + h * k3x
            l4 = lam + h * k3l
            k4x = _poly(ca, cb, x4, l4)
            k4l = eps * l4 * (l4 - 1.0)
            xn = x + sixth * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            ln = lam + sixth * (k1l + 2.0 * k2l + 2.0 * k3l + k4l)
            steps = i + 1
            if fabs(xn) < TINY:
                xn = 0.0  # avoid subnormal slowdown on long decays
            if not (isfinite(xn) and isfinite(ln)):
                code = 4
                break
            if grid_step > 0.0 and ln != lam:
                qn = ln / grid_step  # one division per step; q holds lam / grid_step
                if ln < lam:
                    kmin = <long long>ceil(qn)
                    kmax = <long long>floor(q)
                else:
                    kmin = <long long>ceil(q)
                    kmax = <long long>floor(qn)
                if kmin <= kmax:
                    if ln < lam:
                        kk = kmax
                        while kk >= kmin:
                            gval = kk * grid_step
                            if gval != lam:
                                s = (gval - lam) / (ln - lam)
                                hk.push_back(kk)
                                ht.push_back(t + s * h)
                                hx.push_back(x + s * (xn - x))
                            kk -= 1
                    else:
                        kk = kmin
                        while kk <= kmax:
                            gval = kk * grid_step
                            if gval != lam:
                                s = (gval - lam) / (ln - lam)
                                hk.push_back(kk)
                                ht.push_back(t + s * h)
                                hx.push_back(x + s * (xn - x))
                            kk += 1
            x = xn
            if grid_step > 0.0 and ln != lam:
                q = qn
            lam = ln
            t = steps * h
            if fabs(x - xs) >= spacing or fabs(lam - ls) >= spacing:
                samp.push_back(t); samp.push_back(x); samp.push_back(lam)
                xs = x
                ls = lam
            if lam < lam_stop:
                code = 1
                break
            if x < xlo or x > xhi:
                code = 2
                break
            if lam < llo or lam > lhi:
                code = 3
                break
    if samp[samp.size() - 3] != t:
        samp.push_back(t); samp.push_back(x); samp.push_back(lam)
    cdef Py_ssize_t ns = samp.size() // 3
    samples = np.empty((ns, 3), dtype=np.float64)
    cdef double[:, ::1] sv = samples
    for i in range(ns):
        sv[i, 0] = samp[3 * i]
        sv[i, 1] = samp[3 * i + 1]
        sv[i, 2] = samp[3 * i + 2]
    cdef Py_ssize_t nh = hk.size()
    hit_k = np.empty(nh, dtype=np.int64)
    hit_t = np.empty(nh, dtype=np.float64)
    hit_x = np.empty(nh, dtype=np.float64)
    cdef int64_t[::1] hkv = hit_k
    cdef double[::1] htv = hit_t
    cdef double[::1] hxv = hit_x
    for i in range(nh):
        hkv[i] = hk[i]
        htv[i] = ht[i]
        hxv[i] = hx[i]
    return samples, hit_k, hit_t, hit_x, code, steps
