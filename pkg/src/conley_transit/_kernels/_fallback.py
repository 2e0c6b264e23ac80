"""Pure-Python reference implementations of the hot kernels.

Same signatures and results as the compiled module; used when the
extension is not built or ``CONLEY_TRANSIT_BACKEND=python`` is set.
Rows may be arbitrarily wide here (Python ints).
"""

from __future__ import annotations

import math

import numpy as np

NAME = "python"


def rank_u64(rows) -> int:
    pivots: dict[int, int] = {}
    for v in rows:
        v = int(v)
        while v:
            b = (v & -v).bit_length() - 1
            p = pivots.get(b)
            if p is None:
                pivots[b] = v
                break
            v ^= p
    return len(pivots)


def scan_block(base, deltas, mat_off, check_start, check_target, nfree, prefix, low_bits):
    """Accepted candidate codes ``(prefix << low_bits) | g`` for all g, ascending.

    ``base`` holds every cone-matrix row at the all-zero assignment,
    ``deltas[k]`` the row change when free variable k flips.  Variable k
    sits at bit ``nfree - 1 - k`` of the code.  A candidate passes when the
    summed row ranks of each check's matrices hit that check's target.
    """
    rows = [int(r) for r in base]
    deltas = [[int(r) for r in d] for d in deltas]
    high = prefix << low_bits
    for k in range(nfree):
        if high >> (nfree - 1 - k) & 1:
            dk = deltas[k]
            rows = [a ^ b for a, b in zip(rows, dk)]
    mat_off = [int(v) for v in mat_off]
    check_start = [int(v) for v in check_start]
    check_target = [int(v) for v in check_target]
    nchecks = len(check_target)
    nonzero = [[i for i, v in enumerate(d) if v] for d in deltas]
    accepted = []
    g = 0
    for step in range(1 << low_bits):
        if step:
            pos = (step & -step).bit_length() - 1
            g ^= 1 << pos
            k = nfree - 1 - pos
            dk = deltas[k]
            for i in nonzero[k]:
                rows[i] ^= dk[i]
        ok = True
        for c in range(nchecks):
            total = 0
            for m in range(check_start[c], check_start[c + 1]):
                total += rank_u64(rows[mat_off[m]:mat_off[m + 1]])
            if total != check_target[c]:
                ok = False
                break
        if ok:
            accepted.append(high | g)
    accepted.sort()
    return np.array(accepted, dtype=np.uint64)


def _poly(a, b, x, lam):
    acc = 0.0
    for k in range(5, -1, -1):
        acc = acc * x + (a[k] + b[k] * lam)
    return acc


TINY = 1e-300


def rk4_poly(a, b, eps, x0, lam0, h, nsteps, lam_stop, xlo, xhi, llo, lhi, spacing, grid_step):
    """Fixed-step RK4 for x' = sum_k (a_k + b_k lam) x^k, lam' = eps lam (lam - 1).

    Returns (samples[N,3], hit_index[K], hit_t[K], hit_x[K], exit_code, steps).
    Exit codes: 0 horizon, 1 lam_stop, 2 x window, 3 lam window, 4 non-finite.
    """
    a = [float(v) for v in a]
    b = [float(v) for v in b]
    x, lam, t = float(x0), float(lam0), 0.0
    samples = [(t, x, lam)]
    xs, ls = x, lam
    hit_k, hit_t, hit_x = [], [], []
    code = 0
    steps = 0
    half = 0.5 * h
    for i in range(nsteps):
        k1x = _poly(a, b, x, lam)
        k1l = eps * lam * (lam - 1.0)
        x2 = x + half * k1x
        l2 = lam + half * k1l
        k2x = _poly(a, b, x2, l2)
        k2l = eps * l2 * (l2 - 1.0)
        x3 = x + half * k2x
        l3 = lam + half * k2l
        k3x = _poly(a, b, x3, l3)
        k3l = eps * l3 * (l3 - 1.0)
        x4 = x + h * k3x
        l4 = lam + h * k3l
        k4x = _poly(a, b, x4, l4)
        k4l = eps * l4 * (l4 - 1.0)
        xn = x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        ln = lam + h / 6.0 * (k1l + 2.0 * k2l + 2.0 * k3l + k4l)
        if abs(xn) < TINY:
            xn = 0.0  # avoid subnormal slowdown on long decays
        steps = i + 1
        if not (math.isfinite(xn) and math.isfinite(ln)):
            code = 4
            break
        if grid_step > 0.0:
            lo, hi = (ln, lam) if ln < lam else (lam, ln)
            kmin = math.ceil(lo / grid_step)
            kmax = math.floor(hi / grid_step)
            ks = range(kmax, kmin - 1, -1) if ln < lam else range(kmin, kmax + 1)
            for k in ks:
                gval = k * grid_step
                if gval == lam or ln == lam:
                    continue
                s = (gval - lam) / (ln - lam)
                hit_k.append(k)
                hit_t.append(t + s * h)
                hit_x.append(x + s * (xn - x))
        x, lam, t = xn, ln, steps * h
        if abs(x - xs) >= spacing or abs(lam - ls) >= spacing:
            samples.append((t, x, lam))
            xs, ls = x, lam
        if lam < lam_stop:
            code = 1
            break
        if x < xlo or x > xhi:
            code = 2
            break
        if lam < llo or lam > lhi:
            code = 3
            break
    if samples[-1][0] != t:
        samples.append((t, x, lam))
    return (
        np.array(samples, dtype=np.float64).reshape(-1, 3),
        np.array(hit_k, dtype=np.int64),
        np.array(hit_t, dtype=np.float64),
        np.array(hit_x, dtype=np.float64),
        code,
        steps,
    )
