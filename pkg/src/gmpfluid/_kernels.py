"""Compiled inner loops.

Kernels release the GIL so the thread pools in :mod:`gmpfluid.parallel`
get real concurrency. Every kernel is a pure function of its arguments;
results never depend on which thread runs them.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _rof_energy(f, u, weight):
    h, w = f.shape
    tv = 0.0
    fid = 0.0
    for i in range(h - 1):
        for j in range(w - 1):
            gx = u[i, j + 1] - u[i, j]
            gy = u[i + 1, j] - u[i, j]
            tv += math.sqrt(gx * gx + gy * gy)
        tv += abs(u[i + 1, w - 1] - u[i, w - 1])
    for j in range(w - 1):
        tv += abs(u[h - 1, j + 1] - u[h - 1, j])
    for i in range(h):
        for j in range(w):
            r = u[i, j] - f[i, j]
            fid += r * r
    return tv + fid / (2.0 * weight)


@njit(cache=True, nogil=True, fastmath=True)
def _z_row(rx, ry, f, inv_w, i, out):
    # out = div(r)[i, :] - f[i, :] / weight
    h, w = rx.shape
    out[0] = rx[i, 0]
    for j in range(1, w - 1):
        out[j] = rx[i, j] - rx[i, j - 1]
    if w > 1:
        out[w - 1] = -rx[i, w - 2]
    if i < h - 1:
        for j in range(w):
            out[j] += ry[i, j]
    if i > 0:
        for j in range(w):
            out[j] -= ry[i - 1, j]
    for j in range(w):
        out[j] -= f[i, j] * inv_w


@njit(cache=True, nogil=True, fastmath=True)
def tv_fgp(f, weight, step, max_iters, tol, trace):
    """Fast gradient projection on the ROF dual, monotone in the primal energy.

    Each iteration is a single row sweep: the dual update of row i and the
    primal reconstruction of row i run back to back so the working set stays
    a few rows wide. Returns ``(u, iterations, converged)``; ``trace``
    (length >= max_iters) receives the energy of the retained primal iterate
    after each pass.
    """
    h, w = f.shape
    px = np.zeros((h, w))
    py = np.zeros((h, w))
    rx = np.zeros((h, w))
    ry = np.zeros((h, w))
    zcur = np.empty(w)
    znext = np.zeros(w)
    grow = np.empty(w)
    grow2 = np.empty(w)
    drow = np.empty(w)
    cand = np.empty((h, w))
    best = f.copy()
    best_e = _rof_energy(f, f, weight)
    inv_w = 1.0 / weight
    t = 1.0
    converged = False
    n = 0
    for n in range(1, max_iters + 1):
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        mom = (t - 1.0) / t_next
        t = t_next
        change = 0.0
        norm = 0.0
        tv = 0.0
        fid = 0.0
        _z_row(rx, ry, f, inv_w, 0, zcur)
        for i in range(h):
            last_row = i == h - 1
            if not last_row:
                _z_row(rx, ry, f, inv_w, i + 1, znext)
            for j in range(w):
                gx = zcur[j + 1] - zcur[j] if j < w - 1 else 0.0
                gy = znext[j] - zcur[j]
                grow[j] = gx
                grow2[j] = 0.0 if last_row else gy
            for j in range(w):
                qx = rx[i, j] + step * grow[j]
                qy = ry[i, j] + step * grow2[j]
                s = 1.0 / max(1.0, math.sqrt(qx * qx + qy * qy))
                qx *= s
                qy *= s
                dx = qx - px[i, j]
                dy = qy - py[i, j]
                change += dx * dx + dy * dy
                norm += qx * qx + qy * qy
                rx[i, j] = qx + mom * dx
                ry[i, j] = qy + mom * dy
                px[i, j] = qx
                py[i, j] = qy
            # primal row i from the updated dual
            drow[0] = px[i, 0]
            for j in range(1, w - 1):
                drow[j] = px[i, j] - px[i, j - 1]
            if w > 1:
                drow[w - 1] = -px[i, w - 2]
            if not last_row:
                for j in range(w):
                    drow[j] += py[i, j]
            if i > 0:
                for j in range(w):
                    drow[j] -= py[i - 1, j]
            for j in range(w):
                v = f[i, j] - weight * drow[j]
                cand[i, j] = v
                r = v - f[i, j]
                fid += r * r
            if i > 0:
                for j in range(w - 1):
                    gx = cand[i - 1, j + 1] - cand[i - 1, j]
                    gy = cand[i, j] - cand[i - 1, j]
                    tv += math.sqrt(gx * gx + gy * gy)
                tv += abs(cand[i, w - 1] - cand[i - 1, w - 1])
            zcur, znext = znext, zcur
        for j in range(w - 1):
            tv += abs(cand[h - 1, j + 1] - cand[h - 1, j])
        e = tv + fid / (2.0 * weight)
        if e <= best_e:
            best_e = e
            best, cand = cand, best
        trace[n - 1] = best_e
        if math.sqrt(change) <= tol * math.sqrt(norm):
            converged = True
            break
    return best, n, converged


@njit(cache=True, nogil=True)
def min_translated(img, dxs, dys, out):
    """Pixelwise running minimum of ``img`` bilinearly shifted by each (dx, dy).

    Sampling clamps coordinates to the image (replicate border). Arithmetic
    matches :func:`gmpfluid.gmp.translate_image` term for term.
    """
    h, w = img.shape
    ix0 = np.empty(w, dtype=np.int64)
    ix1 = np.empty(w, dtype=np.int64)
    fxs = np.empty(w)
    tmp = np.empty((h, w))
    for k in range(dxs.shape[0]):
        dx = dxs[k]
        dy = dys[k]
        for x in range(w):
            sx = x - dx
            x0 = math.floor(sx)
            fxs[x] = sx - x0
            ix0[x] = min(max(int(x0), 0), w - 1)
            ix1[x] = min(max(int(x0) + 1, 0), w - 1)
        for y in range(h):
            for x in range(w):
                a = img[y, ix0[x]]
                tmp[y, x] = a + fxs[x] * (img[y, ix1[x]] - a)
        for y in range(h):
            sy = y - dy
            y0 = math.floor(sy)
            fy = sy - y0
            iy0 = min(max(int(y0), 0), h - 1)
            iy1 = min(max(int(y0) + 1, 0), h - 1)
            for x in range(w):
                top = tmp[iy0, x]
                v = top + fy * (tmp[iy1, x] - top)
                if v < out[y, x]:
                    out[y, x] = v
