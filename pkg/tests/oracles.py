"""Independent reference implementations used as test oracles.

Each oracle computes its answer by a different route from the library:
explicit loops, brute force, or a different optimisation method.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np


# -- sampling ------------------------------------------------------------------


def bilinear_sample(img, x, y):
    """Bilinear value at real coordinates (x, y) with clamped (replicate) indices."""
    h, w = img.shape
    x0, y0 = math.floor(x), math.floor(y)
    fx, fy = x - x0, y - y0

    def px(r, c):
        return img[min(max(r, 0), h - 1), min(max(c, 0), w - 1)]

    return ((1 - fx) * (1 - fy) * px(y0, x0) + fx * (1 - fy) * px(y0, x0 + 1)
            + (1 - fx) * fy * px(y0 + 1, x0) + fx * fy * px(y0 + 1, x0 + 1))


def shifted(img, dx, dy):
    h, w = img.shape
    return np.array([[bilinear_sample(img, c - dx, r - dy) for c in range(w)] for r in range(h)])


def gmp_stack_oracle(slices, theta_deg, delta, big_d):
    """Explicitly build every translated copy, then take the pixelwise min."""
    n = int(round(big_d / delta))
    t = math.radians(theta_deg)
    copies = []
    for s in slices:
        for j in range(-n, n + 1):
            dx, dy = j * delta * math.cos(t), j * delta * math.sin(t)
            dx = round(dx) if abs(dx - round(dx)) < 1e-9 else dx
            dy = round(dy) if abs(dy - round(dy)) < 1e-9 else dy
            copies.append(shifted(np.asarray(s, float), dx, dy))
    return np.min(copies, axis=0)


def resize_oracle(img, th, tw):
    """Per-pixel corner-aligned bilinear resize."""
    h, w = img.shape
    out = np.empty((th, tw))
    for r in range(th):
        for c in range(tw):
            y = r * (h - 1) / (th - 1) if h > 1 else 0.0
            x = c * (w - 1) / (tw - 1) if w > 1 else 0.0
            out[r, c] = bilinear_sample(img, x, y)
    return out


# -- denoising -----------------------------------------------------------------


def rof_energy_loops(f, u, weight):
    h, w = f.shape
    tv = 0.0
    for i in range(h):
        for j in range(w):
            gx = u[i, j + 1] - u[i, j] if j + 1 < w else 0.0
            gy = u[i + 1, j] - u[i, j] if i + 1 < h else 0.0
            tv += math.hypot(gx, gy)
    return tv + float(((u - f) ** 2).sum()) / (2 * weight)


def _smoothed_parts(u, eps):
    gx = np.zeros_like(u)
    gy = np.zeros_like(u)
    gx[:, :-1] = u[:, 1:] - u[:, :-1]
    gy[:-1, :] = u[1:, :] - u[:-1, :]
    m = np.sqrt(gx * gx + gy * gy + eps * eps)
    return gx, gy, m


def tv_primal_oracle(f, weight, eps_schedule=(1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8)):
    """Minimise the eps-smoothed primal ROF energy by damped Newton steps.

    Works on u directly (no dual variable), continuing eps towards zero. The
    Hessian is banded (bandwidth = image width) and solved by banded
    Cholesky. Returns the minimiser; its exact energy upper-bounds the optimum.
    """
    from scipy.linalg import solveh_banded

    f = np.asarray(f, float)
    h, w = f.shape
    n = h * w
    u = f.copy()

    def smooth_energy(v, eps):
        _, _, m = _smoothed_parts(v, eps)
        return m.sum() + ((v - f) ** 2).sum() / (2 * weight)

    for eps in eps_schedule:
        for _ in range(60):
            gx, gy, m = _smoothed_parts(u, eps)
            px, py = gx / m, gy / m
            grad = -px - py + (u - f) / weight
            grad[:, 1:] += px[:, :-1]
            grad[1:, :] += py[:-1, :]
            m3 = m**3
            a = 1 / m - gx * gx / m3
            c = 1 / m - gy * gy / m3
            b = -gx * gy / m3
            a[:, -1] = 0.0  # no horizontal difference in the last column
            b[:, -1] = 0.0
            c[-1, :] = 0.0  # no vertical difference in the last row
            b[-1, :] = 0.0
            diag = a + 2 * b + c + 1.0 / weight
            diag[:, 1:] += a[:, :-1]
            diag[1:, :] += c[:-1, :]
            ab = np.zeros((w + 1, n))
            ab[w] = diag.ravel()
            off1 = (-a - b).ravel()[:-1]  # (p, p+1)
            ab[w - 1, 1:] += off1
            offw = (-b - c).ravel()[: n - w]  # (p, p+w)
            ab[0, w:] += offw
            ab[1, w:] += b.ravel()[: n - w]  # (p+1, p+w); b is zero when w == 1
            step = -solveh_banded(ab, grad.ravel()).reshape(h, w)
            dec = float((grad * step).sum())
            e0 = smooth_energy(u, eps)
            s = 1.0
            while smooth_energy(u + s * step, eps) > e0 + 1e-4 * s * dec and s > 1e-10:
                s *= 0.5
            u = u + s * step
            if -dec < 1e-13:
                break
    return u


def median_oracle(img, r):
    h, w = img.shape
    out = np.empty_like(img)
    for i in range(h):
        for j in range(w):
            vals = sorted(img[min(max(i + a, 0), h - 1), min(max(j + b, 0), w - 1)]
                          for a in range(-r, r + 1) for b in range(-r, r + 1))
            out[i, j] = vals[len(vals) // 2]
    return out


# -- roi -----------------------------------------------------------------------


def column_argmax_oracle(vol):
    d, h, w = vol.shape
    counts = np.zeros(h)
    for s in range(d):
        for c in range(w):
            best, row = -np.inf, 0
            for r in range(h):
                if vol[s, r, c] > best:
                    best, row = vol[s, r, c], r
            counts[row] += 1
    return counts


def gaussian_grid_oracle(counts, mus, sigmas):
    """Best (mu, sigma) on a grid; amplitude solved in closed form per cell."""
    x = np.arange(len(counts), dtype=float)
    best = (np.inf, None, None)
    for mu in mus:
        for sg in sigmas:
            e = np.exp(-((x - mu) ** 2) / (2 * sg * sg))
            a = max((e @ counts) / (e @ e), 0.0)
            r = a * e - counts
            res = r @ r
            if res < best[0]:
                best = (res, mu, sg)
    return best


# -- segmentation --------------------------------------------------------------


def flood_fill_labels(mask):
    """8-connected labels in raster order of first pixel, by BFS."""
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=int)
    nxt = 0
    for r in range(h):
        for c in range(w):
            if mask[r, c] and labels[r, c] == 0:
                nxt += 1
                labels[r, c] = nxt
                q = deque([(r, c)])
                while q:
                    y, x = q.popleft()
                    for dy in (-1, 0, 1):
                        for dx in (-1, 0, 1):
                            yy, xx = y + dy, x + dx
                            if 0 <= yy < h and 0 <= xx < w and mask[yy, xx] and labels[yy, xx] == 0:
                                labels[yy, xx] = nxt
                                q.append((yy, xx))
    return labels


def otsu_oracle(values, bins=256):
    """Threshold maximising between-class variance, by trying every bin edge."""
    hist, edges = np.histogram(values, bins=bins, range=(0.0, 1.0))
    centres = (edges[:-1] + edges[1:]) / 2
    best, best_t = -1.0, None
    for k in range(1, bins):
        w0, w1 = hist[:k].sum(), hist[k:].sum()
        if w0 == 0 or w1 == 0:
            var = 0.0
        else:
            m0 = (hist[:k] * centres[:k]).sum() / w0
            m1 = (hist[k:] * centres[k:]).sum() / w1
            var = w0 * w1 * (m0 - m1) ** 2
        if var > best:
            best, best_t = var, edges[k]
    return best_t


def two_means_oracle(values):
    """Exhaustive search over threshold 2-partitions minimising within-cluster SSE.

    Returns the set of indices in the lower cluster.
    """
    v = np.asarray(values, float)
    best, best_low = np.inf, None
    for t in np.unique(v)[:-1]:
        low, high = v[v <= t], v[v > t]
        sse = ((low - low.mean()) ** 2).sum() + ((high - high.mean()) ** 2).sum()
        if sse < best - 1e-15:
            best, best_low = sse, set(np.flatnonzero(v <= t).tolist())
    return best_low


# -- metrics -------------------------------------------------------------------


def dice_sets(a, b):
    sa = {tuple(i) for i in np.argwhere(a)}
    sb = {tuple(i) for i in np.argwhere(b)}
    if not sa and not sb:
        return 1.0
    return 2 * len(sa & sb) / (len(sa) + len(sb))


def auc_pairwise(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else 0.5 if p == q else 0.0
    return total / (len(pos) * len(neg))


# -- detection -----------------------------------------------------------------


def gradient_oracle(s):
    s = list(map(float, s))
    n = len(s)
    g = []
    for i in range(n):
        if i == 0:
            g.append(s[1] - s[0])
        elif i == n - 1:
            g.append(s[-1] - s[-2])
        else:
            g.append((s[i + 1] - s[i - 1]) / 2)
    return np.array(g)


def detection_replay(scores, k, floor, min_run):
    """Replay the decision rule slice by slice with explicit loops."""
    n = len(scores)
    raw = [s > floor for s in scores]
    flags = []
    for i in range(n):
        votes = sum(1 for j in range(i - k, i + k + 1) if 0 <= j < n and raw[j])
        flags.append(votes >= k + 1)
    run = best = 0
    for f in flags:
        run = run + 1 if f else 0
        best = max(best, run)
    means = []
    for i in range(n):
        win = [scores[j] for j in range(i - k, i + k + 1) if 0 <= j < n]
        means.append(sum(win) / len(win))
    return flags, best >= min_run, max(means)
