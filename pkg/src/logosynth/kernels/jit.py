"""Numba-compiled pixel kernels.

Same contracts and the same IEEE operation order as ``plain``; outputs are
byte-identical (enforced by tests). Keep expressions in lockstep with the
numpy versions when editing either side.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def colour_transform(rgba: np.ndarray, r: float, black_sub: int) -> np.ndarray:
    h, w = rgba.shape[:2]
    out = rgba.copy()
    for i in range(h):
        for j in range(w):
            if rgba[i, j, 3] == 0:
                continue
            if rgba[i, j, 0] == 0 and rgba[i, j, 1] == 0 and rgba[i, j, 2] == 0:
                out[i, j, 0] = black_sub
                out[i, j, 1] = black_sub
                out[i, j, 2] = black_sub
            for c in range(3):
                s = math.floor(np.float64(out[i, j, c]) * r + 0.5)
                if s > 255.0:
                    s = 255.0
                if s < 0.0:
                    s = 0.0
                out[i, j, c] = np.uint8(s)
    return out


@njit(cache=True, nogil=True)
def warp_nearest(src: np.ndarray, inv: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    h, w = src.shape[:2]
    i00, i01, i02 = inv[0, 0], inv[0, 1], inv[0, 2]
    i10, i11, i12 = inv[1, 0], inv[1, 1], inv[1, 2]
    i20, i21, i22 = inv[2, 0], inv[2, 1], inv[2, 2]
    out = np.zeros((out_h, out_w, 4), dtype=np.uint8)
    for oy in range(out_h):
        gy = oy + 0.5
        for ox in range(out_w):
            gx = ox + 0.5
            wp = i20 * gx + i21 * gy + i22
            if wp <= 1e-9:
                continue
            x = (i00 * gx + i01 * gy + i02) / wp
            y = (i10 * gx + i11 * gy + i12) / wp
            kx = np.int64(math.floor(x))
            ky = np.int64(math.floor(y))
            if 0 <= kx < w and 0 <= ky < h:
                for c in range(4):
                    out[oy, ox, c] = src[ky, kx, c]
    return out


@njit(cache=True, nogil=True)
def warp_bilinear(src: np.ndarray, inv: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    h, w = src.shape[:2]
    i00, i01, i02 = inv[0, 0], inv[0, 1], inv[0, 2]
    i10, i11, i12 = inv[1, 0], inv[1, 1], inv[1, 2]
    i20, i21, i22 = inv[2, 0], inv[2, 1], inv[2, 2]
    out = np.zeros((out_h, out_w, 4), dtype=np.uint8)
    for oy in range(out_h):
        gy = oy + 0.5
        for ox in range(out_w):
            gx = ox + 0.5
            wp = i20 * gx + i21 * gy + i22
            if wp <= 1e-9:
                continue
            x = (i00 * gx + i01 * gy + i02) / wp
            y = (i10 * gx + i11 * gy + i12) / wp
            u = x - 0.5
            v = y - 0.5
            k0 = np.int64(math.floor(u))
            l0 = np.int64(math.floor(v))
            fu = u - k0
            fv = v - l0
            if fu == 0.0 and fv == 0.0 and 0 <= k0 < w and 0 <= l0 < h:
                # exact center hit: weight-1 sample, copy verbatim
                for c in range(4):
                    out[oy, ox, c] = src[l0, k0, c]
                continue
            acc_a = 0.0
            acc0 = 0.0
            acc1 = 0.0
            acc2 = 0.0
            # Neighbor order matches the numpy kernel: (0,0),(1,0),(0,1),(1,1).
            for n in range(4):
                dk = n & 1
                dl = n >> 1
                kk = k0 + dk
                ll = l0 + dl
                if kk < 0 or kk >= w or ll < 0 or ll >= h:
                    continue
                if dk == 0:
                    wu = 1.0 - fu
                else:
                    wu = fu
                if dl == 0:
                    wv = 1.0 - fv
                else:
                    wv = fv
                wt = wu * wv
                af = src[ll, kk, 3] / 255.0
                acc_a += wt * af
                acc0 += wt * (src[ll, kk, 0] * af)
                acc1 += wt * (src[ll, kk, 1] * af)
                acc2 += wt * (src[ll, kk, 2] * af)
            a8 = math.floor(acc_a * 255.0 + 0.5)
            if a8 < 1.0:
                continue
            if a8 > 255.0:
                a8 = 255.0
            out[oy, ox, 3] = np.uint8(a8)
            c0 = math.floor(acc0 / acc_a + 0.5)
            c1 = math.floor(acc1 / acc_a + 0.5)
            c2 = math.floor(acc2 / acc_a + 0.5)
            out[oy, ox, 0] = np.uint8(min(max(c0, 0.0), 255.0))
            out[oy, ox, 1] = np.uint8(min(max(c1, 0.0), 255.0))
            out[oy, ox, 2] = np.uint8(min(max(c2, 0.0), 255.0))
    return out


@njit(cache=True, nogil=True)
def alpha_bbox(alpha: np.ndarray, threshold: int) -> np.ndarray:
    h, w = alpha.shape
    res = np.zeros(5, dtype=np.int64)
    xmin, ymin = w, h
    xmax, ymax = -1, -1
    for i in range(h):
        for j in range(w):
            if alpha[i, j] > threshold:
                if j < xmin:
                    xmin = j
                if j > xmax:
                    xmax = j
                if i < ymin:
                    ymin = i
                if i > ymax:
                    ymax = i
    if xmax >= 0:
        res[0] = 1
        res[1], res[2] = xmin, ymin
        res[3], res[4] = xmax, ymax
    return res


@njit(cache=True, nogil=True)
def composite_over(ctx: np.ndarray, logo: np.ndarray, ox: int, oy: int) -> np.ndarray:
    out = ctx.copy()
    ch, cw = ctx.shape[:2]
    lh, lw = logo.shape[:2]
    x0 = max(ox, 0)
    y0 = max(oy, 0)
    x1 = min(ox + lw, cw)
    y1 = min(oy + lh, ch)
    for cy in range(y0, y1):
        ly = cy - oy
        for cx in range(x0, x1):
            lx = cx - ox
            a = np.int64(logo[ly, lx, 3])
            for c in range(3):
                l = np.int64(logo[ly, lx, c])
                b = np.int64(out[cy, cx, c])
                out[cy, cx, c] = np.uint8((2 * (l * a + b * (255 - a)) + 255) // 510)
    return out
