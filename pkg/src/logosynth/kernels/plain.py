"""Pure-numpy pixel kernels.

Fallback path for environments without numba, and the reference the jit
kernels are checked against: both backends must produce byte-identical
output. All 8-bit quantization is round-half-up, floor(x + 0.5).
"""
from __future__ import annotations

import numpy as np


def colour_transform(rgba: np.ndarray, r: float, black_sub: int) -> np.ndarray:
    out = rgba.copy()
    visible = rgba[:, :, 3] > 0
    rgb = out[:, :, :3]
    black = visible & (rgb == 0).all(axis=2)
    rgb[black] = black_sub
    scaled = np.floor(rgb[visible].astype(np.float64) * r + 0.5)
    rgb[visible] = np.clip(scaled, 0.0, 255.0).astype(np.uint8)
    return out


def _sample_grid(inv: np.ndarray, out_w: int, out_h: int):
    """Inverse-map every output pixel center; returns (x, y, valid_w)."""
    gx, gy = np.meshgrid(
        np.arange(out_w, dtype=np.float64) + 0.5,
        np.arange(out_h, dtype=np.float64) + 0.5,
    )
    x = inv[0, 0] * gx + inv[0, 1] * gy + inv[0, 2]
    y = inv[1, 0] * gx + inv[1, 1] * gy + inv[1, 2]
    w = inv[2, 0] * gx + inv[2, 1] * gy + inv[2, 2]
    valid = w > 1e-9
    wsafe = np.where(valid, w, 1.0)
    return x / wsafe, y / wsafe, valid


def warp_nearest(src: np.ndarray, inv: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    h, w = src.shape[:2]
    x, y, valid = _sample_grid(inv, out_w, out_h)
    kx = np.floor(x).astype(np.int64)
    ky = np.floor(y).astype(np.int64)
    inside = valid & (kx >= 0) & (kx < w) & (ky >= 0) & (ky < h)
    out = np.zeros((out_h, out_w, 4), dtype=np.uint8)
    out[inside] = src[ky[inside], kx[inside]]
    return out


def warp_bilinear(src: np.ndarray, inv: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    h, w = src.shape[:2]
    x, y, valid = _sample_grid(inv, out_w, out_h)
    u = x - 0.5
    v = y - 0.5
    k0 = np.floor(u).astype(np.int64)
    l0 = np.floor(v).astype(np.int64)
    fu = u - k0
    fv = v - l0

    alpha = src[:, :, 3].astype(np.float64) / 255.0
    # Premultiplied channels so transparent neighbors never bleed colour.
    pre = src[:, :, :3].astype(np.float64) * alpha[:, :, None]

    acc_a = np.zeros((out_h, out_w), dtype=np.float64)
    acc_c = np.zeros((out_h, out_w, 3), dtype=np.float64)
    for dk, dl, wt in (
        (0, 0, (1.0 - fu) * (1.0 - fv)),
        (1, 0, fu * (1.0 - fv)),
        (0, 1, (1.0 - fu) * fv),
        (1, 1, fu * fv),
    ):
        kk = k0 + dk
        ll = l0 + dl
        ok = (kk >= 0) & (kk < w) & (ll >= 0) & (ll < h)
        kc = np.clip(kk, 0, w - 1)
        lc = np.clip(ll, 0, h - 1)
        contrib = np.where(ok, wt, 0.0)
        acc_a += contrib * alpha[lc, kc]
        acc_c += (contrib * np.where(ok, 1.0, 0.0))[:, :, None] * pre[lc, kc]

    acc_a = np.where(valid, acc_a, 0.0)
    out = np.zeros((out_h, out_w, 4), dtype=np.uint8)
    a8 = np.floor(acc_a * 255.0 + 0.5)
    lit = a8 >= 1.0
    out[:, :, 3] = np.where(lit, np.minimum(a8, 255.0), 0.0).astype(np.uint8)
    asafe = np.where(acc_a > 0.0, acc_a, 1.0)
    chans = np.floor(acc_c / asafe[:, :, None] + 0.5)
    out[:, :, :3] = np.where(
        lit[:, :, None], np.clip(chans, 0.0, 255.0), 0.0
    ).astype(np.uint8)
    # Exact center hits copy the source pixel verbatim (weight-1 sample);
    # keeps identity and integer-translation warps byte-identical.
    exact = valid & (fu == 0.0) & (fv == 0.0) & (k0 >= 0) & (k0 < w) & (l0 >= 0) & (l0 < h)
    out[exact] = src[l0[exact], k0[exact]]
    return out


def alpha_bbox(alpha: np.ndarray, threshold: int) -> np.ndarray:
    """(found, xmin, ymin, xmax, ymax) of pixels with alpha > threshold."""
    mask = alpha > threshold
    cols = mask.any(axis=0)
    rows = mask.any(axis=1)
    res = np.zeros(5, dtype=np.int64)
    if not cols.any():
        return res
    xs = np.flatnonzero(cols)
    ys = np.flatnonzero(rows)
    res[0] = 1
    res[1], res[2] = xs[0], ys[0]
    res[3], res[4] = xs[-1], ys[-1]
    return res


def composite_over(ctx: np.ndarray, logo: np.ndarray, ox: int, oy: int) -> np.ndarray:
    """Source-over blend of an RGBA logo onto an RGB context at (ox, oy).

    Integer arithmetic: out = (2*(l*a + c*(255-a)) + 255) // 510, which is
    round-half-up of (l*a + c*(255-a)) / 255. Regions of the logo raster
    falling outside the context are clipped.
    """
    out = ctx.copy()
    ch, cw = ctx.shape[:2]
    lh, lw = logo.shape[:2]
    x0, y0 = max(ox, 0), max(oy, 0)
    x1, y1 = min(ox + lw, cw), min(oy + lh, ch)
    if x0 >= x1 or y0 >= y1:
        return out
    patch = logo[y0 - oy : y1 - oy, x0 - ox : x1 - ox].astype(np.int32)
    base = out[y0:y1, x0:x1].astype(np.int32)
    a = patch[:, :, 3:4]
    blended = (2 * (patch[:, :, :3] * a + base * (255 - a)) + 255) // 510
    out[y0:y1, x0:x1] = blended.astype(np.uint8)
    return out
