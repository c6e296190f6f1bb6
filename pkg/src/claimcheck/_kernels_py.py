"""Numpy fallback for the compiled kernels in _kernels.pyx.

Formulas mirror the Cython versions operation for operation so both
backends agree to float64 rounding; keep the two files in sync.
"""

from __future__ import annotations

import numpy as np


def warp_bilinear_rgb(src: np.ndarray, inv: np.ndarray, out_h: int,
                      out_w: int) -> np.ndarray:
    h, w = src.shape[0], src.shape[1]
    cols, rows = np.meshgrid(np.arange(out_w, dtype=np.float64),
                             np.arange(out_h, dtype=np.float64))
    sx = inv[0, 0] * cols + inv[0, 1] * rows + inv[0, 2]
    sy = inv[1, 0] * cols + inv[1, 1] * rows + inv[1, 2]
    np.clip(sx, 0.0, float(w - 1), out=sx)
    np.clip(sy, 0.0, float(h - 1), out=sy)
    x0 = sx.astype(np.int64)
    y0 = sy.astype(np.int64)
    np.minimum(x0, max(w - 2, 0), out=x0)
    np.minimum(y0, max(h - 2, 0), out=y0)
    x1 = x0 + 1 if w > 1 else x0
    y1 = y0 + 1 if h > 1 else y0
    fx = (sx - x0)[..., None]
    fy = (sy - y0)[..., None]
    p00 = src[y0, x0].astype(np.float64)
    p01 = src[y0, x1].astype(np.float64)
    p10 = src[y1, x0].astype(np.float64)
    p11 = src[y1, x1].astype(np.float64)
    return ((1 - fy) * ((1 - fx) * p00 + fx * p01)
            + fy * ((1 - fx) * p10 + fx * p11))


def gaussian_blur(img: np.ndarray, weights: np.ndarray) -> np.ndarray:
    h, w = img.shape
    k = weights.shape[0]
    radius = (k - 1) // 2

    padded = np.pad(img, ((0, 0), (radius, radius)), mode="edge")
    tmp = np.zeros((h, w), dtype=np.float64)
    for i in range(k):
        tmp += weights[i] * padded[:, i:i + w]

    padded = np.pad(tmp, ((radius, radius), (0, 0)), mode="edge")
    out = np.zeros((h, w), dtype=np.float64)
    for i in range(k):
        out += weights[i] * padded[i:i + h, :]
    return out


def triangle_mean(img: np.ndarray, ax: float, ay: float, bx: float,
                  by: float, cx: float, cy: float) -> tuple[float, int]:
    h, w = img.shape
    area2 = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    if area2 < 0:
        bx, by, cx, cy = cx, cy, bx, by
        area2 = -area2
    if area2 == 0:
        return 0.0, 0

    c0 = max(int(min(ax, bx, cx)), 0)
    r0 = max(int(min(ay, by, cy)), 0)
    c1 = min(int(max(ax, bx, cx)) + 1, w - 1)
    r1 = min(int(max(ay, by, cy)) + 1, h - 1)
    if c1 < c0 or r1 < r0:
        return 0.0, 0

    px, py = np.meshgrid(np.arange(c0, c1 + 1, dtype=np.float64),
                         np.arange(r0, r1 + 1, dtype=np.float64))
    e0 = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    e1 = (cx - bx) * (py - by) - (cy - by) * (px - bx)
    e2 = (ax - cx) * (py - cy) - (ay - cy) * (px - cx)
    mask = (e0 >= 0) & (e1 >= 0) & (e2 >= 0)
    patch = img[r0:r1 + 1, c0:c1 + 1]
    return float(patch[mask].sum()), int(mask.sum())


def block_mean(img: np.ndarray, bh: int, bw: int) -> np.ndarray:
    h, w = img.shape
    nh, nw = h // bh, w // bw
    return img.reshape(nh, bh, nw, bw).sum(axis=(1, 3)) / float(bh * bw)
