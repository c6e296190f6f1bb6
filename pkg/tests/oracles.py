"""Independent brute-force oracles.

Everything here deliberately avoids the implementation's code paths:
per-pixel loops instead of kernels, direct 2-D convolution instead of
separable passes, barycentric membership instead of edge functions,
pairwise rank counting instead of argsort ranking.
"""

from __future__ import annotations

import math

import numpy as np


def brightness_oracle(luma: np.ndarray) -> float:
    total = 0.0
    h, w = luma.shape
    for r in range(h):
        row = luma[r]
        for c in range(w):
            total += row[c]
    return total / (h * w)


def exposure_oracle(luma: np.ndarray, lo: float = 0.10,
                    hi: float = 0.90) -> float:
    count = 0
    h, w = luma.shape
    for r in range(h):
        row = luma[r]
        for c in range(w):
            if lo <= row[c] <= hi:
                count += 1
    return count / (h * w)


def contrast_oracle(luma: np.ndarray, normalizer: float = 0.5) -> float:
    h, w = luma.shape
    n = h * w
    mean = 0.0
    for r in range(h):
        row = luma[r]
        for c in range(w):
            mean += row[c]
    mean /= n
    ss = 0.0
    for r in range(h):
        row = luma[r]
        for c in range(w):
            ss += (row[c] - mean) ** 2
    return min(1.0, math.sqrt(ss / n) / normalizer)


def _barycentric_mask(h: int, w: int, tri: np.ndarray) -> np.ndarray:
    """Membership via barycentric coordinates solved from the vertex
    matrix (non-strict boundaries)."""
    a, b, c = tri
    m = np.array([[b[0] - a[0], c[0] - a[0]],
                  [b[1] - a[1], c[1] - a[1]]], dtype=np.float64)
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    if det == 0:
        return np.zeros((h, w), dtype=bool)
    inv = np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / det
    xs, ys = np.meshgrid(np.arange(w, dtype=np.float64),
                         np.arange(h, dtype=np.float64))
    px = xs - a[0]
    py = ys - a[1]
    u = inv[0, 0] * px + inv[0, 1] * py
    v = inv[1, 0] * px + inv[1, 1] * py
    return (u >= 0) & (v >= 0) & (u + v <= 1)


_TRIANGLES = ((0, 1, 2), (0, 2, 3), (1, 2, 4), (3, 4, 2))


def face_luminance_oracle(luma: np.ndarray, landmarks: np.ndarray) -> float:
    h, w = luma.shape
    means = []
    for idx in _TRIANGLES:
        mask = _barycentric_mask(h, w, landmarks[list(idx)])
        means.append(luma[mask].mean())
    return float(np.mean(means))


def sharpness_oracle(luma: np.ndarray, sigma: float = 2.0, radius: int = 6,
                     normalizer: float = 0.05) -> float:
    ks = np.arange(-radius, radius + 1, dtype=np.float64)
    w1 = np.exp(-(ks ** 2) / (2.0 * sigma * sigma))
    w1 /= w1.sum()
    kernel2d = np.outer(w1, w1)
    padded = np.pad(luma, radius, mode="edge")
    h, w = luma.shape
    blurred = np.zeros_like(luma)
    for dy in range(2 * radius + 1):
        for dx in range(2 * radius + 1):
            blurred += kernel2d[dy, dx] * padded[dy:dy + h, dx:dx + w]
    return min(1.0, float(np.abs(luma - blurred).mean()) / normalizer)


def pairwise_cosine_oracle(vectors: list[np.ndarray]) -> np.ndarray:
    n = len(vectors)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(vectors[i].shape[0]):
                acc += vectors[i][k] * vectors[j][k]
            out[i, j] = acc
    return out


def overlap_oracle(d1, d2, bins: int = 50, lo: float = -1.0,
                   hi: float = 1.0) -> float:
    width = (hi - lo) / bins

    def masses(sample):
        counts = [0] * bins
        for x in sample:
            x = min(max(x, lo), hi)
            idx = int((x - lo) / width)
            if idx >= bins:
                idx = bins - 1
            counts[idx] += 1
        return [c / len(sample) for c in counts]

    m1, m2 = masses(d1), masses(d2)
    return sum(min(a, b) for a, b in zip(m1, m2))


def d_prime_oracle(d1, d2) -> float:
    def moments(sample):
        n = len(sample)
        mean = sum(sample) / n
        var = sum((x - mean) ** 2 for x in sample) / n
        return mean, var

    m1, v1 = moments(list(d1))
    m2, v2 = moments(list(d2))
    return abs(m1 - m2) / math.sqrt((v1 + v2) / 2.0)


def ranks_oracle(values) -> list[float]:
    """Average ranks by pairwise counting (1-based)."""
    values = list(values)
    out = []
    for x in values:
        less = sum(1 for y in values if y < x)
        equal = sum(1 for y in values if y == x)
        out.append(less + (equal - 1) / 2.0 + 1.0)
    return out


def spearman_oracle(x, y) -> float:
    rx = ranks_oracle(x)
    ry = ranks_oracle(y)
    n = len(rx)
    mx = sum(rx) / n
    my = sum(ry) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry)) / n
    vx = sum((a - mx) ** 2 for a in rx) / n
    vy = sum((b - my) ** 2 for b in ry) / n
    return cov / math.sqrt(vx * vy)
