# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-pixel kernels: bilinear warp, separable gaussian blur,
triangle rasterization, block-mean downsample.

The numpy fallback in _kernels_py mirrors these formulas operation for
operation; keep the two files in sync.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def warp_bilinear_rgb(const cnp.uint8_t[:, :, ::1] src, double[:, ::1] inv,
                      int out_h, int out_w):
    """Inverse-map warp with bilinear sampling and clamp-to-edge.

    ``inv`` is the 2x3 output->source affine map; sample point for output
    pixel (r, c) is (sx, sy) = inv @ (c, r, 1). Returns float64 HxWx3.
    """
    cdef int h = src.shape[0]
    cdef int w = src.shape[1]
    cdef double a = inv[0, 0], b = inv[0, 1], tx = inv[0, 2]
    cdef double c_ = inv[1, 0], d = inv[1, 1], ty = inv[1, 2]
    out = np.empty((out_h, out_w, 3), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    cdef int r, c, ch, x0, y0, x1, y1
    cdef double sx, sy, fx, fy, p00, p01, p10, p11

    for r in range(out_h):
        for c in range(out_w):
            sx = a * c + b * r + tx
            sy = c_ * c + d * r + ty
            if sx < 0:
                sx = 0
            elif sx > w - 1:
                sx = w - 1
            if sy < 0:
                sy = 0
            elif sy > h - 1:
                sy = h - 1
            x0 = <int>sx
            y0 = <int>sy
            if x0 > w - 2:
                x0 = w - 2 if w > 1 else 0
            if y0 > h - 2:
                y0 = h - 2 if h > 1 else 0
            x1 = x0 + 1 if w > 1 else x0
            y1 = y0 + 1 if h > 1 else y0
            fx = sx - x0
            fy = sy - y0
            for ch in range(3):
                p00 = src[y0, x0, ch]
                p01 = src[y0, x1, ch]
                p10 = src[y1, x0, ch]
                p11 = src[y1, x1, ch]
                o[r, c, ch] = ((1 - fy) * ((1 - fx) * p00 + fx * p01)
                               + fy * ((1 - fx) * p10 + fx * p11))
    return out


def gaussian_blur(const double[:, ::1] img, const double[::1] weights):
    """Separable convolution with clamp-to-edge padding.

    ``weights`` is the full normalized 1-D kernel (odd length).
    """
    cdef int h = img.shape[0]
    cdef int w = img.shape[1]
    cdef int k = weights.shape[0]
    cdef int radius = (k - 1) // 2
    tmp_arr = np.empty((h, w), dtype=np.float64)
    out_arr = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] tmp = tmp_arr
    cdef double[:, ::1] out = out_arr
    cdef int r, c, i, idx
    cdef double acc

    for r in range(h):
        for c in range(w):
            acc = 0.0
            for i in range(k):
                idx = c + i - radius
                if idx < 0:
                    idx = 0
                elif idx > w - 1:
                    idx = w - 1
                acc += weights[i] * img[r, idx]
            tmp[r, c] = acc
    for r in range(h):
        for c in range(w):
            acc = 0.0
            for i in range(k):
                idx = r + i - radius
                if idx < 0:
                    idx = 0
                elif idx > h - 1:
                    idx = h - 1
                acc += weights[i] * tmp[idx, c]
            out[r, c] = acc
    return out_arr


def triangle_mean(const double[:, ::1] img, double ax, double ay, double bx,
                  double by, double cx, double cy):
    """Sum and count of pixels whose centers fall inside triangle ABC.

    Pixel (r, c) has center (x=c, y=r). Edge test is non-strict, so
    centers exactly on an edge count as inside. Returns (sum, count).
    """
    cdef int h = img.shape[0]
    cdef int w = img.shape[1]
    cdef double area2 = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    cdef double swx, swy
    if area2 < 0:
        swx = bx; swy = by
        bx = cx; by = cy
        cx = swx; cy = swy
        area2 = -area2
    if area2 == 0:
        return 0.0, 0

    cdef double lo_x = min(ax, min(bx, cx))
    cdef double hi_x = max(ax, max(bx, cx))
    cdef double lo_y = min(ay, min(by, cy))
    cdef double hi_y = max(ay, max(by, cy))
    cdef int c0 = <int>lo_x
    cdef int r0 = <int>lo_y
    cdef int c1 = <int>hi_x + 1
    cdef int r1 = <int>hi_y + 1
    if c0 < 0: c0 = 0
    if r0 < 0: r0 = 0
    if c1 > w - 1: c1 = w - 1
    if r1 > h - 1: r1 = h - 1

    cdef double total = 0.0
    cdef long count = 0
    cdef int r, c
    cdef double px, py, e0, e1, e2
    for r in range(r0, r1 + 1):
        py = r
        for c in range(c0, c1 + 1):
            px = c
            e0 = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
            e1 = (cx - bx) * (py - by) - (cy - by) * (px - bx)
            e2 = (ax - cx) * (py - cy) - (ay - cy) * (px - cx)
            if e0 >= 0 and e1 >= 0 and e2 >= 0:
                total += img[r, c]
                count += 1
    return total, count


def block_mean(const double[:, ::1] img, int bh, int bw):
    """Means over non-overlapping bh x bw blocks; img dims must divide."""
    cdef int h = img.shape[0]
    cdef int w = img.shape[1]
    cdef int nh = h // bh
    cdef int nw = w // bw
    out_arr = np.empty((nh, nw), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef int br, bc, r, c
    cdef double acc
    for br in range(nh):
        for bc in range(nw):
            acc = 0.0
            for r in range(br * bh, (br + 1) * bh):
                for c in range(bc * bw, (bc + 1) * bw):
                    acc += img[r, c]
            out[br, bc] = acc / (bh * bw)
    return out_arr
