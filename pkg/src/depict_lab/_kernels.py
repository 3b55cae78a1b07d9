"""Compiled inner loops: shape placement, painting and component labelling.

Geometry rows are ``(a, b, c, e)`` int64 quadruples: ``(cx, cy, r, 0)`` for a
circle and ``(x1, y1, x2, y2)`` for a rectangle.  Shape kind codes are 0 for
circle and 1 for rectangle.
"""
from __future__ import annotations

import numba
import numpy as np

from .rng import next_float, next_int, next_normal, split_key

MAX_ATTEMPTS = 1000
MAX_RESTARTS = 50

# placement modes when a concept is present
FIXED = 1
MOVE = 2
FRESH = 3


@numba.njit(cache=True, nogil=True)
def _bbox(kind, g):
    if kind == 0:
        return g[0] - g[2], g[1] - g[2], g[0] + g[2], g[1] + g[2]
    return g[0], g[1], g[2], g[3]


@numba.njit(cache=True, nogil=True)
def _covers(kind, g, x, y):
    if kind == 0:
        dx = x - g[0]
        dy = y - g[1]
        return dx * dx + dy * dy <= g[2] * g[2]
    return g[0] <= x <= g[2] and g[1] <= y <= g[3]


@numba.njit(cache=True, nogil=True)
def in_bounds(kind, g, width, height):
    if kind == 0 and g[2] < 1:
        return False
    if kind == 1 and (g[2] < g[0] or g[3] < g[1]):
        return False
    x0, y0, x1, y1 = _bbox(kind, g)
    return x0 >= 0 and y0 >= 0 and x1 <= width - 1 and y1 <= height - 1


@numba.njit(cache=True, nogil=True)
def _covers_dilated(kind, g, x, y, gap):
    """Membership in the footprint grown by ``gap`` pixels in Chebyshev distance."""
    if kind == 0:
        dx = max(abs(x - g[0]) - gap, 0)
        dy = max(abs(y - g[1]) - gap, 0)
        return dx * dx + dy * dy <= g[2] * g[2]
    return g[0] - gap <= x <= g[2] + gap and g[1] - gap <= y <= g[3] + gap


@numba.njit(cache=True, nogil=True)
def conflict(kind_a, ga, kind_b, gb, gap):
    """True if the footprints intersect or come within Chebyshev distance ``gap``."""
    ax0, ay0, ax1, ay1 = _bbox(kind_a, ga)
    bx0, by0, bx1, by1 = _bbox(kind_b, gb)
    if ax0 > bx1 + gap or bx0 > ax1 + gap or ay0 > by1 + gap or by0 > ay1 + gap:
        return False
    if kind_a == 1 and kind_b == 1:
        return True
    if kind_a == 0 and kind_b == 1:
        # closest lattice point of the grown box to the centre
        px = min(max(ga[0], gb[0] - gap), gb[2] + gap)
        py = min(max(ga[1], gb[1] - gap), gb[3] + gap)
        return (px - ga[0]) ** 2 + (py - ga[1]) ** 2 <= ga[2] * ga[2]
    if kind_a == 1 and kind_b == 0:
        return conflict(kind_b, gb, kind_a, ga, gap)
    x_lo = max(ax0, bx0 - gap)
    x_hi = min(ax1, bx1 + gap)
    y_lo = max(ay0, by0 - gap)
    y_hi = min(ay1, by1 + gap)
    for y in range(y_lo, y_hi + 1):
        for x in range(x_lo, x_hi + 1):
            if _covers(kind_a, ga, x, y) and _covers_dilated(kind_b, gb, x, y, gap):
                return True
    return False


@numba.njit(cache=True, nogil=True)
def _sample_shape(state, kind, mode, g_in, g_out, width, height, rmin, rmax, smin, smax):
    """Propose one placement; False when the canvas cannot hold the size drawn."""
    if kind == 0:
        r = g_in[2] if mode == MOVE else next_int(state, rmin, rmax)
        if width - 1 - r < r or height - 1 - r < r:
            return False
        g_out[0] = next_int(state, r, width - 1 - r)
        g_out[1] = next_int(state, r, height - 1 - r)
        g_out[2] = r
        g_out[3] = 0
        return True
    if mode == MOVE:
        sw = g_in[2] - g_in[0] + 1
        sh = g_in[3] - g_in[1] + 1
    else:
        sw = next_int(state, smin, smax)
        sh = next_int(state, smin, smax)
    if sw > width or sh > height:
        return False
    x1 = next_int(state, 0, width - sw)
    y1 = next_int(state, 0, height - sh)
    g_out[0] = x1
    g_out[1] = y1
    g_out[2] = x1 + sw - 1
    g_out[3] = y1 + sh - 1
    return True


@numba.njit(cache=True, nogil=True)
def place_row(state, kinds, modes, g_in, g_out, width, height, rmin, rmax, smin, smax, gap):
    """Rejection placement of one scene.

    ``modes[k]`` is 0 (absent), FIXED (copy ``g_in[k]``), MOVE (keep size, new
    position) or FRESH (new size and position).  Returns False after the
    restart budget is exhausted.
    """
    d = kinds.shape[0]
    placed = np.zeros(d, dtype=np.bool_)
    cand = np.zeros(4, dtype=np.int64)
    for _restart in range(MAX_RESTARTS):
        ok = True
        for k in range(d):
            placed[k] = False
            g_out[k, :] = 0
            if modes[k] == FIXED:
                g_out[k, :] = g_in[k, :]
                placed[k] = True
        for k in range(d):
            if modes[k] < MOVE:
                continue
            success = False
            for _attempt in range(MAX_ATTEMPTS):
                if not _sample_shape(state, kinds[k], modes[k], g_in[k], cand, width, height,
                                     rmin, rmax, smin, smax):
                    continue
                clash = False
                for q in range(d):
                    if placed[q] and conflict(kinds[k], cand, kinds[q], g_out[q], gap):
                        clash = True
                        break
                if not clash:
                    g_out[k, :] = cand
                    placed[k] = True
                    success = True
                    break
            if not success:
                ok = False
                break
        if ok:
            return True
    return False


@numba.njit(cache=True, nogil=True)
def _row_span(kind, g, y):
    """Inclusive x-range covered by a shape on row ``y`` (empty when lo > hi)."""
    if kind == 0:
        dy = y - g[1]
        rem = g[2] * g[2] - dy * dy
        if rem < 0:
            return 1, 0
        half = int(np.sqrt(rem))
        while (half + 1) * (half + 1) <= rem:
            half += 1
        while half * half > rem:
            half -= 1
        return g[0] - half, g[0] + half
    if g[1] <= y <= g[3]:
        return g[0], g[2]
    return 1, 0


@numba.njit(cache=True, nogil=True)
def paint(img, kinds, present, geom, colors, background):
    height, width = img.shape[0], img.shape[1]
    b0, b1, b2 = background[0], background[1], background[2]
    for y in range(height):
        for x in range(width):
            img[y, x, 0] = b0
            img[y, x, 1] = b1
            img[y, x, 2] = b2
    for k in range(kinds.shape[0]):
        if not present[k]:
            continue
        x0, y0, x1, y1 = _bbox(kinds[k], geom[k])
        c0, c1, c2 = colors[k, 0], colors[k, 1], colors[k, 2]
        for y in range(max(y0, 0), min(y1, height - 1) + 1):
            lo, hi = _row_span(kinds[k], geom[k], y)
            for x in range(max(lo, 0), min(hi, width - 1) + 1):
                img[y, x, 0] = c0
                img[y, x, 1] = c1
                img[y, x, 2] = c2


@numba.njit(cache=True, nogil=True)
def add_noise(state, img, sigma):
    height, width = img.shape[0], img.shape[1]
    for y in range(height):
        for x in range(width):
            for ch in range(3):
                v = np.rint(img[y, x, ch] + sigma * next_normal(state))
                if v < 0.0:
                    v = 0.0
                elif v > 255.0:
                    v = 255.0
                img[y, x, ch] = np.uint8(v)


@numba.njit(cache=True, nogil=True)
def corrupt_bits(state, bits, flip, couple_src, couple_dst, couple_rate):
    """Independent presence flips, then directed couplings ``dst := src``."""
    out = bits.copy()
    for k in range(bits.shape[0]):
        if flip[k] > 0.0 and next_float(state) < flip[k]:
            out[k] = 1 - out[k]
    for c in range(couple_src.shape[0]):
        if next_float(state) < couple_rate[c]:
            out[couple_dst[c]] = out[couple_src[c]]
    return out


@numba.njit(cache=True, nogil=True)
def generate_row(key, bits, present_modes, g_in, kinds, colors, background, flip, couple_src,
                 couple_dst, couple_rate, sigma, rmin, rmax, smin, smax, gap, img, g_out, present_out):
    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(key)
    d = kinds.shape[0]
    if couple_src.shape[0] > 0 or flip.max() > 0.0:
        b = corrupt_bits(state, bits, flip, couple_src, couple_dst, couple_rate)
    else:
        b = bits.copy()
    modes = np.zeros(d, dtype=np.int64)
    for k in range(d):
        if b[k]:
            modes[k] = present_modes[k]
            if bits[k] == 0:
                modes[k] = FRESH
        present_out[k] = b[k]
    if not place_row(state, kinds, modes, g_in, g_out, img.shape[1], img.shape[0],
                     rmin, rmax, smin, smax, gap):
        return False
    paint(img, kinds, present_out, g_out, colors, background)
    if sigma > 0.0:
        add_noise(state, img, sigma)
    return True


@numba.njit(cache=True, nogil=True)
def generate_batch(base_key, m, kinds, colors, background, flip, couple_src, couple_dst, couple_rate,
                   sigma, rmin, rmax, smin, smax, gap, images, geoms, present, ok):
    n, d = m.shape
    fresh = np.full(d, FRESH, dtype=np.int64)
    g_in = np.zeros((d, 4), dtype=np.int64)
    for i in range(n):
        key = split_key(base_key, i)
        ok[i] = generate_row(key, m[i], fresh, g_in, kinds, colors, background, flip, couple_src,
                             couple_dst, couple_rate, sigma, rmin, rmax, smin, smax, gap,
                             images[i], geoms[i], present[i])


# ---------------------------------------------------------------- analysis

@numba.njit(cache=True, nogil=True)
def quantize(img, refs, q):
    """Nearest reference colour per pixel into flat ``q``: -1 background, else palette index."""
    height, width = img.shape[0], img.shape[1]
    nref = refs.shape[0]
    r0, g0, b0 = np.uint8(refs[0, 0]), np.uint8(refs[0, 1]), np.uint8(refs[0, 2])
    p = 0
    for y in range(height):
        for x in range(width):
            px = img[y, x]
            if px[0] == r0 and px[1] == g0 and px[2] == b0:
                q[p] = -1
            else:
                best = 0
                best_d = np.int64(1) << 30
                for c in range(nref):
                    d0 = np.int64(px[0]) - refs[c, 0]
                    d1 = np.int64(px[1]) - refs[c, 1]
                    d2 = np.int64(px[2]) - refs[c, 2]
                    dist = d0 * d0 + d1 * d1 + d2 * d2
                    if dist < best_d:
                        best_d = dist
                        best = c
                q[p] = best - 1
            p += 1


@numba.njit(cache=True, nogil=True)
def components(img, refs, q, labels, stack, color_counts, comp_color, comp_area, comp_box):
    """4-connected components of non-background pixels.

    ``q``, ``labels`` and ``stack`` are flat scratch buffers of H*W entries.
    Fills per-component dominant colour (palette index, lowest on ties),
    area and inclusive bounding box ``(x0, y0, x1, y1)``; returns the count.
    """
    quantize(img, refs, q)
    height, width = img.shape[0], img.shape[1]
    npx = height * width
    ncol = refs.shape[0] - 1
    for p in range(npx):
        labels[p] = -1
    n = 0
    for s in range(npx):
        if q[s] < 0 or labels[s] >= 0:
            continue
        for c in range(ncol):
            color_counts[c] = 0
        top = 0
        stack[0] = s
        labels[s] = n
        area = 0
        x0 = width
        y0 = height
        x1 = -1
        y1 = -1
        while top >= 0:
            p = stack[top]
            top -= 1
            y = p // width
            x = p - y * width
            area += 1
            color_counts[q[p]] += 1
            x0 = min(x0, x)
            x1 = max(x1, x)
            y0 = min(y0, y)
            y1 = max(y1, y)
            if x + 1 < width and q[p + 1] >= 0 and labels[p + 1] < 0:
                labels[p + 1] = n
                top += 1
                stack[top] = p + 1
            if x > 0 and q[p - 1] >= 0 and labels[p - 1] < 0:
                labels[p - 1] = n
                top += 1
                stack[top] = p - 1
            if y + 1 < height and q[p + width] >= 0 and labels[p + width] < 0:
                labels[p + width] = n
                top += 1
                stack[top] = p + width
            if y > 0 and q[p - width] >= 0 and labels[p - width] < 0:
                labels[p - width] = n
                top += 1
                stack[top] = p - width
        dom = 0
        for c in range(1, ncol):
            if color_counts[c] > color_counts[dom]:
                dom = c
        comp_color[n] = dom
        comp_area[n] = area
        comp_box[n, 0] = x0
        comp_box[n, 1] = y0
        comp_box[n, 2] = x1
        comp_box[n, 3] = y1
        n += 1
    return n


@numba.njit(cache=True, nogil=True)
def summarize_image(img, refs, min_area, round_below, q, labels, stack, counts, comp_color,
                    comp_area, comp_box, out):
    """Per palette colour: [pixel fraction, #round comps, #boxy comps, max area fraction]."""
    n = components(img, refs, q, labels, stack, counts, comp_color, comp_area, comp_box)
    ncol = refs.shape[0] - 1
    total = float(q.shape[0])
    out[:, :] = 0.0
    for p in range(q.shape[0]):
        if q[p] >= 0:
            out[q[p], 0] += 1.0
    for c in range(ncol):
        out[c, 0] /= total
    for k in range(n):
        if comp_area[k] < min_area:
            continue
        c = comp_color[k]
        box_area = (comp_box[k, 2] - comp_box[k, 0] + 1) * (comp_box[k, 3] - comp_box[k, 1] + 1)
        if comp_area[k] / box_area < round_below:
            out[c, 1] += 1.0
        else:
            out[c, 2] += 1.0
        out[c, 3] = max(out[c, 3], comp_area[k] / total)


@numba.njit(cache=True, nogil=True)
def summarize_batch(images, refs, min_area, round_below, out):
    nimg, height, width = images.shape[0], images.shape[1], images.shape[2]
    npx = height * width
    ncol = refs.shape[0] - 1
    q = np.empty(npx, dtype=np.int64)
    labels = np.empty(npx, dtype=np.int64)
    stack = np.empty(npx + 1, dtype=np.int64)
    counts = np.zeros(ncol, dtype=np.int64)
    comp_color = np.empty(npx, dtype=np.int64)
    comp_area = np.empty(npx, dtype=np.int64)
    comp_box = np.empty((npx, 4), dtype=np.int64)
    for i in range(nimg):
        summarize_image(images[i], refs, min_area, round_below, q, labels, stack, counts,
                        comp_color, comp_area, comp_box, out[i])


@numba.njit(cache=True, nogil=True)
def hash_image(img, salt):
    """64-bit content hash; drives the deterministic noise of a noisy classifier."""
    flat = img.ravel()
    h = np.uint64(salt) ^ np.uint64(0x84222325CBF29CE4)
    for i in range(flat.shape[0]):
        h = (h ^ np.uint64(flat[i])) * np.uint64(0x100000001B3)
    return split_key(h, 0)
