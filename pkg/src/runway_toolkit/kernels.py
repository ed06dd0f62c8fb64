"""Hot raster kernels: numba-jitted loops with pure NumPy fallbacks.

Every kernel exists twice: a ``*_jit`` version compiled with ``numba.njit``
and a ``*_py`` version written in plain NumPy/Python. Both produce
bit-identical results. The jitted path is selected by default whenever numba
imports; set ``RUNWAY_TOOLKIT_PURE=1`` to force the fallback path (the
``benchmarks/benchmark_kernels.py`` script compares the two).

Conventions used throughout:
  * masks are 2-D uint8 (or bool) arrays indexed ``[row, col]``
  * polygon points are float64 ``(n, 2)`` arrays of ``(x, y)``, where the
    center of pixel ``(col, row)`` sits at continuous ``(col + 0.5, row + 0.5)``
"""

import os

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


def _env_pure() -> bool:
    return os.environ.get("RUNWAY_TOOLKIT_PURE", "").lower() in ("1", "true", "yes")


USE_NUMBA = NUMBA_AVAILABLE and not _env_pure()

_EPS = 1e-9

# 8-neighborhood in clockwise order (rows grow downward): W NW N NE E SE S SW
_DR = np.array([0, -1, -1, -1, 0, 1, 1, 1], dtype=np.int64)
_DC = np.array([-1, -1, 0, 1, 1, 1, 0, -1], dtype=np.int64)


# ---------------------------------------------------------------------------
# binary morphology (square structuring element, outside counts as background)
# ---------------------------------------------------------------------------

@njit(cache=True)
def erode_jit(src, size):
    h, w = src.shape
    r = size // 2
    tmp = np.zeros((h, w), dtype=np.uint8)
    out = np.zeros((h, w), dtype=np.uint8)
    for i in range(h):
        for j in range(r, w - r):
            ok = True
            for k in range(j - r, j + r + 1):
                if src[i, k] == 0:
                    ok = False
                    break
            if ok:
                tmp[i, j] = 1
    for j in range(w):
        for i in range(r, h - r):
            ok = True
            for k in range(i - r, i + r + 1):
                if tmp[k, j] == 0:
                    ok = False
                    break
            if ok:
                out[i, j] = 1
    return out


@njit(cache=True)
def dilate_jit(src, size):
    h, w = src.shape
    r = size // 2
    tmp = np.zeros((h, w), dtype=np.uint8)
    out = np.zeros((h, w), dtype=np.uint8)
    for i in range(h):
        for j in range(w):
            lo = j - r if j - r > 0 else 0
            hi = j + r if j + r < w - 1 else w - 1
            for k in range(lo, hi + 1):
                if src[i, k] != 0:
                    tmp[i, j] = 1
                    break
    for j in range(w):
        for i in range(h):
            lo = i - r if i - r > 0 else 0
            hi = i + r if i + r < h - 1 else h - 1
            for k in range(lo, hi + 1):
                if tmp[k, j] != 0:
                    out[i, j] = 1
                    break
    return out


def erode_py(src, size):
    h, w = src.shape
    r = size // 2
    run = np.cumsum(src.astype(np.int64), axis=1)
    run = np.concatenate([np.zeros((h, 1), dtype=np.int64), run], axis=1)
    tmp = np.zeros((h, w), dtype=np.uint8)
    if w - r > r:
        cols = np.arange(r, w - r)
        window = run[:, cols + r + 1] - run[:, cols - r]
        tmp[:, r:w - r] = (window == size).astype(np.uint8)
    run = np.cumsum(tmp.astype(np.int64), axis=0)
    run = np.concatenate([np.zeros((1, w), dtype=np.int64), run], axis=0)
    out = np.zeros((h, w), dtype=np.uint8)
    if h - r > r:
        rows = np.arange(r, h - r)
        window = run[rows + r + 1, :] - run[rows - r, :]
        out[r:h - r, :] = (window == size).astype(np.uint8)
    return out


def dilate_py(src, size):
    h, w = src.shape
    r = size // 2
    run = np.cumsum(src.astype(np.int64), axis=1)
    run = np.concatenate([np.zeros((h, 1), dtype=np.int64), run], axis=1)
    cols = np.arange(w)
    lo = np.clip(cols - r, 0, w)
    hi = np.clip(cols + r + 1, 0, w)
    tmp = ((run[:, hi] - run[:, lo]) > 0).astype(np.uint8)
    run = np.cumsum(tmp.astype(np.int64), axis=0)
    run = np.concatenate([np.zeros((1, w), dtype=np.int64), run], axis=0)
    rows = np.arange(h)
    lo = np.clip(rows - r, 0, h)
    hi = np.clip(rows + r + 1, 0, h)
    return ((run[hi, :] - run[lo, :]) > 0).astype(np.uint8)


# ---------------------------------------------------------------------------
# connected components (8-connectivity) and Suzuki-style border following
# ---------------------------------------------------------------------------

@njit(cache=True)
def label_jit(mask):
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int32)
    stack = np.empty(h * w, dtype=np.int64)
    nxt = 0
    for r in range(h):
        for c in range(w):
            if mask[r, c] == 0 or labels[r, c] != 0:
                continue
            nxt += 1
            sp = 0
            stack[sp] = r * w + c
            sp += 1
            labels[r, c] = nxt
            while sp > 0:
                sp -= 1
                idx = stack[sp]
                cr = idx // w
                cc = idx % w
                for d in range(8):
                    nr = cr + _DR[d]
                    nc = cc + _DC[d]
                    if nr < 0 or nr >= h or nc < 0 or nc >= w:
                        continue
                    if mask[nr, nc] != 0 and labels[nr, nc] == 0:
                        labels[nr, nc] = nxt
                        stack[sp] = nr * w + nc
                        sp += 1
    return labels, nxt


def label_py(mask):
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int32)
    fg = mask != 0
    nxt = 0
    remaining = fg & (labels == 0)
    while remaining.any():
        nxt += 1
        seed = np.argmax(remaining)  # first in raster order
        frontier = np.zeros((h, w), dtype=bool)
        frontier.flat[seed] = True
        comp = frontier.copy()
        while frontier.any():
            grown = np.zeros((h, w), dtype=bool)
            grown[:-1, :] |= frontier[1:, :]
            grown[1:, :] |= frontier[:-1, :]
            grown[:, :-1] |= frontier[:, 1:]
            grown[:, 1:] |= frontier[:, :-1]
            grown[:-1, :-1] |= frontier[1:, 1:]
            grown[:-1, 1:] |= frontier[1:, :-1]
            grown[1:, :-1] |= frontier[:-1, 1:]
            grown[1:, 1:] |= frontier[:-1, :-1]
            frontier = grown & fg & ~comp
            comp |= frontier
        labels[comp] = nxt
        remaining = fg & (labels == 0)
    return labels, nxt


@njit(cache=True)
def trace_jit(labels, lid, sr, sc):
    h, w = labels.shape
    cap = 0
    for r in range(h):
        for c in range(w):
            if labels[r, c] == lid:
                cap += 1
    path = np.empty((8 * cap + 8, 2), dtype=np.int64)
    path[0, 0] = sr
    path[0, 1] = sc
    n = 1
    # first neighbor, scanning clockwise starting from the west neighbor
    first = -1
    for d in range(8):
        r2 = sr + _DR[d]
        c2 = sc + _DC[d]
        if 0 <= r2 < h and 0 <= c2 < w and labels[r2, c2] == lid:
            first = d
            break
    if first < 0:
        return path[:1]
    fr = sr + _DR[first]
    fc = sc + _DC[first]
    pr, pc = fr, fc  # previously examined pixel (i2, j2)
    cr, cc = sr, sc  # current border pixel (i3, j3)
    while True:
        # direction index of (pr, pc) around (cr, cc)
        b = -1
        for d in range(8):
            if cr + _DR[d] == pr and cc + _DC[d] == pc:
                b = d
                break
        nr, nc = -1, -1
        for k in range(1, 9):
            d = (b - k) % 8  # counter-clockwise scan
            r4 = cr + _DR[d]
            c4 = cc + _DC[d]
            if 0 <= r4 < h and 0 <= c4 < w and labels[r4, c4] == lid:
                nr, nc = r4, c4
                break
        if nr == sr and nc == sc and cr == fr and cc == fc:
            break
        pr, pc = cr, cc
        cr, cc = nr, nc
        path[n, 0] = cr
        path[n, 1] = cc
        n += 1
    return path[:n].copy()


def trace_py(labels, lid, sr, sc):
    h, w = labels.shape

    def on(r, c):
        return 0 <= r < h and 0 <= c < w and labels[r, c] == lid

    path = [(sr, sc)]
    first = -1
    for d in range(8):
        if on(sr + _DR[d], sc + _DC[d]):
            first = d
            break
    if first < 0:
        return np.array(path, dtype=np.int64)
    fr, fc = sr + _DR[first], sc + _DC[first]
    pr, pc = fr, fc
    cr, cc = sr, sc
    while True:
        b = next(d for d in range(8) if (cr + _DR[d], cc + _DC[d]) == (pr, pc))
        nr = nc = -1
        for k in range(1, 9):
            d = (b - k) % 8
            if on(cr + _DR[d], cc + _DC[d]):
                nr, nc = cr + _DR[d], cc + _DC[d]
                break
        if (nr, nc) == (sr, sc) and (cr, cc) == (fr, fc):
            break
        pr, pc = cr, cc
        cr, cc = nr, nc
        path.append((cr, cc))
    return np.array(path, dtype=np.int64)


# ---------------------------------------------------------------------------
# scanline polygon fill (even-odd, pixel centers, on-edge centers included)
# ---------------------------------------------------------------------------

@njit(cache=True)
def fill_jit(xa, ya, xb, yb, x_off, y_off, width, height, out):
    ne = xa.shape[0]
    xs = np.empty(ne, dtype=np.float64)
    for j in range(height):
        yc = y_off + j + 0.5
        n = 0
        for e in range(ne):
            y1 = ya[e]
            y2 = yb[e]
            if y1 == y2:
                continue
            lo = y1 if y1 < y2 else y2
            hi = y2 if y1 < y2 else y1
            if lo <= yc < hi:
                t = (yc - y1) / (y2 - y1)
                xs[n] = xa[e] + t * (xb[e] - xa[e])
                n += 1
        if n == 0:
            continue
        sub = np.sort(xs[:n])
        for k in range(0, n - 1, 2):
            left = int(np.ceil(sub[k] - x_off - 0.5 - _EPS))
            right = int(np.floor(sub[k + 1] - x_off - 0.5 + _EPS))
            if left < 0:
                left = 0
            if right > width - 1:
                right = width - 1
            for i in range(left, right + 1):
                out[j, i] = 1
    # pixels whose center lies exactly on an edge are included by rule
    for e in range(ne):
        x1, y1 = xa[e], ya[e]
        x2, y2 = xb[e], yb[e]
        if y1 == y2:
            j = int(np.floor(y1 - y_off - 0.5 + 0.5))
            if abs(y1 - y_off - 0.5 - j) <= _EPS and 0 <= j < height:
                lo = x1 if x1 < x2 else x2
                hi = x2 if x1 < x2 else x1
                left = int(np.ceil(lo - x_off - 0.5 - _EPS))
                right = int(np.floor(hi - x_off - 0.5 + _EPS))
                if left < 0:
                    left = 0
                if right > width - 1:
                    right = width - 1
                for i in range(left, right + 1):
                    out[j, i] = 1
        else:
            lo = y1 if y1 < y2 else y2
            hi = y2 if y1 < y2 else y1
            j0 = int(np.ceil(lo - y_off - 0.5 - _EPS))
            j1 = int(np.floor(hi - y_off - 0.5 + _EPS))
            if j0 < 0:
                j0 = 0
            if j1 > height - 1:
                j1 = height - 1
            for j in range(j0, j1 + 1):
                yc = y_off + j + 0.5
                t = (yc - y1) / (y2 - y1)
                if t < -_EPS or t > 1.0 + _EPS:
                    continue
                x = x1 + t * (x2 - x1)
                fi = x - x_off - 0.5
                i = int(np.floor(fi + 0.5))
                if abs(fi - i) <= _EPS and 0 <= i < width:
                    out[j, i] = 1
    return out


def fill_py(xa, ya, xb, yb, x_off, y_off, width, height, out):
    for j in range(height):
        yc = y_off + j + 0.5
        lo = np.minimum(ya, yb)
        hi = np.maximum(ya, yb)
        sel = (ya != yb) & (lo <= yc) & (yc < hi)
        if sel.any():
            t = (yc - ya[sel]) / (yb[sel] - ya[sel])
            xs = np.sort(xa[sel] + t * (xb[sel] - xa[sel]))
            for k in range(0, len(xs) - 1, 2):
                left = max(0, int(np.ceil(xs[k] - x_off - 0.5 - _EPS)))
                right = min(width - 1, int(np.floor(xs[k + 1] - x_off - 0.5 + _EPS)))
                if left <= right:
                    out[j, left:right + 1] = 1
    for e in range(len(xa)):
        x1, y1, x2, y2 = xa[e], ya[e], xb[e], yb[e]
        if y1 == y2:
            j = int(np.floor(y1 - y_off - 0.5 + 0.5))
            if abs(y1 - y_off - 0.5 - j) <= _EPS and 0 <= j < height:
                left = max(0, int(np.ceil(min(x1, x2) - x_off - 0.5 - _EPS)))
                right = min(width - 1, int(np.floor(max(x1, x2) - x_off - 0.5 + _EPS)))
                if left <= right:
                    out[j, left:right + 1] = 1
        else:
            j0 = max(0, int(np.ceil(min(y1, y2) - y_off - 0.5 - _EPS)))
            j1 = min(height - 1, int(np.floor(max(y1, y2) - y_off - 0.5 + _EPS)))
            for j in range(j0, j1 + 1):
                yc = y_off + j + 0.5
                t = (yc - y1) / (y2 - y1)
                if t < -_EPS or t > 1.0 + _EPS:
                    continue
                x = x1 + t * (x2 - x1)
                fi = x - x_off - 0.5
                i = int(np.floor(fi + 0.5))
                if abs(fi - i) <= _EPS and 0 <= i < width:
                    out[j, i] = 1
    return out


# ---------------------------------------------------------------------------
# Douglas-Peucker keep flags (open polyline, endpoints kept, strict > tol)
# ---------------------------------------------------------------------------

@njit(cache=True)
def dp_jit(pts, tol):
    n = pts.shape[0]
    keep = np.zeros(n, dtype=np.bool_)
    keep[0] = True
    keep[n - 1] = True
    if n <= 2:
        return keep
    stack = np.empty((n, 2), dtype=np.int64)
    sp = 0
    stack[sp, 0] = 0
    stack[sp, 1] = n - 1
    sp += 1
    while sp > 0:
        sp -= 1
        a = stack[sp, 0]
        b = stack[sp, 1]
        if b - a < 2:
            continue
        ax, ay = pts[a, 0], pts[a, 1]
        bx, by = pts[b, 0], pts[b, 1]
        dx = bx - ax
        dy = by - ay
        seg = np.sqrt(dx * dx + dy * dy)
        dmax = tol
        idx = -1
        if seg < 1e-12:
            for i in range(a + 1, b):
                ex = pts[i, 0] - ax
                ey = pts[i, 1] - ay
                d = np.sqrt(ex * ex + ey * ey)
                if d > dmax:
                    dmax = d
                    idx = i
        else:
            for i in range(a + 1, b):
                d = abs(dx * (ay - pts[i, 1]) - (ax - pts[i, 0]) * dy) / seg
                if d > dmax:
                    dmax = d
                    idx = i
        if idx >= 0:
            keep[idx] = True
            stack[sp, 0] = a
            stack[sp, 1] = idx
            sp += 1
            stack[sp, 0] = idx
            stack[sp, 1] = b
            sp += 1
    return keep


def dp_py(pts, tol):
    n = pts.shape[0]
    keep = np.zeros(n, dtype=bool)
    keep[0] = True
    keep[n - 1] = True
    stack = [(0, n - 1)]
    while stack:
        a, b = stack.pop()
        if b - a < 2:
            continue
        ax, ay = pts[a]
        bx, by = pts[b]
        dx = bx - ax
        dy = by - ay
        seg = np.sqrt(dx * dx + dy * dy)
        mid = pts[a + 1:b]
        if seg < 1e-12:
            d = np.sqrt((mid[:, 0] - ax) ** 2 + (mid[:, 1] - ay) ** 2)
        else:
            d = np.abs(dx * (ay - mid[:, 1]) - (ax - mid[:, 0]) * dy) / seg
        pos = int(np.argmax(d))
        if d[pos] > tol:
            idx = a + 1 + pos
            keep[idx] = True
            stack.append((a, idx))
            stack.append((idx, b))
    return keep


# ---------------------------------------------------------------------------
# convex hull (monotone chain on lexicographically sorted points)
# ---------------------------------------------------------------------------

@njit(cache=True)
def hull_jit(pts):
    n = pts.shape[0]
    if n < 3:
        out = np.empty(n, dtype=np.int64)
        for i in range(n):
            out[i] = i
        return out
    hull = np.empty(2 * n, dtype=np.int64)
    k = 0
    for i in range(n):
        while k >= 2:
            ox = pts[hull[k - 1], 0] - pts[hull[k - 2], 0]
            oy = pts[hull[k - 1], 1] - pts[hull[k - 2], 1]
            px = pts[i, 0] - pts[hull[k - 2], 0]
            py = pts[i, 1] - pts[hull[k - 2], 1]
            if ox * py - oy * px <= 0:
                k -= 1
            else:
                break
        hull[k] = i
        k += 1
    lower = k + 1
    for i in range(n - 2, -1, -1):
        while k >= lower:
            ox = pts[hull[k - 1], 0] - pts[hull[k - 2], 0]
            oy = pts[hull[k - 1], 1] - pts[hull[k - 2], 1]
            px = pts[i, 0] - pts[hull[k - 2], 0]
            py = pts[i, 1] - pts[hull[k - 2], 1]
            if ox * py - oy * px <= 0:
                k -= 1
            else:
                break
        hull[k] = i
        k += 1
    return hull[:k - 1].copy()


def hull_py(pts):
    n = pts.shape[0]
    if n < 3:
        return np.arange(n, dtype=np.int64)

    def cross(o, a, b):
        return (pts[a, 0] - pts[o, 0]) * (pts[b, 1] - pts[o, 1]) - \
               (pts[a, 1] - pts[o, 1]) * (pts[b, 0] - pts[o, 0])

    hull = []
    for i in range(n):
        while len(hull) >= 2 and cross(hull[-2], hull[-1], i) <= 0:
            hull.pop()
        hull.append(i)
    lower = len(hull) + 1
    for i in range(n - 2, -1, -1):
        while len(hull) >= lower and cross(hull[-2], hull[-1], i) <= 0:
            hull.pop()
        hull.append(i)
    return np.array(hull[:-1], dtype=np.int64)


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

if USE_NUMBA:
    erode, dilate = erode_jit, dilate_jit
    label_components, trace_border = label_jit, trace_jit
    fill_polygon, dp_keep_flags, convex_hull = fill_jit, dp_jit, hull_jit
else:
    erode, dilate = erode_py, dilate_py
    label_components, trace_border = label_py, trace_py
    fill_polygon, dp_keep_flags, convex_hull = fill_py, dp_py, hull_py


def warm_up():
    """Trigger JIT compilation on tiny inputs so later timings are steady."""
    if not USE_NUMBA:
        return
    m = np.zeros((8, 8), dtype=np.uint8)
    m[2:6, 2:6] = 1
    erode(m, 3)
    dilate(m, 3)
    labels, _ = label_components(m)
    trace_border(labels, 1, 2, 2)
    poly = np.array([[1.0, 1.0], [6.0, 1.0], [6.0, 6.0], [1.0, 6.0]])
    out = np.zeros((8, 8), dtype=np.uint8)
    xa, ya = poly[:, 0], poly[:, 1]
    xb, yb = np.roll(xa, -1).copy(), np.roll(ya, -1).copy()
    fill_polygon(xa, ya, xb, yb, 0, 0, 8, 8, out)
    dp_keep_flags(poly, 0.5)
    order = np.lexsort((poly[:, 1], poly[:, 0]))
    convex_hull(np.ascontiguousarray(poly[order]))
