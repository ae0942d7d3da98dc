"""Compiled kernels for the quasi-static finger-closing simulation.

Coordinates are in the gripper frame: fingers span |x| <= half_finger and
their inner faces sit at y = +s and y = -s, closing toward y = 0. Bodies are
pushed out of fingers along the minimum translation and pairwise overlaps are
split evenly along the separating direction (Gauss-Seidel sweeps).
"""

import math

import numpy as np
from numba import njit

# result codes
MET = 0
JAMMED = 1


@njit(cache=True)
def _disc_rect(px, py, r, x0, x1, y0, y1):
    """Penetration depth and push direction of a disc against a box."""
    qx = min(max(px, x0), x1)
    qy = min(max(py, y0), y1)
    dx = px - qx
    dy = py - qy
    d2 = dx * dx + dy * dy
    if d2 > 0.0:
        d = math.sqrt(d2)
        if d >= r:
            return 0.0, 0.0, 0.0
        return r - d, dx / d, dy / d
    # center inside the box: leave through the nearest side
    best = px - x0
    nx, ny = -1.0, 0.0
    if x1 - px < best:
        best = x1 - px
        nx, ny = 1.0, 0.0
    if py - y0 < best:
        best = py - y0
        nx, ny = 0.0, -1.0
    if y1 - py < best:
        best = y1 - py
        nx, ny = 0.0, 1.0
    return best + r, nx, ny


@njit(cache=True)
def _resolve_discs(x, y, r, alive, hf, he, s, t, tol, max_iter):
    n = x.shape[0]
    for _ in range(max_iter):
        worst = 0.0
        for i in range(n):
            if not alive[i]:
                continue
            pen, nx, ny = _disc_rect(x[i], y[i], r[i], -hf, hf, s, s + t)
            if pen > 0.0:
                x[i] += nx * pen
                y[i] += ny * pen
                worst = max(worst, pen)
            pen, nx, ny = _disc_rect(x[i], y[i], r[i], -hf, hf, -s - t, -s)
            if pen > 0.0:
                x[i] += nx * pen
                y[i] += ny * pen
                worst = max(worst, pen)
        for i in range(n):
            if not alive[i]:
                continue
            for j in range(i + 1, n):
                if not alive[j]:
                    continue
                dx = x[j] - x[i]
                dy = y[j] - y[i]
                d = math.sqrt(dx * dx + dy * dy)
                pen = r[i] + r[j] - d
                if pen > 0.0:
                    if d > 1e-12:
                        ux, uy = dx / d, dy / d
                    else:
                        ux, uy = 0.0, 1.0
                    h = pen / 2.0
                    x[i] -= ux * h
                    y[i] -= uy * h
                    x[j] += ux * h
                    y[j] += uy * h
                    worst = max(worst, pen)
        for i in range(n):
            if alive[i] and abs(x[i]) > he:
                alive[i] = False
        if worst <= tol:
            return True
    return False


@njit(cache=True)
def _chain(adj):
    """Nodes lying on some simple path between node 0 and node 1."""
    m = adj.shape[0]
    on = np.zeros(m, dtype=np.bool_)
    path = np.zeros(m, dtype=np.int64)
    nxt = np.zeros(m, dtype=np.int64)
    inpath = np.zeros(m, dtype=np.bool_)
    depth = 0
    path[0] = 0
    inpath[0] = True
    while depth >= 0:
        u = path[depth]
        v = nxt[depth]
        if v >= m:
            inpath[u] = False
            depth -= 1
            continue
        nxt[depth] += 1
        if not adj[u, v] or inpath[v] or v == 0:
            continue
        if v == 1:
            for k in range(depth + 1):
                on[path[k]] = True
            on[1] = True
            continue
        depth += 1
        path[depth] = v
        nxt[depth] = 0
        inpath[v] = True
    return on


@njit(cache=True)
def close_discs(x, y, r, hf, he, s0, t, step, tol, max_iter):
    """Close the fingers on discs; ``x``/``y`` are updated in place.

    Returns (code, s, held) where ``held`` flags discs in the squeezed chain.
    """
    n = x.shape[0]
    alive = np.ones(n, dtype=np.bool_)
    for i in range(n):
        if abs(x[i]) > he:
            alive[i] = False
    held = np.zeros(n, dtype=np.bool_)
    s = s0
    code = MET
    if not _resolve_discs(x, y, r, alive, hf, he, s, t, tol, max_iter):
        code = JAMMED
    else:
        # skip the free travel before the first possible contact
        bound = 0.0
        for i in range(n):
            if alive[i] and abs(x[i]) < hf + r[i]:
                bound = max(bound, abs(y[i]) + r[i])
        if bound < s:
            s -= math.floor((s - bound) / step) * step
        xs = x.copy()
        ys = y.copy()
        al = alive.copy()
        while s > 0.0:
            s_new = max(s - step, 0.0)
            xs[:] = x
            ys[:] = y
            al[:] = alive
            if not _resolve_discs(x, y, r, alive, hf, he, s_new, t, tol, max_iter):
                x[:] = xs
                y[:] = ys
                alive[:] = al
                code = JAMMED
                break
            s = s_new
    if code == MET:
        return code, s, held
    ctol = step + tol
    m = n + 2
    adj = np.zeros((m, m), dtype=np.bool_)
    for i in range(n):
        if not alive[i]:
            continue
        for f in range(2):
            if f == 0:
                y0, y1 = s, s + t
            else:
                y0, y1 = -s - t, -s
            qx = min(max(x[i], -hf), hf)
            qy = min(max(y[i], y0), y1)
            if math.sqrt((x[i] - qx) ** 2 + (y[i] - qy) ** 2) <= r[i] + ctol:
                adj[f, i + 2] = True
                adj[i + 2, f] = True
        for j in range(i + 1, n):
            if alive[j] and math.sqrt((x[i] - x[j]) ** 2 + (y[i] - y[j]) ** 2) <= r[i] + r[j] + ctol:
                adj[i + 2, j + 2] = True
                adj[j + 2, i + 2] = True
    on = _chain(adj)
    for i in range(n):
        held[i] = on[i + 2]
    return code, s, held


@njit(cache=True)
def _sat_mtv(va, vb):
    """Separation (negative means overlap) and unit axis pointing from a to b."""
    best = -1e300
    bx, by = 0.0, 0.0
    for poly in range(2):
        v = va if poly == 0 else vb
        k = v.shape[0]
        for e in range(k):
            ex = v[(e + 1) % k, 0] - v[e, 0]
            ey = v[(e + 1) % k, 1] - v[e, 1]
            ln = math.sqrt(ex * ex + ey * ey)
            if ln < 1e-12:
                continue
            nx, ny = -ey / ln, ex / ln
            amin, amax = 1e300, -1e300
            for p in range(va.shape[0]):
                d = va[p, 0] * nx + va[p, 1] * ny
                amin = min(amin, d)
                amax = max(amax, d)
            bmin, bmax = 1e300, -1e300
            for p in range(vb.shape[0]):
                d = vb[p, 0] * nx + vb[p, 1] * ny
                bmin = min(bmin, d)
                bmax = max(bmax, d)
            g1 = bmin - amax
            g2 = amin - bmax
            if g1 >= g2:
                gap, sx, sy = g1, nx, ny
            else:
                gap, sx, sy = g2, -nx, -ny
            if gap > best:
                best = gap
                bx, by = sx, sy
    return best, bx, by


@njit(cache=True)
def _box(hf, y0, y1):
    b = np.empty((4, 2))
    b[0, 0], b[0, 1] = -hf, y0
    b[1, 0], b[1, 1] = hf, y0
    b[2, 0], b[2, 1] = hf, y1
    b[3, 0], b[3, 1] = -hf, y1
    return b


@njit(cache=True)
def _shift(v, dx, dy):
    for p in range(v.shape[0]):
        v[p, 0] += dx
        v[p, 1] += dy


@njit(cache=True)
def _resolve_polys(verts, cx, alive, hf, he, s, t, tol, max_iter):
    n = verts.shape[0]
    top = _box(hf, s, s + t)
    bot = _box(hf, -s - t, -s)
    for _ in range(max_iter):
        worst = 0.0
        for i in range(n):
            if not alive[i]:
                continue
            for f in range(2):
                gap, ux, uy = _sat_mtv(top if f == 0 else bot, verts[i])
                if gap < 0.0:
                    _shift(verts[i], -gap * ux, -gap * uy)
                    cx[i] += -gap * ux
                    worst = max(worst, -gap)
        for i in range(n):
            if not alive[i]:
                continue
            for j in range(i + 1, n):
                if not alive[j]:
                    continue
                gap, ux, uy = _sat_mtv(verts[i], verts[j])
                if gap < 0.0:
                    h = -gap / 2.0
                    _shift(verts[i], -ux * h, -uy * h)
                    _shift(verts[j], ux * h, uy * h)
                    cx[i] -= ux * h
                    cx[j] += ux * h
                    worst = max(worst, -gap)
        for i in range(n):
            if alive[i] and abs(cx[i]) > he:
                alive[i] = False
        if worst <= tol:
            return True
    return False


@njit(cache=True)
def close_polys(verts, cx, hf, he, s0, t, step, tol, max_iter):
    """Translation-only closing on convex polygons ``verts`` (n, k, 2)."""
    n = verts.shape[0]
    alive = np.ones(n, dtype=np.bool_)
    for i in range(n):
        if abs(cx[i]) > he:
            alive[i] = False
    held = np.zeros(n, dtype=np.bool_)
    s = s0
    code = MET
    if not _resolve_polys(verts, cx, alive, hf, he, s, t, tol, max_iter):
        code = JAMMED
    else:
        bound = 0.0
        for i in range(n):
            if not alive[i]:
                continue
            lo, hi, top = 1e300, -1e300, 0.0
            for p in range(verts.shape[1]):
                lo = min(lo, verts[i, p, 0])
                hi = max(hi, verts[i, p, 0])
                top = max(top, abs(verts[i, p, 1]))
            if lo < hf and hi > -hf:
                bound = max(bound, top)
        if bound < s:
            s -= math.floor((s - bound) / step) * step
        vs = verts.copy()
        cs = cx.copy()
        al = alive.copy()
        while s > 0.0:
            s_new = max(s - step, 0.0)
            vs[:] = verts
            cs[:] = cx
            al[:] = alive
            if not _resolve_polys(verts, cx, alive, hf, he, s_new, t, tol, max_iter):
                verts[:] = vs
                cx[:] = cs
                alive[:] = al
                code = JAMMED
                break
            s = s_new
    if code == MET:
        return code, s, held
    ctol = step + tol
    m = n + 2
    adj = np.zeros((m, m), dtype=np.bool_)
    top = _box(hf, s, s + t)
    bot = _box(hf, -s - t, -s)
    for i in range(n):
        if not alive[i]:
            continue
        for f in range(2):
            gap, _, _ = _sat_mtv(top if f == 0 else bot, verts[i])
            if gap <= ctol:
                adj[f, i + 2] = True
                adj[i + 2, f] = True
        for j in range(i + 1, n):
            if alive[j]:
                gap, _, _ = _sat_mtv(verts[i], verts[j])
                if gap <= ctol:
                    adj[i + 2, j + 2] = True
                    adj[j + 2, i + 2] = True
    on = _chain(adj)
    for i in range(n):
        held[i] = on[i + 2]
    return code, s, held


@njit(cache=True)
def count_batch(cx, cy, verts, lx, ly, hits, r, use_polys, hf, he, s0, t, step, tol, max_iter):
    """Held counts for many poses sharing one rotation.

    ``cx``/``cy``/``verts`` are object centers and outlines in the rotated
    frame, ``lx``/``ly`` the pose centers in that frame and ``hits`` the
    (P, n) table of objects touching each pose's gripping area.
    """
    p_count = lx.shape[0]
    n = cx.shape[0]
    out = np.zeros(p_count, dtype=np.int64)
    for p in range(p_count):
        m = 0
        for j in range(n):
            if hits[p, j]:
                m += 1
        if m == 0:
            continue
        sel = np.empty(m, dtype=np.int64)
        m = 0
        for j in range(n):
            if hits[p, j]:
                sel[m] = j
                m += 1
        if use_polys:
            v = np.empty((m, verts.shape[1], 2))
            xc = np.empty(m)
            for i in range(m):
                j = sel[i]
                xc[i] = cx[j] - lx[p]
                for q in range(verts.shape[1]):
                    v[i, q, 0] = verts[j, q, 0] - lx[p]
                    v[i, q, 1] = verts[j, q, 1] - ly[p]
            _, _, held = close_polys(v, xc, hf, he, s0, t, step, tol, max_iter)
        else:
            x = np.empty(m)
            y = np.empty(m)
            rr = np.empty(m)
            for i in range(m):
                j = sel[i]
                x[i] = cx[j] - lx[p]
                y[i] = cy[j] - ly[p]
                rr[i] = r
            _, _, held = close_discs(x, y, rr, hf, he, s0, t, step, tol, max_iter)
        out[p] = held.sum()
    return out
