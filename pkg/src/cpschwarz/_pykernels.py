"""Pure-Python twin of ``_ckernels``; used when the extension is not built."""
import math

import numpy as np


def _project(px, py, pz, a, b, c):
    abx, aby, abz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    acx, acy, acz = c[0] - a[0], c[1] - a[1], c[2] - a[2]
    apx, apy, apz = px - a[0], py - a[1], pz - a[2]
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        return (a[0], a[1], a[2]), 1
    bpx, bpy, bpz = px - b[0], py - b[1], pz - b[2]
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return (b[0], b[1], b[2]), 2
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        return (a[0] + v * abx, a[1] + v * aby, a[2] + v * abz), 4
    cpx, cpy, cpz = px - c[0], py - c[1], pz - c[2]
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return (c[0], c[1], c[2]), 3
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        return (a[0] + w * acx, a[1] + w * acy, a[2] + w * acz), 6
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return (b[0] + w * (c[0] - b[0]),
                b[1] + w * (c[1] - b[1]),
                b[2] + w * (c[2] - b[2])), 5
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    return (a[0] + abx * v + acx * w,
            a[1] + aby * v + acy * w,
            a[2] + abz * v + acz * w), 0


def _box_dist2(px, py, pz, lo, hi):
    s = 0.0
    for q, l, h in ((px, lo[0], hi[0]), (py, lo[1], hi[1]), (pz, lo[2], hi[2])):
        if q < l:
            s += (l - q) ** 2
        elif q > h:
            s += (q - h) ** 2
    return s


def project_point_triangle(px, py, pz, a, b, c):
    return _project(px, py, pz, a, b, c)


def closest_points_mesh(points, verts, tris, lo, hi, left, right, start, count, order):
    verts = verts.tolist()
    tris = tris.tolist()
    lo = lo.tolist()
    hi = hi.tolist()
    left = left.tolist()
    right = right.tolist()
    start = start.tolist()
    count = count.tolist()
    order = order.tolist()
    n = len(points)
    cp = np.empty((n, 3))
    dist2 = np.empty(n)
    tri_out = np.empty(n, dtype=np.int64)
    feat_out = np.empty(n, dtype=np.int64)
    for i, (px, py, pz) in enumerate(points.tolist()):
        best = math.inf
        best_tri = -1
        best_feat = -1
        bestp = (math.nan,) * 3
        stack = [0]
        while stack:
            node = stack.pop()
            if _box_dist2(px, py, pz, lo[node], hi[node]) > best:
                continue
            if left[node] < 0:
                for k in range(start[node], start[node] + count[node]):
                    t = order[k]
                    ia, ib, ic = tris[t]
                    p, feat = _project(px, py, pz, verts[ia], verts[ib], verts[ic])
                    dd = (px - p[0]) ** 2 + (py - p[1]) ** 2 + (pz - p[2]) ** 2
                    if dd < best or (dd == best and t < best_tri):
                        best, best_tri, best_feat, bestp = dd, t, feat, p
            else:
                l, r = left[node], right[node]
                dl = _box_dist2(px, py, pz, lo[l], hi[l])
                dr = _box_dist2(px, py, pz, lo[r], hi[r])
                stack.extend((r, l) if dl <= dr else (l, r))
        cp[i] = bestp
        dist2[i] = best
        tri_out[i] = best_tri
        feat_out[i] = best_feat
    return cp, dist2, tri_out, feat_out
