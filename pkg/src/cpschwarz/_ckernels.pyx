# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled closest-point kernels for triangle meshes.

Feature codes returned per query: 0 face interior, 1..3 vertex a/b/c,
4..6 edge ab/bc/ca.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()

DEF STACK_SIZE = 256


cdef inline double _dot(double x0, double x1, double x2,
                        double y0, double y1, double y2) noexcept nogil:
    return x0 * y0 + x1 * y1 + x2 * y2


cdef int _project(double px, double py, double pz,
                  double* a, double* b, double* c,
                  double* out) noexcept nogil:
    cdef double abx = b[0] - a[0], aby = b[1] - a[1], abz = b[2] - a[2]
    cdef double acx = c[0] - a[0], acy = c[1] - a[1], acz = c[2] - a[2]
    cdef double apx = px - a[0], apy = py - a[1], apz = pz - a[2]
    cdef double d1 = _dot(abx, aby, abz, apx, apy, apz)
    cdef double d2 = _dot(acx, acy, acz, apx, apy, apz)
    cdef double bpx, bpy, bpz, cpx, cpy, cpz
    cdef double d3, d4, d5, d6, va, vb, vc, v, w, denom
    if d1 <= 0.0 and d2 <= 0.0:
        out[0] = a[0]; out[1] = a[1]; out[2] = a[2]
        return 1
    bpx = px - b[0]; bpy = py - b[1]; bpz = pz - b[2]
    d3 = _dot(abx, aby, abz, bpx, bpy, bpz)
    d4 = _dot(acx, acy, acz, bpx, bpy, bpz)
    if d3 >= 0.0 and d4 <= d3:
        out[0] = b[0]; out[1] = b[1]; out[2] = b[2]
        return 2
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        out[0] = a[0] + v * abx; out[1] = a[1] + v * aby; out[2] = a[2] + v * abz
        return 4
    cpx = px - c[0]; cpy = py - c[1]; cpz = pz - c[2]
    d5 = _dot(abx, aby, abz, cpx, cpy, cpz)
    d6 = _dot(acx, acy, acz, cpx, cpy, cpz)
    if d6 >= 0.0 and d5 <= d6:
        out[0] = c[0]; out[1] = c[1]; out[2] = c[2]
        return 3
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        out[0] = a[0] + w * acx; out[1] = a[1] + w * acy; out[2] = a[2] + w * acz
        return 6
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        out[0] = b[0] + w * (c[0] - b[0])
        out[1] = b[1] + w * (c[1] - b[1])
        out[2] = b[2] + w * (c[2] - b[2])
        return 5
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    out[0] = a[0] + abx * v + acx * w
    out[1] = a[1] + aby * v + acy * w
    out[2] = a[2] + abz * v + acz * w
    return 0


cdef inline double _box_dist2(double px, double py, double pz,
                              double[:, ::1] lo, double[:, ::1] hi,
                              Py_ssize_t k) noexcept nogil:
    cdef double s = 0.0, t
    t = lo[k, 0] - px
    if t > 0.0:
        s += t * t
    else:
        t = px - hi[k, 0]
        if t > 0.0:
            s += t * t
    t = lo[k, 1] - py
    if t > 0.0:
        s += t * t
    else:
        t = py - hi[k, 1]
        if t > 0.0:
            s += t * t
    t = lo[k, 2] - pz
    if t > 0.0:
        s += t * t
    else:
        t = pz - hi[k, 2]
        if t > 0.0:
            s += t * t
    return s


def project_point_triangle(double px, double py, double pz,
                           double[::1] a, double[::1] b, double[::1] c):
    cdef double out[3]
    cdef int feature = _project(px, py, pz, &a[0], &b[0], &c[0], out)
    return (out[0], out[1], out[2]), feature


def closest_points_mesh(double[:, ::1] points,
                        double[:, ::1] verts,
                        cnp.int64_t[:, ::1] tris,
                        double[:, ::1] lo,
                        double[:, ::1] hi,
                        cnp.int64_t[::1] left,
                        cnp.int64_t[::1] right,
                        cnp.int64_t[::1] start,
                        cnp.int64_t[::1] count,
                        cnp.int64_t[::1] order):
    cdef Py_ssize_t n = points.shape[0]
    cp_arr = np.empty((n, 3), dtype=np.float64)
    d2_arr = np.empty(n, dtype=np.float64)
    tri_arr = np.empty(n, dtype=np.int64)
    feat_arr = np.empty(n, dtype=np.int64)
    cdef double[:, ::1] cp = cp_arr
    cdef double[::1] dist2 = d2_arr
    cdef cnp.int64_t[::1] tri_out = tri_arr
    cdef cnp.int64_t[::1] feat_out = feat_arr
    cdef Py_ssize_t stack[STACK_SIZE]
    cdef Py_ssize_t i, top, node, k, t, l, r, first, second
    cdef double px, py, pz, best, dl, dr, dx, dy, dz, dd
    cdef double tmp[3]
    cdef double bestp[3]
    cdef int feat, best_feat
    cdef Py_ssize_t best_tri
    with nogil:
        for i in range(n):
            px = points[i, 0]; py = points[i, 1]; pz = points[i, 2]
            best = INFINITY
            best_tri = -1
            best_feat = -1
            top = 0
            stack[top] = 0
            top = 1
            while top > 0:
                top -= 1
                node = stack[top]
                if _box_dist2(px, py, pz, lo, hi, node) > best:
                    continue
                if left[node] < 0:
                    for k in range(start[node], start[node] + count[node]):
                        t = order[k]
                        feat = _project(px, py, pz,
                                        &verts[tris[t, 0], 0],
                                        &verts[tris[t, 1], 0],
                                        &verts[tris[t, 2], 0], tmp)
                        dx = px - tmp[0]; dy = py - tmp[1]; dz = pz - tmp[2]
                        dd = dx * dx + dy * dy + dz * dz
                        if dd < best or (dd == best and t < best_tri):
                            best = dd
                            best_tri = t
                            best_feat = feat
                            bestp[0] = tmp[0]; bestp[1] = tmp[1]; bestp[2] = tmp[2]
                else:
                    l = left[node]
                    r = right[node]
                    dl = _box_dist2(px, py, pz, lo, hi, l)
                    dr = _box_dist2(px, py, pz, lo, hi, r)
                    # push the farther child first so the nearer one is popped next
                    if dl <= dr:
                        first = r; second = l
                    else:
                        first = l; second = r
                    if top + 2 > STACK_SIZE:
                        with gil:
                            raise RuntimeError("BVH deeper than traversal stack")
                    stack[top] = first
                    stack[top + 1] = second
                    top += 2
            cp[i, 0] = bestp[0]; cp[i, 1] = bestp[1]; cp[i, 2] = bestp[2]
            dist2[i] = best
            tri_out[i] = best_tri
            feat_out[i] = best_feat
    return cp_arr, d2_arr, tri_arr, feat_arr
