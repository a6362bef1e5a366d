# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled ray-cast kernel.

Mirrors `raycast_np.raycast` expression for expression; the two backends
must stay bit-identical (the build disables FP contraction for this reason).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, fabs, sqrt

cnp.import_array()

cdef double T_EPS = 1e-9
cdef double D_EPS = 1e-12


cdef inline void box_interval(double* o, double* d, double* lo, double* hi, double* out) noexcept nogil:
    cdef double t0 = -INFINITY
    cdef double t1 = INFINITY
    cdef double sign = 0.0
    cdef int axis = 0
    cdef int k
    cdef double inv, ta, tb, near, far
    for k in range(3):
        if fabs(d[k]) < D_EPS:
            if o[k] >= lo[k] and o[k] <= hi[k]:
                near = -INFINITY
                far = INFINITY
            else:
                near = INFINITY
                far = -INFINITY
        else:
            inv = 1.0 / d[k]
            ta = (lo[k] - o[k]) * inv
            tb = (hi[k] - o[k]) * inv
            if ta < tb:
                near = ta
                far = tb
            else:
                near = tb
                far = ta
        if near > t0:
            t0 = near
            axis = k
            sign = 1.0 if d[k] < 0.0 else -1.0
        if far < t1:
            t1 = far
    out[0] = t0
    out[1] = t1
    out[2] = sign
    out[3] = <double> axis


def raycast(eye, dirs, spheres, boxes, double wall_y, light_dir, double shadow_bias=1e-7):
    """See `raycast_np.raycast`; identical contract and identical results."""
    cdef cnp.ndarray[cnp.float64_t, ndim=3, mode="c"] dirs_c = np.ascontiguousarray(dirs, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] sph_c = np.ascontiguousarray(spheres, dtype=np.float64).reshape(-1, 4)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] box_c = np.ascontiguousarray(boxes, dtype=np.float64).reshape(-1, 6)

    cdef Py_ssize_t h = dirs_c.shape[0]
    cdef Py_ssize_t w = dirs_c.shape[1]
    cdef Py_ssize_t ns = sph_c.shape[0]
    cdef Py_ssize_t nb = box_c.shape[0]

    cdef double ex = float(eye[0])
    cdef double ey = float(eye[1])
    cdef double ez = float(eye[2])
    cdef double lx = float(light_dir[0])
    cdef double ly = float(light_dir[1])
    cdef double lz = float(light_dir[2])

    hit_id_arr = np.full((h, w), -1, dtype=np.int32)
    point_arr = np.zeros((h, w, 3), dtype=np.float64)
    normal_arr = np.zeros((h, w, 3), dtype=np.float64)
    vis_arr = np.zeros((h, w), dtype=np.float64)

    cdef cnp.int32_t[:, ::1] hit_id = hit_id_arr
    cdef double[:, :, ::1] point = point_arr
    cdef double[:, :, ::1] normal = normal_arr
    cdef double[:, ::1] vis = vis_arr
    cdef double[:, :, ::1] dv = dirs_c
    cdef double[:, ::1] sph = sph_c
    cdef double[:, ::1] box = box_c

    cdef Py_ssize_t ii, jj, i, j
    cdef int best_id, occ, baxis
    cdef double dxx, dyy, dzz, best_t, t, bsign
    cdef double cx, cy, cz, r, ocx, ocy, ocz, b, c, disc, s, far
    cdef double tu, px, py, pz, nx, ny, nz, qx, qy, qz
    cdef double o3[3]
    cdef double d3[3]
    cdef double lo3[3]
    cdef double hi3[3]
    cdef double iv[4]

    with nogil:
        for ii in range(h):
            for jj in range(w):
                dxx = dv[ii, jj, 0]
                dyy = dv[ii, jj, 1]
                dzz = dv[ii, jj, 2]
                best_t = INFINITY
                best_id = -1
                baxis = 0
                bsign = 0.0

                if dzz < -D_EPS:
                    t = -ez / dzz
                    if t > T_EPS and t < best_t:
                        best_t = t
                        best_id = 0
                if dyy > D_EPS:
                    t = (wall_y - ey) / dyy
                    if t > T_EPS and t < best_t:
                        best_t = t
                        best_id = 1
                for i in range(ns):
                    cx = sph[i, 0]
                    cy = sph[i, 1]
                    cz = sph[i, 2]
                    r = sph[i, 3]
                    ocx = ex - cx
                    ocy = ey - cy
                    ocz = ez - cz
                    b = ocx * dxx + ocy * dyy + ocz * dzz
                    c = ocx * ocx + ocy * ocy + ocz * ocz - r * r
                    disc = b * b - c
                    if disc > 0.0:
                        s = sqrt(disc)
                        t = -b - s
                        if t > T_EPS and t < best_t:
                            best_t = t
                            best_id = <int> (2 + i)
                for j in range(nb):
                    o3[0] = ex
                    o3[1] = ey
                    o3[2] = ez
                    d3[0] = dxx
                    d3[1] = dyy
                    d3[2] = dzz
                    lo3[0] = box[j, 0]
                    lo3[1] = box[j, 1]
                    lo3[2] = box[j, 2]
                    hi3[0] = box[j, 3]
                    hi3[1] = box[j, 4]
                    hi3[2] = box[j, 5]
                    box_interval(o3, d3, lo3, hi3, iv)
                    if iv[0] <= iv[1] and iv[0] > T_EPS and iv[0] < best_t:
                        best_t = iv[0]
                        best_id = <int> (2 + ns + j)
                        baxis = <int> iv[3]
                        bsign = iv[2]

                tu = best_t if best_id >= 0 else 0.0
                px = ex + tu * dxx
                py = ey + tu * dyy
                pz = ez + tu * dzz

                nx = 0.0
                ny = 0.0
                nz = 0.0
                if best_id == 0:
                    nz = 1.0
                elif best_id == 1:
                    ny = -1.0
                elif best_id >= 2 and best_id < 2 + ns:
                    cx = sph[best_id - 2, 0]
                    cy = sph[best_id - 2, 1]
                    cz = sph[best_id - 2, 2]
                    r = sph[best_id - 2, 3]
                    nx = (px - cx) / r
                    ny = (py - cy) / r
                    nz = (pz - cz) / r
                elif best_id >= 2 + ns:
                    if baxis == 0:
                        nx = bsign
                    elif baxis == 1:
                        ny = bsign
                    else:
                        nz = bsign

                qx = px + shadow_bias * nx
                qy = py + shadow_bias * ny
                qz = pz + shadow_bias * nz
                occ = 0
                for i in range(ns):
                    cx = sph[i, 0]
                    cy = sph[i, 1]
                    cz = sph[i, 2]
                    r = sph[i, 3]
                    ocx = qx - cx
                    ocy = qy - cy
                    ocz = qz - cz
                    b = ocx * lx + ocy * ly + ocz * lz
                    c = ocx * ocx + ocy * ocy + ocz * ocz - r * r
                    disc = b * b - c
                    if disc > 0.0:
                        s = sqrt(disc)
                        far = -b + s
                        if far > T_EPS:
                            occ = 1
                for j in range(nb):
                    o3[0] = qx
                    o3[1] = qy
                    o3[2] = qz
                    d3[0] = lx
                    d3[1] = ly
                    d3[2] = lz
                    lo3[0] = box[j, 0]
                    lo3[1] = box[j, 1]
                    lo3[2] = box[j, 2]
                    hi3[0] = box[j, 3]
                    hi3[1] = box[j, 4]
                    hi3[2] = box[j, 5]
                    box_interval(o3, d3, lo3, hi3, iv)
                    if iv[0] <= iv[1] and iv[1] > T_EPS:
                        occ = 1

                hit_id[ii, jj] = best_id
                point[ii, jj, 0] = px
                point[ii, jj, 1] = py
                point[ii, jj, 2] = pz
                normal[ii, jj, 0] = nx
                normal[ii, jj, 1] = ny
                normal[ii, jj, 2] = nz
                vis[ii, jj] = 0.0 if occ else 1.0

    return hit_id_arr, point_arr, normal_arr, vis_arr
