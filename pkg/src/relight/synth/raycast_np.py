"""Vectorized numpy ray-cast kernel.

This is the fallback for the compiled extension in `_raycast.pyx`.  Both
kernels implement the same arithmetic with the same operation order so their
outputs agree bit for bit; any change here must be mirrored there.

Hit ids: 0 floor (z=0, normal +z), 1 back wall (y=wall_y, normal -y),
2+i for sphere i, 2+ns+j for box j, -1 for a miss.
"""

from __future__ import annotations

import numpy as np

T_EPS = 1e-9  # minimum ray parameter for a valid hit
D_EPS = 1e-12  # direction components below this count as parallel to a plane


def _box_interval(ox, oy, oz, dx, dy, dz, box):
    """Slab-method (t_enter, t_exit, axis, sign) for one box; array-friendly."""
    t0 = np.full(np.broadcast(ox, dx).shape, -np.inf)
    t1 = np.full(t0.shape, np.inf)
    axis = np.zeros(t0.shape, dtype=np.int8)
    sign = np.zeros(t0.shape)
    for k, (o, d) in enumerate(((ox, dx), (oy, dy), (oz, dz))):
        lo = box[k]
        hi = box[k + 3]
        o, d = np.broadcast_arrays(o, d)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / d
            ta = (lo - o) * inv
            tb = (hi - o) * inv
        near = np.minimum(ta, tb)
        far = np.maximum(ta, tb)
        parallel = np.abs(d) < D_EPS
        inside = (o >= lo) & (o <= hi)
        near = np.where(parallel, np.where(inside, -np.inf, np.inf), near)
        far = np.where(parallel, np.where(inside, np.inf, -np.inf), far)
        enter = near > t0
        axis = np.where(enter, np.int8(k), axis)
        sign = np.where(enter, np.where(d < 0.0, 1.0, -1.0), sign)
        t0 = np.where(enter, near, t0)
        t1 = np.minimum(t1, far)
    return t0, t1, axis, sign


def raycast(
    eye: np.ndarray,
    dirs: np.ndarray,
    spheres: np.ndarray,
    boxes: np.ndarray,
    wall_y: float,
    light_dir: np.ndarray,
    shadow_bias: float = 1e-7,
):
    """Primary visibility plus one hard shadow ray per pixel.

    Returns (hit_id int32 HxW, point HxWx3, normal HxWx3, visibility HxW).
    Planes receive shadows but do not cast them; only spheres and boxes
    occlude the shadow ray.
    """
    dirs = np.asarray(dirs, dtype=np.float64)
    h, w = dirs.shape[:2]
    ex, ey, ez = (float(v) for v in eye)
    dx, dy, dz = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    ns = len(spheres)

    best_t = np.full((h, w), np.inf)
    best_id = np.full((h, w), -1, dtype=np.int32)
    box_axis = np.zeros((h, w), dtype=np.int8)
    box_sign = np.zeros((h, w))

    with np.errstate(divide="ignore", invalid="ignore"):
        t = -ez / dz
    ok = (dz < -D_EPS) & (t > T_EPS) & (t < best_t)
    best_t = np.where(ok, t, best_t)
    best_id = np.where(ok, np.int32(0), best_id)

    with np.errstate(divide="ignore", invalid="ignore"):
        t = (wall_y - ey) / dy
    ok = (dy > D_EPS) & (t > T_EPS) & (t < best_t)
    best_t = np.where(ok, t, best_t)
    best_id = np.where(ok, np.int32(1), best_id)

    for i in range(ns):
        cx, cy, cz, r = (float(v) for v in spheres[i])
        ocx = ex - cx
        ocy = ey - cy
        ocz = ez - cz
        b = ocx * dx + ocy * dy + ocz * dz
        c = ocx * ocx + ocy * ocy + ocz * ocz - r * r
        disc = b * b - c
        s = np.sqrt(np.maximum(disc, 0.0))
        t = -b - s
        ok = (disc > 0.0) & (t > T_EPS) & (t < best_t)
        best_t = np.where(ok, t, best_t)
        best_id = np.where(ok, np.int32(2 + i), best_id)

    for j in range(len(boxes)):
        t0, t1, axis, sign = _box_interval(ex, ey, ez, dx, dy, dz, [float(v) for v in boxes[j]])
        ok = (t0 <= t1) & (t0 > T_EPS) & (t0 < best_t)
        best_t = np.where(ok, t0, best_t)
        best_id = np.where(ok, np.int32(2 + ns + j), best_id)
        box_axis = np.where(ok, axis, box_axis)
        box_sign = np.where(ok, sign, box_sign)

    tt = np.where(np.isfinite(best_t), best_t, 0.0)
    px = ex + tt * dx
    py = ey + tt * dy
    pz = ez + tt * dz
    point = np.stack([px, py, pz], axis=-1)

    normal = np.zeros((h, w, 3))
    normal[..., 2] = np.where(best_id == 0, 1.0, normal[..., 2])
    normal[..., 1] = np.where(best_id == 1, -1.0, normal[..., 1])
    for i in range(ns):
        cx, cy, cz, r = (float(v) for v in spheres[i])
        mask = best_id == 2 + i
        normal[..., 0] = np.where(mask, (px - cx) / r, normal[..., 0])
        normal[..., 1] = np.where(mask, (py - cy) / r, normal[..., 1])
        normal[..., 2] = np.where(mask, (pz - cz) / r, normal[..., 2])
    box_mask = best_id >= 2 + ns
    for k in range(3):
        normal[..., k] = np.where(box_mask & (box_axis == k), box_sign, normal[..., k])

    lx, ly, lz = (float(v) for v in light_dir)
    qx = px + shadow_bias * normal[..., 0]
    qy = py + shadow_bias * normal[..., 1]
    qz = pz + shadow_bias * normal[..., 2]
    occluded = np.zeros((h, w), dtype=bool)
    for i in range(ns):
        cx, cy, cz, r = (float(v) for v in spheres[i])
        ocx = qx - cx
        ocy = qy - cy
        ocz = qz - cz
        b = ocx * lx + ocy * ly + ocz * lz
        c = ocx * ocx + ocy * ocy + ocz * ocz - r * r
        disc = b * b - c
        s = np.sqrt(np.maximum(disc, 0.0))
        far = -b + s
        occluded |= (disc > 0.0) & (far > T_EPS)
    for j in range(len(boxes)):
        t0, t1, _, _ = _box_interval(qx, qy, qz, lx, ly, lz, [float(v) for v in boxes[j]])
        occluded |= (t0 <= t1) & (t1 > T_EPS)
    visibility = np.where(occluded, 0.0, 1.0)

    return best_id, point, normal, visibility
