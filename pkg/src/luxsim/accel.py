"""Ray intersection acceleration over rectangular patches.

A flat BVH (median split on the longest centroid axis, small leaves) backed
by numba kernels.  Rectangles are two-sided.  All queries share a metric
epsilon ``eps_t`` that discards hits closer than that distance to the ray
origin, and segment visibility applies it at both endpoints.

Nearest-hit queries resolve ties deterministically: among every hit within
1e-9 of the smallest hit distance, the lowest patch id wins.  That rule is
order-independent, so a BVH traversal and a brute-force scan agree exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .errors import EmptyGeometryError, ValidationError
from .model import Occupant, Patch

__all__ = [
    "AccelIndex",
    "Hit",
    "Ray",
    "build_accel",
    "occupant_body_patches",
]

EPS_T = 1e-4  # metric guard band around ray endpoints
TIE_WINDOW = 1e-9  # hits within this of t_min compete on patch id
_LEAF_SIZE = 4
_STACK = 64


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray


@dataclass(frozen=True)
class Hit:
    t: float
    patch_id: int
    index: int


# ---------------------------------------------------------------------------
# kernels


@njit(cache=True)
def _rect_t(o, d, centers, normals, tus, tvs, hes, i, t_lo, t_hi):
    """Distance along the ray to rectangle i, or -1.0 outside (t_lo, t_hi]."""
    nx = normals[i, 0]
    ny = normals[i, 1]
    nz = normals[i, 2]
    denom = d[0] * nx + d[1] * ny + d[2] * nz
    if -1e-14 < denom < 1e-14:
        return -1.0
    t = (
        (centers[i, 0] - o[0]) * nx
        + (centers[i, 1] - o[1]) * ny
        + (centers[i, 2] - o[2]) * nz
    ) / denom
    if t < t_lo or t > t_hi:
        return -1.0
    hx = o[0] + t * d[0] - centers[i, 0]
    hy = o[1] + t * d[1] - centers[i, 1]
    hz = o[2] + t * d[2] - centers[i, 2]
    u = hx * tus[i, 0] + hy * tus[i, 1] + hz * tus[i, 2]
    if u < -hes[i, 0] or u > hes[i, 0]:
        return -1.0
    v = hx * tvs[i, 0] + hy * tvs[i, 1] + hz * tvs[i, 2]
    if v < -hes[i, 1] or v > hes[i, 1]:
        return -1.0
    return t


@njit(cache=True)
def _slab_ok(bmin, bmax, node, o, d, t_lo, t_hi):
    tmin = t_lo
    tmax = t_hi
    for a in range(3):
        da = d[a]
        if -1e-300 < da < 1e-300:
            if o[a] < bmin[node, a] or o[a] > bmax[node, a]:
                return False
        else:
            inv = 1.0 / da
            t0 = (bmin[node, a] - o[a]) * inv
            t1 = (bmax[node, a] - o[a]) * inv
            if t0 > t1:
                t0, t1 = t1, t0
            if t0 > tmin:
                tmin = t0
            if t1 < tmax:
                tmax = t1
            if tmin > tmax:
                return False
    return True


@njit(cache=True)
def _cast_one(bmin, bmax, left, right, start, count, perm, ids, centers, normals, tus, tvs, hes, o, d, eps_t):
    """Nearest hit with the lowest-id tie rule.  Returns (t, index) or (inf, -1)."""
    if left.shape[0] == 0:
        return np.inf, -1
    stack = np.empty(_STACK, np.int64)

    # pass 1: exact smallest admissible t
    best = np.inf
    top = 1
    stack[0] = 0
    while top > 0:
        top -= 1
        node = stack[top]
        if not _slab_ok(bmin, bmax, node, o, d, eps_t, best):
            continue
        c = count[node]
        if c > 0:
            s = start[node]
            for k in range(s, s + c):
                t = _rect_t(o, d, centers, normals, tus, tvs, hes, perm[k], eps_t, best)
                if t >= 0.0 and t < best:
                    best = t
        else:
            stack[top] = left[node]
            top += 1
            stack[top] = right[node]
            top += 1
    if best == np.inf:
        return np.inf, -1

    # pass 2: lowest patch id within the tie window of that t
    limit = best + TIE_WINDOW
    win_id = np.int64(2 ** 62)
    win_idx = -1
    win_t = best
    top = 1
    stack[0] = 0
    while top > 0:
        top -= 1
        node = stack[top]
        if not _slab_ok(bmin, bmax, node, o, d, eps_t, limit):
            continue
        c = count[node]
        if c > 0:
            s = start[node]
            for k in range(s, s + c):
                i = perm[k]
                t = _rect_t(o, d, centers, normals, tus, tvs, hes, i, eps_t, limit)
                if t >= 0.0 and ids[i] < win_id:
                    win_id = ids[i]
                    win_idx = i
                    win_t = t
        else:
            stack[top] = left[node]
            top += 1
            stack[top] = right[node]
            top += 1
    return win_t, win_idx


@njit(cache=True, parallel=True)
def _cast_batch(bmin, bmax, left, right, start, count, perm, ids, centers, normals, tus, tvs, hes, origins, dirs, eps_t, out_t, out_idx):
    for r in prange(origins.shape[0]):
        t, idx = _cast_one(
            bmin, bmax, left, right, start, count, perm, ids,
            centers, normals, tus, tvs, hes,
            origins[r], dirs[r], eps_t,
        )
        out_t[r] = t
        out_idx[r] = idx


@njit(cache=True)
def _segment_blocked(bmin, bmax, left, right, start, count, perm, centers, normals, tus, tvs, hes, p0, p1, ign_a, ign_b, eps_t):
    """True if any rectangle (other than the two ignored indices) cuts the open segment."""
    if left.shape[0] == 0:
        return False
    d = np.empty(3)
    d[0] = p1[0] - p0[0]
    d[1] = p1[1] - p0[1]
    d[2] = p1[2] - p0[2]
    length = np.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
    if length <= 2.0 * eps_t:
        return False
    t_lo = eps_t / length
    t_hi = 1.0 - t_lo
    stack = np.empty(_STACK, np.int64)
    top = 1
    stack[0] = 0
    while top > 0:
        top -= 1
        node = stack[top]
        if not _slab_ok(bmin, bmax, node, p0, d, t_lo, t_hi):
            continue
        c = count[node]
        if c > 0:
            s = start[node]
            for k in range(s, s + c):
                i = perm[k]
                if i == ign_a or i == ign_b:
                    continue
                t = _rect_t(p0, d, centers, normals, tus, tvs, hes, i, t_lo, t_hi)
                if t >= 0.0:
                    return True
        else:
            stack[top] = left[node]
            top += 1
            stack[top] = right[node]
            top += 1
    return False


@njit(cache=True, parallel=True)
def _visible_fan(bmin, bmax, left, right, start, count, perm, centers, normals, tus, tvs, hes, origin, targets, ignore_idx, eps_t, out):
    for r in prange(targets.shape[0]):
        out[r] = not _segment_blocked(
            bmin, bmax, left, right, start, count, perm,
            centers, normals, tus, tvs, hes,
            origin, targets[r], ignore_idx[r], -1, eps_t,
        )


# ---------------------------------------------------------------------------
# construction


def _patch_bounds(centers, tus, tvs, hes):
    ext = np.abs(tus) * hes[:, :1] + np.abs(tvs) * hes[:, 1:2]
    pad = 1e-9
    return centers - ext - pad, centers + ext + pad


def _build_nodes(pmin, pmax):
    n = pmin.shape[0]
    centroids = 0.5 * (pmin + pmax)
    perm = np.arange(n, dtype=np.int64)
    bmin_l, bmax_l = [], []
    left_l, right_l, start_l, count_l = [], [], [], []

    def new_node():
        bmin_l.append(np.zeros(3))
        bmax_l.append(np.zeros(3))
        left_l.append(-1)
        right_l.append(-1)
        start_l.append(0)
        count_l.append(0)
        return len(left_l) - 1

    stack = [(new_node(), 0, n)]
    while stack:
        node, lo, hi = stack.pop()
        sel = perm[lo:hi]
        bmin_l[node] = pmin[sel].min(axis=0)
        bmax_l[node] = pmax[sel].max(axis=0)
        if hi - lo <= _LEAF_SIZE:
            start_l[node] = lo
            count_l[node] = hi - lo
            continue
        cen = centroids[sel]
        axis = int(np.argmax(cen.max(axis=0) - cen.min(axis=0)))
        order = np.argsort(cen[:, axis], kind="stable")
        perm[lo:hi] = sel[order]
        mid = (lo + hi) // 2
        lc = new_node()
        rc = new_node()
        left_l[node] = lc
        right_l[node] = rc
        stack.append((lc, lo, mid))
        stack.append((rc, mid, hi))
    return (
        np.array(bmin_l),
        np.array(bmax_l),
        np.array(left_l, dtype=np.int64),
        np.array(right_l, dtype=np.int64),
        np.array(start_l, dtype=np.int64),
        np.array(count_l, dtype=np.int64),
        perm,
    )


class AccelIndex:
    """Immutable BVH over a list of patches.

    The patch order given at construction defines ``index``; ``ids`` carries
    the patch ids used for tie-breaking and the ignore lists.
    """

    def __init__(self, patches, eps_t=EPS_T):
        patches = list(patches)
        self.eps_t = float(eps_t)
        self.n = len(patches)
        self.patches = tuple(patches)
        self.ids = np.array([p.id for p in patches], dtype=np.int64).reshape(self.n)
        self.centers = np.array([p.center for p in patches], dtype=np.float64).reshape(self.n, 3)
        self.normals = np.array([p.normal for p in patches], dtype=np.float64).reshape(self.n, 3)
        self.tus = np.array([p.tangent_u for p in patches], dtype=np.float64).reshape(self.n, 3)
        self.tvs = np.array([p.tangent_v for p in patches], dtype=np.float64).reshape(self.n, 3)
        self.hes = np.array([p.half_extents for p in patches], dtype=np.float64).reshape(self.n, 2)
        self.areas = np.array([p.area for p in patches], dtype=np.float64).reshape(self.n)
        self.albedos = np.array([p.albedo for p in patches], dtype=np.float64).reshape(self.n)
        if self.n:
            pmin, pmax = _patch_bounds(self.centers, self.tus, self.tvs, self.hes)
            (self.bmin, self.bmax, self.left, self.right,
             self.start, self.count, self.perm) = _build_nodes(pmin, pmax)
        else:
            self.bmin = np.zeros((0, 3))
            self.bmax = np.zeros((0, 3))
            self.left = np.zeros(0, dtype=np.int64)
            self.right = np.zeros(0, dtype=np.int64)
            self.start = np.zeros(0, dtype=np.int64)
            self.count = np.zeros(0, dtype=np.int64)
            self.perm = np.zeros(0, dtype=np.int64)
        self._index_of = {int(p.id): i for i, p in enumerate(patches)}

    # kernel argument bundles, in the order the kernels expect
    def tree_args(self):
        return (self.bmin, self.bmax, self.left, self.right, self.start, self.count, self.perm)

    def geom_args(self):
        return (self.centers, self.normals, self.tus, self.tvs, self.hes)

    def index_of(self, patch_id) -> int:
        return self._index_of[int(patch_id)]

    def cast(self, origin, direction):
        """Nearest patch hit along a ray, or None."""
        o = np.ascontiguousarray(origin, dtype=np.float64)
        d = np.asarray(direction, dtype=np.float64)
        norm = np.linalg.norm(d)
        if norm == 0.0:
            raise ValidationError("ray direction must be nonzero")
        d = np.ascontiguousarray(d / norm)
        t, idx = _cast_one(*self.tree_args(), self.ids, *self.geom_args(), o, d, self.eps_t)
        if idx < 0:
            return None
        return Hit(t=float(t), patch_id=int(self.ids[idx]), index=int(idx))

    def cast_batch(self, origins, directions):
        """Vector form of cast.  Misses get t=inf, index=-1."""
        origins = np.ascontiguousarray(origins, dtype=np.float64)
        directions = np.asarray(directions, dtype=np.float64)
        norms = np.linalg.norm(directions, axis=1, keepdims=True)
        if np.any(norms == 0.0):
            raise ValidationError("ray direction must be nonzero")
        # normalize exactly like the scalar path so both give identical bits
        directions = np.ascontiguousarray(directions / norms)
        m = origins.shape[0]
        out_t = np.full(m, np.inf)
        out_idx = np.full(m, -1, dtype=np.int64)
        if m and self.n:
            _cast_batch(*self.tree_args(), self.ids, *self.geom_args(),
                        origins, directions, self.eps_t, out_t, out_idx)
        return out_t, out_idx

    def visible_fan(self, origin, targets, ignore_indices=None):
        """Visibility of one origin against many targets.

        ignore_indices gives, per target, a single patch index (not id) that
        never blocks that segment; -1 means nothing is excluded.
        """
        origin = np.ascontiguousarray(origin, dtype=np.float64)
        targets = np.ascontiguousarray(targets, dtype=np.float64)
        m = targets.shape[0]
        if ignore_indices is None:
            ignore_indices = np.full(m, -1, dtype=np.int64)
        else:
            ignore_indices = np.ascontiguousarray(ignore_indices, dtype=np.int64)
        out = np.ones(m, dtype=np.bool_)
        if m and self.n:
            _visible_fan(*self.tree_args(), *self.geom_args(),
                         origin, targets, ignore_indices, self.eps_t, out)
        return out

    def visible(self, p0, p1, ignore=()) -> bool:
        """True when the open segment p0..p1 is unobstructed.

        ``ignore`` lists up to two patch ids (typically the endpoints' own
        patches) that never count as blockers.
        """
        ign = [self._index_of.get(int(i), -1) for i in ignore]
        if len(ign) > 2:
            raise ValidationError("at most two ignored patches are supported")
        while len(ign) < 2:
            ign.append(-1)
        p0 = np.ascontiguousarray(p0, dtype=np.float64)
        p1 = np.ascontiguousarray(p1, dtype=np.float64)
        if self.n == 0:
            return True
        return not _segment_blocked(*self.tree_args(), *self.geom_args(),
                                    p0, p1, ign[0], ign[1], self.eps_t)


def build_accel(patches, eps_t=EPS_T) -> AccelIndex:
    """Build the ray index for a non-empty patch collection."""
    patches = list(patches)
    if not patches:
        raise EmptyGeometryError("cannot build a ray index over zero patches")
    return AccelIndex(patches, eps_t=eps_t)


def occupant_body_patches(occupant: Occupant, id_start: int, radius=0.20,
                          top_clearance=0.15, floor_z=0.0, n_sides=6,
                          albedo=0.2) -> list:
    """Stand-in body for an occupant: an open prism of outward wall patches.

    The prism runs from the floor to just below the head so rays leaving the
    eye position are not self-blocked at the apex, while the torso still
    shadows light arriving from behind.
    """
    top = float(occupant.head_position[2]) - top_clearance
    if top <= floor_z:
        raise ValidationError(f"occupant {occupant.id!r} head too low for a body prism")
    half_h = 0.5 * (top - floor_z)
    mid_z = floor_z + half_h
    apothem = radius * np.cos(np.pi / n_sides)
    half_w = radius * np.sin(np.pi / n_sides)
    out = []
    for k in range(n_sides):
        th = 2.0 * np.pi * (k + 0.5) / n_sides
        n = np.array([np.cos(th), np.sin(th), 0.0])
        u = np.array([-np.sin(th), np.cos(th), 0.0])
        v = np.array([0.0, 0.0, 1.0])
        center = np.array([
            occupant.head_position[0] + apothem * n[0],
            occupant.head_position[1] + apothem * n[1],
            mid_z,
        ])
        out.append(Patch(
            id=id_start + k,
            center=center,
            normal=n,
            tangent_u=u,
            tangent_v=v,
            half_extents=(half_w, half_h),
            albedo=albedo,
        ))
    return out
