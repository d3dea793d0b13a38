"""Diffuse interreflection: direct illuminance, form factors, the energy
balance solve, and the per-luminaire superposition basis.

Units follow photometric convention: direct illuminance E in lux arriving
on a patch face, exitance B in lm/m^2 leaving it.  With R = diag(albedo)
and F the form-factor matrix the steady state satisfies

    (I - R F) B = R E

so the total light arriving at patch i is E[i] + (F B)[i] and the reflected
part is albedo_i times that.  Everything is linear in the luminaire dim
vector, which the basis type exploits: one solve per luminaire, then any
dim combination is a weighted sum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit, prange
from scipy.linalg import lstsq

from .accel import AccelIndex, _segment_blocked
from .errors import SolverError, ValidationError
from .model import Luminaire, Patch, Scene
from .photometry import eval_ldc_angles

__all__ = [
    "DEFAULT_FF_SAMPLES",
    "EmissionVector",
    "FormFactorMatrix",
    "LuminaireBasis",
    "RadiositySolution",
    "build_basis",
    "direct_illuminance",
    "emission_matrix",
    "emission_vector",
    "form_factor",
    "form_factor_matrix",
    "solve_radiosity",
]

DEFAULT_FF_SAMPLES = 16  # 4x4 grid per patch
ROW_SUM_SLACK = 1e-3
_DENSE_LIMIT = 2000
_NEG_CLAMP = 1e-9


# ---------------------------------------------------------------------------
# containers


@dataclass(frozen=True)
class EmissionVector:
    """Per-patch direct illuminance (lux) and the dim vector that made it."""

    E: np.ndarray
    dims: np.ndarray

    def __post_init__(self):
        E = np.asarray(self.E, dtype=np.float64)
        dims = np.asarray(self.dims, dtype=np.float64)
        if E.ndim != 1 or dims.ndim != 1:
            raise ValidationError("emission fields must be 1-d")
        if np.any(E < 0) or not np.all(np.isfinite(E)):
            raise ValidationError("direct illuminance must be finite and >= 0")
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "dims", dims)


@dataclass(frozen=True)
class FormFactorMatrix:
    """Row-stochastic-ish transfer matrix: F[i][j] = share of patch i's
    diffuse output arriving at patch j."""

    F: np.ndarray
    areas: np.ndarray
    n_samples: int = 0

    def __post_init__(self):
        F = np.asarray(self.F, dtype=np.float64)
        areas = np.asarray(self.areas, dtype=np.float64)
        if F.ndim != 2 or F.shape[0] != F.shape[1]:
            raise ValidationError("form-factor matrix must be square")
        if areas.shape != (F.shape[0],):
            raise ValidationError("areas length must match the matrix")
        if np.any(np.diagonal(F) != 0.0):
            raise ValidationError("form-factor diagonal must be zero")
        if np.any(F < 0):
            raise ValidationError("form factors must be >= 0")
        rs = F.sum(axis=1)
        if rs.size and rs.max(initial=0.0) > 1.0 + ROW_SUM_SLACK:
            i = int(np.argmax(rs))
            raise ValidationError(
                f"form-factor row sum {rs[i]:.6f} at index {i} exceeds {1.0 + ROW_SUM_SLACK}"
            )
        lhs = areas[:, None] * F
        scale = np.maximum(np.maximum(lhs, lhs.T), 1e-30)
        if np.any(np.abs(lhs - lhs.T) > 1e-6 * scale):
            raise ValidationError("form-factor matrix violates reciprocity")
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "areas", areas)

    @property
    def n(self) -> int:
        return self.F.shape[0]

    def row_sums(self) -> np.ndarray:
        return self.F.sum(axis=1)


@dataclass(frozen=True)
class RadiositySolution:
    """Per-patch exitance (lm/m^2) plus the relative solve residual."""

    B: np.ndarray
    residual: float


@dataclass(frozen=True)
class LuminaireBasis:
    """One radiosity solution per luminaire at unit dim.

    By linearity, ``dims @ solutions`` solves the system whose source is
    ``dims @ emissions`` - recombination replaces re-solving.
    """

    luminaire_ids: tuple
    emissions: np.ndarray  # (L, N) direct lux at dim 1
    solutions: np.ndarray  # (L, N) exitance at dim 1
    form_factors: FormFactorMatrix
    albedo: np.ndarray

    def _check_dims(self, dims):
        dims = np.asarray(dims, dtype=np.float64)
        if dims.shape != (len(self.luminaire_ids),):
            raise ValidationError(
                f"dim vector length {dims.shape} does not match {len(self.luminaire_ids)} luminaires"
            )
        if np.any(dims < -1e-12) or np.any(dims > 1.0 + 1e-12):
            raise ValidationError("dims must lie in [0, 1]")
        return np.clip(dims, 0.0, 1.0)

    def emission(self, dims) -> np.ndarray:
        return self._check_dims(dims) @ self.emissions

    def exitance(self, dims) -> np.ndarray:
        return self._check_dims(dims) @ self.solutions

    def incident(self, dims) -> np.ndarray:
        """Total lux arriving per patch: direct plus interreflected."""
        dims = self._check_dims(dims)
        return dims @ self.emissions + self.form_factors.F @ (dims @ self.solutions)


# ---------------------------------------------------------------------------
# direct illuminance


def _direct_unit(luminaire: Luminaire, centers, normals, accel: AccelIndex, occlusion, ignore_idx):
    """Direct lux on each patch face from one luminaire at dim 1."""
    offsets = centers - luminaire.position
    r2 = np.einsum("ij,ij->i", offsets, offsets)
    r = np.sqrt(r2)
    out = np.zeros(len(centers))
    ok = r > 1e-9
    cos_in = np.zeros(len(centers))
    cos_in[ok] = -np.einsum("ij,ij->i", offsets[ok], normals[ok]) / r[ok]
    ok &= cos_in > 0.0
    if not np.any(ok):
        return out
    local = (offsets[ok] / r[ok, None]) @ luminaire.rotation
    polar = np.degrees(np.arccos(np.clip(local[:, 2], -1.0, 1.0)))
    azim = np.degrees(np.arctan2(local[:, 1], local[:, 0]))
    intensity = eval_ldc_angles(luminaire.ldc, azim, polar)
    out[ok] = intensity * cos_in[ok] / r2[ok]
    if occlusion:
        vis = accel.visible_fan(luminaire.position, centers[ok], ignore_idx[ok])
        vals = out[ok]
        vals[~vis] = 0.0
        out[ok] = vals
    return out


def direct_illuminance(patch: Patch, luminaire: Luminaire, dim: float, accel: AccelIndex) -> float:
    """Lux arriving directly on a patch face from one dimmed luminaire.

    Zero when the face points away or the straight path is blocked.
    """
    if not 0.0 <= dim <= 1.0:
        raise ValidationError("dim must lie in [0, 1]")
    centers = patch.center[None, :]
    normals = patch.normal[None, :]
    try:
        ignore = np.array([accel.index_of(patch.id)], dtype=np.int64)
    except KeyError:
        ignore = np.array([-1], dtype=np.int64)
    unit_val = _direct_unit(luminaire, centers, normals, accel, True, ignore)[0]
    return float(dim * unit_val)


def emission_matrix(scene: Scene, accel: AccelIndex, occlusion=True) -> np.ndarray:
    """(L, N) matrix of direct lux per luminaire at dim 1."""
    centers = np.array([p.center for p in scene.patches], dtype=np.float64).reshape(-1, 3)
    normals = np.array([p.normal for p in scene.patches], dtype=np.float64).reshape(-1, 3)
    ignore = np.empty(len(scene.patches), dtype=np.int64)
    for i, p in enumerate(scene.patches):
        try:
            ignore[i] = accel.index_of(p.id)
        except KeyError:
            ignore[i] = -1
    rows = [
        _direct_unit(lum, centers, normals, accel, occlusion, ignore)
        for lum in scene.luminaires
    ]
    return np.array(rows).reshape(len(scene.luminaires), len(scene.patches))


def emission_vector(scene: Scene, dims, accel: AccelIndex, occlusion=True) -> EmissionVector:
    """Direct illuminance of every patch under a dim vector."""
    dims = np.asarray(dims, dtype=np.float64)
    if dims.shape != (len(scene.luminaires),):
        raise ValidationError(
            f"dims has shape {dims.shape}, expected ({len(scene.luminaires)},)"
        )
    unit = emission_matrix(scene, accel, occlusion=occlusion)
    return EmissionVector(E=dims @ unit, dims=dims)


# ---------------------------------------------------------------------------
# form factors


@njit(cache=True)
def _pair_sum(si, sj, ni, nj, use_occ, bmin, bmax, left, right, start, count, perm,
              centers, normals, tus, tvs, hes, idx_i, idx_j, eps_t):
    """Sum of V * cos_i * cos_j / (pi r^2) over all sample-point pairs."""
    acc = 0.0
    for a in range(si.shape[0]):
        for b in range(sj.shape[0]):
            dx = sj[b, 0] - si[a, 0]
            dy = sj[b, 1] - si[a, 1]
            dz = sj[b, 2] - si[a, 2]
            r2 = dx * dx + dy * dy + dz * dz
            if r2 < 1e-12:
                continue
            ci = dx * ni[0] + dy * ni[1] + dz * ni[2]
            if ci <= 0.0:
                continue
            cj = -(dx * nj[0] + dy * nj[1] + dz * nj[2])
            if cj <= 0.0:
                continue
            if use_occ and _segment_blocked(
                bmin, bmax, left, right, start, count, perm,
                centers, normals, tus, tvs, hes,
                si[a], sj[b], idx_i, idx_j, eps_t,
            ):
                continue
            acc += ci * cj / (r2 * r2)
    return acc / np.pi


@njit(cache=True)
def _point_rect_ff(x, n_emit, corners):
    """Exact unoccluded form factor from a differential emitter to a rectangle.

    Contour-integral form (sum of edge arcs), after clipping the rectangle
    against the emitter's tangent plane so nothing below the horizon counts.
    """
    # Sutherland-Hodgman clip of the 4-gon against (p - x) . n_emit >= 0
    poly = np.empty((8, 3))
    m = 0
    for k in range(4):
        ax = corners[k]
        bx = corners[(k + 1) % 4]
        da = (ax[0] - x[0]) * n_emit[0] + (ax[1] - x[1]) * n_emit[1] + (ax[2] - x[2]) * n_emit[2]
        db = (bx[0] - x[0]) * n_emit[0] + (bx[1] - x[1]) * n_emit[1] + (bx[2] - x[2]) * n_emit[2]
        ina = da >= -1e-12
        inb = db >= -1e-12
        if ina:
            poly[m, 0] = ax[0]
            poly[m, 1] = ax[1]
            poly[m, 2] = ax[2]
            m += 1
        if ina != inb:
            t = da / (da - db)
            poly[m, 0] = ax[0] + t * (bx[0] - ax[0])
            poly[m, 1] = ax[1] + t * (bx[1] - ax[1])
            poly[m, 2] = ax[2] + t * (bx[2] - ax[2])
            m += 1
    if m < 3:
        return 0.0
    gx = 0.0
    gy = 0.0
    gz = 0.0
    for k in range(m):
        r0x = poly[k, 0] - x[0]
        r0y = poly[k, 1] - x[1]
        r0z = poly[k, 2] - x[2]
        k1 = (k + 1) % m
        r1x = poly[k1, 0] - x[0]
        r1y = poly[k1, 1] - x[1]
        r1z = poly[k1, 2] - x[2]
        cx = r0y * r1z - r0z * r1y
        cy = r0z * r1x - r0x * r1z
        cz = r0x * r1y - r0y * r1x
        cn = np.sqrt(cx * cx + cy * cy + cz * cz)
        if cn < 1e-15:
            continue
        theta = np.arctan2(cn, r0x * r1x + r0y * r1y + r0z * r1z)
        gx += theta * cx / cn
        gy += theta * cy / cn
        gz += theta * cz / cn
    f = -(n_emit[0] * gx + n_emit[1] * gy + n_emit[2] * gz) / (2.0 * np.pi)
    if f < 0.0:
        return 0.0
    return f


@njit(cache=True)
def _close_ff(si, wi, sj, corners_j, ni, nj, cj, use_occ, bmin, bmax, left, right, start, count, perm,
              centers, normals, tus, tvs, hes, idx_i, idx_j, eps_t):
    """F from patch i to a nearby patch j: analytic inner integral per node.

    The pair-sum estimator degrades when the 1/r^2 kernel spikes near a
    shared edge; here the inner integral over j is exact at each outer
    quadrature node (weights wi sum to 1), occlusion entering as the
    visible fraction of j's node set.
    """
    n_i = si.shape[0]
    n_j = sj.shape[0]
    total = 0.0
    for a in range(n_i):
        # receiving side of j only
        side = (si[a, 0] - cj[0]) * nj[0] + (si[a, 1] - cj[1]) * nj[1] + (si[a, 2] - cj[2]) * nj[2]
        if side <= 0.0:
            continue
        if use_occ:
            seen = 0
            for b in range(n_j):
                if not _segment_blocked(
                    bmin, bmax, left, right, start, count, perm,
                    centers, normals, tus, tvs, hes,
                    si[a], sj[b], idx_i, idx_j, eps_t,
                ):
                    seen += 1
            if seen == 0:
                continue
            vis = seen / n_j
        else:
            vis = 1.0
        total += wi[a] * vis * _point_rect_ff(si[a], ni, corners_j)
    return total


@njit(cache=True, parallel=True)
def _ff_upper(samples, gsamples, gweights, corners, pnormals, pcenters, areas, radii,
              close_factor, use_occ, bmin, bmax, left, right, start, count, perm,
              centers, normals, tus, tvs, hes, eps_t, out):
    n_patch = samples.shape[0]
    nn = samples.shape[1] * samples.shape[1]
    for i in prange(n_patch):
        for j in range(i + 1, n_patch):
            dx = pcenters[j, 0] - pcenters[i, 0]
            dy = pcenters[j, 1] - pcenters[i, 1]
            dz = pcenters[j, 2] - pcenters[i, 2]
            dist = np.sqrt(dx * dx + dy * dy + dz * dz)
            if dist < close_factor * (radii[i] + radii[j]):
                out[i, j] = _close_ff(
                    gsamples[i], gweights, gsamples[j], corners[j], pnormals[i], pnormals[j],
                    pcenters[j], use_occ, bmin, bmax, left, right, start, count, perm,
                    centers, normals, tus, tvs, hes, i, j, eps_t,
                )
                out[j, i] = _close_ff(
                    gsamples[j], gweights, gsamples[i], corners[i], pnormals[j], pnormals[i],
                    pcenters[i], use_occ, bmin, bmax, left, right, start, count, perm,
                    centers, normals, tus, tvs, hes, j, i, eps_t,
                )
            else:
                s = _pair_sum(
                    samples[i], samples[j], pnormals[i], pnormals[j], use_occ,
                    bmin, bmax, left, right, start, count, perm,
                    centers, normals, tus, tvs, hes, i, j, eps_t,
                )
                out[i, j] = areas[j] * s / nn
                out[j, i] = areas[i] * s / nn


CLOSE_FACTOR = 5.0  # pairs nearer than this x (radius_i + radius_j) get the analytic inner integral


def _grid_count(n_samples: int) -> int:
    if n_samples < 1:
        raise ValidationError("n_samples must be >= 1")
    return max(1, int(np.sqrt(n_samples)))


def _patch_corners(p: Patch) -> np.ndarray:
    """(4, 3) corners wound counterclockwise about the patch normal."""
    u = p.tangent_u * p.half_extents[0]
    v = p.tangent_v * p.half_extents[1]
    c = p.center
    return np.array([c - u - v, c + u - v, c + u + v, c - u + v])


def _circumradius(p: Patch) -> float:
    return float(np.hypot(p.half_extents[0], p.half_extents[1]))


def _lattice(patches, uu, vv):
    out = np.empty((len(patches), uu.size, 3))
    for i, p in enumerate(patches):
        out[i] = (
            p.center
            + np.outer(uu * p.half_extents[0], p.tangent_u)
            + np.outer(vv * p.half_extents[1], p.tangent_v)
        )
    return out


def _sample_grid(patches, g: int) -> np.ndarray:
    """(N, g*g, 3) cell-center points on every patch, fixed order."""
    offs = (2.0 * np.arange(g) + 1.0) / g - 1.0
    uu, vv = np.meshgrid(offs, offs, indexing="ij")
    return _lattice(patches, uu.ravel(), vv.ravel())


def _gauss_grid(patches, g: int):
    """(N, g*g, 3) tensor Gauss-Legendre nodes plus weights summing to 1."""
    x, w = np.polynomial.legendre.leggauss(g)
    uu, vv = np.meshgrid(x, x, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    weights = (wu * wv).ravel() / 4.0
    return _lattice(patches, uu.ravel(), vv.ravel()), weights


def form_factor(i: Patch, j: Patch, accel: AccelIndex, n_samples: int = DEFAULT_FF_SAMPLES,
                occlusion: bool = True) -> float:
    """Monte Carlo form factor from patch i to patch j.

    Deterministic: both patches are sampled on fixed cell-center grids, so
    repeated calls agree bit for bit.
    """
    if i.id == j.id:
        raise ValidationError("form factor needs two distinct patches")
    g = _grid_count(n_samples)
    grids = _sample_grid([i, j], g)
    try:
        ii = accel.index_of(i.id)
    except KeyError:
        ii = -1
    try:
        jj = accel.index_of(j.id)
    except KeyError:
        jj = -1
    ni = np.ascontiguousarray(i.normal)
    nj = np.ascontiguousarray(j.normal)
    dist = float(np.linalg.norm(j.center - i.center))
    if dist < CLOSE_FACTOR * (_circumradius(i) + _circumradius(j)):
        gpts, gw = _gauss_grid([i, j], g)
        return float(_close_ff(
            gpts[0], gw, gpts[1], _patch_corners(j), ni, nj,
            np.ascontiguousarray(j.center), occlusion,
            *accel.tree_args(), *accel.geom_args(), ii, jj, accel.eps_t,
        ))
    s = _pair_sum(
        grids[0], grids[1], ni, nj,
        occlusion, *accel.tree_args(), *accel.geom_args(), ii, jj, accel.eps_t,
    )
    nn = g * g * g * g
    return float(j.area * s / nn)


def form_factor_matrix(patches, accel: AccelIndex, n_samples: int = DEFAULT_FF_SAMPLES,
                       occlusion: bool = True) -> FormFactorMatrix:
    """All pairwise form factors, reciprocity-symmetrized.

    Each unordered pair shares one set of sample segments, evaluated once;
    rows are filled concurrently but every entry is computed by exactly one
    iteration, so results do not depend on thread count.
    """
    patches = list(patches)
    if len(patches) < 2:
        raise ValidationError("need at least two patches")
    g = _grid_count(n_samples)
    samples = _sample_grid(patches, g)
    gsamples, gweights = _gauss_grid(patches, g)
    corners = np.array([_patch_corners(p) for p in patches])
    pnormals = np.array([p.normal for p in patches], dtype=np.float64)
    pcenters = np.array([p.center for p in patches], dtype=np.float64)
    areas = np.array([p.area for p in patches], dtype=np.float64)
    radii = np.array([_circumradius(p) for p in patches], dtype=np.float64)
    raw = np.zeros((len(patches), len(patches)))
    _ff_upper(
        samples, gsamples, gweights, corners, pnormals, pcenters, areas, radii,
        CLOSE_FACTOR, occlusion,
        *accel.tree_args(), *accel.geom_args(), accel.eps_t, raw,
    )
    # reciprocity repair: F_ij <- (A_i F_ij + A_j F_ji) / (2 A_i)
    m = areas[:, None] * raw
    sym = m + m.T
    F = sym / (2.0 * areas[:, None])
    np.fill_diagonal(F, 0.0)
    return FormFactorMatrix(F=F, areas=areas, n_samples=g * g)


# ---------------------------------------------------------------------------
# the solve


def _as_matrix(F):
    return F.F if isinstance(F, FormFactorMatrix) else np.asarray(F, dtype=np.float64)


def _as_emission(E):
    return E.E if isinstance(E, EmissionVector) else np.asarray(E, dtype=np.float64)


def solve_radiosity(F, albedo, E, method: str = "auto", max_iter: int = 20000,
                    tol: float = 1e-12) -> RadiositySolution:
    """Solve (I - R F) B = R E for per-patch exitance B.

    method "direct" runs a dense QR least-squares factorization, "jacobi"
    the matching fixed-point iteration; "auto" picks by problem size.
    """
    Fm = _as_matrix(F)
    rho = np.asarray(albedo, dtype=np.float64)
    Ev = _as_emission(E)
    n = Fm.shape[0]
    if rho.shape != (n,) or Ev.shape != (n,):
        raise ValidationError("albedo/emission shapes do not match the matrix")
    if np.any(rho < 0) or np.any(rho >= 1.0):
        raise ValidationError("albedo must lie in [0, 1)")

    rhs = rho * Ev
    if method == "auto":
        method = "direct" if n <= _DENSE_LIMIT else "jacobi"

    if method == "direct":
        A = np.eye(n) - rho[:, None] * Fm
        B, *_ = lstsq(A, rhs, lapack_driver="gelsy")
    elif method == "jacobi":
        B = rhs.copy()
        for _ in range(max_iter):
            nxt = rhs + rho * (Fm @ B)
            if np.max(np.abs(nxt - B)) <= tol * max(1.0, np.max(np.abs(nxt))):
                B = nxt
                break
            B = nxt
    else:
        raise ValidationError(f"unknown solver method {method!r}")

    small = (B < 0.0) & (B >= -_NEG_CLAMP * max(1.0, float(np.max(np.abs(B), initial=0.0))))
    B = np.where(small, 0.0, B)
    if np.any(B < 0.0):
        raise SolverError(f"solver produced negative exitance (min {B.min():.3e})")

    misfit = (B - rho * (Fm @ B)) - rhs
    denom = np.linalg.norm(rhs)
    residual = float(np.linalg.norm(misfit) / denom) if denom > 0 else float(np.linalg.norm(misfit))
    if residual >= 1e-8:
        raise SolverError(f"radiosity solve did not converge (residual {residual:.3e})")
    return RadiositySolution(B=B, residual=residual)


def build_basis(scene: Scene, accel: AccelIndex, n_samples: int = DEFAULT_FF_SAMPLES,
                occlusion: bool = True, form_factors: FormFactorMatrix | None = None,
                method: str = "auto") -> LuminaireBasis:
    """Solve once per luminaire at dim 1 and package the results."""
    unit = emission_matrix(scene, accel, occlusion=occlusion)
    if form_factors is None:
        form_factors = form_factor_matrix(scene.patches, accel, n_samples=n_samples,
                                          occlusion=occlusion)
    albedo = np.array([p.albedo for p in scene.patches], dtype=np.float64)
    sols = np.empty_like(unit)
    for k, lum in enumerate(scene.luminaires):
        try:
            sols[k] = solve_radiosity(form_factors, albedo, unit[k], method=method).B
        except SolverError as exc:
            raise SolverError(f"luminaire {lum.id}: {exc}") from exc
    return LuminaireBasis(
        luminaire_ids=tuple(l.id for l in scene.luminaires),
        emissions=unit,
        solutions=sols,
        form_factors=form_factors,
        albedo=albedo,
    )
