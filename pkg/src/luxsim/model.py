"""Domain types: patches, luminaires, sensors, occupants and the scene itself.

All types are immutable after construction (arrays are frozen read-only) and
validate their invariants up front, so downstream numeric code can assume
well-formed inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .geometry import UNIT_TOL, tangent_basis

MAX_ALBEDO = 1.0 - 1e-3  # keeps I - R*F strictly diagonally dominant


def _frozen(a, shape=None, name="array"):
    out = np.array(a, dtype=float)
    if shape is not None and out.shape != shape:
        raise ValidationError(f"{name} must have shape {shape}, got {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValidationError(f"{name} contains non-finite values")
    out.flags.writeable = False
    return out


def _check_unit(v, what: str):
    if abs(float(np.linalg.norm(v)) - 1.0) > UNIT_TOL:
        raise ValidationError(f"{what} must be a unit vector (|v|={np.linalg.norm(v):.12f})")


@dataclass(frozen=True)
class Patch:
    """Oriented rectangle: the unknown of the interreflection solve lives here."""

    id: int
    center: np.ndarray
    normal: np.ndarray
    tangent_u: np.ndarray
    tangent_v: np.ndarray
    half_extents: np.ndarray  # (2,) meters along tangent_u / tangent_v
    albedo: float

    def __post_init__(self):
        object.__setattr__(self, "center", _frozen(self.center, (3,), "center"))
        object.__setattr__(self, "normal", _frozen(self.normal, (3,), "normal"))
        object.__setattr__(self, "tangent_u", _frozen(self.tangent_u, (3,), "tangent_u"))
        object.__setattr__(self, "tangent_v", _frozen(self.tangent_v, (3,), "tangent_v"))
        object.__setattr__(self, "half_extents", _frozen(self.half_extents, (2,), "half_extents"))
        name = f"patch {self.id}"
        _check_unit(self.normal, f"{name}: normal")
        _check_unit(self.tangent_u, f"{name}: tangent_u")
        _check_unit(self.tangent_v, f"{name}: tangent_v")
        for a, b, lab in (
            (self.tangent_u, self.normal, "tangent_u.normal"),
            (self.tangent_v, self.normal, "tangent_v.normal"),
            (self.tangent_u, self.tangent_v, "tangent_u.tangent_v"),
        ):
            if abs(float(np.dot(a, b))) > UNIT_TOL:
                raise ValidationError(f"{name}: tangent basis not orthonormal ({lab})")
        if not (self.half_extents > 0).all():
            raise ValidationError(f"{name}: half_extents must be positive")
        if not 0.0 <= self.albedo < 1.0:
            raise ValidationError(
                f"{name}: albedo {self.albedo} outside [0, 1) "
                "(unit albedo would make the interreflection system singular)"
            )

    @property
    def area(self) -> float:
        return 4.0 * float(self.half_extents[0]) * float(self.half_extents[1])

    @staticmethod
    def from_normal(id, center, normal, half_extents, albedo):
        """Build a patch deriving a deterministic tangent basis from the normal."""
        u, v = tangent_basis(normal)
        return Patch(id, center, np.asarray(normal, float) / np.linalg.norm(normal),
                     u, v, half_extents, albedo)


@dataclass(frozen=True)
class LightDistributionCurve:
    """Candela table indexed by (azimuth plane C, polar angle gamma), degrees."""

    polar_deg: np.ndarray
    azimuth_deg: np.ndarray
    candela: np.ndarray  # shape (n_azimuth, n_polar)

    def __post_init__(self):
        object.__setattr__(self, "polar_deg", _frozen(self.polar_deg, name="polar_deg"))
        object.__setattr__(self, "azimuth_deg", _frozen(self.azimuth_deg, name="azimuth_deg"))
        object.__setattr__(self, "candela", _frozen(self.candela, name="candela"))
        p, a, c = self.polar_deg, self.azimuth_deg, self.candela
        if p.ndim != 1 or a.ndim != 1 or c.shape != (a.size, p.size):
            raise ValidationError(
                f"candela table shape {c.shape} does not match "
                f"{a.size} azimuth planes x {p.size} polar angles"
            )
        if p.size < 1 or p[0] != 0.0 or p[-1] > 180.0 or np.any(np.diff(p) <= 0):
            raise ValidationError("polar angles must start at 0, ascend strictly, end <= 180")
        if a.size < 1 or a[0] < 0.0 or a[-1] >= 360.0 or np.any(np.diff(a) <= 0):
            raise ValidationError("azimuth planes must ascend strictly within [0, 360)")
        if np.any(c < 0):
            raise ValidationError("candela values must be non-negative")


@dataclass(frozen=True)
class Luminaire:
    """Point light source shaped by a distribution curve.

    `rotation` maps luminaire-local coordinates to world; the curve's polar
    angle is measured from the local +Z (principal emission) axis.
    """

    id: int
    position: np.ndarray
    rotation: np.ndarray  # (3,3) local -> world
    ldc: LightDistributionCurve
    power_watts: float
    dim: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "position", _frozen(self.position, (3,), "position"))
        object.__setattr__(self, "rotation", _frozen(self.rotation, (3, 3), "rotation"))
        name = f"luminaire {self.id}"
        r = self.rotation
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-8):
            raise ValidationError(f"{name}: rotation is not orthonormal")
        if self.power_watts < 0:
            raise ValidationError(f"{name}: power_watts must be >= 0")
        if not 0.0 <= self.dim <= 1.0:
            raise ValidationError(f"{name}: dim {self.dim} outside [0, 1]")

    @property
    def axis(self) -> np.ndarray:
        """Principal emission direction in world coordinates."""
        return self.rotation[:, 2]


@dataclass(frozen=True)
class LuxmeterSensitivityCurve:
    """Angular sensitivity of a lux sensor: 1 at normal incidence, 0 past 90 deg."""

    angles_deg: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "angles_deg", _frozen(self.angles_deg, name="angles_deg"))
        object.__setattr__(self, "weight", _frozen(self.weight, name="weight"))
        a, w = self.angles_deg, self.weight
        if a.ndim != 1 or a.shape != w.shape or a.size < 1:
            raise ValidationError("sensitivity table must be two equal-length columns")
        if a[0] != 0.0 or np.any(np.diff(a) <= 0) or a[-1] > 90.0:
            raise ValidationError("angles must start at 0, ascend strictly, end <= 90")
        if w[0] != 1.0:
            raise ValidationError("sensitivity at 0 degrees must be exactly 1")
        if np.any((w < 0) | (w > 1)):
            raise ValidationError("sensitivity weights must lie in [0, 1]")


@dataclass(frozen=True)
class Sensor:
    """A lux measurement point, either area-sampling ('spatial') or worn ('gaze')."""

    id: int
    position: np.ndarray
    facing: np.ndarray
    lsc: LuxmeterSensitivityCurve
    role: str = "spatial"

    def __post_init__(self):
        object.__setattr__(self, "position", _frozen(self.position, (3,), "position"))
        object.__setattr__(self, "facing", _frozen(self.facing, (3,), "facing"))
        name = f"sensor {self.id}"
        _check_unit(self.facing, f"{name}: facing")
        if self.role not in ("spatial", "gaze"):
            raise ValidationError(f"{name}: role must be 'spatial' or 'gaze'")


@dataclass(frozen=True)
class Occupant:
    """A person: head position, gaze direction and the perception model applied."""

    id: int
    head_position: np.ndarray
    gaze: np.ndarray
    lsc: LuxmeterSensitivityCurve
    vfoa_aperture_deg: float = 30.0

    def __post_init__(self):
        object.__setattr__(self, "head_position", _frozen(self.head_position, (3,), "head_position"))
        object.__setattr__(self, "gaze", _frozen(self.gaze, (3,), "gaze"))
        name = f"occupant {self.id}"
        _check_unit(self.gaze, f"{name}: gaze")
        if not 0.0 < self.vfoa_aperture_deg < 180.0:
            raise ValidationError(f"{name}: aperture must lie in (0, 180) degrees")


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics plus a camera-to-world pose."""

    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "rotation", _frozen(self.rotation, (3, 3), "rotation"))
        object.__setattr__(self, "translation", _frozen(self.translation, (3,), "translation"))
        if self.fx <= 0 or self.fy <= 0:
            raise ValidationError("camera focal lengths must be positive")
        r = self.rotation
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-8):
            raise ValidationError("camera rotation is not orthonormal")

    @property
    def position(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return self.translation

    def backproject(self, u, v, depth_m):
        """Pixel coordinates + metric depth -> world point(s)."""
        u = np.asarray(u, float)
        v = np.asarray(v, float)
        z = np.asarray(depth_m, float)
        cam = np.stack([(u - self.cx) * z / self.fx, (v - self.cy) * z / self.fy, z], axis=-1)
        return cam @ self.rotation.T + self.translation

    def project(self, world):
        """World point(s) -> (u, v, depth) in the camera; depth may be <= 0 behind it."""
        p = (np.asarray(world, float) - self.translation) @ self.rotation
        z = p[..., 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = self.fx * p[..., 0] / z + self.cx
            v = self.fy * p[..., 1] / z + self.cy
        return u, v, z


@dataclass(frozen=True)
class DepthImage:
    """Single-channel metric depth; zero marks an invalid measurement."""

    depth: np.ndarray  # (height, width) meters

    def __post_init__(self):
        d = np.array(self.depth, dtype=float)
        if d.ndim != 2:
            raise ValidationError("depth must be a 2D array")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise ValidationError("depth values must be finite and >= 0")
        d.flags.writeable = False
        object.__setattr__(self, "depth", d)

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]


def _check_unique_ids(items, kind: str):
    seen = set()
    for it in items:
        if it.id in seen:
            raise ValidationError(f"duplicate {kind} id {it.id}")
        seen.add(it.id)


@dataclass(frozen=True)
class Scene:
    """Immutable world model: geometry, lights, sensors and occupants."""

    patches: tuple[Patch, ...] = ()
    luminaires: tuple[Luminaire, ...] = ()
    sensors: tuple[Sensor, ...] = ()
    occupants: tuple[Occupant, ...] = ()
    camera: CameraModel | None = None

    def __post_init__(self):
        object.__setattr__(self, "patches", tuple(self.patches))
        object.__setattr__(self, "luminaires", tuple(self.luminaires))
        object.__setattr__(self, "sensors", tuple(self.sensors))
        object.__setattr__(self, "occupants", tuple(self.occupants))
        _check_unique_ids(self.patches, "patch")
        _check_unique_ids(self.luminaires, "luminaire")
        _check_unique_ids(self.sensors, "sensor")
        _check_unique_ids(self.occupants, "occupant")

    def replace_albedo(self, albedo) -> "Scene":
        """New scene with per-patch albedo taken from the given vector."""
        albedo = np.asarray(albedo, float)
        if albedo.shape != (len(self.patches),):
            raise ValidationError(
                f"albedo vector has {albedo.shape} entries for {len(self.patches)} patches"
            )
        patches = tuple(
            Patch(p.id, p.center, p.normal, p.tangent_u, p.tangent_v, p.half_extents, float(a))
            for p, a in zip(self.patches, albedo)
        )
        return Scene(patches, self.luminaires, self.sensors, self.occupants, self.camera)


def cosine_sensitivity(step_deg: float = 5.0) -> LuxmeterSensitivityCurve:
    """Ideal cosine-response sensitivity sampled every `step_deg` degrees."""
    angles = np.arange(0.0, 90.0 + 1e-9, step_deg)
    weights = np.cos(np.radians(angles))
    weights[0] = 1.0
    weights[angles >= 90.0] = 0.0  # cos(90deg) rounds to ~6e-17, pin it
    return LuxmeterSensitivityCurve(angles, np.clip(weights, 0.0, 1.0))


def constant_intensity_curve(candela: float) -> LightDistributionCurve:
    """Curve emitting the same candela value in every direction."""
    if candela < 0:
        raise ValidationError("candela must be >= 0")
    return LightDistributionCurve(
        polar_deg=np.array([0.0, 90.0, 180.0]),
        azimuth_deg=np.array([0.0]),
        candela=np.full((1, 3), float(candela)),
    )


def isotropic_curve(flux_lumens: float) -> LightDistributionCurve:
    """Uniform-intensity curve radiating `flux_lumens` over the full sphere."""
    if flux_lumens < 0:
        raise ValidationError("flux must be >= 0")
    return constant_intensity_curve(flux_lumens / (4.0 * math.pi))
