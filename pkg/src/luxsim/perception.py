"""From detections to perceived lux: head lifting, gaze cones, virtual luxmeter.

The luxmeter estimate has two parts.  Interreflected light is integrated by
casting a deterministic spiral of rays over the sensor's facing hemisphere and
averaging the sensitivity-weighted radiance of the patches they strike
(exitance / pi for diffuse surfaces, measure 2*pi/n for the uniform
hemisphere).  Direct light from the point luminaires is summed analytically
per source (inverse square, sensitivity-weighted, visibility-gated), because
point sources have zero probability of being hit by sampled rays.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .accel import AccelIndex
from .errors import NoDepthError, SceneFormatError, ValidationError
from .geometry import hemisphere_directions, unit
from .model import CameraModel, DepthImage, LuxmeterSensitivityCurve, Occupant, Scene
from .photometry import eval_lsc, intensity_toward
from .radiosity import LuminaireBasis, RadiositySolution

DEFAULT_N_RAYS = 10_000

_RECORD_KEYS = ("frame_id", "person_id", "bbox", "head_px", "pose_class", "n_classes")


@dataclass(frozen=True)
class DetectionRecord:
    """One detected person in one frame, with a coarse head-orientation class."""

    frame_id: int
    person_id: int
    bbox: tuple  # (x, y, w, h) pixels
    head_px: tuple  # (u, v) pixels
    pose_class: int
    n_classes: int

    def __post_init__(self):
        object.__setattr__(self, "bbox", tuple(float(b) for b in self.bbox))
        object.__setattr__(self, "head_px", tuple(float(p) for p in self.head_px))
        if len(self.bbox) != 4:
            raise ValidationError("bbox must have four entries (x, y, w, h)")
        if len(self.head_px) != 2:
            raise ValidationError("head_px must have two entries (u, v)")
        x, y, w, h = self.bbox
        if x < 0 or y < 0 or w <= 0 or h <= 0:
            raise ValidationError(f"bbox {self.bbox} is not a positive-size box at x,y >= 0")
        if self.n_classes not in (4, 8):
            raise ValidationError(f"n_classes must be 4 or 8, got {self.n_classes}")
        if not 0 <= self.pose_class < self.n_classes:
            raise ValidationError(
                f"pose_class {self.pose_class} outside [0, {self.n_classes})"
            )


@dataclass(frozen=True)
class VFOA:
    """Unbounded viewing cone: apex at the head, axis along the gaze."""

    apex: np.ndarray
    axis: np.ndarray
    aperture_deg: float

    def __post_init__(self):
        apex = np.asarray(self.apex, dtype=np.float64)
        axis = np.asarray(self.axis, dtype=np.float64)
        if abs(float(np.linalg.norm(axis)) - 1.0) > 1e-9:
            raise ValidationError("cone axis must be a unit vector")
        if not 0.0 < self.aperture_deg < 180.0:
            raise ValidationError("aperture must lie in (0, 180) degrees")
        object.__setattr__(self, "apex", apex)
        object.__setattr__(self, "axis", axis)

    def contains(self, point) -> bool:
        """True when `point` lies within half the aperture of the axis."""
        off = np.asarray(point, dtype=np.float64) - self.apex
        r = float(np.linalg.norm(off))
        if r < 1e-12:
            return True  # the apex itself is inside the cone
        cos_a = float(np.dot(off, self.axis)) / r
        ang = math.degrees(math.acos(min(1.0, max(-1.0, cos_a))))
        return ang <= 0.5 * self.aperture_deg


def vfoa_of(occupant: Occupant) -> VFOA:
    return VFOA(apex=occupant.head_position, axis=occupant.gaze,
                aperture_deg=occupant.vfoa_aperture_deg)


@dataclass(frozen=True)
class PerceivedLux:
    """One simulated luxmeter reading, split into its two physical parts."""

    total: float
    patch_term: float
    direct_term: float
    n_rays: int

    def __post_init__(self):
        if self.patch_term < 0 or self.direct_term < 0:
            raise ValidationError("lux terms must be >= 0")
        if abs(self.total - (self.patch_term + self.direct_term)) > 1e-9:
            raise ValidationError("total must equal patch_term + direct_term")


# ---------------------------------------------------------------------------
# detection ingestion


def ingest_detections(text: str) -> list[DetectionRecord]:
    """Parse line-delimited JSON detection records, kept in frame order."""
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SceneFormatError(str(exc), where=f"line {lineno}") from exc
        if not isinstance(obj, dict):
            raise SceneFormatError("record must be an object", where=f"line {lineno}")
        missing = [k for k in _RECORD_KEYS if k not in obj]
        if missing:
            raise SceneFormatError(f"missing fields {missing}", where=f"line {lineno}")
        try:
            records.append(DetectionRecord(
                frame_id=int(obj["frame_id"]),
                person_id=int(obj["person_id"]),
                bbox=tuple(obj["bbox"]),
                head_px=tuple(obj["head_px"]),
                pose_class=int(obj["pose_class"]),
                n_classes=int(obj["n_classes"]),
            ))
        except (TypeError, ValueError) as exc:
            raise SceneFormatError(str(exc), where=f"line {lineno}") from exc
    records.sort(key=lambda r: r.frame_id)  # stable: keeps within-frame order
    return records


def head_to_3d(record: DetectionRecord, depth: DepthImage, camera: CameraModel,
               window: int = 5) -> np.ndarray:
    """World position of a detected head from the depth around its pixel.

    The median of the valid depths in a `window` x `window` neighborhood
    rejects single-pixel dropouts at the head boundary.
    """
    u, v = record.head_px
    iu, iv = int(round(u)), int(round(v))
    if not (0 <= iu < depth.width and 0 <= iv < depth.height):
        raise ValidationError(f"head pixel ({u}, {v}) outside the {depth.width}x{depth.height} image")
    half = window // 2
    block = depth.depth[max(0, iv - half):iv + half + 1, max(0, iu - half):iu + half + 1]
    valid = block[block > 0.0]
    if valid.size == 0:
        raise NoDepthError(f"no valid depth in the {window}x{window} window at ({iu}, {iv})")
    z = float(np.median(valid))
    return camera.backproject(u, v, z)


def gaze_from_class(pose_class: int, n_classes: int, world_up=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Horizontal gaze direction for a coarse orientation class.

    Class k points at azimuth k * (360 / n_classes) degrees from +X, measured
    in the plane perpendicular to `world_up`.
    """
    if n_classes not in (4, 8):
        raise ValidationError(f"n_classes must be 4 or 8, got {n_classes}")
    if not 0 <= pose_class < n_classes:
        raise ValidationError(f"pose_class {pose_class} outside [0, {n_classes})")
    up = unit(world_up)
    x_ref = np.array([1.0, 0.0, 0.0])
    x_ref = x_ref - float(np.dot(x_ref, up)) * up
    nx = float(np.linalg.norm(x_ref))
    if nx < 1e-12:
        raise ValidationError("world_up may not be parallel to the +X reference axis")
    x_ref /= nx
    y_ref = np.cross(up, x_ref)
    az = 2.0 * math.pi * pose_class / n_classes
    return unit(math.cos(az) * x_ref + math.sin(az) * y_ref)


# ---------------------------------------------------------------------------
# virtual luxmeter


@dataclass(frozen=True)
class LuxmeterProbe:
    """Frozen ray geometry for one sensor pose.

    Readings under different dim vectors reuse the identical ray set and
    per-luminaire gains, which makes the reading exactly linear in the dims.
    """

    position: np.ndarray
    facing: np.ndarray
    n_rays: int
    weights: np.ndarray  # (n_rays,) LSC weight per ray
    hit_index: np.ndarray  # (n_rays,) patch index struck, -1 for escape
    lum_gain: np.ndarray  # (L,) lux per unit dim from each luminaire


def make_probe(scene: Scene, position, facing, lsc: LuxmeterSensitivityCurve,
               accel: AccelIndex | None, n_rays: int = DEFAULT_N_RAYS,
               seq_id: int = 0, include_direct: bool = True) -> LuxmeterProbe:
    """Cast the sensing rays once and precompute per-luminaire direct gains."""
    if n_rays < 1:
        raise ValidationError("n_rays must be >= 1")
    position = np.asarray(position, dtype=np.float64)
    facing = unit(facing)

    dirs, cos_theta = hemisphere_directions(n_rays, facing, seq_id=seq_id)
    theta = np.degrees(np.arccos(np.clip(cos_theta, -1.0, 1.0)))
    weights = np.asarray(eval_lsc(lsc, theta), dtype=np.float64)
    if accel is not None and accel.n:
        origins = np.ascontiguousarray(np.broadcast_to(position, (n_rays, 3)))
        _, hit_index = accel.cast_batch(origins, dirs)
    else:
        hit_index = np.full(n_rays, -1, dtype=np.int64)

    lum_gain = np.zeros(len(scene.luminaires))
    if include_direct:
        for k, lum in enumerate(scene.luminaires):
            off = lum.position - position
            r2 = float(np.dot(off, off))
            if r2 < 1e-18:
                continue  # co-located source: no defined direction
            r = math.sqrt(r2)
            cos_inc = float(np.dot(off, facing)) / r
            if cos_inc <= 0.0:
                continue
            w = float(eval_lsc(lsc, math.degrees(math.acos(min(1.0, cos_inc)))))
            if w <= 0.0:
                continue
            if accel is not None and accel.n and not accel.visible(position, lum.position):
                continue
            lum_gain[k] = w * intensity_toward(lum, position) / r2
    return LuxmeterProbe(position=position, facing=facing, n_rays=n_rays,
                         weights=weights, hit_index=hit_index, lum_gain=lum_gain)


def probe_reading(probe: LuxmeterProbe, exitance, dims) -> PerceivedLux:
    """Evaluate a probe against a per-patch exitance field and a dim vector."""
    dims = np.asarray(dims, dtype=np.float64)
    patch_term = 0.0
    if exitance is not None:
        B = np.asarray(exitance, dtype=np.float64)
        hit = probe.hit_index >= 0
        if np.any(hit):
            # (2*pi/n) * sum w * (B/pi): uniform-hemisphere measure over radiance
            patch_term = (2.0 / probe.n_rays) * float(
                np.dot(probe.weights[hit], B[probe.hit_index[hit]])
            )
    direct_term = float(np.dot(probe.lum_gain, dims)) if dims.size else 0.0
    return PerceivedLux(total=patch_term + direct_term, patch_term=patch_term,
                        direct_term=direct_term, n_rays=probe.n_rays)


def _field_under(field, dims):
    """Per-patch exitance for `dims` from a basis, a solution or a raw vector."""
    if field is None:
        return None
    if isinstance(field, LuminaireBasis):
        return field.exitance(dims)
    if isinstance(field, RadiositySolution):
        return field.B
    return np.asarray(field, dtype=np.float64)


def virtual_luxmeter(scene: Scene, field, position, facing,
                     lsc: LuxmeterSensitivityCurve, dims,
                     accel: AccelIndex | None, n_rays: int = DEFAULT_N_RAYS,
                     seq_id: int = 0, include_direct: bool = True) -> PerceivedLux:
    """Simulated lux reading at an arbitrary pose.

    `field` may be a LuminaireBasis (recombined under `dims`), a
    RadiositySolution already matching `dims`, a raw per-patch exitance
    vector, or None for a patch-free scene.
    """
    dims = np.asarray(dims, dtype=np.float64)
    if dims.shape != (len(scene.luminaires),):
        raise ValidationError(
            f"dim vector length {dims.shape} does not match {len(scene.luminaires)} luminaires"
        )
    if np.any(dims < -1e-12) or np.any(dims > 1.0 + 1e-12):
        raise ValidationError("dims must lie in [0, 1]")
    dims = np.clip(dims, 0.0, 1.0)
    probe = make_probe(scene, position, facing, lsc, accel, n_rays=n_rays,
                       seq_id=seq_id, include_direct=include_direct)
    return probe_reading(probe, _field_under(field, dims), dims)


def vfoa_visible_luminaires(occupant: Occupant, scene: Scene,
                            accel: AccelIndex | None) -> set:
    """Ids of luminaires inside the occupant's gaze cone and actually visible."""
    cone = vfoa_of(occupant)
    out = set()
    for lum in scene.luminaires:
        if not cone.contains(lum.position):
            continue
        if accel is not None and accel.n and not accel.visible(
                cone.apex, lum.position):
            continue
        out.add(lum.id)
    return out
