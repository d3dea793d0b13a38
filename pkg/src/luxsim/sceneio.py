"""File formats: scene documents, photometric curve tables, depth images.

The scene lives in a JSON document whose floats are written with shortest
round-trip precision, so load(save(scene)) reproduces every array bitwise.
Curve tables are plain CSV; depth images are 16-bit single-channel PNGs in
millimeters with a JSON intrinsics sidecar.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile

import numpy as np
from PIL import Image

from .errors import SceneFormatError, ValidationError
from .model import (
    CameraModel,
    DepthImage,
    LightDistributionCurve,
    Luminaire,
    LuxmeterSensitivityCurve,
    Occupant,
    Patch,
    Scene,
    Sensor,
)

SCHEMA_VERSION = 1
DEPTH_UNITS_PER_METER = 1000.0  # stored value 1 = one millimeter
_MAX_DEPTH_M = 65535 / DEPTH_UNITS_PER_METER


# ---------------------------------------------------------------------------
# low-level file plumbing


def atomic_write_bytes(path, data: bytes):
    """Write via a temp file + rename so readers never see partial output."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def atomic_write_text(path, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


def content_hash(*paths) -> str:
    """Hex digest identifying the byte content of the given input files."""
    h = hashlib.sha256()
    for p in paths:
        with open(p, "rb") as fh:
            h.update(fh.read())
    return h.hexdigest()


def _fmt(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# photometric curve tables


def save_ldc_csv(ldc: LightDistributionCurve, path):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["azimuth_deg"] + [_fmt(p) for p in ldc.polar_deg])
    for a, row in zip(ldc.azimuth_deg, ldc.candela):
        w.writerow([_fmt(a)] + [_fmt(c) for c in row])
    atomic_write_text(path, buf.getvalue())


def load_ldc_csv(path) -> LightDistributionCurve:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2 or len(rows[0]) < 2:
        raise SceneFormatError("distribution table needs a header row of polar "
                               "angles and at least one azimuth row", where=str(path))
    try:
        polar = np.array([float(c) for c in rows[0][1:]])
        azimuth = np.array([float(r[0]) for r in rows[1:]])
        candela = np.array([[float(c) for c in r[1:]] for r in rows[1:]])
    except (ValueError, IndexError) as e:
        raise SceneFormatError(f"bad distribution table cell: {e}", where=str(path))
    try:
        return LightDistributionCurve(polar, azimuth, candela)
    except ValidationError as e:
        raise SceneFormatError(str(e), where=str(path))


def save_lsc_csv(lsc: LuxmeterSensitivityCurve, path):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["angle_deg", "weight"])
    for a, s in zip(lsc.angles_deg, lsc.weight):
        w.writerow([_fmt(a), _fmt(s)])
    atomic_write_text(path, buf.getvalue())


def load_lsc_csv(path) -> LuxmeterSensitivityCurve:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if rows and rows[0] and rows[0][0].strip().lower() == "angle_deg":
        rows = rows[1:]
    if not rows:
        raise SceneFormatError("sensitivity table has no data rows", where=str(path))
    try:
        pairs = [(float(r[0]), float(r[1])) for r in rows]
    except (ValueError, IndexError) as e:
        raise SceneFormatError(f"bad sensitivity table row: {e}", where=str(path))
    try:
        return LuxmeterSensitivityCurve(np.array([p[0] for p in pairs]),
                                        np.array([p[1] for p in pairs]))
    except ValidationError as e:
        raise SceneFormatError(str(e), where=str(path))


# ---------------------------------------------------------------------------
# ground-truth table


def save_ground_truth(readings: dict, path):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sensor_id", "lux"])
    for sid in sorted(readings):
        w.writerow([int(sid), _fmt(readings[sid])])
    atomic_write_text(path, buf.getvalue())


def load_ground_truth(path) -> dict:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if rows and rows[0] and rows[0][0].strip().lower() == "sensor_id":
        rows = rows[1:]
    out = {}
    for i, r in enumerate(rows, start=1):
        try:
            out[int(r[0])] = float(r[1])
        except (ValueError, IndexError) as e:
            raise SceneFormatError(f"bad reading row: {e}", where=f"{path}: row {i}")
    return out


# ---------------------------------------------------------------------------
# depth images


def save_depth(depth: DepthImage, path):
    d = depth.depth
    if float(d.max(initial=0.0)) > _MAX_DEPTH_M:
        raise ValidationError(
            f"depth exceeds {_MAX_DEPTH_M:.3f} m, not representable in 16-bit millimeters"
        )
    mm = np.round(d * DEPTH_UNITS_PER_METER).astype(np.uint16)
    img = Image.fromarray(mm)  # uint16 input selects the 16-bit single-channel mode
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def load_depth(path) -> DepthImage:
    img = Image.open(path)
    if img.mode not in ("I;16", "I", "I;16B"):
        raise SceneFormatError(f"expected a 16-bit single-channel image, got mode "
                               f"{img.mode!r}", where=str(path))
    mm = np.asarray(img, dtype=np.float64)
    return DepthImage(mm / DEPTH_UNITS_PER_METER)


def save_intrinsics(camera: CameraModel, path):
    atomic_write_text(path, json.dumps(_camera_out(camera), indent=2) + "\n")


def load_intrinsics(path) -> CameraModel:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise SceneFormatError(f"bad intrinsics document: {e}", where=str(path))
    return _camera_in(doc, "camera")


# ---------------------------------------------------------------------------
# scene documents


def _camera_out(c: CameraModel) -> dict:
    return {
        "fx": float(c.fx), "fy": float(c.fy), "cx": float(c.cx), "cy": float(c.cy),
        "rotation": c.rotation.tolist(), "translation": c.translation.tolist(),
    }


def _curve_out(obj) -> dict:
    if isinstance(obj, LightDistributionCurve):
        return {"polar_deg": obj.polar_deg.tolist(),
                "azimuth_deg": obj.azimuth_deg.tolist(),
                "candela": obj.candela.tolist()}
    return {"angles_deg": obj.angles_deg.tolist(), "weight": obj.weight.tolist()}


def scene_document(scene: Scene) -> dict:
    """The JSON-ready dict form of a scene (curves inlined)."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "patches": [
            {"id": int(p.id), "center": p.center.tolist(), "normal": p.normal.tolist(),
             "tangent_u": p.tangent_u.tolist(), "tangent_v": p.tangent_v.tolist(),
             "half_extents": p.half_extents.tolist(), "albedo": float(p.albedo)}
            for p in scene.patches
        ],
        "luminaires": [
            {"id": int(l.id), "position": l.position.tolist(),
             "rotation": l.rotation.tolist(), "ldc": _curve_out(l.ldc),
             "power_watts": float(l.power_watts), "dim": float(l.dim)}
            for l in scene.luminaires
        ],
        "sensors": [
            {"id": int(s.id), "position": s.position.tolist(),
             "facing": s.facing.tolist(), "lsc": _curve_out(s.lsc), "role": s.role}
            for s in scene.sensors
        ],
        "occupants": [
            {"id": int(o.id), "head_position": o.head_position.tolist(),
             "gaze": o.gaze.tolist(), "lsc": _curve_out(o.lsc),
             "vfoa_aperture_deg": float(o.vfoa_aperture_deg)}
            for o in scene.occupants
        ],
        "camera": _camera_out(scene.camera) if scene.camera is not None else None,
    }
    return doc


def save_scene(scene: Scene, path):
    atomic_write_text(path, json.dumps(scene_document(scene), indent=2) + "\n")


def _req(obj: dict, key: str, where: str):
    if key not in obj:
        raise SceneFormatError("missing field", where=f"{where}.{key}")
    return obj[key]


def _camera_in(doc, where: str) -> CameraModel:
    if not isinstance(doc, dict):
        raise SceneFormatError("camera must be an object", where=where)
    try:
        return CameraModel(
            fx=float(_req(doc, "fx", where)), fy=float(_req(doc, "fy", where)),
            cx=float(_req(doc, "cx", where)), cy=float(_req(doc, "cy", where)),
            rotation=np.array(doc.get("rotation", np.eye(3).tolist())),
            translation=np.array(doc.get("translation", [0.0, 0.0, 0.0])),
        )
    except (ValidationError, ValueError, TypeError) as e:
        if isinstance(e, SceneFormatError):
            raise
        raise SceneFormatError(str(e), where=where)


def _ldc_in(value, where: str, base_dir) -> LightDistributionCurve:
    if isinstance(value, str):
        return load_ldc_csv(os.path.join(base_dir, value))
    if not isinstance(value, dict):
        raise SceneFormatError("expected an inline curve object or a file path",
                               where=where)
    try:
        return LightDistributionCurve(
            polar_deg=np.array(_req(value, "polar_deg", where)),
            azimuth_deg=np.array(_req(value, "azimuth_deg", where)),
            candela=np.array(_req(value, "candela", where)),
        )
    except (ValidationError, ValueError, TypeError) as e:
        if isinstance(e, SceneFormatError):
            raise
        raise SceneFormatError(str(e), where=where)


def _lsc_in(value, where: str, base_dir) -> LuxmeterSensitivityCurve:
    if isinstance(value, str):
        return load_lsc_csv(os.path.join(base_dir, value))
    if not isinstance(value, dict):
        raise SceneFormatError("expected an inline curve object or a file path",
                               where=where)
    try:
        return LuxmeterSensitivityCurve(
            angles_deg=np.array(_req(value, "angles_deg", where)),
            weight=np.array(_req(value, "weight", where)),
        )
    except (ValidationError, ValueError, TypeError) as e:
        if isinstance(e, SceneFormatError):
            raise
        raise SceneFormatError(str(e), where=where)


def _entity_in(ctor, where: str, **fields):
    try:
        return ctor(**fields)
    except (ValidationError, ValueError, TypeError) as e:
        raise SceneFormatError(str(e), where=where)


def scene_from_document(doc: dict, base_dir=".") -> Scene:
    """Parse the dict form; curve file references resolve against base_dir."""
    if not isinstance(doc, dict):
        raise SceneFormatError("scene document must be an object", where="$")
    version = _req(doc, "schema_version", "$")
    if version != SCHEMA_VERSION:
        raise SceneFormatError(f"unsupported schema_version {version!r} "
                               f"(expected {SCHEMA_VERSION})", where="$.schema_version")

    patches = []
    for i, p in enumerate(doc.get("patches", [])):
        where = f"patches[{i}]"
        patches.append(_entity_in(
            Patch, where,
            id=int(_req(p, "id", where)), center=np.array(_req(p, "center", where)),
            normal=np.array(_req(p, "normal", where)),
            tangent_u=np.array(_req(p, "tangent_u", where)),
            tangent_v=np.array(_req(p, "tangent_v", where)),
            half_extents=np.array(_req(p, "half_extents", where)),
            albedo=float(_req(p, "albedo", where)),
        ))

    luminaires = []
    for i, l in enumerate(doc.get("luminaires", [])):
        where = f"luminaires[{i}]"
        ldc = _ldc_in(_req(l, "ldc", where), f"{where}.ldc", base_dir)
        luminaires.append(_entity_in(
            Luminaire, where,
            id=int(_req(l, "id", where)), position=np.array(_req(l, "position", where)),
            rotation=np.array(l.get("rotation", np.eye(3).tolist())), ldc=ldc,
            power_watts=float(_req(l, "power_watts", where)),
            dim=float(l.get("dim", 1.0)),
        ))

    sensors = []
    for i, s in enumerate(doc.get("sensors", [])):
        where = f"sensors[{i}]"
        lsc = _lsc_in(_req(s, "lsc", where), f"{where}.lsc", base_dir)
        sensors.append(_entity_in(
            Sensor, where,
            id=int(_req(s, "id", where)), position=np.array(_req(s, "position", where)),
            facing=np.array(_req(s, "facing", where)), lsc=lsc,
            role=s.get("role", "spatial"),
        ))

    occupants = []
    for i, o in enumerate(doc.get("occupants", [])):
        where = f"occupants[{i}]"
        lsc = _lsc_in(_req(o, "lsc", where), f"{where}.lsc", base_dir)
        occupants.append(_entity_in(
            Occupant, where,
            id=int(_req(o, "id", where)),
            head_position=np.array(_req(o, "head_position", where)),
            gaze=np.array(_req(o, "gaze", where)), lsc=lsc,
            vfoa_aperture_deg=float(o.get("vfoa_aperture_deg", 30.0)),
        ))

    camera = doc.get("camera")
    cam = _camera_in(camera, "camera") if camera is not None else None
    try:
        return Scene(patches=patches, luminaires=luminaires, sensors=sensors,
                     occupants=occupants, camera=cam)
    except ValidationError as e:
        raise SceneFormatError(str(e), where="$")


def load_scene(path) -> Scene:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise SceneFormatError(f"bad scene document: {e}", where=str(path))
    return scene_from_document(doc, base_dir=os.path.dirname(os.path.abspath(path)))
