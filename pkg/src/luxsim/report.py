"""Artifact writers: illumination maps, report tables and run summaries.

Every artifact starts with one header line carrying the tool version and a
digest of the run's input files, and contains nothing time-dependent, so a
rerun over identical inputs produces byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from . import __version__
from .errors import SceneFormatError, ValidationError

_MAP_COLUMNS = (
    "patch_id",
    "center_x", "center_y", "center_z",
    "normal_x", "normal_y", "normal_z",
    "area_m2", "exitance_lm_m2", "incident_lux",
)


def artifact_header(inputs_digest: str, comment: str = "#") -> str:
    """The provenance line embedded at the top of every artifact."""
    return f"{comment} luxsim {__version__} inputs=sha256:{inputs_digest}"


@dataclass(frozen=True)
class IlluminationMap:
    """Per-patch photometric summary of one solved configuration."""

    patch_ids: np.ndarray
    centers: np.ndarray  # (N, 3)
    normals: np.ndarray  # (N, 3)
    areas: np.ndarray
    exitance: np.ndarray  # lm/m^2 leaving each patch
    incident: np.ndarray  # lux arriving at each patch

    def __post_init__(self):
        n = len(self.patch_ids)
        shapes = {
            "centers": (self.centers, (n, 3)),
            "normals": (self.normals, (n, 3)),
            "areas": (self.areas, (n,)),
            "exitance": (self.exitance, (n,)),
            "incident": (self.incident, (n,)),
        }
        for name, (arr, want) in shapes.items():
            if arr.shape != want:
                raise ValidationError(f"{name} must have shape {want}, got {arr.shape}")
        for name in ("areas", "exitance", "incident"):
            arr = shapes[name][0]
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise ValidationError(f"{name} values must be finite and >= 0")

    @property
    def n_patches(self) -> int:
        return len(self.patch_ids)


def make_map(patches, exitance, incident) -> IlluminationMap:
    """Assemble the map record from scene patches and solved fields."""
    exitance = np.asarray(exitance, dtype=np.float64)
    incident = np.asarray(incident, dtype=np.float64)
    if len(patches) == 0:
        raise ValidationError("cannot map an empty scene")
    if exitance.shape != (len(patches),) or incident.shape != (len(patches),):
        raise ValidationError("field length does not match the patch count")
    return IlluminationMap(
        patch_ids=np.array([p.id for p in patches], dtype=np.int64),
        centers=np.array([p.center for p in patches]),
        normals=np.array([p.normal for p in patches]),
        areas=np.array([p.area for p in patches]),
        exitance=exitance,
        incident=incident,
    )


def map_to_csv(imap: IlluminationMap, inputs_digest: str) -> str:
    buf = io.StringIO()
    buf.write(artifact_header(inputs_digest) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_MAP_COLUMNS)
    for i in range(imap.n_patches):
        w.writerow(
            [int(imap.patch_ids[i])]
            + [repr(float(v)) for v in imap.centers[i]]
            + [repr(float(v)) for v in imap.normals[i]]
            + [repr(float(imap.areas[i])), repr(float(imap.exitance[i])),
               repr(float(imap.incident[i]))]
        )
    return buf.getvalue()


def map_from_csv(text: str) -> IlluminationMap:
    """Re-import of the CSV form; reproduces every float bitwise."""
    rows = [r for r in csv.reader(io.StringIO(text))
            if r and not r[0].startswith("#")]
    if not rows or tuple(rows[0]) != _MAP_COLUMNS:
        raise SceneFormatError("unrecognized map header row", where="line 2")
    data = rows[1:]
    if not data:
        raise SceneFormatError("map has no data rows", where="line 3")
    try:
        ids = np.array([int(r[0]) for r in data], dtype=np.int64)
        vals = np.array([[float(c) for c in r[1:]] for r in data])
    except (ValueError, IndexError) as e:
        raise SceneFormatError(f"bad map row: {e}")
    return IlluminationMap(
        patch_ids=ids, centers=vals[:, 0:3], normals=vals[:, 3:6],
        areas=vals[:, 6], exitance=vals[:, 7], incident=vals[:, 8],
    )


def map_to_ply(imap: IlluminationMap, patches, inputs_digest: str) -> str:
    """Quad mesh with a per-vertex lux attribute, 4 vertices per patch."""
    if len(patches) != imap.n_patches:
        raise ValidationError("patch list does not match the map")
    lines = [
        "ply",
        "format ascii 1.0",
        f"comment luxsim {__version__}",
        f"comment inputs=sha256:{inputs_digest}",
        f"element vertex {4 * imap.n_patches}",
        "property float x",
        "property float y",
        "property float z",
        "property float lux",
        f"element face {imap.n_patches}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    for i, p in enumerate(patches):
        hu = p.tangent_u * float(p.half_extents[0])
        hv = p.tangent_v * float(p.half_extents[1])
        lux = float(imap.incident[i])
        for su, sv in ((-1, -1), (1, -1), (1, 1), (-1, 1)):
            c = p.center + su * hu + sv * hv
            lines.append(f"{c[0]:.9g} {c[1]:.9g} {c[2]:.9g} {lux:.9g}")
    for i in range(imap.n_patches):
        v = 4 * i
        lines.append(f"4 {v} {v + 1} {v + 2} {v + 3}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# report tables


def _aligned(rows) -> str:
    """Right-align every column; first row is the header."""
    widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
    out = []
    for r in rows:
        out.append("  ".join(cell.rjust(w) for cell, w in zip(r, widths)))
    return "\n".join(out) + "\n"


def epsilon_table(estimates: dict, ground_truth: dict, inputs_digest: str) -> str:
    """Per-sensor estimate vs ground truth with the absolute error."""
    rows = [("sensor_id", "estimate_lux", "truth_lux", "epsilon_lux")]
    eps = []
    for sid in sorted(ground_truth):
        est = float(estimates[sid])
        gt = float(ground_truth[sid])
        e = abs(est - gt)
        eps.append(e)
        rows.append((str(sid), f"{est:.3f}", f"{gt:.3f}", f"{e:.3f}"))
    if eps:
        rows.append(("mean", "", "", f"{float(np.mean(eps)):.3f}"))
    return artifact_header(inputs_digest) + "\n" + _aligned(rows)


def scenario_table(results: dict, inputs_digest: str) -> str:
    """One row per scenario: worst lux drop, mean estimate error, watt savings."""
    rows = [("scenario", "dims", "delta_lux_max", "epsilon_mean", "delta_watt")]
    for name in sorted(results):
        r = results[name]
        dims = ",".join(f"{float(d):g}" for d in r.dims)
        worst = max(r.delta_lux.values()) if r.delta_lux else 0.0
        eps = (f"{float(np.mean(list(r.epsilon_est.values()))):.3f}"
               if r.epsilon_est else "-")
        rows.append((name, dims, f"{worst:.3f}", eps, f"{r.delta_watt:.1f}"))
    return artifact_header(inputs_digest) + "\n" + _aligned(rows)


def run_summary(command: str, inputs_digest: str, payload: dict) -> str:
    """Machine-readable record of one run: versioned, hashed, no timestamps."""
    doc = {
        "tool": "luxsim",
        "version": __version__,
        "inputs_sha256": inputs_digest,
        "command": command,
    }
    doc.update(payload)
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"
