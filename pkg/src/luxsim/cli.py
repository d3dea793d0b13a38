"""Command-line front end: patchify, solve, simulate, optimize, evaluate, export.

One binary with a subcommand positional; every knob is settable by flag or
through a JSON run-config file, with explicit flags winning.  Artifacts are
written atomically, embed the tool version plus a digest of the input files,
and contain no timestamps, so identical inputs give byte-identical outputs
regardless of thread count.

Exit codes: 0 success, 1 usage, 2 input parse, 3 numeric failure,
4 infeasible budget.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import __version__
from .dimming import (
    DEFAULT_DELTA_MAX_LUX,
    DEFAULT_HOURS,
    DEFAULT_OVERHEAD_WATTS,
    DimmingConfig,
    contribution_matrix,
    evaluate_scenario,
    optimize_dims,
)
from .errors import (
    EmptyGeometryError,
    InfeasibleError,
    LuxsimError,
    NoDepthError,
    NoObservationError,
    SceneFormatError,
    SolverError,
    ValidationError,
)
from .engine import RadiosityEngine
from .model import Occupant, Scene, cosine_sensitivity
from .patchify import DEFAULT_PATCH_SIZE, patchify_depth
from .perception import (
    DEFAULT_N_RAYS,
    gaze_from_class,
    head_to_3d,
    ingest_detections,
    make_probe,
    probe_reading,
)
from .radiosity import DEFAULT_FF_SAMPLES
from .report import (
    artifact_header,
    epsilon_table,
    make_map,
    map_to_csv,
    map_to_ply,
    run_summary,
    scenario_table,
)
from .sceneio import (
    atomic_write_text,
    content_hash,
    load_depth,
    load_ground_truth,
    load_intrinsics,
    load_scene,
    scene_document,
)

OUTPUT_DIR_ENV = "LUXSIM_OUT"

COMMANDS = ("patchify", "solve", "simulate", "optimize", "evaluate", "export-map")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARSE = 2
EXIT_NUMERIC = 3
EXIT_INFEASIBLE = 4


class UsageError(LuxsimError):
    """Bad invocation: unknown flags, missing required flags, out-of-range knobs."""


@dataclass
class RunConfig:
    """Merged view of flags and the optional run-config file."""

    command: str
    scene: str | None = None
    detections: str | None = None
    ground_truth: str | None = None
    depth: str | None = None
    intrinsics: str | None = None
    out: str | None = None
    patch_size: float = DEFAULT_PATCH_SIZE
    ff_samples: int = DEFAULT_FF_SAMPLES
    rays: int = DEFAULT_N_RAYS
    delta_max: float = DEFAULT_DELTA_MAX_LUX
    mode: str = "binary"
    threads: int | None = None
    format: str = "csv"
    seq_id: int = 0
    albedo: float = 0.5
    overhead_watts: float = DEFAULT_OVERHEAD_WATTS
    hours: float = DEFAULT_HOURS

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.patch_size <= 0:
            raise UsageError("--patch-size must be positive")
        if self.ff_samples < 1:
            raise UsageError("--ff-samples must be >= 1")
        if self.rays < 1:
            raise UsageError("--rays must be >= 1")
        if self.delta_max < 0:
            raise UsageError("--delta-max must be >= 0")
        if self.mode not in ("binary", "continuous", "vfoa"):
            raise UsageError("--mode must be binary, continuous or vfoa")
        if self.threads is not None and self.threads < 1:
            raise UsageError("--threads must be >= 1")
        if self.format not in ("csv", "mesh"):
            raise UsageError("--format must be csv or mesh")
        if not 0.0 <= self.albedo < 1.0:
            raise UsageError("--albedo must lie in [0, 1)")
        if self.overhead_watts < 0:
            raise UsageError("--overhead-watts must be >= 0")
        if self.hours <= 0:
            raise UsageError("--hours must be positive")

    @property
    def output_dir(self) -> str:
        if self.out is not None:
            return self.out
        return os.environ.get(OUTPUT_DIR_ENV, ".")

    def require(self, **flags):
        for flag, value in flags.items():
            if value is None:
                raise UsageError(f"{self.command} requires --{flag.replace('_', '-')}")


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with code 2
        raise UsageError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="luxsim",
                description="Radiosity illumination maps, perceived-lux "
                            "simulation and luminaire dim planning.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--version", action="version", version=f"luxsim {__version__}")
    p.add_argument("--config", help="JSON file of defaults; explicit flags win")
    p.add_argument("--scene", help="scene document (JSON)")
    p.add_argument("--detections", help="per-frame detection records (JSONL)")
    p.add_argument("--ground-truth", help="reference readings (CSV sensor_id,lux)")
    p.add_argument("--depth", help="16-bit depth image (millimeters)")
    p.add_argument("--intrinsics", help="camera intrinsics sidecar (JSON)")
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_DIR_ENV} or .)")
    p.add_argument("--patch-size", type=float, default=DEFAULT_PATCH_SIZE,
                   help="patch edge length in meters")
    p.add_argument("--ff-samples", type=int, default=DEFAULT_FF_SAMPLES,
                   help="form-factor samples per patch")
    p.add_argument("--rays", type=int, default=DEFAULT_N_RAYS,
                   help="rays per simulated lux reading")
    p.add_argument("--delta-max", type=float, default=DEFAULT_DELTA_MAX_LUX,
                   help="per-occupant perceived drop budget in lux")
    p.add_argument("--mode", choices=("binary", "continuous", "vfoa"),
                   default="binary", help="dim selection strategy")
    p.add_argument("--threads", type=int, help="cap the worker pool")
    p.add_argument("--format", choices=("csv", "mesh"), default="csv",
                   help="export-map output format")
    p.add_argument("--seq-id", type=int, default=0,
                   help="deterministic ray-sequence index")
    p.add_argument("--albedo", type=float, default=0.5,
                   help="initial reflectance for patchified geometry")
    p.add_argument("--overhead-watts", type=float, default=DEFAULT_OVERHEAD_WATTS,
                   help="controller overhead added to the optimized load")
    p.add_argument("--hours", type=float, default=DEFAULT_HOURS,
                   help="duty period for the energy report")
    return p


def _load_config_file(path) -> dict:
    valid = {f.name for f in fields(RunConfig)} - {"command"}
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise SceneFormatError(f"bad run-config document: {e}", where=str(path))
    if not isinstance(doc, dict):
        raise SceneFormatError("run-config must be an object", where=str(path))
    unknown = sorted(set(doc) - valid)
    if unknown:
        raise SceneFormatError(f"unknown run-config keys {unknown}", where=str(path))
    return doc


def parse_args(argv) -> RunConfig:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.config:
        parser = _build_parser()
        parser.set_defaults(**_load_config_file(args.config))
        args = parser.parse_args(argv)
    values = {f.name: getattr(args, f.name) for f in fields(RunConfig)}
    return RunConfig(**values)


# ---------------------------------------------------------------------------
# shared helpers


_REQUIRED_PATHS = {
    "patchify": ("depth", "intrinsics"),
    "solve": ("scene",),
    "simulate": ("scene",),
    "optimize": ("scene",),
    "evaluate": ("scene", "ground_truth"),
    "export-map": ("scene",),
}


def _check_required(config: RunConfig):
    config.require(**{k: getattr(config, k) for k in _REQUIRED_PATHS[config.command]})
    if config.detections:
        config.require(depth=config.depth, intrinsics=config.intrinsics)


def _inputs_digest(config: RunConfig) -> str:
    paths = [p for p in (config.scene, config.detections, config.ground_truth,
                         config.depth, config.intrinsics) if p]
    return content_hash(*paths) if paths else content_hash()


def _load_scene_with_occupants(config: RunConfig) -> Scene:
    """The scene, with occupants rebuilt from detections when provided."""
    scene = load_scene(config.scene)
    if not config.detections:
        return scene
    with open(config.detections, encoding="utf-8") as fh:
        records = ingest_detections(fh.read())
    depth = load_depth(config.depth)
    camera = load_intrinsics(config.intrinsics)
    latest = {}
    for rec in records:  # records are frame-sorted: later frames win
        latest[rec.person_id] = rec
    lsc = cosine_sensitivity()
    occupants = []
    for pid in sorted(latest):
        rec = latest[pid]
        head = head_to_3d(rec, depth, camera)
        gaze = gaze_from_class(rec.pose_class, rec.n_classes)
        occupants.append(Occupant(id=int(pid), head_position=head, gaze=gaze,
                                  lsc=lsc))
    return Scene(patches=scene.patches, luminaires=scene.luminaires,
                 sensors=scene.sensors, occupants=occupants, camera=scene.camera)


def _scene_dims(scene: Scene) -> np.ndarray:
    return np.array([l.dim for l in scene.luminaires], dtype=np.float64)


def _solve(scene: Scene, config: RunConfig):
    engine = RadiosityEngine(n_samples=config.ff_samples)
    engine.fit(scene)
    return engine


def _write(path, text: str):
    atomic_write_text(path, text)
    return path


def _readings_csv(estimates: dict, digest: str) -> str:
    buf = io.StringIO()
    buf.write(artifact_header(digest) + "\n")
    buf.write("sensor_id,lux\n")
    for sid in sorted(estimates):
        buf.write(f"{int(sid)},{float(estimates[sid])!r}\n")
    return buf.getvalue()


def _dimming_config(config: RunConfig) -> DimmingConfig:
    mode = "vfoa_gated" if config.mode == "vfoa" else config.mode
    return DimmingConfig(delta_max_lux=config.delta_max, mode=mode,
                         overhead_watts=config.overhead_watts)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_patchify(config: RunConfig, digest: str, outdir: str):
    depth = load_depth(config.depth)
    camera = load_intrinsics(config.intrinsics)
    patches = patchify_depth(depth, camera, patch_size=config.patch_size,
                             albedo=config.albedo)
    scene = Scene(patches=patches, camera=camera)
    doc = scene_document(scene)
    doc["generator"] = {"tool": "luxsim", "version": __version__,
                        "inputs_sha256": digest}
    out = _write(os.path.join(outdir, "scene.json"),
                 json.dumps(doc, indent=2) + "\n")
    print(f"wrote {out} ({len(patches)} patches)")
    return EXIT_OK


def _cmd_solve(config: RunConfig, digest: str, outdir: str):
    scene = load_scene(config.scene)
    engine = _solve(scene, config)
    dims = _scene_dims(scene)
    sol = engine.solution(dims)
    imap = make_map(scene.patches, sol.B, engine.basis_.incident(dims))
    map_path = _write(os.path.join(outdir, "map.csv"), map_to_csv(imap, digest))
    summary = run_summary("solve", digest, {
        "n_patches": len(scene.patches),
        "dims": [float(d) for d in dims],
        "residual": float(sol.residual),
    })
    sum_path = _write(os.path.join(outdir, "solve.json"), summary)
    print(f"wrote {map_path} and {sum_path} (residual {sol.residual:.3e})")
    return EXIT_OK


def _cmd_simulate(config: RunConfig, digest: str, outdir: str):
    scene = load_scene(config.scene)
    if not scene.sensors:
        raise ValidationError("simulate needs at least one sensor in the scene")
    engine = _solve(scene, config)
    dims = _scene_dims(scene)
    B = engine.basis_.exitance(dims)
    estimates = {}
    for s in scene.sensors:
        probe = make_probe(scene, s.position, s.facing, s.lsc, engine.accel_,
                           n_rays=config.rays, seq_id=config.seq_id)
        estimates[s.id] = probe_reading(probe, B, dims).total
    csv_path = _write(os.path.join(outdir, "readings.csv"),
                      _readings_csv(estimates, digest))
    summary = run_summary("simulate", digest, {
        "dims": [float(d) for d in dims],
        "n_rays": config.rays,
        "readings": {str(k): float(v) for k, v in sorted(estimates.items())},
    })
    sum_path = _write(os.path.join(outdir, "simulate.json"), summary)
    print(f"wrote {csv_path} and {sum_path} ({len(estimates)} sensors)")
    return EXIT_OK


def _cmd_optimize(config: RunConfig, digest: str, outdir: str):
    scene = _load_scene_with_occupants(config)
    engine = _solve(scene, config)
    accel, basis = engine.accel_, engine.basis_
    contrib = contribution_matrix(scene, basis, accel, n_rays=config.rays,
                                  seq_id=config.seq_id)
    dcfg = _dimming_config(config)
    powers = np.array([l.power_watts for l in scene.luminaires])
    dims = optimize_dims(contrib, powers, dcfg, scene=scene, accel=accel)
    result = evaluate_scenario(scene, basis, dims, accel, config=dcfg,
                               n_rays=config.rays, seq_id=config.seq_id,
                               hours=config.hours)
    table = scenario_table({dcfg.mode: result}, digest)
    txt_path = _write(os.path.join(outdir, "scenario.txt"), table)
    summary = run_summary("optimize", digest, {
        "mode": dcfg.mode,
        "delta_max_lux": dcfg.delta_max_lux,
        "dims": [float(d) for d in dims],
        "delta_lux": {str(k): float(v) for k, v in sorted(result.delta_lux.items())},
        "delta_watt": result.delta_watt,
        "baseline_wh": result.energy.baseline_wh,
        "optimized_wh": result.energy.optimized_wh,
        "saving_fraction": result.energy.saving_fraction,
        "full_lit": [float(v) for v in contrib.full_lit],
    })
    sum_path = _write(os.path.join(outdir, "optimize.json"), summary)
    on = int(np.count_nonzero(dims))
    print(f"wrote {txt_path} and {sum_path} "
          f"({on}/{len(dims)} luminaires lit, {result.delta_watt:.1f} W saved)")
    return EXIT_OK


def _cmd_evaluate(config: RunConfig, digest: str, outdir: str):
    scene = _load_scene_with_occupants(config)
    truth = load_ground_truth(config.ground_truth)
    engine = _solve(scene, config)
    dims = _scene_dims(scene)
    result = evaluate_scenario(scene, engine.basis_, dims, engine.accel_,
                               config=_dimming_config(config),
                               ground_truth=truth, n_rays=config.rays,
                               seq_id=config.seq_id, hours=config.hours)
    table = epsilon_table(result.estimates, truth, digest)
    txt_path = _write(os.path.join(outdir, "epsilon.txt"), table)
    summary = run_summary("evaluate", digest, {
        "dims": [float(d) for d in dims],
        "estimates": {str(k): float(v) for k, v in sorted(result.estimates.items())},
        "epsilon": {str(k): float(v) for k, v in sorted(result.epsilon_est.items())},
        "delta_lux": {str(k): float(v) for k, v in sorted(result.delta_lux.items())},
        "delta_watt": result.delta_watt,
    })
    sum_path = _write(os.path.join(outdir, "evaluate.json"), summary)
    mean_eps = float(np.mean(list(result.epsilon_est.values())))
    print(f"wrote {txt_path} and {sum_path} (mean epsilon {mean_eps:.3f} lux)")
    return EXIT_OK


def _cmd_export_map(config: RunConfig, digest: str, outdir: str):
    scene = load_scene(config.scene)
    engine = _solve(scene, config)
    dims = _scene_dims(scene)
    imap = make_map(scene.patches, engine.basis_.exitance(dims),
                    engine.basis_.incident(dims))
    if config.format == "csv":
        out = _write(os.path.join(outdir, "map.csv"), map_to_csv(imap, digest))
    else:
        out = _write(os.path.join(outdir, "map.ply"),
                     map_to_ply(imap, scene.patches, digest))
    print(f"wrote {out} ({imap.n_patches} patches)")
    return EXIT_OK


_DISPATCH = {
    "patchify": _cmd_patchify,
    "solve": _cmd_solve,
    "simulate": _cmd_simulate,
    "optimize": _cmd_optimize,
    "evaluate": _cmd_evaluate,
    "export-map": _cmd_export_map,
}


def run(config: RunConfig) -> int:
    """Execute one command; artifacts land in the configured output directory."""
    if config.threads is not None:
        import numba

        # requests above the platform ceiling clamp; outputs are identical
        # for any thread count, so this only affects speed
        numba.set_num_threads(min(config.threads, numba.config.NUMBA_NUM_THREADS))
    _check_required(config)
    outdir = config.output_dir
    os.makedirs(outdir, exist_ok=True)
    digest = _inputs_digest(config)
    return _DISPATCH[config.command](config, digest, outdir)


def main(argv=None) -> int:
    try:
        config = parse_args(sys.argv[1:] if argv is None else argv)
        return run(config)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleError as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SolverError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SceneFormatError, ValidationError, EmptyGeometryError, NoDepthError,
            NoObservationError, FileNotFoundError, IsADirectoryError,
            PermissionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
