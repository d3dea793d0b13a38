"""Minimum-power dim selection under a per-occupant perceived-lux budget.

The perceived reading is linear in the dim vector, so one contribution matrix
(occupants x luminaires, measured once with shared ray sequences) turns the
selection into a small constrained minimization: keep every occupant's drop
from the full-lit reading within the budget while spending as little
electrical power as possible.  Binary mode enumerates switch states exactly
as the reference scenarios do; continuous mode relaxes to a linear program;
gated mode keeps only luminaires inside somebody's viewing cone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .accel import AccelIndex
from .errors import InfeasibleError, SolverError, ValidationError
from .model import Scene
from .perception import DEFAULT_N_RAYS, make_probe, probe_reading, vfoa_visible_luminaires
from .radiosity import LuminaireBasis

DEFAULT_DELTA_MAX_LUX = 200.0
DEFAULT_OVERHEAD_WATTS = 65.0
DEFAULT_HOURS = 24.0

_MODES = ("binary", "continuous", "vfoa_gated")
_FEAS_EPS = 1e-9  # slack applied when testing a drop against the budget
_MAX_BINARY = 16


@dataclass(frozen=True)
class DimmingConfig:
    """Selection knobs: budget, strategy, controller overhead, tie rule."""

    delta_max_lux: float = DEFAULT_DELTA_MAX_LUX
    mode: str = "binary"
    overhead_watts: float = DEFAULT_OVERHEAD_WATTS
    tie_break: str = "lexicographic"

    def __post_init__(self):
        if self.delta_max_lux < 0:
            raise ValidationError("delta_max_lux must be >= 0")
        if self.mode not in _MODES:
            raise ValidationError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if self.overhead_watts < 0:
            raise ValidationError("overhead_watts must be >= 0")
        if self.tie_break != "lexicographic":
            raise ValidationError("only lexicographic-by-luminaire-id ties are supported")


@dataclass(frozen=True)
class ContributionMatrix:
    """A[k][l] = lux perceived by occupant k from luminaire l alone at dim 1."""

    A: np.ndarray
    full_lit: np.ndarray
    occupant_ids: tuple = ()
    luminaire_ids: tuple = ()

    def __post_init__(self):
        A = np.asarray(self.A, dtype=np.float64)
        full = np.asarray(self.full_lit, dtype=np.float64)
        if A.ndim != 2:
            raise ValidationError("contribution matrix must be 2-d")
        if full.shape != (A.shape[0],):
            raise ValidationError("full_lit length must match the occupant count")
        if np.any(A < 0) or np.any(full < 0):
            raise ValidationError("perceived contributions must be >= 0")
        sums = A.sum(axis=1)
        tol = 1e-9 * np.maximum(1.0, np.abs(full))
        if np.any(np.abs(sums - full) > tol):
            k = int(np.argmax(np.abs(sums - full)))
            raise ValidationError(
                f"occupant row {k}: contributions sum to {sums[k]!r} but "
                f"full-lit reading is {full[k]!r} (shared-sequence linearity broken)"
            )
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "full_lit", full)
        object.__setattr__(self, "occupant_ids", tuple(self.occupant_ids))
        object.__setattr__(self, "luminaire_ids", tuple(self.luminaire_ids))

    @property
    def n_occupants(self) -> int:
        return self.A.shape[0]

    @property
    def n_luminaires(self) -> int:
        return self.A.shape[1]

    def drops(self, dims) -> np.ndarray:
        """Per-occupant drop from the full-lit reading under `dims`."""
        return self.full_lit - self.A @ np.asarray(dims, dtype=np.float64)


@dataclass(frozen=True)
class EnergyReport:
    """Daily energy bookkeeping for one dim configuration."""

    baseline_wh: float
    optimized_wh: float
    delta_watt: float
    saving_fraction: float
    hours: float
    overhead_watts: float


@dataclass(frozen=True)
class ScenarioResult:
    """Everything reported about one evaluated dim configuration."""

    dims: np.ndarray
    delta_lux: dict  # occupant id -> drop vs full-lit, lux
    delta_watt: float
    energy: EnergyReport
    estimates: dict = field(default_factory=dict)  # sensor id -> simulated lux
    epsilon_est: dict | None = None  # sensor id -> |estimate - ground truth|

    @property
    def energy_day_wh(self) -> float:
        return self.energy.optimized_wh


# ---------------------------------------------------------------------------
# contribution matrix


def contribution_matrix(scene: Scene, basis: LuminaireBasis,
                        accel: AccelIndex | None,
                        n_rays: int = DEFAULT_N_RAYS, seq_id: int = 0,
                        include_direct: bool = True) -> ContributionMatrix:
    """Measure each occupant's per-luminaire lux with one shared ray set.

    Reusing a single probe per occupant across all columns makes the matrix
    exactly consistent with the full-lit reading (linearity to float
    precision), which the selection step depends on.
    """
    if not scene.occupants:
        raise ValidationError("contribution matrix needs at least one occupant")
    n_lum = len(scene.luminaires)
    A = np.zeros((len(scene.occupants), n_lum))
    full = np.zeros(len(scene.occupants))
    for k, occ in enumerate(scene.occupants):
        probe = make_probe(scene, occ.head_position, occ.gaze, occ.lsc, accel,
                           n_rays=n_rays, seq_id=seq_id,
                           include_direct=include_direct)
        for l in range(n_lum):
            unit = np.zeros(n_lum)
            unit[l] = 1.0
            A[k, l] = probe_reading(probe, basis.exitance(unit), unit).total
        ones = np.ones(n_lum)
        full[k] = probe_reading(probe, basis.exitance(ones), ones).total
    return ContributionMatrix(
        A=A, full_lit=full,
        occupant_ids=tuple(o.id for o in scene.occupants),
        luminaire_ids=tuple(l.id for l in scene.luminaires),
    )


# ---------------------------------------------------------------------------
# dim selection


def _binary_search_exhaustive(A, full_lit, powers, delta_max):
    n_occ, n_lum = A.shape
    if n_lum > _MAX_BINARY:
        raise ValidationError(
            f"binary mode enumerates 2^L states and is capped at L = {_MAX_BINARY}"
        )
    m = 1 << n_lum
    masks = np.arange(m, dtype=np.uint32)
    # column l holds dim of luminaire l; bit order chosen so rows enumerate
    # lexicographically ascending dim vectors
    d_all = ((masks[:, None] >> (n_lum - 1 - np.arange(n_lum))) & 1).astype(np.float64)

    # accumulate left to right over luminaire index so every float matches a
    # sequential per-term evaluation, keeping exact-tie comparisons portable
    cost = np.zeros(m)
    for l in range(n_lum):
        cost += powers[l] * d_all[:, l]
    feasible = np.ones(m, dtype=bool)
    for k in range(n_occ):
        acc = np.zeros(m)
        for l in range(n_lum):
            acc += A[k, l] * d_all[:, l]
        feasible &= (full_lit[k] - acc) <= delta_max + _FEAS_EPS
    if not np.any(feasible):
        raise SolverError("no feasible on/off configuration (full-lit should always be)")
    idx = np.nonzero(feasible)[0]
    keys = tuple(d_all[idx, l] for l in range(n_lum - 1, -1, -1)) + (cost[idx],)
    order = np.lexsort(keys)
    return d_all[idx[order[0]]].copy()


def _continuous_lp(A, full_lit, powers, delta_max):
    n_lum = A.shape[1]
    res = linprog(
        c=powers,
        A_ub=-A,
        b_ub=delta_max - full_lit,
        bounds=[(0.0, 1.0)] * n_lum,
        method="highs",
    )
    if not res.success:
        raise SolverError(f"dim selection LP failed: {res.message}")
    return np.clip(res.x, 0.0, 1.0)


def _vfoa_gate(contribution, scene, accel, delta_max):
    keep = set()
    for occ in scene.occupants:
        keep |= vfoa_visible_luminaires(occ, scene, accel)
    dims = np.array([1.0 if lum.id in keep else 0.0 for lum in scene.luminaires])
    drops = contribution.drops(dims)
    worst = int(np.argmax(drops))
    if drops[worst] > delta_max + _FEAS_EPS:
        occ_id = (contribution.occupant_ids[worst]
                  if contribution.occupant_ids else worst)
        raise InfeasibleError(occ_id, float(drops[worst]), delta_max)
    return dims


def optimize_dims(contribution: ContributionMatrix, powers,
                  config: DimmingConfig = DimmingConfig(),
                  scene: Scene | None = None,
                  accel: AccelIndex | None = None) -> np.ndarray:
    """Choose the cheapest dim vector keeping every occupant inside budget."""
    powers = np.asarray(powers, dtype=np.float64)
    if powers.shape != (contribution.n_luminaires,):
        raise ValidationError(
            f"powers length {powers.shape} does not match "
            f"{contribution.n_luminaires} luminaires"
        )
    if np.any(powers < 0):
        raise ValidationError("powers must be >= 0")
    if config.mode == "binary":
        return _binary_search_exhaustive(contribution.A, contribution.full_lit,
                                         powers, config.delta_max_lux)
    if config.mode == "continuous":
        return _continuous_lp(contribution.A, contribution.full_lit,
                              powers, config.delta_max_lux)
    if scene is None:
        raise ValidationError("vfoa_gated mode needs the scene for cone membership")
    return _vfoa_gate(contribution, scene, accel, config.delta_max_lux)


# ---------------------------------------------------------------------------
# energy and scenario accounting


def energy_report(dims, powers, hours: float = DEFAULT_HOURS,
                  config: DimmingConfig = DimmingConfig()) -> EnergyReport:
    """Daily (or `hours`-long) energy use of a dim configuration.

    Sums use compensated summation so the figures for the reference scene
    land on the exact published values.
    """
    if hours <= 0:
        raise ValidationError("hours must be positive")
    dims = np.asarray(dims, dtype=np.float64)
    powers = np.asarray(powers, dtype=np.float64)
    if dims.shape != powers.shape:
        raise ValidationError("dims and powers must have matching lengths")
    total_watts = math.fsum(powers)
    lit_watts = math.fsum(p * d for p, d in zip(powers, dims))
    delta_watt = math.fsum(p * (1.0 - d) for p, d in zip(powers, dims))
    baseline_wh = total_watts * hours
    optimized_wh = (lit_watts + config.overhead_watts) * hours
    saving = 1.0 - optimized_wh / baseline_wh if baseline_wh > 0 else 0.0
    return EnergyReport(
        baseline_wh=baseline_wh,
        optimized_wh=optimized_wh,
        delta_watt=delta_watt,
        saving_fraction=saving,
        hours=hours,
        overhead_watts=config.overhead_watts,
    )


def evaluate_scenario(scene: Scene, basis: LuminaireBasis, dims,
                      accel: AccelIndex | None,
                      config: DimmingConfig = DimmingConfig(),
                      ground_truth: dict | None = None,
                      n_rays: int = DEFAULT_N_RAYS, seq_id: int = 0,
                      hours: float = DEFAULT_HOURS,
                      include_direct: bool = True) -> ScenarioResult:
    """Simulate every sensor under `dims` and assemble the report record."""
    dims = np.asarray(dims, dtype=np.float64)
    sensor_ids = {s.id for s in scene.sensors}
    if ground_truth:
        unknown = sorted(set(ground_truth) - sensor_ids)
        if unknown:
            raise ValidationError(f"ground truth names unknown sensor ids {unknown}")

    B = basis.exitance(dims)
    estimates = {}
    for s in scene.sensors:
        probe = make_probe(scene, s.position, s.facing, s.lsc, accel,
                           n_rays=n_rays, seq_id=seq_id,
                           include_direct=include_direct)
        estimates[s.id] = probe_reading(probe, B, dims).total

    ones = np.ones(len(scene.luminaires))
    B_full = basis.exitance(ones)
    delta_lux = {}
    for occ in scene.occupants:
        probe = make_probe(scene, occ.head_position, occ.gaze, occ.lsc, accel,
                           n_rays=n_rays, seq_id=seq_id,
                           include_direct=include_direct)
        now = probe_reading(probe, B, dims).total
        ref = probe_reading(probe, B_full, ones).total
        delta_lux[occ.id] = ref - now

    powers = np.array([l.power_watts for l in scene.luminaires])
    energy = energy_report(dims, powers, hours=hours, config=config)
    epsilon = None
    if ground_truth is not None:
        epsilon = {sid: abs(estimates[sid] - float(gt))
                   for sid, gt in ground_truth.items()}
    return ScenarioResult(
        dims=dims,
        delta_lux=delta_lux,
        delta_watt=energy.delta_watt,
        energy=energy,
        estimates=estimates,
        epsilon_est=epsilon,
    )


class DimOptimizer(BaseEstimator):
    """Estimator wrapper: fit() measures contributions and picks the dims."""

    def __init__(self, delta_max_lux=DEFAULT_DELTA_MAX_LUX, mode="binary",
                 overhead_watts=DEFAULT_OVERHEAD_WATTS, n_rays=DEFAULT_N_RAYS,
                 seq_id=0, include_direct=True, hours=DEFAULT_HOURS):
        self.delta_max_lux = delta_max_lux
        self.mode = mode
        self.overhead_watts = overhead_watts
        self.n_rays = n_rays
        self.seq_id = seq_id
        self.include_direct = include_direct
        self.hours = hours

    def _config(self) -> DimmingConfig:
        return DimmingConfig(delta_max_lux=self.delta_max_lux, mode=self.mode,
                             overhead_watts=self.overhead_watts)

    def fit(self, scene: Scene, basis: LuminaireBasis,
            accel: AccelIndex | None = None):
        config = self._config()
        self.contribution_ = contribution_matrix(
            scene, basis, accel, n_rays=self.n_rays, seq_id=self.seq_id,
            include_direct=self.include_direct)
        self.powers_ = np.array([l.power_watts for l in scene.luminaires])
        self.dims_ = optimize_dims(self.contribution_, self.powers_, config,
                                   scene=scene, accel=accel)
        self.energy_ = energy_report(self.dims_, self.powers_, hours=self.hours,
                                     config=config)
        return self

    def predict(self, X=None) -> np.ndarray:
        if not hasattr(self, "dims_"):
            raise NotFittedError("call fit(scene, basis) first")
        return self.dims_
