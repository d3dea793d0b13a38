"""Evaluation of luminaire intensity tables and luxmeter sensitivity curves.

Intensity tables are sampled on a polar grid (azimuth planes x polar angles)
and queried with bilinear interpolation.  The azimuth coordinate wraps at
360 degrees; polar angles past the last tabulated node read as zero, which
lets a table that stops at 90 degrees describe a downlight with no upward
spill.  Sensitivity curves are one-dimensional and clamp to zero at grazing
incidence (>= 90 degrees) and beyond their last node.
"""

from __future__ import annotations

import numpy as np

from .model import LightDistributionCurve, LuxmeterSensitivityCurve

__all__ = [
    "eval_ldc",
    "eval_ldc_angles",
    "eval_lsc",
    "intensity_toward",
]


def eval_ldc_angles(ldc: LightDistributionCurve, azimuth_deg, polar_deg):
    """Bilinear lookup of candela values at (azimuth, polar) angle pairs.

    Accepts scalars or equally shaped arrays, in degrees.  Azimuth is taken
    modulo 360 so any real value is a valid query.  Polar angles outside
    [0, last node] evaluate to 0.  Queries landing exactly on a table node
    reproduce the stored value.
    """
    az = np.mod(np.asarray(azimuth_deg, dtype=np.float64), 360.0)
    pol = np.asarray(polar_deg, dtype=np.float64)
    az, pol = np.broadcast_arrays(az, pol)
    scalar = az.ndim == 0
    az = np.atleast_1d(az).astype(np.float64)
    pol = np.atleast_1d(pol).astype(np.float64)

    pnodes = ldc.polar_deg
    anodes = ldc.azimuth_deg
    table = ldc.candela

    out = np.zeros(az.shape, dtype=np.float64)
    inside = (pol >= 0.0) & (pol <= pnodes[-1])
    if not np.any(inside):
        return float(out[0]) if scalar else out

    p = pol[inside]
    a = az[inside]

    if pnodes.size == 1:
        k0 = np.zeros(p.shape, dtype=np.intp)
        k1 = k0
        tp = np.zeros(p.shape)
    else:
        k0 = np.clip(np.searchsorted(pnodes, p, side="right") - 1, 0, pnodes.size - 2)
        k1 = k0 + 1
        tp = (p - pnodes[k0]) / (pnodes[k1] - pnodes[k0])

    if anodes.size == 1:
        v0 = table[0, k0]
        v1 = table[0, k1]
        vals = (1.0 - tp) * v0 + tp * v1
    else:
        # close the azimuth seam with a wrapped copy of the first plane
        anodes_ext = np.concatenate([anodes, [anodes[0] + 360.0]])
        table_ext = np.vstack([table, table[:1]])
        aq = np.where(a < anodes_ext[0], a + 360.0, a)
        j0 = np.clip(np.searchsorted(anodes_ext, aq, side="right") - 1, 0, anodes_ext.size - 2)
        j1 = j0 + 1
        ta = (aq - anodes_ext[j0]) / (anodes_ext[j1] - anodes_ext[j0])
        v00 = table_ext[j0, k0]
        v01 = table_ext[j0, k1]
        v10 = table_ext[j1, k0]
        v11 = table_ext[j1, k1]
        vals = (1.0 - ta) * ((1.0 - tp) * v00 + tp * v01) + ta * ((1.0 - tp) * v10 + tp * v11)

    out[inside] = vals
    return float(out[0]) if scalar else out


def eval_ldc(ldc: LightDistributionCurve, direction) -> float:
    """Candela emitted along a unit direction given in the luminaire frame.

    The emission axis is local +Z: polar angle is measured from it and
    azimuth from local +X toward +Y.
    """
    d = np.asarray(direction, dtype=np.float64)
    if d.ndim == 1:
        z = min(1.0, max(-1.0, float(d[2])))
        polar = np.degrees(np.arccos(z))
        azim = np.degrees(np.arctan2(d[1], d[0]))
        return float(eval_ldc_angles(ldc, azim, polar))
    z = np.clip(d[:, 2], -1.0, 1.0)
    polar = np.degrees(np.arccos(z))
    azim = np.degrees(np.arctan2(d[:, 1], d[:, 0]))
    return eval_ldc_angles(ldc, azim, polar)


def intensity_toward(luminaire, target) -> float:
    """Candela from a luminaire toward a world-space point (dim not applied)."""
    t = np.asarray(target, dtype=np.float64)
    offset = t - luminaire.position
    r = float(np.linalg.norm(offset))
    if r == 0.0:
        return 0.0
    local = luminaire.rotation.T @ (offset / r)
    return eval_ldc(luminaire.ldc, local)


def eval_lsc(lsc: LuxmeterSensitivityCurve, incidence_deg):
    """Directional weight of a luxmeter at the given incidence angle(s).

    Linear interpolation between nodes; zero at or past 90 degrees and
    beyond the last tabulated node.
    """
    theta = np.asarray(incidence_deg, dtype=np.float64)
    scalar = theta.ndim == 0
    theta = np.atleast_1d(theta)
    w = np.interp(theta, lsc.angles_deg, lsc.weight, left=lsc.weight[0], right=0.0)
    w = np.where(theta >= 90.0, 0.0, w)
    w = np.where(theta > lsc.angles_deg[-1], 0.0, w)
    return float(w[0]) if scalar else w
