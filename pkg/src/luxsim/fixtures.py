"""Built-in scenes: a closed validation cube and an eight-luminaire office.

The cube exists for enclosure checks (form-factor closure, uniform-field
symmetry).  The office is the reference scene for the energy and dimming
examples: a 6 x 4 x 3 m shoebox with a 2 x 4 ceiling grid of identical
downlights, a 3 x 3 spread of desk-height spatial sensors, and two seated
occupants whose eye positions carry gaze sensors.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

from .geometry import rotation_from_axis, rotation_z_to
from .model import (
    CameraModel,
    LightDistributionCurve,
    Luminaire,
    Occupant,
    Patch,
    Scene,
    Sensor,
    cosine_sensitivity,
)

__all__ = [
    "ROOM8_POWER_WATTS",
    "build_box_shell",
    "build_closed_cube",
    "build_room8",
    "led_downlight_curve",
    "packaged_data_path",
]


def packaged_data_path(name: str) -> str:
    """Filesystem path of a packaged data file (scene documents, curve tables)."""
    return str(resources.files("luxsim").joinpath("data", name))

ROOM8_POWER_WATTS = 96.8

# inward-facing frames for each wall of an axis-aligned box, arranged so
# tangent_u x tangent_v = normal holds without per-face fixups
_FACES = {
    "floor": (2, 0.0, (0, 0, 1), (1, 0, 0), (0, 1, 0)),
    "ceiling": (2, 1.0, (0, 0, -1), (1, 0, 0), (0, -1, 0)),
    "x0": (0, 0.0, (1, 0, 0), (0, 1, 0), (0, 0, 1)),
    "x1": (0, 1.0, (-1, 0, 0), (0, 1, 0), (0, 0, -1)),
    "y0": (1, 0.0, (0, 1, 0), (0, 0, 1), (1, 0, 0)),
    "y1": (1, 1.0, (0, -1, 0), (0, 0, 1), (-1, 0, 0)),
}


def build_box_shell(size=(1.0, 1.0, 1.0), patch_size=0.25, albedo=0.5,
                    origin=(0.0, 0.0, 0.0), id_start=0, faces=None):
    """Tile the inside of a box with rectangular patches.

    ``albedo`` is a scalar or a mapping from face name (floor, ceiling,
    x0, x1, y0, y1) to a value.  Faces are tiled with equal cells whose
    pitch is as close to ``patch_size`` as divides the span evenly.
    """
    size = np.asarray(size, dtype=float)
    origin = np.asarray(origin, dtype=float)
    if faces is None:
        faces = list(_FACES)
    patches = []
    pid = id_start
    for name in faces:
        fixed_axis, frac, n, tu, tv = _FACES[name]
        rho = albedo[name] if isinstance(albedo, dict) else albedo
        n = np.array(n, dtype=float)
        tu = np.array(tu, dtype=float)
        tv = np.array(tv, dtype=float)
        au = int(np.argmax(np.abs(tu)))
        av = int(np.argmax(np.abs(tv)))
        nu = max(1, round(size[au] / patch_size))
        nv = max(1, round(size[av] / patch_size))
        cu = size[au] / nu
        cv = size[av] / nv
        for i in range(nu):
            for j in range(nv):
                c = origin.copy()
                c[fixed_axis] += frac * size[fixed_axis]
                c[au] += (i + 0.5) * cu
                c[av] += (j + 0.5) * cv
                patches.append(Patch(
                    id=pid,
                    center=c,
                    normal=n,
                    tangent_u=tu,
                    tangent_v=tv,
                    half_extents=(cu / 2.0, cv / 2.0),
                    albedo=rho,
                ))
                pid += 1
    return patches


def build_closed_cube(side=1.0, patch_size=0.25, albedo=0.5):
    """Closed cube with inward normals; all faces share one albedo."""
    return build_box_shell(size=(side, side, side), patch_size=patch_size, albedo=albedo)


def led_downlight_curve(peak_candela=1000.0) -> LightDistributionCurve:
    """Rotationally symmetric wide-beam downlight, zero past 90 degrees."""
    polar = np.array([0.0, 15.0, 30.0, 45.0, 60.0, 75.0, 90.0])
    shape = np.array([1.0, 0.95, 0.85, 0.65, 0.40, 0.15, 0.0])
    return LightDistributionCurve(
        polar_deg=polar,
        azimuth_deg=np.array([0.0]),
        candela=(peak_candela * shape)[None, :],
    )


def build_room8(patch_size=0.5) -> Scene:
    """The reference office: 6 x 4 x 3 m, 8 downlights, 11 sensors, 2 occupants."""
    patches = build_box_shell(
        size=(6.0, 4.0, 3.0),
        patch_size=patch_size,
        albedo={"floor": 0.3, "ceiling": 0.7, "x0": 0.7, "x1": 0.7, "y0": 0.7, "y1": 0.7},
    )

    down = rotation_from_axis(np.array([0.0, 0.0, -1.0]))
    ldc = led_downlight_curve()
    luminaires = [
        Luminaire(
            id=k,
            position=np.array([0.75 + 1.5 * (k % 4), 1.0 + 2.0 * (k // 4), 2.85]),
            rotation=down,
            ldc=ldc,
            power_watts=ROOM8_POWER_WATTS,
        )
        for k in range(8)
    ]

    lsc = cosine_sensitivity()
    up = np.array([0.0, 0.0, 1.0])
    sensors = [
        Sensor(
            id=1 + ix + 3 * iy,
            position=np.array([1.5 + 1.5 * ix, 1.0 + 1.0 * iy, 0.75]),
            facing=up,
            lsc=lsc,
            role="spatial",
        )
        for iy in range(3)
        for ix in range(3)
    ]

    g2 = np.sqrt(0.5)
    occupants = [
        Occupant(
            id=1,
            head_position=np.array([2.0, 1.5, 1.2]),
            gaze=np.array([1.0, 0.0, 0.0]),
            lsc=lsc,
        ),
        Occupant(
            id=2,
            head_position=np.array([4.3, 2.6, 1.2]),
            gaze=np.array([-g2, g2, 0.0]),
            lsc=lsc,
        ),
    ]
    sensors += [
        Sensor(id=10, position=occupants[0].head_position, facing=occupants[0].gaze,
               lsc=lsc, role="gaze"),
        Sensor(id=11, position=occupants[1].head_position, facing=occupants[1].gaze,
               lsc=lsc, role="gaze"),
    ]

    camera = CameraModel(
        fx=525.0,
        fy=525.0,
        cx=319.5,
        cy=239.5,
        rotation=rotation_z_to(np.array([0.0, 0.6, -0.8])),
        translation=np.array([3.0, 0.2, 2.5]),
    )

    return Scene(
        patches=patches,
        luminaires=luminaires,
        sensors=sensors,
        occupants=occupants,
        camera=camera,
    )
