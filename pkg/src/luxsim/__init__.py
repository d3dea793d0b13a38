"""luxsim: radiosity illumination maps, perceived-lux sensing, and dim planning."""

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
    cosine_sensitivity,
    isotropic_curve,
)
from .photometry import eval_ldc, eval_ldc_angles, eval_lsc, intensity_toward

__version__ = "0.1.0"

__all__ = [
    "CameraModel",
    "DepthImage",
    "EmptyGeometryError",
    "InfeasibleError",
    "LightDistributionCurve",
    "Luminaire",
    "LuxmeterSensitivityCurve",
    "LuxsimError",
    "NoDepthError",
    "NoObservationError",
    "Occupant",
    "Patch",
    "Scene",
    "SceneFormatError",
    "Sensor",
    "SolverError",
    "ValidationError",
    "cosine_sensitivity",
    "eval_ldc",
    "eval_ldc_angles",
    "eval_lsc",
    "intensity_toward",
    "isotropic_curve",
    "__version__",
]
