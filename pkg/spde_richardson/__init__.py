import os as _os
import sys as _sys
import json

from spde_richardson.utils import numpy_version_is_at_least

if not numpy_version_is_at_least("1.17"):
    print(
        "spde_richardson needs numpy>=1.17 for numpy.random.Generator. "
        "Make sure you don't have a file "
        'named \n"numpy.py" in your current directory.',
        file=_sys.stderr,
    )
    _sys.exit(1)

from spde_richardson.configure_numerics import configure_numerics
from spde_richardson.exceptions import (
    ConfigError,
    ExtrapolationError,
    FloorError,
    IntegrationError,
    OracleError,
    SpdeError,
    StencilError,
    StudyError,
)
from spde_richardson.grid import GridFunction, TorusGrid, apply_Lh, restrict
from spde_richardson.harness import StudyConfig, StudyReport, fit_order, run_study
from spde_richardson.integrator import SchemeConfig, Trajectory, integrate
from spde_richardson.noise import BrownianPath, sample_path
from spde_richardson.oracle import OracleProblem, fine_reference
from spde_richardson.problem import PRESETS, ProblemSpec, build_preset
from spde_richardson.richardson import (
    estimate_expansion_term,
    extrapolate,
    vandermonde_weights,
)
from spde_richardson.stencil import (
    PdeCoefficients,
    StencilSpec,
    StencilVector,
    build_diagdom_stencil,
    build_diagonal_stencil,
    build_explicit_stencil,
    validate_stencil,
)
from spde_richardson.weights import WeightSpec, choose_epsilon, transform_stencil

# Defines all exposed APIs of this package.
__all__ = [
    "configure_numerics",
    "ConfigError",
    "ExtrapolationError",
    "FloorError",
    "IntegrationError",
    "OracleError",
    "SpdeError",
    "StencilError",
    "StudyError",
    "GridFunction",
    "TorusGrid",
    "apply_Lh",
    "restrict",
    "StudyConfig",
    "StudyReport",
    "fit_order",
    "run_study",
    "SchemeConfig",
    "Trajectory",
    "integrate",
    "BrownianPath",
    "sample_path",
    "OracleProblem",
    "fine_reference",
    "PRESETS",
    "ProblemSpec",
    "build_preset",
    "estimate_expansion_term",
    "extrapolate",
    "vandermonde_weights",
    "PdeCoefficients",
    "StencilSpec",
    "StencilVector",
    "build_diagdom_stencil",
    "build_diagonal_stencil",
    "build_explicit_stencil",
    "validate_stencil",
    "WeightSpec",
    "choose_epsilon",
    "transform_stencil",
]

_basepath = _os.path.dirname(__file__)
_filepath = _os.path.abspath(_os.path.join(_basepath, "package-info.json"))
with open(_filepath) as f:
    package = json.load(f)

package_name = package["name"].replace(" ", "_").replace("-", "_")
__version__ = package["version"]
