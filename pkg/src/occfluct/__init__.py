"""Occupation-time fluctuations of branching systems with infinite-variance branching.

Submodules
----------
stable_core       stable laws, motions, semigroup and potential operators
branching         the critical branching particle system and its occupation times
fluctuations      rescaled fluctuation fields and the dimension regimes
limit_processes   the limit processes (eta, xi, S'-valued stable motion) and constants
analysis          estimators and distribution comparisons
cli               the ``occfluct`` command
"""

__version__ = "0.1.0"

from .errors import (AccuracyError, DomainError, EstimationError, NumericError, OccFluctError,
                     RegimeError, ResourceError, UnsupportedError)
from .stable_core import MotionSpec, StableLawSpec
from .branching import Domain, OffspringLaw, SystemSpec
from .fluctuations import CRITICAL, INTERMEDIATE, LARGE, RegimePlan, classify_regime
from .limit_processes import LimitProcess, eta_path, theorem_constants, xi_charfn
from .config import ScenarioConfig, load_config

__all__ = [
    "__version__",
    "OccFluctError", "DomainError", "UnsupportedError", "RegimeError", "NumericError",
    "AccuracyError", "EstimationError", "ResourceError",
    "MotionSpec", "StableLawSpec", "Domain", "OffspringLaw", "SystemSpec",
    "INTERMEDIATE", "CRITICAL", "LARGE", "RegimePlan", "classify_regime",
    "LimitProcess", "eta_path", "theorem_constants", "xi_charfn",
    "ScenarioConfig", "load_config",
]
