"""Scale functions of spectrally negative Lévy processes and diffusions,
the exit functionals built from them, and Monte Carlo checks."""
from .diffusion import DiffusionScale, solve_psi, w_diff, z_diff
from .duality import DualPair, check_local_time_duality, check_scale_symmetry, reflect_model
from .exceptions import (ConfigError, DegenerateWindowError, GridError, InversionError,
                         ModelError, QuadratureError, RootBracketError, ScaleKitError)
from .exit import (DiffusionProvider, ExitSpec, LevyProvider, down_exit, green_density,
                   killed_resolvent, scale_provider, up_exit)
from .levy import LevyScale, laplace_check, resolvent_density, w, z
from .mc import (MCConfig, MCEstimate, estimate_down_exit, estimate_green_density,
                 estimate_up_exit, simulate_paths, simulate_to_exit)
from .models import (Coefficient, DiffusionModel, ExponentialJumps, FixedJumps, SNLPModel,
                     derive_scale_speed, phi, psi)
from .report import VerificationReport, VerificationRow

__version__ = "0.1.0"

__all__ = [
    "Coefficient", "DiffusionModel", "ExponentialJumps", "FixedJumps", "SNLPModel",
    "derive_scale_speed", "phi", "psi",
    "LevyScale", "w", "z", "resolvent_density", "laplace_check",
    "DiffusionScale", "solve_psi", "w_diff", "z_diff",
    "ExitSpec", "LevyProvider", "DiffusionProvider", "scale_provider", "up_exit",
    "down_exit", "green_density", "killed_resolvent",
    "MCConfig", "MCEstimate", "simulate_to_exit", "simulate_paths", "estimate_up_exit",
    "estimate_down_exit", "estimate_green_density",
    "DualPair", "reflect_model", "check_scale_symmetry", "check_local_time_duality",
    "VerificationReport", "VerificationRow",
    "ScaleKitError", "ModelError", "RootBracketError", "QuadratureError", "InversionError",
    "GridError", "DegenerateWindowError", "ConfigError",
]
