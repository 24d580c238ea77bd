"""Spectra, Lyapunov exponents and mobility edges of one-dimensional quasiperiodic operators."""
from __future__ import annotations

__version__ = "0.1.0"

from .errors import BudgetError, ConvergenceError, DomainError, MobedgeError, SingularError
from .models import GOLDEN, GaaReduction, ModelSpec, closed_form_le, me_prediction, reduce_to_gaa
from .cocycle import BlockCocycle, OneStepCocycle, acceleration, lyapunov, rotation_number
from .spectrum import eigh, ids_table, sample_spectrum, thouless_le, truncation
from .phase import PhaseConfig, classify_energy, detect_me, sweep

__all__ = [
    "__version__",
    "MobedgeError", "DomainError", "SingularError", "ConvergenceError", "BudgetError",
    "GOLDEN", "ModelSpec", "GaaReduction", "closed_form_le", "me_prediction", "reduce_to_gaa",
    "OneStepCocycle", "BlockCocycle", "lyapunov", "acceleration", "rotation_number",
    "truncation", "eigh", "sample_spectrum", "ids_table", "thouless_le",
    "PhaseConfig", "classify_energy", "detect_me", "sweep",
]
