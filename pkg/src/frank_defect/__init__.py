"""Zero-homogeneous O(2)-equivariant critical points of the Oseen-Frank energy."""

from ._backend import BACKEND
from .frank_core import (
    DirectorState,
    FrankConstants,
    K4Convention,
    coercivity_bounds,
    energy_density,
    full_el_residual,
)
from .profile_ode import (
    ProfileSolution,
    bracket_bounds,
    closed_form_one_constant,
    endpoint_rates,
    solve_branch,
    solve_profile,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DirectorState",
    "FrankConstants",
    "K4Convention",
    "ProfileSolution",
    "bracket_bounds",
    "closed_form_one_constant",
    "coercivity_bounds",
    "endpoint_rates",
    "energy_density",
    "full_el_residual",
    "solve_branch",
    "solve_profile",
]
