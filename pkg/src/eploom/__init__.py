"""Loops around exceptional points of a driven non-Hermitian two-level system.

Submodules: ``nh_core`` (closed-form eigensystem), ``loops`` (parameter loops),
``evolve`` (state propagation and fidelities), ``topo`` (winding numbers),
``sense`` (susceptibilities), ``sweep`` (parameter-plane maps) and ``cli``.
"""

from . import errors, evolve, loops, nh_core, sense, sweep, topo
from .errors import EploomError
from .evolve import (
    IntegratorOpts,
    State,
    StateTrace,
    calibrate_omega,
    initial_eigenstate,
    propagate,
    transfer_fidelity,
)
from .loops import Direction, LoopSpec, PerturbationSpec, preset
from .nh_core import ParamPoint, eigensystem, energy_splitting, hamiltonian, is_ep
from .sense import chi_g0, chi_gamma0, eigenstate_susceptibility, splitting_landscape
from .sweep import GridSpec, MapResult, correlate, fidelity_map, winding_map
from .topo import encircles_ep, ep_locations, winding_number

__version__ = "0.1.0"

__all__ = [
    "Direction",
    "EploomError",
    "GridSpec",
    "IntegratorOpts",
    "LoopSpec",
    "MapResult",
    "ParamPoint",
    "PerturbationSpec",
    "State",
    "StateTrace",
    "calibrate_omega",
    "chi_g0",
    "chi_gamma0",
    "correlate",
    "eigensystem",
    "eigenstate_susceptibility",
    "encircles_ep",
    "energy_splitting",
    "ep_locations",
    "errors",
    "evolve",
    "fidelity_map",
    "hamiltonian",
    "initial_eigenstate",
    "is_ep",
    "loops",
    "nh_core",
    "preset",
    "propagate",
    "sense",
    "splitting_landscape",
    "sweep",
    "topo",
    "transfer_fidelity",
    "winding_map",
    "winding_number",
]
