"""NOON-state generation with a Delta-type qutrit coupled to two resonators."""

from .dynamics import (DecoherenceRates, PulseSpec, apply_pulse, dressed_channels, evolve_lindblad,
                       evolve_unitary, noon_fidelity, state_fidelity)
from .hilbert import BasisSpec, BasisState, build_basis, mode_operator, qutrit_operator
from .model import SystemParams, build_full, build_h0, build_v
from .perturb import (Resonance, ResonanceKind, effective_coupling, path_sum_second_order,
                      path_sum_third_order, resonance_shift)
from .protocol import execute_plan, matched_gb, plan_noon
from .spectrum import diagonalize, find_avoided_crossing

__all__ = [
    "BasisSpec", "BasisState", "DecoherenceRates", "PulseSpec", "Resonance", "ResonanceKind",
    "SystemParams", "apply_pulse", "build_basis", "build_full", "build_h0", "build_v",
    "diagonalize", "dressed_channels", "effective_coupling", "evolve_lindblad", "evolve_unitary",
    "execute_plan", "find_avoided_crossing", "matched_gb", "mode_operator", "noon_fidelity",
    "path_sum_second_order", "path_sum_third_order", "plan_noon", "qutrit_operator",
    "resonance_shift", "state_fidelity",
]
