"""Hamiltonian of a Delta-type qutrit coupled to two resonators.

Units: hbar = 1 and every frequency is in units of the mode-a frequency.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, field

import numpy as np

from .hilbert import PAIRS, BasisSpec, _embed, _qutrit_local, _destroy


@dataclass(frozen=True)
class SystemParams:
    omega_a: float = 1.0
    omega_b: float = 1.7
    omega_eg: float = 2.0
    omega_fg: float = 3.4
    g_a: float = 0.05
    g_b: float = 0.05
    theta: float = 0.0
    g_ab: float = 0.0
    # optional per-transition overrides, e.g. {"fe": (g_a, g_b)}
    transition_couplings: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.omega_a <= 0 or self.omega_b <= 0:
            raise ValueError("mode frequencies must be positive")
        if self.omega_eg < 0:
            raise ValueError("omega_eg must be non-negative")
        if min(self.g_a, self.g_b, self.g_ab) < 0:
            raise ValueError("couplings must be non-negative")
        for pair in self.transition_couplings:
            if pair not in PAIRS:
                raise ValueError(f"unknown transition {pair!r}")
        if self.omega_fg < self.omega_eg:
            warnings.warn(
                f"level order inverted: omega_fg={self.omega_fg} < omega_eg={self.omega_eg}",
                stacklevel=3,
            )

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    def couplings(self, pair: str) -> tuple[float, float]:
        return self.transition_couplings.get(pair, (self.g_a, self.g_b))

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if not d["transition_couplings"]:
            d.pop("transition_couplings")
        return d


def build_h0(params: SystemParams, spec: BasisSpec) -> np.ndarray:
    n_a, n_b = spec.photon_numbers
    level_energy = np.array([0.0, params.omega_eg, params.omega_fg])
    diag = params.omega_a * n_a + params.omega_b * n_b + level_energy[spec.level_index]
    return np.diag(diag).astype(complex)


def _quadratures(spec: BasisSpec) -> tuple[np.ndarray, np.ndarray]:
    da, db = _destroy(spec.cutoff_a).real, _destroy(spec.cutoff_b).real
    return da + da.T, db + db.T


def build_v(params: SystemParams, spec: BasisSpec) -> np.ndarray:
    """Qutrit-resonator interaction with longitudinal/transversal mixing angle theta."""
    xa, xb = _quadratures(spec)
    c, s = np.cos(params.theta), np.sin(params.theta)
    ia, ib = np.eye(spec.cutoff_a + 1), np.eye(spec.cutoff_b + 1)
    v = np.zeros((spec.dim, spec.dim))
    for pair in PAIRS:
        ga, gb = params.couplings(pair)
        q = (c * _qutrit_local(pair, "sigma_x") + s * _qutrit_local(pair, "sigma_z")).real
        if ga:
            v += ga * np.kron(np.kron(xa, ib), q)
        if gb:
            v += gb * np.kron(np.kron(ia, xb), q)
    return v.astype(complex)


def build_crosstalk(params: SystemParams, spec: BasisSpec) -> np.ndarray:
    xa, xb = _quadratures(spec)
    return params.g_ab * _embed(spec, op_a=xa, op_b=xb)


def build_full(params: SystemParams, spec: BasisSpec, include_crosstalk: bool = True) -> np.ndarray:
    h = build_h0(params, spec) + build_v(params, spec)
    if include_crosstalk and params.g_ab:
        h = h + build_crosstalk(params, spec)
    return h
