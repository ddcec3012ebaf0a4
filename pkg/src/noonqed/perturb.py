"""Effective couplings and resonance shifts for two- and three-photon resonances.

Closed forms are leading order in the qutrit-mode couplings and are evaluated
with the resonant spacing pinned to its bare value (``k * omega_mode``); the
other spacing is taken from ``params``.  ``path_sum_second_order`` and
``path_sum_third_order`` enumerate every intermediate bare state of a
truncated basis and serve as an independent check of the closed forms.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .hilbert import BasisSpec, BasisState
from .model import SystemParams


class ResonanceError(ValueError):
    """A perturbative denominator vanishes for the requested parameters."""


class Resonance(enum.Enum):
    TWO_PHOTON_A = "two_photon_a"  # |n0e> <-> |(n+2)0g>, tune omega_eg
    TWO_PHOTON_B = "two_photon_b"  # |0nf> <-> |0(n+2)g>, tune omega_fg
    THREE_PHOTON_A = "three_photon_a"  # |00e> <-> |30g>
    THREE_PHOTON_B = "three_photon_b"  # |00f> <-> |03g>

    @property
    def photons(self) -> int:
        return 2 if self.name.startswith("TWO") else 3

    @property
    def mode(self) -> str:
        return "a" if self.name.endswith("_A") else "b"

    @property
    def spacing(self) -> str:
        return "omega_eg" if self.mode == "a" else "omega_fg"


@dataclass(frozen=True)
class ResonanceKind:
    tag: Resonance
    n_offset: int = 0

    def __post_init__(self):
        if isinstance(self.tag, str):
            object.__setattr__(self, "tag", Resonance(self.tag))
        if self.n_offset < 0:
            raise ValueError("n_offset must be non-negative")
        if self.tag.photons == 3 and self.n_offset != 0:
            raise ValueError("three-photon resonances are only defined for n_offset = 0")

    def states(self) -> tuple[BasisState, BasisState]:
        """The (initial, final) bare pair coupled by this resonance."""
        n, k = self.n_offset, self.tag.photons
        if self.tag.mode == "a":
            return BasisState(n, 0, "e"), BasisState(n + k, 0, "g")
        return BasisState(0, n, "f"), BasisState(0, n + k, "g")


@dataclass(frozen=True)
class EffectiveResonance:
    kind: ResonanceKind
    coupling: float
    shift: float
    resonant_spacing: float


@dataclass(frozen=True)
class PathTerm:
    intermediates: tuple[BasisState, ...]
    amplitude: float


def _kind(kind) -> ResonanceKind:
    if isinstance(kind, ResonanceKind):
        return kind
    return ResonanceKind(Resonance(kind) if isinstance(kind, str) else kind)


def _inv(x: float, relation: str) -> float:
    if abs(x) < 1e-12:
        raise ResonanceError(f"resonant denominator: {relation} = {x:.3e}")
    return 1.0 / x


def _require_theta_zero(p: SystemParams, kind: ResonanceKind):
    if kind.tag.photons == 3 and abs(math.sin(p.theta)) > 1e-12:
        raise ValueError("three-photon closed forms assume purely transversal coupling (theta = 0)")


def _unpack(p: SystemParams):
    return p.omega_a, p.omega_b, p.omega_eg, p.omega_fg, math.cos(p.theta) ** 2, math.sin(p.theta) ** 2


def effective_coupling(params: SystemParams, kind) -> float:
    """Signed effective coupling of the resonant pair, including the photon-number factor."""
    kind = _kind(kind)
    _require_theta_zero(params, kind)
    wa, wb, weg, wfg, c2, _ = _unpack(params)
    s2t = math.sin(2 * params.theta)
    tag = kind.tag
    if tag is Resonance.TWO_PHOTON_A:
        g0 = -math.sqrt(2) * params.g_a**2 * (
            s2t / wa + c2 * _inv(wfg - wa, "omega_fg - omega_a"))
    elif tag is Resonance.TWO_PHOTON_B:
        g0 = -math.sqrt(2) * params.g_b**2 * (
            2 * s2t / wb + c2 * _inv(weg - wb, "omega_eg - omega_b"))
    elif tag is Resonance.THREE_PHOTON_A:
        return -math.sqrt(6) * params.g_a**3 / (2 * wa) * (
            1 / (2 * wa) - _inv(wfg - 2 * wa, "omega_fg - 2 omega_a")
            + _inv(wfg - wa, "omega_fg - omega_a"))
    else:
        return -math.sqrt(6) * params.g_b**3 / (2 * wb) * (
            1 / (2 * wb) - _inv(weg - 2 * wb, "omega_eg - 2 omega_b")
            + _inv(weg - wb, "omega_eg - omega_b"))
    n = kind.n_offset
    return math.sqrt((n + 1) * (n + 2) / 2) * g0


def crosstalk_shift(params: SystemParams, mode: str) -> float:
    """Extra two-photon resonance shift caused by the inter-resonator coupling."""
    wa, wb = params.omega_a, params.omega_b
    first = _inv(wa - wb, "omega_a - omega_b")
    if mode == "b":
        first = -first
    return 2 * params.g_ab**2 * (first - 1 / (wa + wb))


def resonance_shift(params: SystemParams, kind, with_crosstalk: bool = False) -> float:
    """Offset of the resonant spacing from ``k * omega_mode`` at the avoided crossing."""
    kind = _kind(kind)
    _require_theta_zero(params, kind)
    wa, wb, weg, wfg, c2, s2 = _unpack(params)
    ga2, gb2 = params.g_a**2, params.g_b**2
    n = kind.n_offset
    tag = kind.tag
    if with_crosstalk and tag.photons == 3:
        raise ValueError("no crosstalk correction is available for three-photon resonances")

    if tag is Resonance.TWO_PHOTON_A:
        shift = (
            -ga2 * c2 * (4 / wa + _inv(wfg - wa, "omega_fg - omega_a")
                         + 3 * _inv(wfg + wa, "omega_fg + omega_a"))
            - gb2 * c2 * (_inv(2 * wa + wb, "2 omega_a + omega_b")
                          + _inv(wfg + wb, "omega_fg + omega_b")
                          + _inv(2 * wa - wb, "2 omega_a - omega_b")
                          - _inv(wfg + wb - 2 * wa, "omega_fg + omega_b - 2 omega_a"))
            - 4 * ga2 * s2 / wa - 4 * gb2 * s2 / wb
        )
        if n:
            shift -= n * ga2 * c2 * (8 / (3 * wa) + 1 / (wfg + wa)
                                     - _inv(wfg - 3 * wa, "omega_fg - 3 omega_a"))
    elif tag is Resonance.TWO_PHOTON_B:
        shift = (
            -gb2 * c2 * (4 / wb + _inv(weg - wb, "omega_eg - omega_b")
                         + 3 * _inv(weg + wb, "omega_eg + omega_b"))
            - ga2 * c2 * (_inv(weg + wa, "omega_eg + omega_a")
                          + _inv(2 * wb + wa, "2 omega_b + omega_a")
                          + _inv(2 * wb - wa, "2 omega_b - omega_a")
                          + _inv(2 * wb - wa - weg, "2 omega_b - omega_a - omega_eg"))
        )
        if n:
            shift -= n * gb2 * c2 * (8 / (3 * wb) + 1 / (weg + wb)
                                     - _inv(weg - 3 * wb, "omega_eg - 3 omega_b"))
    elif tag is Resonance.THREE_PHOTON_A:
        shift = (
            -ga2 * (3 / wa + 3 * _inv(wfg - wa, "omega_fg - omega_a")
                    + 4 * _inv(wfg + wa, "omega_fg + omega_a")
                    + _inv(2 * wa - wfg, "2 omega_a - omega_fg"))
            - gb2 * (_inv(3 * wa + wb, "3 omega_a + omega_b")
                     + _inv(wb + wfg, "omega_b + omega_fg")
                     + _inv(3 * wa - wb, "3 omega_a - omega_b")
                     + _inv(3 * wa - wb - wfg, "3 omega_a - omega_b - omega_fg"))
        )
    else:
        shift = (
            -ga2 * (_inv(3 * wb + wa, "3 omega_b + omega_a")
                    + _inv(wa + weg, "omega_a + omega_eg")
                    + _inv(3 * wb - wa - weg, "3 omega_b - omega_a - omega_eg")
                    + _inv(3 * wb - wa, "3 omega_b - omega_a"))
            - gb2 * (_inv(2 * wb - weg, "2 omega_b - omega_eg") + 3 / wb
                     + 3 * _inv(weg - wb, "omega_eg - omega_b")
                     + 4 * _inv(weg + wb, "omega_eg + omega_b"))
        )
    if with_crosstalk:
        shift += crosstalk_shift(params, tag.mode)
    return shift


def resonant_spacing(params: SystemParams, kind, with_crosstalk: bool = False) -> float:
    kind = _kind(kind)
    omega = params.omega_a if kind.tag.mode == "a" else params.omega_b
    return kind.tag.photons * omega + resonance_shift(params, kind, with_crosstalk)


def effective_resonance(params: SystemParams, kind, with_crosstalk: bool = False) -> EffectiveResonance:
    kind = _kind(kind)
    shift = resonance_shift(params, kind, with_crosstalk)
    omega = params.omega_a if kind.tag.mode == "a" else params.omega_b
    return EffectiveResonance(kind, effective_coupling(params, kind), shift,
                              kind.tag.photons * omega + shift)


def at_bare_resonance(params: SystemParams, kind) -> SystemParams:
    """Copy of ``params`` with the resonant spacing set to ``k * omega_mode``."""
    kind = _kind(kind)
    omega = params.omega_a if kind.tag.mode == "a" else params.omega_b
    return params.replace(**{kind.tag.spacing: kind.tag.photons * omega})


def self_energies(params: SystemParams, kind) -> tuple[float, float]:
    """Second-order level shifts of the (initial, final) bare pair at n_offset = 0.

    Their difference is the resonance shift; kept separate so that each can be
    checked against a path sum.
    """
    kind = _kind(kind)
    _require_theta_zero(params, kind)
    wa, wb, weg, wfg, c2, s2 = _unpack(params)
    ga2, gb2 = params.g_a**2, params.g_b**2
    tag = kind.tag
    if tag is Resonance.TWO_PHOTON_A:
        e_init = (ga2 * c2 * (1 / wa - 1 / (wfg - wa))
                  + gb2 * c2 * (1 / (2 * wa - wb) - 1 / (wfg + wb - 2 * wa)))
        e_final = (-ga2 * c2 * (3 / wa + 2 / (wfg - wa) + 3 / (wfg + wa))
                   - gb2 * c2 * (1 / (2 * wa + wb) + 1 / (wfg + wb))
                   - 4 * ga2 * s2 / wa - 4 * gb2 * s2 / wb)
    elif tag is Resonance.TWO_PHOTON_B:
        e_init = (ga2 * c2 * (1 / (2 * wb - wa - weg) + 1 / (2 * wb - wa))
                  + gb2 * c2 * (1 / (wb - weg) + 1 / wb)
                  - 4 * ga2 * s2 / wa - 4 * gb2 * s2 / wb)
        e_final = (-ga2 * c2 * (1 / (weg + wa) + 1 / (2 * wb + wa))
                   - gb2 * c2 * (3 / wb + 2 / (weg - wb) + 3 / (weg + wb))
                   - 4 * ga2 * s2 / wa - 4 * gb2 * s2 / wb)
    elif tag is Resonance.THREE_PHOTON_A:
        e_init = (ga2 * (1 / (2 * wa) + 1 / (2 * wa - wfg))
                  + gb2 * (1 / (3 * wa - wb) + 1 / (3 * wa - wb - wfg)))
        e_final = (-ga2 * (5 / (2 * wa) + 3 / (wfg - wa) + 4 / (wfg + wa))
                   - gb2 * (1 / (3 * wa + wb) + 1 / (wb + wfg)))
    else:
        e_init = (ga2 * (1 / (3 * wb - wa - weg) + 1 / (3 * wb - wa))
                  + gb2 * (1 / (2 * wb - weg) + 1 / (2 * wb)))
        e_final = (-ga2 * (1 / (3 * wb + wa) + 1 / (wa + weg))
                   - gb2 * (5 / (2 * wb) + 3 / (weg - wb) + 4 / (weg + wb)))
    return e_init, e_final


def _real(x: complex) -> float | complex:
    return x.real if abs(np.imag(x)) <= 1e-14 * max(1.0, abs(x)) else x


def _check_denominator(d: float, state: BasisState):
    if abs(d) < 1e-12:
        raise ResonanceError(f"degenerate intermediate state {state}: energy denominator {d:.3e}")


def path_sum_second_order(h0: np.ndarray, v: np.ndarray, i: BasisState, j: BasisState,
                          spec: BasisSpec, tol: float = 1e-15) -> tuple[float, list[PathTerm]]:
    """Second-order coupling (i != j) or level shift (i == j) over all bare intermediates."""
    energies = np.real(np.diag(h0))
    ii, jj = spec.index(i), spec.index(j)
    w_i = energies[ii]
    weights = v[jj, :] * v[:, ii]
    weights[[ii, jj]] = 0.0
    total = 0.0
    paths = []
    for n in np.flatnonzero(np.abs(weights) > tol):
        state = spec.state(n)
        _check_denominator(w_i - energies[n], state)
        amp = _real(weights[n] / (w_i - energies[n]))
        total += amp
        paths.append(PathTerm((state,), amp))
    return _real(total), paths


def path_sum_third_order(h0: np.ndarray, v: np.ndarray, i: BasisState, j: BasisState,
                         spec: BasisSpec, tol: float = 1e-15) -> tuple[float, list[PathTerm]]:
    """Third-order coupling through two intermediates, both denominators taken from state i."""
    energies = np.real(np.diag(h0))
    ii, jj = spec.index(i), spec.index(j)
    w_i = energies[ii]
    allowed = np.ones(spec.dim, dtype=bool)
    allowed[[ii, jj]] = False
    first = np.flatnonzero((np.abs(v[:, ii]) > tol) & allowed)
    last = np.flatnonzero((np.abs(v[jj, :]) > tol) & allowed)
    total = 0.0
    paths = []
    for m in first:
        for n in last:
            w = v[jj, n] * v[n, m] * v[m, ii]
            if abs(w) <= tol:
                continue
            sm, sn = spec.state(m), spec.state(n)
            _check_denominator(w_i - energies[m], sm)
            _check_denominator(w_i - energies[n], sn)
            amp = _real(w / ((w_i - energies[n]) * (w_i - energies[m])))
            total += amp
            paths.append(PathTerm((sm, sn), amp))
    return _real(total), paths
