"""Exact diagonalization, eigenstate identification and avoided-crossing search."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar

from .hilbert import BasisSpec, BasisState, build_basis
from .model import SystemParams, build_full

HERMITIAN_TOL = 1e-9
AMBIGUITY_MARGIN = 0.05


class NoCrossingError(RuntimeError):
    pass


@dataclass(frozen=True)
class Eigensystem:
    energies: np.ndarray
    vectors: np.ndarray
    spec: BasisSpec | None = None

    def project(self, op: np.ndarray) -> np.ndarray:
        """Matrix elements of a bare-basis operator between eigenvectors."""
        return self.vectors.conj().T @ op @ self.vectors


class StateMatch(NamedTuple):
    index: int
    overlap: float
    ambiguous: bool


@dataclass
class CrossingResult:
    location: float
    gap: float
    branch_indices: tuple[int, int]
    overlaps: np.ndarray  # rows: branches (lower, upper); columns: the two bare states
    spacing: str = "omega_eg"
    scan: dict = field(default_factory=dict, repr=False)

    @property
    def half_gap(self) -> float:
        return 0.5 * self.gap


def diagonalize(h: np.ndarray, spec: BasisSpec | None = None) -> Eigensystem:
    asym = np.max(np.abs(h - h.conj().T)) if h.size else 0.0
    if asym > HERMITIAN_TOL:
        raise ValueError(f"Hamiltonian is not Hermitian (max asymmetry {asym:.2e})")
    energies, vectors = np.linalg.eigh(h)
    return Eigensystem(energies, vectors, spec)


def locate_state(es: Eigensystem, target: BasisState | np.ndarray) -> StateMatch:
    """Eigenstate with the largest overlap with ``target`` (adiabatic labelling)."""
    if isinstance(target, BasisState):
        row = es.vectors[es.spec.index(target), :]
        weights = np.abs(row)
    else:
        weights = np.abs(np.asarray(target).conj() @ es.vectors)
    order = np.argsort(weights)[::-1]
    best = int(order[0])
    second = weights[order[1]] if len(order) > 1 else 0.0
    return StateMatch(best, float(weights[best]), bool(weights[best] - second < AMBIGUITY_MARGIN))


def dress_operator_eigen(es: Eigensystem, bare: np.ndarray, energy_cap: float | None = None) -> np.ndarray:
    """Dressed lowering operator expressed in the eigenbasis.

    Keeps ``<E_m|(o + o^dag)|E_n>`` only for ``E_n > E_m``, dropping eigenpairs
    above ``energy_cap``.
    """
    x = es.project(bare + bare.conj().T)
    e = es.energies
    mask = e[None, :] - e[:, None] > 1e-12
    if energy_cap is not None:
        keep = e <= energy_cap
        mask &= keep[None, :] & keep[:, None]
    return np.where(mask, x, 0.0)


def dress_operator(es: Eigensystem, bare: np.ndarray, energy_cap: float | None = None) -> np.ndarray:
    """Dressed lowering operator transformed back to the bare basis."""
    o = dress_operator_eigen(es, bare, energy_cap)
    return es.vectors @ o @ es.vectors.conj().T


def default_cutoffs(*states: BasisState, margin: int = 4) -> tuple[int, int]:
    n = max(max(s.n_a, s.n_b) for s in states)
    return n + margin, n + margin


def _pair_vectors(spec: BasisSpec, pair) -> np.ndarray:
    return np.array([spec.index(s) for s in pair])


def _branches_by_weight(es: Eigensystem, idx: np.ndarray) -> tuple[int, int]:
    w = np.sum(np.abs(es.vectors[idx, :]) ** 2, axis=0)
    top = np.argsort(w)[::-1][:2]
    lo, hi = sorted(int(k) for k in top)
    return lo, hi


def _gap_at(params, spacing, x, spec, idx):
    es = diagonalize(build_full(params.replace(**{spacing: x}), spec), spec)
    lo, hi = _branches_by_weight(es, idx)
    return es.energies[hi] - es.energies[lo], es, (lo, hi)


def scan_branches(params: SystemParams, spacing: str, values, pair, spec: BasisSpec):
    """Track the two branches that start on ``pair`` across a sweep of one spacing.

    Branches are continued by maximum overlap with the previous sweep point, so
    they keep their identity through reorderings of eigenvalue indices.
    """
    idx = _pair_vectors(spec, pair)
    energies = np.empty((len(values), 2))
    prev = None
    for k, x in enumerate(values):
        es = diagonalize(build_full(params.replace(**{spacing: x}), spec), spec)
        if prev is None:
            labels = [int(np.argmax(np.abs(es.vectors[i, :]))) for i in idx]
            if labels[0] == labels[1]:
                raise NoCrossingError("both bare states dominate the same eigenstate at the sweep start")
        else:
            ov = np.abs(prev.conj().T @ es.vectors)
            labels = [int(np.argmax(ov[b])) for b in range(2)]
            if labels[0] == labels[1]:
                # degenerate continuation: fall back to pair weight
                labels = list(_branches_by_weight(es, idx))
        energies[k] = es.energies[labels]
        prev = es.vectors[:, labels]
    return energies


def find_avoided_crossing(params: SystemParams, spacing: str, lo: float, hi: float, pair,
                          spec: BasisSpec | None = None, n_scan: int = 401,
                          xtol: float = 1e-7) -> CrossingResult:
    """Locate the minimum splitting between the branches attached to ``pair``.

    A uniform scan of ``n_scan`` points brackets the minimum, which is then
    refined by a bounded scalar minimization of the gap.
    """
    if not lo < hi:
        raise ValueError("sweep requires lo < hi")
    if spacing not in ("omega_eg", "omega_fg"):
        raise ValueError(f"can only sweep omega_eg or omega_fg, not {spacing!r}")
    pair = tuple(BasisState.parse(s) if isinstance(s, str) else s for s in pair)
    spec = spec or build_basis(*default_cutoffs(*pair))
    idx = _pair_vectors(spec, pair)
    xs = np.linspace(lo, hi, n_scan)
    branches = scan_branches(params, spacing, xs, pair, spec)
    gaps = np.abs(branches[:, 1] - branches[:, 0])
    k = int(np.argmin(gaps))
    if k == 0 or k == n_scan - 1:
        raise NoCrossingError(f"no avoided crossing of {pair[0]}, {pair[1]} inside [{lo}, {hi}]")
    opt = minimize_scalar(lambda x: _gap_at(params, spacing, x, spec, idx)[0],
                          bounds=(xs[k - 1], xs[k + 1]), method="bounded", options={"xatol": xtol})
    x0 = opt.x
    gap, es, (b_lo, b_hi) = _gap_at(params, spacing, x0, spec, idx)
    overlaps = np.abs(es.vectors[np.ix_(idx, [b_lo, b_hi])]).T
    if overlaps.min() < 0.3:
        raise NoCrossingError(f"branches at the gap minimum ({x0:.6f}) are not hybridized: {overlaps}")
    return CrossingResult(float(x0), float(gap), (b_lo, b_hi), overlaps, spacing,
                          scan={"values": xs, "branches": branches})
