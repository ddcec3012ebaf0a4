"""Truncated Fock basis for two bosonic modes and a three-level atom.

Tensor order is fixed as (mode a) x (mode b) x (qutrit), so the linear index of
``|n_a, n_b, level>`` is ``level + 3 * (n_b + (cutoff_b + 1) * n_a)`` with
``g, e, f -> 0, 1, 2``.  All operators are dense complex ``numpy`` arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

LEVELS = ("g", "e", "f")
_LEVEL_ORD = {name: k for k, name in enumerate(LEVELS)}

# (upper, lower) level of each qutrit transition
PAIRS = {"eg": ("e", "g"), "fg": ("f", "g"), "fe": ("f", "e")}


@dataclass(frozen=True, order=True)
class BasisState:
    n_a: int
    n_b: int
    level: str

    def __post_init__(self):
        if self.level not in _LEVEL_ORD:
            raise ValueError(f"unknown qutrit level {self.level!r}")
        if self.n_a < 0 or self.n_b < 0:
            raise ValueError("photon numbers must be non-negative")

    @classmethod
    def parse(cls, label: str) -> "BasisState":
        """Parse labels like ``"20g"`` or ``"10,2,e"``."""
        text = label.strip().strip("|>").replace(" ", "")
        if "," in text:
            na, nb, lev = text.split(",")
            return cls(int(na), int(nb), lev)
        if len(text) != 3:
            raise ValueError(f"ambiguous state label {label!r}; use 'n_a,n_b,level'")
        return cls(int(text[0]), int(text[1]), text[2])

    def __str__(self) -> str:
        return f"|{self.n_a},{self.n_b},{self.level}>"


@dataclass(frozen=True)
class BasisSpec:
    cutoff_a: int
    cutoff_b: int

    @property
    def dim(self) -> int:
        return 3 * (self.cutoff_a + 1) * (self.cutoff_b + 1)

    def index(self, state: BasisState) -> int:
        if state.n_a > self.cutoff_a or state.n_b > self.cutoff_b:
            raise IndexError(f"{state} lies outside cutoffs ({self.cutoff_a}, {self.cutoff_b})")
        return _LEVEL_ORD[state.level] + 3 * (state.n_b + (self.cutoff_b + 1) * state.n_a)

    def state(self, index: int) -> BasisState:
        if not 0 <= index < self.dim:
            raise IndexError(index)
        rest, lev = divmod(index, 3)
        n_a, n_b = divmod(rest, self.cutoff_b + 1)
        return BasisState(n_a, n_b, LEVELS[lev])

    def states(self) -> list[BasisState]:
        return [self.state(k) for k in range(self.dim)]

    def ket(self, state: BasisState | str) -> np.ndarray:
        if isinstance(state, str):
            state = BasisState.parse(state)
        v = np.zeros(self.dim, dtype=complex)
        v[self.index(state)] = 1.0
        return v

    def superpose(self, *states: BasisState | str, phases=None) -> np.ndarray:
        """Equal-weight normalized superposition of bare states."""
        phases = np.ones(len(states)) if phases is None else np.asarray(phases)
        v = sum(p * self.ket(s) for p, s in zip(phases, states))
        return v / np.linalg.norm(v)

    @cached_property
    def photon_numbers(self) -> tuple[np.ndarray, np.ndarray]:
        idx = np.arange(self.dim) // 3
        return idx // (self.cutoff_b + 1), idx % (self.cutoff_b + 1)

    @cached_property
    def level_index(self) -> np.ndarray:
        return np.arange(self.dim) % 3


def build_basis(cutoff_a: int, cutoff_b: int) -> BasisSpec:
    if cutoff_a < 0 or cutoff_b < 0:
        raise ValueError(f"cutoffs must be non-negative, got ({cutoff_a}, {cutoff_b})")
    return BasisSpec(int(cutoff_a), int(cutoff_b))


def _destroy(cutoff: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), k=1).astype(complex)


def _embed(spec: BasisSpec, op_a=None, op_b=None, op_q=None) -> np.ndarray:
    op_a = np.eye(spec.cutoff_a + 1) if op_a is None else op_a
    op_b = np.eye(spec.cutoff_b + 1) if op_b is None else op_b
    op_q = np.eye(3) if op_q is None else op_q
    return np.kron(np.kron(op_a, op_b), op_q).astype(complex)


def mode_operator(spec: BasisSpec, mode: str, kind: str) -> np.ndarray:
    """Annihilation, creation or number operator of mode ``"a"`` or ``"b"``."""
    if mode not in ("a", "b"):
        raise ValueError(f"mode must be 'a' or 'b', got {mode!r}")
    cutoff = spec.cutoff_a if mode == "a" else spec.cutoff_b
    d = _destroy(cutoff)
    if kind == "annihilate":
        local = d
    elif kind == "create":
        local = d.conj().T
    elif kind == "number":
        local = d.conj().T @ d
    else:
        raise ValueError(f"unknown mode operator kind {kind!r}")
    return _embed(spec, op_a=local) if mode == "a" else _embed(spec, op_b=local)


def _qutrit_local(pair: str, kind: str) -> np.ndarray:
    if pair not in PAIRS:
        raise ValueError(f"unknown transition {pair!r}")
    hi, lo = (_LEVEL_ORD[x] for x in PAIRS[pair])
    m = np.zeros((3, 3), dtype=complex)
    if kind == "sigma_x":
        m[hi, lo] = m[lo, hi] = 1.0
    elif kind == "sigma_z":
        m[hi, hi], m[lo, lo] = 1.0, -1.0
    elif kind == "lower":
        m[lo, hi] = 1.0
    elif kind == "project_upper":
        m[hi, hi] = 1.0
    else:
        raise ValueError(f"unknown qutrit operator kind {kind!r}")
    return m


def qutrit_operator(spec: BasisSpec, pair: str, kind: str) -> np.ndarray:
    """Qutrit operator on the ``pair`` transition, identity on both modes.

    ``sigma_z`` is ``|j><j| - |k><k|`` with ``j`` the upper level; ``lower`` is
    ``|k><j|``; ``project_upper`` is ``|j><j|``.
    """
    return _embed(spec, op_q=_qutrit_local(pair, kind))


def level_projector(spec: BasisSpec, level: str) -> np.ndarray:
    m = np.zeros((3, 3), dtype=complex)
    m[_LEVEL_ORD[level], _LEVEL_ORD[level]] = 1.0
    return _embed(spec, op_q=m)
