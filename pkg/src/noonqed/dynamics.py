"""Unitary and dressed-basis Lindblad evolution, microwave pulses and fidelities.

The master equation is integrated in the eigenbasis of the full Hamiltonian.
The ``"rk"`` backend removes the free evolution exactly (interaction picture
with respect to the diagonal Hamiltonian) and integrates the remaining
dissipator with an adaptive explicit Runge-Kutta method; the ``"expm"``
backend exponentiates the Liouvillian and is meant for small dimensions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .hilbert import BasisSpec, PAIRS, _LEVEL_ORD, level_projector, mode_operator, qutrit_operator
from .spectrum import Eigensystem, diagonalize, dress_operator_eigen

log = logging.getLogger(__name__)


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class DecoherenceRates:
    kappa_a: float = 0.0
    kappa_b: float = 0.0
    gamma_eg: float = 0.0
    gamma_fg: float = 0.0
    gamma_fe: float = 0.0
    gamma_e: float = 0.0
    gamma_f: float = 0.0

    def __post_init__(self):
        for name, value in self.items():
            if value < 0:
                raise ValueError(f"{name} must be non-negative")

    @classmethod
    def uniform(cls, gamma: float) -> "DecoherenceRates":
        return cls(*([gamma] * 7))

    @classmethod
    def from_lifetimes(cls, omega_ref: float, **lifetimes) -> "DecoherenceRates":
        """Rates in units of ``omega_ref`` (rad/s) from 1/rate lifetimes in seconds."""
        return cls(**{k: 1.0 / (v * omega_ref) for k, v in lifetimes.items()})

    def items(self):
        return [(k, getattr(self, k)) for k in self.__dataclass_fields__]

    @property
    def any(self) -> bool:
        return any(v > 0 for _, v in self.items())


# channel name -> bare operator o entering O = sum_{E_n > E_m} <E_m|o + o^dag|E_n> |E_m><E_n|
def bare_channel_operators(spec: BasisSpec) -> dict[str, np.ndarray]:
    return {
        "kappa_a": mode_operator(spec, "a", "annihilate"),
        "kappa_b": mode_operator(spec, "b", "annihilate"),
        "gamma_eg": qutrit_operator(spec, "eg", "lower"),
        "gamma_fg": qutrit_operator(spec, "fg", "lower"),
        "gamma_fe": qutrit_operator(spec, "fe", "lower"),
        "gamma_e": level_projector(spec, "e"),
        "gamma_f": level_projector(spec, "f"),
    }


def dressed_channels(es: Eigensystem, rates: DecoherenceRates, energy_cap: float | None = None,
                     eigenbasis: bool = False) -> list[tuple[np.ndarray, float]]:
    """(dressed operator, rate) for every channel with a nonzero rate."""
    bare = bare_channel_operators(es.spec)
    out = []
    for name, rate in rates.items():
        if rate > 0:
            o = dress_operator_eigen(es, bare[name], energy_cap)
            if not eigenbasis:
                o = es.vectors @ o @ es.vectors.conj().T
            out.append((o, rate))
    return out


@dataclass
class Trajectory:
    times: np.ndarray
    populations: np.ndarray  # (n_times, n_targets)
    labels: list[str] = field(default_factory=list)
    fidelity: np.ndarray | None = None
    trace: np.ndarray | None = None
    final_state: np.ndarray | None = None
    discarded_weight: float = 0.0


def as_density(state: np.ndarray) -> np.ndarray:
    state = np.asarray(state)
    return np.outer(state, state.conj()) if state.ndim == 1 else state


def populations(state: np.ndarray, targets) -> np.ndarray:
    """<t|rho|t> (or |<t|psi>|^2) for each target vector."""
    t = np.atleast_2d(np.asarray(targets))
    if state.ndim == 1:
        return np.abs(t.conj() @ state) ** 2
    return np.real(np.einsum("ki,ij,kj->k", t.conj(), state, t))


def state_fidelity(rho: np.ndarray, target: np.ndarray) -> float:
    """sqrt(<phi|rho|phi>)."""
    value = populations(rho, [target])[0]
    return float(np.sqrt(min(max(value, 0.0), 1.0)))


def branch_aligned_overlap(state: np.ndarray, branch_a: np.ndarray, branch_b: np.ndarray) -> float:
    """max over phi of <t|rho|t> with |t> = (|A> + e^{i phi}|B>)/sqrt(2).

    The relative phase of the two NOON branches rotates at the difference of
    their dressed energies; a fixed local phase rotation of one mode removes
    it, so the figure of merit optimizes over it.
    """
    rho = as_density(state)
    paa = np.real(branch_a.conj() @ rho @ branch_a)
    pbb = np.real(branch_b.conj() @ rho @ branch_b)
    pab = branch_a.conj() @ rho @ branch_b
    return float(min(max(0.5 * (paa + pbb) + abs(pab), 0.0), 1.0))


def noon_fidelity(state: np.ndarray, branch_a: np.ndarray, branch_b: np.ndarray,
                  convention: str = "overlap") -> float:
    """Branch-phase-aligned NOON fidelity.

    ``"overlap"`` returns <t|rho|t>, ``"sqrt"`` its square root (the form used
    by :func:`state_fidelity`).
    """
    value = branch_aligned_overlap(state, branch_a, branch_b)
    if convention == "overlap":
        return value
    if convention == "sqrt":
        return float(np.sqrt(value))
    raise ValueError(f"unknown fidelity convention {convention!r}")


def reduced_noon_fidelity(state: np.ndarray, spec: BasisSpec, n: int,
                          convention: str = "overlap") -> float:
    """NOON fidelity of the photonic state with the qutrit traced out."""
    rho = as_density(state)
    d = spec.dim // 3
    photonic = np.einsum("iljl->ij", rho.reshape(d, 3, d, 3))
    a = np.zeros(d)
    b = np.zeros(d)
    a[n * (spec.cutoff_b + 1)] = 1.0
    b[n] = 1.0
    return noon_fidelity(photonic, a, b, convention)


def propagator(es: Eigensystem, t: float) -> np.ndarray:
    return (es.vectors * np.exp(-1j * es.energies * t)) @ es.vectors.conj().T


def evolve_unitary(h: np.ndarray, psi0: np.ndarray, t_final: float, n_samples: int = 2,
                   targets=(), labels=(), fidelity=None, es: Eigensystem | None = None) -> Trajectory:
    """Sample exp(-iHt) psi0 on a uniform grid.  ``psi0`` may also be a density matrix.

    ``fidelity`` is an optional callable state -> float recorded at each sample.
    """
    es = es or diagonalize(h)
    times = np.linspace(0.0, t_final, n_samples)
    state0 = np.asarray(psi0)
    c0 = es.vectors.conj().T @ state0
    if state0.ndim == 2:
        c0 = c0 @ es.vectors
    pops, fids, traces = [], [], []
    state = state0
    for t in times:
        ph = np.exp(-1j * es.energies * t)
        if state0.ndim == 1:
            state = es.vectors @ (ph * c0)
            traces.append(np.vdot(state, state).real)
        else:
            state = es.vectors @ (ph[:, None] * c0 * ph.conj()[None, :]) @ es.vectors.conj().T
            traces.append(np.trace(state).real)
        pops.append(populations(state, targets) if len(targets) else np.zeros(0))
        if fidelity is not None:
            fids.append(fidelity(state))
    return Trajectory(times, np.array(pops), list(labels),
                      np.array(fids) if fidelity is not None else None, np.array(traces), state)


def _keep_mask(es: Eigensystem, rho_e: np.ndarray, energy_cap: float | None, support_tol: float):
    if energy_cap is None:
        if support_tol <= 0:
            return np.ones(len(es.energies), dtype=bool)
        occupied = np.real(np.diag(rho_e)) > support_tol
        energy_cap = es.energies[occupied].max()
    return es.energies <= energy_cap + 1e-12


def _photon_box(es: Eigensystem, rho_e: np.ndarray, spec: BasisSpec, support_tol: float,
                component_tol: float = 1e-3) -> np.ndarray:
    """Eigenstates lying mostly inside the photon-number box of the support.

    The box spans every bare photon number carrying more than ``component_tol``
    weight in an occupied eigenstate; jump operators only remove excitations,
    so states outside it are reached through weak dressing only.
    """
    tol = support_tol if support_tol > 0 else 1e-10
    weights = np.abs(es.vectors) ** 2
    occupied = np.real(np.diag(rho_e)) > tol
    bare = (weights[:, occupied] > component_tol).any(axis=1)
    n_a, n_b = spec.photon_numbers
    inside = (n_a <= n_a[bare].max()) & (n_b <= n_b[bare].max())
    return weights[inside].sum(axis=0) >= 0.5


@dataclass(frozen=True)
class Drive:
    """Classical drive A e^{-i w t} X + h.c. on a bare-basis operator X."""
    operator: np.ndarray
    amplitude: complex
    frequency: float


def _liouvillian(energies, ops, rates):
    d = len(energies)
    eye = np.eye(d)
    h = np.diag(energies).astype(complex)
    # row-major vec: vec(A rho B) = kron(A, B.T) vec(rho)
    lv = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for o, r in zip(ops, rates):
        k = o.conj().T @ o
        lv += r * (np.kron(o, o.conj()) - 0.5 * np.kron(k, eye) - 0.5 * np.kron(eye, k.T))
    return lv


def evolve_lindblad(h: np.ndarray, dressed_ops, rho0: np.ndarray, t_final: float,
                    n_samples: int = 2, targets=(), labels=(), fidelity=None,
                    es: Eigensystem | None = None, backend: str = "rk",
                    energy_cap: float | None = None, support_tol: float = 0.0,
                    ops_in_eigenbasis: bool = False, drive: Drive | None = None,
                    photon_box: BasisSpec | None = None, rtol: float = 1e-8, atol: float = 1e-9,
                    method: str = "DOP853") -> Trajectory:
    """Integrate drho/dt = -i[H, rho] + sum_k r_k L[O_k] rho.

    ``dressed_ops`` holds (operator, rate) pairs, in the bare basis unless
    ``ops_in_eigenbasis``.  Evolution runs in the eigenbasis of ``h``,
    restricted to eigenstates below ``energy_cap``; if no cap is given and
    ``support_tol`` > 0 the cap is the highest eigenstate holding more than
    ``support_tol`` population (dressed operators only lower the energy, so
    states above it are never fed without a drive).  The initial weight
    outside the retained subspace is reported as ``discarded_weight``.
    Passing the basis as ``photon_box`` further drops eigenstates outside the
    photon-number range of the support (see :func:`_photon_box`).
    """
    es = es or diagonalize(h)
    vecs = es.vectors
    rho0 = as_density(rho0)
    rho_e = vecs.conj().T @ rho0 @ vecs
    keep = _keep_mask(es, rho_e, energy_cap, support_tol)
    if photon_box is not None:
        keep &= _photon_box(es, rho_e, photon_box, support_tol)
    kidx = np.flatnonzero(keep)
    energies = es.energies[kidx]
    vk = vecs[:, kidx]
    rho_k = rho_e[np.ix_(kidx, kidx)]
    discarded = float(np.real(np.trace(rho_e)) - np.real(np.trace(rho_k)))
    if discarded > 1e-6:
        log.warning("energy cap discards %.2e of the initial population", discarded)
    rho_k = rho_k / np.trace(rho_k).real

    ops, rates = [], []
    for o, r in dressed_ops:
        if r <= 0:
            continue
        o_e = o if ops_in_eigenbasis else vecs.conj().T @ o @ vecs
        ops.append(np.ascontiguousarray(o_e[np.ix_(kidx, kidx)]))
        rates.append(float(r))

    targets = np.atleast_2d(np.asarray(targets)) if len(targets) else np.zeros((0, len(vecs)))
    t_e = targets.conj() @ vk  # <t|E_n>
    times = np.linspace(0.0, t_final, n_samples)

    if backend == "expm":
        if drive is not None:
            raise ValueError("the expm backend does not support time-dependent drives")
        lv = _liouvillian(energies, ops, rates)
        step = expm(lv * (times[1] - times[0])) if n_samples > 1 else None
        states = [rho_k.ravel()]
        for _ in times[1:]:
            states.append(step @ states[-1])
        d = len(energies)
        rhos = [s.reshape(d, d) for s in states]
    elif backend == "rk":
        drive_e = None
        if drive is not None:
            x = (vk.conj().T @ drive.operator @ vk) * drive.amplitude
            drive_e = (np.ascontiguousarray(x), drive.frequency)
        rhos = _integrate_interaction_picture(energies, ops, rates, rho_k, times,
                                              rtol, atol, method, drive_e)
    else:
        raise ValueError(f"unknown backend {backend!r}")

    pops, traces, fids = [], [], []
    final = None
    for k, rho in enumerate(rhos):
        pops.append(np.real(np.einsum("ki,ij,kj->k", t_e, rho, t_e.conj())) if len(t_e)
                    else np.zeros(0))
        traces.append(np.trace(rho).real)
        if fidelity is not None or k == len(rhos) - 1:
            bare = vk @ rho @ vk.conj().T
            if fidelity is not None:
                fids.append(fidelity(bare))
            final = bare
    return Trajectory(times, np.array(pops), list(labels),
                      np.array(fids) if fidelity is not None else None,
                      np.array(traces), final, discarded)


def _integrate_interaction_picture(energies, ops, rates, rho0, times, rtol, atol, method,
                                   drive=None):
    d = len(energies)
    if not ops and drive is None:
        out = []
        for t in times:
            ph = np.exp(-1j * energies * t)
            out.append(ph[:, None] * rho0 * ph.conj()[None, :])
        return out
    if ops:
        # sum_k W_k rho W_k^dag as two GEMMs over the stacked channels
        n_ch = len(ops)
        w_rows = np.concatenate([np.sqrt(r) * o for o, r in zip(ops, rates)])
        w_h_rows = np.concatenate([np.sqrt(r) * o.conj().T for o, r in zip(ops, rates)])
        k_half = 0.5 * w_rows.conj().T @ w_rows

    def rhs(t, y):
        ph = np.exp(-1j * energies * t)
        rot = ph[:, None] * ph.conj()[None, :]
        rho = y.reshape(d, d) * rot
        out = np.zeros((d, d), dtype=complex)
        if ops:
            kr = k_half @ rho
            out -= kr + kr.conj().T
            wr = (w_rows @ rho).reshape(n_ch, d, d).transpose(1, 0, 2).reshape(d, n_ch * d)
            out += wr @ w_h_rows
        if drive is not None:
            m = drive[0] * np.exp(-1j * drive[1] * t)
            hr = (m + m.conj().T) @ rho
            out += -1j * (hr - hr.conj().T)
        return (out * rot.conj()).ravel()

    sol = solve_ivp(rhs, (times[0], times[-1]), rho0.astype(complex).ravel(), method=method,
                    t_eval=times, rtol=rtol, atol=atol)
    if not sol.success:
        t_fail = sol.t[-1] if sol.t.size else times[0]
        raise IntegrationError(f"integrator failed at t = {t_fail:.6g}: {sol.message}")
    out = []
    for k, t in enumerate(sol.t):
        ph = np.exp(-1j * energies * t)
        out.append(sol.y[:, k].reshape(d, d) * (ph[:, None] * ph.conj()[None, :]))
    return out


# --- microwave pulses -------------------------------------------------------

@dataclass(frozen=True)
class PulseSpec:
    pair: str = "eg"
    phase: float = -np.pi / 2
    rabi_frequency: float = 0.0
    mode: str = "instantaneous"

    def __post_init__(self):
        if self.pair not in ("eg", "fg"):
            raise ValueError("pulses drive the eg or fg transition")
        if self.mode not in ("instantaneous", "finite_duration"):
            raise ValueError(f"unknown pulse mode {self.mode!r}")
        if self.mode == "finite_duration" and self.rabi_frequency <= 0:
            raise ValueError("finite-duration pulses need a positive Rabi frequency")

    @property
    def duration(self) -> float:
        return np.pi / (2 * self.rabi_frequency) if self.rabi_frequency > 0 else 0.0


def pulse_phase(direction: str) -> float:
    """Drive phase that maps |g> -> |e> ("up") or |e> -> |g> ("down") without a sign."""
    return {"up": -np.pi / 2, "down": np.pi / 2}[direction]


def _drive_local(pair: str, phase: float) -> np.ndarray:
    hi, lo = (_LEVEL_ORD[x] for x in PAIRS[pair])
    m = np.zeros((3, 3), dtype=complex)
    m[hi, lo] = np.exp(-1j * phase)
    m[lo, hi] = np.exp(1j * phase)
    return m


def pulse_unitary(spec: BasisSpec, pulse: PulseSpec) -> np.ndarray:
    """Ideal pi rotation exp(-i (pi/2) D) with D = e^{-i phi}|hi><lo| + h.c."""
    d = _drive_local(pulse.pair, pulse.phase)
    hi, lo = (_LEVEL_ORD[x] for x in PAIRS[pulse.pair])
    u = np.eye(3, dtype=complex)
    u[hi, hi] = u[lo, lo] = 0.0
    u += -1j * d
    return np.kron(np.eye((spec.cutoff_a + 1) * (spec.cutoff_b + 1)), u)


def drive_operator(spec: BasisSpec, pair: str, phase: float) -> np.ndarray:
    return np.kron(np.eye((spec.cutoff_a + 1) * (spec.cutoff_b + 1)), _drive_local(pair, phase))


def apply_pulse(state: np.ndarray, pulse: PulseSpec, spec: BasisSpec, h: np.ndarray | None = None,
                drive_frequency: float | None = None, dressed_ops=(), es: Eigensystem | None = None,
                support_tol: float = 1e-10, rtol: float = 1e-9, atol: float = 1e-12,
                photon_box: bool = False):
    """Apply a pi pulse on ``pulse.pair``.

    Instantaneous pulses apply the ideal rotation.  Finite-duration pulses
    evolve under H + Omega (e^{-i(phi + w_d t)}|hi><lo| + h.c.) for pi/(2 Omega),
    the rotating-wave form of a resonant drive at ``drive_frequency``.  Density
    matrices are evolved with the master equation using ``dressed_ops``
    (eigenbasis operators of ``h``).
    """
    state = np.asarray(state)
    if pulse.mode == "instantaneous":
        u = pulse_unitary(spec, pulse)
        return u @ state if state.ndim == 1 else u @ state @ u.conj().T
    if h is None or drive_frequency is None:
        raise ValueError("finite-duration pulses need the Hamiltonian and drive frequency")
    hi, lo = (_LEVEL_ORD[x] for x in PAIRS[pulse.pair])
    amplitude = pulse.rabi_frequency * np.exp(-1j * pulse.phase)

    if state.ndim == 2 or len(dressed_ops):
        es = es or diagonalize(h, spec)
        rho = as_density(state)
        # the drive feeds states above the initial support: widen the cap to
        # cover the ideally pulsed state as well
        ideal = apply_pulse(rho, PulseSpec(pulse.pair, pulse.phase), spec)
        occ = np.real(np.einsum("ij,ik,kj->j", es.vectors.conj(), rho + ideal, es.vectors))
        cap = es.energies[occ > support_tol].max() + 4 * pulse.rabi_frequency
        x = np.zeros((spec.dim, spec.dim), dtype=complex)
        rows = np.flatnonzero(spec.level_index == hi)
        x[rows, rows - hi + lo] = 1.0
        tr = evolve_lindblad(h, dressed_ops, rho, pulse.duration, es=es, energy_cap=cap,
                             ops_in_eigenbasis=True, drive=Drive(x, amplitude, drive_frequency),
                             support_tol=support_tol, photon_box=spec if photon_box else None,
                             rtol=rtol, atol=atol)
        return tr.final_state

    rows = np.flatnonzero(spec.level_index == hi)
    cols = rows - hi + lo

    def rhs(t, y):
        out = h @ y
        ph = amplitude * np.exp(-1j * drive_frequency * t)
        out[rows] += ph * y[cols]
        out[cols] += np.conj(ph) * y[rows]
        return -1j * out

    sol = solve_ivp(rhs, (0.0, pulse.duration), state.astype(complex), method="DOP853",
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegrationError(f"pulse integration failed: {sol.message}")
    return sol.y[:, -1]
