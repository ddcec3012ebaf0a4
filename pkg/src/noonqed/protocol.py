"""Step schedule for NOON-state preparation and its execution.

Photon numbers are built up two at a time on one mode (part A: qutrit eg
transition with mode a; part B: fg transition with mode b), with a pi pulse
re-exciting the qutrit after each two-photon Rabi half period.  A final step
completes both branches at once.  While one part runs, the idle mode is parked
``park_offset`` above its nominal frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .dynamics import (DecoherenceRates, PulseSpec, Trajectory, apply_pulse, as_density,
                       dressed_channels, evolve_lindblad, noon_fidelity, propagator,
                       pulse_phase)
from .hilbert import BasisSpec, build_basis
from .model import SystemParams, build_full
from .perturb import ResonanceKind, effective_coupling, resonance_shift
from .spectrum import diagonalize

MATCH_RTOL = 1e-9
DEFAULT_PARK_OFFSET = 5.0


class ProtocolError(ValueError):
    pass


class ProgrammedResonance(NamedTuple):
    spacing: str  # "omega_eg" or "omega_fg"
    value: float
    coupling: float  # signed effective coupling of the driven pair
    transition: str


@dataclass(frozen=True)
class ProtocolStep:
    kind: str  # "resonant_evolution" or "pulse"
    label: str
    duration: float
    params: SystemParams  # Hamiltonian in force during the step
    resonances: tuple[ProgrammedResonance, ...] = ()
    pulse: PulseSpec | None = None
    direction: str | None = None

    def __post_init__(self):
        if self.kind not in ("resonant_evolution", "pulse"):
            raise ValueError(f"unknown step kind {self.kind!r}")
        if self.kind == "resonant_evolution" and not self.duration > 0:
            raise ValueError("resonant evolution needs a positive duration")

    @property
    def drive_frequency(self) -> float | None:
        if self.pulse is None:
            return None
        return self.params.omega_eg if self.pulse.pair == "eg" else self.params.omega_fg

    def describe(self) -> str:
        if self.kind == "pulse":
            return (f"{self.label:<8} pulse  {self.pulse.pair} {self.direction:<4} "
                    f"phase={self.pulse.phase:+.4f} w_d={self.drive_frequency:.9f} "
                    f"t={self.duration:.6g}")
        res = " ".join(f"{r.spacing}={r.value:.9f} [{r.transition} g={r.coupling:.6e}]"
                       for r in self.resonances)
        return (f"{self.label:<8} evolve {res} omega_a={self.params.omega_a:g} "
                f"omega_b={self.params.omega_b:g} t={self.duration:.6f}")


@dataclass
class ProtocolPlan:
    target_n: int
    steps: list[ProtocolStep]
    branch: str  # even_matched, even_unmatched, odd
    nominal: SystemParams
    pulse_rabi: tuple[float | None, float | None] = (None, None)

    @property
    def total_time(self) -> float:
        return float(sum(s.duration for s in self.steps))

    @property
    def n_pulses(self) -> int:
        return sum(s.kind == "pulse" for s in self.steps)

    @property
    def n_evolutions(self) -> int:
        return sum(s.kind == "resonant_evolution" for s in self.steps)

    def listing(self) -> str:
        head = (f"NOON target {self.target_n} ({self.branch}), {self.n_evolutions} evolutions, "
                f"{self.n_pulses} pulses, total time {self.total_time:.6f}")
        return "\n".join([head] + [s.describe() for s in self.steps])


def matched_gb(params: SystemParams, photons: int = 2) -> float:
    """g_b for which the n = 0 couplings on both modes have equal magnitude.

    Evaluated at the spacings in ``params``.  The mode-b coupling scales as
    g_b**photons, so g_b = (|g(A)| / |g(B) at g_b = 1|)**(1/photons).
    """
    if photons not in (2, 3):
        raise ValueError("photons must be 2 or 3")
    if params.g_a == 0:
        return 0.0
    tag = "two_photon" if photons == 2 else "three_photon"
    ga = effective_coupling(params, f"{tag}_a")
    gb_unit = effective_coupling(params.replace(g_b=1.0), f"{tag}_b")
    if gb_unit == 0 or ga == 0:
        raise ProtocolError("an effective coupling vanishes; no matching g_b exists")
    if photons == 2 and np.sign(ga) != np.sign(gb_unit):
        raise ProtocolError("the two-photon couplings have opposite signs; "
                            "only their magnitudes can be matched")
    return abs(ga / gb_unit) ** (1.0 / photons)


def double_resonance(params: SystemParams) -> SystemParams:
    """``params`` with the spacings at the bare two-photon resonances."""
    return params.replace(omega_eg=2 * params.omega_a, omega_fg=2 * params.omega_b)


def _two_photon(step_params: SystemParams, mode: str, n: int,
                with_crosstalk: bool) -> ProgrammedResonance:
    kind = ResonanceKind(f"two_photon_{mode}", n)
    omega = step_params.omega_a if mode == "a" else step_params.omega_b
    bare = step_params.replace(**{kind.tag.spacing: 2 * omega})
    spacing = 2 * omega + resonance_shift(bare, kind, with_crosstalk)
    init, final = kind.states()
    return ProgrammedResonance(kind.tag.spacing, spacing, effective_coupling(bare, kind),
                               f"{init}<->{final}")


def _pulse_step(label, prev: ProtocolStep, pair, direction, rabi, pulse_mode):
    pulse = PulseSpec(pair, pulse_phase(direction), rabi or 0.0, pulse_mode)
    duration = pulse.duration if pulse_mode == "finite_duration" else 0.0
    return ProtocolStep("pulse", label, duration, prev.params, pulse=pulse, direction=direction)


def plan_noon(target_n: int, params: SystemParams, force_unmatched: bool = False,
              with_crosstalk_shifts: bool = False, pulse_mode: str = "instantaneous",
              rabi_eg: float | None = None, rabi_fg: float | None = None,
              park_offset: float = DEFAULT_PARK_OFFSET) -> ProtocolPlan:
    """Compile the preparation schedule for the NOON state with ``target_n`` photons.

    Resonance shifts and couplings of each step are evaluated with the mode
    frequencies and the non-resonant spacing actually in force during it.
    """
    if target_n < 1:
        raise ValueError("target_n must be at least 1")
    if pulse_mode == "finite_duration" and not (rabi_eg and rabi_fg):
        raise ValueError("finite-duration pulses need rabi_eg and rabi_fg")
    odd = target_n % 2 == 1
    n_half = (target_n + 1) // 2 if odd else target_n // 2
    nominal = double_resonance(params)
    wa, wb = nominal.omega_a, nominal.omega_b
    xt = with_crosstalk_shifts

    if odd:
        if abs(math.cos(params.theta)) < 1e-12:
            raise ProtocolError("odd targets need cos(theta) != 0 for the single-photon step")
        branch = "odd"
    else:
        ga = abs(effective_coupling(nominal, "two_photon_a"))
        gb = abs(effective_coupling(nominal, "two_photon_b"))
        matched = abs(ga - gb) <= MATCH_RTOL * max(ga, gb)
        if force_unmatched:
            branch = "even_unmatched"
        elif matched:
            branch = "even_matched"
        else:
            raise ProtocolError(
                f"|g_eff| = {ga:.6e} and |g'_eff| = {gb:.6e} differ; set g_b = matched_gb(...) "
                "or request the unmatched schedule with force_unmatched")

    steps: list[ProtocolStep] = []
    # part A: mode b and the fg spacing parked away
    wfg_park = _two_photon(nominal, "b", 0, xt).value
    a_params = nominal.replace(omega_b=wb + park_offset, omega_fg=wfg_park)
    n_a_steps = n_half if branch == "even_unmatched" else n_half - 1
    weg_last = nominal.omega_eg
    for j in range(1, n_a_steps + 1):
        r = _two_photon(a_params, "a", 2 * j - 2, xt)
        ev = ProtocolStep("resonant_evolution", f"A{j}", math.pi / abs(2 * r.coupling),
                          a_params.replace(omega_eg=r.value), (r,))
        steps += [ev, _pulse_step(f"A{j}p", ev, "eg", "up", rabi_eg, pulse_mode)]
        weg_last = r.value

    # part B: mode a parked, eg spacing held at its last value
    b_params = nominal.replace(omega_a=wa + park_offset, omega_eg=weg_last)
    for k in range(1, n_half):
        r = _two_photon(b_params, "b", 2 * k - 2, xt)
        ev = ProtocolStep("resonant_evolution", f"B{k}", math.pi / abs(2 * r.coupling),
                          b_params.replace(omega_fg=r.value), (r,))
        steps += [ev, _pulse_step(f"B{k}p", ev, "fg", "up", rabi_fg, pulse_mode)]

    n = 2 * n_half - 2
    if branch == "even_matched":
        ra, rb = _two_photon(nominal, "a", n, xt), _two_photon(nominal, "b", n, xt)
        steps.append(ProtocolStep("resonant_evolution", "final", math.pi / abs(2 * ra.coupling),
                                  nominal.replace(omega_eg=ra.value, omega_fg=rb.value), (ra, rb)))
    elif branch == "even_unmatched":
        prev = steps[-1]
        steps.append(_pulse_step("Adown", prev, "eg", "down", rabi_eg, pulse_mode))
        r = _two_photon(b_params, "b", n, xt)
        steps.append(ProtocolStep("resonant_evolution", f"B{n_half}", math.pi / abs(2 * r.coupling),
                                  b_params.replace(omega_fg=r.value), (r,)))
    else:
        sp = nominal.replace(omega_eg=wa, omega_fg=wb, g_b=nominal.g_a)
        g1 = math.sqrt(target_n) * nominal.g_a * math.cos(nominal.theta)
        m = target_n - 1
        steps.append(ProtocolStep(
            "resonant_evolution", "final", math.pi / (2 * g1), sp,
            (ProgrammedResonance("omega_eg", wa, g1, f"|{m},0,e><->|{target_n},0,g>"),
             ProgrammedResonance("omega_fg", wb, g1, f"|0,{m},f><->|0,{target_n},g>"))))
    return ProtocolPlan(target_n, steps, branch, nominal,
                        (rabi_eg, rabi_fg) if pulse_mode == "finite_duration" else (None, None))


def protocol_duration(plan: ProtocolPlan) -> float:
    """Total time of the step list as executed (pulse widths included)."""
    return plan.total_time


def closed_form_duration(plan: ProtocolPlan) -> float:
    """Total time from the closed-form expressions of the schedule.

    The unmatched schedule uses the printed expression with N fg pulses and
    N - 1 eg pulses, one pulse fewer than the step list performs.
    """
    p = plan.nominal
    n_half = (plan.target_n + 1) // 2 if plan.branch == "odd" else plan.target_n // 2
    tau_eg = math.pi / (2 * plan.pulse_rabi[0]) if plan.pulse_rabi[0] else 0.0
    tau_fg = math.pi / (2 * plan.pulse_rabi[1]) if plan.pulse_rabi[1] else 0.0
    evo = {s.label: abs(s.resonances[0].coupling) for s in plan.steps if s.kind == "resonant_evolution"}
    ga = [evo[f"A{j}"] for j in range(1, n_half + 1) if f"A{j}" in evo]
    gb = [evo[f"B{k}"] for k in range(1, n_half + 1) if f"B{k}" in evo]
    if plan.branch == "even_matched":
        return (sum(math.pi / (2 * g) for g in ga + gb) + (n_half - 1) * (tau_eg + tau_fg)
                + math.pi / (2 * evo["final"]))
    if plan.branch == "even_unmatched":
        return sum(math.pi / (2 * g) for g in ga + gb) + n_half * tau_fg + (n_half - 1) * tau_eg
    return (sum(math.pi / (2 * g) for g in ga + gb) + (n_half - 1) * (tau_eg + tau_fg)
            + math.pi / (2 * math.sqrt(2 * n_half - 1) * p.g_a * math.cos(p.theta)))


@dataclass
class ProtocolResult:
    final_state: np.ndarray
    fidelity: float
    fidelity_sqrt: float
    trajectory: Trajectory
    step_durations: list[float] = field(default_factory=list)
    discarded_weight: float = 0.0

    @property
    def executed_time(self) -> float:
        return float(sum(self.step_durations))


def noon_branches(spec: BasisSpec, n: int) -> tuple[np.ndarray, np.ndarray]:
    return spec.ket(f"{n},0,g"), spec.ket(f"0,{n},g")


def default_spec(target_n: int, margin: int = 4) -> BasisSpec:
    return build_basis(target_n + margin, target_n + margin)


def execute_plan(plan: ProtocolPlan, rates: DecoherenceRates | None = None,
                 spec: BasisSpec | None = None, support_tol: float = 1e-10,
                 photon_box: bool = True, progress=None) -> ProtocolResult:
    """Run the schedule from (|00e> + |00f>)/sqrt(2) and score the NOON state.

    Without decoherence the state stays a vector; otherwise a density matrix is
    evolved with the dressed master equation.  Fidelities are branch-phase
    aligned (see :func:`noon_fidelity`); ``fidelity`` is the overlap and
    ``fidelity_sqrt`` its square root.  ``photon_box`` restricts each
    master-equation step to the photon-number range of the current support.
    """
    spec = spec or default_spec(plan.target_n)
    open_system = rates is not None and rates.any
    state = spec.superpose("00e", "00f")
    if open_system:
        state = as_density(state)
    branch_a, branch_b = noon_branches(spec, plan.target_n)
    g_level = spec.level_index == 0
    times, records, durations = [0.0], [], []
    discarded = 0.0
    cache: dict[int, tuple] = {}

    def record(st):
        rho_diag = np.abs(st) ** 2 if st.ndim == 1 else np.real(np.diag(st))
        records.append([noon_fidelity(st, branch_a, branch_b), rho_diag[g_level].sum()])

    def system(step):
        key = id(step.params)
        if key not in cache:
            h = build_full(step.params, spec)
            es = diagonalize(h, spec)
            ops = dressed_channels(es, rates, eigenbasis=True) if open_system else []
            cache.clear()
            cache[key] = (h, es, ops)
        return cache[key]

    record(state)
    for step in plan.steps:
        if progress:
            progress(step)
        if step.kind == "pulse" and step.pulse.mode == "instantaneous":
            state = apply_pulse(state, step.pulse, spec)
        elif step.kind == "pulse":
            h, es, ops = system(step)
            state = apply_pulse(state, step.pulse, spec, h=h, drive_frequency=step.drive_frequency,
                                dressed_ops=ops, es=es, support_tol=support_tol,
                                photon_box=photon_box)
        else:
            h, es, ops = system(step)
            if open_system:
                tr = evolve_lindblad(h, ops, state, step.duration, es=es, ops_in_eigenbasis=True,
                                     support_tol=support_tol,
                                     photon_box=spec if photon_box else None)
                state = tr.final_state
                discarded += tr.discarded_weight
            else:
                state = propagator(es, step.duration) @ state
        durations.append(step.duration)
        times.append(times[-1] + step.duration)
        record(state)
    if open_system:
        state = 0.5 * (state + state.conj().T)
    fid = noon_fidelity(state, branch_a, branch_b)
    traj = Trajectory(np.array(times), np.array(records), ["noon_fidelity", "qutrit_g"],
                      np.array([r[0] for r in records]), None, state, discarded)
    return ProtocolResult(state, fid, math.sqrt(fid), traj, durations, discarded)
