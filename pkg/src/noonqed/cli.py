"""Command-line front end: ``noonqed run|validate|plan <config>``.

Each experiment writes ``series.csv`` and ``manifest.txt`` into the configured
output directory.  Set ``NOONQED_WORKERS`` to evaluate grid points in
parallel processes; rows are always written in grid order.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from importlib import metadata

import numpy as np

from .config import ConfigError, RunConfig, dump_sections, format_value, load_config
from .dynamics import (DecoherenceRates, dressed_channels, evolve_lindblad, evolve_unitary,
                       noon_fidelity)
from .hilbert import BasisState, build_basis
from .model import SystemParams, build_full, build_h0, build_v
from .perturb import (ResonanceKind, at_bare_resonance, effective_coupling, path_sum_second_order,
                      path_sum_third_order, resonance_shift, resonant_spacing, self_energies)
from .protocol import default_spec, execute_plan, matched_gb, plan_noon
from .spectrum import default_cutoffs, diagonalize, find_avoided_crossing

WORKERS_ENV = "NOONQED_WORKERS"


def write_series(path, header, rows) -> None:
    """CSV with floats printed to 12 significant digits."""
    width = len(header)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            if len(row) != width:
                raise ValueError(f"row has {len(row)} fields, header has {width}")
            writer.writerow([_cell(x) for x in row])


def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return int(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return x


def _map(fn, items):
    workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# --- parameter resolution ---------------------------------------------------

def resolve_params(cfg: RunConfig, photons: int = 2) -> SystemParams:
    """Materialize ``g_b = matched`` and ``omega_eg/omega_fg = resonant``."""
    raw = cfg.params
    p = cfg.system()
    k = photons
    bare = p.replace(omega_eg=k * p.omega_a, omega_fg=k * p.omega_b)
    if raw.get("g_b") == "matched":
        p = p.replace(g_b=matched_gb(bare, photons))
        bare = bare.replace(g_b=p.g_b)
    tag = "two_photon" if k == 2 else "three_photon"
    if raw.get("omega_eg") == "resonant":
        p = p.replace(omega_eg=resonant_spacing(bare, f"{tag}_a"))
    if raw.get("omega_fg") == "resonant":
        p = p.replace(omega_fg=resonant_spacing(bare, f"{tag}_b"))
    return p


def _photons(section: dict) -> int:
    family = str(section.get("resonance", "two_photon"))
    if family not in ("two_photon", "three_photon"):
        raise ConfigError("resonance must be two_photon or three_photon", key="resonance")
    return 2 if family == "two_photon" else 3


def _spec_for(cfg: RunConfig, *states):
    return build_basis(*cfg.cutoffs) if cfg.cutoffs else build_basis(*default_cutoffs(*states))


def _as_list(x):
    return x if isinstance(x, list) else [x]


def _parse_target(spec, text: str) -> np.ndarray:
    parts = [t.strip() for t in str(text).split("+")]
    return spec.superpose(*parts) if len(parts) > 1 else spec.ket(parts[0])


# --- experiments ----------------------------------------------------------

def exp_scan_crossing(cfg: RunConfig):
    sw = cfg.section("sweep")
    for key in ("spacing", "lo", "hi", "pair"):
        if key not in sw:
            raise ConfigError("missing sweep setting", key=key)
    pair = [BasisState.parse(s) for s in _as_list(sw["pair"])]
    if len(pair) != 2:
        raise ConfigError("pair needs two states", key="pair")
    p = resolve_params(cfg)
    spec = _spec_for(cfg, *pair)
    res = find_avoided_crossing(p, sw["spacing"], float(sw["lo"]), float(sw["hi"]), pair,
                                spec=spec, n_scan=int(sw.get("points", 401)))
    xs, br = res.scan["values"], res.scan["branches"]
    rows = [(x, b[0], b[1], abs(b[1] - b[0])) for x, b in zip(xs, br)]
    summary = {"location": res.location, "half_gap": res.half_gap,
               "cutoff_a": spec.cutoff_a, "cutoff_b": spec.cutoff_b}
    return ["spacing", "branch_1", "branch_2", "gap"], rows, summary


def _crossing_point(args):
    p, kind, cutoffs, points = args
    kind = ResonanceKind(kind)
    bare = at_bare_resonance(p, kind)
    g = effective_coupling(bare, kind)
    shift = resonance_shift(bare, kind)
    centre = getattr(bare, kind.tag.spacing) + shift
    half = 4 * abs(g) + 0.15 * abs(shift)
    pair = kind.states()
    spec = build_basis(*cutoffs) if cutoffs else build_basis(*default_cutoffs(*pair))
    res = find_avoided_crossing(bare, kind.tag.spacing, centre - half, centre + half, pair,
                                spec=spec, n_scan=points)
    num_shift = res.location - getattr(bare, kind.tag.spacing)
    return res.half_gap, abs(g), res.location, num_shift, shift


def _crossing_sweep(cfg: RunConfig):
    sw = cfg.section("sweep")
    kind = str(sw.get("resonance", "two_photon_a"))
    coupling = str(sw.get("coupling", "g_a"))
    if coupling not in ("g_a", "g_b"):
        raise ConfigError("coupling must be g_a or g_b", key="coupling")
    if "values" not in sw:
        raise ConfigError("missing sweep values", key="values")
    base = cfg.system()
    values = [float(v) for v in _as_list(sw["values"])]
    jobs = [(base.replace(**{coupling: v}), kind, cfg.cutoffs, int(sw.get("points", 401)))
            for v in values]
    return coupling, values, _map(_crossing_point, jobs)


def exp_coupling_vs_g(cfg: RunConfig):
    name, values, out = _crossing_sweep(cfg)
    rows = [(v, hg, g, hg / g - 1) for v, (hg, g, *_rest) in zip(values, out)]
    return [name, "numeric_half_gap", "analytic_coupling", "relative_error"], rows, {}


def exp_shift_vs_g(cfg: RunConfig):
    name, values, out = _crossing_sweep(cfg)
    rows = [(v, loc, ns, s, ns / s - 1) for v, (_hg, _g, loc, ns, s) in zip(values, out)]
    return [name, "numeric_location", "numeric_shift", "analytic_shift", "relative_error"], rows, {}


def _rabi_setup(cfg: RunConfig):
    rb = cfg.section("rabi")
    photons = _photons(rb)
    p = resolve_params(cfg, photons)
    tag = "two_photon" if photons == 2 else "three_photon"
    bare = p.replace(omega_eg=photons * p.omega_a, omega_fg=photons * p.omega_b)
    period = math.pi / abs(effective_coupling(bare, f"{tag}_a"))
    t_final = rb.get("t_final", "half_period")
    if t_final == "half_period":
        t_final = period / 2
    elif t_final == "period":
        t_final = period
    elif isinstance(t_final, str):
        raise ConfigError("t_final must be a number, period or half_period", key="t_final")
    initial = [BasisState.parse(s) for s in _as_list(rb.get("initial", ["00e", "00f"]))]
    n = max(photons, int(rb.get("noon", photons)))
    spec = build_basis(*cfg.cutoffs) if cfg.cutoffs else build_basis(n + 4, n + 4)
    psi0 = spec.superpose(*initial)
    return p, spec, psi0, float(t_final), period, rb


def exp_rabi(cfg: RunConfig):
    p, spec, psi0, t_final, period, rb = _rabi_setup(cfg)
    labels = [str(t) for t in _as_list(rb.get("targets", ["20g", "00e"]))]
    targets = [_parse_target(spec, t) for t in labels]
    noon = rb.get("noon")
    fid = None
    if noon is not None:
        a, b = spec.ket(f"{noon},0,g"), spec.ket(f"0,{noon},g")
        fid = lambda s: noon_fidelity(s, a, b)
    h = build_full(p, spec)
    tr = evolve_unitary(h, psi0, t_final, int(rb.get("samples", 401)), targets=targets, fidelity=fid)
    header = ["time"] + [f"P({t})" for t in labels] + (["noon_aligned"] if fid else [])
    rows = [[t, *pops] + ([tr.fidelity[k]] if fid else [])
            for k, (t, pops) in enumerate(zip(tr.times, tr.populations))]
    return header, rows, {"period": period, "t_final": t_final, **_resolved(p)}


def _decoherence_point(args):
    p, spec_dims, psi0, t_final, n, gamma = args
    spec = build_basis(*spec_dims)
    h = build_full(p, spec)
    es = diagonalize(h, spec)
    rates = DecoherenceRates.uniform(gamma)
    ops = dressed_channels(es, rates, eigenbasis=True)
    tr = evolve_lindblad(h, ops, psi0, t_final, es=es, ops_in_eigenbasis=True, support_tol=1e-10)
    a, b = spec.ket(f"{n},0,g"), spec.ket(f"0,{n},g")
    f = noon_fidelity(tr.final_state, a, b)
    return f, math.sqrt(f), tr.trace[-1]


def exp_decoherence_sweep(cfg: RunConfig):
    p, spec, psi0, t_final, period, rb = _rabi_setup(cfg)
    n = int(rb.get("noon", _photons(rb)))
    gammas = [float(g) for g in _as_list(cfg.section("grid").get("gammas", [0.0]))]
    dims = (spec.cutoff_a, spec.cutoff_b)
    out = _map(_decoherence_point, [(p, dims, psi0, t_final, n, g) for g in gammas])
    rows = [(g, *o) for g, o in zip(gammas, out)]
    return ["gamma", "fidelity", "fidelity_sqrt", "trace"], rows, {"t_final": t_final, **_resolved(p)}


def _protocol_options(cfg: RunConfig):
    pr = cfg.section("protocol")
    mode = str(pr.get("pulse_mode", "instantaneous"))
    rabi_eg = pr.get("rabi_eg", cfg.extras.get("rabi_eg"))
    rabi_fg = pr.get("rabi_fg", cfg.extras.get("rabi_fg"))
    return dict(pulse_mode=mode, rabi_eg=rabi_eg, rabi_fg=rabi_fg,
                force_unmatched=bool(pr.get("force_unmatched", False)),
                park_offset=float(pr.get("park_offset", 5.0)))


def _protocol_point(args):
    p, n, shifts, options, rates, margin = args
    plan = plan_noon(n, p, with_crosstalk_shifts=(shifts == "crosstalk"), **options)
    res = execute_plan(plan, rates, spec=default_spec(n, margin))
    return plan.branch, plan.total_time, res.fidelity, res.fidelity_sqrt


def _protocol_grid(cfg: RunConfig, default_ratios, default_shifts):
    pr = cfg.section("protocol")
    base = resolve_params(cfg)
    targets = [int(t) for t in _as_list(pr.get("targets", [2]))]
    ratios = [float(r) for r in _as_list(pr.get("g_ab_ratios", default_ratios))]
    shifts = [str(s) for s in _as_list(pr.get("shifts", default_shifts))]
    for s in shifts:
        if s not in ("printed", "crosstalk"):
            raise ConfigError("shifts must be printed or crosstalk", key="shifts")
    options = _protocol_options(cfg)
    margin = int(pr.get("cutoff_margin", 4))
    grid = [(n, r, s) for n in targets for r in ratios for s in shifts]
    jobs = [(base.replace(g_ab=r * base.g_a), n, s, options, cfg.rates, margin) for n, r, s in grid]
    return base, grid, _map(_protocol_point, jobs)


def exp_protocol(cfg: RunConfig):
    ratio = cfg.system().g_ab / cfg.system().g_a if cfg.system().g_a else 0.0
    base, grid, out = _protocol_grid(cfg, [ratio], ["printed"])
    rows = [(n, r, s, *o) for (n, r, s), o in zip(grid, out)]
    return (["target_n", "g_ab_ratio", "shifts", "branch", "total_time", "fidelity", "fidelity_sqrt"],
            rows, _resolved(base))


def exp_table1(cfg: RunConfig):
    base, grid, out = _protocol_grid(cfg, [0.5], ["printed", "crosstalk"])
    cells = {(n, r, s): o for (n, r, s), o in zip(grid, out)}
    rows = []
    for n, r in dict.fromkeys((n, r) for n, r, _ in grid):
        pr, xt = cells[(n, r, "printed")], cells[(n, r, "crosstalk")]
        rows.append((n, r, pr[2], xt[2], pr[3], xt[3]))
    header = ["target_n", "g_ab_ratio", "fidelity_printed", "fidelity_modified",
              "fidelity_sqrt_printed", "fidelity_sqrt_modified"]
    return header, rows, _resolved(base)


def exp_pathsum_report(cfg: RunConfig):
    p = cfg.system()
    kinds = ["two_photon_a", "two_photon_b"]
    if abs(math.sin(p.theta)) < 1e-12:
        kinds += ["three_photon_a", "three_photon_b"]
    rows = []
    for tag in kinds:
        kind = ResonanceKind(tag)
        bare = at_bare_resonance(p, kind)
        i, j = kind.states()
        spec = _spec_for(cfg, i, j)
        h0, v = build_h0(bare, spec), build_v(bare, spec)
        summer = path_sum_second_order if kind.tag.photons == 2 else path_sum_third_order
        val, paths = summer(h0, v, i, j, spec)
        closed = effective_coupling(bare, kind)
        rows.append(("coupling", tag, closed, val, _rel(val, closed), len(paths)))
        e_i, e_f = self_energies(bare, kind)
        for label, state, closed_e in (("self_energy_initial", i, e_i), ("self_energy_final", j, e_f)):
            val, paths = path_sum_second_order(h0, v, state, state, spec)
            rows.append((label, tag, closed_e, val, _rel(val, closed_e), len(paths)))
    return ["quantity", "resonance", "closed_form", "path_sum", "relative_difference", "n_paths"], rows, {}


def _rel(a, b):
    return abs(a - b) / abs(b) if b else abs(a - b)


def _resolved(p: SystemParams) -> dict:
    return {f"resolved_{k}": v for k, v in p.as_dict().items()}


EXPERIMENTS = {
    "scan_crossing": exp_scan_crossing,
    "coupling_vs_g": exp_coupling_vs_g,
    "shift_vs_g": exp_shift_vs_g,
    "rabi": exp_rabi,
    "decoherence_sweep": exp_decoherence_sweep,
    "protocol": exp_protocol,
    "table1": exp_table1,
    "pathsum_report": exp_pathsum_report,
}


def code_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def run(cfg: RunConfig) -> int:
    start = time.perf_counter()
    header, rows, summary = EXPERIMENTS[cfg.experiment](cfg)
    cfg.output.mkdir(parents=True, exist_ok=True)
    write_series(cfg.output / "series.csv", header, rows)
    manifest = {k: dict(v) for k, v in cfg.sections.items()}
    manifest["resolved"] = {
        **{k: format_value(v) for k, v in cfg.system().as_dict().items()},
        "rates": "none" if cfg.rates is None else ", ".join(f"{k}={v!r}" for k, v in cfg.rates.items()),
        "cutoffs": "auto" if cfg.cutoffs is None else f"{cfg.cutoffs[0]}, {cfg.cutoffs[1]}",
        "workers": os.environ.get(WORKERS_ENV, "1"),
        **{k: format_value(v) for k, v in cfg.extras.items()},
        **_experiment_defaults(cfg),
    }
    manifest["result"] = {k: format_value(v) for k, v in summary.items()}
    manifest["provenance"] = {"code_version": code_version(),
                              "wall_time_s": f"{time.perf_counter() - start:.3f}",
                              "rows": len(rows)}
    (cfg.output / "manifest.txt").write_text(dump_sections(manifest))
    return 0


def _experiment_defaults(cfg: RunConfig) -> dict:
    """Every default an experiment reads, echoed for the manifest."""
    e = cfg.experiment
    d: dict = {}
    if e in ("coupling_vs_g", "shift_vs_g"):
        sw = cfg.section("sweep")
        d = {"sweep.resonance": sw.get("resonance", "two_photon_a"),
             "sweep.coupling": sw.get("coupling", "g_a"), "sweep.points": sw.get("points", 401)}
    elif e == "scan_crossing":
        d = {"sweep.points": cfg.section("sweep").get("points", 401)}
    elif e in ("rabi", "decoherence_sweep"):
        rb = cfg.section("rabi")
        d = {"rabi.resonance": rb.get("resonance", "two_photon"),
             "rabi.initial": format_value(rb.get("initial", ["00e", "00f"])),
             "rabi.t_final": rb.get("t_final", "half_period"),
             "rabi.samples": rb.get("samples", 401)}
    elif e in ("protocol", "table1"):
        pr = cfg.section("protocol")
        d = {f"protocol.{k}": format_value(v) for k, v in _protocol_options(cfg).items()}
        d["protocol.cutoff_margin"] = pr.get("cutoff_margin", 4)
    return {k: format_value(v) for k, v in d.items()}


def _error_record(exc: Exception) -> str:
    record = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigError):
        record.update(line=exc.line, key=exc.key)
    return json.dumps(record)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="noonqed", description="NOON-state preparation experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("run", "run the experiment and write CSV + manifest"),
                            ("validate", "parse and validate the configuration only"),
                            ("plan", "print the protocol step listing")):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("config")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "validate":
            print(f"ok: {cfg.experiment} -> {cfg.output}")
            return 0
        if args.command == "plan":
            base = resolve_params(cfg)
            options = _protocol_options(cfg)
            for n in [int(t) for t in _as_list(cfg.section("protocol").get("targets", [2]))]:
                print(plan_noon(n, base, **options).listing())
            return 0
        return run(cfg)
    except Exception as exc:  # noqa: BLE001 - every failure becomes an error record
        print(_error_record(exc), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
