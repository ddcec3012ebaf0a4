import math

import numpy as np
import pytest

from noonqed.hilbert import BasisState, build_basis, mode_operator
from noonqed.model import SystemParams, build_full, build_h0
from noonqed.perturb import effective_coupling, resonance_shift
from noonqed.spectrum import (NoCrossingError, diagonalize, dress_operator, dress_operator_eigen,
                              find_avoided_crossing, locate_state)

FIG1A = SystemParams(omega_b=1.7, omega_eg=2.0, omega_fg=3.4, g_a=0.05, g_b=0.05, theta=math.pi / 6)
FIG3A = SystemParams(omega_b=2.2, omega_eg=3.0, omega_fg=6.6, g_a=0.1, g_b=0.1, theta=0.0)
PAIR2 = ("00e", "20g")


@pytest.fixture(scope="module")
def crossing2():
    return find_avoided_crossing(FIG1A, "omega_eg", 1.95, 2.02, PAIR2)


def test_uncoupled_spectrum_is_bare():
    spec = build_basis(2, 2)
    es = diagonalize(build_h0(FIG1A, spec), spec)
    assert np.allclose(np.sort(np.diag(build_h0(FIG1A, spec)).real), es.energies)
    assert np.allclose(np.abs(es.vectors).max(axis=0), 1.0)
    m = locate_state(es, BasisState(0, 0, "e"))
    assert m.overlap == pytest.approx(1.0) and not m.ambiguous


def test_two_level_gap():
    c, d = 0.03, 0.11
    h = np.array([[0.0, c], [c, d]])
    es = diagonalize(h)
    assert es.energies[1] - es.energies[0] == pytest.approx(math.sqrt(d**2 + 4 * c**2), rel=1e-14)


def test_non_hermitian_rejected():
    with pytest.raises(ValueError, match="Hermitian"):
        diagonalize(np.array([[0, 1], [0, 0]], dtype=complex))


def test_residuals_unitarity_and_reconstruction():
    spec = build_basis(5, 5)
    h = build_full(FIG1A.replace(g_ab=0.01), spec)
    es = diagonalize(h, spec)
    norm = np.abs(h).max()
    assert np.all(np.diff(es.energies) >= 0)
    resid = np.linalg.norm(h @ es.vectors - es.vectors * es.energies, axis=0)
    assert resid.max() <= 1e-9 * np.linalg.norm(h, 2)
    assert np.allclose(es.vectors.conj().T @ es.vectors, np.eye(spec.dim), atol=1e-9)
    recon = (es.vectors * es.energies) @ es.vectors.conj().T
    assert np.abs(recon - h).max() <= 1e-8 * norm


def test_fig1a_crossing(crossing2):
    g = effective_coupling(FIG1A, "two_photon_a")
    assert crossing2.half_gap == pytest.approx(abs(g), rel=0.05)
    assert crossing2.overlaps == pytest.approx(np.full((2, 2), 1 / math.sqrt(2)), abs=0.1)
    shift = resonance_shift(FIG1A, "two_photon_a")
    assert crossing2.location - 2.0 == pytest.approx(shift, rel=0.1)


def test_eigenvectors_at_crossing_are_symmetric(crossing2):
    spec = build_basis(6, 6)
    es = diagonalize(build_full(FIG1A.replace(omega_eg=crossing2.location), spec), spec)
    i, j = spec.index(BasisState(0, 0, "e")), spec.index(BasisState(2, 0, "g"))
    m = locate_state(es, BasisState(0, 0, "e"))
    assert m.ambiguous
    v = es.vectors[:, m.index]
    assert abs(v[i]) ** 2 + abs(v[j]) ** 2 > 0.95


def test_far_from_crossing_identification():
    spec = build_basis(6, 6)
    es = diagonalize(build_full(FIG1A.replace(omega_eg=1.95), spec), spec)
    m = locate_state(es, BasisState(0, 0, "e"))
    assert m.overlap > 0.95 and not m.ambiguous


def test_gap_consistency(crossing2):
    spec = build_basis(6, 6)
    es = diagonalize(build_full(FIG1A.replace(omega_eg=crossing2.location), spec), spec)
    lo, hi = crossing2.branch_indices
    assert es.energies[hi] - es.energies[lo] == pytest.approx(crossing2.gap, abs=1e-9)
    scanned = np.abs(np.diff(crossing2.scan["branches"], axis=1)).min()
    assert crossing2.gap <= scanned + 1e-12
    assert len(crossing2.scan["values"]) >= 400


def test_cutoff_convergence(crossing2):
    params = FIG1A.replace(omega_eg=crossing2.location)
    lo, hi = crossing2.branch_indices
    small = diagonalize(build_full(params, build_basis(6, 6)))
    large = diagonalize(build_full(params, build_basis(12, 12)))
    for k in (lo, hi):
        e = small.energies[k]
        assert np.min(np.abs(large.energies - e)) < 1e-8


def test_three_photon_crossing():
    g = effective_coupling(FIG3A, "three_photon_a")
    shift = resonance_shift(FIG3A, "three_photon_a")
    centre = 3.0 + shift
    res = find_avoided_crossing(FIG3A, "omega_eg", centre - 0.01, centre + 0.01, ("00e", "30g"))
    assert res.half_gap == pytest.approx(abs(g), rel=0.05)


def test_weak_coupling_limit():
    p = FIG1A.replace(g_a=1e-3, g_b=1e-3)
    res = find_avoided_crossing(p, "omega_eg", 1.999, 2.001, PAIR2, n_scan=401)
    assert res.gap < 1e-5
    assert res.location == pytest.approx(2.0, abs=1e-4)


def test_no_crossing_in_window():
    with pytest.raises(NoCrossingError):
        find_avoided_crossing(FIG1A, "omega_eg", 1.90, 1.93, PAIR2, n_scan=401)


def test_bad_sweep_arguments():
    with pytest.raises(ValueError):
        find_avoided_crossing(FIG1A, "omega_eg", 2.0, 1.9, PAIR2)
    with pytest.raises(ValueError):
        find_avoided_crossing(FIG1A, "omega_a", 1.9, 2.0, PAIR2)


def test_dressed_operator_uncoupled_is_bare():
    spec = build_basis(3, 3)
    es = diagonalize(build_h0(FIG1A, spec), spec)
    a = mode_operator(spec, "a", "annihilate")
    assert np.allclose(dress_operator(es, a), a)


def test_dressed_operator_lower_triangular():
    spec = build_basis(4, 4)
    es = diagonalize(build_full(FIG1A, spec), spec)
    o = dress_operator_eigen(es, mode_operator(spec, "b", "annihilate"))
    # strictly lowering: only <E_m|O|E_n> with E_n > E_m, i.e. above the diagonal
    assert np.allclose(np.tril(o), 0)
    # nothing lies below the ground state
    assert np.allclose(o[:, 0], 0)
    assert np.linalg.norm(o.conj().T[:, 0]) > 0


def test_energy_cap_excludes_states():
    spec = build_basis(4, 4)
    es = diagonalize(build_full(FIG1A, spec), spec)
    cap = es.energies[20]
    o = dress_operator_eigen(es, mode_operator(spec, "a", "annihilate"), energy_cap=cap)
    assert np.allclose(o[21:, :], 0) and np.allclose(o[:, 21:], 0)
