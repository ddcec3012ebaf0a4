import numpy as np
import pytest

from noonqed.hilbert import (BasisState, build_basis, level_projector, mode_operator,
                             qutrit_operator)


@pytest.mark.parametrize("cutoffs, dim", [((0, 0), 3), ((4, 4), 75), ((8, 8), 243)])
def test_dimension(cutoffs, dim):
    assert build_basis(*cutoffs).dim == dim


def test_index_layout_roundtrip():
    spec = build_basis(3, 2)
    for k in range(spec.dim):
        assert spec.index(spec.state(k)) == k
    assert spec.index(BasisState(1, 2, "f")) == 2 + 3 * (2 + 3 * 1)


def test_label_parsing():
    assert BasisState.parse("20g") == BasisState(2, 0, "g")
    assert BasisState.parse("|10,2,e>") == BasisState(10, 2, "e")
    with pytest.raises(ValueError):
        BasisState.parse("120g")
    with pytest.raises(ValueError):
        BasisState(0, 0, "x")


def test_out_of_range_state():
    with pytest.raises(IndexError):
        build_basis(2, 2).ket("30g")


def test_negative_cutoff_rejected():
    with pytest.raises(ValueError):
        build_basis(-1, 3)


def test_annihilation_action():
    spec = build_basis(4, 4)
    a = mode_operator(spec, "a", "annihilate")
    out = a @ spec.ket("20g")
    np.testing.assert_allclose(out, np.sqrt(2) * spec.ket("10g"), atol=1e-15)
    b = mode_operator(spec, "b", "annihilate")
    np.testing.assert_allclose(b @ spec.ket("03f"), np.sqrt(3) * spec.ket("02f"), atol=1e-15)


def test_commutator_only_fails_at_cutoff():
    cutoff = 5
    spec = build_basis(cutoff, 2)
    a = mode_operator(spec, "a", "annihilate")
    comm = a @ a.conj().T - a.conj().T @ a
    n_a, _ = spec.photon_numbers
    diag = np.real(np.diag(comm))
    np.testing.assert_allclose(diag[n_a < cutoff], 1.0)
    np.testing.assert_allclose(diag[n_a == cutoff], -cutoff)
    assert np.allclose(comm - np.diag(np.diag(comm)), 0)


def test_number_operator():
    spec = build_basis(3, 3)
    n_b = mode_operator(spec, "b", "number")
    assert np.allclose(np.diag(n_b).real, spec.photon_numbers[1])


def test_qutrit_operators():
    spec = build_basis(1, 1)
    lower = qutrit_operator(spec, "fe", "lower")
    np.testing.assert_allclose(lower @ spec.ket("11f"), spec.ket("11e"))
    sz = qutrit_operator(spec, "eg", "sigma_z")
    assert np.allclose(sz @ spec.ket("00e"), spec.ket("00e"))
    assert np.allclose(sz @ spec.ket("00g"), -spec.ket("00g"))
    assert np.allclose(sz @ spec.ket("00f"), 0)
    proj = level_projector(spec, "f")
    assert np.isclose(np.trace(proj).real, 4)
    with pytest.raises(ValueError):
        qutrit_operator(spec, "gg", "lower")


def test_superpose_normalized():
    spec = build_basis(2, 2)
    v = spec.superpose("00e", "00f")
    assert np.isclose(np.linalg.norm(v), 1)
    assert np.isclose(abs(v[spec.index(BasisState(0, 0, "e"))]) ** 2, 0.5)
