import math
import warnings

import numpy as np
import pytest

from noonqed.hilbert import BasisState as S
from noonqed.hilbert import build_basis
from noonqed.model import SystemParams, build_crosstalk, build_full, build_h0, build_v


def test_bare_energies():
    p = SystemParams(omega_b=1.7, omega_eg=2.0, omega_fg=3.4)
    spec = build_basis(3, 3)
    h0 = np.real(np.diag(build_h0(p, spec)))
    assert h0[spec.index(S(0, 0, "g"))] == 0.0
    assert math.isclose(h0[spec.index(S(2, 1, "f"))], 2 + 1.7 + 3.4)


def test_interaction_elements():
    theta = math.pi / 6
    p = SystemParams(g_a=0.05, g_b=0.03, theta=theta)
    spec = build_basis(3, 3)
    v = build_v(p, spec)
    i = spec.index
    # transversal part: <1,0,e|V|0,0,g> = g_a cos(theta)
    assert math.isclose(v[i(S(1, 0, "e")), i(S(0, 0, "g"))].real, 0.05 * math.cos(theta))
    # longitudinal part: sigma_z of eg and fg both act on g, with sign -1 each
    assert math.isclose(v[i(S(1, 0, "g")), i(S(0, 0, "g"))].real, -2 * 0.05 * math.sin(theta))
    # e sits on the upper side of eg and the lower side of fe
    assert math.isclose(v[i(S(0, 1, "e")), i(S(0, 0, "e"))].real, 0.0, abs_tol=1e-15)
    assert math.isclose(v[i(S(0, 2, "f")), i(S(0, 1, "f"))].real, 2 * 0.03 * math.sin(theta) * math.sqrt(2))


def test_crosstalk_element():
    p = SystemParams(g_ab=0.007)
    spec = build_basis(2, 2)
    c = build_crosstalk(p, spec)
    assert math.isclose(c[spec.index(S(1, 0, "g")), spec.index(S(0, 1, "g"))].real, 0.007)
    assert math.isclose(c[spec.index(S(1, 1, "e")), spec.index(S(0, 0, "e"))].real, 0.007)
    assert np.allclose(build_full(p, spec, include_crosstalk=False), build_full(p.replace(g_ab=0), spec))


def test_hermitian():
    spec = build_basis(4, 3)
    h = build_full(SystemParams(g_a=0.08, g_b=0.02, theta=0.4, g_ab=0.01), spec)
    assert np.allclose(h, h.conj().T)


def test_transition_overrides():
    spec = build_basis(1, 1)
    p = SystemParams(g_a=0.05, g_b=0.05, transition_couplings={"fe": (0.0, 0.0)})
    v = build_v(p, spec)
    assert v[spec.index(S(1, 0, "f")), spec.index(S(0, 0, "e"))] == 0
    with pytest.raises(ValueError):
        SystemParams(transition_couplings={"xy": (0, 0)})


@pytest.mark.parametrize("changes", [dict(omega_a=0), dict(g_a=-0.1), dict(omega_eg=-1)])
def test_invalid_params(changes):
    with pytest.raises(ValueError):
        SystemParams(**changes)


def test_inverted_levels_warn():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        SystemParams(omega_eg=3.0, omega_fg=2.0)
    assert any("inverted" in str(w.message) for w in caught)
