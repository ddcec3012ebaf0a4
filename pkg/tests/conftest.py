import math

import pytest

from noonqed.model import SystemParams
from noonqed.perturb import resonant_spacing
from noonqed.protocol import matched_gb


def resolved_params(omega_b, g_a, theta, photons):
    """Figure parameters with g_b matched and both spacings on the shifted resonances."""
    tag = "two_photon" if photons == 2 else "three_photon"
    bare = SystemParams(omega_b=omega_b, omega_eg=photons, omega_fg=photons * omega_b,
                        g_a=g_a, theta=theta)
    bare = bare.replace(g_b=matched_gb(bare, photons))
    return bare.replace(omega_eg=resonant_spacing(bare, f"{tag}_a"),
                        omega_fg=resonant_spacing(bare, f"{tag}_b")), bare


@pytest.fixture(scope="session")
def fig2():
    return resolved_params(1.7, 0.05, math.pi / 6, 2)


@pytest.fixture(scope="session")
def fig4():
    return resolved_params(2.2, 0.1, 0.0, 3)
