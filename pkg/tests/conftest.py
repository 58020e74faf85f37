import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qutritlab.core import make_pentagram

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

SQRT5 = math.sqrt(5)


def umbrella_vectors():
    """Pentagram vectors from the umbrella picture: azimuth 4*pi*k/5, common height."""
    r2 = math.cos(math.pi / 5)
    out = []
    for k in range(5):
        phi = 4 * math.pi * k / 5
        v = np.array([math.cos(phi), math.sin(phi), math.sqrt(r2)])
        out.append(v / np.linalg.norm(v))
    return np.array(out, dtype=complex)


def brute_joint(psi, a, b):
    """[p_yy, p_yn, p_ny, p_nn] from explicit projector products on a pure state."""
    pa = np.outer(a, a.conj())
    pb = np.outer(b, b.conj())
    eye = np.eye(len(psi))
    out = []
    for first in (pa, eye - pa):
        for second in (pb, eye - pb):
            out.append(float(np.linalg.norm(second @ first @ psi) ** 2))
    return np.array(out)


def brute_joint_rho(rho, a, b):
    pa = np.outer(a, a.conj())
    pb = np.outer(b, b.conj())
    eye = np.eye(rho.shape[0])
    out = []
    for first in (pa, eye - pa):
        for second in (pb, eye - pb):
            k = second @ first
            out.append(float(np.trace(k @ rho @ k.conj().T).real))
    return np.array(out)


def random_unit(rng, dim=3):
    z = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return z / np.linalg.norm(z)


@pytest.fixture(scope="session")
def pentagram():
    return make_pentagram()
