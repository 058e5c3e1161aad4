import numpy as np
import pytest
from hypothesis import settings
from scipy import integrate

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


def ergodic_quadrature(power, mean):
    """E[log2(1 + P g)] for g ~ Exp(mean), by 1-D quadrature."""
    val, err = integrate.quad(lambda x: np.log2(1 + power * x) * np.exp(-x / mean) / mean, 0, np.inf,
                              epsabs=1e-12, epsrel=1e-12)
    return val, err


def secrecy_quadrature_n2(power, mean_base, mean_eve, i=0):
    """E[log2(1+P g_i) - log2(1+P c_ij) | g_i >= g_j] for two users.

    The conditional mean of the main-link term is a 2-D integral over the
    joint density of (g_i, g_j) restricted to g_j <= g_i, normalized by the
    same integral of the density alone. The eavesdropper gain (mean
    ``mean_eve``, user i towards user j) is independent of both, so its term
    is a 1-D integral.
    """
    mi, mj = mean_base[i], mean_base[1 - i]

    def dens(y, x):
        return np.exp(-x / mi) / mi * np.exp(-y / mj) / mj

    upper = 60 * max(mi, mj)
    num, e1 = integrate.dblquad(lambda y, x: np.log2(1 + power * x) * dens(y, x), 0, upper,
                                0, lambda x: x, epsabs=1e-11, epsrel=1e-11)
    prob, e2 = integrate.dblquad(dens, 0, upper, 0, lambda x: x, epsabs=1e-12, epsrel=1e-12)
    eve, e3 = ergodic_quadrature(power, mean_eve)
    return num / prob - eve, e1 / prob + e2 + e3


@pytest.fixture
def quad_oracles():
    return {"ergodic": ergodic_quadrature, "secrecy_n2": secrecy_quadrature_n2}
