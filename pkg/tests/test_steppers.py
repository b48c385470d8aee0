import mpmath
import numpy as np
import pytest

from gkdvlab.steppers import phi1, phi2, phi3


def mp_phi(z, j):
    z = mpmath.mpc(z)
    if abs(z) == 0:
        return 1.0 / mpmath.factorial(j)
    e = mpmath.e**z
    if j == 1:
        return (e - 1) / z
    if j == 2:
        return (e - 1 - z) / z**2
    return (e - 1 - z - z**2 / 2) / z**3


SAMPLES = [
    0.0,
    1e-12,
    -1e-8,
    0.3j,
    -0.3j,
    0.999j,
    1.001j,
    5.0j,
    -40.0j,
    2000.0j,
    -0.5 + 0.5j,
    -3.0 + 10.0j,
]


@pytest.mark.parametrize("fn,j", [(phi1, 1), (phi2, 2), (phi3, 3)])
def test_phi_against_high_precision(fn, j):
    mpmath.mp.dps = 80
    z = np.array(SAMPLES, dtype=np.complex128)
    got = fn(z)
    for zi, gi in zip(SAMPLES, got):
        ref = complex(mp_phi(zi, j))
        assert abs(gi - ref) <= 1e-14 * max(abs(ref), 1.0), f"phi{j}({zi})"


def test_phi_series_direct_agree_at_threshold():
    # values just inside and outside the series radius must agree smoothly
    for r in (0.98, 1.02):
        for ang in np.linspace(0, 2 * np.pi, 17):
            z = np.array([r * np.exp(1j * ang)])
            for fn, j in ((phi1, 1), (phi2, 2), (phi3, 3)):
                mpmath.mp.dps = 80
                ref = complex(mp_phi(complex(z[0]), j))
                assert abs(fn(z)[0] - ref) <= 1e-13 * max(abs(ref), 1.0)
