"""Exponential integrators for semilinear problems u_t = L u + N(u, t) with a
diagonal (Fourier) linear symbol L.

ETDRK4 follows the Cox-Matthews stage structure with coefficients written in
terms of the phi functions

    phi1(z) = (e^z - 1)/z,   phi2(z) = (e^z - 1 - z)/z^2,
    phi3(z) = (e^z - 1 - z - z^2/2)/z^3,

evaluated by a Taylor series below |z| = 1 (the removable singularity at the
k = 0 mode) and by the closed form above it.  This stays accurate for purely
imaginary symbols, where contour tricks that take real parts do not apply.
"""

from __future__ import annotations

import numpy as np

SERIES_RADIUS = 1.0
_SERIES_TERMS = 24


def _phi_series(z: np.ndarray, j: int) -> np.ndarray:
    # sum_{n>=0} z^n / (n + j)!  via Horner from the highest term
    import math

    out = np.zeros_like(z)
    for n in range(_SERIES_TERMS, -1, -1):
        out = out * z + 1.0 / math.factorial(n + j)
    return out


def phi1(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.complex128)
    small = np.abs(z) < SERIES_RADIUS
    zs = np.where(small, 0.0, z)
    with np.errstate(invalid="ignore", divide="ignore"):
        direct = (np.exp(zs) - 1.0) / np.where(small, 1.0, zs)
    return np.where(small, _phi_series(z, 1), direct)


def phi2(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.complex128)
    small = np.abs(z) < SERIES_RADIUS
    zs = np.where(small, 0.0, z)
    with np.errstate(invalid="ignore", divide="ignore"):
        direct = (np.exp(zs) - 1.0 - zs) / np.where(small, 1.0, zs) ** 2
    return np.where(small, _phi_series(z, 2), direct)


def phi3(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.complex128)
    small = np.abs(z) < SERIES_RADIUS
    zs = np.where(small, 0.0, z)
    with np.errstate(invalid="ignore", divide="ignore"):
        direct = (np.exp(zs) - 1.0 - zs - 0.5 * zs**2) / np.where(small, 1.0, zs) ** 3
    return np.where(small, _phi_series(z, 3), direct)


class Etdrk4:
    """Fourth-order exponential time differencing RK for u_t = L u + N(u, t)."""

    def __init__(self, symbol: np.ndarray, dt: float, nonlinear):
        self.dt = float(dt)
        self.nonlinear = nonlinear
        z = self.dt * np.asarray(symbol, dtype=np.complex128)
        self.E = np.exp(z)
        self.E2 = np.exp(0.5 * z)
        self.Q = self.dt * 0.5 * phi1(0.5 * z)
        p1, p2, p3 = phi1(z), phi2(z), phi3(z)
        self.f1 = self.dt * (p1 - 3.0 * p2 + 4.0 * p3)
        self.f2 = self.dt * (p2 - 2.0 * p3)
        self.f3 = self.dt * (4.0 * p3 - p2)

    def step(self, v: np.ndarray, t: float) -> np.ndarray:
        h = self.dt
        n0 = self.nonlinear(v, t)
        a = self.E2 * v + self.Q * n0
        na = self.nonlinear(a, t + 0.5 * h)
        b = self.E2 * v + self.Q * na
        nb = self.nonlinear(b, t + 0.5 * h)
        c = self.E2 * a + self.Q * (2.0 * nb - n0)
        nc = self.nonlinear(c, t + h)
        return self.E * v + self.f1 * n0 + 2.0 * self.f2 * (na + nb) + self.f3 * nc

    def step_forced(self, v: np.ndarray, t: float, source) -> np.ndarray:
        """Step with a state-independent source; evaluates it at the stage times."""
        h = self.dt
        s0 = source(t)
        sh = source(t + 0.5 * h)
        s1 = source(t + h)
        return self.E * v + self.f1 * s0 + 4.0 * self.f2 * sh + self.f3 * s1


class Ifrk4:
    """Integrating-factor classical RK4: exact linear phase, RK4 nonlinearity."""

    def __init__(self, symbol: np.ndarray, dt: float, nonlinear):
        self.dt = float(dt)
        self.nonlinear = nonlinear
        z = self.dt * np.asarray(symbol, dtype=np.complex128)
        self.E = np.exp(z)
        self.E2 = np.exp(0.5 * z)

    def step(self, v: np.ndarray, t: float) -> np.ndarray:
        h = self.dt
        k1 = h * self.nonlinear(v, t)
        k2 = h * self.nonlinear(self.E2 * (v + 0.5 * k1), t + 0.5 * h)
        k3 = h * self.nonlinear(self.E2 * v + 0.5 * k2, t + 0.5 * h)
        k4 = h * self.nonlinear(self.E * v + self.E2 * k3, t + h)
        return self.E * v + (self.E * k1 + 2.0 * self.E2 * (k2 + k3) + k4) / 6.0
