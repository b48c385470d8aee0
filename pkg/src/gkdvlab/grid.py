"""Periodic spatial discretization: grids, spectral derivatives, quadrature,
dealiased nonlinear powers, and snapshot files.

All fields live on a uniform periodic grid of 2**m points.  Wavenumbers are
physical (2*pi*k/L) and the Nyquist mode is zeroed after odd derivatives so
real fields stay real.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ModelError

# Realness / Parseval hygiene accepted after every public operation.
REAL_TOL = 1e-12

MAX_DERIVATIVE_ORDER = 6


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid: num_points samples over [origin, origin + L)."""

    num_points: int
    domain_length: float
    origin: float = 0.0

    def __post_init__(self):
        if self.num_points < 8 or not _is_power_of_two(self.num_points):
            raise ValueError(f"num_points must be a power of two >= 8, got {self.num_points}")
        if not self.domain_length > 0:
            raise ValueError(f"domain_length must be positive, got {self.domain_length}")

    @property
    def dx(self) -> float:
        return self.domain_length / self.num_points

    @property
    def x(self) -> np.ndarray:
        return self.origin + self.dx * np.arange(self.num_points)

    def wavenumbers(self) -> np.ndarray:
        """Physical wavenumbers in fft layout, k in [-N/2, N/2) * 2*pi/L."""
        return 2.0 * np.pi * np.fft.fftfreq(self.num_points, d=self.dx)

    def rfft_wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.rfftfreq(self.num_points, d=self.dx)

    def midpoint(self) -> float:
        return self.origin + 0.5 * self.domain_length


@dataclass(frozen=True, eq=False)
class Field:
    """Sampled function on a GridSpec, stored as complex128 samples.

    Real fields carry exactly zero imaginary parts; operations preserve this.
    """

    grid: GridSpec
    values: np.ndarray
    is_real: bool

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.shape != (self.grid.num_points,):
            raise ValueError(
                f"values shape {vals.shape} does not match grid ({self.grid.num_points},)"
            )
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def real_values(self) -> np.ndarray:
        if not self.is_real:
            raise ModelError("field is complex; no real sample view")
        return self.values.real

    def spectrum(self) -> np.ndarray:
        return np.fft.fft(self.values)

    def l2_norm(self) -> float:
        return float(np.sqrt(self.grid.dx * np.sum(np.abs(self.values) ** 2)))


def real_field(grid: GridSpec, samples) -> Field:
    """Build a real Field from real samples (imaginary parts exactly zero)."""
    arr = np.asarray(samples, dtype=np.float64)
    return Field(grid, arr.astype(np.complex128), is_real=True)


def complex_field(grid: GridSpec, samples) -> Field:
    return Field(grid, np.asarray(samples, dtype=np.complex128), is_real=False)


def as_real_checked(grid: GridSpec, values: np.ndarray, context: str = "") -> Field:
    """Validate near-realness and return a clean real Field.

    The invariant max|Im| <= REAL_TOL * max|values| must hold after every
    public operation on a real field.
    """
    scale = float(np.max(np.abs(values))) if values.size else 0.0
    imag_max = float(np.max(np.abs(values.imag))) if values.size else 0.0
    if scale > 0 and imag_max > 100 * REAL_TOL * scale:
        raise ModelError(
            f"realness violated{(' in ' + context) if context else ''}: "
            f"max|Im| = {imag_max:.3e} vs scale {scale:.3e}"
        )
    return real_field(grid, values.real)


# ---------------------------------------------------------------------------
# spectral operations


def derivative(f: Field, order: int) -> Field:
    """Spectral derivative of integer order 0..6.

    Mode k is multiplied by (i*k)**order; the Nyquist bin is zeroed for
    order >= 1 to keep real fields real.
    """
    if order < 0 or int(order) != order:
        raise ValueError(f"derivative order must be a non-negative integer, got {order}")
    if order > MAX_DERIVATIVE_ORDER:
        raise ValueError(f"derivative order {order} unsupported (max {MAX_DERIVATIVE_ORDER})")
    if order == 0:
        return f
    if f.is_real:
        k = f.grid.rfft_wavenumbers()
        mult = (1j * k) ** order
        mult[-1] = 0.0  # Nyquist
        spec = np.fft.rfft(f.values.real) * mult
        return real_field(f.grid, np.fft.irfft(spec, n=f.grid.num_points))
    k = f.grid.wavenumbers()
    mult = (1j * k) ** order
    mult[f.grid.num_points // 2] = 0.0
    return complex_field(f.grid, np.fft.ifft(np.fft.fft(f.values) * mult))


def fractional_derivative(f: Field, alpha: float) -> Field:
    """|grad|^alpha: multiply mode k by |k|**alpha.  alpha = 0 is the identity."""
    if alpha < 0:
        raise ValueError(f"fractional order must be >= 0, got {alpha}")
    if alpha == 0:
        return f
    if f.is_real:
        k = f.grid.rfft_wavenumbers()
        spec = np.fft.rfft(f.values.real) * np.abs(k) ** alpha
        return real_field(f.grid, np.fft.irfft(spec, n=f.grid.num_points))
    k = f.grid.wavenumbers()
    return complex_field(f.grid, np.fft.ifft(np.fft.fft(f.values) * np.abs(k) ** alpha))


def integrate(f: Field) -> complex:
    """Quadrature over the torus: dx * sum(values).

    Rectangle and trapezoid coincide on a periodic grid; the rule is exact
    for band-limited integrands.
    """
    return complex(f.grid.dx * np.sum(f.values))


def translate(f: Field, shift: float) -> Field:
    """Spectral translation u(x) -> u(x - shift)."""
    if f.is_real:
        k = f.grid.rfft_wavenumbers()
        spec = np.fft.rfft(f.values.real) * np.exp(-1j * k * shift)
        vals = np.fft.irfft(spec, n=f.grid.num_points)
        return real_field(f.grid, vals)
    k = f.grid.wavenumbers()
    spec = np.fft.fft(f.values) * np.exp(-1j * k * shift)
    return complex_field(f.grid, np.fft.ifft(spec))


def pad_spectrum(spec: np.ndarray, n_to: int) -> np.ndarray:
    """Zero-pad an fft-layout spectrum to n_to modes (band-limited refinement)."""
    n = spec.shape[0]
    if n_to == n:
        return spec.copy()
    if n_to < n:
        raise ValueError("pad_spectrum only refines")
    out = np.zeros(n_to, dtype=np.complex128)
    half = n // 2
    out[:half] = spec[:half]
    out[n_to - (half - 1):] = spec[n - (half - 1):]
    # split the Nyquist bin symmetrically so real signals stay real
    ny = spec[half]
    out[half] = 0.5 * ny
    out[n_to - half] = 0.5 * ny
    return out


def truncate_spectrum(spec: np.ndarray, n_to: int) -> np.ndarray:
    """Inverse of pad_spectrum: keep the lowest n_to modes, zero Nyquist."""
    n = spec.shape[0]
    if n_to == n:
        return spec.copy()
    if n_to > n:
        raise ValueError("truncate_spectrum only coarsens")
    half = n_to // 2
    out = np.zeros(n_to, dtype=np.complex128)
    out[:half] = spec[:half]
    out[half + 1:] = spec[-(half - 1):]
    out[half] = 0.0
    return out


def oversampling_factor(p: float) -> int:
    """Zero-padding factor that keeps integer-p powers alias-free."""
    if float(p).is_integer():
        return max(2, math.ceil((p + 1) / 2))
    return 4


def _power_values(vals: np.ndarray, p: float, is_real: bool) -> np.ndarray:
    if is_real:
        u = vals.real
        return np.sign(u) * np.abs(u) ** p
    return np.abs(vals) ** (p - 1.0) * vals


def nonlinear_power(f: Field, p: float) -> Field:
    """Pointwise |u|^(p-1) u, evaluated on an oversampled grid then truncated.

    Integer p uses exact zero-padding (factor ceil((p+1)/2)); non-integer p
    oversamples by 4 and applies a 2/3-rule truncation since the power is not
    polynomial.
    """
    if not p > 1:
        raise ValueError(f"nonlinearity exponent must be > 1, got {p}")
    n = f.grid.num_points
    m = oversampling_factor(p)
    n_fine = m * n
    spec = np.fft.fft(f.values)
    fine_vals = np.fft.ifft(pad_spectrum(spec, n_fine)) * (n_fine / n)
    if f.is_real:
        fine_vals = fine_vals.real
    w = _power_values(fine_vals, p, f.is_real)
    out_spec = truncate_spectrum(np.fft.fft(w), n) * (n / n_fine)
    if not float(p).is_integer():
        k_idx = np.fft.fftfreq(n, d=1.0 / n)
        out_spec[np.abs(k_idx) > n / 3] = 0.0
    out = np.fft.ifft(out_spec)
    if f.is_real:
        return as_real_checked(f.grid, out, "nonlinear_power")
    return complex_field(f.grid, out)


# ---------------------------------------------------------------------------
# snapshot files: JSON sidecar + raw little-endian (re, im) float64 pairs


def save_snapshot(field: Field, base: Path | str, time: float = 0.0, model=None) -> None:
    base = Path(base)
    meta = {
        "num_points": field.grid.num_points,
        "domain_length": field.grid.domain_length,
        "origin": field.grid.origin,
        "time": time,
        "is_real": field.is_real,
        "model": model,
    }
    base.parent.mkdir(parents=True, exist_ok=True)
    base.with_suffix(".json").write_text(json.dumps(meta, indent=1, sort_keys=True))
    base.with_suffix(".bin").write_bytes(np.ascontiguousarray(field.values, dtype="<c16").tobytes())


def load_snapshot(base: Path | str):
    """Returns (field, time, model)."""
    base = Path(base)
    meta = json.loads(base.with_suffix(".json").read_text())
    raw = np.frombuffer(base.with_suffix(".bin").read_bytes(), dtype="<c16")
    grid = GridSpec(meta["num_points"], meta["domain_length"], meta["origin"])
    field = Field(grid, raw, is_real=meta["is_real"])
    return field, meta["time"], meta["model"]
