"""Closed-form initial data: ground states, solitons, Gaussians, and the
modulated carrier-wave ansatz that embeds an NLS envelope into quintic gKdV.

Ground state: Q_p(x) = ((p+1) / (2 cosh^2((p-1)x/2)))^(1/(p-1)), the unique
positive even decaying solution of Q'' + Q^p = Q.  Q_p(x-t) is the unit-speed
soliton of focusing gKdV.

Carrier ansatz: for a complex envelope u(t, y) and a large carrier frequency N,

    u_N(t, x) = (8/5)^(1/4) N^(-1/4) Re[ e^{iNx} e^{iN^3 t} u(t, (x + 3N^2 t)/(sqrt(3) N^(1/2)) ) ].

The output torus is chosen commensurate with the envelope torus
(L_out = sqrt(3) sqrt(N) L_env) and N is snapped to an exact grid mode, so the
dilated/translated envelope is evaluated by exact band-limited interpolation
(spectral shift + zero padding) and the ansatz is exactly periodic.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ResolutionError
from .grid import Field, GridSpec, pad_spectrum, real_field

CARRIER_AMPLITUDE = (8.0 / 5.0) ** 0.25  # cancels the resonant band of the quintic
ENVELOPE_DILATION = math.sqrt(3.0)
TAIL_RATIO_LIMIT = 1e-12
DEALIAS_FRACTION = 2.0 / 3.0


class ProfileKind(enum.Enum):
    GROUND_STATE = "ground_state"
    SOLITON = "soliton"
    GAUSSIAN = "gaussian"
    EMBEDDING_ANSATZ = "embedding_ansatz"


@dataclass(frozen=True)
class ProfileSpec:
    kind: ProfileKind
    p: float = 5.0
    amplitude: float = 1.0
    width: float = 1.0
    center: float = 0.0
    N: float | None = None

    def __post_init__(self):
        if self.kind in (ProfileKind.GROUND_STATE, ProfileKind.SOLITON) and not self.p > 1:
            raise ValueError("ground state requires p > 1")
        if self.kind is ProfileKind.GAUSSIAN and not self.width > 0:
            raise ValueError("gaussian requires width > 0")
        if self.kind is ProfileKind.EMBEDDING_ANSATZ and (self.N is None or self.N <= 0):
            raise ValueError("embedding ansatz requires a positive N")


def _sech(a: np.ndarray) -> np.ndarray:
    # overflow-safe sech
    e = np.exp(-np.abs(a))
    return 2.0 * e / (1.0 + e * e)


def ground_state_values(p: float, x: np.ndarray) -> np.ndarray:
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    return ((p + 1.0) / 2.0) ** (1.0 / (p - 1.0)) * _sech(0.5 * (p - 1.0) * x) ** (2.0 / (p - 1.0))


def ground_state(p: float, grid: GridSpec, center: float | None = None) -> Field:
    """Sample Q_p centered at the grid midpoint (or at `center`)."""
    c = grid.midpoint() if center is None else center
    vals = ground_state_values(p, grid.x - c)
    # farthest sample from the center decides whether the tails fit
    edge = max(abs(grid.origin - c), abs(grid.origin + grid.domain_length - c))
    tail = ground_state_values(p, np.array([edge]))[0]
    peak = ((p + 1.0) / 2.0) ** (1.0 / (p - 1.0))
    if tail > TAIL_RATIO_LIMIT * peak:
        raise ResolutionError(
            f"domain too small for Q_p tails: Q(edge)/Q(0) = {tail / peak:.2e}"
        )
    return real_field(grid, vals)


def ground_state_mass(p: float, rtol: float = 1e-11) -> float:
    """Mass of Q_p by quadrature, refined until stable (Q decays like e^-|x|)."""
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    length = 80.0
    prev = None
    for m in (256, 512, 1024, 2048, 4096, 8192):
        x = -length / 2 + length / m * np.arange(m)
        val = float(np.sum(ground_state_values(p, x) ** 2) * length / m)
        if prev is not None and abs(val - prev) <= rtol * abs(val):
            return val
        prev = val
    return prev


def gaussian(amplitude: float, width: float, center: float, grid: GridSpec) -> Field:
    """A * exp(-((x - c)/w)^2)."""
    if not width > 0:
        raise ValueError("width must be positive")
    return real_field(grid, amplitude * np.exp(-(((grid.x - center) / width) ** 2)))


# ---------------------------------------------------------------------------
# carrier-wave embedding ansatz


def carrier_snap(n_target: float, envelope_length: float) -> tuple[int, float]:
    """Snap the carrier N to an exactly representable output-grid wavenumber.

    With L_out = sqrt(3) sqrt(N) L_env, requiring N L_out / (2 pi) = n_c gives
    N = (2 pi n_c / (sqrt(3) L_env))^(2/3); n_c is chosen to land nearest the
    requested N.
    """
    if n_target <= 0:
        raise ValueError("carrier frequency must be positive")
    n_c = max(1, round(ENVELOPE_DILATION * envelope_length * n_target**1.5 / (2.0 * np.pi)))
    n_actual = (2.0 * np.pi * n_c / (ENVELOPE_DILATION * envelope_length)) ** (2.0 / 3.0)
    return n_c, n_actual


def min_output_points(n_c: int, envelope_points: int) -> int:
    """Smallest power of two keeping the quintic carrier band under 2/3 Nyquist."""
    need = math.ceil((5 * n_c + 5 * envelope_points // 2) / DEALIAS_FRACTION * 2)
    return 1 << max(3, math.ceil(math.log2(need)))


def embedding_output_grid(
    nls_grid: GridSpec, n_target: float, num_points: int | None = None
) -> tuple[GridSpec, float, int]:
    """Output grid for a requested carrier frequency: (grid, N_actual, n_c)."""
    n_c, n_actual = carrier_snap(n_target, nls_grid.domain_length)
    dilation = ENVELOPE_DILATION * math.sqrt(n_actual)
    length = dilation * nls_grid.domain_length
    m_min = min_output_points(n_c, nls_grid.num_points)
    m = m_min if num_points is None else num_points
    if m < m_min:
        raise ResolutionError(
            f"num_points {m} below the carrier dealias bound {m_min} "
            f"(5N + envelope bandwidth must stay under 2/3 Nyquist)"
        )
    return GridSpec(m, length, dilation * nls_grid.origin), n_actual, n_c


def check_ansatz_grids(u_env: Field, n_carrier: float, grid_out: GridSpec) -> int:
    """Validate commensurability and the carrier band; returns the carrier index."""
    dilation = grid_out.domain_length / u_env.grid.domain_length
    expected = ENVELOPE_DILATION * math.sqrt(n_carrier)
    if abs(dilation - expected) > 1e-9 * expected:
        raise ResolutionError(
            f"output torus not commensurate with the envelope torus: "
            f"L_out/L_env = {dilation:.12g}, need sqrt(3)*sqrt(N) = {expected:.12g}"
        )
    n_c_float = n_carrier * grid_out.domain_length / (2.0 * np.pi)
    n_c = round(n_c_float)
    if abs(n_c_float - n_c) > 1e-6:
        raise ResolutionError(f"carrier frequency {n_carrier} is not a grid mode of the output torus")
    if 5 * n_c + 5 * u_env.grid.num_points // 2 > DEALIAS_FRACTION * (grid_out.num_points // 2):
        raise ResolutionError(
            "carrier band above the dealias limit: quintic products would alias"
        )
    return n_c


def envelope_on_output(
    u_env: Field, n_carrier: float, t: float, grid_out: GridSpec, spec_env: np.ndarray | None = None
) -> np.ndarray:
    """Complex envelope u(t, (x + 3N^2 t)/(sqrt(3) sqrt(N))) sampled on grid_out.

    Exact band-limited interpolation: spectral translation to the moving frame
    followed by zero padding onto the finer grid.
    """
    m_env = u_env.grid.num_points
    spec = np.fft.fft(u_env.values) if spec_env is None else spec_env
    y0 = (grid_out.origin + 3.0 * n_carrier**2 * t) / (ENVELOPE_DILATION * math.sqrt(n_carrier))
    kappa = u_env.grid.wavenumbers()
    shifted = spec * np.exp(1j * kappa * (y0 - u_env.grid.origin))
    padded = pad_spectrum(shifted, grid_out.num_points)
    return np.fft.ifft(padded) * (grid_out.num_points / m_env)


def embedding_ansatz(u_nls: Field, n_carrier: float, t: float, grid_out: GridSpec) -> Field:
    """Real carrier-wave field whose envelope is the given NLS state at time t."""
    check_ansatz_grids(u_nls, n_carrier, grid_out)
    g = envelope_on_output(u_nls, n_carrier, t, grid_out)
    carrier = np.exp(1j * (n_carrier * grid_out.x + n_carrier**3 * t))
    vals = CARRIER_AMPLITUDE * n_carrier ** (-0.25) * (carrier * g).real
    return real_field(grid_out, vals)


def build_profile(spec: ProfileSpec, grid: GridSpec) -> Field:
    """Construct initial data from a declarative profile description."""
    if spec.kind in (ProfileKind.GROUND_STATE, ProfileKind.SOLITON):
        center = grid.midpoint() + spec.center
        return ground_state(spec.p, grid, center=center)
    if spec.kind is ProfileKind.GAUSSIAN:
        return gaussian(spec.amplitude, spec.width, grid.midpoint() + spec.center, grid)
    # EMBEDDING_ANSATZ on a caller-supplied grid: derive the envelope torus from
    # the exact-wrap relation and sample a Gaussian envelope on it.
    n_c = round(spec.N * grid.domain_length / (2.0 * np.pi))
    if n_c < 1:
        raise ResolutionError("carrier frequency below the first grid mode")
    n_actual = 2.0 * np.pi * n_c / grid.domain_length
    dilation = ENVELOPE_DILATION * math.sqrt(n_actual)
    env_grid = GridSpec(256, grid.domain_length / dilation, grid.origin / dilation)
    env = gaussian(spec.amplitude, spec.width, env_grid.midpoint() + spec.center, env_grid)
    return embedding_ansatz(env, n_actual, 0.0, grid)
