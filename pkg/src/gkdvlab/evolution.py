"""Time integration of gKdV, NLS and their linear limits.

The dispersive term is handled exactly through the linear symbol (i k^3 for
gKdV/Airy, +-i k^2 for the two Schrodinger sign conventions); the nonlinear
term goes through the exponential integrator stages with dealiased products.

Sign conventions
----------------
gKdV:  u_t + u_xxx = mu * (|u|^(p-1) u)_x, u real.
NLS "printed":       -i u_t + u_xx = mu |u|^(p-1) u  => u_t = i mu |u|^(p-1) u - i u_xx.
NLS "conventional":  +i u_t + u_xx = mu |u|^(p-1) u  => u_t = -i mu |u|^(p-1) u + i u_xx.
The printed sign is the default; the two are related by time reversal.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path

import numpy as np

from .errors import BlowUpError, ConfigurationError, ModelError
from .grid import (
    Field,
    GridSpec,
    complex_field,
    load_snapshot,
    oversampling_factor,
    real_field,
    save_snapshot,
)
from .steppers import Etdrk4, Ifrk4

BLOWUP_AMPLITUDE_FACTOR = 1e6
DEFAULT_TAIL_TOL = 1e-8

NLS_SIGNS = ("printed", "conventional")


class Family(enum.Enum):
    GKDV = "gkdv"
    NLS = "nls"
    AIRY = "airy"
    FREE_SCHRODINGER = "free_schrodinger"


@dataclass(frozen=True)
class ModelSpec:
    family: Family
    p: float = 5.0
    mu: int = 0
    nls_sign: str = "printed"

    def __post_init__(self):
        if self.mu not in (-1, 0, 1):
            raise ValueError(f"mu must be -1, 0 or +1, got {self.mu}")
        if self.family in (Family.AIRY, Family.FREE_SCHRODINGER) and self.mu != 0:
            raise ValueError(f"{self.family.value} forces mu = 0")
        if not self.p > 1:
            raise ValueError(f"nonlinearity exponent p must exceed 1, got {self.p}")
        if self.nls_sign not in NLS_SIGNS:
            raise ValueError(f"nls_sign must be one of {NLS_SIGNS}")

    @property
    def is_real(self) -> bool:
        return self.family in (Family.GKDV, Family.AIRY)

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "p": self.p,
            "mu": self.mu,
            "nls_sign": self.nls_sign,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(Family(d["family"]), d.get("p", 5.0), d.get("mu", 0), d.get("nls_sign", "printed"))


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    scheme: str = "etdrk4"
    substep_safety: float = 2.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.scheme not in ("etdrk4", "ifrk4"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not self.substep_safety > 0:
            raise ValueError("substep_safety must be positive")


@dataclass
class Trajectory:
    model: ModelSpec
    times: np.ndarray
    fields: list
    sample_dt: float
    meta: dict = dataclass_field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        if len(self.fields) != t.shape[0]:
            raise ValueError("times and fields length mismatch")
        if t.shape[0] >= 2:
            gaps = np.diff(t)
            if np.any(gaps <= 0):
                raise ValueError("times must be strictly increasing")
            if np.max(np.abs(gaps - self.sample_dt)) > 1e-12 * max(abs(self.sample_dt), 1.0):
                raise ValueError("times must be uniformly spaced by sample_dt")
        grids = {f.grid for f in self.fields}
        if len(grids) > 1:
            raise ValueError("all snapshots must share one grid")
        self.times = t

    @property
    def grid(self) -> GridSpec:
        return self.fields[0].grid

    def save(self, out_dir: Path | str) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        manifest = {
            "model": self.model.to_dict(),
            "grid": {
                "num_points": self.grid.num_points,
                "domain_length": self.grid.domain_length,
                "origin": self.grid.origin,
            },
            "sample_dt": self.sample_dt,
            "times": [float(t) for t in self.times],
            "meta": self.meta,
        }
        (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
        for i, (t, f) in enumerate(zip(self.times, self.fields)):
            save_snapshot(f, out_dir / f"snapshot_{i:06d}", time=float(t), model=self.model.to_dict())

    @classmethod
    def load(cls, out_dir: Path | str) -> "Trajectory":
        out_dir = Path(out_dir)
        manifest = json.loads((out_dir / "manifest.json").read_text())
        fields = []
        for i in range(len(manifest["times"])):
            f, _, _ = load_snapshot(out_dir / f"snapshot_{i:06d}")
            fields.append(f)
        return cls(
            model=ModelSpec.from_dict(manifest["model"]),
            times=np.asarray(manifest["times"]),
            fields=fields,
            sample_dt=manifest["sample_dt"],
            meta=manifest.get("meta", {}),
        )


# ---------------------------------------------------------------------------
# symbols and nonlinearities


def linear_symbol(model: ModelSpec, grid: GridSpec) -> np.ndarray:
    """Dispersive symbol in the state layout (rfft for real, fft for complex)."""
    if model.is_real:
        k = grid.rfft_wavenumbers()
        k = k.copy()
        k[-1] = 0.0
        return 1j * k**3
    k = grid.wavenumbers()
    sign = +1.0 if model.nls_sign == "printed" else -1.0
    return sign * 1j * k**2


def _check_realness(state: Field, model: ModelSpec) -> None:
    if model.is_real and not state.is_real:
        raise ModelError(f"{model.family.value} requires a real field")
    if not model.is_real and state.is_real:
        raise ModelError(f"{model.family.value} requires a complex field")


def _gkdv_nonlinear_spec(grid: GridSpec, p: float, mu: float):
    """mu * d_x(|u|^(p-1) u) acting on rfft spectra, dealiased by zero padding."""
    n = grid.num_points
    n_fine = oversampling_factor(p) * n
    k = grid.rfft_wavenumbers().copy()
    k[-1] = 0.0
    ik = 1j * k
    half = n // 2
    non_integer = not float(p).is_integer()
    dealias_mask = None
    if non_integer:
        dealias_mask = (np.arange(half + 1) <= n / 3).astype(float)
    scale_up = n_fine / n
    scale_down = n / n_fine

    def nl(spec, t):
        padded = np.zeros(n_fine // 2 + 1, dtype=np.complex128)
        padded[: half + 1] = spec
        padded[half] *= 0.5  # Nyquist splits across +-N/2 on the fine grid
        with np.errstate(over="ignore", invalid="ignore"):
            w = np.fft.irfft(padded, n=n_fine) * scale_up
            w = np.sign(w) * np.abs(w) ** p
            out = np.fft.rfft(w)[: half + 1] * scale_down
        out[-1] = 0.0
        if dealias_mask is not None:
            out *= dealias_mask
        return mu * ik * out

    return nl


def _nls_nonlinear_spec(grid: GridSpec, p: float, mu: float, nls_sign: str):
    """i*mu*|u|^(p-1)u (printed) or -i*mu*... (conventional) on fft spectra."""
    from .grid import pad_spectrum, truncate_spectrum

    n = grid.num_points
    n_fine = oversampling_factor(p) * n
    prefactor = (1j if nls_sign == "printed" else -1j) * mu
    non_integer = not float(p).is_integer()
    k_idx = np.fft.fftfreq(n, d=1.0 / n)
    dealias_mask = (np.abs(k_idx) <= n / 3).astype(float) if non_integer else None

    def nl(spec, t):
        with np.errstate(over="ignore", invalid="ignore"):
            w = np.fft.ifft(pad_spectrum(spec, n_fine)) * (n_fine / n)
            w = np.abs(w) ** (p - 1.0) * w
            out = truncate_spectrum(np.fft.fft(w), n) * (n / n_fine)
        if dealias_mask is not None:
            out *= dealias_mask
        return prefactor * out

    return nl


def rhs_nonlinear(state: Field, model: ModelSpec) -> Field:
    """Nonlinear part of the evolution, as handled by the integrator stages."""
    _check_realness(state, model)
    grid = state.grid
    if model.family in (Family.AIRY, Family.FREE_SCHRODINGER) or model.mu == 0:
        zeros = np.zeros(grid.num_points)
        return real_field(grid, zeros) if model.is_real else complex_field(grid, zeros)
    if model.family is Family.GKDV:
        nl = _gkdv_nonlinear_spec(grid, model.p, model.mu)
        out = np.fft.irfft(nl(np.fft.rfft(state.values.real), 0.0), n=grid.num_points)
        return real_field(grid, out)
    nl = _nls_nonlinear_spec(grid, model.p, model.mu, model.nls_sign)
    return complex_field(grid, np.fft.ifft(nl(np.fft.fft(state.values), 0.0)))


def nonlinear_frequency_estimate(state: Field, model: ModelSpec) -> float:
    """Crude Lipschitz frequency of the nonlinear term, for the dt stability gate."""
    if model.mu == 0:
        return 0.0
    amp = float(np.max(np.abs(state.values)))
    if model.family is Family.GKDV:
        k_max = np.pi * state.grid.num_points / state.grid.domain_length
        return model.p * amp ** (model.p - 1.0) * k_max
    return amp ** (model.p - 1.0)


# ---------------------------------------------------------------------------
# main drivers


def first_wrap_time_estimate(initial: Field) -> float:
    """Time for leftward radiation (speed 3 xi^2) to reach the domain edge."""
    spec = np.abs(np.fft.fft(initial.values))
    peak = spec.max()
    if peak == 0:
        return np.inf
    k = np.abs(initial.grid.wavenumbers())
    active = k[spec > 1e-10 * peak]
    xi = float(active.max()) if active.size else 0.0
    if xi == 0:
        return np.inf
    return (initial.grid.domain_length / 2.0) / (3.0 * xi**2)


def tail_mass_fraction(f: Field) -> float:
    """Mass fraction outside the central half-window around the circular mass mean."""
    rho = np.abs(f.values) ** 2
    total = rho.sum()
    if total == 0:
        return 0.0
    n = f.grid.num_points
    theta = 2.0 * np.pi * np.arange(n) / n
    center_idx = np.angle(np.sum(rho * np.exp(1j * theta))) / (2.0 * np.pi) * n
    offsets = (np.arange(n) - center_idx + n / 2.0) % n - n / 2.0
    inside = np.abs(offsets) <= n / 4.0
    return float(rho[~inside].sum() / total)


def _make_stepper(model: ModelSpec, grid: GridSpec, scheme: str, dt: float):
    symbol = linear_symbol(model, grid)
    if model.family is Family.GKDV and model.mu != 0:
        nl = _gkdv_nonlinear_spec(grid, model.p, model.mu)
    elif model.family is Family.NLS and model.mu != 0:
        nl = _nls_nonlinear_spec(grid, model.p, model.mu, model.nls_sign)
    else:
        nl = lambda spec, t: 0.0
    cls = Etdrk4 if scheme == "etdrk4" else Ifrk4
    return cls(symbol, dt, nl)


def evolve(
    initial: Field,
    model: ModelSpec,
    stepper: StepperConfig,
    t_final: float,
    sample_dt: float,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> Trajectory:
    """Integrate and return snapshots at t = 0, sample_dt, ..., t_final.

    t_final may be negative (time-reversed run).  dt is adjusted downward so an
    integer number of steps lands exactly on each sample time.
    """
    _check_realness(initial, model)
    if sample_dt <= 0:
        raise ConfigurationError("sample_dt must be positive")
    n_samples = round(abs(t_final) / sample_dt)
    if n_samples == 0 or abs(n_samples * sample_dt - abs(t_final)) > 1e-9 * abs(t_final):
        raise ConfigurationError("t_final must be a positive multiple of sample_dt")

    freq = nonlinear_frequency_estimate(initial, model)
    if stepper.dt * freq > stepper.substep_safety:
        raise ConfigurationError(
            f"stability gate failed: dt*freq = {stepper.dt * freq:.3g} exceeds "
            f"substep_safety = {stepper.substep_safety}"
        )
    tail0 = tail_mass_fraction(initial)
    if tail0 > tail_tol:
        raise ConfigurationError(
            f"initial data has tail mass {tail0:.3e} above threshold {tail_tol:.1e}"
        )

    direction = 1.0 if t_final > 0 else -1.0
    steps_per_sample = max(1, math.ceil(sample_dt / stepper.dt - 1e-12))
    dt_eff = direction * sample_dt / steps_per_sample

    grid = initial.grid
    core = _make_stepper(model, grid, stepper.scheme, dt_eff)
    to_spec = (lambda f: np.fft.rfft(f.values.real)) if model.is_real else (lambda f: np.fft.fft(f.values))
    from_spec = (
        (lambda s: np.fft.irfft(s, n=grid.num_points)) if model.is_real else (lambda s: np.fft.ifft(s))
    )

    state = to_spec(initial)
    amp0 = float(np.max(np.abs(initial.values)))
    times = [0.0]
    fields = [initial]
    linear_only = model.mu == 0 or model.family in (Family.AIRY, Family.FREE_SCHRODINGER)
    sample_propagator = None
    if linear_only:
        sample_propagator = np.exp(direction * sample_dt * linear_symbol(model, grid))

    t = 0.0
    for i in range(n_samples):
        if linear_only:
            state = sample_propagator * state
        else:
            for j in range(steps_per_sample):
                state = core.step(state, t + j * dt_eff)
        t = direction * (i + 1) * sample_dt
        vals = from_spec(state)
        amp = float(np.max(np.abs(vals)))
        if not np.isfinite(amp) or (amp0 > 0 and amp > BLOWUP_AMPLITUDE_FACTOR * amp0):
            raise BlowUpError(
                f"solution blew up between t = {times[-1]} and t = {t} "
                f"(amplitude {amp:.3e} vs initial {amp0:.3e})",
                last_valid_time=times[-1],
            )
        fields.append(real_field(grid, vals) if model.is_real else complex_field(grid, vals))
        times.append(t)

    if direction < 0:
        # store on an increasing time axis: fields[0] is the final (earliest) state
        times = times[::-1]
        fields = fields[::-1]
    meta = {
        "scheme": stepper.scheme,
        "dt": abs(dt_eff),
        "steps_per_sample": steps_per_sample,
        "initial_tail_mass": tail0,
        "first_wrap_time": first_wrap_time_estimate(initial),
        "direction": direction,
    }
    return Trajectory(model=model, times=np.asarray(times), fields=fields, sample_dt=sample_dt, meta=meta)


def evolve_forced_airy(
    forcing,
    grid: GridSpec,
    stepper: StepperConfig,
    t_final: float,
    sample_dt: float,
    spectral_forcing=None,
    accumulate=None,
) -> Trajectory:
    """Solve e_t + e_xxx = forcing(t) with e(0) = 0 on a real grid.

    `forcing(t)` returns a Field; alternatively `spectral_forcing(t)` returns
    the rfft spectrum directly (used by the embedding pipeline to avoid
    transforms).  The source enters the integrator at the stage times.
    `accumulate(t, spec)` is called after every internal step when given.
    """
    model = ModelSpec(Family.AIRY, p=5.0, mu=0)
    if sample_dt <= 0 or t_final <= 0:
        raise ConfigurationError("t_final and sample_dt must be positive")
    n_samples = round(t_final / sample_dt)
    if n_samples == 0 or abs(n_samples * sample_dt - t_final) > 1e-9 * t_final:
        raise ConfigurationError("t_final must be a positive multiple of sample_dt")

    if spectral_forcing is None:
        def spectral_forcing(t):
            return np.fft.rfft(forcing(t).values.real)

    steps_per_sample = max(1, math.ceil(sample_dt / stepper.dt - 1e-12))
    dt_eff = sample_dt / steps_per_sample
    core = Etdrk4(linear_symbol(model, grid), dt_eff, None)

    state = np.zeros(grid.num_points // 2 + 1, dtype=np.complex128)
    zero = real_field(grid, np.zeros(grid.num_points))
    times = [0.0]
    fields = [zero]
    for i in range(n_samples):
        t0 = i * sample_dt
        for j in range(steps_per_sample):
            state = core.step_forced(state, t0 + j * dt_eff, spectral_forcing)
            if accumulate is not None:
                accumulate(t0 + (j + 1) * dt_eff, state)
        vals = np.fft.irfft(state, n=grid.num_points)
        if not np.isfinite(vals).all():
            raise BlowUpError("forced Airy response lost finiteness", last_valid_time=times[-1])
        fields.append(real_field(grid, vals))
        times.append((i + 1) * sample_dt)
    meta = {"scheme": "etdrk4", "dt": dt_eff, "steps_per_sample": steps_per_sample}
    return Trajectory(model=model, times=np.asarray(times), fields=fields, sample_dt=sample_dt, meta=meta)


def apply_scaling_symmetry(traj: Trajectory, lam: float) -> Trajectory:
    """gKdV scaling u -> lam^(-2/(p-1)) u(t/lam^3, x/lam), grid rescaled with it.

    For p = 5 the mass of every snapshot is preserved.
    """
    if lam <= 0:
        raise ValueError("scaling parameter must be positive")
    if traj.model.family is not Family.GKDV:
        raise ModelError("scaling symmetry is a gKdV transform")
    if lam == 1.0:
        return traj
    p = traj.model.p
    amp = lam ** (-2.0 / (p - 1.0))
    old = traj.grid
    new_grid = GridSpec(old.num_points, old.domain_length * lam, old.origin * lam)
    fields = [real_field(new_grid, f.values.real * amp) for f in traj.fields]
    return Trajectory(
        model=traj.model,
        times=traj.times * lam**3,
        fields=fields,
        sample_dt=traj.sample_dt * lam**3,
        meta={**traj.meta, "rescaled_by": lam},
    )
