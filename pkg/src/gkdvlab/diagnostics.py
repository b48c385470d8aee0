"""Conserved and monitored quantities: mass, energy, local densities and
currents, centre-of-mass/centre-of-energy motion, pointwise conservation-law
residuals, dispersion functionals, and mixed spacetime norms.

Density/current definitions (real gKdV fields):

    rho = u^2
    j   = 3 u_x^2 + (2 mu p/(p+1)) |u|^(p+1)
    e   = (1/2) u_x^2 + (mu/(p+1)) |u|^(p+1)
    k   = (3/2) u_xx^2 + 2 mu p |u|^(p-1) u_x^2 + (mu^2/2) |u|^(2p)   [corrected]
          (3/2) u_xx^2 + 2 mu   |u|^(p-1) u_x^2 + (mu^2/2) |u|^(2p)   [literal]

With the corrected cross coefficient both pointwise laws close:
rho_t + rho_xxx = j_x and e_t + e_xxx = k_x.  The literal variant keeps the
cross term coefficient 2*mu and, for p != 1, leaves an O(1) defect in the
energy law; the adjudication test pins this down empirically.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InsufficientDataError, ModelError
from .evolution import Family, ModelSpec, Trajectory, tail_mass_fraction
from .grid import Field, derivative, fractional_derivative, real_field

ENERGY_DEFINED_TOL = 1e-10


class KVariant(enum.Enum):
    CORRECTED = "corrected"
    PAPER_LITERAL = "paper_literal"


class WhichLaw(enum.Enum):
    MASS_LAW = "mass_law"
    ENERGY_LAW = "energy_law"


class NormOuter(enum.Enum):
    TIME = "time"
    SPACE = "space"


@dataclass(frozen=True)
class DensityFields:
    rho: Field
    j: Field
    e: Field
    k: Field
    variant: KVariant


@dataclass(frozen=True)
class CentreRecord:
    t: float
    mass: float
    energy: float
    xM: float
    xE: float
    vM: float
    vE: float
    gap: float
    tail_mass: float
    xE_defined: bool = True


@dataclass(frozen=True)
class NormReport:
    norm_kind: str
    q: float
    r: float
    frac_order: float
    value: float
    num_points: int
    num_samples: int


@dataclass(frozen=True)
class DispersionReport:
    times: np.ndarray
    values: np.ndarray
    window_ends: np.ndarray
    window_sups: np.ndarray
    exponent: float


def mass(f: Field) -> float:
    return float(f.grid.dx * np.sum(np.abs(f.values) ** 2))


def energy(f: Field, model: ModelSpec) -> float:
    ux = derivative(f, 1)
    kinetic = 0.5 * np.abs(ux.values) ** 2
    potential = model.mu / (model.p + 1.0) * np.abs(f.values) ** (model.p + 1.0)
    return float(f.grid.dx * np.sum(kinetic + potential))


def density_fields(f: Field, model: ModelSpec, variant: KVariant = KVariant.CORRECTED) -> DensityFields:
    if not f.is_real:
        raise ModelError("densities are defined for real gKdV fields")
    p, mu = model.p, float(model.mu)
    u = f.values.real
    ux = derivative(f, 1).values.real
    uxx = derivative(f, 2).values.real
    absu = np.abs(u)
    rho = u**2
    pow_p1 = absu ** (p + 1.0)
    j = 3.0 * ux**2 + (2.0 * mu * p / (p + 1.0)) * pow_p1
    e = 0.5 * ux**2 + (mu / (p + 1.0)) * pow_p1
    cross = 2.0 * mu * p if variant is KVariant.CORRECTED else 2.0 * mu
    k = 1.5 * uxx**2 + cross * absu ** (p - 1.0) * ux**2 + 0.5 * mu**2 * absu ** (2.0 * p)
    g = f.grid
    return DensityFields(
        rho=real_field(g, rho), j=real_field(g, j), e=real_field(g, e), k=real_field(g, k),
        variant=variant,
    )


# ---------------------------------------------------------------------------
# centre-of-mass / centre-of-energy


def circular_mass_center(f: Field) -> float:
    """Mass-weighted circular mean position on the torus."""
    rho = np.abs(f.values) ** 2
    total = rho.sum()
    g = f.grid
    if total == 0:
        return g.midpoint()
    theta = 2.0 * np.pi * (g.x - g.origin) / g.domain_length
    ang = np.angle(np.sum(rho * np.exp(1j * theta))) % (2.0 * np.pi)
    return g.origin + ang / (2.0 * np.pi) * g.domain_length


def _chart_offsets(grid, center: float) -> np.ndarray:
    """Signed offsets x - center wrapped into [-L/2, L/2)."""
    L = grid.domain_length
    return (grid.x - center + L / 2.0) % L - L / 2.0


def centres(traj: Trajectory, variant: KVariant = KVariant.CORRECTED) -> list[CentreRecord]:
    """Per-snapshot centre records in the mass-weighted circular chart."""
    if traj.model.family is not Family.GKDV:
        raise ModelError("centre diagnostics are defined for gKdV trajectories")
    out = []
    for t, f in zip(traj.times, traj.fields):
        dens = density_fields(f, traj.model, variant)
        g = f.grid
        dx = g.dx
        m = float(np.sum(dens.rho.values.real) * dx)
        en = float(np.sum(dens.e.values.real) * dx)
        int_j = float(np.sum(dens.j.values.real) * dx)
        int_k = float(np.sum(dens.k.values.real) * dx)
        center = circular_mass_center(f)
        xi = _chart_offsets(g, center)
        xM = center + float(np.sum(xi * dens.rho.values.real) * dx) / m if m > 0 else np.nan
        e_scale = float(np.sum(np.abs(dens.e.values.real)) * dx)
        xE_defined = abs(en) > ENERGY_DEFINED_TOL * max(e_scale, 1e-300)
        xE = center + float(np.sum(xi * dens.e.values.real) * dx) / en if xE_defined else np.nan
        vM = -int_j / m if m > 0 else np.nan
        vE = -int_k / en if xE_defined else np.nan
        gap = m * int_k - en * int_j
        out.append(
            CentreRecord(
                t=float(t), mass=m, energy=en, xM=xM, xE=xE, vM=vM, vE=vE,
                gap=gap, tail_mass=tail_mass_fraction(f), xE_defined=xE_defined,
            )
        )
    return out


# ---------------------------------------------------------------------------
# pointwise conservation laws


def conservation_residual(
    traj: Trajectory,
    which: WhichLaw,
    variant: KVariant = KVariant.CORRECTED,
):
    """L2 norms of d_t rho + d_xxx rho - d_x j (resp. the energy law) at
    interior sample times; d_t by 4th-order centered differences so the check
    is independent of the solver."""
    n = len(traj.fields)
    if n < 5:
        raise InsufficientDataError("conservation residual needs at least 5 snapshots")
    h = traj.sample_dt
    dens = [density_fields(f, traj.model, variant) for f in traj.fields]
    if which is WhichLaw.MASS_LAW:
        d = [x.rho for x in dens]
        cur = [x.j for x in dens]
    else:
        d = [x.e for x in dens]
        cur = [x.k for x in dens]
    times, norms = [], []
    dx = traj.grid.dx
    for i in range(2, n - 2):
        ddt = (
            d[i - 2].values.real - 8.0 * d[i - 1].values.real
            + 8.0 * d[i + 1].values.real - d[i + 2].values.real
        ) / (12.0 * h)
        spatial = derivative(d[i], 3).values.real - derivative(cur[i], 1).values.real
        resid = ddt + spatial
        times.append(float(traj.times[i]))
        norms.append(float(np.sqrt(np.sum(resid**2) * dx)))
    return np.asarray(times), np.asarray(norms)


# ---------------------------------------------------------------------------
# dispersion functional


def dispersion_functional(traj: Trajectory, x_of_t=None, fit_windows=None) -> DispersionReport:
    """Integral of |x - x(t)| (rho + e) per snapshot, plus a growth-exponent fit
    of log sup_{[0,T]} against log T over the given window ends."""
    recs = centres(traj)
    values = []
    for rec, (t, f) in zip(recs, zip(traj.times, traj.fields)):
        dens = density_fields(f, traj.model)
        center = x_of_t(t) if x_of_t is not None else rec.xM
        xi = _chart_offsets(f.grid, center)
        w = dens.rho.values.real + dens.e.values.real
        values.append(float(np.sum(np.abs(xi) * w) * f.grid.dx))
    values = np.asarray(values)
    t_end = traj.times[-1]
    if fit_windows is None:
        fit_windows = [t_end / 4.0, t_end / 2.0, t_end]
    window_ends = np.asarray(fit_windows, dtype=float)
    sups = np.array([values[traj.times <= w + 1e-12].max() for w in window_ends])
    if np.all(sups > 0) and len(sups) >= 2:
        slope = np.polyfit(np.log(window_ends), np.log(sups), 1)[0]
    else:
        slope = np.nan
    return DispersionReport(
        times=traj.times.copy(), values=values,
        window_ends=window_ends, window_sups=sups, exponent=float(slope),
    )


# ---------------------------------------------------------------------------
# mixed spacetime norms


def _trapezoid_weights(n: int, dt: float) -> np.ndarray:
    w = np.full(n, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def mixed_norm(
    traj: Trajectory,
    outer: NormOuter,
    q: float,
    r: float,
    frac_order: float = 0.0,
) -> NormReport:
    """Composite quadrature of L^q_t L^r_x (outer=TIME) or L^r_x L^q_t
    (outer=SPACE); q is always the time exponent and r the space exponent.
    Infinite exponents use grid maxima."""
    if not (q >= 1 and r >= 1):
        raise ValueError("exponents must be >= 1")
    fields = traj.fields
    if frac_order > 0:
        fields = [fractional_derivative(f, frac_order) for f in fields]
    V = np.abs(np.stack([f.values for f in fields]))  # [time, space]
    dx = traj.grid.dx
    wt = _trapezoid_weights(V.shape[0], traj.sample_dt)
    if outer is NormOuter.TIME:
        inner = V.max(axis=1) if np.isinf(r) else (np.sum(V**r, axis=1) * dx) ** (1.0 / r)
        value = inner.max() if np.isinf(q) else (np.sum(wt * inner**q)) ** (1.0 / q)
    else:
        inner = V.max(axis=0) if np.isinf(q) else (np.sum(wt[:, None] * V**q, axis=0)) ** (1.0 / q)
        value = inner.max() if np.isinf(r) else (np.sum(inner**r) * dx) ** (1.0 / r)
    kind = "LqtLrx" if outer is NormOuter.TIME else "LrxLqt"
    return NormReport(
        norm_kind=kind, q=q, r=r, frac_order=frac_order, value=float(value),
        num_points=traj.grid.num_points, num_samples=len(traj.fields),
    )


# ---------------------------------------------------------------------------
# CSV emission

DIAGNOSTICS_COLUMNS = (
    "t", "mass", "energy", "xM", "xE", "vM", "vE", "gap", "tail_mass",
    "mass_law_residual", "energy_law_residual",
)


def diagnostics_rows(traj: Trajectory, variant: KVariant = KVariant.CORRECTED):
    """One row per sample time in the fixed diagnostics.csv column order."""
    recs = centres(traj, variant)
    n = len(recs)
    mass_res = np.full(n, np.nan)
    energy_res = np.full(n, np.nan)
    if n >= 5:
        _, mr = conservation_residual(traj, WhichLaw.MASS_LAW, variant)
        _, er = conservation_residual(traj, WhichLaw.ENERGY_LAW, variant)
        mass_res[2 : n - 2] = mr
        energy_res[2 : n - 2] = er
    rows = []
    for i, rec in enumerate(recs):
        rows.append(
            (rec.t, rec.mass, rec.energy, rec.xM, rec.xE, rec.vM, rec.vE,
             rec.gap, rec.tail_mass, mass_res[i], energy_res[i])
        )
    return rows


def write_diagnostics_csv(path: Path | str, rows) -> None:
    lines = [",".join(DIAGNOSTICS_COLUMNS)]
    for row in rows:
        lines.append(",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")
