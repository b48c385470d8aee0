"""Algebraic machinery behind the centre-of-mass vs centre-of-energy
monotonicity: Gram quintuple extraction, positive-semidefiniteness, the
current-vs-energy inequality, brute-force region verification, and the
per-trajectory monotonicity gap.

For a real field u with mass M the quintuple (a, b, q, r, s) solves

    a^2 M = int u_xx^2        b^2 M = int |u|^(2p)      a q M = int u_x^2
    b r M = int |u|^(p+1)     a b s M = p int |u|^(p-1) u_x^2

so that, with mu = +1,

    int k / M = (3/2) a^2 + 2 a b s + (1/2) b^2          [corrected current]
    E / M     = (1/2) a q + b r / (p+1)
    int j / M = 3 a q + 2 p b r / (p+1)

and M int k > E int j reduces to a quadratic form in (a, b) whose coefficients
depend only on (q, r, s, p).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._accel import collect_violations, scan_kernel
from .diagnostics import KVariant, density_fields
from .errors import DegenerateFieldError, GkdvLabError, ModelError
from .evolution import Family, Trajectory
from .grid import Field, derivative

GRAM_CONSISTENCY_TOL = 1e-10
PSD_TOL = 1e-10
RST_TOL = 1e-10
EXPAND_TOL = 1e-12
P_CRITICAL = math.sqrt(3.0)


@dataclass(frozen=True)
class GramStats:
    a: float
    b: float
    q: float
    r: float
    s: float
    mass: float
    p: float


@dataclass(frozen=True)
class PsdReport:
    eigenvalues: np.ndarray
    det: float
    verdict: bool


@dataclass(frozen=True)
class AlgReport:
    lhs: float
    rhs: float
    expand_value: float
    strict: bool


@dataclass(frozen=True)
class RegionScanReport:
    p: float
    resolution: float
    points_tested: int
    min_expand_value: float
    violations: np.ndarray  # rows (q, r, s, expand_value)

    @property
    def n_violations(self) -> int:
        return int(self.violations.shape[0])


@dataclass(frozen=True)
class GapSeries:
    times: np.ndarray
    gap: np.ndarray
    velocity_difference: np.ndarray
    verdict: bool


def extract_gram(f: Field, p: float) -> GramStats:
    """Solve the five defining integrals for (a, b, q, r, s)."""
    if not f.is_real:
        raise ModelError("Gram extraction expects a real gKdV field")
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    u = f.values.real
    dx = f.grid.dx
    m = float(np.sum(u * u) * dx)
    if m <= 0 or np.max(np.abs(u)) == 0:
        raise DegenerateFieldError("Gram stats are undefined for the zero field")
    ux = derivative(f, 1).values.real
    uxx = derivative(f, 2).values.real
    absu = np.abs(u)
    i_xx = float(np.sum(uxx * uxx) * dx)
    i_2p = float(np.sum(absu ** (2.0 * p)) * dx)
    i_x = float(np.sum(ux * ux) * dx)
    i_p1 = float(np.sum(absu ** (p + 1.0)) * dx)
    i_cross = float(p * np.sum(absu ** (p - 1.0) * ux * ux) * dx)
    a = math.sqrt(i_xx / m)
    b = math.sqrt(i_2p / m)
    q = i_x / (a * m)
    r = i_p1 / (b * m)
    s = i_cross / (a * b * m)
    stats = GramStats(a=a, b=b, q=q, r=r, s=s, mass=m, p=p)

    # independent route: inner products of {u, -u_xx/a, |u|^(p-1)u/b} must
    # reproduce (q, r, s); q and s go through integration by parts
    fpow = absu ** (p - 1.0) * u
    q_alt = float(-np.sum(u * uxx) * dx) / (a * m)
    r_alt = float(np.sum(u * fpow) * dx) / (b * m)
    s_alt = float(-np.sum(uxx * fpow) * dx) / (a * b * m)
    for got, want, name in ((q_alt, q, "q"), (r_alt, r, "r"), (s_alt, s, "s")):
        if abs(got - want) > GRAM_CONSISTENCY_TOL * max(abs(want), 1.0):
            raise GkdvLabError(
                f"Gram consistency failure on {name}: {got!r} vs {want!r}"
            )
    return stats


def gram_matrix(g: GramStats) -> np.ndarray:
    return np.array([[1.0, g.q, g.r], [g.q, 1.0, g.s], [g.r, g.s, 1.0]])


def gram_psd_check(g: GramStats) -> PsdReport:
    """Eigenvalues of the correlation matrix; PSD verdict with -1e-10 slack."""
    eig = np.linalg.eigvalsh(gram_matrix(g))
    det = 1.0 - g.q**2 - g.r**2 - g.s**2 + 2.0 * g.q * g.r * g.s
    return PsdReport(eigenvalues=eig, det=float(det), verdict=bool(eig.min() >= -PSD_TOL))


def alg_inequality(g: GramStats, p: float | None = None) -> AlgReport:
    """Both sides of the current-vs-energy inequality plus the reduced form

    (3/2) a^2 (1-q^2) + a b (2s - (p+3)/(p+1) q r) + (1/2) b^2 (1-r^2).
    """
    p = g.p if p is None else p
    a, b, q, r, s = g.a, g.b, g.q, g.r, g.s
    lhs = 1.5 * a * a + 2.0 * a * b * s + 0.5 * b * b
    rhs = (0.5 * a * q + b * r / (p + 1.0)) * (3.0 * a * q + 2.0 * p * b * r / (p + 1.0))
    expand = (
        1.5 * a * a * (1.0 - q * q)
        + a * b * (2.0 * s - (p + 3.0) / (p + 1.0) * q * r)
        + 0.5 * b * b * (1.0 - r * r)
    )
    return AlgReport(lhs=float(lhs), rhs=float(rhs), expand_value=float(expand), strict=bool(lhs > rhs))


def region_scan(
    p: float,
    resolution: float,
    rst_tol: float = RST_TOL,
    expand_tol: float = EXPAND_TOL,
    force_numpy: bool = False,
) -> RegionScanReport:
    """Exhaustive scan of the (q, r, s) constraint region at the given grid step.

    For each admissible point the reduced quadratic form is minimized in closed
    form over the ray a/b > 0; a point violates when that minimum drops below
    -expand_tol.  The vertex-evaluation route and the discriminant-inequality
    route are computed independently and must agree.
    """
    if not (0 < resolution <= 0.1):
        raise ValueError("resolution must lie in (0, 0.1]")
    if not p > 1:
        raise ValueError("p must exceed 1")
    n = round(1.0 / resolution)
    qs = resolution * np.arange(1, n + 1)
    rs = resolution * np.arange(1, n + 1)
    ss = resolution * np.arange(0, n + 1)  # include the s = 0 boundary
    c = (p + 3.0) / (p + 1.0)
    points, min_expand, viol_ray, viol_disc = scan_kernel(
        qs, rs, ss, c, rst_tol, expand_tol, force_numpy=force_numpy
    )
    if viol_ray != viol_disc:
        raise GkdvLabError(
            f"ray-minimization and discriminant verdicts disagree: {viol_ray} vs {viol_disc}"
        )
    if viol_ray > 0:
        violations = collect_violations(qs, rs, ss, c, rst_tol, expand_tol)
    else:
        violations = np.empty((0, 4))
    return RegionScanReport(
        p=p, resolution=resolution, points_tested=int(points),
        min_expand_value=float(min_expand), violations=violations,
    )


def monotonicity_gap_series(traj: Trajectory, variant: KVariant = KVariant.CORRECTED) -> GapSeries:
    """gap(t) = M int k - E int j per snapshot, with the velocity-difference
    cross-check gap/(M E) = vM - vE."""
    model = traj.model
    if model.family is not Family.GKDV or model.mu != 1:
        raise ModelError("the monotonicity gap is a defocusing gKdV diagnostic")
    if model.p < P_CRITICAL:
        raise ModelError(f"monotonicity requires p >= sqrt(3), got p = {model.p}")
    gaps, vdiffs = [], []
    for f in traj.fields:
        u = f.values.real
        if np.max(np.abs(u)) == 0:
            raise DegenerateFieldError("monotonicity gap requires a nonzero field")
        d = density_fields(f, model, variant)
        dx = f.grid.dx
        m = float(np.sum(d.rho.values.real) * dx)
        en = float(np.sum(d.e.values.real) * dx)
        if en <= 0:
            raise GkdvLabError("defocusing energy must be positive; inconsistent state")
        int_j = float(np.sum(d.j.values.real) * dx)
        int_k = float(np.sum(d.k.values.real) * dx)
        gap = m * int_k - en * int_j
        vdiff = int_k / en - int_j / m  # vM - vE with the signs folded in
        if abs(gap / (m * en) - vdiff) > 1e-8 * max(abs(vdiff), 1e-300):
            raise GkdvLabError("gap/(M E) and vM - vE disagree beyond tolerance")
        gaps.append(gap)
        vdiffs.append(vdiff)
    gaps = np.asarray(gaps)
    return GapSeries(
        times=traj.times.copy(), gap=gaps, velocity_difference=np.asarray(vdiffs),
        verdict=bool(np.all(gaps > 0)),
    )


SCAN_COLUMNS = ("p", "resolution", "points_tested", "min_expand_value", "n_violations")


def write_scan_csv(path: Path | str, reports) -> None:
    lines = [",".join(SCAN_COLUMNS)]
    for rep in reports:
        lines.append(
            ",".join(
                repr(v)
                for v in (
                    float(rep.p), float(rep.resolution), rep.points_tested,
                    float(rep.min_expand_value), rep.n_violations,
                )
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_violations_csv(path: Path | str, report: RegionScanReport) -> None:
    lines = ["q,r,s,expand_value"]
    for row in report.violations:
        lines.append(",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")
