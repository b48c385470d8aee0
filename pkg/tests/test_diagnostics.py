import math

import numpy as np
import pytest

from gkdvlab.diagnostics import (
    DIAGNOSTICS_COLUMNS,
    KVariant,
    NormOuter,
    WhichLaw,
    centres,
    circular_mass_center,
    conservation_residual,
    density_fields,
    diagnostics_rows,
    dispersion_functional,
    energy,
    mass,
    mixed_norm,
    write_diagnostics_csv,
)
from gkdvlab.errors import InsufficientDataError, ModelError
from gkdvlab.evolution import Family, ModelSpec, StepperConfig, Trajectory, evolve
from gkdvlab.grid import GridSpec, complex_field, real_field
from gkdvlab.profiles import gaussian, ground_state

GKDV5_DEF = ModelSpec(Family.GKDV, 5.0, mu=1)
GKDV3_DEF = ModelSpec(Family.GKDV, 3.0, mu=1)


def still_trajectory(field, model, n=5, sample_dt=0.1):
    """Fake uniform trajectory holding one snapshot repeatedly (per-snapshot ops)."""
    return Trajectory(model, sample_dt * np.arange(n), [field] * n, sample_dt)


def subsample(traj, every):
    return Trajectory(
        traj.model, traj.times[::every], traj.fields[::every], traj.sample_dt * every, traj.meta
    )


@pytest.fixture(scope="module")
def defocusing_run():
    # band-limited defocusing quintic run used by several checks
    grid = GridSpec(1024, 80.0, -40.0)
    u0 = gaussian(0.6, 3.0, 0.0, grid)
    return evolve(u0, GKDV5_DEF, StepperConfig(dt=5e-5), t_final=0.096, sample_dt=0.002)


class TestMassEnergy:
    def test_zero_field(self):
        grid = GridSpec(256, 40.0, -20.0)
        z = real_field(grid, np.zeros(256))
        assert mass(z) == 0.0
        assert energy(z, GKDV5_DEF) == 0.0

    def test_q3_mass_is_four(self):
        grid = GridSpec(1024, 60.0, -30.0)
        assert mass(ground_state(3.0, grid)) == pytest.approx(4.0, abs=1e-10)

    def test_q5_focusing_energy_is_zero(self):
        grid = GridSpec(2048, 60.0, -30.0)
        q5 = ground_state(5.0, grid)
        model = ModelSpec(Family.GKDV, 5.0, mu=-1)
        assert abs(energy(q5, model)) <= 1e-8

    def test_gaussian_energy_closed_form(self):
        # E = (A^2/(2w)) sqrt(pi/2) + (mu/4) A^4 (w/2) sqrt(pi) for p = 3
        grid = GridSpec(1024, 80.0, -40.0)
        A, w = 0.7, 2.0
        f = gaussian(A, w, 0.0, grid)
        expected = (A**2 / (2 * w)) * math.sqrt(math.pi / 2) + 0.25 * A**4 * (w / 2) * math.sqrt(math.pi)
        assert energy(f, GKDV3_DEF) == pytest.approx(expected, abs=1e-10)

    def test_complex_mass(self):
        grid = GridSpec(256, 40.0, -20.0)
        f = complex_field(grid, (1 + 1j) * np.exp(-(grid.x**2)))
        assert mass(f) == pytest.approx(2.0 * math.sqrt(math.pi / 2), rel=1e-10)


class TestDensityFields:
    def test_zero_field(self):
        grid = GridSpec(256, 40.0, -20.0)
        d = density_fields(real_field(grid, np.zeros(256)), GKDV5_DEF)
        for f in (d.rho, d.j, d.e, d.k):
            assert np.max(np.abs(f.values)) == 0.0

    def test_rho_nonnegative_and_integrals_match(self, defocusing_run):
        f = defocusing_run.fields[-1]
        d = density_fields(f, GKDV5_DEF)
        assert np.all(d.rho.values.real >= 0)
        m = mass(f)
        assert abs(d.rho.values.real.sum() * f.grid.dx - m) <= 1e-12 * m
        en = energy(f, GKDV5_DEF)
        assert abs(d.e.values.real.sum() * f.grid.dx - en) <= 1e-12 * max(abs(en), 1e-30)

    def test_defocusing_currents_nonnegative(self, defocusing_run):
        for f in defocusing_run.fields[:: len(defocusing_run.fields) // 4]:
            for variant in KVariant:
                d = density_fields(f, GKDV5_DEF, variant)
                assert np.min(d.j.values.real) >= 0
                assert np.min(d.k.values.real) >= 0

    def test_p3_current_is_six_energy_density(self):
        # algebraic identity j = 6e at p = 3, independent of mu and variant
        grid = GridSpec(512, 60.0, -30.0)
        rng = np.random.default_rng(3)
        u = np.exp(-((grid.x / 4) ** 2)) * (1 + 0.3 * rng.standard_normal(512))
        spec = np.fft.rfft(u)
        spec[60:] = 0  # keep it smooth
        f = real_field(grid, np.fft.irfft(spec, n=512))
        for mu in (-1, 1):
            model = ModelSpec(Family.GKDV, 3.0, mu=mu)
            for variant in KVariant:
                d = density_fields(f, model, variant)
                scale = np.max(np.abs(d.j.values.real))
                assert np.max(np.abs(d.j.values.real - 6.0 * d.e.values.real)) <= 1e-12 * scale

    def test_variants_differ_by_factor_p_on_cross_term(self):
        grid = GridSpec(512, 60.0, -30.0)
        f = gaussian(0.8, 2.0, 0.0, grid)
        p = 5.0
        model = ModelSpec(Family.GKDV, p, mu=1)
        from gkdvlab.grid import derivative

        ux = derivative(f, 1).values.real
        u = f.values.real
        dk = (
            density_fields(f, model, KVariant.CORRECTED).k.values.real
            - density_fields(f, model, KVariant.PAPER_LITERAL).k.values.real
        )
        expected = 2.0 * (p - 1.0) * np.abs(u) ** (p - 1) * ux**2
        assert np.max(np.abs(dk - expected)) <= 1e-12 * np.max(np.abs(expected))

    def test_complex_field_rejected(self):
        grid = GridSpec(256, 40.0, -20.0)
        f = complex_field(grid, np.exp(-(grid.x**2)))
        with pytest.raises(ModelError):
            density_fields(f, GKDV5_DEF)


class TestConservationResidual:
    def test_airy_plane_wave_mass_law(self):
        # mu = 0: the law closes with j = 3 u_x^2
        grid = GridSpec(256, 2 * np.pi, 0.0)
        model = ModelSpec(Family.GKDV, 5.0, mu=0)
        init = real_field(grid, np.cos(2.0 * grid.x))
        traj = evolve(init, model, StepperConfig(dt=2e-4), 0.02, 5e-4, tail_tol=2.0)
        _, res = conservation_residual(traj, WhichLaw.MASS_LAW)
        scale = np.max(np.abs(traj.fields[0].values)) ** 2 * math.sqrt(grid.domain_length)
        assert np.max(res) <= 1e-8 * scale

    def test_fourth_order_decay_both_laws(self, defocusing_run):
        hs = np.array([0.008, 0.004, 0.002])
        for law in WhichLaw:
            rs = []
            for every in (4, 2, 1):
                _, r = conservation_residual(subsample(defocusing_run, every), law)
                rs.append(np.max(r))
            slope = np.polyfit(np.log(hs), np.log(np.array(rs)), 1)[0]
            assert 3.5 <= slope <= 4.5, f"{law}: slope {slope}, residuals {rs}"

    def test_literal_energy_current_plateaus(self, defocusing_run):
        # adjudication: the printed cross coefficient leaves an O(1) defect
        rs = []
        for every in (4, 2, 1):
            _, r = conservation_residual(
                subsample(defocusing_run, every), WhichLaw.ENERGY_LAW, KVariant.PAPER_LITERAL
            )
            rs.append(np.max(r))
        assert rs[-1] >= 0.5 * rs[0]  # no convergence
        _, corrected = conservation_residual(defocusing_run, WhichLaw.ENERGY_LAW, KVariant.CORRECTED)
        assert rs[-1] >= 10.0 * np.max(corrected)

    def test_needs_five_snapshots(self, defocusing_run):
        short = Trajectory(
            defocusing_run.model,
            defocusing_run.times[:4],
            defocusing_run.fields[:4],
            defocusing_run.sample_dt,
        )
        with pytest.raises(InsufficientDataError):
            conservation_residual(short, WhichLaw.MASS_LAW)


class TestCentres:
    def test_soliton_centre_moves_at_unit_speed(self):
        grid = GridSpec(2048, 80.0, -40.0)
        model = ModelSpec(Family.GKDV, 3.0, mu=-1)
        q = ground_state(3.0, grid)
        traj = evolve(q, model, StepperConfig(dt=5e-4), t_final=1.0, sample_dt=0.25)
        recs = centres(traj)
        for rec in recs:
            assert abs((rec.xM - recs[0].xM) - rec.t) <= 1e-6

    def test_p3_centre_velocity_is_minus_six_energy_over_mass(self):
        grid = GridSpec(1024, 80.0, -40.0)
        f = gaussian(0.7, 2.5, 0.0, grid)
        traj = still_trajectory(f, GKDV3_DEF)
        rec = centres(traj)[0]
        assert rec.vM == pytest.approx(-6.0 * rec.energy / rec.mass, rel=1e-10)

    def test_defocusing_centres_move_left(self, defocusing_run):
        for rec in centres(defocusing_run):
            assert rec.vM < 0
            assert rec.vE < 0
            assert rec.gap > 0

    def test_gap_equals_velocity_difference(self, defocusing_run):
        for rec in centres(defocusing_run):
            assert rec.gap / (rec.mass * rec.energy) == pytest.approx(rec.vM - rec.vE, rel=1e-10)

    def test_finite_difference_velocity_consistency(self, defocusing_run):
        recs = centres(defocusing_run)
        h = defocusing_run.sample_dt
        for i in range(2, len(recs) - 2):
            fd = (recs[i - 2].xM - 8 * recs[i - 1].xM + 8 * recs[i + 1].xM - recs[i + 2].xM) / (12 * h)
            assert abs(fd - recs[i].vM) <= 1e-6 + 100 * recs[i].tail_mass

    def test_centre_of_energy_undefined_flag(self):
        grid = GridSpec(2048, 60.0, -30.0)
        q5 = ground_state(5.0, grid)
        model = ModelSpec(Family.GKDV, 5.0, mu=-1)
        traj = still_trajectory(q5, model)
        rec = centres(traj)[0]
        assert not rec.xE_defined
        assert math.isnan(rec.xE)

    def test_circular_center_wraps(self):
        # periodically wrapped Gaussian straddling the wrap point
        grid = GridSpec(512, 40.0, -20.0)
        L, c0 = 40.0, -19.0
        offs = (grid.x - c0 + L / 2) % L - L / 2
        f = real_field(grid, np.exp(-((offs / 1.5) ** 2)))
        c = circular_mass_center(f)
        assert abs((c - c0 + L / 2) % L - L / 2) <= 1e-6


class TestDispersionFunctional:
    def test_stationary_first_moment_oracle(self):
        grid = GridSpec(1024, 80.0, -40.0)
        f = gaussian(0.7, 2.0, 0.0, grid)
        traj = still_trajectory(f, GKDV5_DEF)
        rep = dispersion_functional(traj)
        d = density_fields(f, GKDV5_DEF)
        w = d.rho.values.real + d.e.values.real
        oracle = np.trapezoid(np.abs(grid.x) * w, dx=grid.dx)
        assert rep.values[0] == pytest.approx(oracle, rel=1e-8)

    def test_soliton_tracking_constant(self):
        grid = GridSpec(4096, 80.0, -40.0)
        model = ModelSpec(Family.GKDV, 3.0, mu=-1)
        q = ground_state(3.0, grid)
        traj = evolve(q, model, StepperConfig(dt=5e-4), t_final=0.5, sample_dt=0.125)
        x0 = circular_mass_center(traj.fields[0])
        rep = dispersion_functional(traj, x_of_t=lambda t: x0 + t)
        spread = (rep.values.max() - rep.values.min()) / rep.values.mean()
        assert spread <= 1e-4

    def test_defocusing_growth(self):
        grid = GridSpec(2048, 160.0, -80.0)
        u0 = gaussian(0.5, 2.0, 0.0, grid)
        traj = evolve(u0, GKDV5_DEF, StepperConfig(dt=5e-3), t_final=2.0, sample_dt=0.125)
        rep = dispersion_functional(traj, fit_windows=[0.5, 1.0, 2.0])
        assert rep.window_sups[0] < rep.window_sups[1] < rep.window_sups[2]
        assert rep.exponent > 0


class TestMixedNorm:
    def test_constant_field_l6(self):
        grid = GridSpec(256, 10.0, 0.0)
        c = 1.7
        f = real_field(grid, np.full(256, c))
        traj = still_trajectory(f, GKDV5_DEF, n=11, sample_dt=0.1)
        rep = mixed_norm(traj, NormOuter.TIME, q=6.0, r=6.0)
        T, L = 1.0, 10.0
        assert rep.value == pytest.approx((T * L * c**6) ** (1 / 6), rel=1e-12)

    def test_linfinity_exponents(self):
        grid = GridSpec(256, 10.0, 0.0)
        f = real_field(grid, np.abs(np.sin(2 * np.pi * grid.x / 10.0)))
        traj = still_trajectory(f, GKDV5_DEF)
        rep = mixed_norm(traj, NormOuter.TIME, q=np.inf, r=np.inf)
        assert rep.value == pytest.approx(np.max(np.abs(f.values)), rel=1e-14)

    def test_restriction_monotonicity(self):
        grid = GridSpec(1024, 120.0, -60.0)
        airy = ModelSpec(Family.AIRY, 5.0, 0)
        u0 = gaussian(0.8, 2.0, -20.0, grid)
        traj = evolve(u0, airy, StepperConfig(dt=0.02), 2.0, 0.02, tail_tol=1e-6)
        full = mixed_norm(traj, NormOuter.SPACE, q=10.0, r=5.0).value
        n_half = len(traj.fields) // 2
        half = Trajectory(traj.model, traj.times[:n_half], traj.fields[:n_half], traj.sample_dt)
        assert mixed_norm(half, NormOuter.SPACE, q=10.0, r=5.0).value <= full

    def test_stable_under_resolution_doubling(self):
        airy = ModelSpec(Family.AIRY, 5.0, 0)
        values = []
        for m, s in ((1024, 0.02), (2048, 0.01)):
            grid = GridSpec(m, 120.0, -60.0)
            u0 = gaussian(0.8, 2.0, -20.0, grid)
            traj = evolve(u0, airy, StepperConfig(dt=s), 2.0, s, tail_tol=1e-6)
            values.append(mixed_norm(traj, NormOuter.SPACE, q=10.0, r=5.0).value)
        assert abs(values[1] - values[0]) / values[0] <= 0.01

    def test_fractional_order_applied_first(self):
        grid = GridSpec(256, 2 * np.pi, 0.0)
        k = 4.0
        f = complex_field(grid, np.exp(1j * k * grid.x))
        traj = still_trajectory(f, ModelSpec(Family.NLS, 5.0, 0), n=5, sample_dt=0.1)
        rep = mixed_norm(traj, NormOuter.TIME, q=2.0, r=2.0, frac_order=0.5)
        plain = mixed_norm(traj, NormOuter.TIME, q=2.0, r=2.0)
        assert rep.value == pytest.approx(k**0.5 * plain.value, rel=1e-12)


class TestCsv:
    def test_columns_and_determinism(self, tmp_path, defocusing_run):
        rows = diagnostics_rows(subsample(defocusing_run, 4))
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_diagnostics_csv(p1, rows)
        write_diagnostics_csv(p2, rows)
        a, b = p1.read_bytes(), p2.read_bytes()
        assert a == b
        header = a.decode().splitlines()[0]
        assert header == ",".join(DIAGNOSTICS_COLUMNS)

    def test_roundtrip_values(self, tmp_path, defocusing_run):
        rows = diagnostics_rows(subsample(defocusing_run, 4))
        path = tmp_path / "d.csv"
        write_diagnostics_csv(path, rows)
        lines = path.read_text().splitlines()[1:]
        for line, row in zip(lines, rows):
            parsed = [float(tok) for tok in line.split(",")]
            for got, want in zip(parsed, row):
                if math.isnan(want):
                    assert math.isnan(got)
                else:
                    assert got == want  # shortest round-trip repr is exact
