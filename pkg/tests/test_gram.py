import math

import numpy as np
import pytest

from gkdvlab._accel import USE_NUMBA
from gkdvlab.diagnostics import KVariant
from gkdvlab.errors import DegenerateFieldError, ModelError
from gkdvlab.evolution import Family, ModelSpec, StepperConfig, evolve
from gkdvlab.gram import (
    GramStats,
    alg_inequality,
    extract_gram,
    gram_psd_check,
    monotonicity_gap_series,
    region_scan,
    write_scan_csv,
    write_violations_csv,
)
from gkdvlab.grid import GridSpec, derivative, real_field
from gkdvlab.profiles import gaussian


def random_smooth_field(grid, seed, modes=24, decay=0.35):
    rng = np.random.default_rng(seed)
    half = grid.num_points // 2 + 1
    spec = np.zeros(half, dtype=np.complex128)
    amp = np.exp(-decay * np.arange(1, modes + 1))
    spec[1 : modes + 1] = amp * (rng.standard_normal(modes) + 1j * rng.standard_normal(modes))
    vals = np.fft.irfft(spec, n=grid.num_points)
    window = np.exp(-((grid.x / (grid.domain_length / 6)) ** 2))
    return real_field(grid, vals * window)


@pytest.fixture(scope="module")
def defocusing_run():
    grid = GridSpec(1024, 80.0, -40.0)
    model = ModelSpec(Family.GKDV, 5.0, mu=1)
    u0 = gaussian(0.6, 3.0, 0.0, grid)
    return evolve(u0, model, StepperConfig(dt=1e-4), t_final=0.1, sample_dt=0.01)


class TestExtractGram:
    def test_gaussian_closed_form_oracle(self):
        # u = e^{-x^2}, p = 3: all five integrals have Gamma-function values
        grid = GridSpec(2048, 60.0, -30.0)
        f = real_field(grid, np.exp(-(grid.x**2)))
        g = extract_gram(f, 3.0)
        spi = math.sqrt(math.pi)
        M = spi / math.sqrt(2.0)
        a = math.sqrt(3.0)  # int u_xx^2 = 3 sqrt(pi/2)
        b = 3.0 ** (-0.25)  # int u^6 = sqrt(pi/3) = b^2 M
        q = 1.0 / math.sqrt(3.0)
        r = 3.0**0.25 / math.sqrt(2.0)
        s = 3.0**0.75 * math.sqrt(2.0) / 4.0
        assert g.mass == pytest.approx(M, rel=1e-10)
        assert g.a == pytest.approx(a, rel=1e-8)
        assert g.b == pytest.approx(b, rel=1e-8)
        assert g.q == pytest.approx(q, rel=1e-8)
        assert g.r == pytest.approx(r, rel=1e-8)
        assert g.s == pytest.approx(s, rel=1e-8)

    @pytest.mark.parametrize("seed", range(6))
    def test_qrs_in_unit_interval(self, seed):
        grid = GridSpec(1024, 80.0, -40.0)
        f = random_smooth_field(grid, seed)
        g = extract_gram(f, 5.0)
        for v in (g.q, g.r, g.s):
            assert 0 < v <= 1.0 + 1e-12

    @pytest.mark.parametrize("seed", range(6))
    def test_completed_square_bound(self, seed):
        # s >= q r - sqrt((1-q^2)(1-r^2)) for every extracted quintuple
        grid = GridSpec(1024, 80.0, -40.0)
        g = extract_gram(random_smooth_field(grid, seed), 3.0)
        bound = g.q * g.r - math.sqrt(max((1 - g.q**2) * (1 - g.r**2), 0.0))
        assert g.s >= bound - 1e-10

    def test_parts_identity(self):
        # a q M = int u_x^2 computed directly and as -int u u_xx
        grid = GridSpec(1024, 80.0, -40.0)
        f = random_smooth_field(grid, 11)
        ux = derivative(f, 1).values.real
        uxx = derivative(f, 2).values.real
        direct = np.sum(ux**2) * grid.dx
        by_parts = -np.sum(f.values.real * uxx) * grid.dx
        assert by_parts == pytest.approx(direct, rel=1e-10)
        g = extract_gram(f, 5.0)
        assert g.a * g.q * g.mass == pytest.approx(direct, rel=1e-10)

    def test_zero_field_rejected(self):
        grid = GridSpec(256, 40.0, -20.0)
        with pytest.raises(DegenerateFieldError):
            extract_gram(real_field(grid, np.zeros(256)), 5.0)


class TestPsd:
    def test_identity_matrix(self):
        g = GramStats(a=1, b=1, q=0, r=0, s=0, mass=1, p=5)
        rep = gram_psd_check(g)
        assert np.allclose(rep.eigenvalues, 1.0)
        assert rep.det == pytest.approx(1.0)
        assert rep.verdict

    def test_all_ones_boundary(self):
        g = GramStats(a=1, b=1, q=1, r=1, s=1, mass=1, p=5)
        rep = gram_psd_check(g)
        assert sorted(np.round(rep.eigenvalues, 12)) == [0.0, 0.0, 3.0]
        assert rep.verdict

    @pytest.mark.parametrize("seed", range(8))
    def test_extracted_stats_always_psd(self, seed):
        grid = GridSpec(1024, 80.0, -40.0)
        g = extract_gram(random_smooth_field(grid, seed), 5.0)
        rep = gram_psd_check(g)
        assert rep.verdict
        assert rep.det >= -1e-10


class TestAlgInequality:
    def test_decoupled_reduction(self):
        # q = r = 0: expand collapses to (3/2)a^2 + 2abs + (1/2)b^2 > 0
        g = GramStats(a=1.4, b=0.7, q=0.0, r=0.0, s=0.5, mass=1, p=5)
        rep = alg_inequality(g)
        expected = 1.5 * 1.4**2 + 2 * 1.4 * 0.7 * 0.5 + 0.5 * 0.7**2
        assert rep.expand_value == pytest.approx(expected, rel=1e-14)
        assert rep.expand_value > 0

    def test_all_ones_boundary_value(self):
        # q = r = s = 1: expand = a b (2 - (p+3)/(p+1)) >= 0
        for p in (2.0, 5.0, 1.5):
            g = GramStats(a=1.1, b=0.9, q=1.0, r=1.0, s=1.0, mass=1, p=p)
            rep = alg_inequality(g)
            expected = 1.1 * 0.9 * (2.0 - (p + 3.0) / (p + 1.0))
            assert rep.expand_value == pytest.approx(expected, rel=1e-12)
            assert rep.expand_value >= 0

    def test_strict_on_defocusing_snapshots(self, defocusing_run):
        for f in defocusing_run.fields:
            g = extract_gram(f, 5.0)
            rep = alg_inequality(g)
            assert rep.strict
            assert rep.lhs > rep.rhs


class TestRegionScan:
    @pytest.mark.parametrize("p", [math.sqrt(3.0), 2.0, 5.0])
    def test_no_violations_at_or_above_sqrt3(self, p):
        rep = region_scan(p, 0.02, force_numpy=True)
        assert rep.n_violations == 0
        assert rep.min_expand_value >= -1e-12
        assert rep.points_tested > 5e4

    def test_low_p_probe_recorded_not_asserted(self):
        # the sufficient-condition chain may fail below sqrt(3); just record
        rep = region_scan(1.05, 0.02, force_numpy=True)
        assert rep.points_tested > 0
        if rep.n_violations:
            assert rep.violations.shape[1] == 4
            assert np.all(rep.violations[:, 3] < 0)

    def test_violation_count_monotone_in_p(self):
        counts = [
            region_scan(p, 0.05, force_numpy=True).n_violations
            for p in (1.05, 1.2, 1.5, math.sqrt(3.0), 2.0, 5.0)
        ]
        assert all(a >= b for a, b in zip(counts, counts[1:]))
        assert counts[-1] == 0

    @pytest.mark.skipif(not USE_NUMBA, reason="numba disabled")
    def test_numba_matches_numpy(self):
        a = region_scan(2.0, 0.05, force_numpy=True)
        b = region_scan(2.0, 0.05, force_numpy=False)
        assert a.points_tested == b.points_tested
        assert a.n_violations == b.n_violations
        assert a.min_expand_value == pytest.approx(b.min_expand_value, rel=1e-13)

    def test_resolution_validation(self):
        with pytest.raises(ValueError):
            region_scan(5.0, 0.2)

    def test_csv_emission(self, tmp_path):
        rep = region_scan(1.2, 0.05, force_numpy=True)
        write_scan_csv(tmp_path / "scan.csv", [rep])
        text = (tmp_path / "scan.csv").read_text().splitlines()
        assert text[0] == "p,resolution,points_tested,min_expand_value,n_violations"
        assert len(text) == 2
        write_violations_csv(tmp_path / "viol.csv", rep)
        viol_lines = (tmp_path / "viol.csv").read_text().splitlines()
        assert viol_lines[0] == "q,r,s,expand_value"
        assert len(viol_lines) == 1 + rep.n_violations


class TestGapSeries:
    def test_positive_gap_defocusing(self, defocusing_run):
        series = monotonicity_gap_series(defocusing_run)
        assert series.verdict
        assert np.all(series.gap > 0)
        assert np.all(series.velocity_difference > 0)

    def test_gap_matches_velocity_difference(self, defocusing_run):
        series = monotonicity_gap_series(defocusing_run)
        recs_gap = series.gap
        m_e = []
        from gkdvlab.diagnostics import centres

        for rec in centres(defocusing_run):
            m_e.append(rec.mass * rec.energy)
        ratio = recs_gap / np.asarray(m_e)
        assert np.max(np.abs(ratio - series.velocity_difference)) <= 1e-8 * np.max(
            np.abs(series.velocity_difference)
        )

    def test_focusing_rejected(self):
        grid = GridSpec(512, 60.0, -30.0)
        model = ModelSpec(Family.GKDV, 5.0, mu=-1)
        from gkdvlab.evolution import Trajectory

        f = gaussian(0.3, 2.0, 0.0, grid)
        traj = Trajectory(model, np.array([0.0, 0.1]), [f, f], 0.1)
        with pytest.raises(ModelError):
            monotonicity_gap_series(traj)

    def test_low_p_rejected(self):
        grid = GridSpec(512, 60.0, -30.0)
        model = ModelSpec(Family.GKDV, 1.5, mu=1)
        from gkdvlab.evolution import Trajectory

        f = gaussian(0.3, 2.0, 0.0, grid)
        traj = Trajectory(model, np.array([0.0, 0.1]), [f, f], 0.1)
        with pytest.raises(ModelError):
            monotonicity_gap_series(traj)

    def test_zero_field_rejected(self):
        grid = GridSpec(512, 60.0, -30.0)
        model = ModelSpec(Family.GKDV, 5.0, mu=1)
        from gkdvlab.evolution import Trajectory

        z = real_field(grid, np.zeros(512))
        traj = Trajectory(model, np.array([0.0, 0.1]), [z, z], 0.1)
        with pytest.raises(DegenerateFieldError):
            monotonicity_gap_series(traj)
