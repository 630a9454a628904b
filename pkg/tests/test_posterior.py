import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from idbs import posterior
from idbs.posterior import ThresholdTable, critical_value, f_quadrature, f_series
from idbs.specfun import DomainError


def f_oracle(x, y):
    """P{A > B} for A ~ chi2_2(x), B ~ chi2_2(y), by scipy quadrature over A."""
    hi = (math.sqrt(x) + 20.0) ** 2
    val, _ = integrate.quad(lambda a: stats.ncx2.pdf(a, 2, x) * stats.ncx2.cdf(a, 2, y)
                            if x > 0 else 0.5 * math.exp(-a / 2) * stats.ncx2.cdf(a, 2, y),
                            0, hi, limit=400, epsabs=1e-12, points=[x] if x > 0 else None)
    return val


class TestTestFunction:
    @pytest.mark.parametrize("x", [0.0, 1.0, 10.0, 100.0, 1000.0])
    def test_diagonal(self, x):
        assert f_series(x, x) == pytest.approx(0.5, abs=1e-6)
        assert f_quadrature(x, x) == pytest.approx(0.5, abs=1e-6)

    def test_overwhelming_evidence(self):
        assert f_series(1000.0, 0.0) >= 0.999
        assert f_quadrature(1000.0, 0.0) >= 0.999

    @pytest.mark.parametrize("x,y", [(5.0, 1.0), (1.0, 5.0), (0.0, 3.0), (40.0, 25.0), (300.0, 250.0)])
    def test_against_scipy_oracle(self, x, y):
        ref = f_oracle(x, y)
        assert f_series(x, y) == pytest.approx(ref, abs=1e-7)
        assert f_quadrature(x, y) == pytest.approx(ref, abs=1e-7)

    def test_monte_carlo_5_1(self):
        rng = np.random.default_rng(2024)
        n = 2_000_000
        a = stats.ncx2.rvs(2, 5.0, size=n, random_state=rng)
        b = stats.ncx2.rvs(2, 1.0, size=n, random_state=rng)
        p = np.mean(a > b)
        sigma = math.sqrt(p * (1 - p) / n)
        assert abs(f_series(5.0, 1.0) - p) < 4 * sigma

    def test_zero_first_argument_complement(self):
        assert f_series(0.0, 7.0) == pytest.approx(1.0 - f_series(7.0, 0.0), abs=1e-9)

    def test_hard_regime(self):
        assert abs(f_series(2000.0, 2000.0) - f_quadrature(2000.0, 2000.0)) <= 1e-6
        assert abs(f_series(2000.0, 1900.0) - f_quadrature(2000.0, 1900.0)) <= 1e-6

    def test_fallback_flag(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = posterior.f_series_info(2000.0, 2000.0, max_terms=5)
        assert res.fallback
        assert res.value == pytest.approx(0.5, abs=1e-6)

    def test_series_reports_terms(self):
        res = posterior.f_series_info(50.0, 40.0)
        assert not res.fallback
        assert res.n_terms > 1

    @pytest.mark.parametrize("bad", [-1.0, float("nan"), float("inf")])
    def test_domain(self, bad):
        with pytest.raises(DomainError):
            f_series(bad, 1.0)
        with pytest.raises(DomainError):
            f_quadrature(1.0, bad)


@settings(max_examples=80, deadline=None)
@given(x=st.floats(0, 3000), y=st.floats(0, 3000))
def test_complement_symmetry(x, y):
    assert f_series(x, y) + f_series(y, x) == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(x=st.floats(0, 2000), y=st.floats(0, 2000))
def test_series_matches_quadrature(x, y):
    assert abs(f_series(x, y) - f_quadrature(x, y)) <= 1e-6


@settings(max_examples=80, deadline=None)
@given(x=st.floats(0, 1500), y=st.floats(0, 1500), dx=st.floats(0.01, 200))
def test_monotone_in_first_argument(x, y, dx):
    # reversals smaller than the evaluation accuracy are not resolvable
    assert f_series(x + dx, y) >= f_series(x, y) - 1e-9


@settings(max_examples=80, deadline=None)
@given(x=st.floats(0, 1500), y=st.floats(0, 1500), dy=st.floats(0.01, 200))
def test_monotone_in_second_argument(x, y, dy):
    assert f_series(x, y + dy) <= f_series(x, y) + 1e-9


class TestCriticalValue:
    @pytest.mark.parametrize("alpha", [0.9, 0.95, 0.97, 0.99])
    def test_x_alpha_definition(self, alpha):
        xa = posterior.x_alpha(alpha)
        assert f_series(xa, 0.0) == pytest.approx(alpha, abs=1e-8)
        assert critical_value(alpha, 0.99 * xa) == 0.0
        assert critical_value(alpha, 1.01 * xa) > 0.0

    @pytest.mark.parametrize("alpha", [0.9, 0.97])
    @pytest.mark.parametrize("x", [15.0, 60.0, 500.0, 3000.0])
    def test_defining_equation(self, alpha, x):
        tau = critical_value(alpha, x)
        assert tau > 0
        assert f_series(x, tau) == pytest.approx(alpha, abs=1e-4)

    def test_shape_alpha_09(self):
        taus = [critical_value(0.9, x) for x in range(20, 201, 20)]
        assert all(b >= a for a, b in zip(taus, taus[1:]))
        assert all(t < x for t, x in zip(taus, range(20, 201, 20)))

    def test_bad_alpha(self):
        with pytest.raises(ValueError):
            critical_value(0.4, 10.0)


class TestThresholdTable:
    def test_invariants(self, tables):
        for alpha, table in tables.items():
            assert table.alpha == alpha
            assert table.check_invariants(f_series) == []

    def test_zero_below_x_alpha(self, table97):
        below = table97.x_grid < table97.x_alpha
        assert below.any()
        assert np.all(table97.tau[below] == 0.0)
        assert table97.x_alpha in table97.x_grid

    def test_lookup_at_grid_points(self, table97):
        for i in (0, 10, 300, 1023):
            tau, ext = posterior.lookup_tau(table97, table97.x_grid[i])
            assert tau == table97.tau[i]
            assert not ext

    def test_lookup_between_points(self, table97):
        for x in (17.3, 123.4, 999.9, 3500.5):
            tau, _ = table97.lookup(x)
            assert tau == pytest.approx(critical_value(0.97, x), abs=1e-3)

    def test_lookup_below_x_alpha(self, table97):
        assert table97.lookup(0.5 * table97.x_alpha) == (0.0, False)

    def test_extrapolation(self, table97):
        x = 2 * table97.x_max
        tau, ext = table97.lookup(x)
        assert ext
        assert tau == pytest.approx(critical_value(0.97, x), rel=1e-5)

    def test_inverse(self, table97):
        for x in (30.0, 400.0, 4000.0):
            tau, _ = table97.lookup(x)
            assert table97.inverse(tau) == pytest.approx(x, rel=1e-9)
        assert table97.inverse(0.0) == pytest.approx(table97.x_alpha)

    def test_quadratic_fit_residual(self, tables):
        t = tables[0.9]
        assert t.fit_residual < 0.01 * t.tau.max()

    def test_json_round_trip(self, table97, tmp_path):
        path = tmp_path / "t.json"
        table97.save(path)
        back = ThresholdTable.load(path)
        np.testing.assert_array_equal(back.x_grid, table97.x_grid)
        np.testing.assert_array_equal(back.tau, table97.tau)
        assert back.x_alpha == table97.x_alpha
        assert back.poly_coeffs == table97.poly_coeffs
        d = json.loads(path.read_text())
        assert set(d) >= {"alpha", "x_grid", "tau", "x_alpha", "poly_coeffs", "version"}

    def test_version_mismatch(self, table97):
        d = json.loads(table97.to_json())
        d["version"] = 999
        with pytest.raises(ValueError):
            ThresholdTable.from_json(json.dumps(d))

    def test_invariant_detection(self, table97):
        bad = ThresholdTable(table97.alpha, table97.x_grid, table97.tau[::-1].copy(),
                             table97.x_alpha, table97.poly_coeffs)
        assert bad.check_invariants()

    def test_build_arguments(self):
        with pytest.raises(ValueError):
            posterior.build_table(0.97, 4096.0, 100)
        with pytest.raises(ValueError):
            posterior.build_table(0.97, 5.0, 256)


class TestTableCache:
    def test_builds_then_loads(self, tmp_path):
        t1 = posterior.get_table(0.95, 300.0, 256, cache_dir=tmp_path)
        path = posterior.table_path(0.95, 300.0, 256, tmp_path)
        assert path.exists()
        posterior._MEMO.clear()
        t2 = posterior.get_table(0.95, 300.0, 256, cache_dir=tmp_path)
        np.testing.assert_array_equal(t1.tau, t2.tau)

    def test_corrupt_cache_rebuilt(self, tmp_path):
        path = posterior.table_path(0.95, 300.0, 256, tmp_path)
        path.write_text("{not json")
        posterior._MEMO.clear()
        t = posterior.get_table(0.95, 300.0, 256, cache_dir=tmp_path)
        assert t.check_invariants() == []
        assert ThresholdTable.load(path).alpha == 0.95
