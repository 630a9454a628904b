import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from idbs.beams import Ula, array_response, dft_codebook, steered_beam
from idbs.channel import (
    PathSet,
    ScenarioConfig,
    channel_matrix,
    effective_channel,
    exponential_fractions,
    generate,
    load_scenario,
    los_channel,
    nlos_channel,
    single_path,
)
from idbs.beams import ConfigError

RX, TX = Ula(16), Ula(64)


class TestSinglePath:
    def test_rank_one(self):
        h = single_path(RX, TX, 1.0 + 0.5j, 0.2, -0.3)
        assert np.linalg.matrix_rank(h.matrix) == 1

    def test_aligned_beams_gain(self):
        g = 0.8 - 0.6j
        h = single_path(RX, TX, g, 0.2, -0.3)
        v = effective_channel(h, steered_beam(RX, -0.3), steered_beam(TX, 0.2))
        assert abs(v) ** 2 == pytest.approx(abs(g) ** 2 * 16 * 64, abs=1e-6)

    def test_orthogonal_beam(self):
        cb = dft_codebook(TX, (-0.5, 0.5))
        h = single_path(RX, TX, 1.0, cb[3].center, 0.0)
        assert abs(effective_channel(h, steered_beam(RX, 0.0), cb[4])) == pytest.approx(0.0, abs=1e-9)

    def test_zero_gain(self):
        h = single_path(RX, TX, 0.0, 0.1, 0.1)
        out = effective_channel(h, dft_codebook(RX).matrix(), dft_codebook(TX, (-0.5, 0.5)).matrix())
        assert np.all(out == 0)

    def test_linear_in_gain(self):
        u, w = steered_beam(RX, 0.05), steered_beam(TX, -0.1)
        a = effective_channel(single_path(RX, TX, 1.0, 0.13, 0.02), u, w)
        b = effective_channel(single_path(RX, TX, 2.5j, 0.13, 0.02), u, w)
        assert b == pytest.approx(2.5j * a)

    def test_gain_proportional_to_beam_gain(self):
        cb = dft_codebook(Ula(32), (-0.5, 0.5))
        h = single_path(Ula(1), Ula(32), 1.0, 0.0594)
        eff = np.abs(effective_channel(h, np.ones(1), cb.matrix())) ** 2
        gains = np.array([b.gain(0.0594) for b in cb])
        np.testing.assert_allclose(eff, gains, rtol=1e-10, atol=1e-12)


class TestEffectiveChannel:
    def test_dimension_mismatch(self):
        h = single_path(RX, TX, 1.0, 0.0)
        with pytest.raises(ValueError):
            effective_channel(h, np.ones(8), np.ones(64))

    def test_matrix_of_beams(self):
        h = single_path(RX, TX, 1.0, 0.1, 0.2)
        rcb, tcb = dft_codebook(RX), dft_codebook(TX, (-0.5, 0.5))
        full = effective_channel(h, rcb.matrix(), tcb.matrix())
        assert full.shape == (16, 32)
        assert full[3, 7] == pytest.approx(effective_channel(h, rcb[3], tcb[7]))

    def test_matches_path_sum(self):
        rng = np.random.default_rng(3)
        h = los_channel(rng, RX, TX)
        p = h.paths
        ref = sum(g * np.outer(array_response(RX, r), np.conj(array_response(TX, t)))
                  for g, t, r in zip(p.gains, p.tx_sin, p.rx_sin))
        np.testing.assert_allclose(h.matrix, ref, atol=1e-12)


class TestLos:
    def test_k_factor(self):
        rng = np.random.default_rng(11)
        dom = diff = 0.0
        for _ in range(10_000):
            g = los_channel(rng, Ula(1), Ula(1)).paths.gains
            dom += abs(g[0]) ** 2
            diff += np.sum(np.abs(g[1:]) ** 2)
        assert 10 * math.log10(dom / diff) == pytest.approx(13.2, abs=0.2)

    def test_power_normalization(self):
        rng = np.random.default_rng(5)
        p = np.mean([np.linalg.norm(los_channel(rng, RX, TX).matrix) ** 2 for _ in range(10_000)])
        assert p == pytest.approx(16 * 64, rel=0.03)

    def test_angles_uniform_in_degrees(self):
        rng = np.random.default_rng(8)
        cfg = ScenarioConfig("los")
        s = np.array([los_channel(rng, RX, TX, cfg).paths.tx_sin[0] for _ in range(4000)])
        deg = np.degrees(np.arcsin(s))
        assert stats.kstest(deg, stats.uniform(-30, 60).cdf).pvalue > 0.01

    def test_large_k_single_path(self):
        rng = np.random.default_rng(2)
        h = los_channel(rng, RX, TX, ScenarioConfig("los", k_factor_db=200.0))
        assert abs(h.paths.gains[0]) == pytest.approx(1.0)
        assert np.all(np.abs(h.paths.gains[1:]) < 1e-9)

    def test_deterministic(self):
        a = los_channel(np.random.default_rng(4), RX, TX)
        b = los_channel(np.random.default_rng(4), RX, TX)
        np.testing.assert_array_equal(a.matrix, b.matrix)

    def test_fractions_sum(self):
        p = los_channel(np.random.default_rng(1), RX, TX).paths
        assert p.power_fractions.sum() == pytest.approx(1.0, abs=1e-9)


class TestNlos:
    def test_path_count_statistics(self):
        rng = np.random.default_rng(21)
        n = np.array([len(nlos_channel(rng, Ula(1), Ula(1)).paths) for _ in range(100_000)])
        k = np.arange(60)
        mean_ref = np.sum(np.maximum(1, k) * stats.poisson.pmf(k, 1.8))
        assert mean_ref == pytest.approx(1.965, abs=1e-3)
        assert n.mean() == pytest.approx(mean_ref, abs=3 * n.std() / math.sqrt(len(n)) + 1e-3)
        p1 = math.exp(-1.8) * 2.8
        assert np.mean(n == 1) == pytest.approx(p1, abs=4 * math.sqrt(p1 * (1 - p1) / len(n)))

    def test_power_normalization(self):
        rng = np.random.default_rng(6)
        p = np.mean([np.linalg.norm(nlos_channel(rng, RX, TX).matrix) ** 2 for _ in range(10_000)])
        assert p == pytest.approx(16 * 64, rel=0.03)

    def test_fractions_sorted(self):
        f = exponential_fractions(np.random.default_rng(0), 6)
        assert f.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(np.diff(f) <= 0)

    def test_pluggable_fractions(self):
        equal = lambda rng, n, decay: np.full(n, 1.0 / n)
        h = nlos_channel(np.random.default_rng(3), RX, TX, fraction_fn=equal)
        np.testing.assert_allclose(h.paths.power_fractions, 1.0 / len(h.paths))


class TestScenarioConfig:
    def test_defaults(self):
        assert ScenarioConfig("los").k_factor_db == 13.2
        assert ScenarioConfig("nlos").k_factor_db == 6.0

    def test_dict_round_trip(self, tmp_path):
        d = {"type": "single", "tx_sin": 0.05, "gain": [0.0, 1.0],
             "sectors": {"tx": [-0.5, 0.5], "rx": [-1, 1]}}
        cfg = ScenarioConfig.from_dict(d)
        assert cfg.gain == 1j and cfg.tx_sector == (-0.5, 0.5)
        assert ScenarioConfig.from_dict(cfg.to_dict()) == cfg
        path = tmp_path / "s.json"
        path.write_text('{"type": "nlos", "poisson_mean": 2.0}')
        assert load_scenario(path).poisson_mean == 2.0

    def test_errors(self):
        with pytest.raises(ConfigError):
            ScenarioConfig("urban")
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict({"type": "los", "k": 3})

    def test_generate_dispatch(self):
        rng = np.random.default_rng(0)
        h = generate(rng, RX, TX, ScenarioConfig("single", tx_sin=0.1))
        assert len(h.paths) == 1 and h.paths.tx_sin[0] == 0.1

    def test_pathset_validation(self):
        with pytest.raises(ValueError):
            PathSet(np.array([1.0, 2.0]), np.array([0.1]), np.array([0.1, 0.2]), np.array([0.5, 0.5]))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), kind=st.sampled_from(["los", "nlos"]))
def test_matrix_is_path_sum(seed, kind):
    h = generate(np.random.default_rng(seed), Ula(4), Ula(8), ScenarioConfig(kind))
    np.testing.assert_allclose(h.matrix, channel_matrix(Ula(4), Ula(8), h.paths), atol=1e-12)
    assert h.paths.power_fractions.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.linalg.matrix_rank(h.matrix) <= len(h.paths)
