import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from idbs.beams import (
    ConfigError,
    Ula,
    array_response,
    beam_gain,
    dft_codebook,
    flat_wide_beam,
    shift_beam,
    steered_beam,
    wide_beam,
)
from idbs.channel import effective_channel, single_path


class TestArrayResponse:
    def test_broadside(self):
        np.testing.assert_array_equal(array_response(Ula(8), 0.0), np.ones(8))

    def test_endfire(self):
        a = array_response(Ula(4), 1.0)
        np.testing.assert_allclose(a, np.exp(-1j * np.pi * np.arange(4)), atol=1e-15)

    def test_conjugate_symmetry(self):
        u = Ula(16)
        np.testing.assert_allclose(array_response(u, -0.37), np.conj(array_response(u, 0.37)))

    def test_norm(self):
        assert np.linalg.norm(array_response(Ula(32), 0.2)) ** 2 == pytest.approx(32)

    def test_rows_for_vector(self):
        assert array_response(Ula(8), np.array([0.0, 0.5, -0.5])).shape == (3, 8)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            array_response(Ula(8), 1.2)

    def test_bad_array(self):
        with pytest.raises(ConfigError):
            Ula(0)
        with pytest.raises(ConfigError):
            Ula(8, -0.5)


class TestCodebook:
    @pytest.mark.parametrize("n,sector,count", [(32, (-0.5, 0.5), 16), (64, (-0.5, 0.5), 32),
                                                (16, (-1.0, 1.0), 16)])
    def test_sizes(self, n, sector, count):
        assert len(dft_codebook(Ula(n), sector)) == count

    def test_centers(self):
        cb = dft_codebook(Ula(32), (-0.5, 0.5))
        s = np.arange(1, 17)
        np.testing.assert_allclose(cb.centers, -0.5 + (s - 0.5) / 16)
        np.testing.assert_allclose(np.diff(cb.centers), 2 / 32)

    def test_unit_norm(self):
        for b in dft_codebook(Ula(16)):
            assert np.linalg.norm(b.weights) == pytest.approx(1.0, abs=1e-12)
            assert b.coverage[1] - b.coverage[0] == pytest.approx(2 / 16)

    def test_gain_peak_and_orthogonality(self):
        cb = dft_codebook(Ula(32), (-0.5, 0.5))
        for i, b in enumerate(cb):
            assert beam_gain(b, b.center) == pytest.approx(32, abs=1e-9)
            for j in (i - 1, i + 3):
                if 0 <= j < len(cb):
                    assert beam_gain(b, cb[j].center) == pytest.approx(0.0, abs=1e-9)

    def test_matrix_columns(self):
        cb = dft_codebook(Ula(16))
        m = cb.matrix()
        assert m.shape == (16, 16)
        np.testing.assert_allclose(m.conj().T @ m, np.eye(16), atol=1e-12)

    def test_misaligned_sector(self):
        with pytest.raises(ConfigError):
            dft_codebook(Ula(32), (-0.5, 0.51))
        with pytest.raises(ConfigError):
            dft_codebook(Ula(32), (-1.5, 0.5))

    def test_adjacency(self):
        full = dft_codebook(Ula(16), (-1.0, 1.0))
        half = dft_codebook(Ula(32), (-0.5, 0.5))
        assert full.circular and not half.circular
        assert full.adjacent(0, 15) and full.adjacent(4, 5)
        assert not half.adjacent(0, 15) and not full.adjacent(3, 5)
        # the wrapped neighbour sits one beam width past the sector edge
        assert full.neighbour_center(0, 15) == pytest.approx(full[0].center - 2 / 16)
        assert full.neighbour_center(15, 0) == pytest.approx(full[15].center + 2 / 16)

    def test_index_of(self):
        cb = dft_codebook(Ula(32), (-0.5, 0.5))
        assert cb.index_of(0.0282) == 8
        assert cb.index_of(0.0594) == 8
        assert cb.index_of(0.07) == 9


class TestExampleGeometry:
    """Single path seen through the 16-beam codebook of a 32-element array."""

    @pytest.mark.parametrize("sin_phi", [0.0141, 0.0282])
    def test_centered_path_one_dominant_beam(self, sin_phi):
        cb = dft_codebook(Ula(32), (-0.5, 0.5))
        g = np.array([beam_gain(b, sin_phi) for b in cb])
        assert int(np.argmax(g)) == 8
        assert g[8] > 5 * np.sort(g)[-2]

    def test_boundary_path_two_comparable_beams(self):
        cb = dft_codebook(Ula(32), (-0.5, 0.5))
        g = np.array([beam_gain(b, 0.0594) for b in cb])
        assert set(np.argsort(g)[-2:]) == {8, 9}
        assert g[8] / g[9] < 2.0
        shifted = shift_beam(cb[8], cb[9].center)
        assert beam_gain(shifted, 0.0594) > max(g[8], g[9])


class TestWideBeams:
    def test_single_element_flat(self):
        wb = wide_beam(Ula(64))
        s = np.linspace(-1, 1, 101)
        np.testing.assert_allclose(beam_gain(wb, s), 1.0, atol=1e-12)
        assert np.linalg.norm(wb.weights) == 1.0

    def test_single_element_phase1_channel(self):
        rx, tx = Ula(4), Ula(8)
        h = single_path(rx, tx, 0.7 - 0.2j, 0.3, -0.4)
        u = steered_beam(rx, 0.1)
        got = effective_channel(h, u, wide_beam(tx))
        expected = (0.7 - 0.2j) * (np.conj(u.weights) @ array_response(rx, -0.4)) \
            * np.conj(array_response(tx, 0.3)[0])
        assert got == pytest.approx(expected, abs=1e-12)

    def test_flat_beam_covers_sector(self):
        wb = flat_wide_beam(Ula(64), (-0.5, 0.5))
        assert np.linalg.norm(wb.weights) == pytest.approx(1.0, abs=1e-12)
        inside = beam_gain(wb, np.linspace(-0.49, 0.49, 400))
        assert inside.min() > 1.5
        assert inside.max() < 2.3
        outside = beam_gain(wb, np.linspace(0.6, 0.95, 100))
        assert np.median(outside) < 0.3

    def test_flat_beam_cached(self):
        a = flat_wide_beam(Ula(32), (-0.5, 0.5))
        b = flat_wide_beam(Ula(32), (-0.5, 0.5))
        np.testing.assert_array_equal(a.weights, b.weights)
        assert a.weights is not b.weights


class TestShiftBeam:
    def test_boundary_becomes_peak(self):
        cb = dft_codebook(Ula(32), (-0.5, 0.5))
        s = shift_beam(cb[8], cb[9].center)
        assert s.center == pytest.approx(cb[8].coverage[1])
        assert beam_gain(s, cb[8].coverage[1]) == pytest.approx(32, abs=1e-6)

    def test_round_trip(self):
        cb = dft_codebook(Ula(16))
        right = shift_beam(cb[4], cb[5].center)
        back = shift_beam(right, right.center - 2 / 16)
        np.testing.assert_allclose(back.weights, cb[4].weights, atol=1e-12)

    def test_norm_preserved(self):
        cb = dft_codebook(Ula(16))
        assert np.linalg.norm(shift_beam(cb[3], cb[2].center).weights) == pytest.approx(1.0)

    def test_non_adjacent(self):
        cb = dft_codebook(Ula(16))
        with pytest.raises(ValueError):
            shift_beam(cb[3], cb[5].center)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(2, 64), s=st.floats(-1, 1))
def test_gain_bounded_by_array_size(n, s):
    b = steered_beam(Ula(n), 0.0)
    assert -1e-9 <= beam_gain(b, s) <= n + 1e-9


@settings(max_examples=50, deadline=None)
@given(k=st.integers(0, 15), direction=st.sampled_from([-1, 1]))
def test_shift_moves_half_width(k, direction):
    cb = dft_codebook(Ula(16))
    target = cb[k].center + direction * 2 / 16
    s = shift_beam(cb[k], target)
    assert s.center - cb[k].center == pytest.approx(direction / 16)
