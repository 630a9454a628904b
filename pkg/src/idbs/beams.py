"""Uniform linear arrays, DFT codebooks and beamforming gains.

Angles are sines of the physical angle ("sin-angles") throughout.  Beam
weights are unit-norm; the unnormalized array response has squared norm
equal to the number of antennas, so a DFT beam peaks at gain ``N``.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class ConfigError(ValueError):
    """Invalid array, codebook or scenario configuration."""


@dataclass(frozen=True)
class Ula:
    """Uniform linear array with ``n_antennas`` elements spaced ``d/lambda``."""

    n_antennas: int
    spacing_over_lambda: float = 0.5

    def __post_init__(self):
        if int(self.n_antennas) != self.n_antennas or self.n_antennas < 1:
            raise ConfigError(f"n_antennas must be a positive integer, got {self.n_antennas!r}")
        if not self.spacing_over_lambda > 0:
            raise ConfigError(f"spacing must be positive, got {self.spacing_over_lambda!r}")


def _phase(array, sin_angle):
    k = np.arange(array.n_antennas)
    return -2.0 * math.pi * array.spacing_over_lambda * np.multiply.outer(sin_angle, k)


def array_response(array, sin_angle):
    """Unnormalized response ``exp(-j 2 pi (d/lambda) k sin_angle)``, ``k = 0..N-1``.

    A vector of sin-angles gives one response per row.
    """
    s = np.asarray(sin_angle, dtype=float)
    if not np.all(np.isfinite(s)) or np.any(np.abs(s) > 1.0):
        raise ValueError(f"sin_angle must lie in [-1, 1], got {sin_angle!r}")
    return np.exp(1j * _phase(array, s))


@dataclass(frozen=True, eq=False)
class Beam:
    """Unit-norm beamformer steered to ``center`` (a sin-angle)."""

    weights: np.ndarray
    center: float
    array: Ula

    @property
    def half_width(self):
        return 1.0 / self.array.n_antennas

    @property
    def coverage(self):
        return (self.center - self.half_width, self.center + self.half_width)

    def gain(self, sin_angle):
        return beam_gain(self, sin_angle)


def steered_beam(array, center):
    """DFT-style beam steered to ``center``; peak gain ``N`` there."""
    w = array_response(array, center) / math.sqrt(array.n_antennas)
    return Beam(w, float(center), array)


@dataclass(frozen=True, eq=False)
class Codebook:
    """Ordered DFT beams whose index adjacency matches angular adjacency."""

    array: Ula
    beams: tuple
    sector: tuple

    def __len__(self):
        return len(self.beams)

    def __getitem__(self, i):
        return self.beams[i]

    def __iter__(self):
        return iter(self.beams)

    @property
    def centers(self):
        return np.array([b.center for b in self.beams])

    def matrix(self):
        """Beam weights as columns, shape ``(N, len(self))``."""
        return np.column_stack([b.weights for b in self.beams])

    @property
    def circular(self):
        """True when the sector spans a full spatial period, so the end beams are neighbours."""
        period = 1.0 / self.array.spacing_over_lambda
        return abs((self.sector[1] - self.sector[0]) - period) < 1e-9

    def adjacent(self, i, j):
        n = len(self.beams)
        return abs(i - j) == 1 or (self.circular and n > 2 and abs(i - j) == n - 1)

    def neighbour_center(self, i, j):
        """Center of beam ``j`` unwrapped to lie next to beam ``i``."""
        c = self.beams[j].center
        if abs(i - j) != 1 and self.circular:
            period = 1.0 / self.array.spacing_over_lambda
            c += period if j < i else -period
        return c

    def index_of(self, sin_angle):
        """Index of the beam whose coverage contains ``sin_angle``."""
        lo = self.sector[0]
        width = 2.0 / self.array.n_antennas
        i = int(math.floor((sin_angle - lo) / width))
        return min(max(i, 0), len(self.beams) - 1)


def dft_codebook(array, sector=(-1.0, 1.0)):
    """Beams with centers ``sector[0] + (2k + 1)/N`` tiling ``sector``."""
    lo, hi = float(sector[0]), float(sector[1])
    if not -1.0 <= lo < hi <= 1.0:
        raise ConfigError(f"sector must be a subinterval of [-1, 1], got {sector!r}")
    n = array.n_antennas
    count = (hi - lo) * n / 2.0
    n_beams = int(round(count))
    if n_beams < 1 or abs(count - n_beams) > 1e-9:
        raise ConfigError(f"sector width {hi - lo} is not a multiple of 2/N = {2.0 / n}")
    beams = tuple(steered_beam(array, lo + (2 * k + 1) / n) for k in range(n_beams))
    return Codebook(array, beams, (lo, hi))


def beam_gain(beam, sin_angle):
    """Beamforming gain ``|w^H a(sin_angle)|**2``."""
    a = array_response(beam.array, sin_angle)
    v = a @ np.conj(beam.weights)
    g = np.abs(v) ** 2
    return float(g) if g.ndim == 0 else g


def wide_beam(array):
    """Single active element: unit gain at every angle."""
    w = np.zeros(array.n_antennas, dtype=complex)
    w[0] = 1.0
    return Beam(w, 0.0, array)


def flat_wide_beam(array, sector=(-0.5, 0.5), n_grid=2048, iters=300, out_weight=0.1):
    """Unit-norm beam with near-constant gain over ``sector`` and little leakage outside.

    Magnitude-only least squares on a uniform sin-angle grid: the target is
    the power-conserving flat level ``2 / width`` inside the sector and 0
    outside (down-weighted by ``out_weight``); phases are re-estimated from
    the current pattern on each pass.  For 64 elements over ``[-1/2, 1/2]``
    the in-sector gain stays within about 1.9 to 2.0, dipping to ~1.65 at
    the sector edges.
    """
    w = _flat_weights(array.n_antennas, float(array.spacing_over_lambda),
                      float(sector[0]), float(sector[1]), int(n_grid), int(iters), float(out_weight))
    return Beam(w.copy(), 0.5 * (sector[0] + sector[1]), array)


@lru_cache(maxsize=32)
def _flat_weights(n, spacing, lo, hi, n_grid, iters, out_weight):
    array = Ula(n, spacing)
    s = (np.arange(n_grid) + 0.5) / n_grid * 2.0 - 1.0
    a = np.conj(array_response(array, s))
    inside = (s >= lo) & (s <= hi)
    target = np.where(inside, 1.0 / math.sqrt(0.5 * (hi - lo)), 0.0)
    wts = np.where(inside, 1.0, out_weight)
    pinv = np.linalg.pinv(a * wts[:, None])
    k = np.arange(n)
    w = np.exp(1j * math.pi * 0.5 * (hi - lo) * k * k / n) / math.sqrt(n)
    for _ in range(iters):
        w = pinv @ (wts * target * np.exp(1j * np.angle(a @ w)))
    w = w / np.linalg.norm(w)
    w.setflags(write=False)
    return w


def shift_beam(beam, toward_center):
    """Re-steer ``beam`` by half a beam width toward an adjacent beam's center."""
    n = beam.array.n_antennas
    gap = toward_center - beam.center
    if abs(abs(gap) - 2.0 / n) > 1e-9:
        raise ValueError(
            f"target center {toward_center} is not adjacent to {beam.center} (spacing {2.0 / n})"
        )
    delta = math.copysign(1.0 / n, gap)
    k = np.arange(n)
    mod = np.exp(-2j * math.pi * beam.array.spacing_over_lambda * k * delta)
    return Beam(beam.weights * mod, beam.center + delta, beam.array)
