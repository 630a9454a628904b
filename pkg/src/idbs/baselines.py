"""Rate metric and the non-adaptive comparison schemes.

All searches follow the same two-phase order as the adaptive search: the
receive beam is chosen under the wide transmit beam, then the transmit
beam under the chosen receive beam.
"""

import math
from dataclasses import dataclass

import numpy as np

from .beams import ConfigError, steered_beam
from .channel import effective_channel, generate

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def spectrum_efficiency(h, rx_beam, tx_beam, snr):
    """``log2(1 + snr |u^H H w|^2)`` with ``snr = P_T / sigma^2`` (linear)."""
    g = effective_channel(h, rx_beam, tx_beam)
    return float(np.log2(1.0 + snr * np.abs(g) ** 2))


def oracle_codebook_pair(h, wide, rx_codebook, tx_codebook):
    """Noise-free two-phase selection: ``(rx index, tx index)``."""
    h1 = effective_channel(h, rx_codebook.matrix(), wide)
    i = int(np.argmax(np.abs(h1)))
    h2 = effective_channel(h, rx_codebook[i], tx_codebook.matrix())
    j = int(np.argmax(np.abs(h2)))
    return i, j


def _golden_max(fn, lo, hi, tol=1e-10, max_iter=200):
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def _best_steering(array, sector, density, gain_fn):
    n_grid = int(round((sector[1] - sector[0]) * array.n_antennas / 2.0 * density)) + 1
    grid = np.linspace(sector[0], sector[1], n_grid)
    weights = np.exp(-2j * math.pi * array.spacing_over_lambda
                     * np.multiply.outer(np.arange(array.n_antennas), grid))
    weights /= math.sqrt(array.n_antennas)
    values = gain_fn(weights)
    k = int(np.argmax(values))
    step = grid[1] - grid[0] if n_grid > 1 else 0.0
    lo = max(sector[0], grid[k] - step)
    hi = min(sector[1], grid[k] + step)

    def single(c):
        return float(gain_fn(steered_beam(array, c).weights[:, None])[0])

    c = _golden_max(single, lo, hi) if hi > lo else grid[k]
    if single(c) < values[k]:
        c = grid[k]
    return steered_beam(array, c)


def oracle_infinite_resolution(h, wide, rx_array, tx_array, rx_sector=(-1.0, 1.0),
                               tx_sector=(-0.5, 0.5), grid_density=64):
    """Noise-free two-phase selection over continuously steered beams.

    Each phase scans a grid ``grid_density`` times finer than the DFT beam
    spacing, then polishes the best point by golden-section search.
    Returns ``(rx_beam, tx_beam)``.
    """
    if grid_density < 16:
        raise ValueError("grid_density must be at least 16")
    m = h.matrix if hasattr(h, "matrix") else np.asarray(h)
    wv = getattr(wide, "weights", wide)
    col = m @ wv
    u = _best_steering(rx_array, rx_sector, grid_density,
                       lambda U: np.abs(np.conj(U).T @ col))
    row = np.conj(u.weights) @ m
    w = _best_steering(tx_array, tx_sector, grid_density, lambda W: np.abs(row @ W))
    return u, w


@dataclass(frozen=True)
class EsResult:
    rx_index: int
    tx_index: int
    overhead: int


def _check_split(split, n_rx, n_tx, budget=None):
    p1, p2 = (int(v) for v in split)
    if p1 < n_rx or p2 < n_tx:
        raise ConfigError(f"split {split} leaves a beam without pilots")
    if p1 % n_rx or p2 % n_tx:
        raise ConfigError(f"split {split} is not divisible by the beam counts ({n_rx}, {n_tx})")
    if budget is not None and p1 + p2 > budget:
        raise ConfigError(f"split {split} exceeds the budget {budget}")
    return p1, p2


def exhaustive_search(h, wide, rx_codebook, tx_codebook, split, snr, rng, budget=None):
    """Measure every beam of each phase with an equal share of that phase's pilots.

    ``split = (phase-1 pilots, phase-2 pilots)``.  The averaged measurement
    of a beam given ``m`` pilots is ``h + CN(0, 1/(m snr))``; the strongest
    is kept.
    """
    n_rx, n_tx = len(rx_codebook), len(tx_codebook)
    p1, p2 = _check_split(split, n_rx, n_tx, budget)
    h1 = effective_channel(h, rx_codebook.matrix(), wide)
    r1 = h1 + _noise(rng, n_rx, p1 // n_rx, snr)
    i = int(np.argmax(np.abs(r1)))
    h2 = effective_channel(h, rx_codebook[i], tx_codebook.matrix())
    r2 = h2 + _noise(rng, n_tx, p2 // n_tx, snr)
    j = int(np.argmax(np.abs(r2)))
    return EsResult(i, j, p1 + p2)


def _noise(rng, n, pilots, snr):
    z = rng.standard_normal((n, 2))
    return (z[:, 0] + 1j * z[:, 1]) * math.sqrt(1.0 / (2.0 * pilots * snr))


def feasible_splits(budget, n_rx, n_tx):
    """All ``(p1, p2)`` with ``p1`` a multiple of ``n_rx`` and ``p2`` the largest
    multiple of ``n_tx`` fitting in the rest."""
    out = []
    p1 = n_rx
    while budget - p1 >= n_tx:
        out.append((p1, (budget - p1) // n_tx * n_tx))
        p1 += n_rx
    return out


def best_split_search(scenario, rx_codebook, tx_codebook, wide, snr, budget, n_trials,
                      seed, split_grid=None):
    """Split with the largest mean ES rate over ``n_trials`` channels.

    Every candidate sees the same channel and noise seeds, so the comparison
    is paired.  This uses knowledge of the SNR and fading statistics that a
    real system lacks.  Ties go to the earliest candidate.  Returns
    ``(split, {split: mean_rate})``.
    """
    grid = split_grid if split_grid is not None else feasible_splits(
        budget, len(rx_codebook), len(tx_codebook))
    if len(grid) < 8 and split_grid is None:
        raise ConfigError("budget admits fewer than 8 candidate splits")
    rx_array, tx_array = rx_codebook.array, tx_codebook.array
    channels = []
    for trial in range(n_trials):
        c_seq, n_seq = np.random.SeedSequence([seed, trial]).spawn(2)
        channels.append((generate(np.random.default_rng(c_seq), rx_array, tx_array, scenario), n_seq))
    means = {}
    for split in grid:
        total = 0.0
        for ch, n_seq in channels:
            res = exhaustive_search(ch, wide, rx_codebook, tx_codebook, split, snr,
                                    np.random.default_rng(n_seq), budget)
            total += spectrum_efficiency(ch, rx_codebook[res.rx_index], tx_codebook[res.tx_index], snr)
        means[tuple(split)] = total / n_trials
    best = max(means, key=lambda k: (means[k], -list(means).index(k)))
    return best, means
