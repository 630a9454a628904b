"""Random narrowband channels built from discrete paths.

Every generator returns a :class:`ChannelRealization` whose matrix is
``sum_i gain_i * a_R(psi_i) a_T(phi_i)^H``, so oracles can read the true
path geometry.  Average total path power is normalized to 1, which makes
the pre-beamforming SNR equal to ``P_T / sigma^2``.
"""

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .beams import ConfigError, Ula, array_response


@dataclass(frozen=True, eq=False)
class PathSet:
    gains: np.ndarray
    tx_sin: np.ndarray
    rx_sin: np.ndarray
    power_fractions: np.ndarray

    def __post_init__(self):
        for name in ("gains", "tx_sin", "rx_sin", "power_fractions"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name))))
        n = len(self.gains)
        if n < 1:
            raise ValueError("a path set needs at least one path")
        if not (len(self.tx_sin) == len(self.rx_sin) == len(self.power_fractions) == n):
            raise ValueError("path arrays must have equal length")

    def __len__(self):
        return len(self.gains)


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    matrix: np.ndarray
    paths: PathSet
    rx: Ula
    tx: Ula


def channel_matrix(rx, tx, paths):
    """``sum_i gain_i a_R(psi_i) a_T(phi_i)^H`` as an ``N_R x N_T`` array."""
    ar = array_response(rx, paths.rx_sin)
    at = array_response(tx, paths.tx_sin)
    return (ar.T * paths.gains) @ np.conj(at)


def _realize(rx, tx, paths):
    return ChannelRealization(channel_matrix(rx, tx, paths), paths, rx, tx)


def single_path(rx, tx, gain, tx_sin, rx_sin=0.0):
    """Rank-one channel with one path of complex ``gain``."""
    paths = PathSet(np.array([complex(gain)]), np.array([float(tx_sin)]),
                    np.array([float(rx_sin)]), np.array([1.0]))
    return _realize(rx, tx, paths)


def _complex_normal(rng, size):
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / math.sqrt(2.0)


def _sin_of_uniform_degrees(rng, sector, size):
    lo = math.degrees(math.asin(sector[0]))
    hi = math.degrees(math.asin(sector[1]))
    return np.sin(np.radians(rng.uniform(lo, hi, size)))


@dataclass(frozen=True)
class ScenarioConfig:
    """Channel scenario parameters; ``type`` is ``single``, ``los`` or ``nlos``."""

    type: str = "los"
    k_factor_db: float = None
    poisson_mean: float = 1.8
    n_scatter: int = 10
    decay: float = 1.5
    tx_sector: tuple = (-0.5, 0.5)
    rx_sector: tuple = (-1.0, 1.0)
    tx_sin: float = 0.0
    rx_sin: float = 0.0
    gain: complex = 1.0

    def __post_init__(self):
        if self.type not in ("single", "los", "nlos"):
            raise ConfigError(f"unknown channel type {self.type!r}")
        if self.k_factor_db is None:
            object.__setattr__(self, "k_factor_db", 6.0 if self.type == "nlos" else 13.2)
        object.__setattr__(self, "tx_sector", tuple(float(v) for v in self.tx_sector))
        object.__setattr__(self, "rx_sector", tuple(float(v) for v in self.rx_sector))
        if self.poisson_mean < 0 or self.n_scatter < 0 or self.decay <= 0:
            raise ConfigError("poisson_mean, n_scatter must be >= 0 and decay > 0")

    @property
    def k_linear(self):
        return 10.0 ** (self.k_factor_db / 10.0)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "sectors" in d:
            s = d.pop("sectors")
            d["tx_sector"], d["rx_sector"] = s["tx"], s["rx"]
        if "gain" in d and isinstance(d["gain"], (list, tuple)):
            d["gain"] = complex(*d["gain"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown channel config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        d = asdict(self)
        d["gain"] = [complex(self.gain).real, complex(self.gain).imag]
        d["tx_sector"], d["rx_sector"] = list(self.tx_sector), list(self.rx_sector)
        return d


def los_channel(rng, rx, tx, config=None):
    """Dominant path plus ``n_scatter`` complex-Gaussian sub-paths at power ratio K.

    Physical angles of every path are uniform in degrees over the sectors.
    """
    config = config or ScenarioConfig("los")
    k = config.k_linear
    n_s = config.n_scatter
    tx_sin = _sin_of_uniform_degrees(rng, config.tx_sector, 1 + n_s)
    rx_sin = _sin_of_uniform_degrees(rng, config.rx_sector, 1 + n_s)
    theta = rng.uniform(0.0, 2.0 * math.pi)
    dominant = math.sqrt(k / (1.0 + k)) * np.exp(1j * theta)
    if n_s:
        scatter = _complex_normal(rng, n_s) * math.sqrt(1.0 / ((1.0 + k) * n_s))
        gains = np.concatenate(([dominant], scatter))
        fractions = np.concatenate(([k / (1.0 + k)], np.full(n_s, 1.0 / ((1.0 + k) * n_s))))
    else:
        gains = np.array([np.exp(1j * theta)])
        fractions = np.array([1.0])
    return _realize(rx, tx, PathSet(gains, tx_sin, rx_sin, fractions))


def exponential_fractions(rng, n_paths, decay=1.5):
    """Default power-fraction generator: ``exp(-i/decay) * E_i`` normalized, sorted descending."""
    w = np.exp(-np.arange(n_paths) / decay) * rng.exponential(1.0, n_paths)
    w = np.sort(w)[::-1]
    return w / w.sum()


def nlos_channel(rng, rx, tx, config=None, fraction_fn=exponential_fractions):
    """``max(1, Poisson)`` Rician paths with power fractions from ``fraction_fn``."""
    config = config or ScenarioConfig("nlos")
    n_paths = max(1, int(rng.poisson(config.poisson_mean)))
    fractions = np.asarray(fraction_fn(rng, n_paths, config.decay), dtype=float)
    tx_sin = _sin_of_uniform_degrees(rng, config.tx_sector, n_paths)
    rx_sin = _sin_of_uniform_degrees(rng, config.rx_sector, n_paths)
    k = config.k_linear
    theta = rng.uniform(0.0, 2.0 * math.pi, n_paths)
    fading = math.sqrt(k / (1.0 + k)) * np.exp(1j * theta) + math.sqrt(1.0 / (1.0 + k)) * _complex_normal(rng, n_paths)
    gains = np.sqrt(fractions) * fading
    return _realize(rx, tx, PathSet(gains, tx_sin, rx_sin, fractions))


def generate(rng, rx, tx, config):
    """Draw a channel for ``config.type``."""
    if config.type == "single":
        return single_path(rx, tx, config.gain, config.tx_sin, config.rx_sin)
    if config.type == "los":
        return los_channel(rng, rx, tx, config)
    return nlos_channel(rng, rx, tx, config)


def effective_channel(h, rx_weights, tx_weights):
    """``u^H H w``; accepts a matrix or a :class:`ChannelRealization`.

    Weight arguments may be beams, vectors, or 2-D arrays with one beam per
    column (giving a vector or matrix of effective channels).
    """
    m = h.matrix if isinstance(h, ChannelRealization) else np.asarray(h)
    u = getattr(rx_weights, "weights", rx_weights)
    w = getattr(tx_weights, "weights", tx_weights)
    u = np.asarray(u)
    w = np.asarray(w)
    if u.shape[0] != m.shape[0] or w.shape[0] != m.shape[1]:
        raise ValueError(
            f"dimension mismatch: H is {m.shape}, rx weights {u.shape}, tx weights {w.shape}"
        )
    out = np.conj(u).T @ m @ w
    return complex(out) if np.ndim(out) == 0 else out


def load_scenario(path):
    with open(path) as fh:
        return ScenarioConfig.from_dict(json.load(fh))
