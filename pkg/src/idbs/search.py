"""Iterative deactivation search over a beam codebook, and its two-phase driver.

Pilot blocks are simulated in sufficient-statistic form: each measurement
of beam ``l`` draws one complex Gaussian observation with mean ``h_l`` and
variance ``sigma^2 / (n0 P_T)`` and folds it into the running average
``r_l``.  The accumulated statistic is ``T_l = 2 n_l P_T |r_l|^2 / sigma^2``.

Two engines run the same loop.  ``"kernel"`` calls the compiled (or pure
Python fallback) kernel in one shot; ``"stepwise"`` drives the public
:func:`measure`, :func:`deactivate`, :func:`restore`, :func:`check_stop`
operations one iteration at a time and can report every intermediate
state.  Given the same noise draws they produce identical results.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels, _pykernels
from .beams import ConfigError, shift_beam
from .channel import effective_channel

RUNNING = _kernels.RUNNING
BUDGET_STOP = _kernels.BUDGET_STOP
SINGLE_STOP = _kernels.SINGLE_STOP
ADJACENT_STOP = _kernels.ADJACENT_STOP
WATCH_STOP = _kernels.WATCH_STOP

FLAG_NAMES = {
    RUNNING: "running",
    BUDGET_STOP: "budget_stop",
    SINGLE_STOP: "single_stop",
    ADJACENT_STOP: "adjacent_stop",
    WATCH_STOP: "watch_stop",
}


@dataclass(frozen=True)
class SearchConfig:
    """Parameters of one search phase.

    ``budget`` is the pilot budget of the phase.  The ``use_*`` switches
    turn off adjacent-pair stopping, restoration and beam shifting for
    ablations.
    """

    alpha: float
    budget: int
    table: object
    n0: int = 1
    noise_var: float = 1.0
    tx_power: float = 1.0
    use_cond2: bool = True
    use_restore: bool = True
    use_shift: bool = True

    def __post_init__(self):
        if not 0.5 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0.5, 1), got {self.alpha}")
        if int(self.n0) != self.n0 or self.n0 < 1:
            raise ConfigError(f"n0 must be a positive integer, got {self.n0}")
        if int(self.budget) != self.budget or self.budget < 0:
            raise ConfigError(f"budget must be a nonnegative integer, got {self.budget}")
        if not (self.noise_var > 0 and self.tx_power > 0):
            raise ConfigError("noise_var and tx_power must be positive")
        if self.table is not None and abs(self.table.alpha - self.alpha) > 1e-12:
            raise ConfigError(f"table is for alpha={self.table.alpha}, config has {self.alpha}")

    @property
    def noise_scale(self):
        """Per-component standard deviation of one measurement's noise."""
        return math.sqrt(self.noise_var / (2.0 * self.n0 * self.tx_power))

    @property
    def t_scale(self):
        return 2.0 * self.tx_power / self.noise_var

    @classmethod
    def from_snr_db(cls, alpha, budget, table, snr_db, **kw):
        """Unit transmit power and noise variance ``10**(-snr_db/10)``."""
        return cls(alpha, budget, table, noise_var=10.0 ** (-snr_db / 10.0), **kw)


class NoiseStream:
    """Pre-drawn standard normal pairs consumed in order."""

    def __init__(self, rng, n):
        z = rng.standard_normal((int(n), 2))
        self.re = np.ascontiguousarray(z[:, 0])
        self.im = np.ascontiguousarray(z[:, 1])
        self.pos = 0

    def __len__(self):
        return len(self.re)

    def next(self):
        i = self.pos
        self.pos += 1
        return float(self.re[i]), float(self.im[i])


@dataclass
class SearchState:
    """Mutable per-phase search record.  ``counts`` are measurements, not pilots."""

    n_beams: int
    t: int = 0
    spent: int = 0
    flag: int = RUNNING
    counts: list = None
    r_re: list = None
    r_im: list = None
    stat: list = None
    active: list = None
    ever_deactivated: list = None
    other: int = -1
    n_restored: int = 0
    n_extrapolated: int = 0
    draws: int = 0

    def __post_init__(self):
        n = self.n_beams
        for name, fill in (("counts", 0), ("r_re", 0.0), ("r_im", 0.0), ("stat", 0.0),
                           ("active", 1), ("ever_deactivated", 0)):
            if getattr(self, name) is None:
                setattr(self, name, [fill] * n)

    @property
    def active_set(self):
        return [b for b in range(self.n_beams) if self.active[b]]

    @property
    def best(self):
        """Strongest active beam (lowest index on ties), or -1."""
        best = -1
        for b in range(self.n_beams):
            if self.active[b] and (best < 0 or self.stat[b] > self.stat[best]):
                best = b
        return best

    @property
    def flag_name(self):
        return FLAG_NAMES[self.flag]

    def pilots(self, n0=1):
        return [c * n0 for c in self.counts]

    @classmethod
    def from_kernel(cls, out):
        s = cls(len(out["counts"]))
        s.t = int(out["t"])
        s.spent = int(out["spent"])
        s.flag = int(out["flag"])
        s.counts = [int(c) for c in out["counts"]]
        s.r_re = [float(v) for v in out["r_re"]]
        s.r_im = [float(v) for v in out["r_im"]]
        s.stat = [float(v) for v in out["stat"]]
        s.active = [int(v) for v in out["active"]]
        s.ever_deactivated = [int(v) for v in out["ever_deactivated"]]
        s.other = int(out["other"])
        s.n_restored = int(out["n_restored"])
        s.n_extrapolated = int(out["n_extrapolated"])
        s.draws = int(out["draws"])
        return s


@dataclass(frozen=True)
class Decision:
    """Selected beam of one phase; ``source`` is ``codebook`` or ``shifted``."""

    beam: object
    index: int
    source: str
    overhead: int
    flag: int
    other: int = -1

    @property
    def flag_name(self):
        return FLAG_NAMES[self.flag]


def _draw(noise):
    if isinstance(noise, NoiseStream):
        return noise.next()
    z = noise.standard_normal(2)
    return float(z[0]), float(z[1])


def measure(state, config, b, h, noise):
    """Take one length-``n0`` pilot measurement of beam ``b`` with effective channel ``h``.

    ``noise`` is a :class:`NoiseStream` or a numpy Generator.
    """
    z_re, z_im = _draw(noise)
    h = complex(h)
    k = state.counts[b] + 1
    state.counts[b] = k
    o_re = h.real + config.noise_scale * z_re
    o_im = h.imag + config.noise_scale * z_im
    state.draws += 1
    state.r_re[b] = (state.r_re[b] * (k - 1) + o_re) / k
    state.r_im[b] = (state.r_im[b] * (k - 1) + o_im) / k
    state.stat[b] = (config.t_scale * (k * config.n0)) * (
        state.r_re[b] * state.r_re[b] + state.r_im[b] * state.r_im[b]
    )
    state.spent += config.n0


def _table_args(table):
    return table._grid_list, table._tau_list, table.tail


def deactivate(state, table):
    """Remove active beams whose statistic falls below ``tau(T_best)``; return them."""
    best = -1
    t_min = math.inf
    for b in range(state.n_beams):
        if state.active[b]:
            if best < 0 or state.stat[b] > state.stat[best]:
                best = b
            if state.stat[b] < t_min:
                t_min = state.stat[b]
    grid, tau, tail = _table_args(table)
    thr, ext = _pykernels.lookup_tau_kernel(grid, tau, tail, state.stat[best])
    if ext:
        state.n_extrapolated += 1
    removed = []
    if t_min < thr:
        for b in range(state.n_beams):
            if state.active[b] and b != best and state.stat[b] < thr:
                state.active[b] = 0
                state.ever_deactivated[b] = 1
                removed.append(b)
    return removed


def restore(state, config, channels, noise):
    """Re-admit the beam with the largest ``|r|`` over all beams if it is inactive.

    Catch-up measurements bring it level with the active beams and are
    charged to the budget; running out mid catch-up sets ``budget_stop``.
    Returns the restored index or -1.
    """
    g = 0
    g_pow = state.r_re[0] * state.r_re[0] + state.r_im[0] * state.r_im[0]
    for b in range(1, state.n_beams):
        p = state.r_re[b] * state.r_re[b] + state.r_im[b] * state.r_im[b]
        if p > g_pow:
            g = b
            g_pow = p
    if state.active[g]:
        return -1
    while state.counts[g] < state.t:
        if state.spent + config.n0 > config.budget:
            state.flag = BUDGET_STOP
            return -1
        measure(state, config, g, channels[g], noise)
    k = state.counts[g]
    state.stat[g] = (config.t_scale * (k * config.n0)) * (
        state.r_re[g] * state.r_re[g] + state.r_im[g] * state.r_im[g]
    )
    state.active[g] = 1
    state.n_restored += 1
    return g


def check_stop(state, config, wrap=False):
    """Set and return the termination flag (single, then adjacent, then budget).

    ``wrap`` makes the first and last beams adjacent (a full-period codebook).
    """
    n_act = 0
    best = state.best
    for b in range(state.n_beams):
        if state.active[b]:
            n_act += 1
    state.other = -1
    if n_act == 1:
        state.flag = SINGLE_STOP
    elif config.use_cond2 and n_act == 2:
        other = -1
        for b in range(state.n_beams):
            if state.active[b] and b != best:
                other = b
        adjacent = abs(other - best) == 1 or (wrap and abs(other - best) == state.n_beams - 1)
        if adjacent and state.stat[best] < 2.0 * state.stat[other]:
            state.flag = ADJACENT_STOP
            state.other = other
    if state.flag == RUNNING and state.spent > config.budget - config.n0 * n_act:
        state.flag = BUDGET_STOP
    return state.flag


def decide(state, codebook, config=None):
    """Final beam: the strongest active one, shifted toward its rival on an adjacent stop.

    Shifting needs a :class:`~idbs.beams.Codebook`; for any other sequence
    the unshifted entry is returned.
    """
    if state.flag == RUNNING:
        raise ValueError("cannot decide while the search is running")
    best = state.best
    beam = codebook[best]
    use_shift = True if config is None else config.use_shift
    # a plain sequence of beams has no geometry to shift along
    if state.flag == ADJACENT_STOP and use_shift and hasattr(codebook, "neighbour_center"):
        other = state.other
        return Decision(shift_beam(beam, codebook.neighbour_center(best, other)), best, "shifted",
                        state.spent, state.flag, other)
    return Decision(beam, best, "codebook", state.spent, state.flag,
                    state.other if state.flag == ADJACENT_STOP else -1)


def _channels(codebook, channel_fn):
    if callable(channel_fn):
        return np.array([complex(channel_fn(b)) for b in codebook], dtype=complex)
    h = np.asarray(channel_fn, dtype=complex)
    if h.shape != (len(codebook),):
        raise ValueError(f"need {len(codebook)} effective channels, got shape {h.shape}")
    return h


def run_phase(codebook, channel_fn, config, rng, engine="kernel", trace=None, watch=-1):
    """Run the search over ``codebook`` until a stopping condition fires.

    ``channel_fn`` maps a beam to its effective channel, or is the array of
    effective channels in codebook order.  ``trace(state, stage)`` is called
    by the stepwise engine after every stage of every iteration.  Returns
    ``(Decision, SearchState)``.
    """
    h = _channels(codebook, channel_fn)
    n_beams = len(h)
    if config.budget < config.n0 * n_beams:
        raise ConfigError(
            f"budget {config.budget} cannot cover one sweep of {n_beams} beams with n0={config.n0}"
        )
    noise = NoiseStream(rng, config.budget // config.n0)
    wrap = bool(getattr(codebook, "circular", False)) and n_beams > 2
    if engine == "kernel":
        state = _run_kernel(h, noise, config, watch, wrap)
    elif engine == "stepwise":
        state = _run_stepwise(h, noise, config, trace, watch, wrap)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    if state.flag == WATCH_STOP:
        return None, state
    return decide(state, codebook, config), state


def _run_kernel(h, noise, config, watch, wrap=False):
    h_re = np.ascontiguousarray(h.real)
    h_im = np.ascontiguousarray(h.imag)
    grid, tau, tail = config.table.kernel_args()
    if _kernels.BACKEND == "python":
        h_re, h_im = h_re.tolist(), h_im.tolist()
        z_re, z_im = noise.re.tolist(), noise.im.tolist()
    else:
        z_re, z_im = noise.re, noise.im
    out = _kernels.run_phase_kernel(
        h_re, h_im, z_re, z_im, int(config.n0), int(config.budget),
        config.noise_scale, config.t_scale, grid, tau, tail,
        bool(config.use_cond2), bool(config.use_restore), int(watch), bool(wrap),
    )
    return SearchState.from_kernel(out)


def _run_stepwise(h, noise, config, trace, watch, wrap=False):
    state = SearchState(len(h))
    hs = [complex(v) for v in h]
    emit = trace or (lambda s, stage: None)
    while state.flag == RUNNING:
        state.t += 1
        for b in range(state.n_beams):
            if state.active[b]:
                measure(state, config, b, hs[b], noise)
        emit(state, "measure")
        deactivate(state, config.table)
        emit(state, "deactivate")
        if watch >= 0 and state.ever_deactivated[watch]:
            state.flag = WATCH_STOP
            break
        if config.use_restore:
            restore(state, config, hs, noise)
            emit(state, "restore")
            if state.flag != RUNNING:
                break
        check_stop(state, config, wrap)
        emit(state, "stop")
    if state.flag != ADJACENT_STOP:
        state.other = -1
    return state


@dataclass(frozen=True)
class TwoPhaseResult:
    rx: Decision
    tx: Decision
    overhead: int
    phase1: SearchState
    phase2: SearchState


def phase1_budget(total_budget, n_tx_beams, n0=1, margin=4):
    """Default Phase-1 cap ``N+ - margin * n0 * S``."""
    return int(total_budget - margin * n0 * n_tx_beams)


def run_two_phase(tx_codebook, rx_codebook, h, config, rng, n1=None, wide=None,
                  engine="kernel"):
    """Phase 1 picks the receive beam under the wide transmit beam; Phase 2 the transmit beam.

    ``config.budget`` is the total budget ``N+``; ``n1`` caps Phase 1
    (default :func:`phase1_budget`) and Phase 2 gets whatever Phase 1 left.
    The feedback between phases costs no pilots.
    """
    from .beams import wide_beam

    total = int(config.budget)
    n_s = len(tx_codebook)
    if n1 is None:
        n1 = phase1_budget(total, n_s, config.n0)
    if not n1 < total - config.n0 * n_s:
        raise ConfigError(f"Phase-1 budget {n1} must be below N+ - n0*S = {total - config.n0 * n_s}")
    wide = wide if wide is not None else wide_beam(tx_codebook.array)

    h1 = effective_channel(h, rx_codebook.matrix(), wide.weights)
    rx_dec, s1 = run_phase(rx_codebook, h1, replace(config, budget=int(n1)), rng, engine)
    h2 = effective_channel(h, rx_dec.beam.weights, tx_codebook.matrix())
    tx_dec, s2 = run_phase(tx_codebook, h2, replace(config, budget=total - s1.spent), rng, engine)
    return TwoPhaseResult(rx_dec, tx_dec, s1.spent + s2.spent, s1, s2)
