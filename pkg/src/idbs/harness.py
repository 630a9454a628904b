"""Config-driven Monte Carlo experiments and their tabular output.

Every trial draws its channel from ``SeedSequence([seed, trial])`` and its
noise from ``SeedSequence([seed, trial, snr_key])``, so all schemes and all
thresholds in a run see the same channels and noise (paired comparisons),
and results do not depend on how trials are split across workers.
"""

import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .baselines import (best_split_search, exhaustive_search, oracle_codebook_pair,
                        oracle_infinite_resolution, spectrum_efficiency)
from .beams import ConfigError, Ula, dft_codebook, flat_wide_beam, wide_beam
from .channel import ScenarioConfig, effective_channel, generate
from .posterior import get_table
from .search import (ADJACENT_STOP, BUDGET_STOP, SearchConfig, phase1_budget, run_phase,
                     run_two_phase)

log = logging.getLogger(__name__)

IDBS_SCHEMES = {
    "idbs": {},
    "idbs_no_shift": {"use_shift": False},
    "idbs_no_cond2": {"use_cond2": False},
    "idbs_no_restore": {"use_restore": False},
}
SCHEMES = tuple(IDBS_SCHEMES) + ("es", "oracles")
WORKERS_ENV = "IDBS_WORKERS"


@dataclass(frozen=True)
class ArrayConfig:
    n_tx: int = 64
    n_rx: int = 16
    tx_sector: tuple = (-0.5, 0.5)
    rx_sector: tuple = (-1.0, 1.0)
    spacing: float = 0.5
    wide_beam: str = "flat"

    def __post_init__(self):
        if self.wide_beam not in ("flat", "single"):
            raise ConfigError(f"wide_beam must be 'flat' or 'single', got {self.wide_beam!r}")
        object.__setattr__(self, "tx_sector", tuple(float(v) for v in self.tx_sector))
        object.__setattr__(self, "rx_sector", tuple(float(v) for v in self.rx_sector))

    def build(self):
        tx = Ula(self.n_tx, self.spacing)
        rx = Ula(self.n_rx, self.spacing)
        tcb = dft_codebook(tx, self.tx_sector)
        rcb = dft_codebook(rx, self.rx_sector)
        wb = flat_wide_beam(tx, self.tx_sector) if self.wide_beam == "flat" else wide_beam(tx)
        return tx, rx, tcb, rcb, wb


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a scenario swept over thresholds, SNRs and schemes.

    ``n1_margin`` sets the Phase-1 cap ``N+ - n1_margin * n0 * S`` unless
    ``n1`` is given.  ``es_budget`` and ``es_split`` (``"best"`` or a pair)
    configure exhaustive search.
    """

    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    arrays: ArrayConfig = field(default_factory=ArrayConfig)
    alphas: tuple = (0.9, 0.95, 0.97, 0.99)
    snr_db: tuple = (-20.0, -15.0, -10.0, -5.0, 0.0)
    budget: int = 1024
    n0: int = 1
    n1: int = None
    n1_margin: int = 4
    n_trials: int = 2000
    seed: int = 0
    schemes: tuple = ("idbs",)
    table_x_max: float = None
    table_points: int = 1024
    es_budget: int = 300
    es_split: object = "best"
    es_split_trials: int = 200
    oracle_density: int = 64
    outputs: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        object.__setattr__(self, "schemes", tuple(self.schemes))
        if self.n_trials < 1:
            raise ConfigError("n_trials must be at least 1")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad:
            raise ConfigError(f"unknown scheme(s) {bad}; choose from {list(SCHEMES)}")
        if not self.schemes:
            raise ConfigError("no schemes selected")
        for a in self.alphas:
            if not 0.5 < a < 1.0:
                raise ConfigError(f"alpha must lie in (0.5, 1), got {a}")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")

    @property
    def x_max(self):
        return float(self.table_x_max) if self.table_x_max else 4.0 * self.budget

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "scenario" in d:
            d["scenario"] = ScenarioConfig.from_dict(d["scenario"])
        if "arrays" in d:
            a = dict(d["arrays"])
            unknown = set(a) - {f.name for f in fields(ArrayConfig)}
            if unknown:
                raise ConfigError(f"unknown arrays keys: {sorted(unknown)}")
            d["arrays"] = ArrayConfig(**a)
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self):
        d = asdict(self)
        d["scenario"] = self.scenario.to_dict()
        d["arrays"] = asdict(self.arrays)
        return d


@dataclass(frozen=True)
class TrialRecord:
    scheme: str
    alpha: float
    snr_db: float
    trial: int
    overhead: int
    rate: float
    budget_stop: bool
    adjacent_stop: bool
    rx_index: int = -1
    tx_index: int = -1
    shifted: bool = False


@dataclass(frozen=True)
class AggregateRow:
    scheme: str
    alpha: float
    snr_db: float
    mean_overhead: float
    p90_overhead: float
    mean_rate: float
    frac_budget_stop: float
    frac_adjacent_stop: float
    n_trials: int
    ci_halfwidth: float


ROW_FIELDS = tuple(f.name for f in fields(AggregateRow))


def snr_key(snr_db):
    return int(round((snr_db + 1000.0) * 1000.0))


def trial_rngs(seed, trial, snr_db):
    """``(channel_rng, noise_rng)`` for one trial at one SNR."""
    ch = np.random.default_rng(np.random.SeedSequence([seed, trial]))
    nz = np.random.default_rng(np.random.SeedSequence([seed, trial, snr_key(snr_db)]))
    return ch, nz


def nearest_rank(values, p):
    """Nearest-rank percentile: the ``ceil(p/100 * n)``-th smallest value."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ValueError("empty sample")
    k = max(1, int(math.ceil(p / 100.0 * v.size - 1e-12)))
    return float(v[k - 1])


def aggregate(records):
    """Summary row for records of one ``(scheme, alpha, snr)`` cell."""
    if not records:
        raise ValueError("cannot aggregate an empty record list")
    first = records[0]
    ov = np.array([r.overhead for r in records], dtype=float)
    rate = np.array([r.rate for r in records], dtype=float)
    n = len(records)
    ci = 1.959963984540054 * float(np.std(ov, ddof=1)) / math.sqrt(n) if n > 1 else 0.0
    return AggregateRow(
        scheme=first.scheme,
        alpha=first.alpha,
        snr_db=first.snr_db,
        mean_overhead=float(np.mean(ov)),
        p90_overhead=nearest_rank(ov, 90),
        mean_rate=float(np.mean(rate)),
        frac_budget_stop=sum(r.budget_stop for r in records) / n,
        frac_adjacent_stop=sum(r.adjacent_stop for r in records) / n,
        n_trials=n,
        ci_halfwidth=ci,
    )


class _Runner:
    """Per-process state: geometry, tables and ES splits for one config."""

    def __init__(self, config, tables, es_splits):
        self.cfg = config
        self.tx, self.rx, self.tcb, self.rcb, self.wide = config.arrays.build()
        self.tables = tables
        self.es_splits = es_splits

    def search_config(self, scheme, alpha, snr_db, budget):
        return SearchConfig.from_snr_db(alpha, budget, self.tables[alpha], snr_db,
                                        n0=self.cfg.n0, **IDBS_SCHEMES[scheme])

    def run_idbs(self, ch, scheme, alpha, snr_db, noise_rng):
        cfg = self.cfg
        if len(self.rcb) == 1:
            sc = self.search_config(scheme, alpha, snr_db, cfg.budget)
            h = effective_channel(ch, self.rcb[0], self.tcb.matrix())
            dec, st = run_phase(self.tcb, h, sc, noise_rng)
            rx_beam, rx_idx, rx_shifted = self.rcb[0], 0, False
            flags = [st.flag]
            overhead = st.spent
            tx = dec
        else:
            sc = self.search_config(scheme, alpha, snr_db, cfg.budget)
            n1 = cfg.n1 if cfg.n1 is not None else phase1_budget(
                cfg.budget, len(self.tcb), cfg.n0, cfg.n1_margin)
            res = run_two_phase(self.tcb, self.rcb, ch, sc, noise_rng, n1=n1, wide=self.wide)
            rx_beam, rx_idx, rx_shifted = res.rx.beam, res.rx.index, res.rx.source == "shifted"
            flags = [res.phase1.flag, res.phase2.flag]
            overhead = res.overhead
            tx = res.tx
        rate = spectrum_efficiency(ch, rx_beam, tx.beam, 10.0 ** (snr_db / 10.0))
        shifted = tx.source == "shifted" or rx_shifted
        return TrialRecord(scheme, alpha, snr_db, 0, int(overhead), rate,
                           BUDGET_STOP in flags, ADJACENT_STOP in flags,
                           rx_idx, tx.index, shifted)

    def trials(self, start, stop):
        cfg = self.cfg
        out = []
        for trial in range(start, stop):
            ch_rng, _ = trial_rngs(cfg.seed, trial, 0.0)
            ch = generate(ch_rng, self.rx, self.tx, cfg.scenario)
            for snr in cfg.snr_db:
                snr_lin = 10.0 ** (snr / 10.0)
                for scheme in cfg.schemes:
                    if scheme in IDBS_SCHEMES:
                        for alpha in cfg.alphas:
                            _, nz = trial_rngs(cfg.seed, trial, snr)
                            rec = self.run_idbs(ch, scheme, alpha, snr, nz)
                            out.append(replace(rec, trial=trial))
                    elif scheme == "es":
                        _, nz = trial_rngs(cfg.seed, trial, snr)
                        split = self.es_splits[snr]
                        res = exhaustive_search(ch, self.wide, self.rcb, self.tcb, split,
                                                snr_lin, nz, cfg.es_budget)
                        rate = spectrum_efficiency(ch, self.rcb[res.rx_index],
                                                   self.tcb[res.tx_index], snr_lin)
                        out.append(TrialRecord("es", math.nan, snr, trial, res.overhead, rate,
                                               False, False, res.rx_index, res.tx_index))
                    else:
                        i, j = oracle_codebook_pair(ch, self.wide, self.rcb, self.tcb)
                        rate = spectrum_efficiency(ch, self.rcb[i], self.tcb[j], snr_lin)
                        out.append(TrialRecord("oracle_codebook", math.nan, snr, trial, 0, rate,
                                               False, False, i, j))
                        u, w = oracle_infinite_resolution(
                            ch, self.wide, self.rx, self.tx, self.cfg.arrays.rx_sector,
                            self.cfg.arrays.tx_sector, self.cfg.oracle_density)
                        rate = spectrum_efficiency(ch, u, w, snr_lin)
                        out.append(TrialRecord("oracle_infinite", math.nan, snr, trial, 0, rate,
                                               False, False))
        return out


_WORKER = None


def _init_worker(config, tables, es_splits):
    global _WORKER
    _WORKER = _Runner(config, tables, es_splits)


def _work(bounds):
    return _WORKER.trials(*bounds)


def worker_count(default=1):
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}") from exc
        return max(1, n)
    return default


def _es_splits(config, runner):
    out = {}
    if "es" not in config.schemes:
        return out
    for snr in config.snr_db:
        if config.es_split == "best":
            split, _ = best_split_search(config.scenario, runner.rcb, runner.tcb, runner.wide,
                                         10.0 ** (snr / 10.0), config.es_budget,
                                         config.es_split_trials,
                                         seed=config.seed + 1_000_003 + snr_key(snr))
        else:
            split = tuple(int(v) for v in config.es_split)
        out[snr] = split
    return out


def collect_records(config, workers=None, chunk=100):
    """Run every trial; records are returned in a fixed order."""
    tables = {a: get_table(a, config.x_max, config.table_points) for a in config.alphas}
    runner = _Runner(config, tables, {})
    runner.es_splits = _es_splits(config, runner)
    workers = worker_count() if workers is None else workers
    bounds = [(s, min(s + chunk, config.n_trials)) for s in range(0, config.n_trials, chunk)]
    if workers <= 1 or len(bounds) == 1:
        parts = [runner.trials(*b) for b in bounds]
    else:
        with ProcessPoolExecutor(workers, initializer=_init_worker,
                                 initargs=(config, tables, runner.es_splits)) as pool:
            parts = list(pool.map(_work, bounds))
    return [r for part in parts for r in part]


def _cell_key(rec):
    return (rec.scheme, rec.alpha, rec.snr_db)


def run_experiment(config, workers=None):
    """Aggregate rows, one per ``(scheme, alpha, snr)`` cell, in a fixed order."""
    records = collect_records(config, workers)
    cells = {}
    for rec in records:
        key = (rec.scheme, -1.0 if math.isnan(rec.alpha) else rec.alpha, rec.snr_db)
        cells.setdefault(key, []).append(rec)
    return [aggregate(cells[k]) for k in cells]


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return repr(float(v))


def emit(rows, fmt, path):
    """Write rows as CSV (fixed column order, LF endings) or a JSON array."""
    try:
        if fmt == "csv":
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(ROW_FIELDS)
                for r in rows:
                    w.writerow([_fmt(getattr(r, f)) for f in ROW_FIELDS])
        elif fmt == "json":
            data = [{f: (None if isinstance(getattr(r, f), float) and math.isnan(getattr(r, f))
                         else getattr(r, f)) for f in ROW_FIELDS} for r in rows]
            with open(path, "w", newline="\n") as fh:
                json.dump(data, fh, indent=1)
                fh.write("\n")
        else:
            raise ValueError(f"unknown format {fmt!r}")
    except OSError as exc:
        raise OSError(f"could not write {path}: {exc}") from exc


_TYPES = {f.name: f.type for f in fields(AggregateRow)}


def _parse(name, text):
    kind = _TYPES[name]
    if kind is str:
        return text
    if kind is int:
        return int(text)
    return math.nan if text == "" else float(text)


def read_rows(path):
    """Read rows written by :func:`emit` (format from the extension)."""
    if str(path).endswith(".json"):
        with open(path) as fh:
            data = json.load(fh)
        return [AggregateRow(**{k: (math.nan if v is None else v) for k, v in d.items()})
                for d in data]
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != ROW_FIELDS:
            raise ValueError(f"unexpected header in {path}: {header}")
        return [AggregateRow(**{k: _parse(k, v) for k, v in zip(header, line)})
                for line in reader]


def rows_equal(a, b):
    """Row lists equal field by field, treating NaN as equal to NaN."""
    if len(a) != len(b):
        return False
    for x, y in zip(a, b):
        for f in ROW_FIELDS:
            u, v = getattr(x, f), getattr(y, f)
            if isinstance(u, float) and isinstance(v, float) and math.isnan(u) and math.isnan(v):
                continue
            if u != v:
                return False
    return True
