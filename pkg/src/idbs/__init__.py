"""Adaptive mmWave beam alignment by iterative deactivation and beam shifting."""

from ._kernels import BACKEND
from .analysis import IdealBeamModel, empirical_deactivation_rate, q_bound, union_bound
from .baselines import (
    exhaustive_search,
    oracle_codebook_pair,
    oracle_infinite_resolution,
    spectrum_efficiency,
)
from .beams import (
    Beam,
    Codebook,
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
from .channel import (
    ScenarioConfig,
    effective_channel,
    generate,
    los_channel,
    nlos_channel,
    single_path,
)
from .harness import ExperimentConfig, emit, run_experiment
from .posterior import (
    ThresholdTable,
    build_table,
    critical_value,
    f_quadrature,
    f_series,
    get_table,
    x_alpha,
)
from .search import SearchConfig, run_phase, run_two_phase
from .specfun import DomainError, marcum_q1

__version__ = "0.1.0"
