"""Probability that the true beam is ever deactivated, for an idealized codebook.

The model has ``M`` ideal beams: the one containing the single path sees
gain ``M`` and the others see nothing.  At iteration ``t`` the true beam's
statistic is ``T1 ~ chi2_2(eta1)`` with ``eta1 = 2 t M snr`` and the best
competitor is ``Y``, the maximum of ``M - 1`` central ``chi2_2`` variables.
``q(t) = P{tau(Y) > T1}`` bounds the chance that the true beam is first
deactivated at ``t``; summing it over ``t`` gives a union bound.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .posterior import fit_quadratic
from .search import SearchConfig, run_phase

_GL_X, _GL_W = np.polynomial.legendre.leggauss(200)
QUADRATIC_FIT_HI = 50.0
TAU_MODELS = ("quadratic", "table")


@dataclass(frozen=True, eq=False)
class IdealBeamModel:
    """Single path seen by ``n_beams`` ideal beams at linear pre-beamforming SNR ``pre_snr``.

    ``tau_model`` selects the critical-value curve used by the bound:
    ``"quadratic"`` is a least-squares quadratic fitted uniformly in ``x``
    over ``[x_alpha, fit_hi]``; ``"table"`` interpolates the table itself.
    """

    n_beams: int
    pre_snr: float
    alpha: float
    table: object
    tau_model: str = "quadratic"
    fit_hi: float = QUADRATIC_FIT_HI
    _inverse: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_beams < 2:
            raise ValueError("need at least two beams")
        if not self.pre_snr > 0:
            raise ValueError("pre_snr must be positive")
        if self.tau_model not in TAU_MODELS:
            raise ValueError(f"tau_model must be one of {TAU_MODELS}")
        if abs(self.table.alpha - self.alpha) > 1e-12:
            raise ValueError("table alpha does not match model alpha")
        y = np.linspace(self.table.x_alpha, self.table.x_max, 100_000)
        tau = np.maximum.accumulate(np.maximum(self.tau(y), 0.0))
        object.__setattr__(self, "_inverse", (tau, y))

    @classmethod
    def from_snr_db(cls, n_beams, snr_db, alpha, table, **kw):
        return cls(n_beams, 10.0 ** (snr_db / 10.0), alpha, table, **kw)

    @property
    def quadratic_coeffs(self):
        coeffs, _ = fit_quadratic(self.table.x_grid, self.table.tau, self.table.x_alpha,
                                  x_hi=self.fit_hi, n_uniform=2000)
        return coeffs

    def tau(self, y):
        """Critical value curve used by the bound (0 below ``x_alpha``)."""
        y = np.asarray(y, dtype=float)
        xa = self.table.x_alpha
        if self.tau_model == "quadratic":
            c0, c1, c2 = self.quadratic_coeffs
            val = c0 + c1 * y + c2 * y * y
        else:
            val = np.interp(y, self.table.x_grid, self.table.tau)
        return np.where(y >= xa, val, 0.0)

    def tau_inverse(self, x):
        """Smallest ``y`` with ``tau(y) > x``; ``x_alpha`` below the curve, inf above."""
        tau, y = self._inverse
        return np.interp(x, tau, y, left=y[0], right=np.inf)

    def eta1(self, t):
        return 2.0 * t * self.n_beams * self.pre_snr


def q_bound(model, t):
    """``P{tau(Y(t)) > T1(t)}`` by Gauss-Legendre quadrature over ``s = sqrt(T1)``."""
    if t < 1:
        raise ValueError("t must be >= 1")
    eta = model.eta1(t)
    se = math.sqrt(eta)
    lo = max(0.0, se - 14.0)
    hi = se + 14.0
    s = 0.5 * (hi - lo) * _GL_X + 0.5 * (hi + lo)
    w = 0.5 * (hi - lo) * _GL_W
    # density of s = sqrt(T1): 2 s g_eta(s^2)
    dens = s * np.exp(-0.5 * (s - se) ** 2) * special.i0e(se * s)
    y_inv = model.tau_inverse(s * s)
    surv = -np.expm1((model.n_beams - 1) * np.log1p(-np.exp(-0.5 * y_inv)))
    return float(min(1.0, max(0.0, np.sum(w * dens * surv))))


def q_curve(model, t_values):
    return np.array([q_bound(model, int(t)) for t in t_values])


def union_bound(model, t_max=16, tail_tol=1e-9, t_cap=100_000):
    """``sum_t q(t)`` with a geometric estimate of the remaining tail.

    At least ``t_max`` terms are summed; the horizon is then extended until
    the estimated tail ``q_t r / (1 - r)`` (``r = q_t / q_{t-1}``) is below
    ``tail_tol``.  Raises ``ArithmeticError`` if ``t_cap`` is reached first.
    """
    if not tail_tol > 0:
        raise ValueError("tail_tol must be positive")
    total = 0.0
    prev = None
    t = 0
    while t < t_cap:
        t += 1
        q = q_bound(model, t)
        total += q
        if t >= t_max and prev is not None:
            if q == 0.0:
                return total
            r = q / prev
            if r < 1.0:
                tail = q * r / (1.0 - r)
                if tail <= tail_tol:
                    return total + tail
        prev = q
    raise ArithmeticError(f"union bound tail not below {tail_tol} after {t_cap} iterations")


def bound_horizon(model, rel=1e-3, t_min=64, t_cap=100_000):
    """Iteration count after which the bound's remaining mass is below ``rel`` of the total."""
    qs = []
    t = 0
    while t < t_cap:
        t += 1
        qs.append(q_bound(model, t))
        if t >= t_min and len(qs) > 1 and qs[-1] < qs[-2]:
            r = qs[-1] / qs[-2]
            if qs[-1] * r / (1.0 - r) <= rel * sum(qs):
                return t
    return t_cap


def empirical_deactivation_rate(model, n_trials, rng, n_iterations=None):
    """Monte Carlo frequency that the true beam is ever deactivated.

    Runs the actual deactivation rule (exact table lookup, no restoration
    or adjacent stop) on ideal-beam channels, stopping each trial at the
    first deactivation of the true beam or after ``n_iterations`` full
    sweeps (default :func:`bound_horizon`).  Returns ``(rate, hits)``.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be positive")
    m = model.n_beams
    n_iterations = n_iterations or bound_horizon(model)
    h = np.zeros(m, dtype=complex)
    h[0] = math.sqrt(m * model.pre_snr)
    cfg = SearchConfig(model.alpha, m * n_iterations, model.table,
                       use_cond2=False, use_restore=False)
    codebook = list(range(m))
    hits = 0
    for _ in range(n_trials):
        _, state = run_phase(codebook, h, cfg, rng, watch=0)
        hits += state.ever_deactivated[0]
    return hits / n_trials, hits


def write_curve_csv(path, t_values, q_values):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "q"])
        for t, q in zip(t_values, q_values):
            w.writerow([int(t), repr(float(q))])


def write_bound_csv(path, rows):
    """Rows of ``(alpha, snr_db, n_beams, bound)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha", "snr_db", "n_beams", "union_bound"])
        for a, s, m, b in rows:
            w.writerow([repr(float(a)), repr(float(s)), int(m), repr(float(b))])
