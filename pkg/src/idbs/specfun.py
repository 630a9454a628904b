"""Special functions for the 2-degree-of-freedom noncentral chi-square law.

Everything here accepts scalars or numpy arrays.  Log-domain variants
(:func:`log_i0`, :func:`chi2_logpdf`) stay finite for arguments where the
direct forms overflow or underflow.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


def _check(name, value, nonneg=True):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite, got {value!r}")
    if nonneg and np.any(arr < 0):
        raise DomainError(f"{name} must be nonnegative, got {value!r}")
    return arr


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def bessel_i0(x):
    """Modified Bessel function of the first kind, order zero."""
    x = _check("x", x)
    return _out(special.i0(x))


def log_i0(x):
    """``log(I0(x))`` without overflow, via the exponentially scaled form."""
    x = _check("x", x)
    return _out(np.log(special.i0e(x)) + x)


def marcum_q1(a, b):
    """First-order Marcum Q function ``Q1(a, b)``.

    Equal to ``P{X > b**2}`` for ``X`` noncentral chi-square with 2 degrees
    of freedom and noncentrality ``a**2``.  Evaluated as the Poisson mixture

        Q1(a, b) = sum_j Pois(j; a^2/2) * Gamma_upper(j + 1, b^2/2)

    over a window of ``j`` that captures all but ~1e-30 of the Poisson mass.
    The weights are formed in log space, so there is no overflow for large
    ``a * b``.
    """
    a = _check("a", a)
    b = _check("b", b)
    a, b = np.broadcast_arrays(a, b)
    out = np.empty(a.shape)
    flat_a = a.ravel()
    flat_b = b.ravel()
    flat_out = out.ravel()
    # group by a so the Poisson weights are shared across b
    for a_val in np.unique(flat_a):
        idx = np.nonzero(flat_a == a_val)[0]
        flat_out[idx] = _marcum_q1_fixed_a(float(a_val), flat_b[idx])
    return _out(out.reshape(a.shape))


def _poisson_window(lam):
    spread = 12.0 * math.sqrt(lam) + 30.0
    lo = max(0, int(math.floor(lam - spread)))
    hi = int(math.ceil(lam + spread))
    return np.arange(lo, hi + 1)


def _marcum_q1_fixed_a(a, b):
    lam = 0.5 * a * a
    half_b2 = 0.5 * np.asarray(b, dtype=float) ** 2
    if lam == 0.0:
        return np.exp(-half_b2)
    j = _poisson_window(lam)
    logw = -lam + j * math.log(lam) - special.gammaln(j + 1.0)
    w = np.exp(logw)
    # gammaincc(j+1, z) is the chi-square(2j+2) survival at 2z
    tails = special.gammaincc(j[None, :] + 1.0, half_b2[:, None])
    return np.clip(tails @ w, 0.0, 1.0)


def laguerre(m, a):
    """Laguerre polynomial ``L_m(a)`` by the three-term recurrence."""
    if isinstance(m, (bool, np.bool_)) or int(m) != m or m < 0:
        raise DomainError(f"order must be a nonnegative integer, got {m!r}")
    a = _check("a", a, nonneg=False)
    m = int(m)
    prev = np.zeros_like(a)
    cur = np.ones_like(a)
    for k in range(m):
        prev, cur = cur, ((2 * k + 1 - a) * cur - k * prev) / (k + 1)
    return _out(cur)


def chi2_logpdf(eta, x):
    """Log density of the noncentral chi-square (2 DoF) at ``x``.

    ``log g = -log 2 - (sqrt(x) - sqrt(eta))**2 / 2 + log(i0e(sqrt(eta x)))``
    """
    eta = _check("eta", eta)
    x = _check("x", x)
    z = np.sqrt(eta * x)
    val = -math.log(2.0) - 0.5 * (np.sqrt(x) - np.sqrt(eta)) ** 2 + np.log(special.i0e(z))
    return _out(val)


def chi2_pdf(eta, x):
    """Density ``g_eta(x) = exp(-(x + eta)/2) I0(sqrt(eta x)) / 2``."""
    return _out(np.exp(chi2_logpdf(eta, x)))


def chi2_cdf(eta, x):
    """Distribution function, ``1 - Q1(sqrt(eta), sqrt(x))``."""
    eta = _check("eta", eta)
    x = _check("x", x)
    return _out(1.0 - np.asarray(marcum_q1(np.sqrt(eta), np.sqrt(x))))


def chi2_sf(eta, x):
    """Survival function, ``Q1(sqrt(eta), sqrt(x))``."""
    eta = _check("eta", eta)
    x = _check("x", x)
    return marcum_q1(np.sqrt(eta), np.sqrt(x))


def chi2_sample(eta, rng, size=None):
    """Draw ``(sqrt(eta) + G1)**2 + G2**2`` with ``G1, G2`` standard normal."""
    _check("eta", eta)
    g1 = rng.standard_normal(size)
    g2 = rng.standard_normal(size)
    return (np.sqrt(eta) + g1) ** 2 + g2 ** 2


@dataclass(frozen=True)
class NoncentralChi2:
    """Noncentral chi-square law with 2 degrees of freedom."""

    noncentrality: float

    def __post_init__(self):
        _check("noncentrality", self.noncentrality)

    def pdf(self, x):
        return chi2_pdf(self.noncentrality, x)

    def logpdf(self, x):
        return chi2_logpdf(self.noncentrality, x)

    def cdf(self, x):
        return chi2_cdf(self.noncentrality, x)

    def sf(self, x):
        return chi2_sf(self.noncentrality, x)

    def sample(self, rng, size=None):
        return chi2_sample(self.noncentrality, rng, size)

    @property
    def mean(self):
        return 2.0 + self.noncentrality
