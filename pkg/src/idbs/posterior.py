"""Pairwise posterior test function and its threshold tables.

``f(x, y)`` is the posterior probability that the beam whose statistic is
``x`` has the larger noncentrality than the beam whose statistic is ``y``,
under independent flat (improper) priors on both noncentralities.  With
that prior the posterior of each noncentrality is itself a noncentral
chi-square law with the observed statistic as its noncentrality, which is
what both evaluation routes below exploit.
"""

import json
import logging
import math
import os
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import _kernels
from .specfun import DomainError, chi2_logpdf, marcum_q1

log = logging.getLogger(__name__)

TABLE_FORMAT_VERSION = 1
DEFAULT_MAX_TERMS = 100_000
SERIES_TOL = 1e-12


class QuadratureError(ArithmeticError):
    """Quadrature failed to reach the requested accuracy."""


class SeriesResult(NamedTuple):
    value: float
    n_terms: int
    fallback: bool


def _check_stat(name, v):
    v = float(v)
    if not math.isfinite(v) or v < 0:
        raise DomainError(f"{name} must be a finite nonnegative statistic, got {v!r}")
    return v


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def f_quadrature(x, y, tol=1e-10, max_panels=1024):
    """Test function by quadrature of ``1 - int g_x(eta) Q1(sqrt(y), sqrt(eta)) d eta``.

    The integral is taken in ``s = sqrt(eta)`` over ``sqrt(x) +/- 15``,
    where the posterior density of ``s`` is concentrated, with composite
    16-point Gauss-Legendre panels doubled until two successive estimates
    agree to ``tol``.
    """
    x = _check_stat("x", x)
    y = _check_stat("y", y)
    sx = math.sqrt(x)
    lo = max(0.0, sx - 15.0)
    hi = sx + 15.0
    sy = math.sqrt(y)

    def estimate(n_panels):
        edges = np.linspace(lo, hi, n_panels + 1)
        half = 0.5 * np.diff(edges)
        mids = 0.5 * (edges[1:] + edges[:-1])
        s = (mids[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
        w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
        dens = np.exp(chi2_logpdf(x, s * s)) * 2.0 * s
        return float(np.sum(w * dens * marcum_q1(sy, s)))

    n = 8
    prev = estimate(n)
    history = [prev]
    while n < max_panels:
        n *= 2
        cur = estimate(n)
        history.append(cur)
        if abs(cur - prev) <= tol:
            return 1.0 - cur
        prev = cur
    raise QuadratureError(
        f"f_quadrature({x}, {y}) did not converge: last estimates {history[-3:]}"
    )


def f_series_info(x, y, rel_tol=1e-9, max_terms=DEFAULT_MAX_TERMS):
    """Laguerre-series test function with truncation diagnostics.

    Terms are added until a bound on the discarded tail drops below
    ``rel_tol``.  If that needs more than ``max_terms`` terms the value is
    recomputed by :func:`f_quadrature` and ``fallback`` is set.
    """
    x = _check_stat("x", x)
    y = _check_stat("y", y)
    if not 0.0 < rel_tol <= 1e-6:
        raise ValueError(f"rel_tol must lie in (0, 1e-6], got {rel_tol}")
    value, n_terms, ok = _kernels.f_series_kernel(x, y, rel_tol, int(max_terms))
    if ok:
        return SeriesResult(min(max(value, 0.0), 1.0), n_terms, False)
    warnings.warn(
        f"series for f({x}, {y}) exceeded {max_terms} terms; using quadrature",
        RuntimeWarning,
        stacklevel=2,
    )
    return SeriesResult(f_quadrature(x, y), n_terms, True)


def f_series(x, y, rel_tol=1e-9, max_terms=DEFAULT_MAX_TERMS):
    """Posterior probability that statistic ``x`` belongs to the stronger beam."""
    return f_series_info(x, y, rel_tol, max_terms).value


test_function = f_series


def critical_value(alpha, x, ftol=1e-9):
    """Critical value ``tau`` with ``f(x, tau) = alpha``; 0 when ``f(x, 0) <= alpha``.

    Found by bisection on ``[0, x]``; ``f(x, .)`` is continuous and
    decreasing, so the bracket always holds.
    """
    if not 0.5 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0.5, 1), got {alpha}")
    x = _check_stat("x", x)
    tau, ok = _kernels.critical_value_kernel(
        float(alpha), x, SERIES_TOL, float(ftol), DEFAULT_MAX_TERMS
    )
    if not ok:
        raise ArithmeticError(f"series did not converge computing tau_{alpha}({x})")
    return tau


def x_alpha(alpha, tol=1e-12):
    """Smallest statistic whose critical value is positive: ``f(x, 0) = alpha``."""
    if not 0.5 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0.5, 1), got {alpha}")

    def f0(v):
        return _kernels.f_series_kernel(v, 0.0, SERIES_TOL, DEFAULT_MAX_TERMS)[0]

    lo, hi = 0.0, 8.0
    while f0(hi) <= alpha:
        lo, hi = hi, 2.0 * hi
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if f0(mid) > alpha:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True, eq=False)
class ThresholdTable:
    """Sampled critical values ``tau_alpha(x)`` for run-time deactivation.

    ``poly_coeffs`` are ``(c0, c1, c2)`` of the least-squares quadratic
    ``c0 + c1 x + c2 x**2`` fitted over ``x > x_alpha``, with its largest
    absolute residual in ``fit_residual``.
    """

    alpha: float
    x_grid: np.ndarray
    tau: np.ndarray
    x_alpha: float
    poly_coeffs: tuple
    fit_residual: float = float("nan")
    version: int = TABLE_FORMAT_VERSION
    _grid_list: list = field(init=False, repr=False, compare=False)
    _tau_list: list = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        grid = np.ascontiguousarray(self.x_grid, dtype=float)
        tau = np.ascontiguousarray(self.tau, dtype=float)
        grid.setflags(write=False)
        tau.setflags(write=False)
        object.__setattr__(self, "x_grid", grid)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "poly_coeffs", tuple(float(c) for c in self.poly_coeffs))
        object.__setattr__(self, "_grid_list", grid.tolist())
        object.__setattr__(self, "_tau_list", tau.tolist())

    @property
    def x_max(self):
        return float(self.x_grid[-1])

    @property
    def tail(self):
        """Offset ``sqrt(x) - sqrt(tau)`` at ``x_max``, held fixed beyond the grid."""
        return math.sqrt(self.x_grid[-1]) - math.sqrt(self.tau[-1])

    def kernel_args(self):
        """Arguments expected by the kernel lookup: grid, tau, tail."""
        if _kernels.BACKEND == "cython":
            return self.x_grid, self.tau, self.tail
        return self._grid_list, self._tau_list, self.tail

    def lookup(self, x):
        """Interpolated ``tau_alpha(x)``; see :func:`lookup_tau`."""
        return lookup_tau(self, x)

    def inverse(self, tau_value):
        """``x`` with ``tau_alpha(x) = tau_value``; ``x_alpha`` for ``tau_value <= 0``."""
        v = np.asarray(tau_value, dtype=float)
        i0 = int(np.searchsorted(self.x_grid, self.x_alpha))
        out = np.interp(v, self.tau[i0:], self.x_grid[i0:])
        beyond = v > self.tau[-1]
        if np.any(beyond):
            out = np.where(beyond, (np.sqrt(np.maximum(v, 0.0)) + self.tail) ** 2, out)
        return float(out) if out.ndim == 0 else out

    def check_invariants(self, f=None, tol=1e-4):
        """Return a list of violated invariants (empty when the table is valid)."""
        problems = []
        g, t = self.x_grid, self.tau
        if np.any(np.diff(g) <= 0):
            problems.append("x_grid not strictly increasing")
        if np.any(g < 0):
            problems.append("negative grid value")
        if np.any(np.diff(t) < 0):
            problems.append("tau not nondecreasing")
        if np.any(t[g < self.x_alpha] != 0.0):
            problems.append("tau nonzero below x_alpha")
        pos = t > 0
        if np.any(t[pos] >= g[pos]):
            problems.append("tau >= x at some grid point")
        if pos.any() and g[pos][0] < self.x_alpha:
            problems.append("positive tau below x_alpha")
        if f is not None:
            for xv, tv in zip(g[pos], t[pos]):
                if abs(f(xv, tv) - self.alpha) > tol:
                    problems.append(f"|f({xv}, {tv}) - alpha| > {tol}")
                    break
        return problems

    def to_json(self):
        def arr(values):
            return "[" + ",".join(format(float(v), ".17g") for v in values) + "]"

        return (
            "{"
            f'"version": {self.version}, '
            f'"alpha": {format(self.alpha, ".17g")}, '
            f'"x_alpha": {format(self.x_alpha, ".17g")}, '
            f'"poly_coeffs": {arr(self.poly_coeffs)}, '
            f'"fit_residual": {format(self.fit_residual, ".17g") if math.isfinite(self.fit_residual) else "null"}, '
            f'"x_grid": {arr(self.x_grid)}, '
            f'"tau": {arr(self.tau)}'
            "}\n"
        )

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        if d.get("version") != TABLE_FORMAT_VERSION:
            raise ValueError(f"unsupported table version {d.get('version')!r}")
        res = d.get("fit_residual")
        return cls(
            alpha=d["alpha"],
            x_grid=np.array(d["x_grid"], dtype=float),
            tau=np.array(d["tau"], dtype=float),
            x_alpha=d["x_alpha"],
            poly_coeffs=tuple(d["poly_coeffs"]),
            fit_residual=float("nan") if res is None else res,
            version=d["version"],
        )

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", newline="\n") as fh:
                fh.write(self.to_json())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())


def lookup_tau(table, x):
    """Critical value at ``x`` from a table.

    Piecewise-linear between grid points.  Beyond ``x_max`` the offset
    ``sqrt(x) - sqrt(tau)`` is held at its ``x_max`` value, which tracks the
    true curve far better than the quadratic fit.  Returns
    ``(tau, extrapolated)``.
    """
    x = _check_stat("x", x)
    return _kernels.lookup_tau_kernel(*table.kernel_args(), x)


def fit_quadratic(x, tau, x_alpha_value, x_hi=None, n_uniform=None):
    """Least-squares quadratic ``(c0, c1, c2)`` for ``tau`` over ``x_alpha < x <= x_hi``.

    With ``n_uniform`` the samples are first resampled onto that many
    equally spaced points, which weights the fit uniformly in ``x``.
    Returns ``(coeffs, max_abs_residual)``.
    """
    x = np.asarray(x, dtype=float)
    tau = np.asarray(tau, dtype=float)
    x_hi = x[-1] if x_hi is None else x_hi
    if n_uniform:
        xs = np.linspace(x_alpha_value, x_hi, n_uniform)
        ts = np.interp(xs, x, tau)
    else:
        m = (x > x_alpha_value) & (x <= x_hi)
        xs, ts = x[m], tau[m]
    c2, c1, c0 = np.polyfit(xs, ts, 2)
    resid = np.max(np.abs(c0 + c1 * xs + c2 * xs * xs - ts))
    return (float(c0), float(c1), float(c2)), float(resid)


def table_grid(x_max, n_points, x_alpha_value):
    """Grid of ``n_points`` values on ``[0, x_max]`` equally spaced in ``sqrt(x)``,
    with the grid point nearest ``x_alpha`` moved onto it."""
    grid = np.linspace(0.0, math.sqrt(x_max), n_points) ** 2
    grid[-1] = x_max
    if 0.0 < x_alpha_value < x_max:
        i = int(np.argmin(np.abs(grid - x_alpha_value)))
        if i == 0:
            i = 1
        if i == n_points - 1:
            i = n_points - 2
        grid[i] = x_alpha_value
    return grid


def build_table(alpha, x_max, n_points=1024, ftol=1e-9):
    """Compute a :class:`ThresholdTable` for ``alpha`` on ``[0, x_max]``."""
    if n_points < 256:
        raise ValueError("n_points must be at least 256")
    if not 0.5 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0.5, 1), got {alpha}")
    xa = x_alpha(alpha)
    if x_max <= xa:
        raise ValueError(f"x_max={x_max} must exceed x_alpha={xa:.4g}")
    grid = table_grid(float(x_max), int(n_points), xa)
    tau = np.zeros_like(grid)
    for i, xv in enumerate(grid):
        if xv > xa:
            tau[i] = critical_value(alpha, xv, ftol)
    tau = np.maximum.accumulate(tau)
    coeffs, resid = fit_quadratic(grid, tau, xa)
    return ThresholdTable(
        alpha=float(alpha),
        x_grid=grid,
        tau=tau,
        x_alpha=xa,
        poly_coeffs=coeffs,
        fit_residual=resid,
    )


def default_cache_dir():
    env = os.environ.get("IDBS_CACHE_DIR")
    if env:
        return Path(env)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "idbs"


def table_path(alpha, x_max, n_points, cache_dir=None):
    cache_dir = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    name = f"tau_a{alpha:.6f}_x{float(x_max):.6g}_n{int(n_points)}_v{TABLE_FORMAT_VERSION}.json"
    return cache_dir / name


_MEMO = {}


def get_table(alpha, x_max, n_points=1024, cache_dir=None):
    """Load a table from the on-disk cache, building and storing it if absent."""
    key = (round(float(alpha), 9), float(x_max), int(n_points), str(cache_dir))
    if key in _MEMO:
        return _MEMO[key]
    path = table_path(alpha, x_max, n_points, cache_dir)
    table = None
    if path.exists():
        try:
            table = ThresholdTable.load(path)
        except (ValueError, KeyError, OSError) as exc:
            log.warning("ignoring unreadable table cache %s: %s", path, exc)
    if table is None:
        log.warning("building threshold table alpha=%g x_max=%g n=%d", alpha, x_max, n_points)
        table = build_table(alpha, x_max, n_points)
        try:
            table.save(path)
        except OSError as exc:
            log.warning("could not cache table at %s: %s", path, exc)
    _MEMO[key] = table
    return table
