"""The compiled kernels and the pure-Python fallback must agree bit for bit."""

import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from idbs import _kernels, _pykernels

backends = _kernels.backends()
needs_c = pytest.mark.skipif("cython" not in backends, reason="compiled extension not built")


@needs_c
class TestBitIdentical:
    c = backends.get("cython")

    @pytest.mark.parametrize("x,y", [(0.0, 0.0), (5.0, 1.0), (1.0, 5.0), (300.0, 280.0),
                                     (2000.0, 2000.0), (0.01, 1500.0), (1e4, 9.5e3)])
    def test_f_series(self, x, y):
        assert self.c.f_series_kernel(x, y, 1e-12, 100_000) == _pykernels.f_series_kernel(x, y, 1e-12, 100_000)

    def test_f_series_truncated(self):
        a = self.c.f_series_kernel(2000.0, 2000.0, 1e-12, 5)
        assert a == _pykernels.f_series_kernel(2000.0, 2000.0, 1e-12, 5)
        assert a[2] is False or a[2] == 0

    @pytest.mark.parametrize("alpha", [0.9, 0.99])
    @pytest.mark.parametrize("x", [3.0, 20.0, 700.0])
    def test_critical_value(self, alpha, x):
        args = (alpha, x, 1e-12, 1e-9, 100_000)
        assert self.c.critical_value_kernel(*args) == _pykernels.critical_value_kernel(*args)

    def test_lookup(self, table97):
        grid, tau, tail = table97.x_grid, table97.tau, table97.tail
        for x in (0.0, 5.0, 11.3, 777.7, 4096.0, 5000.0, 1e6):
            assert self.c.lookup_tau_kernel(grid, tau, tail, x) == \
                _pykernels.lookup_tau_kernel(list(grid), list(tau), tail, x)

    def test_run_phase(self, table97):
        grid, tau, tail = table97.x_grid, table97.tau, table97.tail
        for seed in range(200):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(2, 33))
            h = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            budget = int(rng.integers(n, 1024))
            z = rng.standard_normal((budget, 2))
            flags = (bool(rng.integers(2)), bool(rng.integers(2)), int(rng.integers(-1, 2)),
                     bool(rng.integers(2)))
            scale = float(rng.uniform(0.1, 10.0))
            args_c = (np.ascontiguousarray(h.real), np.ascontiguousarray(h.imag),
                      np.ascontiguousarray(z[:, 0]), np.ascontiguousarray(z[:, 1]),
                      1, budget, scale, 1.0 / scale ** 2, grid, tau, tail, *flags)
            args_p = (h.real.tolist(), h.imag.tolist(), z[:, 0].tolist(), z[:, 1].tolist(),
                      1, budget, scale, 1.0 / scale ** 2, list(grid), list(tau), tail, *flags)
            out_c = self.c.run_phase_kernel(*args_c)
            out_p = _pykernels.run_phase_kernel(*args_p)
            assert {k: list(v) if isinstance(v, (list, np.ndarray)) else v for k, v in out_c.items()} == out_p


@needs_c
@settings(max_examples=100, deadline=None)
@given(x=st.floats(0, 5000), y=st.floats(0, 5000))
def test_f_series_property(x, y):
    assert backends["cython"].f_series_kernel(x, y, 1e-12, 100_000) == \
        _pykernels.f_series_kernel(x, y, 1e-12, 100_000)


def test_pure_python_switch():
    env = dict(os.environ, IDBS_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import idbs; print(idbs.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_pure_python_end_to_end():
    code = (
        "import numpy as np, idbs\n"
        "from idbs import search, beams, channel\n"
        "t = idbs.get_table(0.97, 4096.0, 1024)\n"
        "cb = beams.dft_codebook(beams.Ula(32), (-0.5, 0.5))\n"
        "h = channel.effective_channel(channel.single_path(beams.Ula(1), beams.Ula(32), 1.0, 0.0594),"
        " np.ones(1), cb.matrix())\n"
        "cfg = search.SearchConfig.from_snr_db(0.97, 1024, t, -10.0)\n"
        "d, s = search.run_phase(cb, h, cfg, np.random.default_rng(4))\n"
        "print(idbs.BACKEND, d.index, d.overhead, s.flag, repr(s.stat[d.index]))\n"
    )
    outs = {}
    for flag in ("0", "1"):
        env = dict(os.environ, IDBS_PURE_PYTHON=flag)
        r = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        name, *rest = r.stdout.split()
        outs[name] = rest
    if len(outs) == 2:
        assert outs["python"] == outs["cython"]
