"""Compiled kernels must agree with the pure-Python fallback."""

import numpy as np
import pytest

from opmdrive import _backend, _core_py
from opmdrive.dynamics import VehicleParameters

core = pytest.importorskip("opmdrive._core", reason="compiled extension not built")


def test_backend_reports_choice():
    assert _backend.BACKEND in ("cython", "python")
    if _backend.BACKEND == "cython":
        assert _backend.kernels is core


@pytest.mark.parametrize("seed", range(5))
def test_forward_backward_equivalent(seed):
    rng = np.random.default_rng(seed)
    n = 200
    caps = rng.uniform(2.0, 20.0, n)
    seg = np.full(n - 1, 1.0)
    args = (caps, seg, 0.0, 0.0, 1.5, 2.0)
    np.testing.assert_allclose(core.forward_backward(*args), _core_py.forward_backward(*args), rtol=0, atol=1e-12)


def _dp_args(seed, n=30):
    rng = np.random.default_rng(seed)
    kappa = np.repeat(rng.choice([0.0, 0.02, -0.05], size=n // 10 + 1), 10)[:n]
    ds = 2.0
    caps2 = np.minimum(12.0, np.sqrt(1.0 / np.maximum(np.abs(kappa), 1e-9))) ** 2
    a_grid = 0.1
    du = 2 * ds * a_grid
    nu = int(caps2.max() / du) + 1
    return (0.0, du, nu, -10, 10, 0, 0.0, ds, kappa, caps2, -1.0, 1.0, 0.8, 0.8)


@pytest.mark.parametrize("seed", range(3))
def test_dp_sweep_equivalent(seed):
    args = _dp_args(seed)
    t_c, u_c = core.dp_sweep(*args)
    t_p, u_p = _core_py.dp_sweep(*args)
    assert np.isfinite(t_c)
    assert t_c == pytest.approx(t_p, rel=1e-12)
    np.testing.assert_allclose(u_c, u_p, atol=1e-9)


@pytest.mark.parametrize("dynamic", [False, True])
@pytest.mark.parametrize("seed", range(4))
def test_rk4_equivalent(dynamic, seed):
    rng = np.random.default_rng(seed)
    params = VehicleParameters()
    state = np.array([1.0, -2.0, 0.3, rng.uniform(3, 25), rng.uniform(-0.3, 0.3),
                      rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-1, 1)])
    steer, ax = rng.uniform(-0.8, 0.8), rng.uniform(-3, 3)
    for _ in range(50):
        a = core.rk4_step(state, steer, ax, params.kernel_params(), params.steer_limit, 0.01, dynamic)
        b = _core_py.rk4_step(state, steer, ax, params.kernel_params(), params.steer_limit, 0.01, dynamic)
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
        state = np.asarray(a)


def test_deriv_equivalent():
    params = VehicleParameters()
    state = np.array([0.0, 0.0, 0.1, 12.0, 0.2, 0.1, 0.05, 0.3])
    for dyn in (False, True):
        np.testing.assert_allclose(
            core.bicycle_deriv(state, 0.1, 1.0, params.kernel_params(), dyn),
            _core_py.bicycle_deriv(state, 0.1, 1.0, params.kernel_params(), dyn),
            rtol=1e-13, atol=1e-13,
        )


def test_pure_python_override():
    import os
    import subprocess
    import sys

    env = dict(os.environ, OPMDRIVE_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "import opmdrive; print(opmdrive.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"
