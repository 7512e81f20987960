import os
import subprocess
import sys

import numpy as np
import pytest

from mollow_cavity import _kernels
from mollow_cavity.lindblad import TAYLOR_TOL, observable_row, system_liouvillian
from mollow_cavity.quantum_core import system_operators

from helpers import small_params

BACKENDS = sorted(_kernels.BACKENDS)


def _args(L, v, obs, dt, steps, n_sub=4, max_terms=80):
    S = L.superoperator
    return (S.indptr, S.indices, S.data, v, obs, dt, steps, n_sub, TAYLOR_TOL, max_terms)


@pytest.fixture
def setup(rng):
    p = small_params(n_max=5, rabi_mhz=15.0)
    L = system_liouvillian(p)
    v = rng.normal(size=L.superoperator.shape[0]) + 1j * rng.normal(size=L.superoperator.shape[0])
    obs = observable_row(system_operators(5).lower)
    return L, v, obs


def test_compiled_backend_built():
    assert "compiled" in _kernels.BACKENDS, "Cython extension missing; reinstall with Cython available"


def test_backends_agree(setup):
    if len(BACKENDS) < 2:
        pytest.skip("only one backend available")
    L, v, obs = setup
    out = {name: _kernels.taylor_trajectory(*_args(L, v, obs, 2e-9, 30), backend=name) for name in BACKENDS}
    a, b = out["compiled"], out["python"]
    assert np.allclose(a[0], b[0], rtol=1e-13, atol=1e-13 * np.abs(b[0]).max())
    assert np.allclose(a[1], b[1], rtol=1e-13, atol=1e-13 * np.abs(b[1]).max())
    assert a[2] == b[2] and a[3] == b[3]


@pytest.mark.parametrize("backend", BACKENDS)
def test_nonconvergence_reported(setup, backend):
    L, v, obs = setup
    *_, worst = _kernels.taylor_trajectory(*_args(L, v, obs, 1e-6, 1, n_sub=1, max_terms=3), backend=backend)
    assert worst == -1


@pytest.mark.parametrize("backend", BACKENDS)
def test_zero_generator_is_identity(backend):
    import scipy.sparse as sp

    S = sp.csr_matrix((4, 4), dtype=complex)
    v = np.arange(4, dtype=complex)
    samples, out, matvecs, worst = _kernels.taylor_trajectory(
        S.indptr, S.indices, S.data, v, np.ones(4, complex), 1.0, 3, 1, TAYLOR_TOL, 10, backend=backend
    )
    assert np.array_equal(out, v)
    assert np.allclose(samples, 6.0)
    assert worst >= 1


@pytest.mark.parametrize("backend", BACKENDS)
def test_dimension_mismatch(setup, backend):
    L, v, obs = setup
    with pytest.raises(ValueError):
        _kernels.taylor_trajectory(*_args(L, v, obs[:-1], 1e-9, 1), backend=backend)


def test_unknown_backend():
    with pytest.raises(ValueError):
        _kernels.get_backend("fortran")


def test_env_var_selects_fallback():
    code = "from mollow_cavity import _kernels; print(_kernels.BACKEND)"
    env = dict(os.environ, MOLLOW_CAVITY_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
