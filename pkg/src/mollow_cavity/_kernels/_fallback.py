"""Pure numpy/scipy implementation of the propagation kernel."""

import numpy as np
import scipy.sparse as sp


def _amax(x):
    return max(np.abs(x.real).max(initial=0.0), np.abs(x.imag).max(initial=0.0))


def taylor_trajectory(indptr, indices, data, v0, obs, dt, n_steps, n_sub, tol, max_terms):
    """Propagate ``v0`` by ``exp(dt L)`` ``n_steps`` times, sampling ``obs . v``.

    Returns ``(samples, v_final, matvecs, max_terms_used)``; ``max_terms_used``
    is -1 when a step failed to converge within ``max_terms``.
    """
    n = len(v0)
    if len(indptr) != n + 1 or len(obs) != n:
        raise ValueError("dimension mismatch between generator, state and observable")
    L = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    obs = np.asarray(obs, dtype=complex)
    v = np.array(v0, dtype=complex, copy=True)
    samples = np.empty(n_steps + 1, dtype=complex)
    samples[0] = obs @ v
    h = dt / n_sub
    matvecs = 0
    worst = 0
    for s in range(n_steps):
        for _ in range(n_sub):
            term = v
            c_prev = np.inf
            used = -1
            for k in range(1, max_terms + 1):
                term = (L @ term) * (h / k)
                matvecs += 1
                v = v + term
                c_new = _amax(term)
                if c_prev + c_new <= tol * _amax(v):
                    used = k
                    break
                c_prev = c_new
            if used < 0:
                return samples, v, matvecs, -1
            worst = max(worst, used)
        samples[s + 1] = obs @ v
    return samples, v, matvecs, worst
