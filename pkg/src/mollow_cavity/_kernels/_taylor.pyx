# Compiled Taylor propagation of a CSR generator; same algorithm as _fallback.py,
# with the matvec, accumulation and both norms fused into one pass.
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


cdef inline double _amax2(double a, double b) noexcept nogil:
    a = fabs(a)
    b = fabs(b)
    return a if a > b else b


cdef double _fused_term(const int *indptr, const int *indices, const double *data,
                        const double *x, double *out, double *v, Py_ssize_t n,
                        double scale, double *vnorm) noexcept nogil:
    """out = scale * L x; v += out. Returns max|out|, stores max|v| in vnorm.

    Complex vectors are interleaved (re, im) doubles.
    """
    cdef Py_ssize_t i, jj, col
    cdef double re, im, dre, dim, xre, xim, tmax = 0.0, vmax = 0.0, m
    for i in range(n):
        re = 0.0
        im = 0.0
        for jj in range(indptr[i], indptr[i + 1]):
            col = indices[jj]
            dre = data[2 * jj]
            dim = data[2 * jj + 1]
            xre = x[2 * col]
            xim = x[2 * col + 1]
            re = re + dre * xre - dim * xim
            im = im + dre * xim + dim * xre
        re = re * scale
        im = im * scale
        out[2 * i] = re
        out[2 * i + 1] = im
        m = _amax2(re, im)
        if m > tmax:
            tmax = m
        re = v[2 * i] + re
        im = v[2 * i + 1] + im
        v[2 * i] = re
        v[2 * i + 1] = im
        m = _amax2(re, im)
        if m > vmax:
            vmax = m
    vnorm[0] = vmax
    return tmax


cdef int _taylor_step(const int *indptr, const int *indices, const double *data,
                      double *v, double *term, double *tmp, Py_ssize_t n,
                      double h, double tol, int max_terms, long *matvecs) noexcept nogil:
    """In-place v <- exp(h L) v. Returns the number of terms used, or -1."""
    cdef Py_ssize_t i
    cdef int k
    cdef double c_prev = 1e300, c_new, vnorm = 0.0
    cdef double *swap
    for i in range(2 * n):
        term[i] = v[i]
    for k in range(1, max_terms + 1):
        c_new = _fused_term(indptr, indices, data, term, tmp, v, n, h / k, &vnorm)
        matvecs[0] += 1
        swap = term
        term = tmp
        tmp = swap
        if c_prev + c_new <= tol * vnorm:
            return k
        c_prev = c_new
    return -1


cdef inline void _dot(const double *a, const double *b, Py_ssize_t n, double *out) noexcept nogil:
    cdef Py_ssize_t i
    cdef double re = 0.0, im = 0.0
    for i in range(n):
        re = re + a[2 * i] * b[2 * i] - a[2 * i + 1] * b[2 * i + 1]
        im = im + a[2 * i] * b[2 * i + 1] + a[2 * i + 1] * b[2 * i]
    out[0] = re
    out[1] = im


def taylor_trajectory(indptr, indices, data, v0, obs, double dt, int n_steps,
                      int n_sub, double tol, int max_terms):
    """Propagate ``v0`` by ``exp(dt L)`` ``n_steps`` times, sampling ``obs . v``.

    Returns ``(samples, v_final, matvecs, max_terms_used)``; ``max_terms_used``
    is -1 when a step failed to converge within ``max_terms``.
    """
    cdef int[::1] ip = np.ascontiguousarray(indptr, dtype=np.int32)
    cdef int[::1] ix = np.ascontiguousarray(indices, dtype=np.int32)
    data = np.ascontiguousarray(data, dtype=np.complex128)
    if data.size == 0:  # zero generator; keep a valid pointer
        data = np.zeros(1, dtype=np.complex128)
        ix = np.zeros(1, dtype=np.int32)
    cdef double[::1] dat = data.view(np.float64)
    cdef double[::1] ob = np.ascontiguousarray(obs, dtype=np.complex128).view(np.float64)
    v_arr = np.array(v0, dtype=np.complex128, copy=True)
    cdef double[::1] v = v_arr.view(np.float64)
    cdef Py_ssize_t n = v_arr.shape[0]
    cdef double[::1] term = np.empty(2 * n, dtype=np.float64)
    cdef double[::1] tmp = np.empty(2 * n, dtype=np.float64)
    samples_arr = np.empty(n_steps + 1, dtype=np.complex128)
    cdef double[::1] samples = samples_arr.view(np.float64)
    cdef long matvecs = 0
    cdef int used, worst = 0
    cdef Py_ssize_t s, j
    cdef double h = dt / n_sub
    if ip.shape[0] != n + 1 or ob.shape[0] != 2 * n:
        raise ValueError("dimension mismatch between generator, state and observable")
    if n == 0:
        raise ValueError("empty state")
    with nogil:
        _dot(&ob[0], &v[0], n, &samples[0])
        for s in range(n_steps):
            for j in range(n_sub):
                used = _taylor_step(&ip[0], &ix[0], &dat[0], &v[0], &term[0], &tmp[0], n,
                                    h, tol, max_terms, &matvecs)
                if used < 0:
                    worst = -1
                    break
                if used > worst:
                    worst = used
            if worst < 0:
                break
            _dot(&ob[0], &v[0], n, &samples[2 * s + 2])
    return samples_arr, v_arr, matvecs, worst
