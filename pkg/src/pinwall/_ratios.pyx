# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled backward sweeps for the minimal-solution ratio recursion."""

from libc.math cimport sqrt


def backward_ratios(double[::1] sqb, double rho, double t_seed,
                    Py_ssize_t m, double[::1] store):
    """Backward ratio sweep t_{n-1} = 2 rho sqb[n-1] sqb[n] - sqb[n-1]/(sqb[n+1] t_n).

    Starts from t_m = t_seed and runs down to t_1, writing t_p into
    store[p-1] for p <= len(store).  sqb[n] must hold sqrt(b_n) for
    1 <= n <= m + 1 (index 0 is unused).  Returns 0 when every ratio stayed
    positive, else the largest index n whose t_n came out <= 0 (the sweep
    stops there and store below it is unspecified).
    """
    cdef Py_ssize_t n
    cdef Py_ssize_t nstore = store.shape[0]
    cdef Py_ssize_t fail = 0
    cdef double t = t_seed
    cdef double tworho = 2.0 * rho
    if m <= nstore:
        store[m - 1] = t
    with nogil:
        for n in range(m, 1, -1):
            t = tworho * sqb[n] * sqb[n - 1] - sqb[n - 1] / (sqb[n + 1] * t)
            if t <= 0.0:
                fail = n - 1
                break
            if n - 1 <= nstore:
                store[n - 2] = t
    return fail


def critical_ratios(double[::1] x, double tau_seed,
                    Py_ssize_t m, double[::1] store):
    """Backward ratio sweep at decay rate 1, in deviation variables.

    x[n] holds b_n - 1 for 1 <= n <= m + 1 and tau_n = t_n - 1 is
    propagated directly:

        tau_{n-1} = A_n + (tau_n - d_n) / (1 + tau_n),
        A_n = 2 (sqrt(b_{n-1} b_n) - 1),  d_n = sqrt(b_{n-1}/b_{n+1}) - 1,

    all evaluated without forming quantities near 1, so the 1/n^2 tail of
    the potential is never lost to rounding.  Writes t_p = 1 + tau_p into
    store[p-1] for p <= len(store); returns 0 on success, else the largest
    index n with t_n <= 0.
    """
    cdef Py_ssize_t n
    cdef Py_ssize_t nstore = store.shape[0]
    cdef Py_ssize_t fail = 0
    cdef double tau = tau_seed
    cdef double y, r, a2, d
    if m <= nstore:
        store[m - 1] = 1.0 + tau
    with nogil:
        for n in range(m, 1, -1):
            y = x[n - 1] + x[n] + x[n - 1] * x[n]
            a2 = 2.0 * y / (1.0 + sqrt(1.0 + y))
            r = (x[n - 1] - x[n + 1]) / (1.0 + x[n + 1])
            d = r / (1.0 + sqrt(1.0 + r))
            tau = a2 + (tau - d) / (1.0 + tau)
            if tau <= -1.0:
                fail = n - 1
                break
            if n - 1 <= nstore:
                store[n - 2] = 1.0 + tau
    return fail
