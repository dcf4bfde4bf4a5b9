"""Pure-Python fallback for the compiled backward ratio sweep.

Same arithmetic, same order of operations, one interpreted loop.  Selected
by `pinwall._kernel` only when the extension is unavailable.
"""


from math import sqrt


def backward_ratios(sqb, rho, t_seed, m, store):
    sb = memoryview(sqb)
    st = memoryview(store)
    nstore = len(st)
    t = t_seed
    tworho = 2.0 * rho
    if m <= nstore:
        st[m - 1] = t
    for n in range(m, 1, -1):
        t = tworho * sb[n] * sb[n - 1] - sb[n - 1] / (sb[n + 1] * t)
        if t <= 0.0:
            return n - 1
        if n - 1 <= nstore:
            st[n - 2] = t
    return 0


def critical_ratios(x, tau_seed, m, store):
    xv = memoryview(x)
    st = memoryview(store)
    nstore = len(st)
    tau = tau_seed
    if m <= nstore:
        st[m - 1] = 1.0 + tau
    for n in range(m, 1, -1):
        y = xv[n - 1] + xv[n] + xv[n - 1] * xv[n]
        a2 = 2.0 * y / (1.0 + sqrt(1.0 + y))
        r = (xv[n - 1] - xv[n + 1]) / (1.0 + xv[n + 1])
        d = r / (1.0 + sqrt(1.0 + r))
        tau = a2 + (tau - d) / (1.0 + tau)
        if tau <= -1.0:
            return n - 1
        if n - 1 <= nstore:
            st[n - 2] = 1.0 + tau
    return 0
