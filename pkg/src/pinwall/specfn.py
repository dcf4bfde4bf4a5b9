"""Special-function layer.

log-gamma, digamma and the modified Bessel K are thin scipy wrappers with
domain checks.  The Gauss hypergeometric 2F1 is implemented here because the
rest of the package needs two things scipy's version does not offer:

* evaluation with the argument supplied as its complement ``1 - z``, so that
  z exponentially close to 1 (complements down to ~1e-300) keeps full
  relative accuracy, and
* the logarithmic connection branches at integer ``gamma - alpha - beta``,
  with the ``log(1 - z)`` term taken from the exactly known complement.

Only real parameters and argument z in [0, 1] are supported; that is the
region the transfer-operator closed forms live in.

Accuracy note: above the switch point the connection formula combines two
solutions whose size ratio reaches ~exp(4 sqrt(alpha beta (1-z))), so that
many nats of the mantissa cancel.  For the O(1) parameters of the
contact-value formulas this is negligible; callers with p-indexed large
parameters must stay inside that budget (the profile evaluators in
`pinwall.hyper` use a backward-normalization scheme instead).  A warning is
emitted when roughly half the double mantissa is gone.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.special import gammaln, gammasgn, kv, psi

from .errors import ConvergenceError, DivergenceError, ParameterError

#: switch point between the direct z-series and the 1-z connection formulas
Z_SWITCH = 0.75
#: a series term this small relative to the running sum counts as converged
SERIES_RTOL = 1e-17
#: hard cap on series terms before giving up
SERIES_MAX = 20_000
#: |c - round(c)| below this routes to the logarithmic branch at integer c
INT_TOL = 1e-8

__all__ = ["log_gamma", "digamma", "bessel_k", "gauss_2f1", "gauss_2f1_vec"]


def log_gamma(x: float) -> float:
    """log Gamma(x) for x > 0."""
    if not x > 0.0:
        raise ParameterError(f"log_gamma needs x > 0, got {x}")
    return float(gammaln(x))


def digamma(x: float) -> float:
    """Digamma (psi) function for x > 0."""
    if not x > 0.0:
        raise ParameterError(f"digamma needs x > 0, got {x}")
    return float(psi(x))


def bessel_k(nu: float, x: float) -> float:
    """Modified Bessel function K_nu(x) for nu in (0, 2) and x > 0.

    The half-integer case nu = 1/2 is returned through its elementary closed
    form sqrt(pi/(2x)) e^{-x}; everything else goes through scipy's AMOS
    binding.
    """
    if not (0.0 < nu < 2.0):
        raise ParameterError(f"bessel_k supports nu in (0, 2), got {nu}")
    if not x > 0.0:
        raise ParameterError(f"bessel_k needs x > 0, got {x}")
    if nu == 0.5:
        return math.sqrt(math.pi / (2.0 * x)) * math.exp(-x)
    return float(kv(nu, x))


def _gamma_ratio(num, den) -> float:
    """prod Gamma(num_i) / prod Gamma(den_j) with signs, via log-gamma.

    A pole in the denominator is a legitimate zero of the ratio; a pole in
    the numerator is a caller error.
    """
    logv = 0.0
    sign = 1.0
    for x in num:
        s = gammasgn(x)
        if s == 0.0:
            raise ParameterError(f"gamma pole at {x} in ratio numerator")
        sign *= s
        logv += gammaln(x)
    for x in den:
        s = gammasgn(x)
        if s != 0.0:
            sign *= s
        logv -= gammaln(x)  # gammaln at a pole is +inf, killing the ratio
    return sign * math.exp(logv)


def _series(alpha: float, beta: float, gamma: float, z: float) -> float:
    """sum_k (alpha)_k (beta)_k / ((gamma)_k k!) z^k by term recurrence.

    Kahan-compensated; terminates on two consecutive negligible terms so the
    pre-asymptotic hump of large-parameter cases cannot fake convergence.
    """
    total, comp = 1.0, 0.0
    term = 1.0
    small = 0
    for k in range(SERIES_MAX):
        term *= (alpha + k) * (beta + k) / ((gamma + k) * (k + 1.0)) * z
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
        if abs(term) <= SERIES_RTOL * abs(total):
            small += 1
            if small >= 2:
                return total
        else:
            small = 0
    raise ConvergenceError(
        f"2F1 series stalled after {SERIES_MAX} terms "
        f"(alpha={alpha}, beta={beta}, gamma={gamma}, z={z})"
    )


def _log_series_int(alpha: float, beta: float, m: int, xi: float,
                    log_xi: float, gamma: float) -> float:
    """Connection value at integer c = gamma - alpha - beta = m >= 0.

    Abramowitz & Stegun 15.3.10 (m = 0) and 15.3.11 (m >= 1), with the
    log(1-z) term supplied exactly through `log_xi`.
    """
    # finite non-log part (empty for m = 0)
    finite = 0.0
    if m >= 1:
        term = 1.0
        acc = term
        for n in range(1, m):
            term *= (alpha + n - 1.0) * (beta + n - 1.0) / (n * (n - m)) * xi
            acc += term
        finite = acc * _gamma_ratio((float(m), gamma), (alpha + m, beta + m))

    # logarithmic series
    d1 = float(psi(1.0))            # psi(n + 1)
    d2 = float(psi(m + 1.0))        # psi(n + m + 1)
    d3 = float(psi(alpha + m))      # psi(alpha + n + m)
    d4 = float(psi(beta + m))       # psi(beta + n + m)
    if m == 0:
        bracket = 2.0 * d1 - d3 - d4 - log_xi
        sign_front = 1.0
    else:
        bracket = log_xi - d1 - d2 + d3 + d4
        sign_front = -((-1.0) ** m)
    coef = 1.0 / math.factorial(m)
    total, comp = coef * bracket, 0.0
    small = 0
    for n in range(1, SERIES_MAX):
        coef *= (alpha + m + n - 1.0) * (beta + m + n - 1.0) / (n * (n + m)) * xi
        d1 += 1.0 / n
        d2 += 1.0 / (n + m)
        d3 += 1.0 / (alpha + n + m - 1.0)
        d4 += 1.0 / (beta + n + m - 1.0)
        if m == 0:
            bracket = 2.0 * d1 - d3 - d4 - log_xi
        else:
            bracket = log_xi - d1 - d2 + d3 + d4
        term = coef * bracket
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
        if abs(term) <= SERIES_RTOL * abs(total):
            small += 1
            if small >= 2:
                break
        else:
            small = 0
    else:
        raise ConvergenceError("2F1 logarithmic branch stalled")
    xi_m = xi ** m if m else 1.0
    front = sign_front * _gamma_ratio((gamma,), (alpha, beta)) * xi_m
    return finite + front * total


def _log_series_negint(alpha: float, beta: float, mneg: int, xi: float,
                       log_xi: float, gamma: float) -> float:
    """Connection value at integer c = gamma - alpha - beta = -mneg < 0.

    Abramowitz & Stegun 15.3.12.
    """
    mm = mneg
    term = 1.0
    acc = term
    for n in range(1, mm):
        term *= (alpha - mm + n - 1.0) * (beta - mm + n - 1.0) / (n * (n - mm)) * xi
        acc += term
    finite = acc * _gamma_ratio((float(mm), gamma), (alpha, beta)) * xi ** (-mm)

    d1 = float(psi(1.0))         # psi(n + 1)
    d2 = float(psi(mm + 1.0))    # psi(n + mm + 1)
    d3 = float(psi(alpha))       # psi(alpha + n)
    d4 = float(psi(beta))        # psi(beta + n)
    coef = 1.0 / math.factorial(mm)
    bracket = log_xi - d1 - d2 + d3 + d4
    total, comp = coef * bracket, 0.0
    small = 0
    for n in range(1, SERIES_MAX):
        coef *= (alpha + n - 1.0) * (beta + n - 1.0) / (n * (n + mm)) * xi
        d1 += 1.0 / n
        d2 += 1.0 / (n + mm)
        d3 += 1.0 / (alpha + n - 1.0)
        d4 += 1.0 / (beta + n - 1.0)
        bracket = log_xi - d1 - d2 + d3 + d4
        term = coef * bracket
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
        if abs(term) <= SERIES_RTOL * abs(total):
            small += 1
            if small >= 2:
                break
        else:
            small = 0
    else:
        raise ConvergenceError("2F1 logarithmic branch stalled")
    front = -((-1.0) ** mm) * _gamma_ratio((gamma,), (alpha - mm, beta - mm))
    return finite + front * total


def _connection(alpha: float, beta: float, gamma: float, xi: float,
                log_xi: float) -> float:
    """2F1 near z = 1 via the 1-z connection formulas."""
    loss = 4.0 * math.sqrt(max(alpha * beta * xi, 0.0))
    if loss > 16.0:
        warnings.warn(
            f"2F1 connection cancellation: ~{loss / math.log(10.0):.0f} digits "
            f"lost at alpha={alpha}, beta={beta}, 1-z={xi}",
            RuntimeWarning, stacklevel=3,
        )
    c = gamma - alpha - beta
    m = round(c)
    if abs(c - m) <= INT_TOL:
        if m >= 0:
            return _log_series_int(alpha, beta, int(m), xi, log_xi, gamma)
        return _log_series_negint(alpha, beta, int(-m), xi, log_xi, gamma)
    a_coef = _gamma_ratio((gamma, c), (gamma - alpha, gamma - beta))
    b_coef = _gamma_ratio((gamma, -c), (alpha, beta))
    s1 = _series(alpha, beta, 1.0 - c, xi)
    xic = math.exp(c * log_xi)
    if xic == 0.0 or not math.isfinite(xic):
        # xi^c under/overflowed; the surviving term decides
        if xic == 0.0:
            return a_coef * s1
        raise ParameterError("2F1 overflows at this (c, 1-z)")
    s2 = _series(gamma - alpha, gamma - beta, 1.0 + c, xi)
    return a_coef * s1 + b_coef * xic * s2


def _check_params(alpha: float, beta: float, gamma: float) -> None:
    if gamma <= 0.0 and abs(gamma - round(gamma)) < 1e-12:
        raise ParameterError(f"2F1 undefined at nonpositive integer gamma={gamma}")


def gauss_2f1(alpha: float, beta: float, gamma: float, z: float | None = None,
              *, one_minus_z: float | None = None) -> float:
    """Gauss hypergeometric 2F1(alpha, beta; gamma; z), real z in [0, 1].

    Exactly one of `z` and `one_minus_z` must be given.  Pass `one_minus_z`
    when z is close to 1: the complement is used directly, so values like
    one_minus_z = 1e-200 are meaningful.  At z = 1 the Gauss limit is
    returned when gamma - alpha - beta > 0; otherwise DivergenceError.
    """
    _check_params(alpha, beta, gamma)
    if (z is None) == (one_minus_z is None):
        raise ParameterError("give exactly one of z and one_minus_z")
    if one_minus_z is not None:
        xi = float(one_minus_z)
        if not (0.0 <= xi <= 1.0):
            raise ParameterError(f"one_minus_z must lie in [0, 1], got {xi}")
        zval = 1.0 - xi
    else:
        zval = float(z)
        if not (0.0 <= zval <= 1.0):
            raise ParameterError(f"z must lie in [0, 1], got {zval}")
        xi = 1.0 - zval
    if xi == 0.0:
        c = gamma - alpha - beta
        if c <= 0.0:
            raise DivergenceError(
                f"2F1 diverges at z=1 for gamma-alpha-beta={c} <= 0"
            )
        return _gamma_ratio((gamma, c), (gamma - alpha, gamma - beta))
    if zval < Z_SWITCH:
        return _series(alpha, beta, gamma, zval)
    return _connection(alpha, beta, gamma, xi, math.log(xi))


def _series_vec(alpha, beta, gamma, z: float):
    """Vectorized z-series over parameter arrays at a shared scalar z."""
    total = np.ones_like(alpha)
    comp = np.zeros_like(alpha)
    term = np.ones_like(alpha)
    small = np.zeros(alpha.shape, dtype=np.int64)
    for k in range(SERIES_MAX):
        term = term * ((alpha + k) * (beta + k)) / ((gamma + k) * (k + 1.0)) * z
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
        small = np.where(np.abs(term) <= SERIES_RTOL * np.abs(total),
                         small + 1, 0)
        if int(small.min()) >= 2:
            return total
    raise ConvergenceError("vectorized 2F1 series stalled")


def gauss_2f1_vec(alpha, beta, gamma, z: float | None = None, *,
                  one_minus_z: float | None = None):
    """2F1 over aligned parameter arrays at one shared argument.

    Same semantics as `gauss_2f1`.  The connection path requires every
    gamma - alpha - beta to be safely non-integer; elements that are not are
    delegated to the scalar routine.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    if (z is None) == (one_minus_z is None):
        raise ParameterError("give exactly one of z and one_minus_z")
    if one_minus_z is not None:
        xi = float(one_minus_z)
        zval = 1.0 - xi
    else:
        zval = float(z)
        xi = 1.0 - zval
    if not (0.0 <= zval <= 1.0) or not (0.0 <= xi <= 1.0):
        raise ParameterError("argument outside [0, 1]")
    if xi == 0.0 or zval < Z_SWITCH:
        if xi == 0.0:
            out = np.empty(alpha.shape)
            flat = out.reshape(-1)
            for i, (al, be, ga) in enumerate(
                    zip(alpha.reshape(-1), beta.reshape(-1), gamma.reshape(-1))):
                flat[i] = gauss_2f1(float(al), float(be), float(ga), 1.0)
            return out
        return _series_vec(alpha, beta, gamma, zval)

    c = gamma - alpha - beta
    near_int = np.abs(c - np.round(c)) <= INT_TOL
    out = np.empty(alpha.shape)
    ok = ~near_int
    if np.any(ok):
        log_xi = math.log(xi)
        ln_a = (gammaln(gamma[ok]) + gammaln(c[ok])
                - gammaln(gamma[ok] - alpha[ok]) - gammaln(gamma[ok] - beta[ok]))
        sg_a = (gammasgn(gamma[ok]) * gammasgn(c[ok])
                * gammasgn(gamma[ok] - alpha[ok]) * gammasgn(gamma[ok] - beta[ok]))
        ln_b = (gammaln(gamma[ok]) + gammaln(-c[ok])
                - gammaln(alpha[ok]) - gammaln(beta[ok]))
        sg_b = (gammasgn(gamma[ok]) * gammasgn(-c[ok])
                * gammasgn(alpha[ok]) * gammasgn(beta[ok]))
        s1 = _series_vec(alpha[ok], beta[ok], 1.0 - c[ok], xi)
        s2 = _series_vec(gamma[ok] - alpha[ok], gamma[ok] - beta[ok],
                         1.0 + c[ok], xi)
        with np.errstate(under="ignore"):
            xic = np.exp(c[ok] * log_xi)
            out[ok] = sg_a * np.exp(ln_a) * s1 + sg_b * np.exp(ln_b) * xic * s2
    if np.any(near_int):
        idx = np.nonzero(near_int.reshape(-1))[0]
        flat = out.reshape(-1)
        af, bf, gf = alpha.reshape(-1), beta.reshape(-1), gamma.reshape(-1)
        for i in idx:
            flat[i] = gauss_2f1(float(af[i]), float(bf[i]), float(gf[i]),
                                one_minus_z=xi)
    return out
