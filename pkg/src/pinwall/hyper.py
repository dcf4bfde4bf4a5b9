"""Closed forms for the solvable hypergeometric potential family.

For the two-parameter family (a, s) (see `pinwall.potentials.hyper_b`,
tail strength w = s(1-s)/2) the transfer problem closes: profile values at
any decay rate, the critical profile, the critical contact weight, the
decay rate and localization density at given contact weight, and the
critical laws in every regime of s.

All hypergeometric arguments are handled through the complement
1 - z = (rho^2 - 1)/rho^2, kept exact down to ~1e-300, so the closed forms
remain usable exponentially close to criticality (where the generic solver
cannot go).  Profile values at large p are produced by backward
normalization against the contact value (see `wp_profile`), because direct
series evaluation loses all precision there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .errors import ParameterError, RegimeError
from .potentials import hyper_potential
from .specfn import Z_SWITCH, gauss_2f1
from .transfer import asymptotic_roots

__all__ = [
    "CriticalBehavior",
    "b0c_closed",
    "w1_closed",
    "wp_critical",
    "wp_rho_closed",
    "wp_profile",
    "rho_closed",
    "m_closed",
    "special_s1",
    "special_s2",
    "critical_behavior",
]

#: treat s within this of the marginal points 1/2, 3/2 as marginal
MARGINAL_TOL = 1e-8


def _check(a: float, s: float) -> None:
    if not a > 0.75:
        raise ParameterError(f"a > 3/4 required, got a={a}")
    if not s >= 0.5:
        raise ParameterError(f"s >= 1/2 required, got s={s}")


@lru_cache(maxsize=64)
def _bseq(a: float, s: float):
    return hyper_potential(a, s)


def _xi_of_rho(rho: float) -> float:
    """1 - rho^{-2} without cancellation near rho = 1."""
    eps = rho - 1.0
    return eps * (2.0 + eps) / ((1.0 + eps) * (1.0 + eps))


def _glr(num, den) -> float:
    """exp(sum log Gamma(num) - sum log Gamma(den)), all arguments > 0."""
    return math.exp(sum(gammaln(x) for x in num) - sum(gammaln(x) for x in den))


def b0c_closed(a: float, s: float) -> float:
    """Critical contact weight of the (a, s) family.

    b0c = Gamma(a+s-1) Gamma(a+1/2) / (2 Gamma(a) Gamma(s+a-1/2)).
    """
    _check(a, s)
    return 0.5 * _glr((a + s - 1.0, a + 0.5), (a, s + a - 0.5))


def w1_closed(a: float, s: float, rho: float) -> float:
    """Contact value w_1(rho) of the minimal solution, rho >= 1."""
    _check(a, s)
    if rho < 1.0:
        raise ParameterError(f"rho >= 1 required, got {rho}")
    if rho == 1.0 and abs(s - 0.5) <= MARGINAL_TOL:
        raise RegimeError(
            "w_1(1) diverges at s = 1/2; use the essential critical branch")
    xi = _xi_of_rho(rho)
    num = gauss_2f1(a, a + 0.5, 2.0 * a + s, one_minus_z=xi)
    den = gauss_2f1(a - 0.5, a, 2.0 * a + s - 1.0, one_minus_z=xi)
    return num / (rho * den)


def wp_critical(a: float, s: float, p) -> float | np.ndarray:
    """Critical profile w_p(1) ~ C p^{1-s}; exact gamma-ratio form."""
    _check(a, s)
    parr = np.asarray(p, dtype=np.float64)
    if np.any(parr < 1):
        raise ParameterError("p >= 1 required")
    lg = 0.5 * (gammaln(2.0 * a + 2.0 * s - 1.0) - gammaln(2.0 * a)
                + gammaln(2.0 * a + parr - 1.0)
                - gammaln(2.0 * a + 2.0 * s + parr - 2.0))
    pref = np.sqrt((2.0 * a + parr + s - 2.0) * (2.0 * a + s - 1.0))
    out = pref * np.exp(lg) / (a + s - 1.0)
    return float(out) if np.isscalar(p) else out


def _wp_direct(a: float, s: float, rho: float, p: int, xi: float) -> float:
    """Profile value by direct series (accurate only inside the loss budget)."""
    num = gauss_2f1(a + 0.5 * (p - 1), a + 0.5 * p,
                    2.0 * a + p + s - 1.0, one_minus_z=xi)
    den = gauss_2f1(a - 0.5, a, 2.0 * a + s - 1.0, one_minus_z=xi)
    lg = 0.5 * (gammaln(s - 1.0 + 2.0 * a) + gammaln(s + 2.0 * a)
                + gammaln(2.0 * a + p - 1.0) + gammaln(2.0 * s + 2.0 * a + p - 2.0)
                - gammaln(s + p - 2.0 + 2.0 * a) - gammaln(s + p - 1.0 + 2.0 * a)
                - gammaln(2.0 * a) - gammaln(2.0 * s + 2.0 * a - 1.0))
    return 2.0 * math.exp(-p * math.log(2.0 * rho) + lg) * num / den


def wp_rho_closed(a: float, s: float, rho: float, p: int) -> float:
    """Profile value w_p(rho) for one index p.

    Uses the direct closed form while the hypergeometric evaluation keeps
    its accuracy, otherwise the backward-normalized profile.
    """
    _check(a, s)
    if not 1 <= p <= 1_000_000:
        raise ParameterError("p in 1..10^6 required")
    if rho == 1.0:
        return float(wp_critical(a, s, p))
    xi = _xi_of_rho(rho)
    z = 1.0 - xi
    alpha = a + 0.5 * (p - 1)
    if z < Z_SWITCH or 4.0 * math.sqrt(alpha * (alpha + 0.5) * xi) <= 14.0:
        return _wp_direct(a, s, rho, p, xi)
    return float(wp_profile(a, s, rho, p)[0][p])


def wp_profile(a: float, s: float, rho: float,
               pmax: int) -> tuple[np.ndarray, np.ndarray]:
    """Profile (values, log_values) for p = 1..pmax, index-aligned ([0] nan).

    At rho > 1 the values come from the three-term recursion run backward
    from beyond pmax (seed direction forgotten at rate e^{-2k per step})
    and normalized against the closed-form contact value; this is stable
    uniformly in p, unlike the direct series.  log_values stays finite
    where values underflow.  At rho = 1 the exact critical form is used.
    """
    _check(a, s)
    if pmax < 1:
        raise ParameterError("pmax >= 1 required")
    if rho == 1.0:
        vals = np.empty(pmax + 1)
        vals[0] = np.nan
        vals[1:] = wp_critical(a, s, np.arange(1, pmax + 1))
        logs = np.empty(pmax + 1)
        logs[0] = np.nan
        logs[1:] = np.log(vals[1:])
        return vals, logs
    roots = asymptotic_roots(rho)
    buffer = int(16.0 / roots.k) + 32
    top = pmax + buffer
    b = _bseq(a, s).b_array(top + 2)
    u_hi = 0.0   # plays w_{top+1}
    u = 1.0      # plays w_top
    shift = 0.0  # accumulated rescale of the running pair, in logs
    logu = np.empty(pmax + 1)
    logu[0] = np.nan
    shifts = np.empty(pmax + 1)
    for p in range(top, 1, -1):
        u_lo = (2.0 * rho * math.sqrt(b[p - 1] * b[p]) * u
                - math.sqrt(b[p - 1] / b[p + 1]) * u_hi)
        u_hi, u = u, u_lo
        if p - 1 <= pmax:
            if u <= 0.0:
                raise RegimeError(
                    "backward profile lost positivity; increase the buffer")
            logu[p - 1] = math.log(u)
            shifts[p - 1] = shift
        if u > 1e250:
            u *= 1e-250
            u_hi *= 1e-250
            shift += 250.0 * math.log(10.0)
    anchor = math.log(w1_closed(a, s, rho))
    logs = np.empty(pmax + 1)
    logs[0] = np.nan
    logs[1:] = (logu[1:] + shifts[1:]) - (logu[1] + shifts[1]) + anchor
    with np.errstate(under="ignore", over="ignore"):
        vals = np.exp(logs)
    vals[0] = np.nan
    return vals, logs


def _xi_of_b0(a: float, s: float, b0: float) -> float:
    """Solve the implicit equation for xi = 1 - (2 rho)^{-2} z-argument.

    Bisection runs on y = log(xi), which keeps resolution at decay rates
    exponentially close to 1 (continuous-transition scaling reaches
    rho - 1 ~ gap^{(s-1/2)^{-1}} and marginal scaling is even steeper);
    returning xi itself lets callers stay in this variable where rho - 1
    would underflow.  b0 is assumed already vetted against (0, b0c).
    """
    b1 = _bseq(a, s).b(1)

    def gap(y: float) -> float:
        # implicit equation: b0 = w1(rho) / (4 rho b1) = z * F_num / (4 b1 F_den)
        xi = math.exp(y)
        z = 1.0 - xi
        num = gauss_2f1(a, a + 0.5, 2.0 * a + s, one_minus_z=xi)
        den = gauss_2f1(a - 0.5, a, 2.0 * a + s - 1.0, one_minus_z=xi)
        return z * num / (4.0 * b1 * den) - b0

    lo, hi = -700.0, -1e-8
    if gap(lo) <= 0.0:
        raise RegimeError("b0 too close to critical for double precision")
    if gap(hi) >= 0.0:
        hi = -1e-16
        if gap(hi) >= 0.0:
            raise RegimeError("implicit equation lost its bracket")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if gap(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * abs(hi):
            break
    return math.exp(0.5 * (lo + hi))


def rho_closed(a: float, s: float, b0: float) -> float:
    """Decay rate rho(b0) from the closed-form implicit equation.

    Note rho - 1 rounds to zero once the transition gap puts xi below
    ~1e-16; solvers that need the deep near-critical regime should work
    through the xi-based internals instead.
    """
    _check(a, s)
    if b0 <= 0.0:
        raise ParameterError(f"b0 must be positive, got {b0}")
    b0c = b0c_closed(a, s)
    if b0 >= b0c:
        raise RegimeError(f"b0={b0} is not below b0c={b0c}")
    xi = _xi_of_b0(a, s, b0)
    eps = math.expm1(-0.5 * math.log1p(-xi))
    return 1.0 + eps


def m_closed(a: float, s: float, b0: float) -> float:
    """Localization density m(b0) from the closed-form ratio identity."""
    _check(a, s)
    if b0 <= 0.0:
        raise ParameterError(f"b0 must be positive, got {b0}")
    b0c = b0c_closed(a, s)
    if b0 > b0c:
        return 0.0
    if b0 == b0c:
        if s > 1.5 + MARGINAL_TOL:
            return 1.0 / (2.0 + 2.0 * a / (s - 1.5))
        return 0.0
    # feed the solved xi straight into the ratio identity: recovering it
    # from rho would quantize xi at the spacing of doubles around 1
    return _m_of_xi(a, s, _xi_of_b0(a, s, b0))


def m_of_rho_closed(a: float, s: float, rho: float) -> float:
    """Density m expressed through rho via contiguous-ratio identities."""
    _check(a, s)
    if rho <= 1.0:
        raise ParameterError("rho > 1 required here")
    return _m_of_xi(a, s, _xi_of_rho(rho))


def _m_of_xi(a: float, s: float, xi: float) -> float:
    z = 1.0 - xi
    f_num = gauss_2f1(a, a + 0.5, 2.0 * a + s, one_minus_z=xi)
    f_den = gauss_2f1(a - 0.5, a, 2.0 * a + s - 1.0, one_minus_z=xi)
    t1 = gauss_2f1(a + 1.0, a + 1.5, 2.0 * a + s + 1.0, one_minus_z=xi) / f_num
    t2 = gauss_2f1(a + 0.5, a + 1.0, 2.0 * a + s, one_minus_z=xi) / f_den
    denom = (2.0
             + 2.0 * z * t1 * a * (a + 0.5) / (2.0 * a + s)
             - 2.0 * z * t2 * a * (a - 0.5) / (2.0 * a + s - 1.0))
    return 1.0 / denom


def special_s1(b0: float) -> dict:
    """Exact laws of the flat member s = 1 (b_n = 1 for every a)."""
    if b0 <= 0.0:
        raise ParameterError(f"b0 must be positive, got {b0}")
    if b0 >= 0.5:
        raise RegimeError("localized phase needs 0 < b0 < 1/2")
    rho = 1.0 / (2.0 * math.sqrt(b0 * (1.0 - b0)))
    return {
        "b0c": 0.5,
        "rho": rho,
        "m": (0.5 - b0) / (1.0 - b0),
        "sum_sq": 4.0 * b0 / (1.0 - 2.0 * b0),
    }


def special_s2(a: float, b0: float) -> dict:
    """Exact laws of the s = 2 member (first-order transition).

    Polynomial surd expressions for m and rho; jump height 1/(4a + 2).
    """
    if not a > 0.75:
        raise ParameterError(f"a > 3/4 required, got a={a}")
    if b0 <= 0.0:
        raise ParameterError(f"b0 must be positive, got {b0}")
    c = a / (2.0 * a + 1.0)
    if b0 >= c:
        raise RegimeError(f"localized phase needs b0 < {c}")
    out = {"b0c": c, "jump": 1.0 / (4.0 * a + 2.0)}
    g = c - b0
    surd1 = math.sqrt(c * c * g * g + g * (c - 2.0 * c * c))
    x = surd1 + c * g
    out["rho"] = 1.0 / math.sqrt(1.0 - (x / c) ** 2)
    s2 = math.sqrt(g) * math.sqrt(c * c - (b0 + 2.0) * c + 1.0)
    sc = math.sqrt(c)
    num = (sc * (4.0 * b0 * c ** 3 - (8.0 * b0 * b0 + 6.0 * b0) * c * c
                 + (4.0 * b0 ** 3 + 6.0 * b0 * b0 + 3.0 * b0) * c
                 - 3.0 * b0 * b0)
           + s2 * (4.0 * b0 * c * c - (4.0 * b0 * b0 + 2.0 * b0) * c + b0))
    den = (sc * (4.0 * c ** 4 - (12.0 * b0 + 8.0) * c ** 3
                 + (12.0 * b0 * b0 + 16.0 * b0 + 4.0) * c * c
                 - (4.0 * b0 ** 3 + 8.0 * b0 * b0 + 8.0 * b0) * c
                 + 4.0 * b0 * b0)
           + s2 * (4.0 * c ** 3 - (8.0 * b0 + 4.0) * c * c
                   + (4.0 * b0 * b0 + 4.0 * b0) * c - 2.0 * b0))
    out["m"] = -num / den
    return out


@dataclass(frozen=True)
class CriticalBehavior:
    """How m(b0) closes its gap at the transition of the (a, s) family.

    kind is one of power / log / essential / firstorder.  For the power
    law, m ~ gap^{m_exponent}; at s = 3/2, m ~ -log_coef / ln(gap); at
    s = 1/2, m ~ ess_prefactor gap^{-2} exp(-ess_coef/gap); above s = 3/2
    the density jumps by `jump` at the transition.
    """

    a: float
    s: float
    kind: str
    theta: float | None = None
    m_exponent: float | None = None
    log_coef: float | None = None
    ess_coef: float | None = None
    ess_prefactor: float | None = None
    jump: float | None = None


def critical_behavior(a: float, s: float) -> CriticalBehavior:
    _check(a, s)
    if abs(s - 1.5) <= MARGINAL_TOL:
        return CriticalBehavior(a, s, "log", log_coef=1.0 / (2.0 * a + 0.5))
    if abs(s - 0.5) <= MARGINAL_TOL:
        b1 = _bseq(a, s).b(1)
        d = (2.0 * a - 0.5) / (4.0 * b1 * (a - 0.5) ** 2)
        return CriticalBehavior(a, s, "essential", ess_coef=d,
                                ess_prefactor=(a - 0.5) * d * d)
    if s > 1.5:
        return CriticalBehavior(a, s, "firstorder",
                                jump=1.0 / (2.0 + 2.0 * a / (s - 1.5)))
    theta = 1.5 - s
    return CriticalBehavior(a, s, "power", theta=theta,
                            m_exponent=theta / (s - 0.5))
