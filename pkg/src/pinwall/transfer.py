"""Transfer-operator solvers for the pinned interface.

Everything rests on the minimal positive solution w_p (p >= 1) of the
away-from-wall system at decay rate rho >= 1:

    w_2 / (2 sqrt(b_1 b_2)) = rho w_1 - 1,
    w_{p-1}/(2 sqrt(b_{p-1} b_p)) + w_{p+1}/(2 sqrt(b_p b_{p+1})) = rho w_p.

It is computed through the backward ratio recursion (kernel in
`pinwall._kernel`), seeded deep in the tail where the ratio limit is known,
with seed-depth doubling until the contact value w_1 stabilizes.  On top of
it: the critical contact weight, the decay rate rho(b_0) solving the
implicit equation w_1(rho) = 4 rho b_1 b_0, the localization density
m(b_0), the localized-walk representation, and the truncated-operator
spectrum used for finite-size studies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernel import backward_ratios, critical_ratios
from .errors import ConvergenceError, ParameterError, RegimeError, ResourceError
from .potentials import PotentialSeq

__all__ = [
    "AsymptoticRoots",
    "MinimalSolution",
    "NotTransient",
    "GibbsPoint",
    "LocalizedWalk",
    "asymptotic_roots",
    "minimal_solution",
    "b0_critical",
    "rho_of_b0",
    "return_density",
    "gibbs",
    "localized_walk",
    "truncated_spectrum",
]

#: seed-depth ladder bounds
M_START = 1 << 10
M_CAP = 1 << 24
#: consecutive failing seed depths before declaring no transient solution
FAIL_RUN = 3
#: relative agreement of w_1 between seed depths
W1_RTOL = 1e-13


@dataclass(frozen=True)
class AsymptoticRoots:
    """Roots x of x^2 - 2 rho x + 1 = 0 and the decay exponent k = ln x_+.

    Computed through eps = rho - 1 so that k stays accurate down to
    eps ~ 1e-300 (k ~ sqrt(2 eps) there).
    """

    rho: float
    x_plus: float
    x_minus: float
    k: float


def asymptotic_roots(rho: float) -> AsymptoticRoots:
    if rho < 1.0:
        raise ParameterError(f"rho >= 1 required, got {rho}")
    eps = rho - 1.0
    surd = math.sqrt(eps * (2.0 + eps))
    x_plus = 1.0 + eps + surd
    return AsymptoticRoots(rho, x_plus, 1.0 / x_plus, math.log1p(eps + surd))


@dataclass
class MinimalSolution:
    """Minimal positive solution at fixed rho.

    values[p] = w_p for 1 <= p <= p_stored (index 0 is nan); log_values
    carries ln w_p over the same range and stays finite where values
    underflow.  sum_sq includes the analytic tail estimate tail_sq beyond
    p_stored (inf at rho = 1 when the squares are not summable).
    """

    rho: float
    w1: float          # best contact value (depth-extrapolated at rho = 1)
    values: np.ndarray
    log_values: np.ndarray
    sum_sq: float
    tail_sq: float
    p_stored: int
    seed_depth: int

    def value(self, p: int) -> float:
        if not 1 <= p <= self.p_stored:
            raise ParameterError(f"p outside stored range 1..{self.p_stored}")
        return float(self.values[p])


@dataclass
class NotTransient:
    """Evidence that no positive solution exists at this rho.

    The backward sweep hit a nonpositive ratio at `fail_indices[i]` when
    seeded at depth `depths[i]`, for FAIL_RUN consecutive doublings.
    """

    rho: float
    depths: list
    fail_indices: list


def _seed(rho: float, m: int, w: float) -> float:
    if rho > 1.0 + 1e-8:
        return asymptotic_roots(rho).x_plus
    if w <= 0.125:
        alpha_minus = 0.5 * (1.0 - math.sqrt(1.0 - 8.0 * w))
        return ((m + 1.0) / m) ** (-alpha_minus)
    return 1.0  # only a starting guess; these cases end in sign failure


def _seed_dev(m: int, w: float) -> float:
    """t_m - 1 for the critical sweep, kept in full relative precision."""
    if w <= 0.125:
        alpha_minus = 0.5 * (1.0 - math.sqrt(1.0 - 8.0 * w))
        return math.expm1(-alpha_minus * math.log1p(1.0 / m))
    return 0.0


def _w1_from_t1(rho: float, t1: float, sqb: np.ndarray) -> float:
    denom = rho - 1.0 / (2.0 * sqb[1] * sqb[2] * t1)
    if denom <= 0.0:
        return -1.0  # treated as a sign failure at the contact row
    return 1.0 / denom


def _sweep_profile(bseq: PotentialSeq, rho: float, m: int, nstore: int,
                   sqb_head: np.ndarray, at_crit: bool,
                   w: float) -> tuple[np.ndarray, np.ndarray]:
    """One backward sweep from depth m, keeping the first nstore ratios.

    Returns (values, log_values) indexed 1..nstore, anchored at the chain's
    own contact value so every stored row closes to rounding error.  The
    log profile follows the ratio chain, which stays O(1) even where the
    linear values underflow.
    """
    store = np.empty(nstore)
    if at_crit:
        fail = critical_ratios(bseq.x_array(m + 1), _seed_dev(m, w), m, store)
    else:
        fail = backward_ratios(bseq.sqrt_b_array(m + 1), rho,
                               _seed(rho, m, w), m, store)
    if fail:
        raise ConvergenceError("storage sweep lost positivity unexpectedly")
    w1 = _w1_from_t1(rho, store[0], sqb_head)
    if w1 <= 0.0:
        raise ConvergenceError("storage sweep lost positivity unexpectedly")
    values = np.empty(nstore + 1)
    log_values = np.empty(nstore + 1)
    values[0] = log_values[0] = np.nan
    values[1] = w1
    log_values[1] = math.log(w1)
    inv = 1.0 / store[: nstore - 1]
    with np.errstate(under="ignore"):
        values[2:] = w1 * np.cumprod(inv)
    log_values[2:] = log_values[1] - np.cumsum(np.log(store[: nstore - 1]))
    return values, log_values


def minimal_solution(bseq: PotentialSeq, rho: float, *, p_store: int = 0,
                     rtol: float = W1_RTOL, m_start: int = M_START,
                     m_cap: int = M_CAP):
    """Solve for the minimal positive solution; may report NotTransient.

    p_store asks for values up to that index (the solver keeps enough seed
    buffer above it).  Raises ConvergenceError if the seed ladder hits its
    cap without two agreeing depths, which does not happen for potentials
    with a genuine 1/n^2 tail.
    """
    if rho < 1.0:
        raise ParameterError(f"rho >= 1 required, got {rho}")
    w = bseq.tail.w
    roots = asymptotic_roots(rho)
    at_crit = rho == 1.0

    # storage needed beyond the caller's request so the deepest stored value
    # still has a forgetting buffer under it
    if p_store:
        need = p_store + 2
    elif at_crit:
        need = 1 << 17
    else:
        need = min(int(40.0 / roots.k) + 64, 1 << 22)
    m = max(m_start, M_START)
    while m < 4 * need and 2 * m <= m_cap:
        m *= 2
    m = min(m, m_cap // 2)  # leave room for at least one doubling

    # At rho = 1 the contact value converges algebraically in the depth,
    # w1(M) = w1 + c M^{-beta} with beta = 1 + sqrt(1 - 8w) set by the
    # tail strength, so the ladder compares Richardson-extrapolated values
    # and reports the extrapolation.  At rho > 1 convergence is geometric
    # and raw agreement is used.
    beta = 1.0 + math.sqrt(max(1.0 - 8.0 * w, 0.0)) if at_crit else 0.0
    crit_rtol = max(rtol, 1e-12)
    w1_prev = None
    ext_prev = None
    w1_final = None
    fails: list = []
    depths: list = []
    probe = np.empty(8)
    sqb_head = bseq.sqrt_b_array(2)
    while True:
        if at_crit:
            xv = bseq.x_array(m + 1)
            fail = critical_ratios(xv, _seed_dev(m, w), m, probe)
        else:
            sqb = bseq.sqrt_b_array(m + 1)
            fail = backward_ratios(sqb, rho, _seed(rho, m, w), m, probe)
        w1 = _w1_from_t1(rho, probe[0], sqb_head) if fail == 0 else -1.0
        if fail == 0 and w1 > 0.0:
            if at_crit:
                if w1_prev is not None:
                    ext = w1 + (w1 - w1_prev) / (2.0 ** beta - 1.0)
                    if (ext_prev is not None
                            and abs(ext - ext_prev) <= crit_rtol * abs(ext)):
                        w1_final = ext
                        break
                    ext_prev = ext
            elif w1_prev is not None and abs(w1 - w1_prev) <= rtol * abs(w1):
                w1_final = w1
                break
            w1_prev = w1
            fails.clear()
            depths.clear()
        else:
            fails.append(int(fail))
            depths.append(m)
            w1_prev = None
            ext_prev = None
            if len(fails) >= FAIL_RUN:
                return NotTransient(rho, depths, fails)
        if m >= m_cap:
            raise ConvergenceError(
                f"seed ladder reached depth {m} without stable contact value "
                f"(rho={rho}, family={bseq.family})")
        m *= 2

    # final sweep(s) with full storage at the converged depth
    if at_crit:
        # the raw chain at depth M carries an algebraic finite-depth error
        # that grows along the profile like p^(beta-1), so sweep two depths
        # and Richardson-extrapolate pointwise; the three-term rows are
        # linear, so the affine combination of two chains still closes every
        # stored row to rounding error, and values[1] becomes the
        # depth-extrapolated contact value
        m2 = 2 * m if 2 * m <= m_cap else m
        m1 = m2 // 2
        nstore = min(need, m1)
        lo_vals, _ = _sweep_profile(bseq, rho, m1, nstore, sqb_head, True, w)
        values, log_values = _sweep_profile(bseq, rho, m2, nstore, sqb_head,
                                            True, w)
        values += (values - lo_vals) / (2.0 ** beta - 1.0)
        log_values[1:] = np.log(values[1:])
        w1 = float(values[1])
        m = m2
    else:
        nstore = min(need, m)
        values, log_values = _sweep_profile(bseq, rho, m, nstore, sqb_head,
                                            False, w)
        w1 = w1_final if w1_final is not None else float(values[1])
    p_top = nstore

    body = float(values[1:] @ values[1:])
    if not at_crit:
        r2 = roots.x_minus * roots.x_minus
        tail = values[p_top] ** 2 * r2 / (1.0 - r2)
        if values[p_top] == 0.0:  # deep underflow; tail truly negligible
            tail = 0.0
    elif w < -0.375:
        # critical power-law tail: fit the local decay exponent on the last
        # stored decade of ln w_p and integrate it beyond p_top
        lo = max(1, p_top // 10)
        pp = np.arange(lo, p_top + 1, dtype=np.float64)
        slope = np.polyfit(np.log(pp), log_values[lo:], 1)[0]
        if 2.0 * slope < -1.0:
            tail = values[p_top] ** 2 * p_top / (-1.0 - 2.0 * slope)
        else:
            tail = math.inf
    else:
        tail = math.inf
    return MinimalSolution(rho, w1, values, log_values, body + tail, tail,
                           p_top, m)


def b0_critical(bseq: PotentialSeq) -> float:
    """Critical contact weight; +inf when no transition exists.

    Memoized on the sequence object: validation guards in the other
    solver entry points re-ask for this value freely.
    """
    cached = getattr(bseq, "_b0c", None)
    if cached is None:
        sol = minimal_solution(bseq, 1.0)
        cached = math.inf if isinstance(sol, NotTransient) else (
            sol.w1 / (4.0 * bseq.b(1)))
        bseq._b0c = cached
    return cached


def _implicit_gap(bseq: PotentialSeq, rho: float, b0: float,
                  hint: list) -> float:
    sol = minimal_solution(bseq, rho, m_start=hint[0])
    if isinstance(sol, NotTransient):
        raise RegimeError(f"no positive solution at rho={rho}")
    hint[0] = max(M_START, sol.seed_depth // 2)
    return sol.w1 / (4.0 * rho * bseq.b(1)) - b0


def rho_of_b0(bseq: PotentialSeq, b0: float) -> float:
    """Decay rate rho > 1 solving w_1(rho) = 4 rho b_1 b_0.

    Defined for 0 < b0 < the critical contact weight (RegimeError
    otherwise).  Bisection in eps = rho - 1 after geometric bracketing.
    """
    if b0 <= 0.0:
        raise ParameterError(f"b0 must be positive, got {b0}")
    b0c = b0_critical(bseq)
    if b0 >= b0c:  # +inf (no transition) never triggers: always localized
        raise RegimeError(
            f"b0={b0} is not below the critical contact weight {b0c}")
    hint = [M_START]
    hi = 1.0
    while _implicit_gap(bseq, 1.0 + hi, b0, hint) > 0.0:
        hi *= 4.0
        if hi > 1e12:
            raise ResourceError("failed to bracket rho(b0)")
    lo = 0.0
    for _ in range(120):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if _implicit_gap(bseq, 1.0 + mid, b0, hint) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * hi:
            break
    return 1.0 + 0.5 * (lo + hi)


def return_density(bseq: PotentialSeq, b0: float,
                   rho: float | None = None) -> float:
    """Fraction of pinned sites m(b_0) = 1/(1 + sum w_p^2 / (4 b_0 b_1)).

    Zero in the delocalized phase b_0 > b_0^c; at b_0 = b_0^c it equals the
    rho = 1 limit (zero for a continuous transition, the jump height for a
    first-order one).
    """
    if b0 <= 0.0:
        raise ParameterError(f"b0 must be positive, got {b0}")
    if rho is None:
        b0c = b0_critical(bseq)
        if b0 > b0c:
            return 0.0
        rho = 1.0 if b0 == b0c else rho_of_b0(bseq, b0)
    sol = minimal_solution(bseq, rho)
    if isinstance(sol, NotTransient):
        raise RegimeError(f"no positive solution at rho={rho}")
    if math.isinf(sol.sum_sq):
        return 0.0
    return 1.0 / (1.0 + sol.sum_sq / (4.0 * b0 * bseq.b(1)))


@dataclass(frozen=True)
class GibbsPoint:
    """State of the interface at contact weight b_0."""

    b0: float
    b0c: float
    rho: float
    phi: float       # contact free energy -ln rho(b_0); 0 when delocalized
    m: float         # density of pinned sites
    regime: str      # localized / critical / delocalized / no-transition

    @property
    def u(self) -> float:
        return -math.log(self.b0)


def gibbs(bseq: PotentialSeq, b0: float) -> GibbsPoint:
    if b0 <= 0.0:
        raise ParameterError(f"b0 must be positive, got {b0}")
    b0c = b0_critical(bseq)
    if math.isinf(b0c):
        rho = rho_of_b0(bseq, b0)
        m = return_density(bseq, b0, rho)
        return GibbsPoint(b0, b0c, rho, -math.log(rho), m, "no-transition")
    if b0 > b0c:
        return GibbsPoint(b0, b0c, 1.0, 0.0, 0.0, "delocalized")
    if b0 == b0c:
        return GibbsPoint(b0, b0c, 1.0, 0.0, return_density(bseq, b0, 1.0),
                          "critical")
    rho = rho_of_b0(bseq, b0)
    return GibbsPoint(b0, b0c, rho, -math.log(rho),
                      return_density(bseq, b0, rho), "localized")


@dataclass
class LocalizedWalk:
    """Positive-recurrent walk representation of the localized interface.

    p[n]/q[n] are the up/down probabilities at height n (p[0] = 1 at the
    reflecting wall), nu[n] the stationary occupation of height n, with
    nu[0] equal to the return density m.  residual records how far the
    contact row is from closing the probability flow exactly (a solver
    quality diagnostic).
    """

    b0: float
    rho: float
    m: float
    p: np.ndarray
    q: np.ndarray
    nu: np.ndarray
    v: np.ndarray
    residual: float


def localized_walk(bseq: PotentialSeq, b0: float, nmax: int,
                   rho: float | None = None) -> LocalizedWalk:
    """Walk of the localized phase up to height nmax (b_0 < b_0^c)."""
    if rho is None:
        rho = rho_of_b0(bseq, b0)
    sol = minimal_solution(bseq, rho, p_store=nmax + 2)
    if isinstance(sol, NotTransient):
        raise RegimeError(f"no positive solution at rho={rho}")
    b = bseq.b_array(nmax + 1)
    sq01 = 2.0 * math.sqrt(b0 * b[1])
    v = np.empty(nmax + 2)
    v[0] = 1.0
    v[1:] = sol.values[1: nmax + 2] / sq01
    p = np.empty(nmax + 1)
    q = np.empty(nmax + 1)
    p[0] = 1.0
    q[0] = 0.0
    n = np.arange(1, nmax + 1)
    sqbb = np.sqrt(b[n] * b[n + 1])
    p[1:] = v[n + 1] / (2.0 * rho * sqbb * v[n])
    q[1:] = 1.0 - p[1:]
    residual = abs(v[1] / (2.0 * rho * math.sqrt(b0 * b[1])) - 1.0)
    if math.isinf(sol.sum_sq):
        raise RegimeError("interface is not localized at this b0")
    total = 1.0 + sol.sum_sq / (sq01 * sq01)
    nu = v[: nmax + 1] ** 2 / total
    m = 1.0 / total
    return LocalizedWalk(b0, rho, m, p, q, nu, v[: nmax + 1], residual)


def truncated_spectrum(bseq: PotentialSeq, b0: float, size: int, *,
                       tol: float = 1e-12, max_iter: int = 200_000) -> float:
    """Largest eigenvalue of the size x size corner of the contact operator.

    The operator couples heights 0..size-1 with off-diagonal entries
    1/(2 sqrt(b_i b_{i+1})) (b at index 0 being the contact weight b_0).
    Power iteration runs on its square, whose leading eigenvalue is the
    square of the requested one; it increases with size towards rho(b_0).
    """
    if size < 1:
        raise ParameterError("size >= 1 required")
    if b0 <= 0.0:
        raise ParameterError(f"b0 must be positive, got {b0}")
    if size == 1:
        return 0.0
    b = np.empty(size)
    b[0] = b0
    b[1:] = bseq.b_array(size - 1)[1:]
    d = 1.0 / (2.0 * np.sqrt(b[:-1] * b[1:]))

    def apply_q(x: np.ndarray) -> np.ndarray:
        y = np.zeros_like(x)
        y[:-1] += d * x[1:]
        y[1:] += d * x[:-1]
        return y

    x = np.full(size, 1.0 / math.sqrt(size))
    lam = 0.0
    for _ in range(max_iter):
        z = apply_q(apply_q(x))
        lam_new = float(x @ z)
        nz = float(np.linalg.norm(z))
        if nz == 0.0:
            return 0.0
        x = z / nz
        if abs(lam_new - lam) <= tol * max(abs(lam_new), 1e-300):
            return math.sqrt(max(lam_new, 0.0))
        lam = lam_new
    raise ConvergenceError("power iteration did not settle")
