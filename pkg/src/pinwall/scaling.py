"""Critical-exponent extraction and the three-zone near-critical profile.

The squared minimal solution summed over depth, S(eps) at decay rate
1 + eps, diverges like eps^(-theta) with theta = 1 - sqrt(1 - 8w)/2 for
tail strengths between the marginal points -3/8 < w < 1/8; through the
implicit equation this turns into the pinned-fraction law
m ~ gap^(theta/(1-theta)) near the transition.  Both exponents are
extracted here by log-log regression so the closed forms can be checked
against pure numerics.  The zone analysis slices the near-critical
profile into an inner window that still looks critical, a Bessel-shaped
crossover around depth eps^(-1/2), and a geometric tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import kv

from .errors import ParameterError, RegimeError
from .hyper import m_closed
from .potentials import PotentialSeq
from .transfer import (NotTransient, asymptotic_roots, minimal_solution,
                       return_density, rho_of_b0)

__all__ = [
    "ExponentFit",
    "ZoneReport",
    "s2_of_eps",
    "fit_theta",
    "fit_m_exponent",
    "theta_of_w",
    "zone_check",
]

#: fitted |slope| below which a power law is not claimed
MARGINAL_SLOPE = 0.05


def theta_of_w(w: float) -> float:
    """Divergence exponent of S(eps) predicted by the tail strength.

    Negative values (w < -3/8, S stays bounded) and values past 1/2 up to
    the w = 1/8 endpoint are returned as the formula gives them; nan when
    1 - 8w < 0 and no transition exists.
    """
    disc = 1.0 - 8.0 * w
    if disc < 0.0:
        return math.nan
    return 1.0 - 0.5 * math.sqrt(disc)


@dataclass(frozen=True)
class ExponentFit:
    """Log-log regression over a decreasing grid of small parameters.

    small/observable hold the grid and the measured values; slope is the
    fitted exponent (theta for S(eps), theta/(1-theta) for m).  residual
    is the max |log deviation| from the fitted line.  reference carries
    the closed-form exponent predicted by the tail strength (nan when
    undefined).  marginal flags fits too flat to claim a power law; for
    a first-order family jump holds the extrapolated density limit and
    the regression fields are nan.
    """

    small: np.ndarray
    observable: np.ndarray
    slope: float
    residual: float
    reference: float
    marginal: bool = False
    jump: float | None = None


@dataclass(frozen=True)
class ZoneReport:
    """Per-zone deviations of the profile at decay rate 1 + eps.

    n_scale is the crossover depth floor(eps^(-1/2)).  zone1_dev is the
    max relative deviation from the critical profile over depths up to
    n_scale/ln(1/eps); zone2_dev the max relative deviation from the
    matched Bessel form c sqrt(n) K_nu(n sqrt(2 eps)) over
    [n_scale/2, 2 n_scale]; zone3_dev the max absolute deviation of the
    step ratio from the geometric rate x_minus over [3 n_scale,
    10 n_scale].
    """

    eps: float
    n_scale: int
    zone1_dev: float
    zone2_dev: float
    zone3_dev: float


def _check_grid(grid, lo: float, hi: float, name: str) -> np.ndarray:
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim != 1 or g.size < 6:
        raise ParameterError(f"{name} needs at least 6 points")
    d = np.diff(g)
    if np.all(d > 0.0):
        g = g[::-1]
    elif not np.all(d < 0.0):
        raise ParameterError(f"{name} must be strictly monotone")
    if not (lo <= g[-1] and g[0] <= hi):
        raise ParameterError(f"{name} must lie inside [{lo}, {hi}]")
    if g[0] < 100.0 * g[-1]:
        raise ParameterError(f"{name} must span at least two decades")
    return g


def s2_of_eps(bseq: PotentialSeq, eps: float) -> float:
    """Sum of squared minimal-solution values at decay rate 1 + eps."""
    if eps <= 0.0:
        raise ParameterError(f"eps must be positive, got {eps}")
    sol = minimal_solution(bseq, 1.0 + eps)
    if isinstance(sol, NotTransient):
        raise RegimeError(
            f"no positive minimal solution at rho={1.0 + eps} "
            f"(family {bseq.family})")
    return sol.sum_sq


def fit_theta(bseq: PotentialSeq, eps_grid) -> ExponentFit:
    """Fit the divergence exponent of S(eps) on a grid in [1e-8, 1e-2].

    Least squares of -ln S against ln eps; the reference exponent comes
    from the tail strength.  Fits flatter than MARGINAL_SLOPE (bounded
    S for w < -3/8, or logarithmic growth at the w = -3/8 corner) are
    flagged marginal rather than read as power laws.
    """
    g = _check_grid(eps_grid, 1e-8, 1e-2, "eps grid")
    svals = np.array([s2_of_eps(bseq, e) for e in g])
    x = np.log(g)
    y = np.log(svals)
    coef = np.polyfit(x, y, 1)
    resid = float(np.max(np.abs(y - np.polyval(coef, x))))
    slope = -float(coef[0])
    return ExponentFit(g, svals, slope, resid, theta_of_w(bseq.tail.w),
                       marginal=abs(slope) < MARGINAL_SLOPE)


def _m_of_gap(bseq: PotentialSeq, b0c: float, gap: float) -> float:
    if bseq.family == "hyper":
        # the closed form reaches gaps where rho - 1 underflows; the
        # generic route is depth-limited to roughly rho - 1 > 1e-10
        return m_closed(bseq.params["a"], bseq.params["s"], b0c - gap)
    b0 = b0c - gap
    return return_density(bseq, b0, rho_of_b0(bseq, b0))


def _jump_extrapolate(gaps: np.ndarray, m: np.ndarray, w: float) -> float:
    """Limit of m at the transition from its gap expansion.

    The approach exponent is q = (sqrt(1-8w) - 2)/2 capped at 1 (an
    analytic term takes over beyond s = 5/2 in the solvable family).
    The three smallest gaps pin {1, g^q, g^q2}; accuracy degrades as
    w approaches -3/8 where q -> 0.
    """
    q = min(0.5 * (math.sqrt(1.0 - 8.0 * w) - 2.0), 1.0)
    g = gaps[::-1][:3]  # smallest first
    y = m[::-1][:3]
    if q < 0.05:
        return float(y[0])
    q2 = min(2.0 * q, 1.0) if q < 1.0 else 2.0
    if q2 - q < 0.1:
        a = np.vstack([np.ones(2), g[:2] ** q]).T
        return float(np.linalg.solve(a, y[:2])[0])
    a = np.vstack([np.ones(3), g ** q, g ** q2]).T
    return float(np.linalg.solve(a, y)[0])


def fit_m_exponent(bseq: PotentialSeq, b0c: float, gap_grid) -> ExponentFit:
    """Fit the pinned-fraction exponent on a gap grid in [1e-6, 1e-2].

    Log-log slope of m against the transition gap, with reference
    theta/(1-theta).  For w < -3/8 the transition is first order and the
    result reports the extrapolated jump instead of an exponent.
    """
    g = _check_grid(gap_grid, 1e-6, 1e-2, "gap grid")
    if not (math.isfinite(b0c) and b0c > 0.0):
        raise ParameterError(f"finite positive b0c required, got {b0c}")
    w = bseq.tail.w
    m = np.array([_m_of_gap(bseq, b0c, x) for x in g])
    if w < -0.375:
        return ExponentFit(g, m, math.nan, math.nan, math.nan,
                           jump=_jump_extrapolate(g, m, w))
    x = np.log(g)
    y = np.log(m)
    coef = np.polyfit(x, y, 1)
    resid = float(np.max(np.abs(y - np.polyval(coef, x))))
    slope = float(coef[0])
    theta = theta_of_w(w)
    ref = theta / (1.0 - theta) if theta < 1.0 else math.nan
    return ExponentFit(g, m, slope, resid, ref,
                       marginal=abs(slope) < MARGINAL_SLOPE)


def zone_check(bseq: PotentialSeq, eps: float) -> ZoneReport:
    """Slice the profile at decay rate 1 + eps into its three zones.

    Computes the minimal solution once out to ten crossover depths and
    reports the worst deviation inside each window; the Bessel constant
    is fixed by matching at the crossover depth itself, and the Bessel
    order is nu = sqrt(1/4 - 2w).  Requires eps <= 1e-4 so the windows
    are well separated.
    """
    if not 0.0 < eps <= 1e-4:
        raise ParameterError(f"eps in (0, 1e-4] required, got {eps}")
    n_scale = int(1.0 / math.sqrt(eps))
    n1_hi = max(1, int(n_scale / math.log(1.0 / eps)))
    n3_lo, n3_hi = 3 * n_scale, 10 * n_scale
    rho = 1.0 + eps

    sol = minimal_solution(bseq, rho, p_store=n3_hi + 1)
    if isinstance(sol, NotTransient):
        raise RegimeError(f"no positive minimal solution at rho={rho}")
    crit = minimal_solution(bseq, 1.0, p_store=n1_hi)
    if isinstance(crit, NotTransient):
        raise RegimeError(f"family {bseq.family} is not 1-transient")

    zone1 = float(np.max(np.abs(
        sol.values[1:n1_hi + 1] / crit.values[1:n1_hi + 1] - 1.0)))

    nu = math.sqrt(max(0.25 - 2.0 * bseq.tail.w, 0.0))
    k2 = math.sqrt(2.0 * eps)
    n2 = np.arange(n_scale // 2, 2 * n_scale + 1)
    bessel = np.sqrt(n2) * kv(nu, n2 * k2)
    cmatch = sol.values[n_scale] / (math.sqrt(n_scale) * kv(nu, n_scale * k2))
    zone2 = float(np.max(np.abs(
        cmatch * bessel / sol.values[n2[0]:n2[-1] + 1] - 1.0)))

    x_minus = asymptotic_roots(rho).x_minus
    ratio = sol.values[n3_lo + 1:n3_hi + 1] / sol.values[n3_lo:n3_hi]
    zone3 = float(np.max(np.abs(ratio - x_minus)))

    return ZoneReport(eps, n_scale, zone1, zone2, zone3)
