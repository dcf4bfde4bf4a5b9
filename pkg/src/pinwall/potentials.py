"""Pinning-potential families.

A potential is the positive sequence b_n (n >= 1) of site weights seen by
the interface away from the wall, with b_n -> 1 at infinity like
b_n = 1 - w/n^2 + O(n^{-2-zeta}).  The strength w of the 1/n^2 tail and the
remainder exponent zeta travel with the sequence as a `TailSpec`.

Families:

* inverse-square   b_n = 1 - w/n^2 (exact)
* hypergeometric   two-parameter family (a, s) with w = s(1-s)/2 whose
                   transfer problem is solvable in closed form
* blocked          a short explicit head glued onto an inverse-square tail
* walk-derived     built from an upward-probability sequence p_n of a
                   reflected zero-drift random walk through
                   b_n b_{n+1} = 1/(4 p_n q_{n+1})

Walk helpers cover the discrete Bessel walk, its homographic approximation,
and the duality d <-> 2 - d that preserves w = (d-1)(3-d)/8.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .errors import ParameterError

__all__ = [
    "TailSpec",
    "PotentialSeq",
    "WalkSpec",
    "inverse_square_b",
    "inverse_square_potential",
    "hyper_b",
    "hyper_potential",
    "blocked_potential",
    "bessel_p",
    "bessel_walk",
    "homographic_params",
    "homographic_p",
    "homographic_walk",
    "custom_walk",
    "wall_dual",
    "walk_to_b",
]


@dataclass(frozen=True)
class TailSpec:
    """Tail data of a potential: b_n = 1 - w/n^2 + O(n^{-2-zeta})."""

    w: float
    zeta: float = 1.0


class PotentialSeq:
    """Lazily cached potential sequence with its tail data.

    The master representation is the deviation x_n = b_n - 1, which the
    family fills produce with full relative precision (via expm1 of an
    analytic form of ln b_n).  Deep in the tail x_n ~ -w/n^2 sits far
    below the spacing of doubles around 1, so near-critical solvers that
    consume x_n see the tail cleanly where a b_n array could not resolve
    it.  Values are computed in vectorized batches and cached; the cache
    only grows (geometric doubling) and is guarded by a lock, so
    concurrent readers are safe.  Index 0 of the cached arrays is a nan
    placeholder: the contact weight b_0 is not part of the sequence.
    """

    def __init__(self, family: str, params: dict, tail: TailSpec,
                 fill: Callable[[int, int], np.ndarray]):
        self.family = family
        self.params = dict(params)
        self.tail = tail
        self._fill = fill
        self._lock = threading.Lock()
        self._x = np.full(2, np.nan)
        self._sqb = np.full(2, np.nan)
        self._x[1:2] = fill(1, 1)
        self._sqb[1] = math.sqrt(1.0 + self._x[1])

    def _ensure(self, nmax: int) -> None:
        if nmax < self._x.shape[0]:
            return
        with self._lock:
            have = self._x.shape[0] - 1
            if nmax <= have:
                return
            new_top = max(nmax, 2 * have)
            fresh = self._fill(have + 1, new_top)
            if np.any(fresh <= -1.0) or not np.all(np.isfinite(fresh)):
                bad = int(np.argmax((fresh <= -1.0) | ~np.isfinite(fresh)))
                raise ParameterError(
                    f"{self.family} potential is not positive at "
                    f"n={have + 1 + bad}")
            x = np.concatenate([self._x, fresh])
            sqb = np.concatenate([self._sqb, np.sqrt(1.0 + fresh)])
            # publish both snapshots atomically enough for readers holding
            # references to the old buffers
            self._x = x
            self._sqb = sqb

    def b(self, n: int) -> float:
        """Site weight b_n, n >= 1."""
        if n < 1:
            raise ParameterError(f"b_n is defined for n >= 1, got {n}")
        self._ensure(n)
        return 1.0 + float(self._x[n])

    def x(self, n: int) -> float:
        """Deviation b_n - 1, n >= 1, with full relative precision."""
        if n < 1:
            raise ParameterError(f"x_n is defined for n >= 1, got {n}")
        self._ensure(n)
        return float(self._x[n])

    def b_array(self, nmax: int) -> np.ndarray:
        """Fresh array [nan, b_1, ..., b_nmax]."""
        self._ensure(nmax)
        return 1.0 + self._x[: nmax + 1]

    def x_array(self, nmax: int) -> np.ndarray:
        """View of [nan, b_1 - 1, ..., b_nmax - 1]; do not write into it."""
        self._ensure(nmax)
        return self._x[: nmax + 1]

    def sqrt_b_array(self, nmax: int) -> np.ndarray:
        """View of [nan, sqrt(b_1), ..., sqrt(b_nmax)]."""
        self._ensure(nmax)
        return self._sqb[: nmax + 1]

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        ps = ", ".join(f"{k}={v}" for k, v in self.params.items())
        return f"PotentialSeq({self.family}: {ps}, w={self.tail.w:g})"


# ---------------------------------------------------------------------------
# inverse-square family

def inverse_square_b(w: float, n: int) -> float:
    """b_n = 1 - w/n^2 for the pure inverse-square potential."""
    if n < 1:
        raise ParameterError("n >= 1 required")
    if w >= 1.0:
        raise ParameterError(f"w must be < 1 so that b_1 > 0, got {w}")
    return 1.0 - w / (n * n)


def inverse_square_potential(w: float) -> PotentialSeq:
    if w >= 1.0:
        raise ParameterError(f"w must be < 1 so that b_1 > 0, got {w}")

    def fill(lo: int, hi: int) -> np.ndarray:
        n = np.arange(lo, hi + 1, dtype=np.float64)
        return -w / (n * n)

    # the 1/n^2 form is exact, so any positive remainder exponent is valid
    return PotentialSeq("invsq", {"w": w}, TailSpec(w, zeta=2.0), fill)


# ---------------------------------------------------------------------------
# hypergeometric family

def _check_hyper(a: float, s: float) -> None:
    if not a > 0.75:
        raise ParameterError(f"hyper family needs a > 3/4, got a={a}")
    if not s >= 0.5:
        raise ParameterError(f"hyper family needs s >= 1/2, got s={s}")


def hyper_b(a: float, s: float, n: int) -> float:
    """Site weight of the solvable (a, s) family, via log-gamma.

    b_n = (s + n - 2 + 2a) G(a + n/2 - 1/2) G(s + a + n/2 - 1)
          / (2 G(a + n/2) G(s + a + n/2 - 1/2)),   G = Gamma.
    """
    _check_hyper(a, s)
    if n < 1:
        raise ParameterError("n >= 1 required")
    h = 0.5 * n
    lg = (gammaln(a + h - 0.5) + gammaln(s + a + h - 1.0)
          - gammaln(a + h) - gammaln(s + a + h - 0.5))
    return float((s + n - 2.0 + 2.0 * a) * 0.5 * np.exp(lg))


_BERNOULLI = (1.0 / 6, -1.0 / 30, 1.0 / 42, -1.0 / 30, 5.0 / 66,
              -691.0 / 2730, 7.0 / 6)
_TAIL_ORDER = 14


def _lgamma_half_series(K: float, size: int) -> tuple[np.ndarray, np.ndarray]:
    """Large-n pieces of ln Gamma((n+K)/2) as power series in 1/n.

    Returns (ln_part, plain_part); entry [i] multiplies n^(1-i), the first
    vector additionally times ln n.  Built from the Stirling expansion with
    ln(n+K) expanded, so sums of these cancel their large pieces exactly
    in exact arithmetic.
    """
    lnv = np.zeros(size)
    t = np.zeros(size)
    lnv[0] += 0.5                  # ((n+K-1)/2) ln n
    lnv[1] += 0.5 * (K - 1.0)
    for j in range(1, size):       # ((n+K-1)/2) ln(1+K/n)
        c = (-1.0) ** (j + 1) * K ** j / j
        t[j] += 0.5 * c
        if j + 1 < size:
            t[j + 1] += 0.5 * (K - 1.0) * c
    ln2 = math.log(2.0)
    t[0] += -0.5 * ln2 - 0.5       # -((n+K-1)/2) ln2 - (n+K)/2 + ln(2 pi)/2
    t[1] += -0.5 * (K - 1.0) * ln2 - 0.5 * K + 0.5 * math.log(2.0 * math.pi)
    for k, b2k in enumerate(_BERNOULLI, start=1):
        q = 2 * k - 1
        if q + 1 >= size:
            break
        coef = b2k / (2 * k * (2 * k - 1)) * 2.0 ** q
        c = 1.0
        m = 0
        while q + m + 1 < size:    # (n+K)^{-q} binomial expansion
            t[q + m + 1] += coef * c
            c *= -(q + m) * K / (m + 1.0)
            m += 1
    return lnv, t


def _hyper_tail_coeffs(a: float, s: float) -> np.ndarray:
    """Coefficients e such that ln b_n = sum_{j>=2} e[j] n^{-j} at large n.

    The n ln n, n, ln n, constant and 1/n pieces of the four log-gamma
    expansions cancel identically; the assertion guards against any slip
    in the composition.
    """
    size = _TAIL_ORDER + 2
    lnv = np.zeros(size)
    t = np.zeros(size)
    A = 2.0 * a + s - 2.0
    B = 2.0 * a
    C = 2.0 * a + 2.0 * s - 1.0
    lnv[1] += 1.0                  # ln(n+A) = ln n + ln(1+A/n)
    for j in range(1, size - 1):
        t[j + 1] += (-1.0) ** (j + 1) * A ** j / j
    t[1] -= math.log(2.0)
    for K, sign in ((B - 1.0, 1.0), (C - 1.0, 1.0), (B, -1.0), (C, -1.0)):
        l2, t2 = _lgamma_half_series(K, size)
        lnv += sign * l2
        t += sign * t2
    if not (np.all(np.abs(lnv) < 1e-7) and np.all(np.abs(t[:3]) < 1e-7)):
        raise AssertionError("tail series cancellation failed")
    e = np.zeros(_TAIL_ORDER + 1)
    e[2:] = t[3:_TAIL_ORDER + 2]
    return e


def hyper_potential(a: float, s: float) -> PotentialSeq:
    """Lazy site-weight sequence for the (a, s) family.

    Below the switch depth the fill evaluates the log-gamma form directly;
    beyond it, ln b_n comes from its asymptotic 1/n expansion evaluated by
    Horner, which keeps relative precision in the 1/n^2 tail at any depth.
    Direct log-gamma carries absolute noise ~ n*eps*log n in ln b, which
    past n ~ 1e4 drowns the tail; chained-ratio fills accumulate a smooth
    random drift that acts like a spurious long-range potential.  The
    hybrid avoids both.
    """
    _check_hyper(a, s)
    e = _hyper_tail_coeffs(a, s)
    # the 1/n series is already at machine precision once n exceeds 8x the
    # largest gamma shift, so keep the noisy log-gamma head as short as the
    # series allows
    switch = max(64, int(8.0 * (2.0 * a + 2.0 * s)))

    def fill(lo: int, hi: int) -> np.ndarray:
        out = np.empty(hi - lo + 1)
        if lo <= min(hi, switch - 1):
            n = np.arange(lo, min(hi, switch - 1) + 1, dtype=np.float64)
            h = 0.5 * n
            lnb = (np.log(0.5 * (s + n - 2.0 + 2.0 * a))
                   + gammaln(a + h - 0.5) + gammaln(s + a + h - 1.0)
                   - gammaln(a + h) - gammaln(s + a + h - 0.5))
            out[: n.size] = np.expm1(lnb)
        if hi >= switch:
            n = np.arange(max(lo, switch), hi + 1, dtype=np.float64)
            inv = 1.0 / n
            acc = np.full(n.shape, e[_TAIL_ORDER])
            for j in range(_TAIL_ORDER - 1, 1, -1):
                acc = e[j] + acc * inv
            out[max(lo, switch) - lo:] = np.expm1(acc * inv * inv)
        return out

    w = 0.5 * s * (1.0 - s)
    return PotentialSeq("hyper", {"a": a, "s": s}, TailSpec(w, zeta=1.0), fill)


# ---------------------------------------------------------------------------
# blocked family (explicit head, inverse-square tail)

def blocked_potential(head: tuple[float, ...], w: float) -> PotentialSeq:
    """Potential with b_1..b_k given explicitly and 1 - w/n^2 beyond."""
    head = tuple(float(x) for x in head)
    if not head:
        raise ParameterError("head must contain at least b_1")
    if any(x <= 0.0 for x in head):
        raise ParameterError("head weights must be positive")
    if w >= 1.0:
        raise ParameterError(f"w must be < 1, got {w}")
    k = len(head)

    def fill(lo: int, hi: int) -> np.ndarray:
        n = np.arange(lo, hi + 1, dtype=np.float64)
        out = -w / (n * n)
        for i in range(lo, min(hi, k) + 1):
            out[i - lo] = head[i - 1] - 1.0
        return out

    return PotentialSeq("blocked", {"head": head, "w": w},
                        TailSpec(w, zeta=2.0), fill)


# ---------------------------------------------------------------------------
# walks

@dataclass
class WalkSpec:
    """Reflected random walk given by its upward probabilities.

    p(n) is the probability to step n -> n+1 for n >= 1; the walk reflects
    at the wall (p(0) = 1).  `lam` is the tail coefficient in
    p_n ~ (1 + lam/n)/2, fixing w = lam(1 - lam)/2 for the derived
    potential.
    """

    kind: str
    params: dict
    pfunc: Callable[[np.ndarray], np.ndarray]
    lam: float

    def p(self, n: int) -> float:
        if n == 0:
            return 1.0
        if n < 0:
            raise ParameterError("n >= 0 required")
        return float(self.pfunc(np.array([n], dtype=np.float64))[0])

    def p_array(self, nmax: int) -> np.ndarray:
        """[p_0, ..., p_nmax] with the reflecting p_0 = 1."""
        out = np.empty(nmax + 1)
        out[0] = 1.0
        if nmax >= 1:
            out[1:] = self.pfunc(np.arange(1, nmax + 1, dtype=np.float64))
        if np.any(out[1:] <= 0.0) or np.any(out[1:] >= 1.0):
            raise ParameterError(f"{self.kind} walk leaves (0,1)")
        return out


def bessel_p(x0: float, d: float, n: int) -> float:
    """Upward probability of the discrete Bessel-like walk.

    p_n = (n+x0)^{d-1} / ((n+x0)^{d-1} + (n-1+x0)^{d-1}) for n >= 1, and
    p_0 = 1 at the reflecting wall.
    """
    if x0 <= 0.0:
        raise ParameterError(f"x0 > 0 required, got {x0}")
    if n == 0:
        return 1.0
    if n < 0:
        raise ParameterError("n >= 0 required")
    up = (n + x0) ** (d - 1.0)
    dn = (n - 1.0 + x0) ** (d - 1.0)
    return up / (up + dn)


def bessel_walk(x0: float, d: float) -> WalkSpec:
    if x0 <= 0.0:
        raise ParameterError(f"x0 > 0 required, got {x0}")

    def pfunc(n: np.ndarray) -> np.ndarray:
        up = (n + x0) ** (d - 1.0)
        dn = (n - 1.0 + x0) ** (d - 1.0)
        return up / (up + dn)

    return WalkSpec("bessel", {"x0": x0, "d": d}, pfunc, lam=0.5 * (d - 1.0))


def homographic_params(x0: float, d: float) -> tuple[float, float]:
    """Coefficients (A, B) of the homographic walk matching the Bessel one.

    The homographic walk p_n = (n + x0 + A)/(2(n + x0 + B)) shares p_1 and
    the 1/n tail with the Bessel walk of the same (x0, d); B = A - (d-1)/2.
    The drift-free case d = 1 degenerates to (0, 0), i.e. p_n = 1/2.
    """
    if x0 <= 0.0:
        raise ParameterError(f"x0 > 0 required, got {x0}")
    p1 = bessel_p(x0, d, 1)
    if abs(p1 - 0.5) < 1e-15:
        return 0.0, 0.0
    a = ((3.0 + 2.0 * x0 - d) * p1 - (1.0 + x0)) / (1.0 - 2.0 * p1)
    return a, a - 0.5 * (d - 1.0)


def homographic_p(x0: float, a: float, b: float, n: int) -> float:
    """p_n = (n + x0 + a)/(2(n + x0 + b)), p_0 = 1."""
    if n == 0:
        return 1.0
    if n < 0:
        raise ParameterError("n >= 0 required")
    return (n + x0 + a) / (2.0 * (n + x0 + b))


def homographic_walk(x0: float, a: float, b: float) -> WalkSpec:
    # p_n stays in (0,1) for all n >= 1 iff it does at n = 1
    if not 0.0 < homographic_p(x0, a, b, 1) < 1.0:
        raise ParameterError("homographic walk leaves (0,1) at n=1")

    def pfunc(n: np.ndarray) -> np.ndarray:
        return (n + x0 + a) / (2.0 * (n + x0 + b))

    return WalkSpec("homographic", {"x0": x0, "a": a, "b": b}, pfunc,
                    lam=a - b)


def custom_walk(pfunc: Callable[[np.ndarray], np.ndarray],
                lam: float) -> WalkSpec:
    """Wrap an arbitrary vectorized p_n provider (n >= 1) with its tail."""
    return WalkSpec("custom", {}, pfunc, lam=lam)


def wall_dual(d: float) -> float:
    """Dual dimension d <-> 2 - d; both walks induce the same tail w."""
    return 2.0 - d


# ---------------------------------------------------------------------------
# walk -> potential

#: partial-product length for the b_0* limit (three Richardson levels)
_B0STAR_L = 1 << 19


def _b0_star(walk: WalkSpec) -> float:
    """The unique contact weight making b_n -> 1.

    b_0* = 1/v with v = prod_{l>=1} p_{2l-2} q_{2l-1} / (p_{2l-1} q_{2l});
    the partial products converge like 1/L, removed here by Richardson
    extrapolation at three doubling lengths.
    """
    nmax = 2 * _B0STAR_L
    p = walk.p_array(nmax)
    q = 1.0 - p
    l = np.arange(1, _B0STAR_L + 1)
    terms = (np.log(p[2 * l - 2]) + np.log(q[2 * l - 1])
             - np.log(p[2 * l - 1]) - np.log(q[2 * l]))
    csum = np.cumsum(terms)
    v4, v2, v1 = (math.exp(csum[_B0STAR_L // 4 - 1]),
                  math.exp(csum[_B0STAR_L // 2 - 1]),
                  math.exp(csum[_B0STAR_L - 1]))
    r2, r1 = 2.0 * v2 - v4, 2.0 * v1 - v2          # kill the 1/L term
    v = r1 + (r1 - r2) / 3.0                       # and the 1/L^2 term
    return 1.0 / v


def walk_to_b(walk: WalkSpec) -> tuple[float, PotentialSeq]:
    """Potential of the interface whose critical shape is the given walk.

    Returns (b_0*, potential): the recurrence b_n b_{n+1} = 1/(4 p_n q_{n+1})
    determines the sequence from the contact weight, and b_0* is the unique
    choice for which b_n -> 1.  Only the zero-drift construction is
    supported; the corresponding tail is w = lam(1 - lam)/2.
    """
    b0s = _b0_star(walk)

    def fill(lo: int, hi: int) -> np.ndarray:
        # log b_{n+1} = (-1)^n [sum_{j<=n} (-1)^j log r_j - log b_0],
        # r_j = 1/(4 p_j q_{j+1}); an alternating cumsum gives the batch
        p = walk.p_array(hi + 1)
        q = 1.0 - p
        j = np.arange(0, hi)
        logr = -(math.log(4.0) + np.log(p[j]) + np.log(q[j + 1]))
        sign = np.where(j % 2 == 0, 1.0, -1.0)
        alt = np.cumsum(sign * logr)
        logb = np.where(j % 2 == 0, 1.0, -1.0) * (alt - math.log(b0s))
        return np.expm1(logb[lo - 1: hi])

    lam = walk.lam
    w = 0.5 * lam * (1.0 - lam)
    seq = PotentialSeq(f"walk[{walk.kind}]", dict(walk.params),
                       TailSpec(w, zeta=1.0), fill)
    return b0s, seq
