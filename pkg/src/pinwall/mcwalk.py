"""Monte Carlo sampling and exact small-system enumeration.

Two validation routes that bypass the spectral solver: direct simulation
of the height chain built by `localized_walk`, and exhaustive weighted
sums over every height path of a short system.  Both produce statistics
(return density, occupation law, partition functions) that the solver
predicts in closed form, so agreement is an end-to-end check of the
whole stack rather than of one formula.

Random numbers come from numpy's PCG64, keyed through SeedSequence with
the pair (seed, stream): replicas with distinct stream indices are
statistically independent and each is bit-reproducible on its own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ResourceError
from .potentials import PotentialSeq
from .transfer import LocalizedWalk

__all__ = [
    "WalkStats",
    "ExactEnsemble",
    "sample_walk",
    "kernel_return_probability",
    "enumerate_sos",
    "finite_size_m",
    "ENUM_CAP",
]

# exhaustive summation cap: 2^24 paths would be feasible directly, and the
# equivalent layered sum used here is far cheaper, but results past this
# length add nothing the asymptotic solver does not already give
ENUM_CAP = 24

# batch count for batch-means error bars on autocorrelated series
N_BATCHES = 100


@dataclass(frozen=True, eq=False)
class WalkStats:
    """Counting statistics of one simulated trajectory.

    occupation[n] counts visits to height n among steps 1..steps, so the
    histogram mass is exactly `steps` and occupation[0] repeats
    return_count.  Standard errors come from batch means over n_batches
    equal blocks (nan when fewer than two blocks fit); any leftover
    steps still count toward the histogram.
    """

    steps: int
    return_count: int
    occupation: np.ndarray
    return_se: float
    occupation_se: np.ndarray
    n_batches: int
    seed: int
    stream: int

    @property
    def return_fraction(self) -> float:
        """Fraction of steps spent at the wall, the empirical m."""
        return self.return_count / self.steps

    @property
    def occupation_fraction(self) -> np.ndarray:
        return self.occupation / self.steps

    @property
    def even_origin_fraction(self) -> float:
        """Empirical chance of sitting at the wall at an even time.

        Returns happen only at even times (the chain has period two), so
        this is the return count over the even-time count.
        """
        if self.steps < 2:
            return math.nan
        return self.return_count / (self.steps // 2)

    @property
    def even_origin_se(self) -> float:
        return 2.0 * self.return_se


def sample_walk(walk: LocalizedWalk, steps: int, seed: int,
                stream: int = 0) -> WalkStats:
    """Simulate the height chain from the wall for a fixed step count.

    The trajectory starts at height 0, steps up from height n with
    probability walk.p[n] (certainty at the wall) and down otherwise,
    and is deterministic for a fixed (seed, stream) pair.  Climbing past
    the top of the walk's height table aborts with a resource error
    rather than biasing the statistics; the stationary law decays
    geometrically, so a table a few dozen levels above the typical
    height makes that event astronomically unlikely.
    """
    if steps < 1:
        raise ParameterError(f"steps >= 1 required, got {steps}")
    if seed < 0 or stream < 0:
        raise ParameterError("seed and stream must be nonnegative")
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([seed, stream])))
    prob = walk.p.tolist()
    top = len(prob) - 1
    n_batches = min(N_BATCHES, steps)
    batch = steps // n_batches
    counts = np.zeros((n_batches + 1, top + 1), dtype=np.int64)
    x = 0
    for b in range(n_batches + 1):
        size = batch if b < n_batches else steps - n_batches * batch
        if size == 0:
            continue
        row = [0] * (top + 1)
        for u in rng.random(size).tolist():
            x = x + 1 if u < prob[x] else x - 1
            if x > top:
                raise ResourceError(
                    f"trajectory climbed past height {top}; rebuild the "
                    "walk with a taller table")
            row[x] += 1
        counts[b] = row
    occupation = counts.sum(axis=0)
    if n_batches >= 2:
        fractions = counts[:n_batches] / batch
        se = fractions.std(axis=0, ddof=1) / math.sqrt(n_batches)
    else:
        se = np.full(top + 1, math.nan)
    return WalkStats(steps, int(occupation[0]), occupation, float(se[0]),
                     se, n_batches, seed, stream)


def kernel_return_probability(walk: LocalizedWalk, steps: int) -> float:
    """P(X_steps = 0 | X_0 = 0), by exact powers of the walk kernel.

    Vector propagation over heights, no sampling noise; the horizon must
    fit inside the walk's height table so that no probability mass ever
    reaches the truncation edge.
    """
    if steps < 0:
        raise ParameterError(f"steps >= 0 required, got {steps}")
    top = len(walk.p) - 1
    if steps > top:
        raise ResourceError(
            f"horizon {steps} exceeds the height table (top {top})")
    dist = np.zeros(top + 1)
    dist[0] = 1.0
    nxt = np.empty_like(dist)
    for _ in range(steps):
        nxt[:] = 0.0
        nxt[1:] += dist[:-1] * walk.p[:-1]
        nxt[:-1] += dist[1:] * walk.q[1:]
        dist, nxt = nxt, dist
    return float(dist[0])


@dataclass(frozen=True, eq=False)
class ExactEnsemble:
    """Exact statistics of one finite system, by layered summation.

    z is the full weighted sum over height paths; expected_returns the
    mean number of wall contacts among interior sites (1..n_steps-1 for
    a bridge, 1..n_steps with a free end); end_law the distribution of
    the final height (a point mass at 0 for a bridge).  A bridge of odd
    length is empty by parity: z = 0, expected_returns nan, end_law all
    zero.
    """

    n_steps: int
    boundary: str
    z: float
    expected_returns: float
    end_law: np.ndarray


def _check_boundary(boundary: str) -> None:
    if boundary not in ("bridge", "free"):
        raise ParameterError(
            f"boundary must be 'bridge' or 'free', got {boundary!r}")


def enumerate_sos(bseq: PotentialSeq, b0: float, n_steps: int,
                  boundary: str) -> ExactEnsemble:
    """Sum every height path of a short system exactly.

    Paths start at the wall, move by one unit per step, stay nonnegative
    and (for a bridge) end at the wall.  Each path carries weight
    2^(-n_steps) times the product of 1/b over all n_steps+1 visited
    sites, with the contact weight 1/b0 at height zero.  The layered
    forward/backward sums reproduce the exhaustive path sum exactly,
    site marginals included.
    """
    if b0 <= 0.0:
        raise ParameterError(f"b0 > 0 required, got {b0}")
    if n_steps < 1:
        raise ParameterError(f"n_steps >= 1 required, got {n_steps}")
    if n_steps > ENUM_CAP:
        raise ResourceError(
            f"n_steps {n_steps} exceeds the enumeration cap {ENUM_CAP}")
    _check_boundary(boundary)
    top = n_steps
    binv = np.empty(top + 1)
    binv[0] = 1.0 / b0
    if top >= 1:
        binv[1:] = 1.0 / bseq.b_array(top)[1:]
    step = np.zeros((top + 1, top + 1))
    idx = np.arange(top)
    step[idx, idx + 1] = 0.5 * binv[idx + 1]
    step[idx + 1, idx] = 0.5 * binv[idx]
    fwd = np.zeros((n_steps + 1, top + 1))
    fwd[0, 0] = binv[0]
    for l in range(1, n_steps + 1):
        fwd[l] = fwd[l - 1] @ step
    bwd = np.zeros((n_steps + 1, top + 1))
    if boundary == "bridge":
        bwd[n_steps, 0] = 1.0
    else:
        bwd[n_steps] = 1.0
    for l in range(n_steps - 1, -1, -1):
        bwd[l] = step @ bwd[l + 1]
    z = float(fwd[n_steps] @ bwd[n_steps])
    if z == 0.0:
        return ExactEnsemble(n_steps, boundary, 0.0, math.nan,
                             np.zeros(top + 1))
    interior_hi = n_steps - 1 if boundary == "bridge" else n_steps
    visits = float(fwd[1:interior_hi + 1, 0] @ bwd[1:interior_hi + 1, 0]) / z
    end_law = fwd[n_steps] * bwd[n_steps] / z
    return ExactEnsemble(n_steps, boundary, z, visits, end_law)


def finite_size_m(bseq: PotentialSeq, b0: float, n_list,
                  boundary: str) -> list:
    """Mean interior return density of finite systems, exactly.

    For bridges, n counts half the length: the system has 2n steps and
    2n - 1 interior sites.  With a free end the system has n steps and
    all n non-initial sites count.  Both sequences trend toward the
    infinite-volume return density as n grows.
    """
    _check_boundary(boundary)
    out = []
    for n in n_list:
        if n < 1:
            raise ParameterError(f"n >= 1 required, got {n}")
        if boundary == "bridge":
            ens = enumerate_sos(bseq, b0, 2 * n, "bridge")
            out.append((n, ens.expected_returns / (2 * n - 1)))
        else:
            ens = enumerate_sos(bseq, b0, n, "free")
            out.append((n, ens.expected_returns / n))
    return out
