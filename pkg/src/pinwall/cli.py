"""Batch front end emitting CSV tables.

Commands wrap the solver stack for scripted sweeps: single-point
solves, critical-line and phase-diagram grids, exponent fits, profile
and zone dumps, trajectory simulation, exact enumeration.  Output is
plain CSV: one header row, comma delimiter, floats at 17 significant
digits with an `inf` literal for an infinite critical weight, so equal
configurations reproduce byte-identical files.  Diagnostics go to
stderr.  Exit codes: 0 success, 1 numeric failure, 2 usage error.

Families are named on the command line as `name:p1,p2[,p3]`, e.g.
`hyper:0.97,1.25`, `invsq:-0.5`, `blocked:0.2,0.1,0.0` (head weights
then the tail strength).  Grids are either `lo:hi:count` (evenly
spaced) or explicit comma-separated values.

Sweep commands fan grid points out over a thread pool whose size comes
from --threads, the PINWALL_THREADS variable, or the core count; rows
are always collected in input order, so the pool size never changes
the output.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import click
import numpy as np

from . import hyper, mcwalk, scaling
from .errors import (ConvergenceError, DivergenceError, ParameterError,
                     RegimeError, ResourceError)
from .potentials import (PotentialSeq, blocked_potential, hyper_potential,
                         inverse_square_potential)
from .transfer import (NotTransient, b0_critical, gibbs, localized_walk,
                       minimal_solution, rho_of_b0)

__all__ = [
    "RunConfig",
    "parse_family",
    "parse_grid",
    "cmd_solve",
    "cmd_critical_line",
    "cmd_phase_diagram",
    "cmd_exponent",
    "cmd_profile",
    "cmd_simulate",
    "cmd_enumerate",
    "main",
]

# w above this value has no real tail exponent pair, so sweep rows are
# skipped rather than computed
W_UPPER = 0.125

SKIP_NOTE = "skipped-above-upper-marginal"


# ---------------------------------------------------------------------------
# parsing and formatting


def parse_family(spec: str) -> PotentialSeq:
    """Parse `name:p1,p2[,p3]` into a potential family.

    Errors carry the character position of the offending token.
    """
    name, sep, rest = spec.partition(":")
    if not sep or not rest:
        raise ParameterError(
            f"family {spec!r}: expected 'name:params' with a ':' at "
            f"column {len(name)}")
    params = []
    pos = len(name) + 1
    for tok in rest.split(","):
        try:
            params.append(float(tok))
        except ValueError:
            raise ParameterError(
                f"family {spec!r}: bad number {tok!r} at column {pos}"
            ) from None
        pos += len(tok) + 1
    if name == "hyper":
        if len(params) != 2:
            raise ParameterError(
                f"family {spec!r}: hyper takes 2 parameters (a, s), "
                f"got {len(params)}")
        return hyper_potential(params[0], params[1])
    if name == "invsq":
        if len(params) != 1:
            raise ParameterError(
                f"family {spec!r}: invsq takes 1 parameter (w), "
                f"got {len(params)}")
        return inverse_square_potential(params[0])
    if name == "blocked":
        if len(params) < 2:
            raise ParameterError(
                f"family {spec!r}: blocked takes head weights then the "
                f"tail strength, got {len(params)} parameter(s)")
        return blocked_potential(tuple(params[:-1]), params[-1])
    raise ParameterError(
        f"family {spec!r}: unknown family {name!r} at column 0")


def parse_grid(spec: str) -> np.ndarray:
    """Parse `lo:hi:count` (evenly spaced) or `v1,v2,...` into an array."""
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ParameterError(
                f"grid {spec!r}: expected lo:hi:count with exactly two ':'")
        try:
            lo, hi = float(parts[0]), float(parts[1])
        except ValueError:
            raise ParameterError(
                f"grid {spec!r}: bad endpoint in {parts[0]!r}:{parts[1]!r}"
            ) from None
        try:
            count = int(parts[2])
        except ValueError:
            raise ParameterError(
                f"grid {spec!r}: bad count {parts[2]!r}") from None
        if count < 1:
            raise ParameterError(f"grid {spec!r}: count must be >= 1")
        return np.linspace(lo, hi, count)
    vals = []
    pos = 0
    for tok in spec.split(","):
        try:
            vals.append(float(tok))
        except ValueError:
            raise ParameterError(
                f"grid {spec!r}: bad number {tok!r} at column {pos}"
            ) from None
        pos += len(tok) + 1
    return np.asarray(vals)


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _render(header, rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(c) for c in row) for row in rows)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# invocation record


@dataclass
class RunConfig:
    """One validated command invocation.

    Built by the command-line layer, checked as a whole before any
    computation dispatches, so a typo in one flag never burns minutes
    of sweep time first.
    """

    command: str
    family: str | None = None
    numbers: dict = field(default_factory=dict)
    grids: dict = field(default_factory=dict)
    seed: int | None = None
    output: str | None = None
    threads: int = 0

    def pool_size(self) -> int:
        if self.threads:
            return self.threads
        env = os.environ.get("PINWALL_THREADS", "").strip()
        if env:
            try:
                n = int(env)
            except ValueError:
                raise ParameterError(
                    f"PINWALL_THREADS={env!r} is not an integer") from None
            if n < 1:
                raise ParameterError("PINWALL_THREADS must be >= 1")
            return n
        return os.cpu_count() or 1

    def validate(self) -> None:
        if self.threads < 0:
            raise ParameterError("--threads must be >= 1")
        num = self.numbers
        if self.family is not None:
            parse_family(self.family)
        for key in ("b0",):
            if key in num and not num[key] > 0.0:
                raise ParameterError(f"--{key} must be positive")
        if "a" in num and not num["a"] > 0.75:
            raise ParameterError("--a must exceed 3/4")
        if "steps" in num and num["steps"] < 1:
            raise ParameterError("--steps must be >= 1")
        if self.seed is not None and self.seed < 0:
            raise ParameterError("--seed must be nonnegative")
        if "stream" in num and num["stream"] < 0:
            raise ParameterError("--stream must be nonnegative")
        if "pmax" in num and num["pmax"] < 1:
            raise ParameterError("--pmax must be >= 1")
        if "height" in num and num["height"] < 8:
            raise ParameterError("--height must be >= 8")
        if "eps" in num and num["eps"] < 0.0:
            raise ParameterError("--eps must be >= 0")
        for key in ("w_grid", "u_grid", "zone_eps", "n_list", "grid"):
            if key in self.grids and len(self.grids[key]) == 0:
                raise ParameterError(f"empty {key.replace('_', '-')}")
        if "u_grid" in self.grids:
            if not np.all(np.isfinite(self.grids["u_grid"])):
                raise ParameterError("--u-grid entries must be finite")
        if "zone_eps" in self.grids:
            for eps in self.grids["zone_eps"]:
                if not 0.0 < eps <= 1e-4:
                    raise ParameterError(
                        f"--zone-eps must lie in (0, 1e-4], got {eps}")
        if "n_list" in self.grids:
            for n in self.grids["n_list"]:
                if not 1 <= n <= mcwalk.ENUM_CAP:
                    raise ParameterError(
                        f"--n must lie in 1..{mcwalk.ENUM_CAP}, got {n}")
        if "boundary" in num and num["boundary"] not in ("bridge", "free"):
            raise ParameterError("--boundary must be 'bridge' or 'free'")
        if "observable" in num and num["observable"] not in ("m", "sumsq"):
            raise ParameterError("--observable must be 'm' or 'sumsq'")


# ---------------------------------------------------------------------------
# command builders (header, rows, stderr notes)


def _family_b0c(bseq: PotentialSeq) -> float:
    if bseq.family == "hyper":
        return hyper.b0c_closed(bseq.params["a"], bseq.params["s"])
    return b0_critical(bseq)


def cmd_solve(family: str, b0: float):
    pt = gibbs(parse_family(family), b0)
    header = ["b0", "u", "b0c", "rho", "gibbs", "m", "regime"]
    row = [pt.b0, pt.u, pt.b0c, pt.rho, pt.phi, pt.m, pt.regime]
    return header, [row], []


def _s_of_w(w: float) -> float:
    return 0.5 * (1.0 + math.sqrt(1.0 - 8.0 * w))


def cmd_critical_line(a: float, w_grid: np.ndarray, threads: int = 1):
    """Critical contact weight along a tail-strength grid at fixed a."""

    def one(w: float):
        w = float(w)
        if w > W_UPPER:
            return [w, math.nan, math.nan, math.nan, SKIP_NOTE]
        s = _s_of_w(w)
        b0c = hyper.b0c_closed(a, s)
        return [w, s, b0c, -math.log(b0c), ""]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        rows = list(pool.map(one, w_grid))
    uc = [r[3] for r in rows if not r[4]]
    diffs = np.diff(uc)
    if len(diffs) == 0 or np.all(diffs == 0.0):
        trend = "constant"
    elif np.all(diffs >= 0.0):
        trend = "nondecreasing"
    elif np.all(diffs <= 0.0):
        trend = "nonincreasing"
    else:
        trend = "mixed"
    header = ["w", "s", "b0c", "u_c", "note"]
    return header, rows, [f"u_c trend along grid: {trend}"]


def cmd_phase_diagram(a: float, w_list: np.ndarray, u_grid: np.ndarray,
                      threads: int = 1):
    """Return-density sheet: iso-w lines over u, plus the boundary curve.

    Boundary rows sit at u = u_c(w) and carry the density at the
    transition: zero through the continuous range, the jump height once
    the transition is first order.
    """

    def line(w: float):
        w = float(w)
        if w > W_UPPER:
            return [[w, math.nan, math.nan, SKIP_NOTE]], None
        s = _s_of_w(w)
        b0c = hyper.b0c_closed(a, s)
        rows = []
        for u in u_grid:
            b0 = math.exp(-u)
            m = 0.0 if b0 >= b0c else hyper.m_closed(a, s, b0)
            rows.append([w, float(u), m, "iso"])
        cb = hyper.critical_behavior(a, s)
        jump = cb.jump if cb.kind == "firstorder" else 0.0
        return rows, [w, -math.log(b0c), jump, "boundary"]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(line, w_list))
    rows = []
    for iso, _ in parts:
        rows.extend(iso)
    for _, boundary in parts:
        if boundary is not None:
            rows.append(boundary)
    return ["w", "u", "m", "branch"], rows, []


def cmd_exponent(family: str, observable: str = "m",
                 grid: np.ndarray | None = None):
    """Fitted approach exponent against its closed-form reference."""
    bseq = parse_family(family)
    if observable == "m":
        if grid is None:
            grid = np.geomspace(1e-4, 1e-6, 9)
        fit = scaling.fit_m_exponent(bseq, _family_b0c(bseq), grid)
    else:
        if grid is None:
            grid = np.geomspace(1e-6, 1e-8, 9)
        fit = scaling.fit_theta(bseq, grid)
    header = ["observable", "slope", "reference", "residual", "marginal",
              "jump"]
    row = [observable, fit.slope, fit.reference, fit.residual,
           "true" if fit.marginal else "false",
           math.nan if fit.jump is None else fit.jump]
    return header, [row], []


def cmd_profile(family: str, b0: float | None = None,
                eps: float | None = None, pmax: int = 100,
                zone_eps=None):
    """Solution profile w_p, or zone deviation reports with --zone-eps."""
    bseq = parse_family(family)
    if zone_eps is not None and len(zone_eps):
        header = ["eps", "n_scale", "zone1_dev", "zone2_dev", "zone3_dev"]
        rows = []
        for e in zone_eps:
            zr = scaling.zone_check(bseq, float(e))
            rows.append([zr.eps, zr.n_scale, zr.zone1_dev, zr.zone2_dev,
                         zr.zone3_dev])
        return header, rows, []
    if (b0 is None) == (eps is None):
        raise ParameterError("provide exactly one of --b0 and --eps")
    rho = 1.0 + eps if eps is not None else rho_of_b0(bseq, b0)
    sol = minimal_solution(bseq, rho, p_store=pmax)
    if isinstance(sol, NotTransient):
        raise RegimeError(f"no positive solution at rho={rho}")
    header = ["p", "w_p", "ln_w_p"]
    rows = [[p, float(sol.values[p]), float(sol.log_values[p])]
            for p in range(1, min(pmax, sol.p_stored) + 1)]
    return header, rows, []


def cmd_simulate(family: str, b0: float, steps: int, seed: int,
                 stream: int = 0, height: int = 256, report: int = 8):
    """Sampled chain statistics with batch-means error bars."""
    walk = localized_walk(parse_family(family), b0, height)
    st = mcwalk.sample_walk(walk, steps, seed, stream)
    header = ["seed", "quantity", "value", "sigma"]
    rows = [
        [seed, "return_fraction", st.return_fraction, st.return_se],
        [seed, "even_origin_fraction", st.even_origin_fraction,
         st.even_origin_se],
    ]
    frac = st.occupation_fraction
    for n in range(min(report, height) + 1):
        rows.append([seed, f"occupation_{n}", float(frac[n]),
                     float(st.occupation_se[n])])
    return header, rows, []


def cmd_enumerate(family: str, b0: float, n_list, boundary: str):
    """Exact short-system sums: partition function and return density."""
    bseq = parse_family(family)
    header = ["n_steps", "boundary", "z", "expected_returns",
              "return_density"]
    rows = []
    for n in n_list:
        n = int(n)
        ens = mcwalk.enumerate_sos(bseq, b0, n, boundary)
        interior = n - 1 if boundary == "bridge" else n
        if ens.z == 0.0 or interior == 0:
            density = math.nan
        else:
            density = ens.expected_returns / interior
        rows.append([n, boundary, ens.z, ens.expected_returns, density])
    return header, rows, []


# ---------------------------------------------------------------------------
# command-line layer


def _deliver(result, output: str | None) -> None:
    header, rows, notes = result
    text = _render(header, rows)
    if output:
        with open(output, "w") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)
    for note in notes:
        click.echo(note, err=True)


def _execute(rc: RunConfig, run) -> None:
    try:
        rc.validate()
        result = run()
    except ParameterError as exc:
        raise click.UsageError(str(exc)) from exc
    except (RegimeError, DivergenceError, ConvergenceError,
            ResourceError) as exc:
        click.echo(f"error: {exc}", err=True)
        raise SystemExit(1) from exc
    _deliver(result, rc.output)


_family_opt = click.option("--family", required=True,
                           help="potential family, name:p1,p2[,p3]")
_output_opt = click.option("--output", "-o", default=None,
                           help="CSV file (default: stdout)")
_threads_opt = click.option("--threads", type=int, default=0,
                            help="worker threads (default: PINWALL_THREADS "
                                 "or core count)")


@click.group()
def main():
    """Pinned-interface solver toolkit, CSV in and out."""


@main.command("solve")
@_family_opt
@click.option("--b0", type=float, required=True, help="contact weight")
@_output_opt
def solve_command(family, b0, output):
    """Solve one phase point: decay rate, free energy, return density."""
    rc = RunConfig("solve", family=family, numbers={"b0": b0}, output=output)
    _execute(rc, lambda: cmd_solve(family, b0))


@main.command("critical-line")
@click.option("--a", type=float, required=True, help="head-shape parameter")
@click.option("--w-grid", required=True, help="tail strengths, grid spec")
@_threads_opt
@_output_opt
def critical_line_command(a, w_grid, threads, output):
    """Critical contact weight along a tail-strength grid."""
    rc = RunConfig("critical-line", numbers={"a": a},
                   grids={"w_grid": parse_grid(w_grid)}, output=output,
                   threads=threads)
    _execute(rc, lambda: cmd_critical_line(a, rc.grids["w_grid"],
                                           rc.pool_size()))


@main.command("phase-diagram")
@click.option("--a", type=float, required=True, help="head-shape parameter")
@click.option("--w-list", required=True, help="tail strengths, grid spec")
@click.option("--u-grid", required=True, help="pinning strengths, grid spec")
@_threads_opt
@_output_opt
def phase_diagram_command(a, w_list, u_grid, threads, output):
    """Iso-w return-density lines plus the transition boundary."""
    rc = RunConfig("phase-diagram", numbers={"a": a},
                   grids={"w_grid": parse_grid(w_list),
                          "u_grid": parse_grid(u_grid)},
                   output=output, threads=threads)
    _execute(rc, lambda: cmd_phase_diagram(a, rc.grids["w_grid"],
                                           rc.grids["u_grid"],
                                           rc.pool_size()))


@main.command("exponent")
@_family_opt
@click.option("--observable", default="m", show_default=True,
              help="'m' (density vs gap) or 'sumsq' (profile mass vs eps)")
@click.option("--grid", default=None, help="override gap/eps grid spec")
@_output_opt
def exponent_command(family, observable, grid, output):
    """Fit the critical approach exponent and compare to the prediction."""
    g = parse_grid(grid) if grid else None
    rc = RunConfig("exponent", family=family,
                   numbers={"observable": observable},
                   grids={"grid": g} if g is not None else {}, output=output)
    _execute(rc, lambda: cmd_exponent(family, observable, g))


@main.command("profile")
@_family_opt
@click.option("--b0", type=float, default=None, help="contact weight")
@click.option("--eps", type=float, default=None,
              help="decay-rate excess rho - 1 (0 for the critical profile)")
@click.option("--pmax", type=int, default=100, show_default=True,
              help="profile depth")
@click.option("--zone-eps", type=float, multiple=True,
              help="emit zone deviation reports at these eps instead")
@_output_opt
def profile_command(family, b0, eps, pmax, zone_eps, output):
    """Dump the solution profile, or zone-matching reports."""
    numbers = {"pmax": pmax}
    if b0 is not None:
        numbers["b0"] = b0
    if eps is not None:
        numbers["eps"] = eps
    rc = RunConfig("profile", family=family, numbers=numbers,
                   grids={"zone_eps": list(zone_eps)} if zone_eps else {},
                   output=output)
    _execute(rc, lambda: cmd_profile(family, b0, eps, pmax,
                                     list(zone_eps) or None))


@main.command("simulate")
@_family_opt
@click.option("--b0", type=float, required=True, help="contact weight")
@click.option("--steps", type=int, required=True, help="trajectory length")
@click.option("--seed", type=int, required=True, help="RNG seed")
@click.option("--stream", type=int, default=0, show_default=True,
              help="replica stream index")
@click.option("--height", type=int, default=256, show_default=True,
              help="height-table size")
@click.option("--report", type=int, default=8, show_default=True,
              help="report occupation up to this height")
@_output_opt
def simulate_command(family, b0, steps, seed, stream, height, report, output):
    """Sample the height chain; emit statistics with error bars."""
    rc = RunConfig("simulate", family=family,
                   numbers={"b0": b0, "steps": steps, "stream": stream,
                            "height": height},
                   seed=seed, output=output)
    _execute(rc, lambda: cmd_simulate(family, b0, steps, seed, stream,
                                      height, report))


@main.command("enumerate")
@_family_opt
@click.option("--b0", type=float, required=True, help="contact weight")
@click.option("--n", "n_list", type=int, multiple=True, required=True,
              help="system length in steps (repeatable)")
@click.option("--boundary", default="bridge", show_default=True,
              help="'bridge' (pinned end) or 'free'")
@_output_opt
def enumerate_command(family, b0, n_list, boundary, output):
    """Exact enumeration of short systems."""
    rc = RunConfig("enumerate", family=family,
                   numbers={"b0": b0, "boundary": boundary},
                   grids={"n_list": list(n_list)}, output=output)
    _execute(rc, lambda: cmd_enumerate(family, b0, n_list, boundary))


if __name__ == "__main__":  # pragma: no cover
    main()
