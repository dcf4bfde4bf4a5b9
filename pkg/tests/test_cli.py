"""Command-line layer: parsing, CSV output, exit codes, determinism."""

import math

import numpy as np
import pytest
from click.testing import CliRunner

from pinwall import hyper
from pinwall.cli import (RunConfig, cmd_critical_line, cmd_enumerate,
                         cmd_exponent, cmd_phase_diagram, cmd_profile,
                         cmd_simulate, cmd_solve, main, parse_family,
                         parse_grid)
from pinwall.errors import ParameterError


def _invoke(*args):
    return CliRunner().invoke(main, list(args))


def _rows(output):
    lines = [ln for ln in output.strip().split("\n") if "," in ln]
    return lines[0].split(","), [ln.split(",") for ln in lines[1:]]


class TestParseFamily:
    def test_known_families(self):
        assert parse_family("hyper:0.97,1.25").family == "hyper"
        assert parse_family("invsq:-0.5").family == "invsq"
        blocked = parse_family("blocked:0.2,0.1,0.0")
        assert blocked.family == "blocked"
        assert blocked.b(1) == pytest.approx(0.2)
        assert blocked.b(2) == pytest.approx(0.1)

    def test_error_positions(self):
        with pytest.raises(ParameterError, match="column 6"):
            parse_family("hyper:zz,1.0")
        with pytest.raises(ParameterError, match="column 11"):
            parse_family("hyper:0.97,zz")
        with pytest.raises(ParameterError, match="':'"):
            parse_family("hyper")
        with pytest.raises(ParameterError, match="unknown family"):
            parse_family("gauss:1.0")
        with pytest.raises(ParameterError, match="takes 2"):
            parse_family("hyper:1.0")
        with pytest.raises(ParameterError, match="takes 1"):
            parse_family("invsq:1.0,2.0")


class TestParseGrid:
    def test_even_spacing(self):
        np.testing.assert_allclose(parse_grid("0:1:5"),
                                   [0.0, 0.25, 0.5, 0.75, 1.0])
        np.testing.assert_allclose(parse_grid("0.125:-1:2"), [0.125, -1.0])

    def test_explicit_values(self):
        np.testing.assert_allclose(parse_grid("0.3,-1,2e-3"),
                                   [0.3, -1.0, 2e-3])

    def test_errors(self):
        with pytest.raises(ParameterError, match="two ':'"):
            parse_grid("0:1")
        with pytest.raises(ParameterError, match="bad count"):
            parse_grid("0:1:x")
        with pytest.raises(ParameterError, match="count"):
            parse_grid("0:1:0")
        with pytest.raises(ParameterError, match="column 4"):
            parse_grid("0.3,zz")


class TestSolve:
    def test_localized_point(self):
        header, rows, _ = cmd_solve("hyper:0.97,1", 0.2)
        row = dict(zip(header, rows[0]))
        assert row["rho"] == pytest.approx(1.25, rel=1e-10)
        assert row["m"] == pytest.approx(0.375, rel=1e-10)
        assert row["u"] == pytest.approx(-math.log(0.2), rel=1e-15)
        assert row["regime"] == "localized"
        assert row["gibbs"] == pytest.approx(-math.log(1.25), rel=1e-10)

    def test_no_transition_row(self):
        res = _invoke("solve", "--family", "invsq:0.2", "--b0", "0.3")
        assert res.exit_code == 0
        header, rows = _rows(res.output)
        row = dict(zip(header, rows[0]))
        assert row["b0c"] == "inf"
        assert row["regime"] == "no-transition"
        assert float(row["m"]) > 0.0

    def test_exactly_critical_round_trip(self):
        first = _invoke("solve", "--family", "hyper:1.0,2", "--b0", "0.2")
        header, rows = _rows(first.output)
        b0c = rows[0][header.index("b0c")]
        res = _invoke("solve", "--family", "hyper:1.0,2", "--b0", b0c)
        header, rows = _rows(res.output)
        row = dict(zip(header, rows[0]))
        assert row["regime"] == "critical"
        assert float(row["gibbs"]) == 0.0
        assert float(row["rho"]) == 1.0

    def test_usage_exit_codes(self):
        assert _invoke("solve", "--family", "hyper:0.97",
                       "--b0", "0.2").exit_code == 2
        assert _invoke("solve", "--family", "hyper:0.97,1",
                       "--b0", "-0.2").exit_code == 2


class TestCriticalLine:
    def test_anchor_rows(self):
        header, rows, notes = cmd_critical_line(1.0, np.array([0.0, -1.0]))
        by_w = {r[0]: r for r in rows}
        assert by_w[0.0][3] == pytest.approx(math.log(2.0), rel=1e-12)
        assert by_w[-1.0][1] == pytest.approx(2.0, rel=1e-15)
        assert by_w[-1.0][3] == pytest.approx(math.log(3.0), rel=1e-12)

    def test_skip_and_trend(self):
        res = _invoke("critical-line", "--a", "0.97",
                      "--w-grid", "0.5,0.125,0,-1,-4", "--threads", "1")
        assert res.exit_code == 0
        header, rows = _rows(res.output)
        assert rows[0][header.index("note")] == "skipped-above-upper-marginal"
        assert rows[0][header.index("s")] == "nan"
        finite = [float(r[header.index("u_c")]) for r in rows[1:]]
        assert all(b > a for a, b in zip(finite, finite[1:]))
        assert "u_c trend along grid: nondecreasing" in res.stderr

    def test_all_finite_below_marginal(self):
        header, rows, _ = cmd_critical_line(0.97, np.linspace(0.125, -3, 26))
        for r in rows:
            assert math.isfinite(r[3])


class TestPhaseDiagram:
    def test_s1_iso_line_closed_form(self):
        u_grid = np.array([0.5, math.log(2.0), 1.0, 2.0])
        header, rows, _ = cmd_phase_diagram(0.97, np.array([0.0]), u_grid)
        iso = [r for r in rows if r[3] == "iso"]
        for w, u, m, _branch in iso:
            e = math.exp(-u)
            ref = 0.0 if u <= math.log(2.0) else (0.5 - e) / (1.0 - e)
            assert m == pytest.approx(ref, abs=1e-12)

    def test_density_nondecreasing_in_u(self):
        u_grid = np.linspace(0.3, 3.0, 12)
        header, rows, _ = cmd_phase_diagram(
            0.97, np.array([0.1, 0.0, -0.65625, -1.0, -3.0]), u_grid)
        for w in (0.1, 0.0, -0.65625, -1.0, -3.0):
            ms = [r[2] for r in rows if r[3] == "iso" and r[0] == w]
            assert len(ms) == len(u_grid)
            assert all(b >= a for a, b in zip(ms, ms[1:]))

    def test_boundary_jumps(self):
        # tail strengths chosen so the decay exponents are 1.75, 2, 3
        w_list = np.array([-0.65625, -1.0, -3.0])
        header, rows, _ = cmd_phase_diagram(1.0, w_list, np.array([1.0]))
        jumps = {r[0]: r[2] for r in rows if r[3] == "boundary"}
        for w, s in zip(w_list, (1.75, 2.0, 3.0)):
            ref = 1.0 / (2.0 + 2.0 * 1.0 / (s - 1.5))
            assert jumps[float(w)] == pytest.approx(ref, abs=1e-6)

    def test_continuous_boundary_is_zero(self):
        header, rows, _ = cmd_phase_diagram(0.97, np.array([0.0, -0.2]),
                                            np.array([1.0]))
        for r in rows:
            if r[3] == "boundary":
                assert r[2] == 0.0

    def test_thread_count_does_not_change_output(self):
        args = ["phase-diagram", "--a", "0.97", "--w-list", "0,-1",
                "--u-grid", "0.5:2:4"]
        one = _invoke(*args, "--threads", "1")
        three = _invoke(*args, "--threads", "3")
        assert one.exit_code == three.exit_code == 0
        assert one.output == three.output


class TestExponent:
    def test_default_density_fit(self):
        header, rows, _ = cmd_exponent("hyper:0.97,1.25")
        row = dict(zip(header, rows[0]))
        assert row["slope"] == pytest.approx(1.0 / 3.0, rel=0.05)
        assert row["reference"] == pytest.approx(1.0 / 3.0, rel=1e-10)
        assert row["marginal"] == "false"
        assert math.isnan(row["jump"])

    def test_profile_mass_fit(self):
        header, rows, _ = cmd_exponent("hyper:0.97,1.25", "sumsq")
        row = dict(zip(header, rows[0]))
        assert row["observable"] == "sumsq"
        assert row["reference"] == pytest.approx(0.25, abs=1e-12)
        assert row["slope"] == pytest.approx(0.25, rel=0.05)

    def test_first_order_family_reports_jump(self):
        header, rows, _ = cmd_exponent("hyper:1.0,2")
        row = dict(zip(header, rows[0]))
        assert math.isnan(row["slope"])
        assert row["jump"] == pytest.approx(1.0 / 6.0, abs=1e-6)

    def test_cli_round_trip(self):
        res = _invoke("exponent", "--family", "hyper:0.97,1.25")
        assert res.exit_code == 0
        header, rows = _rows(res.output)
        assert abs(float(rows[0][header.index("slope")]) - 1 / 3) < 0.02


class TestProfile:
    def test_geometric_profile(self):
        header, rows, _ = cmd_profile("hyper:0.97,1", b0=0.2, pmax=6)
        for p, w_p, ln_w_p in rows:
            assert w_p == pytest.approx(2.0 ** (1 - p), rel=1e-10)
            assert ln_w_p == pytest.approx((1 - p) * math.log(2.0),
                                           abs=1e-10)

    def test_critical_profile_matches_closed_form(self):
        header, rows, _ = cmd_profile("hyper:1.3,1.25", eps=0.0, pmax=5)
        for p, w_p, _ in rows:
            assert w_p == pytest.approx(hyper.wp_critical(1.3, 1.25, p),
                                        rel=1e-9)

    def test_zone_mode(self):
        header, rows, _ = cmd_profile("hyper:0.97,1.25",
                                      zone_eps=[1e-4])
        assert header[0] == "eps"
        assert rows[0][1] == 100
        assert 0.0 < rows[0][2] < 0.2

    def test_requires_exactly_one_anchor(self):
        with pytest.raises(ParameterError):
            cmd_profile("hyper:0.97,1", b0=0.2, eps=1e-3)
        with pytest.raises(ParameterError):
            cmd_profile("hyper:0.97,1")

    def test_numeric_failure_exit_code(self):
        res = _invoke("profile", "--family", "blocked:0.2,0.0",
                      "--eps", "0", "--pmax", "4")
        assert res.exit_code == 1
        assert "no positive solution" in res.stderr


class TestSimulate:
    def test_byte_identical_reruns(self):
        args = ["simulate", "--family", "hyper:0.97,1", "--b0", "0.2",
                "--steps", "50000", "--seed", "42", "--report", "4"]
        a, b = _invoke(*args), _invoke(*args)
        assert a.exit_code == b.exit_code == 0
        assert a.output == b.output

    def test_rows_carry_seed_and_sigma(self):
        header, rows, _ = cmd_simulate("hyper:0.97,1", 0.2, 20000, 7,
                                       report=2)
        assert header == ["seed", "quantity", "value", "sigma"]
        quantities = [r[1] for r in rows]
        assert quantities == ["return_fraction", "even_origin_fraction",
                              "occupation_0", "occupation_1", "occupation_2"]
        for r in rows:
            assert r[0] == 7
            assert r[3] > 0.0

    def test_sane_statistics(self):
        header, rows, _ = cmd_simulate("hyper:0.97,1", 0.2, 200000, 9)
        row = {r[1]: r for r in rows}
        val, sig = row["return_fraction"][2], row["return_fraction"][3]
        assert abs(val - 0.375) < 4.0 * sig

    def test_usage_errors(self):
        assert _invoke("simulate", "--family", "hyper:0.97,1", "--b0", "0.2",
                       "--steps", "0", "--seed", "1").exit_code == 2
        assert _invoke("simulate", "--family", "hyper:0.97,1", "--b0", "0.2",
                       "--steps", "10", "--seed", "-3").exit_code == 2


class TestEnumerate:
    def test_small_bridge(self):
        header, rows, _ = cmd_enumerate("hyper:0.97,1", 0.2, [2], "bridge")
        row = dict(zip(header, rows[0]))
        assert row["z"] == pytest.approx(6.25, rel=1e-12)
        assert row["return_density"] == 0.0

    def test_rows_follow_input_order(self):
        header, rows, _ = cmd_enumerate("hyper:0.97,1", 0.2, [4, 2, 6],
                                        "bridge")
        assert [r[0] for r in rows] == [4, 2, 6]

    def test_odd_bridge_row(self):
        res = _invoke("enumerate", "--family", "hyper:0.97,1", "--b0", "0.2",
                      "--n", "3", "--boundary", "bridge")
        header, rows = _rows(res.output)
        row = dict(zip(header, rows[0]))
        assert row["z"] == "0"
        assert row["return_density"] == "nan"

    def test_cap_is_usage_error(self):
        res = _invoke("enumerate", "--family", "hyper:0.97,1", "--b0", "0.2",
                      "--n", "30", "--boundary", "free")
        assert res.exit_code == 2


class TestRunConfig:
    def test_pool_size_sources(self, monkeypatch):
        monkeypatch.delenv("PINWALL_THREADS", raising=False)
        assert RunConfig("solve", threads=3).pool_size() == 3
        assert RunConfig("solve").pool_size() >= 1
        monkeypatch.setenv("PINWALL_THREADS", "2")
        assert RunConfig("solve").pool_size() == 2
        assert RunConfig("solve", threads=5).pool_size() == 5
        monkeypatch.setenv("PINWALL_THREADS", "zero")
        with pytest.raises(ParameterError):
            RunConfig("solve").pool_size()

    def test_validation_catches_bad_flags(self):
        with pytest.raises(ParameterError):
            RunConfig("solve", family="hyper:0.97,1",
                      numbers={"b0": -1.0}).validate()
        with pytest.raises(ParameterError):
            RunConfig("critical-line", numbers={"a": 0.5}).validate()
        with pytest.raises(ParameterError):
            RunConfig("enumerate", grids={"n_list": [0]}).validate()
        with pytest.raises(ParameterError):
            RunConfig("profile", grids={"zone_eps": [1e-3]}).validate()
        RunConfig("solve", family="hyper:0.97,1",
                  numbers={"b0": 0.2}).validate()

    def test_output_file_written(self, tmp_path):
        path = tmp_path / "row.csv"
        res = _invoke("solve", "--family", "hyper:0.97,1", "--b0", "0.2",
                      "-o", str(path))
        assert res.exit_code == 0
        assert res.output == ""
        text = path.read_text()
        assert text.startswith("b0,u,b0c,rho,gibbs,m,regime\n")
