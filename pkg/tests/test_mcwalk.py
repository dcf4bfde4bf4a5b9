"""Sampling and enumeration against closed forms and brute-force sums.

The layered enumeration is checked against a literal walk over all
2^n sign sequences, so the two never share code paths; the sampler is
checked against the stationary law of the chain it simulates.
"""

import math

import numpy as np
import pytest

from pinwall.errors import ParameterError, ResourceError
from pinwall.mcwalk import (ENUM_CAP, enumerate_sos, finite_size_m,
                            kernel_return_probability, sample_walk)
from pinwall.potentials import hyper_potential, inverse_square_potential
from pinwall.transfer import localized_walk


def _walk_s1(b0=0.2, nmax=64):
    return localized_walk(hyper_potential(0.97, 1.0), b0, nmax)


def _brute_force(bseq, b0, n_steps, boundary):
    """Literal sum over all sign sequences, the slow oracle."""
    binv = [1.0 / b0] + [1.0 / bseq.b(n) for n in range(1, n_steps + 1)]
    z = 0.0
    visits = 0.0
    end = [0.0] * (n_steps + 1)
    hi = n_steps if boundary == "free" else n_steps - 1
    for bits in range(1 << n_steps):
        x = 0
        weight = binv[0]
        zero_hits = 0
        for l in range(n_steps):
            x += 1 if (bits >> l) & 1 else -1
            if x < 0:
                weight = 0.0
                break
            weight *= 0.5 * binv[x]
            if x == 0 and 1 <= l + 1 <= hi:
                zero_hits += 1
        else:
            if boundary == "bridge" and x != 0:
                weight = 0.0
        if weight:
            z += weight
            visits += weight * zero_hits
            end[x] += weight
    return z, visits / z if z else math.nan, [e / z if z else 0.0
                                              for e in end]


class TestSampleWalk:
    def test_first_step_forced_up(self):
        walk = _walk_s1()
        for seed in (0, 7, 123):
            st = sample_walk(walk, 1, seed)
            assert st.return_count == 0
            assert st.occupation[1] == 1
            assert st.occupation.sum() == 1

    def test_histogram_mass_and_parity_bound(self):
        walk = _walk_s1()
        for steps in (5, 99, 1000):
            st = sample_walk(walk, steps, 3)
            assert st.occupation.sum() == steps
            # returns only at even times, so at most steps // 2 of them
            assert st.return_count <= steps // 2

    def test_return_fraction_matches_m(self):
        walk = _walk_s1()
        st = sample_walk(walk, 10 ** 6, 42)
        assert abs(st.return_fraction - 0.375) <= 3.0 * st.return_se
        assert st.return_se < 1e-3

    def test_occupation_matches_stationary_law(self):
        walk = _walk_s1()
        st = sample_walk(walk, 10 ** 6, 42)
        for n in range(6):
            gap = abs(st.occupation_fraction[n] - walk.nu[n])
            assert gap <= 3.0 * st.occupation_se[n]

    def test_even_origin_frequency(self):
        walk = _walk_s1()
        st = sample_walk(walk, 10 ** 6, 42)
        gap = abs(st.even_origin_fraction - 2.0 * walk.nu[0])
        assert gap <= 3.0 * st.even_origin_se

    def test_deterministic_per_seed_and_stream(self):
        walk = _walk_s1()
        a = sample_walk(walk, 20000, 11)
        b = sample_walk(walk, 20000, 11)
        assert a.return_count == b.return_count
        assert np.array_equal(a.occupation, b.occupation)
        c = sample_walk(walk, 20000, 11, stream=1)
        assert not np.array_equal(a.occupation, c.occupation)

    def test_short_table_aborts(self):
        walk = _walk_s1(nmax=2)
        with pytest.raises(ResourceError):
            sample_walk(walk, 10000, 5)

    def test_validation(self):
        walk = _walk_s1()
        with pytest.raises(ParameterError):
            sample_walk(walk, 0, 1)
        with pytest.raises(ParameterError):
            sample_walk(walk, 10, -1)


class TestKernelReturn:
    def test_parity_exact_zero(self):
        walk = _walk_s1()
        for steps in (1, 3, 7, 15):
            assert kernel_return_probability(walk, steps) == 0.0

    def test_short_horizons_by_hand(self):
        walk = _walk_s1()
        assert kernel_return_probability(walk, 0) == 1.0
        # 0 -> 1 -> 0 is the only returning pair, chance q_1
        assert kernel_return_probability(walk, 2) == pytest.approx(
            float(walk.q[1]), rel=1e-15)

    def test_long_horizon_approaches_even_mass(self):
        walk = _walk_s1(nmax=80)
        assert kernel_return_probability(walk, 60) == pytest.approx(
            2.0 * walk.nu[0], rel=1e-6)

    def test_rows_are_stochastic(self):
        walk = _walk_s1()
        assert np.max(np.abs(walk.p + walk.q - 1.0)) < 1e-12
        assert np.all(walk.p >= 0.0) and np.all(walk.p <= 1.0)

    def test_horizon_guard(self):
        walk = _walk_s1(nmax=8)
        with pytest.raises(ResourceError):
            kernel_return_probability(walk, 9)


class TestEnumerate:
    def test_two_step_bridge_single_path(self):
        ens = enumerate_sos(hyper_potential(0.97, 1.0), 0.2, 2, "bridge")
        assert ens.z == pytest.approx(6.25, rel=1e-14)
        assert ens.expected_returns == 0.0
        assert ens.end_law[0] == pytest.approx(1.0, rel=1e-14)

    def test_odd_bridge_is_empty(self):
        for n in (1, 3, 9):
            ens = enumerate_sos(hyper_potential(1.0, 1.0), 0.3, n, "bridge")
            assert ens.z == 0.0
            assert math.isnan(ens.expected_returns)
            assert not ens.end_law.any()

    def test_free_end_law_parity_and_mass(self):
        ens = enumerate_sos(hyper_potential(0.97, 1.25), 0.25, 6, "free")
        assert ens.end_law.sum() == pytest.approx(1.0, rel=1e-13)
        assert not ens.end_law[1::2].any()
        assert np.all(ens.end_law >= 0.0)

    @pytest.mark.parametrize("n_steps,boundary", [(8, "bridge"), (7, "free"),
                                                  (10, "free")])
    def test_matches_brute_force_sum(self, n_steps, boundary):
        bseq = hyper_potential(1.3, 1.25)
        ens = enumerate_sos(bseq, 0.15, n_steps, boundary)
        z, visits, end = _brute_force(bseq, 0.15, n_steps, boundary)
        assert ens.z == pytest.approx(z, rel=1e-12)
        assert ens.expected_returns == pytest.approx(visits, rel=1e-12)
        np.testing.assert_allclose(ens.end_law, end, rtol=1e-12, atol=1e-15)

    @pytest.mark.parametrize("a,s,b0", [(0.97, 1.0, 0.2), (1.3, 1.25, 0.1),
                                        (1.0, 2.0, 0.15)])
    def test_bridge_identity(self, a, s, b0):
        # the constrained sum equals the growth rate to the path length
        # times the contact weight times the walk's return probability
        bseq = hyper_potential(a, s)
        walk = localized_walk(bseq, b0, 40)
        for n in range(1, 9):
            z = enumerate_sos(bseq, b0, 2 * n, "bridge").z
            ref = walk.rho ** (2 * n) / b0 * kernel_return_probability(
                walk, 2 * n)
            assert z == pytest.approx(ref, rel=1e-10)

    def test_validation(self):
        bseq = hyper_potential(1.0, 1.0)
        with pytest.raises(ParameterError):
            enumerate_sos(bseq, 0.0, 4, "bridge")
        with pytest.raises(ParameterError):
            enumerate_sos(bseq, 0.2, 0, "bridge")
        with pytest.raises(ResourceError):
            enumerate_sos(bseq, 0.2, ENUM_CAP + 1, "free")
        with pytest.raises(ParameterError):
            enumerate_sos(bseq, 0.2, 4, "periodic")


class TestFiniteSize:
    def test_single_pair_bridge_has_no_interior_contact(self):
        seq = finite_size_m(hyper_potential(0.97, 1.0), 0.2, [1], "bridge")
        assert seq == [(1, 0.0)]

    def test_bridge_density_climbs_to_m(self):
        seq = finite_size_m(hyper_potential(0.97, 1.0), 0.2,
                            range(1, 13), "bridge")
        dens = [d for _, d in seq]
        assert all(b > a for a, b in zip(dens, dens[1:]))
        assert abs(dens[-1] - 0.375) < abs(dens[0] - 0.375)
        assert dens[-1] == pytest.approx(0.375, abs=0.01)

    def test_free_density_brackets_m_by_parity(self):
        # even lengths approach from above, odd lengths from below, and
        # both parity classes tighten onto the infinite-volume density
        bseq = hyper_potential(0.97, 1.0)
        even = [d for _, d in finite_size_m(bseq, 0.2, range(2, 25, 2),
                                            "free")]
        odd = [d for _, d in finite_size_m(bseq, 0.2, range(3, 25, 2),
                                           "free")]
        assert all(b < a for a, b in zip(even, even[1:]))
        assert all(b > a for a, b in zip(odd, odd[1:]))
        assert even[-1] > 0.375 > odd[-1]
        assert even[-1] == pytest.approx(0.375, abs=2e-4)

    def test_depinned_density_decays(self):
        # contact weight above threshold: past the short-system head the
        # density falls off toward zero instead of settling at a level
        seq = finite_size_m(hyper_potential(0.97, 1.0), 0.55,
                            range(3, 13), "bridge")
        dens = [d for _, d in seq]
        assert all(b < a for a, b in zip(dens, dens[1:]))
        assert dens[-1] < 0.17

    def test_even_heights_carry_half_the_squared_mass(self):
        for (a, s, b0) in [(0.97, 1.0, 0.2), (1.3, 1.25, 0.1)]:
            walk = localized_walk(hyper_potential(a, s), b0, 120)
            sq = walk.v ** 2
            assert sq[::2].sum() == pytest.approx(0.5 * sq.sum(), rel=1e-10)

    def test_validation(self):
        bseq = inverse_square_potential(0.0)
        with pytest.raises(ParameterError):
            finite_size_m(bseq, 0.2, [0], "free")
        with pytest.raises(ParameterError):
            finite_size_m(bseq, 0.2, [2], "ring")
