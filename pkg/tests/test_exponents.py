"""Exponent computations against closed forms and grid oracles."""

import math

import numpy as np
import pytest

from asyncdmc import (
    ChannelModel,
    Distribution,
    Kernel,
    achievable_curve,
    achievable_exponent,
    brute_force_minimax,
    brute_force_training_constant,
    compute_capacity,
    kl_divergence,
    minimax_exponent,
    training_bound_constant,
    training_bound_curve,
)
from asyncdmc.exponents import ACHIEVABLE, TRAINING_BOUND, ExponentCurve


def random_law(rng, k, floor=0.15):
    raw = -np.log(rng.random(k))
    raw = raw / raw.sum()
    return Distribution((1.0 - floor) * raw + floor / k)


def chernoff_at_half(a, b):
    s = np.sqrt(a.probs * b.probs).sum()
    return -math.log(s) if s > 0 else math.inf


class TestMinimaxExponent:
    def test_equal_laws(self):
        p = Distribution([0.3, 0.7])
        assert minimax_exponent(p, p) == 0.0

    def test_disjoint_supports(self):
        assert minimax_exponent(Distribution([1, 0]), Distribution([0, 1])) == math.inf

    def test_symmetric_closed_form(self):
        v = minimax_exponent(Distribution([0.9, 0.1]), Distribution([0.1, 0.9]))
        assert v == pytest.approx(0.510825623765990683, abs=1e-9)

    def test_against_grid_oracle_binary(self):
        a = Distribution([0.9, 0.1])
        b = Distribution([0.5, 0.5])
        fast = minimax_exponent(a, b, tol=1e-10)
        grid = brute_force_minimax(a, b, 0.001)
        assert abs(fast - grid) <= 2e-3

    def test_symmetry_is_exact(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            k = rng.integers(2, 5)
            a, b = random_law(rng, k, 0.0), random_law(rng, k, 0.0)
            assert minimax_exponent(a, b) == minimax_exponent(b, a)

    def test_feasible_points_upper_bound(self):
        # any explicit V bounds the minimum from above, including V=a and V=b
        rng = np.random.default_rng(9)
        for _ in range(50):
            k = rng.integers(2, 5)
            a, b = random_law(rng, k), random_law(rng, k)
            v = minimax_exponent(a, b)
            assert v <= max(kl_divergence(a, a), kl_divergence(a, b)) + 1e-9
            assert v <= max(kl_divergence(b, a), kl_divergence(b, b)) + 1e-9

    def test_half_weight_dual_lower_bound(self):
        rng = np.random.default_rng(14)
        for _ in range(50):
            k = rng.integers(2, 5)
            a, b = random_law(rng, k), random_law(rng, k)
            assert minimax_exponent(a, b) >= chernoff_at_half(a, b) - 1e-9

    def test_partial_overlap_boundary_case(self):
        # optimum pinned at the common-support restriction
        a = Distribution([1.0, 0.0])
        b = Distribution([0.5, 0.5])
        assert minimax_exponent(a, b) == pytest.approx(math.log(2.0), abs=1e-8)

    def test_alphabet_mismatch(self):
        with pytest.raises(ValueError):
            minimax_exponent(Distribution([1.0]), Distribution([0.5, 0.5]))


class TestBruteForceMinimax:
    def test_equal_on_grid(self):
        p = Distribution([0.4, 0.6])
        assert brute_force_minimax(p, p, 0.01) == 0.0

    def test_oracle_agreement_random(self):
        rng = np.random.default_rng(31)
        for _ in range(100):
            a, b = random_law(rng, 2), random_law(rng, 2)
            fast = minimax_exponent(a, b, 1e-10)
            grid = brute_force_minimax(a, b, 0.001)
            assert abs(fast - grid) <= 2e-3

    def test_refinement_monotone(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            a, b = random_law(rng, 2), random_law(rng, 2)
            coarse = brute_force_minimax(a, b, 0.01)
            fine = brute_force_minimax(a, b, 0.005)  # nested grid
            assert fine <= coarse + 1e-12

    def test_alphabet_cap(self):
        p = Distribution(np.full(5, 0.2))
        with pytest.raises(ValueError):
            brute_force_minimax(p, p, 0.01)

    def test_disjoint_supports(self):
        v = brute_force_minimax(Distribution([1, 0]), Distribution([0, 1]), 0.01)
        assert v == math.inf


class TestAchievableExponent:
    def test_zero_when_output_matches_noise(self):
        # noise law equals the induced output law -> nothing to detect
        q = Kernel([[0.5, 0.5], [0.9, 0.1], [0.1, 0.9]])
        ch = ChannelModel(q, 0)
        assert achievable_exponent(ch, Distribution([0.0, 0.5, 0.5])) == pytest.approx(0.0, abs=1e-9)

    def test_point_mass_on_star(self):
        ch = ChannelModel.bsc(0.1)
        assert achievable_exponent(ch, Distribution([1.0, 0.0])) == pytest.approx(0.0, abs=1e-12)

    def test_bsc_uniform_pinned_by_oracle(self):
        ch = ChannelModel.bsc(0.1)
        v = achievable_exponent(ch, Distribution.uniform(2))
        grid = brute_force_minimax(Distribution([0.5, 0.5]), Distribution([0.9, 0.1]), 0.001)
        assert v > 0
        assert abs(v - grid) <= 2e-3


class TestTrainingBoundConstant:
    def test_identical_rows_zero(self):
        ch = ChannelModel(Kernel([[0.6, 0.4], [0.6, 0.4]]), 0)
        assert training_bound_constant(ch) == pytest.approx(0.0, abs=1e-12)

    def test_bsc_closed_form(self):
        v = training_bound_constant(ChannelModel.bsc(0.1))
        assert v == pytest.approx(0.510825623765990683, abs=1e-9)

    def test_disjoint_row_degenerate(self):
        ch = ChannelModel(Kernel([[1.0, 0.0], [0.0, 1.0]]), 0)
        assert training_bound_constant(ch) == math.inf

    def test_partial_overlap_stays_finite(self):
        # a zero in the noise row alone does not blow up the constant as
        # long as every row shares some support with it
        ch = ChannelModel(Kernel([[1.0, 0.0], [0.5, 0.5]]), 0)
        v = training_bound_constant(ch)
        assert v == pytest.approx(math.log(2.0), abs=1e-8)

    def test_zero_iff_all_rows_equal_star(self):
        rng = np.random.default_rng(12)
        for _ in range(30):
            ch = ChannelModel(
                Kernel(np.stack([random_law(rng, 3).probs for _ in range(3)])), 0
            )
            v = training_bound_constant(ch)
            rows_equal = all(
                np.allclose(ch.kernel.matrix[x], ch.star_row, atol=1e-9)
                for x in range(3)
            )
            assert (v <= 1e-9) == rows_equal


class TestBruteForceTrainingConstant:
    def test_identical_rows(self):
        ch = ChannelModel(Kernel([[0.6, 0.4], [0.6, 0.4]]), 0)
        assert brute_force_training_constant(ch, 0.02) == pytest.approx(0.0, abs=1e-9)

    def test_bsc_cross_check(self):
        v = brute_force_training_constant(ChannelModel.bsc(0.1), 0.01)
        assert abs(v - 0.510825623765990683) <= 5e-3

    def test_reduction_agreement_2x2(self):
        rng = np.random.default_rng(23)
        for _ in range(25):
            rows = np.stack([random_law(rng, 2).probs for _ in range(2)])
            ch = ChannelModel(Kernel(rows), 0)
            fast = training_bound_constant(ch, 1e-10)
            grid = brute_force_training_constant(ch, 0.01)
            assert abs(fast - grid) <= 5e-3

    def test_reduction_agreement_3x2(self):
        rng = np.random.default_rng(29)
        for _ in range(25):
            rows = np.stack([random_law(rng, 2).probs for _ in range(3)])
            ch = ChannelModel(Kernel(rows), 0)
            fast = training_bound_constant(ch, 1e-10)
            grid = brute_force_training_constant(ch, 0.02)
            assert abs(fast - grid) <= 5e-3

    def test_vertex_reduction_attains_grid_optimum(self):
        rng = np.random.default_rng(37)
        for _ in range(10):
            rows = np.stack([random_law(rng, 2).probs for _ in range(2)])
            ch = ChannelModel(Kernel(rows), 0)
            full = brute_force_training_constant(ch, 0.02, vertex_only=False)
            vertex = brute_force_training_constant(ch, 0.02, vertex_only=True)
            assert vertex <= full + 1e-12  # vertices are grid points
            assert full - vertex <= 5e-3

    def test_alphabet_cap(self):
        ch = ChannelModel(Kernel(np.full((4, 2), 0.5)), 0)
        with pytest.raises(ValueError):
            brute_force_training_constant(ch, 0.02)


class TestCurves:
    def test_flat_channel_curve_is_origin(self):
        ch = ChannelModel(Kernel([[0.6, 0.4], [0.6, 0.4]]), 0)
        curve = achievable_curve(ch, 20)
        assert curve.rates.size == 1
        assert curve.rates[0] == 0.0
        assert curve.alphas[0] == pytest.approx(0.0, abs=1e-9)

    def test_identity_channel_alpha_at_capacity(self):
        ch = ChannelModel(Kernel(np.eye(3)), 0)
        curve = achievable_curve(ch, 12)
        cap = compute_capacity(ch).capacity_nats
        # exponent at capacity: uniform output vs point-mass noise = ln 3
        assert curve.alpha_at(cap) == pytest.approx(math.log(3.0), abs=1e-6)
        assert curve.degenerate  # point-mass rows give +inf off capacity

    def test_envelope_non_increasing(self):
        curve = achievable_curve(ChannelModel.bsc(0.1), 50)
        assert np.all(np.diff(curve.alphas) <= 1e-15)
        assert not curve.degenerate

    def test_training_curve_linear(self):
        ch = ChannelModel.bsc(0.1)
        curve = training_bound_curve(ch, 21)
        const = training_bound_constant(ch)
        cap = compute_capacity(ch).capacity_nats
        expected = const * (1.0 - curve.rates / cap)
        np.testing.assert_allclose(curve.alphas, np.maximum(expected, 0.0), atol=1e-9)
        assert curve.alphas[-1] == 0.0
        assert curve.alphas[0] == pytest.approx(const, abs=1e-12)
        assert curve.alpha_at(cap / 2) == pytest.approx(0.255412811882995342, abs=1e-6)

    def test_training_curve_degenerate_flag(self):
        ch = ChannelModel(Kernel([[1.0, 0.0], [0.0, 1.0]]), 0)
        curve = training_bound_curve(ch, 9)
        assert curve.degenerate
        assert np.isinf(curve.alphas[:-1]).all()

    def test_headline_contrast_random_channels(self):
        # at capacity the training curve hits zero while the achievable
        # curve stays positive whenever the noise law differs from the
        # capacity-achieving output law
        rng = np.random.default_rng(41)
        tried = 0
        for _ in range(20):
            rows = np.stack([random_law(rng, 2).probs for _ in range(2)])
            ch = ChannelModel(Kernel(rows), 0)
            cap = compute_capacity(ch, tol=1e-10)
            tv = 0.5 * np.abs(cap.output_dist.probs - ch.star_row).sum()
            if tv <= 1e-6:
                continue
            tried += 1
            t = training_bound_curve(ch, 9)
            a = achievable_curve(ch, 40)
            assert t.alphas[-1] == 0.0
            assert a.alpha_at(cap.capacity_nats) > 0.0
        assert tried >= 10

    def test_curve_validation(self):
        with pytest.raises(ValueError):
            ExponentCurve(
                rates=np.array([0.2, 0.1]), alphas=np.array([0.0, 0.0]),
                kind=ACHIEVABLE, channel_digest="x",
            )
        with pytest.raises(ValueError):
            ExponentCurve(
                rates=np.array([0.1, 0.2]), alphas=np.array([-0.1, 0.0]),
                kind=TRAINING_BOUND, channel_digest="x",
            )

    def test_csv_and_json_round(self):
        curve = training_bound_curve(ChannelModel.bsc(0.1), 5)
        lines = curve.to_csv_lines()
        assert lines[1] == "rate_nats,alpha,kind"
        assert len(lines) == 2 + 5
        d = curve.to_json_dict()
        assert d["kind"] == TRAINING_BOUND
        assert len(d["points"]) == 5
