"""Divergence, mutual-information, sampling, and type computations."""

import math

import numpy as np
import pytest

from asyncdmc import (
    ChannelModel,
    CounterRng,
    Distribution,
    Kernel,
    conditional_kl,
    empirical_conditional_type,
    kl_divergence,
    mutual_information,
    output_marginal,
    sample,
    simplex_grid,
)


def fsum_kl(p, q):
    """Independent oracle: compensated summation with math.log term by term."""
    total = []
    for a, b in zip(p, q):
        if a > 0.0 and b <= 0.0:
            return math.inf
        if a > 0.0:
            total.append(a * math.log(a / b))
    return math.fsum(total)


def random_law(rng, k, floor=0.0):
    raw = -np.log(rng.random(k))
    raw = raw / raw.sum()
    return Distribution((1.0 - floor) * raw + floor / k)


class TestDistribution:
    def test_normalizes_tiny_drift(self):
        d = Distribution([0.5, 0.5 + 5e-13])
        assert d.probs.sum() == pytest.approx(1.0, abs=1e-15)

    def test_rejects_bad_sum(self):
        with pytest.raises(ValueError):
            Distribution([0.5, 0.6])

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            Distribution([1.2, -0.2])

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            Distribution([])

    def test_immutable(self):
        d = Distribution([0.3, 0.7])
        with pytest.raises(ValueError):
            d.probs[0] = 0.5


class TestKernelAndChannel:
    def test_rows_validated(self):
        with pytest.raises(ValueError, match="row 1"):
            Kernel([[0.5, 0.5], [0.9, 0.2]])

    def test_star_index_checked(self):
        with pytest.raises(ValueError):
            ChannelModel(Kernel([[0.5, 0.5]]), star_index=1)

    def test_bsc(self):
        ch = ChannelModel.bsc(0.1)
        assert ch.star_row[0] == pytest.approx(0.9)
        assert ch.num_inputs == ch.num_outputs == 2


class TestKlDivergence:
    def test_identical_is_zero(self):
        p = Distribution([0.3, 0.7])
        assert kl_divergence(p, p) == 0.0

    def test_known_value(self):
        # 0.5*ln(4/3), checked against 30-digit arithmetic
        v = kl_divergence(Distribution([0.5, 0.5]), Distribution([0.25, 0.75]))
        assert v == pytest.approx(0.143841036225890464, abs=1e-15)

    def test_support_violation_is_inf(self):
        assert kl_divergence(Distribution([1, 0]), Distribution([0, 1])) == math.inf

    def test_zero_mass_entries_ignored(self):
        v = kl_divergence(Distribution([0.0, 1.0]), Distribution([0.5, 0.5]))
        assert v == pytest.approx(math.log(2.0), abs=1e-15)

    def test_alphabet_mismatch(self):
        with pytest.raises(ValueError):
            kl_divergence(Distribution([1.0]), Distribution([0.5, 0.5]))

    def test_nonnegative_and_zero_iff_equal(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            k = rng.integers(2, 9)
            p = random_law(rng, k)
            q = random_law(rng, k)
            d = kl_divergence(p, q)
            assert d >= 0.0
            if np.allclose(p.probs, q.probs, atol=1e-12):
                assert d <= 1e-10
            assert kl_divergence(p, p) == 0.0

    def test_matches_fsum_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(500):
            k = rng.integers(2, 9)
            p = random_law(rng, k)
            q = random_law(rng, k)
            assert kl_divergence(p, q) == pytest.approx(
                fsum_kl(p.probs, q.probs), abs=1e-12
            )


class TestConditionalKl:
    def test_equal_kernels_zero(self):
        q = Kernel([[0.9, 0.1], [0.2, 0.8]])
        assert conditional_kl(q, q, Distribution([0.4, 0.6])) == 0.0

    def test_point_mass_reduces_to_row(self):
        w = Kernel([[0.9, 0.1], [0.2, 0.8]])
        q = Kernel([[0.8, 0.2], [0.3, 0.7]])
        p = Distribution([0.0, 1.0])
        assert conditional_kl(w, q, p) == pytest.approx(
            kl_divergence(w.row(1), q.row(1)), abs=1e-15
        )

    def test_known_value(self):
        w = Kernel([[0.9, 0.1], [0.2, 0.8]])
        q = Kernel([[0.8, 0.2], [0.3, 0.7]])
        v = conditional_kl(w, q, Distribution([0.5, 0.5]))
        assert v == pytest.approx(0.0312110532563679001, abs=1e-15)

    def test_zero_weight_kills_infinite_row(self):
        w = Kernel([[1.0, 0.0], [0.5, 0.5]])
        q = Kernel([[0.0, 1.0], [0.5, 0.5]])
        assert conditional_kl(w, q, Distribution([0.0, 1.0])) == 0.0
        assert conditional_kl(w, q, Distribution([0.5, 0.5])) == math.inf

    def test_matches_weighted_rows(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            k = rng.integers(2, 5)
            ny = rng.integers(2, 6)
            w = Kernel(np.stack([random_law(rng, ny).probs for _ in range(k)]))
            q = Kernel(np.stack([random_law(rng, ny).probs for _ in range(k)]))
            p = random_law(rng, k)
            expected = math.fsum(
                p.probs[x] * fsum_kl(w.matrix[x], q.matrix[x])
                for x in range(k)
                if p.probs[x] > 0
            )
            assert conditional_kl(w, q, p) == pytest.approx(expected, abs=1e-12)


class TestOutputMarginal:
    def test_point_mass_gives_row(self):
        q = Kernel([[0.9, 0.1], [0.2, 0.8]])
        m = output_marginal(Distribution([1.0, 0.0]), q)
        np.testing.assert_allclose(m.probs, [0.9, 0.1], atol=1e-15)

    def test_symmetric_uniform(self):
        q = Kernel([[0.9, 0.1], [0.1, 0.9]])
        m = output_marginal(Distribution.uniform(2), q)
        np.testing.assert_allclose(m.probs, [0.5, 0.5], atol=1e-15)

    def test_hand_product(self):
        q = Kernel([[0.9, 0.1], [0.2, 0.8]])
        m = output_marginal(Distribution([0.25, 0.75]), q)
        np.testing.assert_allclose(m.probs, [0.375, 0.625], atol=1e-15)

    def test_stays_on_simplex(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            k, ny = rng.integers(2, 6), rng.integers(2, 6)
            q = Kernel(np.stack([random_law(rng, ny).probs for _ in range(k)]))
            m = output_marginal(random_law(rng, k), q)
            assert np.all(m.probs >= 0)
            assert abs(m.probs.sum() - 1.0) <= 1e-12


class TestMutualInformation:
    def test_identical_rows_zero(self):
        q = Kernel([[0.4, 0.6], [0.4, 0.6]])
        assert mutual_information(Distribution([0.3, 0.7]), q) == pytest.approx(0.0, abs=1e-14)

    def test_identity_kernel(self):
        q = Kernel(np.eye(4))
        assert mutual_information(Distribution.uniform(4), q) == pytest.approx(
            math.log(4.0), abs=1e-12
        )

    def test_bsc_closed_form(self):
        ch = ChannelModel.bsc(0.1)
        v = mutual_information(Distribution.uniform(2), ch.kernel)
        assert v == pytest.approx(0.36806420716849707, abs=1e-12)

    def test_bounded_by_log_alphabets(self):
        rng = np.random.default_rng(17)
        for _ in range(200):
            k, ny = rng.integers(2, 6), rng.integers(2, 6)
            q = Kernel(np.stack([random_law(rng, ny).probs for _ in range(k)]))
            v = mutual_information(random_law(rng, k), q)
            assert 0.0 <= v <= min(math.log(k), math.log(ny)) + 1e-12


class TestSample:
    def test_point_mass(self):
        rng = CounterRng(1)
        d = Distribution([0.0, 0.0, 1.0])
        assert all(sample(d, rng) == 2 for _ in range(50))

    def test_deterministic_given_state(self):
        d = Distribution([0.2, 0.3, 0.5])
        a = sample(d, CounterRng(42), size=1000)
        b = sample(d, CounterRng(42), size=1000)
        np.testing.assert_array_equal(a, b)

    def test_uniform_frequencies(self):
        # 10^6 draws; each frequency within 5 sigma of 1/4
        d = Distribution.uniform(4)
        draws = sample(d, CounterRng(123), size=1_000_000)
        freqs = np.bincount(draws, minlength=4) / 1e6
        sigma = math.sqrt(0.25 * 0.75 / 1e6)
        np.testing.assert_allclose(freqs, 0.25, atol=5 * sigma)

    def test_works_with_numpy_generator(self):
        d = Distribution([0.5, 0.5])
        v = sample(d, np.random.default_rng(0), size=10)
        assert set(np.unique(v)) <= {0, 1}


class TestEmpiricalConditionalType:
    def test_simple_counts(self):
        t = empirical_conditional_type([0, 0], [0, 1])
        np.testing.assert_allclose(t.rows[0], [0.5, 0.5])

    def test_constant_outputs_point_mass(self):
        t = empirical_conditional_type([0, 1, 0, 1], [1, 1, 1, 1], num_outputs=2)
        np.testing.assert_allclose(t.rows[:, 1], [1.0, 1.0])

    def test_hand_count(self):
        t = empirical_conditional_type([0, 1, 0, 1], [0, 0, 1, 1])
        np.testing.assert_allclose(t.rows[0], [0.5, 0.5])
        np.testing.assert_allclose(t.rows[1], [0.5, 0.5])

    def test_absent_letter_flagged(self):
        t = empirical_conditional_type([0, 0], [0, 1], num_inputs=3)
        assert t.defined.tolist() == [True, False, False]
        assert np.isnan(t.rows[1]).all()
        with pytest.raises(ValueError, match="undefined"):
            t.kernel()

    def test_length_mismatch_and_empty(self):
        with pytest.raises(ValueError):
            empirical_conditional_type([0, 1], [0])
        with pytest.raises(ValueError):
            empirical_conditional_type([], [])


class TestSimplexGrid:
    def test_binary_grid(self):
        g = simplex_grid(2, 4)
        assert g.shape == (5, 2)
        np.testing.assert_allclose(g.sum(axis=1), 1.0)
        np.testing.assert_allclose(g[:, 0], [0.0, 0.25, 0.5, 0.75, 1.0])

    def test_counts(self):
        assert simplex_grid(3, 10).shape[0] == 66  # C(12, 2)
        assert simplex_grid(1, 5).shape == (1, 1)

    def test_contains_vertices(self):
        g = simplex_grid(3, 7)
        for v in np.eye(3):
            assert any(np.array_equal(row, v) for row in g)
