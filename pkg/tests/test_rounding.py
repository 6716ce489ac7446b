import numpy as np
import pytest

from opticache.rounding import (
    AlmostIntegralVector,
    dantzig_relax,
    depround,
    madow_sample,
    rand_half,
)


class FixedU:
    """Stand-in rng whose uniform draw is pinned."""

    def __init__(self, u):
        self.u = u

    def random(self):
        return self.u


class TestAlmostIntegralVector:
    def test_detects_fractional_coordinate(self):
        v = AlmostIntegralVector(np.array([1.0, 0.3, 0.0]))
        assert v.fractional_index == 1
        assert list(v.ones()) == [0]

    def test_integral_vector(self):
        v = AlmostIntegralVector(np.array([1.0, 0.0, 1.0]))
        assert v.fractional_index is None
        assert list(v.ones()) == [0, 2]

    def test_rejects_two_fractional(self):
        with pytest.raises(ValueError):
            AlmostIntegralVector(np.array([0.5, 0.5]))

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            AlmostIntegralVector(np.array([1.2, 0.0]))


class TestMadow:
    def test_integral_input_is_deterministic(self):
        x = np.array([1.0, 1.0, 0.0, 0.0])
        rng = np.random.default_rng(0)
        for _ in range(20):
            assert madow_sample(x, 2, rng).files == frozenset({0, 1})

    def test_u_ranges_for_half_half(self):
        # cumulative intervals: item 0 owns [0, .5), item 1 owns [.5, 1)
        x = np.array([0.5, 0.5])
        assert madow_sample(x, 1, FixedU(0.25)).files == frozenset({0})
        assert madow_sample(x, 1, FixedU(0.75)).files == frozenset({1})

    def test_marginals_and_cardinality(self):
        x = np.array([0.7, 0.6, 0.7])
        rng = np.random.default_rng(1)
        freq = np.zeros(3)
        trials = 20000
        for _ in range(trials):
            s = madow_sample(x, 2, rng)
            assert len(s) == 2  # masses sum to the capacity exactly
            for i in s.files:
                freq[i] += 1
        assert np.allclose(freq / trials, x, atol=0.01)

    def test_cardinality_never_exceeds_capacity(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            n = int(rng.integers(1, 8))
            c = int(rng.integers(1, 5))
            x = rng.uniform(0, 1, n)
            total = x.sum()
            if total > c:
                x *= (c / total) * rng.uniform(0.2, 1.0)
            s = madow_sample(x, c, rng)
            assert len(s) <= c

    def test_rejects_bad_inputs(self):
        rng = np.random.default_rng(3)
        with pytest.raises(ValueError):
            madow_sample(np.array([0.9, 0.9]), 1, rng)
        with pytest.raises(ValueError):
            madow_sample(np.array([1.2]), 1, rng)
        with pytest.raises(ValueError):
            madow_sample(np.array([-0.1]), 1, rng)


class TestDantzig:
    def test_worked_example(self):
        # ratios (3, 1, 1): tie between items 1 and 2 broken by index
        v, k = dantzig_relax(5.0, np.array([6.0, 4.0, 3.0]), np.array([2.0, 4.0, 3.0]))
        assert np.allclose(v.mass, [1.0, 0.75, 0.0])
        assert k == 1
        assert v.fractional_index == 1

    def test_everything_fits(self):
        v, k = dantzig_relax(10.0, np.array([1.0, 9.0]), np.array([2.0, 3.0]))
        assert np.allclose(v.mass, [1.0, 1.0])
        assert k is None

    def test_single_exact_fit(self):
        v, k = dantzig_relax(2.0, np.array([5.0]), np.array([2.0]))
        assert np.allclose(v.mass, [1.0])
        assert k is None

    def test_rejects_nonpositive_sizes(self):
        with pytest.raises(ValueError):
            dantzig_relax(1.0, np.array([1.0]), np.array([0.0]))

    def test_properties_on_random_instances(self):
        rng = np.random.default_rng(4)
        for _ in range(1000):
            n = int(rng.integers(1, 12))
            p = rng.normal(0, 5, n)
            s = rng.uniform(0.2, 3.0, n)
            c = float(rng.uniform(0.2, max(0.5, s.sum() * 1.2)))
            s = np.minimum(s, c)
            v, k = dantzig_relax(c, p, s)
            # at most one fractional coordinate, exact weighted sum
            assert v.mass.min() >= 0 and v.mass.max() <= 1
            assert s @ v.mass == pytest.approx(min(c, s.sum()), abs=1e-9)
            # the ones are exactly the maximal-ratio prefix
            order = np.lexsort((np.arange(n), -p / s))
            taken = np.flatnonzero(v.mass >= 1 - 1e-12)
            prefix_len = len(taken)
            assert set(taken) == set(order[:prefix_len])
            if k is not None:
                assert k == order[prefix_len]


class TestRandHalf:
    def test_worked_example(self):
        v = AlmostIntegralVector(np.array([1.0, 1.0, 0.5, 0.0]))
        rng = np.random.default_rng(5)
        seen = {frozenset({0, 1}): 0, frozenset({2}): 0}
        trials = 10000
        for _ in range(trials):
            seen[rand_half(v, rng).files] += 1
        assert abs(seen[frozenset({0, 1})] / trials - 0.5) < 0.02

    def test_integral_input_returns_ones_surely(self):
        v = AlmostIntegralVector(np.array([1.0, 0.0, 0.0]))
        rng = np.random.default_rng(6)
        for _ in range(50):
            assert rand_half(v, rng).files == frozenset({0})

    def test_single_fractional_expectation(self):
        v = AlmostIntegralVector(np.array([0.3]))
        rng = np.random.default_rng(7)
        trials = 20000
        hits = sum(0 in rand_half(v, rng) for _ in range(trials))
        p = hits / trials
        assert abs(p - 0.5) < 0.02
        assert p >= 0.5 * 0.3  # E[x_0] >= v_0 / 2


class TestDepRound:
    def test_two_halves(self):
        rng = np.random.default_rng(8)
        outcomes = set()
        for _ in range(200):
            out = depround(np.array([0.5, 0.5]), np.array([1.0, 1.0]), rng)
            outcomes.add(tuple(out.mass))
        assert outcomes == {(1.0, 0.0), (0.0, 1.0)}

    def test_already_almost_integral_unchanged(self):
        rng = np.random.default_rng(9)
        a = np.array([1.0, 0.3, 0.0])
        out = depround(a, np.array([2.0, 1.0, 1.0]), rng)
        assert np.allclose(out.mass, a)

    def test_lemma_properties(self):
        # unbiased marginals, exact weighted-sum preservation, <= 1 fractional
        rng = np.random.default_rng(10)
        for _ in range(300):
            n = int(rng.integers(2, 9))
            a = rng.uniform(0, 1, n)
            s = rng.uniform(0.3, 3.0, n)
            out = depround(a, s, rng)
            assert s @ out.mass == pytest.approx(s @ a, abs=1e-9)
            frac = np.sum((out.mass > 1e-9) & (out.mass < 1 - 1e-9))
            assert frac <= 1

    def test_unbiased_marginals_monte_carlo(self):
        rng = np.random.default_rng(11)
        a = np.array([0.25, 0.25, 0.25, 0.25])
        s = np.ones(4)
        trials = 20000
        acc = np.zeros(4)
        for _ in range(trials):
            out = depround(a, s, rng)
            acc += out.mass
            assert out.mass.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.allclose(acc / trials, a, atol=0.01)

    def test_rejects_out_of_range(self):
        rng = np.random.default_rng(12)
        with pytest.raises(ValueError):
            depround(np.array([1.4, 0.2]), np.ones(2), rng)
        with pytest.raises(ValueError):
            depround(np.array([0.4, 0.2]), np.array([1.0, -1.0]), rng)
