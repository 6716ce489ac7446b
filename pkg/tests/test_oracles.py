import numpy as np
import pytest

from opticache.core import RequestEvent
from opticache.oracles import OracleSpec, parse_oracle, predict, sinusoidal_accuracy


def req(file, slot=1, user=None):
    return RequestEvent(slot=slot, file=file, user=user)


def test_perfect_is_one_hot_on_true_file():
    rng = np.random.default_rng(0)
    p = predict(OracleSpec("perfect"), req(7), rng, 10)
    assert p.mass_at(7) == 1.0
    assert p.total_mass() == pytest.approx(1.0)


def test_adversarial_lowest_wrong_index():
    rng = np.random.default_rng(0)
    assert predict(OracleSpec("adversarial"), req(5), rng, 10).mass_at(0) == 1.0
    assert predict(OracleSpec("adversarial"), req(0), rng, 10).mass_at(1) == 1.0


def test_accuracy_zero_never_hits():
    rng = np.random.default_rng(1)
    spec = OracleSpec("accuracy", rho=0.0)
    for _ in range(5000):
        f = int(rng.integers(10))
        p = predict(spec, req(f), rng, 10)
        assert p.mass_at(f) == 0.0
        assert p.total_mass() == pytest.approx(1.0)


def test_accuracy_rate_matches_rho():
    rng = np.random.default_rng(2)
    spec = OracleSpec("accuracy", rho=0.65)
    trials = 100_000
    correct = 0
    for _ in range(trials):
        f = int(rng.integers(20))
        correct += predict(spec, req(f), rng, 20).mass_at(f) == 1.0
    assert abs(correct / trials - 0.65) < 0.01


def test_density_example():
    rng = np.random.default_rng(3)
    p = predict(OracleSpec("density", zeta=0.9), req(3), rng, 11)
    assert p.mass_at(3) == pytest.approx(0.9)
    assert p.mass_at(0) == pytest.approx(0.01)


def test_dirichlet_is_valid_distribution_independent_of_request():
    rng = np.random.default_rng(4)
    p = predict(OracleSpec("dirichlet"), req(2), rng, 8)
    dense = p.to_dense()
    assert dense.sum() == pytest.approx(1.0)
    assert np.all(dense >= 0)


def test_null_prediction():
    rng = np.random.default_rng(5)
    assert predict(OracleSpec("null"), req(2), rng, 8).is_null


def test_bipartite_prediction_lives_on_pairs():
    rng = np.random.default_rng(6)
    p = predict(OracleSpec("perfect"), req(2, user=1), rng, 12, n_users=3)
    assert p.mass_at(2 * 3 + 1) == 1.0


class TestSinusoidalAccuracy:
    def test_midpoint_at_zero(self):
        assert sinusoidal_accuracy(0, 1000, 0.2, 0.8) == pytest.approx(0.5)

    def test_peak_at_quarter_period(self):
        assert sinusoidal_accuracy(1, 4, 0.0, 1.0) == pytest.approx(1.0)

    def test_range_containment(self):
        for t in range(0, 3000, 7):
            rho = sinusoidal_accuracy(t, 1000, 0.5, 0.9)
            assert 0.5 - 1e-12 <= rho <= 0.9 + 1e-12

    def test_bad_range_rejected(self):
        with pytest.raises(ValueError):
            sinusoidal_accuracy(0, 10, 0.9, 0.5)


def test_sinusoidal_oracle_uses_slot():
    # period 4, lo 0, hi 1: slot 1 has rho = 1 (always correct),
    # slot 3 has rho = 0 (never correct)
    spec = parse_oracle("rho-sin:0,1,4")
    rng = np.random.default_rng(7)
    for _ in range(50):
        assert predict(spec, req(4, slot=1), rng, 10).mass_at(4) == 1.0
        assert predict(spec, req(4, slot=3), rng, 10).mass_at(4) == 0.0


class TestParseOracle:
    def test_plain_kinds(self):
        for kind in ("perfect", "adversarial", "null", "dirichlet"):
            assert parse_oracle(kind).kind == kind

    def test_parameterized(self):
        assert parse_oracle("rho:0.75") == OracleSpec("accuracy", rho=0.75)
        assert parse_oracle("zeta:0.4") == OracleSpec("density", zeta=0.4)
        sin = parse_oracle("rho-sin:0.5,0.9,1000")
        assert (sin.rho_lo, sin.rho_hi, sin.period) == (0.5, 0.9, 1000.0)

    def test_garbage_rejected(self):
        with pytest.raises(ValueError):
            parse_oracle("psychic")
        with pytest.raises(ValueError):
            parse_oracle("rho:1.5")
        with pytest.raises(ValueError):
            parse_oracle("rho-sin:0.5,0.9")
