import numpy as np
import pytest

from isa_solver.errors import UsageError
from isa_solver.oracles import (
    CallableOracle,
    EpsSubgradientOracle,
    L1Oracle,
    PolyhedralObjective,
    eps_subgradient_wrap,
    gamma_from_schedule,
    l1_subgradient,
    l1_value,
    polyhedral_eval,
)
from isa_solver.schedules import harmonic_pair_schedule


def test_l1_examples():
    assert l1_value(np.array([1.0, -2.0, 0.0])) == 3.0
    assert np.array_equal(l1_subgradient(np.array([1.0, -2.0, 0.0])), [1.0, -1.0, 0.0])
    assert l1_value(np.zeros(4)) == 0.0
    assert np.array_equal(l1_subgradient(np.zeros(4)), np.zeros(4))


def test_l1_subgradient_membership(rng):
    for _ in range(1000):
        x = rng.standard_normal(12)
        x[rng.random(12) < 0.3] = 0.0
        h = l1_subgradient(x)
        assert np.max(np.abs(h)) <= 1.0
        assert h @ x == pytest.approx(l1_value(x), abs=1e-12)


def test_l1_oracle_declares_bound():
    oracle = L1Oracle(16)
    assert oracle.subgradient_bound == 4.0
    f, h = oracle.evaluate(np.array([3.0, -4.0]))
    assert f == 7.0
    assert np.array_equal(h, [1.0, -1.0])
    assert oracle.gamma(5) == 0.0


def test_polyhedral_examples():
    obj = PolyhedralObjective.from_pieces([(1.0, 0.0), (-1.0, 0.0)])
    value, h, i = polyhedral_eval(obj, np.array([2.0]))
    assert (value, i) == (2.0, 0)
    assert np.array_equal(h, [1.0])
    # tie at x = 0 goes to the first piece
    value, h, i = polyhedral_eval(obj, np.array([0.0]))
    assert (value, i) == (0.0, 0)
    assert np.array_equal(h, [1.0])

    single = PolyhedralObjective.from_pieces([(2.0, 1.0)])
    value, h, i = polyhedral_eval(single, np.array([3.0]))
    assert (value, i) == (7.0, 0)
    assert np.array_equal(h, [2.0])


def test_polyhedral_subgradient_inequality_is_exact(rng):
    slopes = rng.integers(-5, 6, size=(7, 4)).astype(float)
    slopes[np.all(slopes == 0, axis=1), 0] = 1.0
    offsets = rng.integers(-10, 11, size=7).astype(float)
    obj = PolyhedralObjective(slopes, offsets)
    for _ in range(500):
        x = rng.integers(-20, 21, size=4).astype(float)
        y = rng.integers(-20, 21, size=4).astype(float)
        f_x, h = obj.evaluate(x)
        assert obj.value(y) >= f_x + h @ (y - x)


def test_polyhedral_sharpness_and_bound():
    obj = PolyhedralObjective(np.array([[3.0, 4.0], [1.0, 0.0]]), np.zeros(2))
    assert obj.sharpness_mu == 1.0
    assert obj.subgradient_bound == 5.0


def test_polyhedral_rejects_bad_pieces():
    with pytest.raises(UsageError):
        PolyhedralObjective(np.array([[0.0, 0.0], [1.0, 0.0]]), np.zeros(2))
    with pytest.raises(UsageError):
        PolyhedralObjective(np.ones((2, 2)), np.zeros(3))
    with pytest.raises(UsageError):
        polyhedral_eval(PolyhedralObjective(np.ones((1, 2)), np.zeros(1)), np.ones(3))


def test_callable_oracle():
    oracle = CallableOracle(lambda x: float(np.max(np.abs(x))), lambda x: np.eye(x.size)[np.argmax(np.abs(x))] *
                            np.sign(x[np.argmax(np.abs(x))]), subgradient_bound=1.0)
    f, h = oracle.evaluate(np.array([1.0, -3.0]))
    assert f == 3.0
    assert np.array_equal(h, [0.0, -1.0])


def test_wrap_with_zero_gamma_returns_base():
    base = L1Oracle(3)
    assert eps_subgradient_wrap(base, 0.0) is base
    assert eps_subgradient_wrap(base, [0.0, 0.0, 0.0]) is base


def test_wrap_rejects_negative_gamma():
    with pytest.raises(UsageError):
        eps_subgradient_wrap(L1Oracle(), [0.1, -0.1])
    wrapped = eps_subgradient_wrap(L1Oracle(), lambda k: -1.0)
    with pytest.raises(UsageError):
        wrapped.evaluate(np.ones(2), 0)


def test_l1_gamma_subgradient_single_coordinate():
    wrapped = eps_subgradient_wrap(L1Oracle(1), 0.5, seed=4)
    f, h = wrapped.evaluate(np.array([3.0]), 0)
    assert f == 3.0
    assert 1.0 - 0.5 / 3.0 <= h[0] <= 1.0


def test_l1_gamma_subgradient_on_probes(rng):
    wrapped = eps_subgradient_wrap(L1Oracle(10), 0.3, seed=1)
    for k in range(20):
        x = rng.standard_normal(10)
        x[:3] = 0.0
        f, h = wrapped.evaluate(x, k)
        for _ in range(100):
            d = rng.standard_normal(10)
            d *= 10.0 * rng.uniform() / np.linalg.norm(d)
            y = x + d
            assert l1_value(y) >= f + h @ (y - x) - 0.3 - 1e-12


def test_generic_gamma_subgradient_on_probes(rng):
    base = CallableOracle(lambda x: float(np.linalg.norm(x)), lambda x: x / np.linalg.norm(x), subgradient_bound=1.0)
    wrapped = eps_subgradient_wrap(base, 0.5, seed=2)
    assert isinstance(wrapped, EpsSubgradientOracle)
    x = np.array([1.0, 2.0, -2.0])
    f, h = wrapped.evaluate(x, 3)
    assert not np.allclose(h, base.subgradient(x))
    for _ in range(200):
        d = rng.standard_normal(3)
        d *= 10.0 * rng.uniform() / np.linalg.norm(d)
        y = x + d
        assert base.value(y) >= f + h @ d - 0.5 - 1e-12


def test_wrapped_oracle_is_deterministic_per_iteration():
    x = np.array([1.0, -2.0, 0.5, 0.0])
    a = eps_subgradient_wrap(L1Oracle(4), 0.2, seed=9)
    b = eps_subgradient_wrap(L1Oracle(4), 0.2, seed=9)
    assert np.array_equal(a.evaluate(x, 5)[1], b.evaluate(x, 5)[1])
    assert np.array_equal(a.evaluate(x, 5)[1], a.evaluate(x, 5)[1])
    assert not np.array_equal(a.evaluate(x, 5)[1], a.evaluate(x, 6)[1])


def test_finite_gamma_sequence_runs_out():
    wrapped = eps_subgradient_wrap(L1Oracle(2), [0.4, 0.2])
    assert wrapped.gamma(1) == 0.2
    assert wrapped.gamma(2) == 0.0
    x = np.array([1.0, -1.0])
    assert np.array_equal(wrapped.evaluate(x, 2)[1], [1.0, -1.0])


def test_gamma_from_schedule():
    schedule = harmonic_pair_schedule(1.0, 1.0)
    from_eps = gamma_from_schedule(schedule, 2.0)
    from_alpha = gamma_from_schedule(schedule, 1.0, source='alpha')
    assert from_eps(0) == pytest.approx(0.5)
    assert from_alpha(9) == pytest.approx(0.1)
    with pytest.raises(UsageError):
        gamma_from_schedule(schedule, 1.0, source='beta')
    with pytest.raises(UsageError):
        gamma_from_schedule(schedule, 0.0)
