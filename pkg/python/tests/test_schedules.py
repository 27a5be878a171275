import numpy as np
import pytest

from isa_solver.errors import ConfigError, UsageError
from isa_solver.oracles import L1Oracle, PolyhedralObjective
from isa_solver.projections import AffineProjector, BoxProjector
from isa_solver.schedules import (
    BoundContext,
    BpDistanceBound,
    DynamicConfig,
    ExactDistanceBound,
    FixedCgPolicy,
    FixedEpsPolicy,
    HarmonicPairSchedule,
    NormGrowthBound,
    PowerPairSchedule,
    StronglyConvexBound,
    TheoremOverPolicy,
    TheoremUnderPolicy,
    WeakSharpBound,
    distance_bound_bp,
    distance_bound_norm_growth,
    distance_bound_strongly_convex,
    distance_bound_weak_sharp,
    dynamic_step,
    eps_bar,
    eps_tilde,
    eps_tilde_checked,
    get_accuracy_policy,
    get_distance_bound,
    get_lambda_sequence,
    get_schedule,
    harmonic_pair_schedule,
    lambda_constant,
    lambda_geometric,
    lambda_vanishing,
    nu_default,
    power_pair_schedule,
    underestimate_threshold,
)


def test_harmonic_pair_examples():
    schedule = harmonic_pair_schedule(1.0, 1.0)
    assert schedule.alpha(0) == 1.0
    assert schedule.eps(0) == 0.25
    assert schedule.tail_bound(0) >= np.pi ** 2 / 6 - 1
    assert schedule.alpha(9) == pytest.approx(0.1)
    assert schedule.eps(9) == pytest.approx(1.0 / 121.0)


def test_harmonic_pair_zero_eps_scale():
    schedule = harmonic_pair_schedule(2.0, 0.0)
    assert schedule.eps(3) == 0.0
    assert schedule.alpha(3) == 0.5


def test_harmonic_pair_rejects_eps_scale_above_alpha_scale():
    with pytest.raises(UsageError):
        harmonic_pair_schedule(1.0, 2.0)
    with pytest.raises(UsageError):
        harmonic_pair_schedule(0.0, 0.0)


def test_alpha_dominates_remaining_eps():
    schedule = harmonic_pair_schedule(1.0, 1.0)
    K = 10 ** 6
    ks = np.arange(K + 1)
    eps = schedule.eps(ks)
    # Σ_{j=k}^{K} ε_j, plus Σ_{j>K} 1/(j+2)² ≤ 1/(K+2)
    remaining = np.cumsum(eps[::-1])[::-1] + 1.0 / (K + 2)
    head = np.arange(10 ** 4 + 1)
    assert np.all(schedule.alpha(head) >= remaining[head])
    assert np.all(schedule.tail_bound(head) >= remaining[head])


def test_schedules_accept_arrays():
    schedule = harmonic_pair_schedule()
    assert np.allclose(schedule.alpha(np.array([0, 1, 3])), [1.0, 0.5, 0.25])


def test_power_pair():
    schedule = power_pair_schedule(1.0, 1.0, 0.75)
    ks = np.arange(1000)
    assert np.all(schedule.alpha(ks) >= schedule.tail_bound(ks))
    assert schedule.alpha(15) == pytest.approx(16 ** -0.75)
    with pytest.raises(UsageError):
        PowerPairSchedule(power=0.5)
    with pytest.raises(UsageError):
        PowerPairSchedule(power=1.5)


def test_dynamic_step_examples():
    assert dynamic_step(3.0, 1.0, 1.0, 4.0) == 0.5
    assert dynamic_step(1.0, 1.0, 1.0, 4.0) == 0.0
    with pytest.raises(UsageError):
        dynamic_step(3.0, 1.0, 1.0, 0.0)
    with pytest.raises(UsageError):
        dynamic_step(0.5, 1.0, 1.0, 1.0)


def test_eps_bar_example():
    assert eps_bar(2.0, 1.0, 1.0, 1.0, 0.0) == pytest.approx(np.sqrt(2.0) - 1.0, rel=1e-12)


def test_eps_bar_limits():
    assert eps_bar(1.0 + 1e-12, 1.0, 1.0, 1.0, 1.0) < 1e-20
    assert eps_bar(2.0, 1.0, 1.0, 1.0, 1e12) < 1e-12


def test_eps_bar_is_root_of_quadratic(rng):
    for _ in range(10000):
        phi = rng.uniform(-5.0, 5.0)
        f = phi + 10.0 ** rng.uniform(-6.0, 3.0)
        lam = rng.uniform(0.01, 1.99)
        h = 10.0 ** rng.uniform(-3.0, 3.0)
        d = 10.0 ** rng.uniform(-6.0, 6.0)
        e = eps_bar(f, phi, lam, h, d)
        s = lam * (f - phi) / h
        c = lam * (2.0 - lam) * (f - phi) ** 2 / h ** 2
        assert e > 0
        assert abs(e * e + 2.0 * (s + d) * e - c) <= 1e-10 * c


def test_accuracy_bounds_decrease_with_distance():
    assert eps_bar(3.0, 1.0, 1.0, 2.0, 5.0) <= eps_bar(3.0, 1.0, 1.0, 2.0, 1.0)
    assert eps_tilde(3.0, 0.0, 2.5, 1.0, 1.0, 2.0, 5.0) <= eps_tilde(3.0, 0.0, 2.5, 1.0, 1.0, 2.0, 1.0)


def test_eps_tilde_shrinks_as_distance_grows(rng):
    unforced = 0
    for _ in range(10000):
        phi = rng.uniform(-5.0, 5.0)
        f_star = phi + 10.0 ** rng.uniform(-3.0, 2.0)
        f = phi + 10.0 ** rng.uniform(-4.0, 3.0)
        beta = rng.uniform(0.01, 1.99)
        lam = beta * rng.uniform(0.01, 1.0)
        h = 10.0 ** rng.uniform(-3.0, 3.0)
        d = 10.0 ** rng.uniform(-6.0, 6.0)
        d_far = d * (1.0 + 10.0 ** rng.uniform(-6.0, 2.0))
        near, near_forced = eps_tilde_checked(f, phi, f_star, lam, beta, h, d)
        far, far_forced = eps_tilde_checked(f, phi, f_star, lam, beta, h, d_far)
        if near_forced:
            continue
        unforced += 1
        assert not far_forced
        assert far <= near * (1 + 1e-12)
    assert unforced > 1000


def test_eps_bar_preconditions():
    with pytest.raises(UsageError):
        eps_bar(1.0, 1.0, 1.0, 1.0, 0.0)
    with pytest.raises(UsageError):
        eps_bar(2.0, 1.0, 2.0, 1.0, 0.0)
    with pytest.raises(UsageError):
        eps_bar(2.0, 1.0, 1.0, 0.0, 0.0)


def test_eps_tilde_example():
    # φ = f* − 1, f = f* + 2, ‖h‖ = 1: L = −3, s = 3
    assert eps_tilde(3.0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.0) == pytest.approx(2.0 * np.sqrt(3.0) - 3.0, rel=1e-12)


def test_eps_tilde_at_threshold_is_zero():
    f_k = underestimate_threshold(2.0, 0.0, 1.0)
    assert f_k == 4.0
    assert eps_tilde(f_k, 0.0, 2.0, 1.0, 1.0, 2.0, 0.5) == pytest.approx(0.0, abs=1e-15)


def test_eps_tilde_negative_discriminant():
    value, forced = eps_tilde_checked(1.0, 0.0, 10.0, 1.0, 1.0, 1.0, 0.0)
    assert (value, forced) == (0.0, True)


def test_eps_tilde_preconditions():
    with pytest.raises(UsageError):
        eps_tilde(3.0, 2.0, 2.0, 1.0, 1.0, 1.0, 0.0)
    with pytest.raises(UsageError):
        eps_tilde(3.0, 0.0, 2.0, 1.5, 1.0, 1.0, 0.0)


def test_nu_default():
    nu = nu_default(1.0)
    assert nu(0) == 1.0
    assert nu(1) == 0.25
    partial = np.cumsum(nu(np.arange(10 ** 6)))
    assert np.all(partial <= nu.sum_bound)


def test_lambda_sequences():
    assert lambda_constant(1.5)(7) == 1.5
    vanishing = lambda_vanishing(1.0)
    assert vanishing(0) == 1.0
    assert vanishing(2) == pytest.approx(1.0 / (1.0 + np.log(3.0)))
    assert np.sum(vanishing(np.arange(10 ** 6))) > 10.0
    with pytest.raises(UsageError):
        lambda_constant(2.0)
    with pytest.raises(UsageError):
        lambda_vanishing(0.0)


def test_lambda_geometric():
    geometric = lambda_geometric(1.0, 0.5)
    assert geometric(0) == 1.0
    assert geometric(3) == 0.125
    assert geometric.vanishing
    assert geometric.upper_bound == 1.0
    assert np.all(np.diff(geometric(np.arange(50))) < 0)
    assert get_lambda_sequence('geometric', {'lambda0': 0.5, 'decay': 0.9})(1) == pytest.approx(0.45)
    with pytest.raises(UsageError):
        lambda_geometric(2.0, 0.5)
    with pytest.raises(UsageError):
        lambda_geometric(1.0, 1.0)


def test_strongly_convex_bound():
    assert distance_bound_strongly_convex(2.0, 10.0, 2.0, 100.0) == pytest.approx(2.0)
    assert distance_bound_strongly_convex(2.0, 10.0, 2.0, 4.0) == pytest.approx(1.0)
    with pytest.raises(UsageError):
        distance_bound_strongly_convex(2.0, 1.0, 2.0, 4.0)
    with pytest.raises(UsageError):
        distance_bound_strongly_convex(0.0, 3.0, 2.0, 4.0)


def test_strongly_convex_provider_is_marked_loose():
    provider = StronglyConvexBound(1.0, 0.0)
    assert provider.loose
    assert provider.bound(np.array([2.0]), 4.0, BoundContext(0.0, h_norm=4.0)) == pytest.approx(2.0)


def test_norm_growth_bound():
    assert distance_bound_norm_growth(1.0, 0.0, np.array([3.0, 4.0]), 2.0) == 7.0
    # ‖y‖₁ ≥ ‖y‖₂, so every minimizer lies in the ball of radius f*
    provider = NormGrowthBound(1.0, 0.0, 2.0)
    x_star = np.array([2.0, 0.0])
    x = np.array([-1.0, 5.0])
    assert provider.bound(x, 6.0, BoundContext(0.0)) >= np.linalg.norm(x - x_star)


def test_weak_sharp_examples():
    assert distance_bound_weak_sharp(1.0, 0.0, 0.0) == 0.0
    assert distance_bound_weak_sharp(2.0, 7.0, 1.0) == 3.0
    assert distance_bound_weak_sharp(1.0, 0.0, 0.0, d_X_bound=2.0, at_feasible=False, f_projected=1.0) == 3.0
    with pytest.raises(UsageError):
        distance_bound_weak_sharp(1.0, 1.0, 0.0, at_feasible=False)
    with pytest.raises(UsageError):
        distance_bound_weak_sharp(0.0, 1.0, 0.0)


def test_weak_sharp_bound_is_sound_for_abs(rng):
    # f(x) = |x| on the box [-10, 10]: X* = {0}, mu = 1
    oracle = PolyhedralObjective.from_pieces([(1.0, 0.0), (-1.0, 0.0)])
    box = BoxProjector(np.array([-10.0]), np.array([10.0]))
    provider = WeakSharpBound(oracle.sharpness_mu)
    for _ in range(1000):
        x = rng.uniform(-30.0, 30.0, size=1)
        bound = provider.bound(x, oracle.value(x), BoundContext(0.0, box, oracle))
        assert bound >= abs(x[0]) - 1e-12


def test_strongly_convex_bound_is_sound(rng):
    # f(x) = 2x² has modulus 2, so C = 1 is a valid lower estimate; X* = {0}
    provider = StronglyConvexBound(1.0, 0.0)
    for _ in range(1000):
        x = rng.uniform(-50.0, 50.0)
        bound = provider.bound(np.array([x]), 2.0 * x * x, BoundContext(0.0, h_norm=4.0 * abs(x)))
        assert bound >= abs(x) * (1 - 1e-12)


def test_norm_growth_bound_is_sound(rng):
    # f(x) = |x − 3| ≥ |x| − 3 with f* = 0 at x = 3
    provider = NormGrowthBound(1.0, 3.0, 0.0)
    for _ in range(1000):
        x = rng.uniform(-50.0, 50.0)
        bound = provider.bound(np.array([x]), abs(x - 3.0), BoundContext(0.0))
        assert bound >= abs(x - 3.0) * (1 - 1e-12)


def test_bp_bound_is_sound(rng, small_instance):
    inst = small_instance
    projector = AffineProjector(inst.A, inst.b, sigma=inst.sigma_min)
    oracle = L1Oracle(inst.n)
    context = BoundContext(0.0, projector, oracle)
    provider = BpDistanceBound()
    # within f*/(2√n) of x* the objective term alone covers the distance;
    # along range(Aᵀ) the residual term does
    radius = inst.f_star / (2.0 * np.sqrt(inst.n))
    for i in range(1000):
        if i % 2:
            e = rng.standard_normal(inst.n)
            e *= rng.uniform(0.0, 1.0) * radius / np.linalg.norm(e)
        else:
            e = inst.A.T @ rng.standard_normal(inst.m) * 10.0 ** rng.uniform(-3.0, 2.0)
        x = inst.x_star + e
        assert provider.bound(x, oracle.value(x), context) >= np.linalg.norm(e) * (1 - 1e-9)


def test_bp_bound_example():
    projector = AffineProjector(np.eye(2), np.zeros(2))
    assert distance_bound_bp(projector, np.array([3.0, 4.0]), 7.0, 0.0) == pytest.approx(14.9497, abs=1e-4)
    provider = BpDistanceBound()
    context = BoundContext(0.0, projector, L1Oracle(2))
    assert provider.bound(np.array([3.0, 4.0]), 7.0, context) == pytest.approx(14.9497, abs=1e-4)
    with pytest.raises(UsageError):
        provider.bound(np.array([3.0, 4.0]), 7.0, BoundContext(0.0))


def test_exact_distance_bound():
    provider = ExactDistanceBound(x_star=np.array([1.0, 1.0]))
    assert provider.bound(np.array([4.0, 5.0])) == 5.0
    onto_line = ExactDistanceBound(project_optimal=lambda x: np.array([x[0], 0.0]))
    assert onto_line.bound(np.array([2.0, -3.0])) == 3.0
    with pytest.raises(UsageError):
        ExactDistanceBound()


def test_fixed_policies():
    config = DynamicConfig(phi=0.0)
    cg = FixedCgPolicy(3).decide(config, 0, 1.0, 1.0, None, None)
    assert cg.eps == np.inf
    assert cg.max_inner == 3
    assert FixedEpsPolicy(1e-6).decide(config, 0, 1.0, 1.0, None, None).eps == 1e-6
    with pytest.raises(UsageError):
        FixedCgPolicy(0)


def test_theorem_over_policy():
    projector = AffineProjector(np.eye(2), np.zeros(2))
    config = DynamicConfig(phi=0.0, accuracy=TheoremOverPolicy(), distance_bound=BpDistanceBound())
    x = np.array([3.0, 4.0])
    context = BoundContext(0.0, projector, L1Oracle(2), np.sqrt(2.0))
    decision = config.accuracy.decide(config, 0, 7.0, np.sqrt(2.0), x, context)
    expected = min(eps_bar(7.0, 0.0, 1.0, np.sqrt(2.0), decision.dist_bound), config.nu_seq(0))
    assert decision.eps == pytest.approx(expected)
    assert decision.dist_bound == pytest.approx(14.9497, abs=1e-4)


def test_theorem_under_policy_forces_exact():
    projector = BoxProjector(np.array([-10.0]), np.array([10.0]))
    oracle = PolyhedralObjective.from_pieces([(1.0, 0.0), (-1.0, 0.0)])
    config = DynamicConfig(phi=0.0, accuracy=TheoremUnderPolicy(), distance_bound=WeakSharpBound(1.0),
                           f_star_hint=10.0)
    context = BoundContext(0.0, projector, oracle, 1.0)
    decision = config.accuracy.decide(config, 0, 1.0, 1.0, np.array([1.0]), context)
    assert decision.forced_exact
    assert decision.eps == 0.0


def test_dynamic_config_validation():
    with pytest.raises(UsageError):
        DynamicConfig(phi=0.0, lambda_seq=lambda_constant(1.5), beta=1.0)
    with pytest.raises(UsageError):
        DynamicConfig(phi=0.0, accuracy=TheoremOverPolicy())
    with pytest.raises(UsageError):
        DynamicConfig(phi=1.0, accuracy=TheoremUnderPolicy(), distance_bound=BpDistanceBound(), f_star_hint=0.5)
    with pytest.raises(UsageError):
        DynamicConfig(phi=0.0, reprojection='sometimes')
    with pytest.raises(UsageError):
        DynamicConfig(phi=np.inf)
    config = DynamicConfig(phi=0.0, lambda_seq=lambda_vanishing(1.2))
    assert config.beta == 1.2
    assert config.describe()['lambda'] == 'vanishing'


def test_registries():
    assert isinstance(get_schedule('harmonic_pair', {'scale_a': 2.0}), HarmonicPairSchedule)
    assert get_lambda_sequence('constant', {'value': 0.5})(3) == 0.5
    assert get_accuracy_policy('fixed_cg', {'iterations': 2.0}).iterations == 2
    assert get_distance_bound('bp').kind == 'bp'
    with pytest.raises(ConfigError, match="Unknown schedule"):
        get_schedule('geometric')
    with pytest.raises(ConfigError):
        get_schedule('harmonic_pair', {'scale_b': 1.0})
