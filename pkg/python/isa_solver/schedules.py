"""
Step sizes, projection accuracies, relaxation and safeguard sequences.

Predetermined variant: a PredeterminedSchedule gives α_k, ε_k and a certified
bound on the ε tail Σ_{j≥k} ε_j. Dynamic variant: a DynamicConfig bundles the
target value φ, the relaxation sequence λ_k, the safeguard sequence ν_k, an
accuracy policy choosing ε_k each iteration and a distance-bound provider that
stands in for the unknown d_{X*}(x^k).

Every family is registered under a string tag so run configs can name it.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, UsageError

logger = logging.getLogger(__name__)


def _scalar_or_array(v):
    v = np.asarray(v, dtype=float)
    return float(v) if v.ndim == 0 else v


# ----------------------------------------------------------------------------
# Predetermined schedules
# ----------------------------------------------------------------------------

class PredeterminedSchedule(ABC):
    """
    α_k > 0 nonsummable but square summable, ε_k ≥ 0 summable and
    α_k ≥ tail_bound(k) ≥ Σ_{j≥k} ε_j. Each family documents why its
    formulas satisfy these in `certificate`.
    """
    certificate = ''

    @abstractmethod
    def alpha(self, k):
        pass

    @abstractmethod
    def eps(self, k):
        pass

    @abstractmethod
    def tail_bound(self, k):
        pass

    def describe(self):
        return {'family': self.name, 'certificate': self.certificate, **self.params()}


class HarmonicPairSchedule(PredeterminedSchedule):
    """
    α_k = a/(k+1), ε_k = e/(k+2)², tail_bound(k) = e/(k+1).

    Σ_{j≥k} 1/(j+2)² ≤ ∫_{k+1}^∞ dt/t² = 1/(k+1), so e ≤ a is all that is
    needed for α_k ≥ tail_bound(k).
    """
    name = 'harmonic_pair'
    certificate = 'harmonic alpha (p-series p=1 diverges, p=2 converges); eps tail by integral test'

    def __init__(self, scale_a=1.0, scale_e=1.0):
        scale_a = float(scale_a)
        scale_e = float(scale_e)
        if not scale_a > 0:
            raise UsageError(f"scale_a must be positive, got {scale_a}")
        if not scale_e >= 0:
            raise UsageError(f"scale_e must be nonnegative, got {scale_e}")
        if scale_e > scale_a:
            raise UsageError(f"scale_e ({scale_e}) > scale_a ({scale_a}) breaks alpha_k >= sum of remaining eps")
        self.scale_a = scale_a
        self.scale_e = scale_e

    def params(self):
        return {'scale_a': self.scale_a, 'scale_e': self.scale_e}

    def alpha(self, k):
        return _scalar_or_array(self.scale_a / (np.asarray(k, dtype=float) + 1.0))

    def eps(self, k):
        return _scalar_or_array(self.scale_e / (np.asarray(k, dtype=float) + 2.0) ** 2)

    def tail_bound(self, k):
        return _scalar_or_array(self.scale_e / (np.asarray(k, dtype=float) + 1.0))


class PowerPairSchedule(HarmonicPairSchedule):
    """
    α_k = a/(k+1)^p with p ∈ (1/2, 1], same ε_k and tail bound as the
    harmonic pair. (k+1)^(1−p) ≥ 1 keeps α_k ≥ e/(k+1) whenever e ≤ a.
    """
    name = 'power_pair'
    certificate = 'alpha p-series with 1/2 < p <= 1 (diverges, squares converge); eps tail by integral test'

    def __init__(self, scale_a=1.0, scale_e=1.0, power=1.0):
        super().__init__(scale_a, scale_e)
        power = float(power)
        if not 0.5 < power <= 1.0:
            raise UsageError(f"power must lie in (0.5, 1], got {power}")
        self.power = power

    def params(self):
        return {**super().params(), 'power': self.power}

    def alpha(self, k):
        return _scalar_or_array(self.scale_a / (np.asarray(k, dtype=float) + 1.0) ** self.power)


def harmonic_pair_schedule(scale_a=1.0, scale_e=1.0):
    return HarmonicPairSchedule(scale_a, scale_e)


def power_pair_schedule(scale_a=1.0, scale_e=1.0, power=1.0):
    return PowerPairSchedule(scale_a, scale_e, power)


# ----------------------------------------------------------------------------
# Dynamic step and accuracy bounds
# ----------------------------------------------------------------------------

def dynamic_step(f_k, phi, lambda_k, h_norm_sq):
    """
    Polyak-type step α_k = λ_k (f_k − φ)/‖h‖².

    Raises:
        UsageError: ‖h‖² = 0 (take the zero-subgradient branch instead) or f_k < φ
    """
    if not h_norm_sq > 0:
        raise UsageError("dynamic step needs a nonzero subgradient")
    if f_k < phi:
        raise UsageError(f"dynamic step needs f_k >= phi, got f_k={f_k}, phi={phi}")
    return lambda_k * (f_k - phi) / h_norm_sq


def _check_bound_args(f_k, phi, h_norm, dist_bound):
    if not f_k > phi:
        raise UsageError(f"accuracy bound needs f_k > phi, got f_k={f_k}, phi={phi}")
    if not h_norm > 0:
        raise UsageError(f"accuracy bound needs ‖h‖ > 0, got {h_norm}")
    if not dist_bound >= 0:
        raise UsageError(f"distance bound must be >= 0, got {dist_bound}")


def eps_bar(f_k, phi, lambda_k, h_norm, dist_bound):
    """
    Largest ε that keeps d_{X*} nonincreasing when φ ≥ f*.

    Positive root of ε² + 2(s + d)ε − λ(2 − λ)(f − φ)²/‖h‖² with
    s = λ(f − φ)/‖h‖ and d the distance bound. Written as c/((s+d) + √((s+d)² + c))
    to avoid cancellation when d is large.
    """
    _check_bound_args(f_k, phi, h_norm, dist_bound)
    if not 0 < lambda_k < 2:
        raise UsageError(f"lambda_k must lie in (0, 2), got {lambda_k}")
    gap = f_k - phi
    s = lambda_k * gap / h_norm
    c = lambda_k * (2.0 - lambda_k) * gap * gap / (h_norm * h_norm)
    sd = s + dist_bound
    return c / (sd + np.sqrt(sd * sd + c))


def underestimate_threshold(f_star, phi, beta):
    """f* + β/(2−β)(f* − φ): below this level the underestimate bound turns negative"""
    return f_star + beta / (2.0 - beta) * (f_star - phi)


def eps_tilde_checked(f_k, phi, f_star_hint, lambda_k, beta, h_norm, dist_bound):
    """
    |ε̃_k| for φ < f*, plus a flag that is True when the discriminant
    (s+d)² − L_k is negative and the value has been replaced by 0.

    L_k = λ(2−β)(f−φ)/‖h‖² · (f* − f + β/(2−β)(f* − φ)).
    """
    _check_bound_args(f_k, phi, h_norm, dist_bound)
    if not phi < f_star_hint:
        raise UsageError(f"underestimation bound needs phi < f*, got phi={phi}, f*={f_star_hint}")
    if not 0 < lambda_k <= beta < 2:
        raise UsageError(f"need 0 < lambda_k <= beta < 2, got lambda_k={lambda_k}, beta={beta}")
    gap = f_k - phi
    L = lambda_k * (2.0 - beta) * gap / (h_norm * h_norm) * (
        f_star_hint - f_k + beta / (2.0 - beta) * (f_star_hint - phi))
    sd = lambda_k * gap / h_norm + dist_bound
    disc = sd * sd - L
    if disc < 0:
        return 0.0, True
    root = np.sqrt(disc)
    if sd + root == 0.0:
        return 0.0, False
    return abs(-L / (sd + root)), False


def eps_tilde(f_k, phi, f_star_hint, lambda_k, beta, h_norm, dist_bound):
    """|ε̃_k|; 0 when the discriminant is negative (see eps_tilde_checked)"""
    return eps_tilde_checked(f_k, phi, f_star_hint, lambda_k, beta, h_norm, dist_bound)[0]


# ----------------------------------------------------------------------------
# λ and ν sequences
# ----------------------------------------------------------------------------

class Sequence(ABC):
    name = ''
    certificate = ''
    vanishing = False

    @abstractmethod
    def __call__(self, k):
        pass

    @property
    @abstractmethod
    def upper_bound(self):
        pass


class ConstantSequence(Sequence):
    """λ_k ≡ value, value ∈ (0, 2)"""
    name = 'constant'
    certificate = 'constant positive terms: nonsummable'

    def __init__(self, value=1.0):
        value = float(value)
        if not 0 < value < 2:
            raise UsageError(f"constant lambda must lie in (0, 2), got {value}")
        self.value = value

    def __call__(self, k):
        return _scalar_or_array(np.full(np.shape(k), self.value))

    @property
    def upper_bound(self):
        return self.value


class LogVanishingSequence(Sequence):
    """
    λ_k = λ₀/(1 + ln(1 + k)).

    Vanishes, yet λ_k ≥ λ₀/(1 + k) termwise, so the sum diverges by
    comparison with the harmonic series.
    """
    name = 'vanishing'
    certificate = 'dominates lambda0/(k+1): nonsummable; tends to 0'
    vanishing = True

    def __init__(self, lambda0=1.0):
        lambda0 = float(lambda0)
        if not 0 < lambda0 < 2:
            raise UsageError(f"lambda0 must lie in (0, 2), got {lambda0}")
        self.lambda0 = lambda0

    def __call__(self, k):
        return _scalar_or_array(self.lambda0 / (1.0 + np.log1p(np.asarray(k, dtype=float))))

    @property
    def upper_bound(self):
        return self.lambda0


class GeometricSequence(Sequence):
    """
    λ_k = λ₀·q^k, q ∈ (0, 1).

    Summable, so none of the convergence guarantees apply. With φ below f*
    the iterates settle at a distance proportional to λ_k, and shrinking λ_k
    geometrically pulls that neighbourhood in at a linear rate.
    """
    name = 'geometric'
    certificate = 'geometric series: summable, sum lambda0/(1 - decay); tends to 0'
    vanishing = True

    def __init__(self, lambda0=1.0, decay=0.9998):
        lambda0 = float(lambda0)
        decay = float(decay)
        if not 0 < lambda0 < 2:
            raise UsageError(f"lambda0 must lie in (0, 2), got {lambda0}")
        if not 0 < decay < 1:
            raise UsageError(f"decay must lie in (0, 1), got {decay}")
        self.lambda0 = lambda0
        self.decay = decay

    def __call__(self, k):
        return _scalar_or_array(self.lambda0 * self.decay ** np.asarray(k, dtype=float))

    @property
    def upper_bound(self):
        return self.lambda0


class InverseSquareSequence(Sequence):
    """ν_k = ν₀/(k+1)², Σ ν_k = ν₀π²/6"""
    name = 'inverse_square'
    certificate = 'p-series with p=2: summable, sum nu0*pi^2/6'
    vanishing = True

    def __init__(self, nu0=1.0):
        nu0 = float(nu0)
        if not nu0 > 0:
            raise UsageError(f"nu0 must be positive, got {nu0}")
        self.nu0 = nu0

    def __call__(self, k):
        return _scalar_or_array(self.nu0 / (np.asarray(k, dtype=float) + 1.0) ** 2)

    @property
    def upper_bound(self):
        return self.nu0

    @property
    def sum_bound(self):
        return self.nu0 * np.pi ** 2 / 6.0


def lambda_constant(value=1.0):
    return ConstantSequence(value)


def lambda_vanishing(lambda0=1.0):
    return LogVanishingSequence(lambda0)


def lambda_geometric(lambda0=1.0, decay=0.9998):
    return GeometricSequence(lambda0, decay)


def nu_default(nu0=1.0):
    return InverseSquareSequence(nu0)


# ----------------------------------------------------------------------------
# Distance-to-optimum bounds
# ----------------------------------------------------------------------------

def distance_bound_strongly_convex(C, f_x, f_star, min_subgrad_norm):
    """min(√((f − f*)/C), min‖h‖/(2C)) for f strongly convex with modulus C"""
    if not C > 0:
        raise UsageError(f"strong convexity modulus must be positive, got {C}")
    if f_x < f_star:
        raise UsageError(f"f(x) = {f_x} is below f* = {f_star}")
    return min(np.sqrt((f_x - f_star) / C), min_subgrad_norm / (2.0 * C))


def distance_bound_norm_growth(C, D, x, f_star):
    """
    ‖x‖ + (f* + D)/C when f(y) ≥ C‖y‖ − D everywhere: every optimum lies in
    the ball of radius (f* + D)/C.
    """
    if not C > 0:
        raise UsageError(f"growth constant must be positive, got {C}")
    return float(np.linalg.norm(x)) + (f_star + D) / C


def distance_bound_weak_sharp(mu, f_x, phi, d_X_bound=0.0, at_feasible=True, f_projected=None):
    """
    (f − φ)/μ at feasible x; d_X(x) + (f(P_X(x)) − φ)/μ otherwise.

    Valid for φ ≤ f*, which the caller must guarantee.
    """
    if not mu > 0:
        raise UsageError(f"sharpness mu must be positive, got {mu}")
    if at_feasible:
        return max(f_x - phi, 0.0) / mu
    if f_projected is None:
        raise UsageError("weak-sharp bound at an infeasible point needs f at its projection")
    return d_X_bound + max(f_projected - phi, 0.0) / mu


def distance_bound_bp(projector, x, f_x, phi):
    """2‖Ax − b‖₂/σ_min(A) + (f − φ)/√n for Basis Pursuit"""
    r = projector.A @ x - projector.b
    n = projector.A.shape[1]
    return 2.0 * float(np.linalg.norm(r)) / projector.sigma_min + (f_x - phi) / np.sqrt(n)


@dataclass
class BoundContext:
    """What a distance-bound provider may look at besides x and f(x)"""
    phi: float
    projector: object = None
    oracle: object = None
    h_norm: Optional[float] = None


class DistanceBoundProvider(ABC):
    kind = ''
    # True when the value rests on a stand-in quantity and may be loose
    loose = False

    @abstractmethod
    def bound(self, x, f_x, context):
        pass


class StronglyConvexBound(DistanceBoundProvider):
    """Uses the norm of the oracle's subgradient in place of min ‖h‖ over ∂f(x)"""
    kind = 'strongly_convex'
    loose = True

    def __init__(self, C, f_star):
        self.C = float(C)
        self.f_star = float(f_star)

    def bound(self, x, f_x, context):
        h_norm = context.h_norm if context.h_norm is not None else np.inf
        return distance_bound_strongly_convex(self.C, f_x, self.f_star, h_norm)


class NormGrowthBound(DistanceBoundProvider):
    kind = 'norm_growth'

    def __init__(self, C, D, f_star):
        self.C = float(C)
        self.D = float(D)
        self.f_star = float(f_star)

    def bound(self, x, f_x, context):
        return distance_bound_norm_growth(self.C, self.D, x, self.f_star)


class WeakSharpBound(DistanceBoundProvider):
    """
    Weak sharp minima bound. At infeasible x the exact projection is taken to
    measure d_X(x) and f(P_X(x)), so the context needs projector and oracle.
    """
    kind = 'weak_sharp'

    def __init__(self, mu, feas_tolerance=0.0):
        self.mu = float(mu)
        self.feas_tolerance = float(feas_tolerance)

    def bound(self, x, f_x, context):
        projector = context.projector
        if projector is None or projector.feasibility_violation(x) <= self.feas_tolerance:
            return distance_bound_weak_sharp(self.mu, f_x, context.phi)
        p = projector.project_exact(x)
        return distance_bound_weak_sharp(self.mu, f_x, context.phi,
                                         d_X_bound=float(np.linalg.norm(x - p)),
                                         at_feasible=False,
                                         f_projected=context.oracle.value(p))


class BpDistanceBound(DistanceBoundProvider):
    kind = 'bp'

    def bound(self, x, f_x, context):
        if context.projector is None or not hasattr(context.projector, 'sigma_min'):
            raise UsageError("bp distance bound needs an affine projector")
        return distance_bound_bp(context.projector, x, f_x, context.phi)


class ExactDistanceBound(DistanceBoundProvider):
    """
    Exact d_{X*}(x) for a known optimal set: a single point x_star, or a
    callable projecting onto X*.
    """
    kind = 'exact'

    def __init__(self, x_star=None, project_optimal=None):
        if (x_star is None) == (project_optimal is None):
            raise UsageError("give exactly one of x_star or project_optimal")
        self.x_star = None if x_star is None else np.asarray(x_star, dtype=float)
        self.project_optimal = project_optimal

    def bound(self, x, f_x=None, context=None):
        target = self.x_star if self.x_star is not None else self.project_optimal(x)
        return float(np.linalg.norm(np.asarray(x, dtype=float) - target))


# ----------------------------------------------------------------------------
# Accuracy policies (dynamic variant)
# ----------------------------------------------------------------------------

@dataclass
class AccuracyDecision:
    eps: float
    max_inner: Optional[int] = None
    dist_bound: Optional[float] = None
    forced_exact: bool = False


class AccuracyPolicy(ABC):
    name = ''
    needs_distance = False

    @abstractmethod
    def decide(self, config, k, f_k, h_norm, x, context):
        """Return the AccuracyDecision for iteration k"""
        pass

    def describe(self):
        return {'policy': self.name}


class TheoremOverPolicy(AccuracyPolicy):
    """ε_k = min(ε̄_k, ν_k) with d_{X*} replaced by the configured bound"""
    name = 'theorem_over'
    needs_distance = True

    def decide(self, config, k, f_k, h_norm, x, context):
        d = config.distance_bound.bound(x, f_k, context)
        eps = min(eps_bar(f_k, config.phi, config.lambda_seq(k), h_norm, d), config.nu_seq(k))
        return AccuracyDecision(eps=eps, dist_bound=d)


class TheoremUnderPolicy(AccuracyPolicy):
    """
    ε_k = min(|ε̃_k|, ν_k). Needs an estimate of f*; a wrong hint voids the
    decrease guarantee but ν_k still drives ε_k to zero.
    """
    name = 'theorem_under'
    needs_distance = True

    def decide(self, config, k, f_k, h_norm, x, context):
        d = config.distance_bound.bound(x, f_k, context)
        value, forced = eps_tilde_checked(f_k, config.phi, config.f_star_hint, config.lambda_seq(k),
                                          config.beta, h_norm, d)
        if forced:
            return AccuracyDecision(eps=0.0, dist_bound=d, forced_exact=True)
        return AccuracyDecision(eps=min(value, config.nu_seq(k)), dist_bound=d)


class FixedCgPolicy(AccuracyPolicy):
    """A fixed number of CG iterations per projection, no accuracy target"""
    name = 'fixed_cg'

    def __init__(self, iterations=2):
        iterations = int(iterations)
        if iterations < 1:
            raise UsageError(f"fixed_cg needs at least one iteration, got {iterations}")
        self.iterations = iterations

    def decide(self, config, k, f_k, h_norm, x, context):
        return AccuracyDecision(eps=np.inf, max_inner=self.iterations)

    def describe(self):
        return {'policy': self.name, 'iterations': self.iterations}


class FixedEpsPolicy(AccuracyPolicy):
    """The same ε for every projection (0 = exact)"""
    name = 'fixed_eps'

    def __init__(self, eps=0.0):
        eps = float(eps)
        if not eps >= 0:
            raise UsageError(f"fixed eps must be >= 0, got {eps}")
        self.eps = eps

    def decide(self, config, k, f_k, h_norm, x, context):
        return AccuracyDecision(eps=self.eps)

    def describe(self):
        return {'policy': self.name, 'eps': self.eps}


REPROJECTION_MODES = ('exact', 'decreasing')


@dataclass
class DynamicConfig:
    """
    Parameters of the dynamic (Polyak-type) variant.

    beta defaults to the supremum of the λ family; 0 < λ_k ≤ β < 2 is checked
    through the family's upper bound.
    """
    phi: float
    lambda_seq: Sequence = field(default_factory=ConstantSequence)
    beta: Optional[float] = None
    nu_seq: Sequence = field(default_factory=InverseSquareSequence)
    accuracy: AccuracyPolicy = field(default_factory=FixedEpsPolicy)
    distance_bound: Optional[DistanceBoundProvider] = None
    f_star_hint: Optional[float] = None
    reprojection: str = 'exact'
    decrease_factor: float = 0.1
    max_decreases: int = 6

    def __post_init__(self):
        self.phi = float(self.phi)
        if not np.isfinite(self.phi):
            raise UsageError(f"phi must be finite, got {self.phi}")
        lam_sup = self.lambda_seq.upper_bound
        if self.beta is None:
            self.beta = lam_sup
        self.beta = float(self.beta)
        if not 0 < self.beta < 2:
            raise UsageError(f"beta must lie in (0, 2), got {self.beta}")
        if not 0 < lam_sup <= self.beta:
            raise UsageError(f"lambda family bound {lam_sup} exceeds beta = {self.beta}")
        if self.reprojection not in REPROJECTION_MODES:
            raise UsageError(f"Unknown reprojection mode: {self.reprojection}. Available: {list(REPROJECTION_MODES)}")
        if self.accuracy.needs_distance and self.distance_bound is None:
            raise UsageError(f"accuracy policy {self.accuracy.name} needs a distance bound provider")
        if isinstance(self.accuracy, TheoremUnderPolicy):
            if self.f_star_hint is None:
                raise UsageError("theorem_under needs f_star_hint")
            if not self.phi < self.f_star_hint:
                raise UsageError(f"theorem_under needs phi < f_star_hint, got {self.phi} >= {self.f_star_hint}")

    def describe(self):
        return {
            'phi': self.phi,
            'lambda': self.lambda_seq.name,
            'beta': self.beta,
            'nu': self.nu_seq.name,
            'accuracy': self.accuracy.describe(),
            'distance_bound': self.distance_bound.kind if self.distance_bound is not None else None,
            'f_star_hint': self.f_star_hint,
            'reprojection': self.reprojection,
        }


# ----------------------------------------------------------------------------
# Registries
# ----------------------------------------------------------------------------

PREDETERMINED_SCHEDULES = {
    'harmonic_pair': HarmonicPairSchedule,
    'power_pair': PowerPairSchedule,
}

LAMBDA_SEQUENCES = {
    'constant': ConstantSequence,
    'vanishing': LogVanishingSequence,
    'geometric': GeometricSequence,
}

NU_SEQUENCES = {
    'inverse_square': InverseSquareSequence,
}

ACCURACY_POLICIES = {
    'theorem_over': TheoremOverPolicy,
    'theorem_under': TheoremUnderPolicy,
    'fixed_cg': FixedCgPolicy,
    'fixed_eps': FixedEpsPolicy,
}

DISTANCE_BOUNDS = {
    'strongly_convex': StronglyConvexBound,
    'norm_growth': NormGrowthBound,
    'weak_sharp': WeakSharpBound,
    'bp': BpDistanceBound,
    'exact': ExactDistanceBound,
}

# Default family parameters, shown by the API and used to fill configs
DEFAULT_FAMILY_PARAMS = {
    'harmonic_pair': {'scale_a': 1.0, 'scale_e': 1.0},
    'power_pair': {'scale_a': 1.0, 'scale_e': 1.0, 'power': 1.0},
    'constant': {'value': 1.0},
    'vanishing': {'lambda0': 1.0},
    'geometric': {'lambda0': 1.0, 'decay': 0.9998},
    'inverse_square': {'nu0': 1.0},
    'fixed_cg': {'iterations': 2},
    'fixed_eps': {'eps': 0.0},
}


def get_family(registry, kind, name, params=None):
    """Instantiate a registered family; unknown tags or bad params -> ConfigError"""
    if name not in registry:
        raise ConfigError(f"Unknown {kind}: {name}. Available: {list(registry.keys())}")
    try:
        return registry[name](**(params or {}))
    except TypeError as e:
        raise ConfigError(f"bad parameters for {kind} {name}: {e}") from e


def get_schedule(name, params=None):
    return get_family(PREDETERMINED_SCHEDULES, 'schedule', name, params)


def get_lambda_sequence(name, params=None):
    return get_family(LAMBDA_SEQUENCES, 'lambda family', name, params)


def get_nu_sequence(name, params=None):
    return get_family(NU_SEQUENCES, 'nu family', name, params)


def get_accuracy_policy(name, params=None):
    return get_family(ACCURACY_POLICIES, 'accuracy policy', name, params)


def get_distance_bound(name, params=None):
    return get_family(DISTANCE_BOUNDS, 'distance bound', name, params)
