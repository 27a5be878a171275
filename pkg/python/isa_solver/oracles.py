"""
Objective-function oracles: value plus one subgradient per call.

Shipped oracles: the ℓ₁ norm, max-affine (polyhedral) functions and a wrapper
around user-supplied callables. eps_subgradient_wrap turns any of them into a
γ-subgradient oracle with a per-iteration slack sequence.
"""

import logging
from abc import ABC, abstractmethod

import numpy as np

from .errors import UsageError
from .linalg import as_matrix, as_vector

logger = logging.getLogger(__name__)


class ObjectiveOracle(ABC):
    """
    Base class for objective oracles.

    Subclasses provide value(x) and subgradient(x, k). The iteration index k is
    passed explicitly so oracles never carry a cursor and stay immutable.
    """
    #: global bound H on ‖h‖₂ when known (None = undeclared)
    subgradient_bound = None

    @abstractmethod
    def value(self, x):
        """f(x)"""
        pass

    @abstractmethod
    def subgradient(self, x, k=0):
        """Some h ∈ ∂f(x) (or the γ_k-subdifferential for wrapped oracles)"""
        pass

    def gamma(self, k):
        """Slack γ_k of the returned subgradient; exact oracles return 0"""
        return 0.0

    def evaluate(self, x, k=0):
        """Return (f(x), h) for iteration k"""
        return self.value(x), self.subgradient(x, k)


# ----------------------------------------------------------------------------
# ℓ₁ norm
# ----------------------------------------------------------------------------

def l1_value(x):
    """Σ|x_i|"""
    return float(np.sum(np.abs(as_vector(x))))


def l1_subgradient(x):
    """Componentwise sign(x), sign(0) = 0 (the minimum-norm element of ∂‖x‖₁)"""
    return np.sign(as_vector(x))


class L1Oracle(ObjectiveOracle):
    """f(x) = ‖x‖₁ with sign subgradients"""

    def __init__(self, dim=None):
        self.dim = dim
        if dim is not None:
            self.subgradient_bound = float(np.sqrt(dim))

    def value(self, x):
        return l1_value(x)

    def subgradient(self, x, k=0):
        return l1_subgradient(x)

    def evaluate(self, x, k=0):
        x = as_vector(x)
        return float(np.sum(np.abs(x))), np.sign(x)


# ----------------------------------------------------------------------------
# Polyhedral max-affine functions
# ----------------------------------------------------------------------------

class PolyhedralObjective(ObjectiveOracle):
    """
    f(x) = max_i (a_iᵀx + b_i).

    Args:
        slopes: N x n matrix whose rows are the a_i (all nonzero)
        offsets: length-N vector of b_i

    sharpness_mu = min_i ‖a_i‖₂ is the weak-sharp-minima constant used by the
    weak_sharp distance bound.
    """
    def __init__(self, slopes, offsets):
        slopes = as_matrix(slopes, 'slopes').copy()
        offsets = as_vector(offsets, 'offsets').copy()
        if slopes.shape[0] == 0:
            raise UsageError("polyhedral objective needs at least one piece")
        if slopes.shape[0] != offsets.shape[0]:
            raise UsageError(f"{slopes.shape[0]} slopes but {offsets.shape[0]} offsets")
        norms = np.linalg.norm(slopes, axis=1)
        if np.any(norms == 0):
            raise UsageError(f"pieces {np.flatnonzero(norms == 0).tolist()} have zero slope")
        slopes.setflags(write=False)
        offsets.setflags(write=False)
        self.slopes = slopes
        self.offsets = offsets
        self.sharpness_mu = float(norms.min())
        self.subgradient_bound = float(norms.max())

    @classmethod
    def from_pieces(cls, pieces):
        """Build from a list of (a_i, b_i) pairs; scalar a_i means a 1-D problem"""
        slopes = [np.atleast_1d(np.asarray(a, dtype=float)) for a, _ in pieces]
        offsets = [float(b) for _, b in pieces]
        return cls(np.vstack(slopes) if slopes else np.zeros((0, 0)), offsets)

    def value(self, x):
        return polyhedral_eval(self, x)[0]

    def subgradient(self, x, k=0):
        return polyhedral_eval(self, x)[1]

    def evaluate(self, x, k=0):
        value, h, _ = polyhedral_eval(self, x)
        return value, h


def polyhedral_eval(obj, x):
    """
    Evaluate a PolyhedralObjective.

    Returns:
        (value, subgradient, active_index); ties go to the lowest index
    """
    x = as_vector(x)
    if x.shape[0] != obj.slopes.shape[1]:
        raise UsageError(f"x has {x.shape[0]} entries, pieces live in dimension {obj.slopes.shape[1]}")
    affine = obj.slopes @ x + obj.offsets
    i = int(np.argmax(affine))  # argmax returns the first maximizer
    return float(affine[i]), obj.slopes[i].copy(), i


# ----------------------------------------------------------------------------
# User-supplied oracles
# ----------------------------------------------------------------------------

class CallableOracle(ObjectiveOracle):
    """
    Wrap plain functions as an oracle.

    The caller is responsible for value_fn being convex on ℝⁿ and for
    subgradient_fn returning a member of its subdifferential. Declaring
    subgradient_bound keeps the bounded-subgradient hypothesis of the
    predetermined variant checkable.
    """
    def __init__(self, value_fn, subgradient_fn, subgradient_bound=None):
        self.value_fn = value_fn
        self.subgradient_fn = subgradient_fn
        self.subgradient_bound = subgradient_bound

    def value(self, x):
        return float(self.value_fn(as_vector(x)))

    def subgradient(self, x, k=0):
        return as_vector(self.subgradient_fn(as_vector(x)), 'subgradient')


# ----------------------------------------------------------------------------
# γ-subgradients
# ----------------------------------------------------------------------------

def _gamma_function(gamma_schedule):
    if callable(gamma_schedule):
        return gamma_schedule
    values = np.asarray(gamma_schedule, dtype=float)
    if values.ndim == 0:
        constant = float(values)
        return lambda k: constant
    if np.any(values < 0):
        raise UsageError("gamma schedule contains negative entries")
    # past the end of a finite sequence the slack is zero
    return lambda k: float(values[k]) if k < values.shape[0] else 0.0


class EpsSubgradientOracle(ObjectiveOracle):
    """
    Oracle returning γ_k-subgradients of a base oracle.

    For the ℓ₁ norm every nonzero coordinate of the sign vector is shrunk
    towards zero, h_i = sign(x_i)(1 − t_i) with t_i ≤ γ_k/(2·nnz·|x_i|). Since
    ‖h‖∞ ≤ 1, ‖y‖₁ − ‖x‖₁ − hᵀ(y − x) ≥ −Σ t_i|x_i| ≥ −γ_k/2 for every y.

    Other oracles get a random perturbation of norm γ_k/(2R) that is checked
    on random probes in the ball of radius R around x and shrunk (eventually
    dropped) whenever a probe violates the inequality.

    Draws use default_rng([seed, k]), so the output only depends on (x, k).
    """
    def __init__(self, base, gamma_schedule, seed=0, probe_radius=10.0, probes=100, max_tries=20):
        if not isinstance(base, ObjectiveOracle):
            raise UsageError("eps_subgradient_wrap needs an ObjectiveOracle")
        self.base = base
        self._gamma = _gamma_function(gamma_schedule)
        self.seed = int(seed)
        self.probe_radius = float(probe_radius)
        self.probes = int(probes)
        self.max_tries = int(max_tries)
        self.subgradient_bound = base.subgradient_bound

    def gamma(self, k):
        g = float(self._gamma(k))
        if not g >= 0:
            raise UsageError(f"gamma_{k} = {g} is negative")
        return g

    def value(self, x):
        return self.base.value(x)

    def subgradient(self, x, k=0):
        return self.evaluate(x, k)[1]

    def evaluate(self, x, k=0):
        x = as_vector(x)
        f, h = self.base.evaluate(x, k)
        g = self.gamma(k)
        if g == 0.0:
            return f, h
        rng = np.random.default_rng([self.seed, int(k)])
        if isinstance(self.base, L1Oracle):
            return f, self._shrink_signs(x, h, g, rng)
        return f, self._probed_perturbation(x, f, h, g, rng)

    def _shrink_signs(self, x, h, g, rng):
        nz = np.flatnonzero(x)
        if nz.size == 0:
            return h
        u = rng.uniform(0.0, 1.0, size=nz.size)
        t = np.minimum(1.0, g / (2.0 * nz.size * np.abs(x[nz]))) * u
        out = h.copy()
        out[nz] = np.sign(x[nz]) * (1.0 - t)
        return out

    def _probed_perturbation(self, x, f, h, g, rng):
        n = x.shape[0]
        direction = rng.standard_normal(n)
        direction /= np.linalg.norm(direction)
        size = g / (2.0 * self.probe_radius)
        for _ in range(self.max_tries):
            candidate = h + size * direction
            if self._passes_probes(x, f, candidate, g, rng):
                return candidate
            size *= 0.5
        logger.debug("dropping gamma-perturbation after %d rejected attempts", self.max_tries)
        return h

    def _passes_probes(self, x, f, h, g, rng):
        n = x.shape[0]
        for _ in range(self.probes):
            d = rng.standard_normal(n)
            d *= self.probe_radius * rng.uniform() ** (1.0 / n) / np.linalg.norm(d)
            y = x + d
            if self.base.value(y) < f + h @ d - g:
                return False
        return True


def eps_subgradient_wrap(base, gamma_schedule, seed=0, **kwargs):
    """
    Wrap base so that it returns γ_k-subgradients.

    gamma_schedule may be a callable k -> γ_k, a finite sequence, or a scalar.
    γ ≡ 0 returns the base oracle itself.
    """
    if not callable(gamma_schedule):
        values = np.atleast_1d(np.asarray(gamma_schedule, dtype=float))
        if np.any(values < 0):
            raise UsageError("gamma schedule contains negative entries")
        if np.all(values == 0):
            return base
    return EpsSubgradientOracle(base, gamma_schedule, seed=seed, **kwargs)


def gamma_from_schedule(schedule, mu=1.0, source='eps'):
    """
    γ_k = μ·ε_k (source='eps') or γ_k = μ·α_k (source='alpha') from a
    predetermined schedule.
    """
    if mu <= 0:
        raise UsageError(f"mu must be positive, got {mu}")
    if source == 'eps':
        return lambda k: mu * schedule.eps(k)
    if source == 'alpha':
        return lambda k: mu * schedule.alpha(k)
    raise UsageError(f"Unknown gamma source: {source}. Available: ['eps', 'alpha']")
