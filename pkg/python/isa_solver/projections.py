"""
Exact and inexact Euclidean projections onto the feasible set X.

Every projector honours ‖project(y, ε) − P_X(y)‖₂ ≤ ε and reports how it got
there in a ProjectionCertificate. The affine projector for X = {x | Ax = b}
truncates conjugate gradients on AAᵀq = Ay − b as soon as the residual
certifies the requested accuracy: ‖x − P_X(y)‖₂ ≤ ‖Ax − b‖₂/σ_min(A).
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NumericalBreakdownError, UsageError
from .linalg import (
    CgStopRule,
    GramFactorization,
    as_matrix,
    as_vector,
    cg_solve,
    sigma_min as compute_sigma_min,
    solve_gram,
    spectral_norm,
)

logger = logging.getLogger(__name__)


@dataclass
class ProjectionCertificate:
    requested_eps: float
    certified_error_bound: float
    inner_iterations: int = 0
    residual_norm: float = 0.0
    exact_fallback: bool = False
    # ε < d_X(y) lower bound, i.e. the output is certainly closer to X than y
    closer_guaranteed: Optional[bool] = None


class InexactProjector(ABC):
    """
    Base class for projection operators.

    project(y, eps, max_inner=None) returns (x, certificate). eps = 0 asks for
    the exact projection; eps = inf asks for no accuracy at all, which only
    makes sense together with max_inner (a fixed amount of inner work).
    """
    supports_exact = True

    @abstractmethod
    def project(self, y, eps, max_inner=None):
        pass

    @abstractmethod
    def feasibility_violation(self, x):
        """Set-specific infeasibility measure (‖Ax − b‖∞ for affine sets)"""
        pass

    def project_exact(self, y):
        return self.project(y, 0.0)[0]


def _check_eps(eps):
    eps = float(eps)
    if not eps >= 0:
        raise UsageError(f"projection accuracy must be >= 0, got {eps}")
    return eps


# ----------------------------------------------------------------------------
# Affine sets {x | Ax = b}
# ----------------------------------------------------------------------------

def _unpack(fact_or_A):
    if isinstance(fact_or_A, GramFactorization):
        return fact_or_A, fact_or_A.source
    return None, as_matrix(fact_or_A)


def affine_project_exact(fact, b, z):
    """
    Exact projection z − Aᵀ(AAᵀ)⁻¹(Az − b) via the cached Cholesky factor.
    """
    if not isinstance(fact, GramFactorization):
        fact = GramFactorization(fact)
    A = fact.source
    b = as_vector(b, 'b')
    z = as_vector(z, 'z')
    if z.shape[0] != A.shape[1] or b.shape[0] != A.shape[0]:
        raise UsageError(f"A is {A.shape[0]}x{A.shape[1]} but b has {b.shape[0]} and z has {z.shape[0]} entries")
    q = solve_gram(fact, A @ z - b)
    return z - A.T @ q


def affine_project_cg(fact_or_A, b, z, eps, sigma_min, max_inner=None, x0=None):
    """
    Inexact projection onto {x | Ax = b} with truncated CG.

    CG on AAᵀq = Az − b stops once ‖r_q‖₂ ≤ σ_min·ε; then x = z − Aᵀq and the
    certificate bound ‖Ax − b‖₂/σ_min ≤ ε. If CG cannot meet the threshold
    (ε = 0, or rounding stalls it at the 3m cap) the exact factorized solve is
    used instead and exact_fallback is set. With max_inner the iteration
    budget wins over ε and the certificate reports whatever was achieved.

    Args:
        fact_or_A: GramFactorization or the matrix A itself
        b, z: right-hand side and point to project
        eps: requested accuracy (inf = none)
        sigma_min: smallest singular value of A
        max_inner: optional CG iteration budget
        x0: optional warm start for q

    Returns:
        (x, ProjectionCertificate)
    """
    x, cert, _ = _affine_cg(fact_or_A, b, z, eps, sigma_min, max_inner, x0)
    return x, cert


def _affine_cg(fact_or_A, b, z, eps, sigma_min, max_inner=None, x0=None):
    # same as affine_project_cg, also returning the multiplier q
    eps = _check_eps(eps)
    if not sigma_min > 0:
        raise UsageError(f"sigma_min must be positive, got {sigma_min}")
    fact, A = _unpack(fact_or_A)
    b = as_vector(b, 'b')
    z = as_vector(z, 'z')
    if z.shape[0] != A.shape[1] or b.shape[0] != A.shape[0]:
        raise UsageError(f"A is {A.shape[0]}x{A.shape[1]} but b has {b.shape[0]} and z has {z.shape[0]} entries")

    threshold = sigma_min * eps if np.isfinite(eps) else None
    stop = CgStopRule(residual_threshold=threshold, max_iterations=max_inner)
    try:
        result = cg_solve(lambda v: A @ (A.T @ v), A @ z - b, stop, x0=x0)
    except NumericalBreakdownError as e:
        partial = None
        if e.last_iterate is not None:
            x_partial = z - A.T @ e.last_iterate
            rn = float(np.linalg.norm(A @ x_partial - b))
            partial = ProjectionCertificate(eps, rn / sigma_min, residual_norm=rn)
        raise NumericalBreakdownError(str(e), last_iterate=e.last_iterate, certificate=partial) from e

    x = z - A.T @ result.solution
    rnorm = float(np.linalg.norm(A @ x - b))
    cert = ProjectionCertificate(
        requested_eps=eps,
        certified_error_bound=rnorm / sigma_min,
        inner_iterations=result.iterations,
        residual_norm=rnorm,
    )
    budget_bound = max_inner is not None and result.stopped_by == 'max_iterations'
    if cert.certified_error_bound > eps and not budget_bound:
        logger.debug("CG stopped by %s at bound %.3e > eps %.3e, falling back to exact projection",
                     result.stopped_by, cert.certified_error_bound, eps)
        x = affine_project_exact(fact if fact is not None else GramFactorization(A), b, z)
        cert.residual_norm = float(np.linalg.norm(A @ x - b))
        cert.certified_error_bound = 0.0
        cert.exact_fallback = True
    return x, cert, result.solution


def affine_project_fixed_iters(A, b, z, j, sigma_min=None):
    """
    At most j CG iterations, no accuracy target.

    The certificate carries the realized bound ‖Ax − b‖₂/σ_min, which can be
    far above anything the convergence theory would ask for.
    """
    if j < 1:
        raise UsageError(f"fixed CG iteration count must be >= 1, got {j}")
    if sigma_min is None:
        fact, A_mat = _unpack(A)
        sigma_min = compute_sigma_min(A_mat, fact)
    return affine_project_cg(A, b, z, np.inf, sigma_min, max_inner=j)


class AffineProjector(InexactProjector):
    """
    Projector onto {x | Ax = b} for a full-row-rank A.

    Factorization, σ_min(A) and ‖A‖₂ are computed once at construction.

    Args:
        A, b: constraint data
        fixed_iterations: if set, every inexact request runs exactly this many
            CG iterations regardless of ε
        warm_start: start CG from the previous call's q (keeps state, so a
            warm-started projector must not be shared between threads)
    """
    def __init__(self, A, b, fixed_iterations=None, warm_start=False, sigma=None):
        self.fact = GramFactorization(A)
        self.A = self.fact.source
        self.b = as_vector(b, 'b').copy()
        if self.b.shape[0] != self.A.shape[0]:
            raise UsageError(f"b has {self.b.shape[0]} entries, A has {self.A.shape[0]} rows")
        self.b.setflags(write=False)
        self.sigma_min = float(sigma) if sigma is not None else compute_sigma_min(self.A, self.fact)
        self.norm_A = spectral_norm(self.A)
        if fixed_iterations is not None and fixed_iterations < 1:
            raise UsageError(f"fixed_iterations must be >= 1, got {fixed_iterations}")
        self.fixed_iterations = fixed_iterations
        self.warm_start = warm_start
        self._last_q = None

    @property
    def dim(self):
        return self.A.shape[1]

    def residual(self, x):
        return self.A @ x - self.b

    def feasibility_violation(self, x):
        r = self.residual(x)
        return float(np.max(np.abs(r))) if r.size else 0.0

    def project(self, y, eps, max_inner=None):
        y = as_vector(y, 'y')
        eps = _check_eps(eps)
        gap = float(np.linalg.norm(self.residual(y)))
        if eps == 0.0 and max_inner is None:
            x = affine_project_exact(self.fact, self.b, y)
            rn = float(np.linalg.norm(self.residual(x)))
            cert = ProjectionCertificate(0.0, 0.0, residual_norm=rn)
        else:
            if max_inner is None:
                max_inner = self.fixed_iterations
            x0 = self._last_q if self.warm_start else None
            x, cert, q = _affine_cg(self.fact, self.b, y, eps, self.sigma_min, max_inner=max_inner, x0=x0)
            if self.warm_start and not cert.exact_fallback:
                self._last_q = q
        cert.closer_guaranteed = bool(eps < gap / self.norm_A) if self.norm_A > 0 else False
        return x, cert

    def distance_to_feasible_bound(self, x):
        """d_X(x) ≤ ‖Ax − b‖₂/σ_min(A)"""
        return float(np.linalg.norm(self.residual(x))) / self.sigma_min


class PerturbedExactProjector(InexactProjector):
    """
    Test double: exact projection moved by 0.99·min(ε, radius_cap) in a
    random direction.

    It satisfies the ε-contract by construction and uses almost all of the
    slack it is given. Directions come from a generator seeded once, so two
    projectors built with the same seed produce the same call sequence.
    """
    def __init__(self, base, seed=0, radius_cap=np.inf, factor=0.99):
        if not base.supports_exact:
            raise UsageError("perturbed projector needs a base that supports eps = 0")
        self.base = base
        self.seed = seed
        self.radius_cap = float(radius_cap)
        self.factor = float(factor)
        self._rng = np.random.default_rng(seed)

    def reset(self):
        self._rng = np.random.default_rng(self.seed)

    def feasibility_violation(self, x):
        return self.base.feasibility_violation(x)

    def project(self, y, eps, max_inner=None):
        eps = _check_eps(eps)
        x, base_cert = self.base.project(y, 0.0)
        size = self.factor * min(eps, self.radius_cap)
        if not np.isfinite(size):
            raise UsageError("perturbed projector needs a finite accuracy or radius_cap")
        if size > 0.0:
            d = self._rng.standard_normal(x.shape[0])
            x = x + size * d / np.linalg.norm(d)
        cert = ProjectionCertificate(eps, size, residual_norm=base_cert.residual_norm)
        return x, cert

    def __getattr__(self, name):
        # expose A, b, sigma_min of an affine base for distance bounds
        if name in ('A', 'b', 'sigma_min', 'norm_A', 'dim', 'residual', 'distance_to_feasible_bound'):
            return getattr(self.base, name)
        raise AttributeError(name)


def perturbed_exact_projector(base, seed=0, radius_cap=np.inf):
    return PerturbedExactProjector(base, seed=seed, radius_cap=radius_cap)


# ----------------------------------------------------------------------------
# Boxes
# ----------------------------------------------------------------------------

def box_project(lower, upper, z):
    """Componentwise clamp of z to [lower, upper]"""
    lower = as_vector(lower, 'lower')
    upper = as_vector(upper, 'upper')
    z = as_vector(z, 'z')
    if np.any(lower > upper):
        raise UsageError("box has lower > upper in some coordinate")
    return np.clip(z, lower, upper)


class BoxProjector(InexactProjector):
    """Exact projection onto {x | lower ≤ x ≤ upper}; ε is never needed"""

    def __init__(self, lower, upper):
        self.lower = as_vector(lower, 'lower').copy()
        self.upper = as_vector(upper, 'upper').copy()
        if self.lower.shape != self.upper.shape:
            raise UsageError("box bounds have different dimensions")
        if np.any(self.lower > self.upper):
            raise UsageError("box has lower > upper in some coordinate")

    def feasibility_violation(self, x):
        x = as_vector(x)
        below = np.maximum(self.lower - x, 0.0)
        above = np.maximum(x - self.upper, 0.0)
        return float(np.max(np.maximum(below, above))) if x.size else 0.0

    def project(self, y, eps, max_inner=None):
        eps = _check_eps(eps)
        y = as_vector(y, 'y')
        x = box_project(self.lower, self.upper, y)
        cert = ProjectionCertificate(eps, 0.0)
        cert.closer_guaranteed = bool(eps < float(np.linalg.norm(x - y)))
        return x, cert
