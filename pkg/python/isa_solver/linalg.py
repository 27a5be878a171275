"""
Dense linear algebra kernels used by the projection operators.

Matrix-vector products, the Cholesky factorization of AAᵀ, conjugate
gradients with an explicit stopping rule, and the smallest singular value of
a full-row-rank matrix.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
from scipy import linalg

from .errors import DegenerateInstanceError, NumericalBreakdownError, UsageError

logger = logging.getLogger(__name__)

# Recursive CG residuals drift from the true residual; refresh this often.
RESIDUAL_REFRESH = 50

# AAᵀ is treated as singular below this fraction of its Frobenius norm.
DEGENERACY_RATIO = 1e-14


def as_vector(x, name='x'):
    """Convert to a 1-D float array, rejecting other shapes"""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise UsageError(f"{name} must be a 1-D vector, got shape {v.shape}")
    return v


def as_matrix(A, name='A'):
    """Convert to a 2-D float array, rejecting other shapes"""
    M = np.asarray(A, dtype=float)
    if M.ndim != 2:
        raise UsageError(f"{name} must be a 2-D matrix, got shape {M.shape}")
    return M


def check_finite(x, what='vector', last_iterate=None):
    """Raise NumericalBreakdownError when x contains NaN or Inf"""
    if not np.all(np.isfinite(x)):
        raise NumericalBreakdownError(f"non-finite values in {what}", last_iterate=last_iterate)
    return x


def matvec(A, x):
    """
    Return Ax.

    Raises:
        UsageError: if dim(x) != cols(A)
    """
    A = as_matrix(A)
    x = as_vector(x)
    if A.shape[1] != x.shape[0]:
        raise UsageError(f"dimension mismatch: A is {A.shape[0]}x{A.shape[1]}, x has {x.shape[0]} entries")
    return A @ x


@dataclass(frozen=True)
class CgStopRule:
    """
    Stopping rule for cg_solve. Whichever limit is hit first wins.

    residual_threshold: stop once ‖M q − rhs‖₂ ≤ τ (None = no threshold)
    max_iterations: stop after j iterations (None = only the 3·dim cap)
    """
    residual_threshold: Optional[float] = None
    max_iterations: Optional[int] = None

    def __post_init__(self):
        if self.residual_threshold is not None and not self.residual_threshold >= 0:
            raise UsageError(f"residual_threshold must be >= 0, got {self.residual_threshold}")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise UsageError(f"max_iterations must be >= 1, got {self.max_iterations}")


@dataclass
class CgResult:
    solution: np.ndarray
    residual_norm: float
    iterations: int
    stopped_by: str  # 'threshold', 'max_iterations', 'cap' or 'exact'
    history: List[float] = field(default_factory=list)

    def __iter__(self):
        # allows `q, rnorm, iters = cg_solve(...)`
        return iter((self.solution, self.residual_norm, self.iterations))


def cg_solve(apply_M: Callable[[np.ndarray], np.ndarray], rhs, stop: CgStopRule, x0=None) -> CgResult:
    """
    Conjugate gradients for M q = rhs with M symmetric positive definite.

    Args:
        apply_M: function v -> M v
        rhs: right-hand side
        stop: CgStopRule
        x0: initial guess (zero when None)

    Returns:
        CgResult. residual_norm is always recomputed as ‖rhs − M q‖₂ for the
        returned q. On a threshold stop the returned iterate is the one that
        met the threshold; otherwise it is the iterate with the smallest
        residual seen. history holds the running minimum of the residual
        norms, so it is non-increasing.

    Raises:
        NumericalBreakdownError: on non-finite values or pᵀMp ≤ 0
    """
    rhs = as_vector(rhs, 'rhs')
    dim = rhs.shape[0]
    cap = 3 * dim
    tau = stop.residual_threshold
    max_it = stop.max_iterations

    if x0 is None:
        q = np.zeros(dim)
        r = rhs.copy()
    else:
        q = as_vector(x0, 'x0').copy()
        r = rhs - apply_M(q)
    check_finite(r, 'initial residual', last_iterate=q)

    def true_residual(v):
        return rhs - apply_M(v)

    p = r.copy()
    rr = float(r @ r)
    rnorm = np.sqrt(rr)
    best_q, best_norm = q.copy(), rnorm
    history = [rnorm]
    iterations = 0
    stopped_by = None

    while True:
        if rnorm == 0.0 or (tau is not None and rnorm <= tau):
            # confirm against the true residual before accepting the stop
            r = true_residual(q)
            check_finite(r, 'residual', last_iterate=q)
            rr = float(r @ r)
            rnorm = np.sqrt(rr)
            if rnorm == 0.0:
                stopped_by = 'exact'
                break
            if tau is not None and rnorm <= tau:
                stopped_by = 'threshold'
                break
            # recursive residual was too optimistic, restart from the true one
            p = r.copy()
        if max_it is not None and iterations >= max_it:
            stopped_by = 'max_iterations'
            break
        if iterations >= cap:
            stopped_by = 'cap'
            break

        Mp = apply_M(p)
        pMp = float(p @ Mp)
        if not np.isfinite(pMp) or pMp <= 0.0:
            raise NumericalBreakdownError(f"CG breakdown at iteration {iterations}: pᵀMp = {pMp}", last_iterate=best_q)
        a = rr / pMp
        q = q + a * p
        iterations += 1
        if iterations % RESIDUAL_REFRESH == 0:
            r = true_residual(q)
        else:
            r = r - a * Mp
        check_finite(q, 'CG iterate', last_iterate=best_q)
        check_finite(r, 'CG residual', last_iterate=best_q)

        rr_new = float(r @ r)
        p = r + (rr_new / rr) * p
        rr = rr_new
        rnorm = np.sqrt(rr)
        if rnorm < best_norm:
            best_q, best_norm = q.copy(), rnorm
        history.append(best_norm)

    if stopped_by in ('max_iterations', 'cap') and best_norm < rnorm:
        q = best_q
    final = float(np.linalg.norm(true_residual(q)))
    if stopped_by == 'cap':
        logger.debug("CG hit the %d-iteration cap with residual %.3e", cap, final)
    return CgResult(solution=q, residual_norm=final, iterations=iterations, stopped_by=stopped_by, history=history)


class GramFactorization:
    """
    Cholesky factorization of G = AAᵀ for a full-row-rank A.

    The factor is lower triangular; all arrays are read-only after
    construction so one factorization can be shared between threads.

    Raises:
        DegenerateInstanceError: if AAᵀ is not positive definite
    """
    def __init__(self, A):
        A = as_matrix(A).copy()
        if A.shape[0] > A.shape[1]:
            logger.warning("constraint matrix has more rows (%d) than columns (%d)", *A.shape)
        gram = A @ A.T
        try:
            factor = linalg.cholesky(gram, lower=True, check_finite=True)
        except (np.linalg.LinAlgError, ValueError) as e:
            raise DegenerateInstanceError(f"AAᵀ is not positive definite: {e}") from e
        for arr in (A, gram, factor):
            arr.setflags(write=False)
        self.source = A
        self.gram = gram
        self.cholesky_factor = factor

    @property
    def rows(self):
        return self.source.shape[0]

    @property
    def cols(self):
        return self.source.shape[1]

    def solve(self, rhs):
        return linalg.cho_solve((self.cholesky_factor, True), rhs, check_finite=False)

    def apply_gram(self, v):
        return self.source @ (self.source.T @ v)


def solve_gram(fact, rhs):
    """
    Solve AAᵀ q = rhs with the cached Cholesky factor.

    Raises:
        UsageError: if no factorization is available or dimensions disagree
    """
    if not isinstance(fact, GramFactorization):
        raise UsageError("solve_gram needs a GramFactorization")
    rhs = as_vector(rhs, 'rhs')
    if rhs.shape[0] != fact.rows:
        raise UsageError(f"rhs has {rhs.shape[0]} entries, A has {fact.rows} rows")
    return fact.solve(rhs)


def sigma_min(A, fact=None, tol=1e-10, max_iter=500, seed=0):
    """
    Smallest singular value of a full-row-rank A.

    Inverse power iteration on AAᵀ through its Cholesky factor; stops when the
    Rayleigh residual ‖Gv − λv‖ ≤ tol·λ. Falls back to a dense symmetric
    eigensolver if the iteration does not settle within max_iter steps, which
    is the usual outcome when the bottom of the spectrum is clustered (the
    concatenated dictionaries are).

    Raises:
        DegenerateInstanceError: rank-deficient A
    """
    if fact is None:
        fact = GramFactorization(A)
    G = fact.gram
    m = G.shape[0]
    if m == 0:
        raise UsageError("sigma_min of an empty matrix")
    scale = linalg.norm(G, 'fro')

    rng = np.random.default_rng(seed)
    v = rng.standard_normal(m)
    v /= np.linalg.norm(v)
    lam = float(v @ G @ v)
    converged = False
    for _ in range(max_iter):
        w = fact.solve(v)
        w_norm = np.linalg.norm(w)
        if not np.isfinite(w_norm) or w_norm == 0.0:
            raise DegenerateInstanceError("inverse iteration on AAᵀ broke down")
        v = w / w_norm
        Gv = G @ v
        lam = float(v @ Gv)
        if np.linalg.norm(Gv - lam * v) <= tol * abs(lam):
            converged = True
            break

    if not converged:
        logger.debug("inverse iteration did not settle in %d steps, using dense eigensolver", max_iter)
        lam = float(linalg.eigh(G, eigvals_only=True, subset_by_index=[0, 0])[0])

    if lam < DEGENERACY_RATIO * scale:
        raise DegenerateInstanceError(f"smallest eigenvalue of AAᵀ ({lam:.3e}) is numerically zero")
    return float(np.sqrt(lam))


def spectral_norm(A):
    """Largest singular value ‖A‖₂"""
    return float(linalg.norm(as_matrix(A), 2))
