"""
Infeasible-point subgradient iterations.

solve_predetermined: x^{k+1} = P^{ε_k}(x^k − α_k h^k) with α_k, ε_k from a
PredeterminedSchedule.

solve_dynamic: Polyak-type steps α_k = λ_k(f_k − φ)/‖h^k‖² towards a target
value φ, with the zero-subgradient branches, exact re-projection when an
inexact point drops to f ≤ φ, and termination once an exact projection still
has f ≤ φ.

Both return a SolveResult with one SolveTraceRecord per recorded iteration.
Record k describes the iterate x^k (objective, subgradient norm, feasibility,
distance to the optimum) and the step taken from it (α_k, requested and
certified accuracy, inner CG iterations, exact fallback).
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np
import pandas as pd

from .errors import NumericalBreakdownError, UsageError
from .linalg import as_vector
from .schedules import BoundContext, dynamic_step

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ['k', 'f_k', 'alpha_k', 'eps_requested', 'eps_certified', 'h_norm',
                 'inner_iters', 'feas_inf', 'dist_opt', 'exact_fallback']


class SolveStatus(str, Enum):
    MAX_ITERATIONS = 'MaxIterations'
    STEP_BELOW_THRESHOLD = 'StepBelowThreshold'
    OPTIMAL_FEASIBLE_ZERO_SUBGRAD = 'OptimalFeasibleZeroSubgrad'
    TARGET_REACHED_FEASIBLE = 'TargetReachedFeasible'
    NUMERICAL_BREAKDOWN = 'NumericalBreakdown'
    STALLED = 'Stalled'

    def __str__(self):
        return self.value


@dataclass
class StoppingConfig:
    """
    max_iterations: iteration budget
    min_step: stop once α_k falls below this (double precision by default)
    feas_tolerance: x counts as feasible when its violation is ≤ this
    stall_window: stop when the best feasible objective has not improved
        for this many iterations (None or 0 disables)
    trace_stride: record every n-th iteration (terminal records always kept)
    zero_subgradient_tol: ‖h‖₂ at or below this counts as a zero subgradient
    max_zero_subgradient_projections: consecutive exact projections after
        zero subgradients before the run is aborted
    """
    max_iterations: int = 100000
    min_step: float = 2.22e-16
    feas_tolerance: float = 1e-9
    stall_window: Optional[int] = None
    trace_stride: int = 1
    zero_subgradient_tol: float = 1e-14
    max_zero_subgradient_projections: int = 3
    log_every: int = 1000

    def __post_init__(self):
        for name in ('max_iterations', 'min_step', 'feas_tolerance', 'zero_subgradient_tol',
                     'max_zero_subgradient_projections'):
            if getattr(self, name) < 0:
                raise UsageError(f"stopping parameter {name} must be nonnegative")
        if self.stall_window is not None and self.stall_window < 0:
            raise UsageError("stall_window must be nonnegative")
        if self.trace_stride < 1:
            raise UsageError("trace_stride must be >= 1")


@dataclass
class SolveTraceRecord:
    k: int
    f_k: float
    alpha_k: float
    eps_requested: float
    eps_certified: float
    h_norm: float
    inner_iterations: int
    feasibility_inf: float
    dist_opt: Optional[float]
    exact_fallback_taken: bool

    def as_row(self):
        return [self.k, self.f_k, self.alpha_k, self.eps_requested, self.eps_certified, self.h_norm,
                self.inner_iterations, self.feasibility_inf,
                np.nan if self.dist_opt is None else self.dist_opt,
                int(self.exact_fallback_taken)]


@dataclass
class SolveResult:
    status: SolveStatus
    final_x: np.ndarray
    trace: List[SolveTraceRecord] = field(default_factory=list)
    best_feasible_f: Optional[float] = None
    best_feasible_x: Optional[np.ndarray] = None
    final_f: Optional[float] = None
    final_feas_inf: Optional[float] = None
    iterations: int = 0
    # least f among all iterates, and among all points an inexact projection returned
    min_f: Optional[float] = None
    min_inexact_f: Optional[float] = None
    flags: List[str] = field(default_factory=list)
    message: str = ''

    def trace_frame(self):
        """Trace as a DataFrame with the CSV column names"""
        frame = pd.DataFrame([r.as_row() for r in self.trace], columns=TRACE_COLUMNS)
        return frame.astype({'k': 'int64', 'inner_iters': 'int64', 'exact_fallback': 'int64'})

    def summary(self):
        return {
            'status': str(self.status),
            'iterations': self.iterations,
            'final_f': self.final_f,
            'final_feas_inf': self.final_feas_inf,
            'best_feasible_f': self.best_feasible_f,
            'min_f': self.min_f,
            'min_inexact_f': self.min_inexact_f,
            'flags': list(self.flags),
        }


class _RunState:
    """Bookkeeping shared by both loops"""

    def __init__(self, stop, projector, oracle, x0):
        self.stop = stop
        self.projector = projector
        self.oracle = oracle
        self.x = x0
        self.trace = []
        self.best_feasible_f = None
        self.best_feasible_x = None
        self.min_f = np.inf
        self.min_inexact_f = np.inf
        self.last_progress = 0
        self.flags = []
        self.warned_bound = False

    def observe(self, k, x, f, feas):
        if f < self.min_f:
            self.min_f = f
        if feas <= self.stop.feas_tolerance and (self.best_feasible_f is None or f < self.best_feasible_f):
            self.best_feasible_f = f
            self.best_feasible_x = x.copy()
            self.last_progress = k

    def stalled(self, k):
        w = self.stop.stall_window
        return bool(w) and k - self.last_progress >= w

    def check_bound(self, h_norm):
        bound = self.oracle.subgradient_bound
        if bound is not None and h_norm > bound * (1 + 1e-12) and not self.warned_bound:
            logger.warning("subgradient norm %.3e exceeds the declared bound %.3e", h_norm, bound)
            self.warned_bound = True

    def record(self, rec, terminal=False):
        if terminal or rec.k % self.stop.trace_stride == 0:
            self.trace.append(rec)
        if self.stop.log_every and rec.k % self.stop.log_every == 0:
            logger.debug("k=%d f=%.6e alpha=%.3e eps=%.3e feas=%.3e", rec.k, rec.f_k, rec.alpha_k,
                         rec.eps_requested, rec.feasibility_inf)

    def finish(self, status, iterations, message=''):
        x = self.x
        f = self.oracle.value(x) if np.all(np.isfinite(x)) else np.nan
        feas = self.projector.feasibility_violation(x) if np.all(np.isfinite(x)) else np.nan
        if np.isfinite(f) and np.isfinite(feas):
            self.observe(iterations, x, f, feas)
        result = SolveResult(
            status=status,
            final_x=x,
            trace=self.trace,
            best_feasible_f=self.best_feasible_f,
            best_feasible_x=self.best_feasible_x,
            final_f=float(f),
            final_feas_inf=float(feas),
            iterations=iterations,
            min_f=None if not np.isfinite(self.min_f) else float(self.min_f),
            min_inexact_f=None if not np.isfinite(self.min_inexact_f) else float(self.min_inexact_f),
            flags=self.flags,
            message=message,
        )
        logger.info("finished: status=%s iterations=%d f=%.6e feas_inf=%.3e", status, iterations,
                    result.final_f, result.final_feas_inf)
        return result


def _evaluate(oracle, x, k):
    f, h = oracle.evaluate(x, k)
    f = float(f)
    h = np.asarray(h, dtype=float)
    if not np.isfinite(f) or not np.all(np.isfinite(h)):
        raise NumericalBreakdownError(f"non-finite objective or subgradient at iteration {k}", last_iterate=x)
    return f, h


def _check_iterate(x, k, previous):
    if not np.all(np.isfinite(x)):
        raise NumericalBreakdownError(f"non-finite iterate after iteration {k}", last_iterate=previous)
    return x


def _distance(x, f, x_star, provider, context):
    if x_star is not None:
        return float(np.linalg.norm(x - x_star))
    if provider is not None:
        return float(provider.bound(x, f, context))
    return None


def solve_predetermined(oracle, projector, schedule, x0, stop=None, x_star=None, distance_bound=None):
    """
    Predetermined step-size iteration x^{k+1} = P^{ε_k}(x^k − α_k h^k).

    A zero subgradient gives a zero step; the projection still runs, so the
    iterate keeps moving while ε_k > 0.

    Args:
        oracle: ObjectiveOracle
        projector: InexactProjector
        schedule: PredeterminedSchedule
        x0: start point
        stop: StoppingConfig (defaults when None)
        x_star: known optimum, for exact dist_opt in the trace
        distance_bound: provider used for dist_opt when x_star is unknown

    Returns:
        SolveResult
    """
    stop = stop or StoppingConfig()
    x = as_vector(x0, 'x0').copy()
    if x_star is not None:
        x_star = as_vector(x_star, 'x_star')
    state = _RunState(stop, projector, oracle, x)
    logger.info("predetermined run: n=%d schedule=%s max_iterations=%d", x.shape[0],
                getattr(schedule, 'name', type(schedule).__name__), stop.max_iterations)

    status = SolveStatus.MAX_ITERATIONS
    k = 0
    try:
        _check_iterate(x, 0, None)
        for k in range(stop.max_iterations):
            f, h = _evaluate(oracle, x, k)
            h_norm = float(np.linalg.norm(h))
            state.check_bound(h_norm)
            feas = projector.feasibility_violation(x)
            state.observe(k, x, f, feas)
            dist = _distance(x, f, x_star, distance_bound, BoundContext(0.0, projector, oracle, h_norm))
            alpha = float(schedule.alpha(k))
            eps = float(schedule.eps(k))

            if alpha < stop.min_step:
                state.record(SolveTraceRecord(k, f, alpha, eps, 0.0, h_norm, 0, feas, dist, False), terminal=True)
                status = SolveStatus.STEP_BELOW_THRESHOLD
                break

            y = x - alpha * h
            x_new, cert = projector.project(y, eps)
            state.x = _check_iterate(x_new, k, x)
            if eps > 0:
                state.min_inexact_f = min(state.min_inexact_f, oracle.value(x_new))
            state.record(SolveTraceRecord(k, f, alpha, eps, cert.certified_error_bound, h_norm,
                                          cert.inner_iterations, feas, dist, cert.exact_fallback))
            x = x_new
            if state.stalled(k):
                status = SolveStatus.STALLED
                k += 1
                break
        else:
            k = stop.max_iterations
    except NumericalBreakdownError as e:
        logger.error("numerical breakdown: %s", e)
        state.flags.append('numerical_breakdown')
        return state.finish(SolveStatus.NUMERICAL_BREAKDOWN, k, message=str(e))

    return state.finish(status, k)


def solve_dynamic(oracle, projector, config, x0, stop=None, x_star=None):
    """
    Dynamic (Polyak-type) step-size iteration with target value φ.

    Per iteration, with f_k = f(x^k) and h^k from the oracle:

    - h^k = 0 and x^k feasible: stop, x^k is optimal.
    - h^k = 0 and x^k infeasible: x^{k+1} = exact projection of x^k.
    - otherwise α_k = λ_k(f_k − φ)/‖h^k‖², y = x^k − α_k h^k and
      x^{k+1} = P^{ε_k}(y) with ε_k from the accuracy policy. If
      f(x^{k+1}) ≤ φ after an inexact projection, y is projected again
      exactly (or with decreasing ε first, see DynamicConfig.reprojection);
      if f ≤ φ still holds the run stops at a feasible point.

    Args:
        oracle: ObjectiveOracle
        projector: InexactProjector supporting ε = 0
        config: DynamicConfig
        x0: start point with f(x0) ≥ φ
        stop: StoppingConfig
        x_star: known optimum, for exact dist_opt in the trace

    Raises:
        UsageError: f(x0) < φ or the projector cannot project exactly
    """
    stop = stop or StoppingConfig()
    if not projector.supports_exact:
        raise UsageError("dynamic variant needs a projector that supports eps = 0")
    x = as_vector(x0, 'x0').copy()
    if x_star is not None:
        x_star = as_vector(x_star, 'x_star')
    phi = config.phi
    f0 = oracle.value(x)
    if f0 < phi:
        raise UsageError(f"f(x0) = {f0} is below the target phi = {phi}: phi is too large and should be adjusted")

    state = _RunState(stop, projector, oracle, x)
    logger.info("dynamic run: n=%d phi=%.6e accuracy=%s max_iterations=%d", x.shape[0], phi,
                config.accuracy.name, stop.max_iterations)

    status = SolveStatus.MAX_ITERATIONS
    zero_streak = 0
    k = 0
    try:
        _check_iterate(x, 0, None)
        for k in range(stop.max_iterations):
            f, h = _evaluate(oracle, x, k)
            h_norm = float(np.linalg.norm(h))
            state.check_bound(h_norm)
            feas = projector.feasibility_violation(x)
            state.observe(k, x, f, feas)
            context = BoundContext(phi, projector, oracle, h_norm)

            if h_norm <= stop.zero_subgradient_tol:
                dist = _distance(x, f, x_star, config.distance_bound, context)
                if feas <= stop.feas_tolerance:
                    state.record(SolveTraceRecord(k, f, 0.0, 0.0, 0.0, h_norm, 0, feas, dist, False), terminal=True)
                    status = SolveStatus.OPTIMAL_FEASIBLE_ZERO_SUBGRAD
                    break
                zero_streak += 1
                if zero_streak > stop.max_zero_subgradient_projections:
                    state.flags.append('zero_subgradient_alternation')
                    state.record(SolveTraceRecord(k, f, 0.0, 0.0, 0.0, h_norm, 0, feas, dist, False), terminal=True)
                    status = SolveStatus.NUMERICAL_BREAKDOWN
                    logger.warning("aborting after %d consecutive zero-subgradient projections", zero_streak - 1)
                    break
                logger.debug("zero subgradient at infeasible x^%d, projecting exactly", k)
                x_new, cert = projector.project(x, 0.0)
                state.x = _check_iterate(x_new, k, x)
                state.record(SolveTraceRecord(k, f, 0.0, 0.0, cert.certified_error_bound, h_norm,
                                              cert.inner_iterations, feas, dist, True))
                x = x_new
                continue
            zero_streak = 0

            lam = float(config.lambda_seq(k))
            alpha = dynamic_step(f, phi, lam, h_norm * h_norm)
            decision = None
            if alpha >= stop.min_step:
                decision = config.accuracy.decide(config, k, f, h_norm, x, context)
            dist = _distance(x, f, x_star, None, context)
            if dist is None:
                if decision is not None and decision.dist_bound is not None:
                    dist = decision.dist_bound
                else:
                    dist = _distance(x, f, None, config.distance_bound, context)

            if decision is None:
                state.record(SolveTraceRecord(k, f, alpha, 0.0, 0.0, h_norm, 0, feas, dist, False), terminal=True)
                status = SolveStatus.STEP_BELOW_THRESHOLD
                break

            y = x - alpha * h
            eps = decision.eps
            exact_request = decision.forced_exact or (eps == 0.0 and decision.max_inner is None)
            if exact_request:
                x_new, cert = projector.project(y, 0.0)
            else:
                x_new, cert = projector.project(y, eps, max_inner=decision.max_inner)
            _check_iterate(x_new, k, x)
            f_new = oracle.value(x_new)
            inner = cert.inner_iterations
            fallback = cert.exact_fallback or decision.forced_exact
            if not exact_request:
                state.min_inexact_f = min(state.min_inexact_f, f_new)

            if f_new <= phi and not exact_request:
                x_new, cert, f_new, extra = _reproject(projector, oracle, config, y, cert, state)
                _check_iterate(x_new, k, x)
                inner += extra
                fallback = True

            state.x = x_new
            if f_new <= phi:
                state.record(SolveTraceRecord(k, f, alpha, eps, cert.certified_error_bound, h_norm,
                                              inner, feas, dist, fallback), terminal=True)
                status = SolveStatus.TARGET_REACHED_FEASIBLE
                k += 1
                break
            state.record(SolveTraceRecord(k, f, alpha, eps, cert.certified_error_bound, h_norm,
                                          inner, feas, dist, fallback))
            x = x_new
            if state.stalled(k):
                status = SolveStatus.STALLED
                k += 1
                break
        else:
            k = stop.max_iterations
    except NumericalBreakdownError as e:
        logger.error("numerical breakdown: %s", e)
        state.flags.append('numerical_breakdown')
        return state.finish(SolveStatus.NUMERICAL_BREAKDOWN, k, message=str(e))

    return state.finish(status, k)


def _reproject(projector, oracle, config, y, cert, state):
    """
    Re-project y after an inexact point fell to f ≤ φ.

    'exact' projects once with ε = 0. 'decreasing' first retries with
    ε shrinking by decrease_factor per attempt and only then projects exactly.
    Returns (x, certificate, f(x), extra inner iterations).
    """
    phi = config.phi
    extra = 0
    if config.reprojection == 'decreasing':
        e = min(cert.requested_eps, cert.certified_error_bound)
        for _ in range(config.max_decreases):
            e *= config.decrease_factor
            if not e > 0:
                break
            x_try, cert_try = projector.project(y, e)
            extra += cert_try.inner_iterations
            f_try = oracle.value(x_try)
            state.min_inexact_f = min(state.min_inexact_f, f_try)
            if f_try > phi:
                return x_try, cert_try, f_try, extra
    x_new, cert_new = projector.project(y, 0.0)
    extra += cert_new.inner_iterations
    return x_new, cert_new, oracle.value(x_new), extra


def restart_with_lower_phi(result, config, shrink=0.5):
    """
    Single restart step after termination at a feasible point with f ≤ φ.

    φ′ = f − shrink·(f − φ) with f = f(final_x), so φ′ lies in [f, φ].

    Returns:
        (new DynamicConfig, start point for the next run)
    """
    if result.status != SolveStatus.TARGET_REACHED_FEASIBLE:
        raise UsageError(f"restart needs status {SolveStatus.TARGET_REACHED_FEASIBLE}, got {result.status}")
    if not 0 < shrink <= 1:
        raise UsageError(f"shrink must lie in (0, 1], got {shrink}")
    f = result.final_f
    new_phi = f - shrink * (f - config.phi)
    logger.info("restarting with phi %.6e -> %.6e", config.phi, new_phi)
    return dataclasses.replace(config, phi=new_phi), result.final_x.copy()
