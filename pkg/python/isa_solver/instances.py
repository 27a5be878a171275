"""
Basis Pursuit test instances: min ‖x‖₁ s.t. Ax = b.

The dictionary is a concatenation of four m x m blocks (tridiagonal band,
block diagonal with one full row, Hadamard, identity) with unit-norm columns.
A sparse x* is planted and b = Ax*; the exact recovery condition on the
support certifies x* as the unique ℓ₁ minimizer.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from .errors import DegenerateInstanceError, DegenerateSupportError, UsageError
from .linalg import GramFactorization, as_matrix, as_vector, sigma_min

logger = logging.getLogger(__name__)

FILE_MAGIC = 'isa-bp'
FILE_VERSION = 'v1'

DESK_M = 128
DESK_SUPPORT = 4
DESK_SEED = 7

COLUMN_NORM_TOL = 1e-12


@dataclass
class BpInstance:
    A: np.ndarray
    b: np.ndarray
    x_star: Optional[np.ndarray] = None
    support: Optional[np.ndarray] = None
    sigma_min: Optional[float] = None
    erc_value: Optional[float] = None
    certified_unique: bool = False
    seed: Optional[int] = None
    # start point overriding Aᵀb (used by the 1-D builtin)
    start: Optional[np.ndarray] = None

    @property
    def m(self):
        return self.A.shape[0]

    @property
    def n(self):
        return self.A.shape[1]

    @property
    def f_star(self):
        if self.x_star is None:
            return None
        return float(np.sum(np.abs(self.x_star)))

    def start_point(self):
        return self.start.copy() if self.start is not None else default_start(self.A, self.b)

    def summary(self):
        return {
            'm': self.m,
            'n': self.n,
            'support_size': None if self.support is None else int(len(self.support)),
            'sigma_min': self.sigma_min,
            'erc_value': self.erc_value,
            'certified_unique': self.certified_unique,
            'f_star': self.f_star,
            'seed': self.seed,
        }


def _is_power_of_two(m):
    return isinstance(m, (int, np.integer)) and m >= 1 and (m & (m - 1)) == 0


def hadamard(m):
    """Sylvester Hadamard matrix of order m (entries ±1, HᵀH = mI)"""
    if not _is_power_of_two(m):
        raise UsageError(f"Hadamard order must be a power of 2, got {m}")
    return linalg.hadamard(int(m)).astype(float)


def build_concat_dictionary(m, seed):
    """
    m x 4m dictionary [Band | BlockDiag+row | Hadamard | I], unit-norm columns.

    Band is tridiagonal with Gaussian entries. BlockDiag has four dense
    Gaussian blocks of size m/4 and its last row replaced by a full Gaussian
    row. Both are drawn from default_rng(seed).
    """
    if not _is_power_of_two(m) or m < 4:
        raise UsageError(f"dictionary size m must be a power of 2 and >= 4, got {m}")
    rng = np.random.default_rng(seed)

    band = (np.diag(rng.standard_normal(m))
            + np.diag(rng.standard_normal(m - 1), 1)
            + np.diag(rng.standard_normal(m - 1), -1))

    block = m // 4
    block_diag = linalg.block_diag(*[rng.standard_normal((block, block)) for _ in range(4)])
    block_diag[-1, :] = rng.standard_normal(m)

    A = np.hstack([band, block_diag, hadamard(m), np.eye(m)])
    return A / np.linalg.norm(A, axis=0)


def erc_check(A, support):
    """
    Exact recovery condition value max_{j ∉ S} ‖A_S⁺ a_j‖₁.

    Below 1 the vector supported on S is the unique ℓ₁ minimizer. Empty
    supports give 0.

    Raises:
        DegenerateSupportError: columns on the support are linearly dependent
    """
    A = as_matrix(A)
    support = np.asarray(support, dtype=int).ravel()
    if support.size == 0:
        return 0.0
    A_S = A[:, support]
    if np.linalg.matrix_rank(A_S) < support.size:
        raise DegenerateSupportError(f"support columns {support.tolist()} are linearly dependent")
    off = np.setdiff1d(np.arange(A.shape[1]), support)
    if off.size == 0:
        return 0.0
    coeffs = np.linalg.lstsq(A_S, A[:, off], rcond=None)[0]
    return float(np.max(np.sum(np.abs(coeffs), axis=0)))


def plant_sparse_solution(A, support_size, seed, max_attempts=50):
    """
    Draw a random support with Gaussian values and set b = Ax*.

    Supports are redrawn (up to max_attempts) until the recovery condition
    certifies uniqueness. If none does, the attempt with the smallest value
    is returned with certified_unique = False.
    """
    A = as_matrix(A)
    m, n = A.shape
    if not 0 <= support_size <= m:
        raise UsageError(f"support size must lie in [0, {m}], got {support_size}")
    rng = np.random.default_rng(seed)
    sigma = sigma_min(A)

    best = None
    for attempt in range(max_attempts):
        support = np.sort(rng.choice(n, size=support_size, replace=False))
        values = rng.standard_normal(support_size)
        try:
            erc = erc_check(A, support)
        except DegenerateSupportError:
            logger.debug("attempt %d: degenerate support, redrawing", attempt)
            continue
        if best is None or erc < best[0]:
            best = (erc, support, values)
        if erc < 1.0:
            break

    if best is None:
        raise DegenerateInstanceError(f"no usable support in {max_attempts} attempts")
    erc, support, values = best
    certified = erc < 1.0
    if not certified:
        logger.warning("exact recovery condition not met after %d attempts (best %.4f); "
                       "planted solution is not certified unique", max_attempts, erc)
    x_star = np.zeros(n)
    x_star[support] = values
    return BpInstance(A=A, b=A @ x_star, x_star=x_star, support=support, sigma_min=sigma,
                      erc_value=erc, certified_unique=certified,
                      seed=int(seed) if isinstance(seed, (int, np.integer)) else None)


def desk_instance(m=DESK_M, support_size=DESK_SUPPORT, seed=DESK_SEED):
    """Concatenated dictionary of size m x 4m with a planted sparse solution"""
    dict_seed, plant_seed = np.random.SeedSequence(seed).spawn(2)
    A = build_concat_dictionary(m, dict_seed)
    inst = plant_sparse_solution(A, support_size, plant_seed)
    inst.seed = int(seed)
    return inst


def abs1d_instance():
    """min |x| s.t. x = 0, started at x0 = 5"""
    A = np.array([[1.0]])
    return BpInstance(A=A, b=np.zeros(1), x_star=np.zeros(1), support=np.zeros(0, dtype=int),
                      sigma_min=1.0, erc_value=0.0, certified_unique=True, start=np.array([5.0]))


def instance_from_arrays(A, b, x_star=None):
    """Wrap user data, computing σ_min and (with x*) the recovery condition"""
    A = as_matrix(A).copy()
    b = as_vector(b, 'b').copy()
    if b.shape[0] != A.shape[0]:
        raise UsageError(f"b has {b.shape[0]} entries, A has {A.shape[0]} rows")
    inst = BpInstance(A=A, b=b, sigma_min=sigma_min(A))
    if x_star is not None:
        x_star = as_vector(x_star, 'x_star').copy()
        if x_star.shape[0] != A.shape[1]:
            raise UsageError(f"x_star has {x_star.shape[0]} entries, A has {A.shape[1]} columns")
        inst.x_star = x_star
        inst.support = np.flatnonzero(x_star)
        try:
            inst.erc_value = erc_check(A, inst.support)
            inst.certified_unique = inst.erc_value < 1.0
        except DegenerateSupportError:
            logger.warning("support of x_star is degenerate, uniqueness not certified")
    return inst


def default_start(A, b):
    """Aᵀb"""
    return as_matrix(A).T @ as_vector(b, 'b')


# ----------------------------------------------------------------------------
# Text container
# ----------------------------------------------------------------------------

def _format_row(values):
    # repr of a Python float is the shortest string that round-trips
    return ' '.join(repr(float(v)) for v in values)


def write_instance(inst, path):
    """
    Write the plain-text container: header "isa-bp v1 m n", m rows of A,
    one row with b, and one row with x* when present.
    """
    lines = [f"{FILE_MAGIC} {FILE_VERSION} {inst.m} {inst.n}"]
    lines.extend(_format_row(row) for row in inst.A)
    lines.append(_format_row(inst.b))
    if inst.x_star is not None:
        lines.append(_format_row(inst.x_star))
    with open(path, 'w', newline='\n') as fh:
        fh.write('\n'.join(lines) + '\n')


def _parse_row(text, expected, lineno, what):
    try:
        row = np.array([float(tok) for tok in text.split()])
    except ValueError as e:
        raise UsageError(f"line {lineno}: {what} has a non-numeric entry ({e})") from e
    if row.shape[0] != expected:
        raise UsageError(f"line {lineno}: {what} has {row.shape[0]} entries, expected {expected}")
    return row


def read_instance(path):
    """Read a container written by write_instance"""
    with open(path) as fh:
        lines = [line.strip() for line in fh]
    while lines and not lines[-1]:
        lines.pop()
    if not lines:
        raise UsageError(f"{path}: empty instance file")
    header = lines[0].split()
    if len(header) != 4 or header[0] != FILE_MAGIC or header[1] != FILE_VERSION:
        raise UsageError(f"{path}: bad header {lines[0]!r}, expected '{FILE_MAGIC} {FILE_VERSION} m n'")
    try:
        m, n = int(header[2]), int(header[3])
    except ValueError as e:
        raise UsageError(f"{path}: bad dimensions in header") from e
    body = lines[1:]
    if len(body) not in (m + 1, m + 2):
        raise UsageError(f"{path}: expected {m + 1} or {m + 2} data lines, found {len(body)}")
    A = np.vstack([_parse_row(body[i], n, i + 2, f"row {i} of A") for i in range(m)]) if m else np.zeros((0, n))
    b = _parse_row(body[m], m, m + 2, 'b')
    x_star = _parse_row(body[m + 1], n, m + 3, 'x*') if len(body) == m + 2 else None
    return instance_from_arrays(A, b, x_star)


def validate_instance(inst):
    """
    Check an instance before solving.

    Returns:
        (is_valid, errors, warnings)
    """
    errors = []
    warnings = []
    A, b = inst.A, inst.b
    if A.ndim != 2:
        return False, [f"A must be 2-D, got shape {A.shape}"], warnings
    m, n = A.shape
    if m > n:
        errors.append(f"A has more rows ({m}) than columns ({n})")
    if b.shape != (m,):
        errors.append(f"b has shape {b.shape}, expected ({m},)")
    if not np.all(np.isfinite(A)) or not np.all(np.isfinite(b)):
        errors.append("A or b contains non-finite values")
    if errors:
        return False, errors, warnings

    norms = np.linalg.norm(A, axis=0)
    bad = np.flatnonzero(np.abs(norms - 1.0) > COLUMN_NORM_TOL)
    if bad.size:
        errors.append(f"{bad.size} columns do not have unit norm (first: {int(bad[0])}, norm {norms[bad[0]]:.15g})")

    try:
        GramFactorization(A)
    except DegenerateInstanceError as e:
        errors.append(f"A is not of full row rank: {e}")

    if inst.x_star is not None:
        gap = float(np.max(np.abs(A @ inst.x_star - b))) if m else 0.0
        if gap > COLUMN_NORM_TOL * (1.0 + float(np.max(np.abs(b), initial=0.0))):
            errors.append(f"x* is not feasible: ‖Ax* − b‖∞ = {gap:.3e}")
        if inst.erc_value is None:
            warnings.append("recovery condition could not be evaluated on the support of x*")
        elif inst.erc_value >= 1.0:
            warnings.append(f"recovery condition value {inst.erc_value:.4f} >= 1: x* not certified unique")
    else:
        warnings.append("no planted x*: distances to the optimum are unavailable")

    return len(errors) == 0, errors, warnings
