"""
Run configuration: flat `key = value` files, defaults, and the builders that
turn a RunConfig into an instance, oracle, projector and schedule.
"""

import logging
import os
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .errors import ConfigError, UsageError
from .instances import DESK_M, DESK_SEED, DESK_SUPPORT, abs1d_instance, desk_instance, read_instance
from .oracles import L1Oracle, eps_subgradient_wrap, gamma_from_schedule
from .projections import AffineProjector
from .schedules import (
    DISTANCE_BOUNDS,
    BpDistanceBound,
    DynamicConfig,
    ExactDistanceBound,
    get_accuracy_policy,
    get_lambda_sequence,
    get_nu_sequence,
    get_schedule,
)
from .solver import StoppingConfig

logger = logging.getLogger(__name__)

BUILTIN_PROBLEMS = ('builtin:desk', 'builtin:abs1d')
VARIANTS = ('predetermined', 'dynamic')

# Every recognized top-level key with its default (as it would appear in a file)
DEFAULT_RUN_CONFIG = {
    'problem': 'builtin:desk',
    'variant': 'dynamic',
    'seed': str(DESK_SEED),
    'm': str(DESK_M),
    'support': str(DESK_SUPPORT),
    'schedule': 'harmonic_pair',
    'phi': '0.0',
    'lambda': 'constant',
    'beta': '',
    'nu': 'inverse_square',
    'accuracy': 'fixed_cg',
    'distance_bound': 'bp',
    'f_star_hint': '',
    'reprojection': 'exact',
    'subgradient_gamma': '0',
    'max_iterations': '10000',
    'min_step': '2.22e-16',
    'feas_tolerance': '1e-9',
    'stall_window': '0',
    'trace_stride': '1',
    'timing': 'on',
    'trace_path': 'trace.csv',
    'summary_path': 'summary.json',
}

# Keys whose dotted children carry family parameters
FAMILY_KEYS = ('schedule', 'lambda', 'nu', 'accuracy', 'distance_bound')

# Parameters the CLI fills in when a family is named without them
DEFAULT_PARAMS = {
    'accuracy': {'fixed_cg': {'iterations': '2'}},
}


def parse_config_text(text, source='<config>'):
    """
    Parse `key = value` lines; '#' starts a comment, blank lines are skipped.

    Returns:
        dict of raw string values in file order
    """
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        content = line.split('#', 1)[0].strip()
        if not content:
            continue
        if '=' not in content:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {content!r}")
        key, value = (part.strip() for part in content.split('=', 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in raw:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


def load_config(path):
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        return parse_config_text(fh.read(), source=path)


def _to_int(key, value):
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be an integer, got {value!r}") from None


def _to_float(key, value):
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be a number, got {value!r}") from None


def _to_bool(key, value):
    v = str(value).strip().lower()
    if v in ('on', 'true', 'yes', '1'):
        return True
    if v in ('off', 'false', 'no', '0'):
        return False
    raise ConfigError(f"{key} must be on/off, got {value!r}")


def _family_params(raw, prefix):
    params = {}
    for key, value in raw.items():
        if key.startswith(prefix + '.'):
            params[key[len(prefix) + 1:]] = value
    return params


def _numeric_params(prefix, params):
    out = {}
    for name, value in params.items():
        out[name] = _to_float(f"{prefix}.{name}", value)
    return out


@dataclass
class RunConfig:
    problem: str = 'builtin:desk'
    variant: str = 'dynamic'
    seed: int = DESK_SEED
    m: int = DESK_M
    support: int = DESK_SUPPORT
    schedule: str = 'harmonic_pair'
    schedule_params: Dict[str, float] = field(default_factory=dict)
    phi: str = '0.0'
    lambda_family: str = 'constant'
    lambda_params: Dict[str, float] = field(default_factory=dict)
    beta: Optional[float] = None
    nu_family: str = 'inverse_square'
    nu_params: Dict[str, float] = field(default_factory=dict)
    accuracy: str = 'fixed_cg'
    accuracy_params: Dict[str, float] = field(default_factory=lambda: {'iterations': 2.0})
    distance_bound: str = 'bp'
    f_star_hint: Optional[str] = None
    reprojection: str = 'exact'
    subgradient_gamma: float = 0.0
    stopping: StoppingConfig = field(default_factory=StoppingConfig)
    timing: bool = True
    trace_path: str = 'trace.csv'
    summary_path: str = 'summary.json'
    raw: Dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_mapping(cls, raw):
        """
        Build from raw key/value strings (missing keys take DEFAULT_RUN_CONFIG).

        Raises:
            ConfigError: unknown keys, malformed values or unknown variant
        """
        raw = dict(raw)
        for key in raw:
            top = key.split('.', 1)[0]
            if key not in DEFAULT_RUN_CONFIG and not ('.' in key and top in FAMILY_KEYS):
                raise ConfigError(f"Unknown config key: {key}. Available: {list(DEFAULT_RUN_CONFIG.keys())}")
        merged = {**DEFAULT_RUN_CONFIG, **raw}

        variant = merged['variant']
        if variant not in VARIANTS:
            raise ConfigError(f"Unknown variant: {variant}. Available: {list(VARIANTS)}")

        accuracy = merged['accuracy']
        accuracy_params = {**DEFAULT_PARAMS['accuracy'].get(accuracy, {}), **_family_params(raw, 'accuracy')}

        stall = _to_int('stall_window', merged['stall_window'])
        try:
            stopping = StoppingConfig(
                max_iterations=_to_int('max_iterations', merged['max_iterations']),
                min_step=_to_float('min_step', merged['min_step']),
                feas_tolerance=_to_float('feas_tolerance', merged['feas_tolerance']),
                stall_window=stall if stall > 0 else None,
                trace_stride=_to_int('trace_stride', merged['trace_stride']),
            )
        except UsageError as e:
            raise ConfigError(str(e)) from e

        return cls(
            problem=merged['problem'],
            variant=variant,
            seed=_to_int('seed', merged['seed']),
            m=_to_int('m', merged['m']),
            support=_to_int('support', merged['support']),
            schedule=merged['schedule'],
            schedule_params=_numeric_params('schedule', _family_params(raw, 'schedule')),
            phi=merged['phi'],
            lambda_family=merged['lambda'],
            lambda_params=_numeric_params('lambda', _family_params(raw, 'lambda')),
            beta=_to_float('beta', merged['beta']) if merged['beta'] else None,
            nu_family=merged['nu'],
            nu_params=_numeric_params('nu', _family_params(raw, 'nu')),
            accuracy=accuracy,
            accuracy_params=_numeric_params('accuracy', accuracy_params),
            distance_bound=merged['distance_bound'],
            f_star_hint=merged['f_star_hint'] or None,
            reprojection=merged['reprojection'],
            subgradient_gamma=_to_float('subgradient_gamma', merged['subgradient_gamma']),
            stopping=stopping,
            timing=_to_bool('timing', merged['timing']),
            trace_path=merged['trace_path'],
            summary_path=merged['summary_path'],
            raw=raw,
        )

    # ------------------------------------------------------------------
    # builders
    # ------------------------------------------------------------------

    def load_problem(self):
        if self.problem == 'builtin:desk':
            return desk_instance(self.m, self.support, self.seed)
        if self.problem == 'builtin:abs1d':
            return abs1d_instance()
        if self.problem.startswith('builtin:'):
            raise ConfigError(f"Unknown builtin problem: {self.problem}. Available: {list(BUILTIN_PROBLEMS)}")
        if not os.path.isfile(self.problem):
            raise ConfigError(f"instance file not found: {self.problem}")
        return read_instance(self.problem)

    def resolve_value(self, key, value, inst):
        """Numbers pass through; 'fstar' means the planted optimum value"""
        if str(value).strip().lower() == 'fstar':
            if inst.f_star is None:
                raise ConfigError(f"{key} = fstar needs an instance with a planted solution")
            return inst.f_star
        return _to_float(key, value)

    def build_projector(self, inst):
        return AffineProjector(inst.A, inst.b, sigma=inst.sigma_min)

    def build_schedule(self):
        return get_schedule(self.schedule, self.schedule_params)

    def build_oracle(self, inst, schedule=None):
        oracle = L1Oracle(inst.n)
        if self.subgradient_gamma > 0:
            if self.variant != 'predetermined' or schedule is None:
                raise ConfigError("subgradient_gamma is only supported with the predetermined variant")
            oracle = eps_subgradient_wrap(oracle, gamma_from_schedule(schedule, self.subgradient_gamma),
                                          seed=self.seed)
        elif self.subgradient_gamma < 0:
            raise ConfigError(f"subgradient_gamma must be >= 0, got {self.subgradient_gamma}")
        return oracle

    def build_distance_bound(self, inst):
        if self.distance_bound == 'none':
            return None
        if self.distance_bound == 'bp':
            return BpDistanceBound()
        if self.distance_bound == 'exact':
            if inst.x_star is None:
                raise ConfigError("distance_bound = exact needs an instance with a planted solution")
            return ExactDistanceBound(x_star=inst.x_star)
        if self.distance_bound in DISTANCE_BOUNDS:
            raise ConfigError(f"distance bound {self.distance_bound} is not available for Basis Pursuit runs")
        raise ConfigError(f"Unknown distance bound: {self.distance_bound}. "
                          f"Available: ['bp', 'exact', 'none']")

    def build_dynamic_config(self, inst):
        hint = None if self.f_star_hint is None else self.resolve_value('f_star_hint', self.f_star_hint, inst)
        try:
            return DynamicConfig(
                phi=self.resolve_value('phi', self.phi, inst),
                lambda_seq=get_lambda_sequence(self.lambda_family, self.lambda_params),
                beta=self.beta,
                nu_seq=get_nu_sequence(self.nu_family, self.nu_params),
                accuracy=get_accuracy_policy(self.accuracy, self.accuracy_params),
                distance_bound=self.build_distance_bound(inst),
                f_star_hint=hint,
                reprojection=self.reprojection,
            )
        except ConfigError:
            raise
        except UsageError as e:
            raise ConfigError(str(e)) from e

    def start_point(self, inst):
        return np.asarray(inst.start_point(), dtype=float)
