"""
Command-line entry point.

    python -m isa_solver generate --m 128 --support 4 --seed 7 --out inst.txt
    python -m isa_solver run --config run.cfg --out results/
    python -m isa_solver figure2 --out figure2/
    python -m isa_solver check inst.txt

Exit codes: 0 success, 2 usage or configuration error, 3 numerical breakdown
(partial outputs are still written).
"""

import argparse
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .errors import IsaError, UsageError
from .instances import (
    DESK_M,
    DESK_SEED,
    DESK_SUPPORT,
    desk_instance,
    read_instance,
    validate_instance,
    write_instance,
)
from .log import configure_logging
from .oracles import L1Oracle
from .projections import AffineProjector
from .schedules import DynamicConfig, FixedCgPolicy, FixedEpsPolicy, lambda_constant, lambda_geometric
from .config import RunConfig, load_config
from .solver import SolveStatus, StoppingConfig, solve_dynamic, solve_predetermined

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_BREAKDOWN = 3

FIGURE2_MAX_ITERATIONS = 10000
FIGURE2_ACCURATE_EPS = 1e-12
FIGURE2_CG_ITERATIONS = 2


def to_json_safe(obj):
    """Convert numpy types to Python natives; non-finite floats become None"""
    if isinstance(obj, np.ndarray):
        return [to_json_safe(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): to_json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_json_safe(v) for v in obj]
    return obj


def write_json(obj, path):
    with open(path, 'w', newline='\n') as fh:
        json.dump(to_json_safe(obj), fh, sort_keys=True, indent=2, allow_nan=False)
        fh.write('\n')


def write_trace_csv(result, path):
    result.trace_frame().to_csv(path, index=False, lineterminator='\n')


def _out_path(out_dir, name):
    return name if out_dir is None or os.path.isabs(name) else os.path.join(out_dir, name)


@dataclass
class RunOutcome:
    result: object
    instance: object
    wall_seconds: object
    # family parameters as the solver saw them, after defaults were filled in
    resolved: dict


def execute_run(cfg, inst=None):
    """Solve the problem described by a RunConfig; returns a RunOutcome"""
    if inst is None:
        inst = cfg.load_problem()
    projector = cfg.build_projector(inst)
    x0 = cfg.start_point(inst)

    started = time.perf_counter()
    if cfg.variant == 'predetermined':
        schedule = cfg.build_schedule()
        oracle = cfg.build_oracle(inst, schedule)
        result = solve_predetermined(oracle, projector, schedule, x0, cfg.stopping, x_star=inst.x_star,
                                     distance_bound=None if inst.x_star is not None else cfg.build_distance_bound(inst))
        resolved = schedule.describe()
    else:
        oracle = cfg.build_oracle(inst)
        dyn = cfg.build_dynamic_config(inst)
        result = solve_dynamic(oracle, projector, dyn, x0, cfg.stopping, x_star=inst.x_star)
        resolved = dyn.describe()
    elapsed = time.perf_counter() - started
    return RunOutcome(result, inst, elapsed if cfg.timing else None, resolved)


def run_summary(outcome, config_echo):
    result = outcome.result
    inst = outcome.instance
    summary = {
        **result.summary(),
        'wall_seconds': outcome.wall_seconds,
        'f_star': inst.f_star,
        'config': config_echo,
        'resolved': outcome.resolved,
    }
    if inst.x_star is not None:
        summary['final_dist_opt'] = float(np.linalg.norm(result.final_x - inst.x_star))
    return summary


# ----------------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------------

def cmd_generate(args):
    inst = desk_instance(args.m, args.support, args.seed)
    write_instance(inst, args.out)
    print(f"✓ wrote {args.out}: {inst.m}x{inst.n}, support {len(inst.support)}")
    print(f"  sigma_min = {inst.sigma_min:.12g}")
    print(f"  erc_value = {inst.erc_value:.12g} ({'certified unique' if inst.certified_unique else 'NOT certified'})")
    if not inst.certified_unique:
        print("⚠️  planted solution is not certified as the unique optimum")
    return EXIT_OK


def cmd_run(args):
    raw = load_config(args.config) if args.config else {}
    for item in args.set or []:
        if '=' not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, value = (part.strip() for part in item.split('=', 1))
        raw[key] = value
    if args.seed is not None:
        raw['seed'] = str(args.seed)
    cfg = RunConfig.from_mapping(raw)

    if args.out:
        os.makedirs(args.out, exist_ok=True)
    trace_path = _out_path(args.out, cfg.trace_path)
    summary_path = _out_path(args.out, cfg.summary_path)

    outcome = execute_run(cfg)
    result = outcome.result
    write_trace_csv(result, trace_path)
    write_json(run_summary(outcome, cfg.raw), summary_path)

    print(f"✓ {cfg.variant} run finished: {result.status} after {result.iterations} iterations")
    print(f"  final f = {result.final_f:.10g}, feas_inf = {result.final_feas_inf:.3e}")
    print(f"  trace -> {trace_path}, summary -> {summary_path}")
    if result.status == SolveStatus.NUMERICAL_BREAKDOWN:
        print(f"⚠️  numerical breakdown: {result.message or ', '.join(result.flags)}")
        return EXIT_BREAKDOWN
    return EXIT_OK


def _peak_feas(result):
    frame = result.trace_frame()
    later = frame.loc[frame['k'] >= 1, 'feas_inf']
    values = list(later) + [result.final_feas_inf]
    return float(max(values))


def _figure2_run(label, inst, projector, config, stop):
    started = time.perf_counter()
    result = solve_dynamic(L1Oracle(inst.n), projector, config, inst.start_point(), stop, x_star=inst.x_star)
    return label, result, time.perf_counter() - started


def _min_dist_opt(result, x_star):
    dists = result.trace_frame()['dist_opt'].dropna().tolist()
    dists.append(float(np.linalg.norm(result.final_x - x_star)))
    return float(min(dists))


def figure2_experiment(inst, phi=0.0, lam=1.0, lambda_decay=None, max_iterations=FIGURE2_MAX_ITERATIONS,
                       jobs=2, timing=True):
    """
    Dynamic runs with two CG projections per step and with ε = 1e-12
    projections, otherwise identical.

    Args:
        inst: instance with a planted x*
        phi: target value, or 'fstar' for the planted optimum
        lam: λ₀ (constant λ_k ≡ lam unless lambda_decay is given)
        lambda_decay: q for λ_k = lam·q^k

    Returns:
        (results by label, comparison dict)
    """
    if inst.x_star is None:
        raise UsageError("figure2 needs an instance with a planted solution x*")
    f_star = inst.f_star
    phi = f_star if phi == 'fstar' else float(phi)
    projector = AffineProjector(inst.A, inst.b, sigma=inst.sigma_min)
    stop = StoppingConfig(max_iterations=max_iterations)

    def lambda_seq():
        return lambda_constant(lam) if lambda_decay is None else lambda_geometric(lam, lambda_decay)

    configs = {
        'inexact': DynamicConfig(phi=phi, lambda_seq=lambda_seq(),
                                 accuracy=FixedCgPolicy(FIGURE2_CG_ITERATIONS)),
        'accurate': DynamicConfig(phi=phi, lambda_seq=lambda_seq(),
                                  accuracy=FixedEpsPolicy(FIGURE2_ACCURATE_EPS)),
    }

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=2) as pool:
            futures = [pool.submit(_figure2_run, label, inst, projector, cfg, stop) for label, cfg in configs.items()]
            runs = [f.result() for f in futures]
    else:
        runs = [_figure2_run(label, inst, projector, cfg, stop) for label, cfg in configs.items()]

    results = {}
    comparison = {'f_star': f_star, 'phi': phi, 'lambda': lam, 'lambda_decay': lambda_decay,
                  'max_iterations': max_iterations, 'runs': {}}
    for label, result, elapsed in runs:
        results[label] = result
        comparison['runs'][label] = {
            'status': str(result.status),
            'iterations': result.iterations,
            'wall_seconds': elapsed if timing else None,
            'peak_feas_inf': _peak_feas(result),
            'final_feas_inf': result.final_feas_inf,
            'final_dist_opt': float(np.linalg.norm(result.final_x - inst.x_star)),
            'min_dist_opt': _min_dist_opt(result, inst.x_star),
            'final_f': result.final_f,
            'min_f': result.min_f,
            'min_inexact_f': result.min_inexact_f,
            'undershoot': bool(result.min_inexact_f is not None and result.min_inexact_f < f_star),
        }
    accurate_peak = comparison['runs']['accurate']['peak_feas_inf']
    inexact_peak = comparison['runs']['inexact']['peak_feas_inf']
    comparison['peak_feas_ratio'] = inexact_peak / accurate_peak if accurate_peak > 0 else None
    return results, comparison


def _parse_phi(text):
    if text == 'fstar':
        return text
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"--phi must be a number or 'fstar', got {text!r}") from None


def cmd_figure2(args):
    if args.instance:
        inst = read_instance(args.instance)
    else:
        inst = desk_instance(args.m, args.support, args.seed)
    os.makedirs(args.out, exist_ok=True)
    results, comparison = figure2_experiment(inst, phi=_parse_phi(args.phi), lam=args.lam,
                                             lambda_decay=args.lambda_decay, max_iterations=args.max_iterations,
                                             jobs=args.jobs, timing=not args.no_timing)
    for label, result in results.items():
        write_trace_csv(result, os.path.join(args.out, f"{label}_trace.csv"))
    write_json(comparison, os.path.join(args.out, 'comparison.json'))

    for label, run in comparison['runs'].items():
        print(f"✓ {label:8s}: {run['status']} after {run['iterations']} iterations, "
              f"peak feas_inf {run['peak_feas_inf']:.3e}, ‖x − x*‖ {run['final_dist_opt']:.3e}")
    ratio = comparison['peak_feas_ratio']
    print(f"  peak feasibility ratio inexact/accurate = {ratio if ratio is None else f'{ratio:.3e}'}")
    if any(r.status == SolveStatus.NUMERICAL_BREAKDOWN for r in results.values()):
        return EXIT_BREAKDOWN
    return EXIT_OK


def cmd_check(args):
    inst = read_instance(args.instance)
    is_valid, errors, warnings = validate_instance(inst)
    for e in errors:
        print(f"✗ {e}")
    for w in warnings:
        print(f"⚠️  {w}")
    if is_valid:
        print(f"✓ {args.instance}: valid {inst.m}x{inst.n} instance, sigma_min = {inst.sigma_min:.6g}")
        return EXIT_OK
    return EXIT_USAGE


# ----------------------------------------------------------------------------
# Parser
# ----------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog='isa_solver', description="Infeasible-point subgradient solver")
    p.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest='cmd', required=True)

    def common(sp):
        sp.add_argument('--quiet', action='store_true', help="only log errors")

    pg = sub.add_parser('generate', help="generate a Basis Pursuit instance file")
    pg.add_argument('--m', type=int, default=DESK_M)
    pg.add_argument('--support', type=int, default=DESK_SUPPORT)
    pg.add_argument('--seed', type=int, default=DESK_SEED)
    pg.add_argument('--out', default='instance.txt')
    common(pg)
    pg.set_defaults(func=cmd_generate)

    pr = sub.add_parser('run', help="run a solver from a config file")
    pr.add_argument('--config', default=None)
    pr.add_argument('--out', default=None, help="directory for trace and summary")
    pr.add_argument('--seed', type=int, default=None)
    pr.add_argument('--set', action='append', metavar='KEY=VALUE', help="override a config entry")
    common(pr)
    pr.set_defaults(func=cmd_run)

    pf = sub.add_parser('figure2', help="inexact vs accurate projection comparison")
    pf.add_argument('--instance', default=None, help="instance file (default: generated desk instance)")
    pf.add_argument('--out', default='figure2')
    pf.add_argument('--m', type=int, default=DESK_M)
    pf.add_argument('--support', type=int, default=DESK_SUPPORT)
    pf.add_argument('--seed', type=int, default=DESK_SEED)
    pf.add_argument('--lambda', dest='lam', type=float, default=1.0)
    pf.add_argument('--lambda-decay', type=float, default=None, help="q for lambda_k = lambda*q^k (default: constant)")
    pf.add_argument('--phi', default='0', help="target value, or 'fstar' for the planted optimum (default: 0)")
    pf.add_argument('--max-iterations', type=int, default=FIGURE2_MAX_ITERATIONS)
    pf.add_argument('--jobs', type=int, choices=(1, 2), default=2)
    pf.add_argument('--no-timing', action='store_true', help="write null wall times")
    common(pf)
    pf.set_defaults(func=cmd_figure2)

    pc = sub.add_parser('check', help="validate an instance file")
    pc.add_argument('instance')
    common(pc)
    pc.set_defaults(func=cmd_check)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    configure_logging('error' if args.quiet else None)
    try:
        return args.func(args)
    except UsageError as e:
        logger.error("%s", e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except IsaError as e:
        logger.error("%s", e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE if isinstance(e, ValueError) else EXIT_BREAKDOWN


if __name__ == '__main__':
    sys.exit(main())
