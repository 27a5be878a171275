"""
Flask API for the ISA solver
Provides endpoints for instance generation and solver runs

Serve with:  gunicorn --chdir python isa_solver.api:app
"""

import logging
import traceback

from flask import Flask, jsonify, request
from flask_cors import CORS

from . import __version__
from .cli import execute_run, run_summary, to_json_safe
from .config import DEFAULT_RUN_CONFIG, RunConfig
from .errors import UsageError
from .instances import DESK_M, DESK_SEED, DESK_SUPPORT, abs1d_instance, desk_instance, instance_from_arrays
from .log import configure_logging
from .schedules import (
    ACCURACY_POLICIES,
    DEFAULT_FAMILY_PARAMS,
    DISTANCE_BOUNDS,
    LAMBDA_SEQUENCES,
    NU_SEQUENCES,
    PREDETERMINED_SCHEDULES,
)

logger = logging.getLogger(__name__)

app = Flask(__name__)
CORS(app)  # browser front ends call from another origin

# Requests may not ask for more work than this
MAX_API_ITERATIONS = 100000


def _families():
    return {
        'schedules': list(PREDETERMINED_SCHEDULES.keys()),
        'lambda': list(LAMBDA_SEQUENCES.keys()),
        'nu': list(NU_SEQUENCES.keys()),
        'accuracy': list(ACCURACY_POLICIES.keys()),
        'distance_bounds': list(DISTANCE_BOUNDS.keys()),
    }


def _instance_from_request(problem):
    """
    problem is either {"builtin": "abs1d"}, {"m": .., "support": .., "seed": ..}
    or explicit data {"A": [[..]], "b": [..], "x_star": [..]}
    """
    problem = problem or {}
    if 'A' in problem:
        if 'b' not in problem:
            raise UsageError('Missing "b" next to "A" in problem')
        return instance_from_arrays(problem['A'], problem['b'], problem.get('x_star'))
    if problem.get('builtin') == 'abs1d':
        return abs1d_instance()
    return desk_instance(int(problem.get('m', DESK_M)), int(problem.get('support', DESK_SUPPORT)),
                         int(problem.get('seed', DESK_SEED)))


@app.route('/api/health', methods=['GET'])
def health_check():
    """Health check endpoint, returns version and registered families"""
    return jsonify({
        'status': 'healthy',
        'version': __version__,
        'families': _families(),
    })


@app.route('/api/available_families', methods=['GET'])
def available_families():
    """Return registered families with their default parameters"""
    return jsonify({
        'families': _families(),
        'default_params': DEFAULT_FAMILY_PARAMS,
        'default_config': DEFAULT_RUN_CONFIG,
    })


@app.route('/api/generate', methods=['POST'])
def generate():
    """
    Generate a Basis Pursuit instance

    Request body:
    {
        "m": 128, "support": 4, "seed": 7,
        "include_data": false     // optional, return A, b and x_star
    }
    """
    try:
        data = request.get_json(silent=True) or {}
        inst = _instance_from_request(data)
        response = {'success': True, 'instance': to_json_safe(inst.summary())}
        if data.get('include_data'):
            response['data'] = to_json_safe({'A': inst.A, 'b': inst.b, 'x_star': inst.x_star})
        return jsonify(response)
    except (UsageError, ValueError, TypeError) as e:
        return jsonify({'success': False, 'error': str(e)}), 400
    except Exception as e:
        traceback.print_exc()
        return jsonify({'success': False, 'error': str(e)}), 500


@app.route('/api/solve', methods=['POST'])
def solve():
    """
    Run either solver variant

    Request body:
    {
        "problem": {"m": 16, "support": 2, "seed": 3},   // or {"A":..,"b":..}
        "config": {"variant": "dynamic", "accuracy": "fixed_cg", ...},
        "include_trace": true
    }

    Returns: run summary (as written by the CLI) and optionally the trace
    columns
    """
    try:
        data = request.get_json(silent=True)
        if not data:
            return jsonify({'success': False, 'error': 'Missing request body'}), 400

        raw = {str(k): str(v) for k, v in (data.get('config') or {}).items()}
        cfg = RunConfig.from_mapping(raw)
        if cfg.stopping.max_iterations > MAX_API_ITERATIONS:
            return jsonify({
                'success': False,
                'error': f'max_iterations above {MAX_API_ITERATIONS} is not served over HTTP'
            }), 400

        inst = _instance_from_request(data.get('problem'))
        outcome = execute_run(cfg, inst)
        response = {'success': True, 'summary': to_json_safe(run_summary(outcome, cfg.raw))}
        if data.get('include_trace', True):
            frame = outcome.result.trace_frame()
            response['trace'] = to_json_safe({col: frame[col].to_numpy() for col in frame.columns})
        return jsonify(response)
    except (UsageError, ValueError, TypeError) as e:
        return jsonify({'success': False, 'error': str(e)}), 400
    except Exception as e:
        traceback.print_exc()
        return jsonify({'success': False, 'error': str(e)}), 500


if __name__ == '__main__':
    configure_logging()
    print("=" * 60)
    print("ISA Solver API Starting...")
    print("=" * 60)
    print(f"✓ Families: {_families()}")
    print("✓ Endpoints:")
    print("  - GET  /api/health")
    print("  - GET  /api/available_families")
    print("  - POST /api/generate")
    print("  - POST /api/solve")
    print("=" * 60)
    app.run(host='0.0.0.0', port=5000)
