import pytest

from isa_solver import __version__
from isa_solver.api import MAX_API_ITERATIONS, app


@pytest.fixture
def client():
    app.config['TESTING'] = True
    with app.test_client() as c:
        yield c


def test_health(client):
    response = client.get('/api/health')
    assert response.status_code == 200
    data = response.get_json()
    assert data['status'] == 'healthy'
    assert data['version'] == __version__
    assert 'fixed_cg' in data['families']['accuracy']


def test_available_families(client):
    data = client.get('/api/available_families').get_json()
    assert data['default_params']['harmonic_pair'] == {'scale_a': 1.0, 'scale_e': 1.0}
    assert data['default_config']['variant'] == 'dynamic'


def test_generate(client):
    response = client.post('/api/generate', json={'m': 8, 'support': 2, 'seed': 3, 'include_data': True})
    assert response.status_code == 200
    data = response.get_json()
    assert data['success']
    assert data['instance']['n'] == 32
    assert len(data['data']['A']) == 8
    assert len(data['data']['x_star']) == 32


def test_generate_rejects_bad_size(client):
    response = client.post('/api/generate', json={'m': 12})
    assert response.status_code == 400
    assert not response.get_json()['success']


def test_solve_builtin(client):
    response = client.post('/api/solve', json={
        'problem': {'builtin': 'abs1d'},
        'config': {'variant': 'dynamic', 'accuracy': 'fixed_eps', 'distance_bound': 'none', 'timing': 'off'},
    })
    assert response.status_code == 200
    data = response.get_json()
    assert data['summary']['status'] == 'TargetReachedFeasible'
    assert data['summary']['final_f'] == 0.0
    assert data['trace']['alpha_k'] == [5.0]


def test_solve_explicit_arrays(client):
    response = client.post('/api/solve', json={
        'problem': {'A': [[1.0, 0.0], [0.0, 1.0]], 'b': [1.0, -2.0], 'x_star': [1.0, -2.0]},
        'config': {'variant': 'predetermined', 'max_iterations': 20},
        'include_trace': False,
    })
    assert response.status_code == 200
    data = response.get_json()
    assert 'trace' not in data
    assert data['summary']['final_dist_opt'] <= 1e-6


def test_solve_errors(client):
    assert client.post('/api/solve', json={}).status_code == 400
    response = client.post('/api/solve', json={'problem': {'builtin': 'abs1d'}, 'config': {'colour': 'red'}})
    assert response.status_code == 400
    assert 'Unknown config key' in response.get_json()['error']
    response = client.post('/api/solve', json={'problem': {'A': [[1.0]]}, 'config': {}})
    assert response.status_code == 400
    response = client.post('/api/solve', json={'problem': {'builtin': 'abs1d'},
                                               'config': {'max_iterations': MAX_API_ITERATIONS + 1}})
    assert response.status_code == 400
