"""
Tests for the Flask REST API
"""
import pytest

from api import app


@pytest.fixture
def client():
    app.config['TESTING'] = True
    with app.test_client() as client:
        yield client


def post_document(client, url, path, **extra):
    body = {'document': path.read_text(encoding='utf-8'), **extra}
    return client.post(url, json=body)


def test_info_page(client):
    response = client.get('/api')
    assert response.status_code == 200
    assert b'/api/discernment' in response.data


def test_discernment_witness(client, fixtures_dir):
    response = post_document(client, '/api/discernment', fixtures_dir / 'green_laffont.toml',
                             type='theta1', tau='tau2', psi='tau3')
    payload = response.get_json()
    assert response.status_code == 200
    assert payload['success'] and payload['holds']
    assert payload['data']['method'] == 'binary'


def test_validate_alpha(client, fixtures_dir):
    response = post_document(client, '/api/validate-alpha', fixtures_dir / 'green_laffont_alpha.toml')
    payload = response.get_json()
    assert payload['success'] and not payload['holds']
    assert payload['data']['violation']['slack'] == pytest.approx(-1.0)


def test_virtual_value(client, fixtures_dir):
    response = post_document(client, '/api/virtual-value', fixtures_dir / 'uniform.toml',
                             lambdas=[1.0], grid=11)
    table = response.get_json()['data']
    assert table['columns'] == ['theta', 'phi_myerson', 'phi_lambda_1']
    assert len(table['rows']) == 11


def test_solve_sale(client, fixtures_dir):
    response = post_document(client, '/api/solve/sale', fixtures_dir / 'sale.toml')
    payload = response.get_json()
    assert payload['ic_passes']
    assert payload['data']['revenue'] == pytest.approx(0.25, abs=1e-8)
    assert payload['csv'].startswith('theta,q,t,U,phi,phi_myerson')


def test_bad_requests(client):
    response = client.post('/api/discernment', json={})
    assert response.status_code == 400
    assert not response.get_json()['success']
    response = client.post('/api/validate-alpha', json={'document': '[types\n'})
    assert response.status_code == 400
    assert 'line 1' in response.get_json()['error']
    response = client.post('/api/solve/barter', json={'document': '[grid]\nn = 101\n'})
    assert response.status_code == 400


def test_figures(client):
    response = client.get('/api/figures/passage-scaled?grid=21')
    table = response.get_json()['data']
    assert table['columns'][:4] == ['theta', 'tau', 'psi1', 'psi2']
    assert len(table['rows']) == 21
    assert client.get('/api/figures/unknown').status_code == 400
