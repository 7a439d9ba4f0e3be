"""
Flask REST API for Veritest
Exposes discernment checks, virtual values, solvers and figure data as JSON endpoints
"""
import json
import logging

from flask import Flask, jsonify, request
from flask_cors import CORS

import config
import veritest
from documents import json_text, parse_document
from errors import VeritestError
from figure_tables import FigureTables

logger = logging.getLogger(__name__)

app = Flask(__name__)
CORS(app)  # Enable CORS for all routes


def _plain(record):
    """numpy scalars and arrays to JSON-native values."""
    return json.loads(json_text(record))


def _document():
    body = request.get_json(silent=True) or {}
    text = body.get('document')
    if not isinstance(text, str):
        raise ValueError("request body needs a 'document' string")
    return parse_document(text, source='<request>', fmt=body.get('format', 'toml')), body


def _failure(e):
    if isinstance(e, (VeritestError, ValueError, KeyError)):
        return jsonify({'success': False, 'error': str(e)}), 400
    logger.exception("request failed")
    return jsonify({'success': False, 'error': str(e)}), 500


@app.route('/api')
def api_info():
    """API information page"""
    return f"""
    <html>
    <head><title>{config.APP_NAME}</title></head>
    <body style="font-family: Arial; padding: 40px;">
        <h1>{config.APP_NAME} API Server</h1>
        <p>Version {config.VERSION}. POST endpoints take JSON with a TOML <code>document</code> string.</p>
        <h2>Available Endpoints:</h2>
        <ul>
            <li>POST /api/discernment - Discernment witness or relation table</li>
            <li>POST /api/validate-alpha - Most-discerning authentication rate certificate</li>
            <li>POST /api/virtual-value - Virtual value curves</li>
            <li>POST /api/solve/&lt;pricing|sale|auction&gt; - Optimal mechanism with IC report</li>
            <li>GET /api/figures/&lt;name&gt; - Figure datasets ({', '.join(FigureTables.NAMES)})</li>
        </ul>
    </body>
    </html>
    """


@app.route('/api/discernment', methods=['POST'])
def discernment():
    """Witness for (type, tau, psi), or the full relation table"""
    try:
        doc, body = _document()
        record, code = veritest.run_check_discernment(doc, body.get('type'), body.get('tau'),
                                                      body.get('psi'))
        return jsonify({'success': True, 'holds': code == config.EXIT_OK, 'data': _plain(record)})
    except Exception as e:
        return _failure(e)


@app.route('/api/validate-alpha', methods=['POST'])
def validate_alpha():
    try:
        doc, _ = _document()
        record, code = veritest.run_validate_alpha(doc)
        return jsonify({'success': True, 'holds': code == config.EXIT_OK, 'data': _plain(record)})
    except Exception as e:
        return _failure(e)


@app.route('/api/virtual-value', methods=['POST'])
def virtual_value():
    """Virtual value table as columns and rows"""
    try:
        doc, body = _document()
        lambdas = body.get('lambdas')
        table = FigureTables(body.get('grid') or doc.grid_n(config.VIRTUAL_VALUE_GRID_N)) \
            .create_virtual_value_table(lambdas if lambdas is not None else doc.lambdas(),
                                        doc.distribution())
        return jsonify({'success': True, 'data': _plain(table)})
    except Exception as e:
        return _failure(e)


@app.route('/api/solve/<kind>', methods=['POST'])
def solve(kind):
    """Solve a pricing, sale or auction document"""
    try:
        doc, body = _document()
        summary, csv_text, code = veritest.run_solve(doc, kind, body.get('grid'),
                                                     body.get('tol', config.IC_TOL))
        return jsonify({
            'success': True,
            'ic_passes': code == config.EXIT_OK,
            'data': _plain(summary),
            'csv': csv_text,
        })
    except Exception as e:
        return _failure(e)


@app.route('/api/figures/<name>')
def figure(name):
    try:
        grid = request.args.get('grid', type=int)
        table = FigureTables(grid).create(name)
        return jsonify({'success': True, 'data': _plain(table)})
    except Exception as e:
        return _failure(e)


if __name__ == '__main__':
    config.setup_logging()
    print("\n" + "=" * 60)
    print(f"{config.APP_NAME} API Server")
    print("=" * 60)
    print(f"Server starting on http://{config.WEB_HOST}:{config.WEB_PORT}")
    if config.WEB_HOST == '0.0.0.0':
        print(f"Access from network: http://<your-ip>:{config.WEB_PORT}")
    print("=" * 60 + "\n")

    app.run(host=config.WEB_HOST, port=config.WEB_PORT, debug=False)
