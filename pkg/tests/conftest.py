import json
import os
import sys

import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, os.path.join(ROOT, 'src'))
sys.path.insert(0, ROOT)

from core.model import EqualParams  # noqa: E402
from database.schema import DatabaseSchema  # noqa: E402


@pytest.fixture
def negative_mu():
    return EqualParams(lam=10.0, mu=-0.2)


@pytest.fixture
def positive_mu():
    return EqualParams(lam=10.0, mu=0.2)


@pytest.fixture
def db():
    schema = DatabaseSchema(db_path=':memory:')
    schema.connect()
    schema.initialize_schema()
    yield schema.get_connection()
    schema.close()


@pytest.fixture
def cli_config(tmp_path):
    """Config file whose database lives under tmp_path, single-threaded sweeps."""
    cfg = {
        'sweeps': {'workers': 1},
        'cache': {'enabled': True, 'db_path': str(tmp_path / 'quartet.db')},
        'output': {'format': 'csv', 'dir': str(tmp_path / 'out')},
    }
    path = tmp_path / 'config.json'
    path.write_text(json.dumps(cfg))
    return path
