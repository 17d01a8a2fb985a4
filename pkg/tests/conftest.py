from pathlib import Path

import pytest

from epimon import config
from epimon.tools.fixtures import closed_form_params

FIXTURES = Path(__file__).parent / 'fixtures' / 'data'


@pytest.fixture(autouse=True)
def reset_settings():
    config.reset()
    yield
    config.reset()


@pytest.fixture()
def fixtures():
    return FIXTURES


@pytest.fixture()
def closed_form():
    return closed_form_params(h=0.05)
