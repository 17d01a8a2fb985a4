import json
import math

import numpy as np
import pytest

from epimon.exceptions import EpimonValidationException
from epimon.segfit import fit_segmented_dp
from epimon.series import log_transform
from epimon.tools.fixtures import bundle
from epimon.tools.fixtures import closed_form_params
from epimon.tools.fixtures import mu_for
from epimon.tools.fixtures import two_phase_series
from epimon.tools.validate import SUITES
from epimon.tools.validate import brute_force_loss
from epimon.tools.validate import closed_form_root
from epimon.tools.validate import first_days
from epimon.tools.validate import run_suite
from epimon.tools.validate import run_suites
from epimon.tools.validate import validate

CHEAP = ['combination', 'quantiles', 'eigen_identity']


def test_run_suites():
    results = run_suites(CHEAP, quick=True)

    assert list(results) == CHEAP
    assert all(r['passed'] for r in results.values()), results


def test_unknown_suite():
    with pytest.raises(EpimonValidationException):
        run_suites(['nothing'])


def test_run_suite_keeps_going():
    assert run_suite('dp_optimality', quick=True)['passed']


def test_validate_writes_report(tmp_path):
    report = validate(tmp_path, names=['quantiles'])
    payload = json.loads((tmp_path / 'validate.json').read_text(encoding='utf-8'))

    assert report['passed'] and payload['passed']
    assert payload['suites']['quantiles']['df5']['0.975'] == pytest.approx(2.5706, abs=1e-4)


def test_first_days():
    assert first_days(['none', 'warning', 'warning', 'alarm', 'confirmed']) == [1, 3, 4]
    assert first_days(['none', 'alarm']) == [1, 1, None]


def test_closed_form_root():
    assert closed_form_root(1 / 7) == pytest.approx(0.0, abs=1e-12)

    lam = closed_form_root(2 / 7)
    assert 2 / 7 * math.exp(-3 * lam) * -math.expm1(-7 * lam) / lam == pytest.approx(1.0, rel=1e-12)


def test_mu_for_inverts():
    params = closed_form_params(h=0.05)
    assert mu_for(params, closed_form_root(0.2)) == pytest.approx(0.2, rel=1e-9)


def test_brute_force_single_segment():
    x = np.arange(6, dtype=float)
    assert brute_force_loss(x, 0.3 * x + 1.0, 1, 'l1') == pytest.approx(0.0, abs=1e-12)


def test_two_phase_fixture():
    logs = log_transform(two_phase_series(seed=0))
    fit = fit_segmented_dp(logs, 2)

    assert abs(fit.breakpoints[0] - 20) <= 2
    assert fit.slopes == pytest.approx([0.1, -0.06], abs=0.02)


def test_bundle(tmp_path):
    files = bundle(tmp_path, seed=1, epoch='2020-03-01')

    assert all(f.exists() for f in files)
    assert (tmp_path / 'decaying_disp.csv').read_text(encoding='utf-8').splitlines()[1].startswith('2020-03-01,')


@pytest.mark.slow
@pytest.mark.parametrize('name', sorted(set(SUITES) - set(CHEAP)))
def test_suite(name):
    assert run_suite(name, quick=True)['passed']
