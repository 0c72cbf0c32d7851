import sys
sys.path.append("../weakident")
import os
from functools import lru_cache

import numpy as np
import pytest

from weakident.config import RunConfig
from weakident.metrics import NoiseSpec, add_noise, error_report
from weakident.models import Coefficients, ObservationSet
from weakident.regression import weak_ident
from weakident.suite.models import get_system
from weakident.suite.utils import run_case, simulate
from tests.fixtures import *

pytestmark = [pytest.mark.benchmark, pytest.mark.slow]


@lru_cache(maxsize=None)
def _clean(name):
    return simulate(get_system(name))


def _medians(name, sigma, seeds, config=None):
    definition = get_system(name)
    clean = _clean(name)
    reports = [
        run_case(definition, clean, sigma, seed, config) for seed in seeds
    ]
    return {
        key: float(np.median([getattr(r, key) for r in reports]))
        for key in ("e2", "tpr", "ppv")
    }


def test_transport_clean():
    definition = get_system("transport")
    clean = _clean("transport")
    result = weak_ident(clean, system_name="transport")
    labels = result.dictionary.labels(clean.names)
    assert [labels[i] for i in result.variables[0].support] == ["u_x", "u_xx"]

    report = run_case(definition, clean, 0.0, seed=0)
    assert report.tpr == report.ppv == 1.0
    assert report.e2 <= 0.005


def test_transport_noisy():
    medians = _medians("transport", 1.0, range(20))
    assert medians["tpr"] == medians["ppv"] == 1.0
    assert medians["e2"] <= 0.05


@pytest.mark.parametrize("subsample", [40, 50, 60])
def test_transport_subsample_rate(subsample):
    config = RunConfig(subsample=subsample)
    medians = _medians("transport", 0.1, range(10), config)
    assert medians["tpr"] == medians["ppv"] == 1.0


def test_ks_noisy():
    medians = _medians("ks", 0.5, range(10))
    assert medians["tpr"] == medians["ppv"] == 1.0
    assert medians["e2"] <= 0.15


def test_nls_clean():
    report = run_case(get_system("nls"), _clean("nls"), 0.0, seed=0)
    assert report.tpr == report.ppv == 1.0
    assert report.e2 <= 1e-5


def test_lotka_volterra_noisy():
    medians = _medians("lotka_volterra", 0.1, range(20))
    assert medians["tpr"] == medians["ppv"] == 1.0
    assert medians["e2"] <= 0.1


def test_lorenz_noisy():
    medians = _medians("lorenz", 0.2, range(20))
    assert medians["tpr"] == medians["ppv"] == 1.0
    assert medians["e2"] <= 0.05


@pytest.mark.skipif(
    "WEAKIDENT_PM_FIXTURE" not in os.environ,
    reason="set WEAKIDENT_PM_FIXTURE to a 2D porous-medium WIDENT1 header",
)
def test_porous_medium_fixture():
    data = ObservationSet(path=os.environ["WEAKIDENT_PM_FIXTURE"])
    noisy = add_noise(data, NoiseSpec(0.08, seed=0))
    result = weak_ident(noisy, system_name="pm")
    labels = result.dictionary.labels(data.names)
    found = result.variables[0]
    assert {labels[i] for i in found.support} == {"(u^2)_xx", "(u^2)_yy"}

    truth = np.zeros(len(result.dictionary))
    for label in ("(u^2)_xx", "(u^2)_yy"):
        truth[result.dictionary.index_of_label(label, data.names)] = 1.0
    report = error_report(Coefficients(truth), found.coefficients)
    assert report.e2 <= 0.02
