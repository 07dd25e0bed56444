import math
import os
from pathlib import Path

import pytest

import qlidar

CONFIGS = Path(os.environ.get("QLIDAR_SOURCE_DIR", Path(__file__).parents[2])) / "configs"


def setup():
    s = qlidar.SourceSetup()
    s.pair_rate = 6.8e6
    s.loss_db = 33.5
    s.eta_s = 0.2329
    s.eta_i = 0.1958
    s.signal_background_rate = 1e6
    s.tau_c = 2e-9
    s.t_int = 0.1
    return s


def test_version():
    assert qlidar.__version__


def test_click_probabilities_ordered():
    p = qlidar.make_params(setup())
    assert qlidar.validate(p) == []
    c = qlidar.click_probabilities(p)
    assert 0 < c.p_h0_ci < c.p_h1_ci < 1
    assert 0 < c.p_h0_qi < c.p_h1_qi < 1
    assert c.p_idler == pytest.approx(p.n_mean * p.eta_i / (1 + p.n_mean * p.eta_i), rel=1e-3)


def test_llv_is_linear():
    coeffs = qlidar.linear_coeffs(0.01, 0.02)
    x, k = 7, 300
    want = x * math.log(0.02 / 0.01) + (k - x) * math.log(0.98 / 0.99)
    assert qlidar.llv(x, k, coeffs) == pytest.approx(want, rel=1e-12)


def test_quantum_beats_classical():
    p = qlidar.make_params(setup())
    assert qlidar.analytic_phi(p, True) > qlidar.analytic_phi(p, False)
    assert qlidar.analytic_phi(p, True, n_av=50) > 0.95
    assert 10 < qlidar.equivalent_averaging_factor(p, p, 50) < 25


def test_errors_are_raised():
    with pytest.raises(qlidar.Error):
        qlidar.linear_coeffs(0.0, 0.5)
    with pytest.raises(qlidar.Error):
        qlidar.run_config("/no/such/config.toml")


def test_measurement_is_seeded():
    p = qlidar.make_params(setup())
    a = qlidar.run_measurement(p, qlidar.Hypothesis.h1, seed=3)
    b = qlidar.run_measurement(p, qlidar.Hypothesis.h1, seed=3)
    assert (a.signal_counts, a.coincidence_counts) == (b.signal_counts, b.coincidence_counts)
    assert a.coincidence_counts <= a.idler_counts


def test_run_config_writes_outputs(tmp_path):
    summary = qlidar.run_config(str(CONFIGS / "detection_33db.toml"), seed=2, scale=0.02, out=tmp_path)
    assert summary["empirical"]["qi_single"]["phi"] > summary["empirical"]["ci_single"]["phi"]
    assert (tmp_path / "measurements.csv").exists()
    assert (tmp_path / "metadata.json").exists()
