import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from occfluct import analysis, verification
from occfluct.errors import DomainError, EstimationError
from occfluct.limit_processes import LimitProcess, xi_sample


def test_empirical_charfn_trivial_values():
    x = np.random.default_rng(0).normal(size=500)
    est = analysis.empirical_charfn(x, [0.0, 1.0])
    assert est.value[0] == 1.0 and est.se[0] == pytest.approx(0.0, abs=1e-12)
    c = analysis.empirical_charfn(np.full(10, 0.7), [2.0])
    assert c.value[0] == pytest.approx(np.exp(1.4j), rel=1e-14)
    assert c.se[0] == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(EstimationError):
        analysis.empirical_charfn([1.0], [1.0])


def test_empirical_charfn_se_matches_plugin_formula():
    x = np.random.default_rng(1).standard_cauchy(400)
    z = np.array([0.3, 1.0])
    e = np.exp(1j * np.outer(z, x))
    plugin = np.sqrt((np.var(e.real, axis=1, ddof=1) + np.var(e.imag, axis=1, ddof=1)) / x.size)
    np.testing.assert_allclose(analysis.empirical_charfn(x, z).se, plugin, rtol=1e-10)


@pytest.mark.parametrize("name,sampler,target,tol", [
    ("gaussian", lambda r, n: r.normal(size=n), 2.0, 0.1),
    ("cauchy", lambda r, n: r.standard_cauchy(n), 1.0, 0.1),
    ("skewed 1.5", lambda r, n: stats.levy_stable.rvs(1.5, 1.0, size=n, random_state=r), 1.5, 0.15),
])
def test_stability_index_on_known_laws(name, sampler, target, tol):
    x = sampler(np.random.default_rng(7), 10_000)
    assert abs(analysis.estimate_stability_index(x).estimate - target) <= tol


@settings(max_examples=10, deadline=None)
@given(c=st.floats(1e-3, 1e3))
def test_stability_index_is_scale_invariant(c):
    x = np.random.default_rng(11).standard_cauchy(2000)
    a = analysis.estimate_stability_index(x).estimate
    b = analysis.estimate_stability_index(c * x).estimate
    assert b == pytest.approx(a, rel=1e-8)


def test_stability_index_refuses_bad_input():
    with pytest.raises(EstimationError):
        analysis.estimate_stability_index(np.ones(999))
    with pytest.raises(EstimationError):
        analysis.estimate_stability_index(np.ones(2000))
    with pytest.raises(EstimationError):
        analysis.estimate_stability_index(np.random.default_rng(0).normal(size=2000), lo=0.5, hi=0.50001)


def test_selfsim_H_on_deterministic_and_brownian_paths():
    times = np.array([0.25, 0.5, 1.0])
    lin = np.outer(np.random.default_rng(2).uniform(0.5, 2.0, 200), times)
    assert analysis.estimate_selfsim_H(lin, times).estimate == pytest.approx(1.0, abs=1e-12)
    rng = np.random.default_rng(3)
    dt = np.diff(np.r_[0.0, times])
    bm = np.cumsum(rng.normal(size=(5000, 3)) * np.sqrt(dt), axis=1)
    est = analysis.estimate_selfsim_H(bm, times)
    assert abs(est.estimate - 0.5) < 0.03 and est.band > 0


def test_selfsim_H_validation():
    with pytest.raises(DomainError):
        analysis.estimate_selfsim_H(np.ones((20, 2)), [1.0, 2.0, 3.0])
    with pytest.raises(EstimationError):
        analysis.estimate_selfsim_H(np.ones((5, 2)), [1.0, 2.0])
    with pytest.raises(EstimationError):
        analysis.estimate_selfsim_H(np.zeros((20, 2)), [1.0, 2.0])


def test_dependence_query_validation():
    with pytest.raises(DomainError):
        analysis.DependenceQuery(1, 1, 0.0, 2.0, 1.0, 3.0)
    with pytest.raises(DomainError):
        analysis.DependenceQuery(1, 1, 0.0, 1.0, 2.0, 3.0, T_grid=(10.0, 5.0))


def test_dependence_zero_coefficient_and_determinism():
    proc = LimitProcess(5, 2.0, 0.5, "eta2")
    q0 = analysis.DependenceQuery(0.0, 1.0, 0.0, 1.0, 2.0, 3.0, T_grid=(10.0, 20.0))
    np.testing.assert_array_equal(analysis.dependence_DT(q0, proc), 0.0)
    q = analysis.DependenceQuery(1.0, 1.0, 0.0, 1.0, 2.0, 3.0, T_grid=(10.0, 20.0))
    a, b = analysis.dependence_DT(q, proc), analysis.dependence_DT(q, proc)
    np.testing.assert_array_equal(a, b)
    assert np.all(a > 0) and a[1] < a[0]


def test_dependence_decay_exponent_follows_quadrature():
    # not the acceptance target: the quadrature decays like T^-(d beta/alpha - 1)
    for mode in ("eta2", "eta"):
        kappa, r2, D = verification.dependence_fit(mode)
        assert kappa == pytest.approx(5 * 0.5 / 2.0 - 1, abs=0.02)
        assert r2 > 0.99


def test_power_law_fit_exact():
    x = np.geomspace(1, 100, 7)
    slope, intercept, r2 = analysis.power_law_fit(x, 3.0 * x**-1.25)
    assert slope == pytest.approx(-1.25, rel=1e-12)
    assert intercept == pytest.approx(math.log(3.0), rel=1e-12)
    assert r2 == pytest.approx(1.0, rel=1e-12)


def test_compare_distributions():
    rng = np.random.default_rng(5)
    a = xi_sample([1.0], 0.5, rng, size=5000)[:, 0]
    same = analysis.compare_distributions(a, a.copy())
    assert same["ks"]["statistic"] == 0.0 and same["sup_distance"] == 0.0
    ana = analysis.compare_distributions(a, lambda z: np.exp(-np.abs(z) ** 1.5 * (1 + 1j * np.sign(z))))
    assert ana["ks"] is None and ana["sup_distance"] < ana["max_band"] + 4 / math.sqrt(5000)
    shifted = analysis.compare_distributions(a, a + 5.0)
    assert shifted["ks"]["pvalue"] < 1e-10


def test_estimator_report_is_reproducible_json():
    x = np.arange(5.0)
    rec = json.loads(analysis.estimator_report("index", 1.49, 0.02, x, seed=3))
    assert rec == {"estimator": "index", "estimate": 1.49, "band": 0.02,
                   "inputs_hash": analysis.inputs_hash(x), "seed": 3}
    assert analysis.inputs_hash(x) != analysis.inputs_hash(x + 1e-12)
