import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from occfluct import analysis, branching as br, fluctuations as fl
from occfluct.errors import DomainError, RegimeError
from occfluct.stable_core import MotionSpec
from occfluct.testfunctions import SmoothBump, Zero, scaled

L = 4.0


def spec5(V=1.0):
    return br.SystemSpec(MotionSpec(2.0, 5), br.OffspringLaw(0.5), V, br.Domain(L, 5))


def bump():
    return SmoothBump(np.full(5, L / 2), 1.0)


def trajectory(seed, horizon, phis, warm=0.0, spec=None):
    spec = spec or spec5()
    rng = br.replica_rng(seed, 0)
    p = br.init_poisson(spec.domain, rng)
    if warm:
        p = br.warmup_to_equilibrium(spec, p, warm, rng)
    return br.simulate_occupation(spec, p, horizon, phis, rng)


# ---------------------------------------------------------------------------
# regimes and normalization


@pytest.mark.parametrize("d,regime", [(5, fl.INTERMEDIATE), (6, fl.CRITICAL), (7, fl.LARGE)])
def test_classify_examples(d, regime):
    assert fl.classify_regime(d, 2.0, 0.5) == regime


def test_no_equilibrium_raises():
    with pytest.raises(RegimeError):
        fl.classify_regime(4, 2.0, 0.5)
    with pytest.raises(DomainError):
        fl.classify_regime(5, 2.0, 1.0)


@given(alpha=st.sampled_from([0.5, 1.0, 1.5, 2.0]), beta=st.sampled_from([0.25, 0.5, 0.75]))
def test_regime_boundary_is_sharp(alpha, beta):
    crit = fl.critical_dimension(alpha, beta)
    # the grid values give an exactly representable boundary
    assert fl.classify_regime(crit, alpha, beta) == fl.CRITICAL
    assert fl.classify_regime(np.nextafter(crit, 0), alpha, beta) == fl.INTERMEDIATE
    assert fl.classify_regime(np.nextafter(crit, np.inf), alpha, beta) == fl.LARGE


@given(d=st.floats(0.1, 40.0), alpha=st.floats(0.1, 2.0), beta=st.floats(0.05, 0.95))
def test_classify_consistent_with_inequalities(d, alpha, beta):
    if d * beta <= alpha:
        with pytest.raises(RegimeError):
            fl.classify_regime(d, alpha, beta)
        return
    regime = fl.classify_regime(d, alpha, beta)
    expect = (fl.INTERMEDIATE if d * beta < alpha * (1 + beta)
              else fl.CRITICAL if d * beta == alpha * (1 + beta) else fl.LARGE)
    assert regime == expect


def test_normalization_frozen_values():
    assert fl.RegimePlan(5, 2.0, 0.5, 1.0, 100.0).F_T == pytest.approx(46.4159, rel=1e-5)
    assert fl.RegimePlan(6, 2.0, 0.5, 1.0, 100.0).F_T == pytest.approx((100 * math.log(100)) ** (2 / 3), rel=1e-14)
    assert fl.RegimePlan(7, 2.0, 0.5, 1.0, 100.0).F_T == pytest.approx(21.5443, rel=1e-5)


def test_critical_normalization_needs_T_above_one():
    with pytest.raises(DomainError):
        fl.RegimePlan(6, 2.0, 0.5, 1.0, 1.0)


def test_regime_table_rows():
    rows = fl.regime_table()
    assert [r["regime"] for r in rows] == [fl.INTERMEDIATE, fl.CRITICAL, fl.LARGE]
    assert rows[0]["convergence"] == ["functional"]
    assert rows[2]["family"] == "S'-SM"


# ---------------------------------------------------------------------------
# fluctuation fields


def test_zero_test_function_and_zero_time():
    plan = fl.RegimePlan(5, 2.0, 0.5, 1.0, 6.0)
    tr = trajectory(1, 6.0, [Zero(np.full(5, 2.0)), bump()])
    s = fl.build_fluctuation(tr, plan, [Zero(np.full(5, 2.0)), bump()], grid=13)
    assert np.all(s.values[0] == 0.0)
    assert np.all(s.values[:, 0] == 0.0)
    assert s.phi_ids == ("phi0", "phi1")


def test_linearity_in_test_function():
    plan = fl.RegimePlan(5, 2.0, 0.5, 1.0, 6.0)
    phi = bump()
    a = fl.build_fluctuation(trajectory(2, 6.0, [phi]), plan, [phi])
    b = fl.build_fluctuation(trajectory(2, 6.0, [scaled(phi, 2.5)]), plan, [scaled(phi, 2.5)])
    np.testing.assert_allclose(b.values, 2.5 * a.values, rtol=1e-10, atol=1e-12)


def test_short_horizon_rejected():
    plan = fl.RegimePlan(5, 2.0, 0.5, 1.0, 10.0)
    with pytest.raises(DomainError):
        fl.build_fluctuation(trajectory(3, 5.0, [bump()]), plan, [bump()])


def test_increments_edge_cases():
    plan = fl.RegimePlan(5, 2.0, 0.5, 1.0, 6.0)
    s = fl.build_fluctuation(trajectory(4, 6.0, [bump()]), plan, [bump()], grid=7)
    inc = fl.increments(s, [(0.3, 0.3), (0.0, 1.0)])
    assert inc[0, 0] == 0.0
    assert inc[0, 1] == pytest.approx(s.values[0, -1], rel=1e-15)
    with pytest.raises(DomainError):
        fl.increments(s, [(0.5, 1.5)])


def _equilibrium_samples(n, T, seed, grid=11):
    plan = fl.RegimePlan(5, 2.0, 0.5, 1.0, T)
    phi = bump()
    out = []
    for i in range(n):
        rng = br.replica_rng(seed, i)
        spec = spec5()
        p = br.warmup_to_equilibrium(spec, br.init_poisson(spec.domain, rng), br.default_warmup(spec), rng)
        tr = br.simulate_occupation(spec, p, T, [phi], rng, replica=i)
        out.append(fl.build_fluctuation(tr, plan, [phi], grid=grid))
    return out, plan


@pytest.fixture(scope="module")
def equilibrium_runs():
    return _equilibrium_samples(300, 10.0, seed=31)


def test_equilibrium_start_is_centered(equilibrium_runs):
    samples, _ = equilibrium_runs
    x = np.array([s.values[0, -1] for s in samples])
    assert abs(x.mean()) < 3 * x.std(ddof=1) / math.sqrt(x.size)


def test_increment_law_is_shift_invariant(equilibrium_runs):
    samples, _ = equilibrium_runs
    a = np.array([fl.increments(s, [(0.0, 0.3)])[0, 0] for s in samples])
    b = np.array([fl.increments(s, [(0.6, 0.9)])[0, 0] for s in samples])
    scale = np.subtract(*np.percentile(np.r_[a, b], [75, 25]))
    z = np.linspace(0.2, 2.0, 6) / scale
    ea, eb = analysis.empirical_charfn(a, z), analysis.empirical_charfn(b, z)
    band = 3 * np.sqrt(ea.se**2 + eb.se**2)
    assert np.all(np.abs(ea.value - eb.value) < band)


def test_csv_and_summary(tmp_path, equilibrium_runs):
    samples, plan = equilibrium_runs
    path = tmp_path / "fluct.csv"
    fl.write_fluctuation_csv(path, samples[:2], comment="config_hash=x")
    lines = path.read_text().splitlines()
    rows = list(csv.reader(lines[1:]))
    assert tuple(rows[0]) == fl.FLUCTUATION_COLUMNS
    assert len(rows) == 1 + 2 * 11
    assert rows[1][4] == fl.INTERMEDIATE
    summary = fl.fluctuation_summary(samples, plan)
    assert summary["replicas"] == 300 and summary["parameters"]["regime"] == fl.INTERMEDIATE
    fl.dump_summary(tmp_path / "s.json", summary)
    assert json.loads((tmp_path / "s.json").read_text())["table"][0]["phi_id"] == "phi0"


@pytest.mark.xfail(strict=True, reason="finite-size effect: on a side-4 torus the estimate sits well "
                                       "below 1.5 (1.14 at T=50 with 1500 replicas); see ledger")
def test_poisson_start_fluctuations_heavy_tailed_desk_scale():
    plan = fl.RegimePlan(5, 2.0, 0.5, 1.0, 30.0)
    phi = bump()
    x = []
    for i in range(1000):
        tr = trajectory(1000 + i, 30.0, [phi])
        x.append(fl.build_fluctuation(tr, plan, [phi], grid=np.array([0.0, 1.0])).values[0, -1])
    est = analysis.estimate_stability_index(np.array(x))
    assert abs(est.estimate - 1.5) <= 0.15
