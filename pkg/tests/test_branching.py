import csv
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from occfluct import branching as br
from occfluct.errors import DomainError, ResourceError
from occfluct.stable_core import MotionSpec
from occfluct.testfunctions import GaussianBump, SmoothBump, Zero

BETAS = (0.2, 0.5, 0.8)


# ---------------------------------------------------------------------------
# offspring law


def test_pmf_frozen_values():
    assert br.offspring_pmf(0.5, 0) == pytest.approx(2 / 3, abs=1e-15)
    assert br.offspring_pmf(0.3, 1) == 0.0
    assert br.offspring_pmf(0.5, 3) == pytest.approx(0.0416667, abs=5e-8)
    assert br.offspring_pmf(0.5, 2) == pytest.approx(0.25, abs=1e-15)


def test_generating_functions():
    assert br.generating_F(0.5, 1.0) == pytest.approx(1.0, abs=1e-15)
    assert br.generating_F(0.5, 0.5) == pytest.approx(0.73570, abs=5e-6)
    assert br.generating_G(0.5, 0.0) == 0.0
    law = br.OffspringLaw(0.5)
    k = np.arange(law.cache_size)
    assert np.sum(law.pmf * 0.5**k) == pytest.approx(br.generating_F(0.5, 0.5), abs=1e-13)


@pytest.mark.parametrize("beta", BETAS)
def test_pmf_recursion_matches_direct_formula(beta):
    law = br.OffspringLaw(beta)
    direct = np.array([br.offspring_pmf_direct(beta, k) for k in range(51)])
    np.testing.assert_allclose(law.pmf[:51], direct, rtol=0, atol=1e-12)


@pytest.mark.parametrize("beta", BETAS)
def test_mass_and_mean_with_tail(beta):
    law = br.OffspringLaw(beta)
    assert abs(law.mass_with_tail() - 1) < 1e-10
    assert abs(law.mean_with_tail() - 1) < 1e-8
    assert law.pmf[0] == pytest.approx(1 / (1 + beta), abs=1e-12)
    assert law.pmf[1] == 0.0
    assert law.pmf[2] == pytest.approx(beta / 2, abs=1e-12)


@pytest.mark.parametrize("beta", BETAS)
def test_survival_consistent_with_pmf(beta):
    law = br.OffspringLaw(beta)
    surv = 1.0 - np.cumsum(law.pmf[:200])
    np.testing.assert_allclose(law.survival[:200], surv, atol=1e-13)


def test_offspring_sampler_criticality_and_p1():
    rng = np.random.default_rng(21)
    law = br.OffspringLaw(0.5)
    k = law.sample(rng, 1_000_000)
    assert np.all(k != 1)
    assert abs(k.mean() - 1) < 3 * k.std(ddof=1) / math.sqrt(k.size)
    assert np.mean(k == 0) == pytest.approx(2 / 3, abs=3 * math.sqrt(2 / 9 / k.size))


def test_offspring_tail_slope():
    rng = np.random.default_rng(22)
    law = br.OffspringLaw(0.5)
    k = law.sample(rng, 1_000_000)
    K = np.geomspace(10, 1000, 12)
    freq = np.array([np.mean(k > x) for x in K])
    slope = np.polyfit(np.log(K), np.log(freq), 1)[0]
    assert abs(slope + 1.5) < 0.15


def test_offspring_far_tail_beyond_cache():
    # with a tiny cache the sampler must fall back to the analytic power-law tail
    rng = np.random.default_rng(23)
    small = br.OffspringLaw(0.5, cache_size=64)
    full = br.OffspringLaw(0.5)
    k = small.sample(rng, 400_000)
    for x in (100, 400):
        exact = full.survival[x]
        assert np.mean(k > x) == pytest.approx(exact, abs=4 * math.sqrt(exact / k.size))


def test_offspring_law_rejects_bad_beta():
    with pytest.raises(DomainError):
        br.OffspringLaw(1.0)


# ---------------------------------------------------------------------------
# initial state and warm-up


def spec5(L=4.0, V=1.0, h=1.0, **kw):
    return br.SystemSpec(MotionSpec(2.0, 5), br.OffspringLaw(0.5), V, br.Domain(L, 5), time_step=h, **kw)


def test_poisson_empty_domain():
    p = br.init_poisson(br.Domain(0.0, 3), np.random.default_rng(0))
    assert p.count == 0


def test_poisson_count_law_and_thinning():
    dom = br.Domain(3.0, 2)
    counts, sub = [], []
    for i in range(2000):
        p = br.init_poisson(dom, br.replica_rng(5, i))
        counts.append(p.count)
        sub.append(np.sum(np.all(p.positions < 1.5, axis=1)))
    counts, sub = np.array(counts), np.array(sub)
    se = math.sqrt(9 / counts.size)
    assert abs(counts.mean() - 9) < 4 * se
    assert counts.var(ddof=1) / counts.mean() == pytest.approx(1, abs=0.15)
    assert abs(sub.mean() - 2.25) < 4 * math.sqrt(2.25 / sub.size)
    assert sub.var(ddof=1) / sub.mean() == pytest.approx(1, abs=0.15)


def test_warmup_zero_returns_input():
    spec = spec5()
    p = br.init_poisson(spec.domain, np.random.default_rng(1))
    assert br.warmup_to_equilibrium(spec, p, 0.0, np.random.default_rng(2)) is p


def test_warmup_requires_equilibrium_regime():
    spec = br.SystemSpec(MotionSpec(2.0, 3), br.OffspringLaw(0.5), 1.0, br.Domain(4.0, 3))
    p = br.init_poisson(spec.domain, np.random.default_rng(1))
    with pytest.raises(DomainError):
        br.warmup_to_equilibrium(spec, p, 1.0, np.random.default_rng(2))


def test_warmup_preserves_intensity_and_overdisperses():
    spec = spec5()
    ratios = []
    for tau in (0.0, 2.0, 8.0):
        sub, tot = [], []
        for i in range(300):
            rng = br.replica_rng(1, i)
            p = br.warmup_to_equilibrium(spec, br.init_poisson(spec.domain, rng), tau, rng)
            tot.append(p.count)
            sub.append(np.sum(np.all(p.positions < 2.0, axis=1)))
        sub, tot = np.array(sub), np.array(tot)
        assert abs(tot.mean() - spec.domain.volume) < 3 * tot.std(ddof=1) / math.sqrt(tot.size) + 1e-9
        ratios.append(sub.var(ddof=1) / sub.mean())
    assert ratios[0] == pytest.approx(1, abs=0.3)
    assert 1 < ratios[1] < ratios[2]


# ---------------------------------------------------------------------------
# occupation dynamics


def test_zero_test_function_gives_zero_trajectory():
    spec = spec5()
    rng = np.random.default_rng(3)
    p = br.init_poisson(spec.domain, rng)
    tr = br.simulate_occupation(spec, p, 3.0, [Zero(np.full(5, 2.0))], rng)
    assert np.all(tr.pairings == 0) and np.all(tr.occupation == 0)
    np.testing.assert_array_equal(tr.times, [0, 1, 2, 3])


def test_step_grid_handles_fractional_horizon():
    np.testing.assert_allclose(br._step_grid(2.5, 1.0), [0, 1, 2, 2.5])


def run_means(spec, phi, horizon, replicas, seed=0, warm=0.0):
    vals, occs = [], []
    for i in range(replicas):
        rng = br.replica_rng(seed, i)
        p = br.init_poisson(spec.domain, rng)
        if warm:
            p = br.warmup_to_equilibrium(spec, p, warm, rng)
        tr = br.simulate_occupation(spec, p, horizon, [phi], rng, replica=i)
        vals.append(tr.pairings[0])
        occs.append(tr.occupation[0, -1])
    return np.array(vals), np.array(occs)


def test_free_motion_preserves_mean_pairing():
    # V = 0: E <N_t, phi> = int T_t phi = int phi
    spec = br.SystemSpec(MotionSpec(1.5, 1), br.OffspringLaw(0.5), 0.0, br.Domain(20.0, 1))
    phi = GaussianBump(np.array([10.0]), 1.0)
    vals, _ = run_means(spec, phi, 4.0, 400)
    se = vals.std(axis=0, ddof=1) / math.sqrt(vals.shape[0])
    assert np.all(np.abs(vals.mean(axis=0) - phi.integral()) < 3 * se)


def test_criticality_desk_scale():
    spec = spec5(L=4.0)
    phi = GaussianBump(np.full(5, 2.0), 1.0)
    vals, _ = run_means(spec, phi, 4.0, 300, seed=1, warm=2.0)
    se = vals.std(axis=0, ddof=1) / math.sqrt(vals.shape[0])
    assert np.all(np.abs(vals.mean(axis=0) - phi.torus_integral(4.0)) < 3 * se)


def test_time_step_insensitivity():
    phi = SmoothBump(np.full(5, 2.0), 1.0)
    _, occ1 = run_means(spec5(h=1.0), phi, 4.0, 300, seed=2)
    _, occ2 = run_means(spec5(h=0.5), phi, 4.0, 300, seed=3)
    se = math.hypot(occ1.std(ddof=1), occ2.std(ddof=1)) / math.sqrt(300)
    assert abs(occ1.mean() - occ2.mean()) < 3 * se
    # both unbiased for T int phi
    for occ in (occ1, occ2):
        assert abs(occ.mean() - 4.0 * phi.integral()) < 3 * occ.std(ddof=1) / math.sqrt(occ.size)


def test_torus_wrap_charfn_on_dual_lattice():
    L, t, alpha = 2.0, 0.5, 1.5
    spec = br.SystemSpec(MotionSpec(alpha, 1), br.OffspringLaw(0.5), 0.0, br.Domain(L, 1), time_step=t)
    n = 40_000
    start = br.ParticleSet(np.zeros((n, 1)), spec.domain)
    tr = br.simulate_occupation(spec, start, t, [], np.random.default_rng(4))
    x = tr.final.positions[:, 0]
    assert np.all((x >= 0) & (x < L))
    for m in (1, 2):
        k = 2 * math.pi * m / L
        emp = np.mean(np.exp(1j * k * x))
        assert abs(emp - math.exp(-t * k**alpha)) < 4 / math.sqrt(n)


def test_resource_error_carries_partial_trajectory():
    spec = spec5(max_particles=1100)
    rng = np.random.default_rng(5)
    p = br.init_poisson(spec.domain, rng)
    phi = GaussianBump(np.full(5, 2.0), 1.0)
    with pytest.raises(ResourceError) as info:
        br.simulate_occupation(spec, p, 500.0, [phi], rng)
    part = info.value.partial
    assert isinstance(part, br.Trajectory) and not part.complete
    assert part.times.size == part.pairings.shape[1] >= 1


def test_replica_streams_are_counter_based():
    a = br.replica_rng(99, 3).standard_normal(4)
    b = br.replica_rng(99, 3).standard_normal(4)
    c = br.replica_rng(99, 4).standard_normal(4)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)


def test_trajectory_reproducible_and_csv(tmp_path):
    spec = spec5()
    phi = GaussianBump(np.full(5, 2.0), 1.0)
    trs = []
    for _ in range(2):
        rng = br.replica_rng(7, 0)
        trs.append(br.simulate_occupation(spec, br.init_poisson(spec.domain, rng), 2.0, [phi], rng))
    np.testing.assert_array_equal(trs[0].occupation, trs[1].occupation)
    path = tmp_path / "traj.csv"
    br.write_trajectory_csv(path, trs[:1], ["phi0"], comment="config_hash=abc")
    lines = path.read_text().splitlines()
    assert lines[0] == "# config_hash=abc"
    rows = list(csv.reader(lines[1:]))
    assert tuple(rows[0]) == br.TRAJECTORY_COLUMNS
    assert len(rows) == 1 + 3
    assert float(rows[-1][4]) == trs[0].occupation[0, -1]   # 17 digits round-trip


def test_torus_integral_of_truncated_gaussian():
    # minimum-image Gaussian on a side-4 torus: (sqrt(2 pi) erf(sqrt 2))^5
    phi = GaussianBump(np.full(5, 2.0), 1.0)
    ref = (math.sqrt(2 * math.pi) * math.erf(math.sqrt(2))) ** 5
    assert phi.torus_integral(4.0) == pytest.approx(ref, rel=1e-14)
    rng = np.random.default_rng(6)
    x = rng.uniform(0, 4.0, size=(400_000, 5))
    mc = phi.on_torus(x, 4.0)
    assert abs(4.0**5 * mc.mean() - ref) < 4 * 4.0**5 * mc.std() / math.sqrt(mc.size)


@given(st.floats(0.01, 0.99))
def test_offspring_pmf_is_a_distribution(beta):
    law = br.OffspringLaw(beta, cache_size=4096)
    assert np.all(law.pmf >= 0)
    assert law.mass_with_tail() == pytest.approx(1.0, abs=1e-10)
