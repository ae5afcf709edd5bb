"""Acceptance criteria as callable checks, grouped into verification suites.

Each check returns a :class:`CriterionResult`; the CLI ``verify`` command
and the acceptance tests share these functions.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import analysis, branching, fluctuations, limit_processes, stable_core
from .testfunctions import GaussianBump

__all__ = ["CriterionResult", "CRITERIA", "SUITES", "run_suite", "EXPECTED_REGIME_TABLE"]

PASS, FAIL, SOFT_FAIL = "PASS", "FAIL", "SOFT-FAIL"


@dataclass
class CriterionResult:
    number: int
    name: str
    status: str
    measured: dict = field(default_factory=dict)
    tolerance: str = ""
    runtime: float = 0.0
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def line(self) -> str:
        vals = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        extra = f" [{self.note}]" if self.note else ""
        return f"criterion {self.number:2d} {self.status:9s} {self.name}: {vals} (tol: {self.tolerance}; {self.runtime:.1f}s){extra}"

    def as_dict(self) -> dict:
        return asdict(self)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.runtime = time.perf_counter() - t0
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _budget(res: CriterionResult, limit: float) -> CriterionResult:
    if res.runtime > limit and res.status == PASS:
        res.status = FAIL
        res.note = (res.note + "; " if res.note else "") + f"runtime above {limit:g}s"
    return res


# ---------------------------------------------------------------------------
# 1-3: offspring law, samplers, densities


@_timed
def criterion_1(**_):
    worst = {"mass": 0.0, "mean": 0.0, "p012": 0.0}
    for b in (0.2, 0.5, 0.8):
        law = branching.OffspringLaw(b)
        worst["mass"] = max(worst["mass"], abs(law.mass_with_tail() - 1))
        worst["mean"] = max(worst["mean"], abs(law.mean_with_tail() - 1))
        err = max(abs(law.pmf[0] - 1 / (1 + b)), abs(law.pmf[1]), abs(law.pmf[2] - b / 2))
        worst["p012"] = max(worst["p012"], err)
    ok = worst["mass"] <= 1e-10 and worst["mean"] <= 1e-8 and worst["p012"] <= 1e-12
    return CriterionResult(1, "offspring law exactness", PASS if ok else FAIL, worst,
                           "mass 1e-10, mean 1e-8, p0..p2 1e-12")


@_timed
def criterion_2(seed: int = 2, n: int = 100_000, **_):
    rng = np.random.default_rng(seed)
    radii = np.linspace(0.1, 2.0, 10)
    dirs = rng.standard_normal((10, 3))
    zvec = radii[:, None] * dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    worst = 0.0
    for alpha in (0.8, 1.0, 1.5, 2.0):
        m = stable_core.MotionSpec(alpha, 3)
        x = stable_core.sample_isotropic_increment(m, 1.0, rng, n)
        emp = np.mean(np.exp(1j * (x @ zvec.T)), axis=0)
        worst = max(worst, float(np.max(np.abs(emp - np.exp(-radii**alpha)))) * math.sqrt(n))
    ok = worst <= 4.0
    return CriterionResult(2, "stable sampler fidelity", PASS if ok else FAIL,
                           {"max_dev_sqrt_n": worst, "n": n}, "4/sqrt(n)")


@_timed
def criterion_3(**_):
    errs = {}
    grid_t = (0.3, 1.0, 2.5)
    grid_r = (0.0, 0.4, 1.0, 2.0, 4.0)
    for alpha, d in ((1.0, 3), (2.0, 3), (1.0, 5), (2.0, 5), (1.5, 5)):
        m = stable_core.MotionSpec(alpha, d)
        worst = 0.0
        for t in grid_t:
            for r in grid_r:
                lhs = stable_core.transition_density(m, t, r)
                rhs = t ** (-d / alpha) * stable_core.transition_density(m, 1.0, r * t ** (-1 / alpha))
                worst = max(worst, abs(lhs - rhs) / rhs)
        errs[f"a{alpha:g}_d{d}"] = worst
    closed = max(v for k, v in errs.items() if not k.startswith("a1.5"))
    ok = closed <= 1e-8 and errs["a1.5_d5"] <= 1e-3
    return CriterionResult(3, "density scaling identity", PASS if ok else FAIL,
                           {"closed_form": closed, "numeric_a1.5_d5": errs["a1.5_d5"]},
                           "1e-8 closed form, 1e-3 numeric")


# ---------------------------------------------------------------------------
# 4 and 10: large-system runs, gated by a measured runtime projection

E2E = dict(d=5, alpha=2.0, beta=0.5, V=1.0, L=20.0)


def _e2e_spec(L=E2E["L"], h=1.0):
    motion = stable_core.MotionSpec(E2E["alpha"], E2E["d"])
    return branching.SystemSpec(motion, branching.OffspringLaw(E2E["beta"]), E2E["V"],
                                branching.Domain(L, E2E["d"]), time_step=h)


def _e2e_phi(L=E2E["L"]):
    return GaussianBump(np.full(E2E["d"], L / 2), width=1.0)


def project_runtime(spec, phis, steps_per_replica: float, replicas: int, slice_steps: int = 2,
                    seed: int = 0) -> dict:
    """Time a short slice of the real configuration and extrapolate."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    particles = branching.init_poisson(spec.domain, rng)
    t_init = time.perf_counter() - t0
    occ = np.zeros(len(phis))
    x = particles.positions
    t0 = time.perf_counter()
    for _ in range(slice_steps):
        x = branching._step(spec, x, spec.time_step, rng, list(phis), occ)
    per_step = (time.perf_counter() - t0) / slice_steps
    total = replicas * (t_init + steps_per_replica * per_step)
    return {"particles": int(particles.count), "seconds_per_step": per_step,
            "projected_seconds": total}


def _criticality_run(spec, phi, tau_w, replicas, seed, times_factor=(0.5, 1.0, 2.0)):
    checkpoints = np.array(times_factor) * tau_w
    vals = np.empty((replicas, len(checkpoints)))
    for i in range(replicas):
        rng = branching.replica_rng(seed, i)
        p = branching.warmup_to_equilibrium(spec, branching.init_poisson(spec.domain, rng), tau_w, rng)
        tr = branching.simulate_occupation(spec, p, checkpoints[-1], [phi], rng, replica=i)
        vals[i] = np.interp(checkpoints, tr.times, tr.pairings[0])
    mean = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / math.sqrt(replicas)
    target = phi.torus_integral(spec.domain.side)
    return {"checkpoints": checkpoints.tolist(), "mean": mean.tolist(), "se": se.tolist(),
            "target": target, "z_scores": ((mean - target) / se).tolist()}


@_timed
def criterion_4(replicas: int = 2000, budget: float = 600.0, seed: int = 4, L: float = E2E["L"], **_):
    spec = _e2e_spec(L)
    phi = _e2e_phi(L)
    tau_w = branching.default_warmup(spec)
    proj = project_runtime(spec, [phi], steps_per_replica=tau_w + 2 * tau_w, replicas=replicas)
    measured = {"L": L, "replicas": replicas, "tau_w": tau_w,
                "projected_seconds": proj["projected_seconds"], "particles": proj["particles"]}
    if proj["projected_seconds"] > budget:
        return CriterionResult(4, "criticality conservation", FAIL, measured,
                               f"3 se, runtime < {budget:g}s",
                               note="projected runtime exceeds budget; full run not attempted")
    out = _criticality_run(spec, phi, tau_w, replicas, seed)
    measured.update({"max_abs_z": float(np.max(np.abs(out["z_scores"])))})
    ok = measured["max_abs_z"] <= 3.0
    return _budget(CriterionResult(4, "criticality conservation", PASS if ok else FAIL, measured,
                                   f"3 se, runtime < {budget:g}s"), budget)


def _eta_marginal_charfn(z, K, mass):
    proc = limit_processes.LimitProcess(E2E["d"], E2E["alpha"], E2E["beta"], "eta")
    return np.array([proc.charfn([1.0], [K * mass * zz]) for zz in np.atleast_1d(z)])


def _fluctuation_run(spec, phi, tau_w, T_list, replicas, seed):
    plan_max = max(T_list)
    out = {T: np.empty(replicas) for T in T_list}
    for i in range(replicas):
        rng = branching.replica_rng(seed, i)
        p = branching.warmup_to_equilibrium(spec, branching.init_poisson(spec.domain, rng), tau_w, rng)
        tr = branching.simulate_occupation(spec, p, plan_max, [phi], rng, replica=i)
        for T in T_list:
            plan = fluctuations.RegimePlan(E2E["d"], E2E["alpha"], E2E["beta"], E2E["V"], T)
            out[T][i] = fluctuations.build_fluctuation(tr, plan, [phi], grid=np.array([0.0, 1.0])).values[0, -1]
    return out


@_timed
def criterion_10(replicas: int = 2000, budget: float = 7200.0, seed: int = 10, L: float = E2E["L"],
                 T_list=(50.0, 200.0), **_):
    spec = _e2e_spec(L)
    phi = _e2e_phi(L)
    tau_w = branching.default_warmup(spec)
    proj = project_runtime(spec, [phi], steps_per_replica=tau_w + max(T_list), replicas=replicas)
    measured = {"L": L, "replicas": replicas, "projected_seconds": proj["projected_seconds"]}
    if proj["projected_seconds"] > budget:
        return CriterionResult(10, "end-to-end intermediate regime (soft)", SOFT_FAIL, measured,
                               f"distance decreasing and < 0.15, runtime < {budget:g}s",
                               note="projected runtime exceeds budget; full run and bias diagnostics not attempted")
    K = limit_processes.theorem_constants(fluctuations.INTERMEDIATE, E2E["d"], E2E["alpha"],
                                          E2E["beta"], E2E["V"]).value
    runs = _fluctuation_run(spec, phi, tau_w, T_list, replicas, seed)
    z = np.linspace(0.1, 3.0, 15)
    dist = [analysis.compare_distributions(runs[T], lambda zz: _eta_marginal_charfn(zz, K, phi.integral()), z)
            ["sup_distance"] for T in T_list]
    measured["distances"] = dist
    ok = dist[-1] < dist[0] and dist[-1] < 0.15
    res = CriterionResult(10, "end-to-end intermediate regime (soft)", PASS if ok else SOFT_FAIL, measured,
                          f"distance decreasing and < 0.15, runtime < {budget:g}s")
    if res.runtime > budget:
        res.status = SOFT_FAIL
    return res


# ---------------------------------------------------------------------------
# 5-9: limit processes


def _eta(mode="eta"):
    return limit_processes.LimitProcess(5, 2.0, 0.5, mode)


@_timed
def criterion_5(n: int = 10_000, seed: int = 5, nominal: int = 10_000, **_):
    proc = _eta()
    H = proc.H
    rel = 0.0
    for z in (0.5, 1.0, 2.0):
        a = proc.charfn([1.0], [z])
        b = proc.charfn([0.5], [2**H * z])
        rel = max(rel, abs(a - b) / abs(a))
    rng = np.random.default_rng(seed)
    times = [0.25, 0.5, 1.0]
    paths = limit_processes.eta_path(times, 5, 2.0, 0.5, "eta", rng, size=n)
    est = analysis.estimate_selfsim_H(paths, times)
    tol = 0.05 * max(1.0, math.sqrt(nominal / n))
    ok_a, ok_m = rel <= 1e-3, abs(est.estimate - H) <= tol
    status = PASS if ok_a and ok_m else (SOFT_FAIL if ok_a and n < nominal else FAIL)
    return _budget(CriterionResult(5, "self-similarity", status,
                                   {"H": H, "analytic_rel_err": rel, "H_hat": est.estimate, "n": n},
                                   f"rel 1e-3; |H_hat - H| <= {tol:.3g}",
                                   note="widened band (reduced replicas)" if n < nominal else ""), 600)


@_timed
def criterion_6(**_):
    proc = _eta()
    vals = [proc.increment_exponent(t, t + 0.3, 1.0) for t in (0.0, 0.2, 0.5)]
    phis = [np.exp(-v) for v in vals]
    spread = max(abs(a - phis[0]) for a in phis[1:])
    return CriterionResult(6, "stationary increments", PASS if spread <= 1e-3 else FAIL,
                           {"max_charfn_spread": spread}, "1e-3")


KAPPA_QUERY = dict(z1=1.0, z2=1.0, u=0.0, v=1.0, s=2.0, t=3.0)


def dependence_fit(mode: str, T_grid=None):
    T_grid = tuple(np.geomspace(10.0, 1e3, 9)) if T_grid is None else tuple(T_grid)
    q = analysis.DependenceQuery(T_grid=T_grid, **KAPPA_QUERY)
    D = analysis.dependence_DT(q, _eta(mode))
    slope, _, r2 = analysis.power_law_fit(T_grid, D)
    return -slope, r2, D


@_timed
def criterion_7(**_):
    measured, ok = {}, True
    for mode in ("eta2", "eta"):
        kappa, r2, _ = dependence_fit(mode)
        measured[f"kappa_{mode}"] = kappa
        measured[f"R2_{mode}"] = r2
        ok &= 1.4 <= kappa <= 1.6 and r2 > 0.99
    res = CriterionResult(7, "dependence exponent", PASS if ok else FAIL, measured,
                          "kappa in [1.4, 1.6] (target d/alpha - 1), R2 > 0.99")
    if not ok:
        res.note = "quadrature gives d*beta/alpha - 1 = 0.25; see decisions ledger"
    return _budget(res, 300)


@_timed
def criterion_8(n: int = 10_000, seed: int = 8, nominal: int = 10_000, **_):
    rng = np.random.default_rng(seed)
    eta1 = limit_processes.eta_path([1.0], 5, 2.0, 0.5, "eta", rng, size=n)[:, 0]
    xi1 = limit_processes.xi_sample([1.0], 0.5, rng, size=n)[:, 0]
    a = analysis.estimate_stability_index(eta1).estimate
    b = analysis.estimate_stability_index(xi1).estimate
    tol = 0.15 * max(1.0, math.sqrt(nominal / n))
    ok = abs(a - 1.5) <= tol and abs(b - 1.5) <= tol
    status = PASS if ok else (SOFT_FAIL if n < nominal else FAIL)
    return CriterionResult(8, "marginal stability of limits", status,
                           {"index_eta_1": a, "index_xi_1": b, "n": n}, f"+-{tol:.3g} of 1.5",
                           note="widened band (reduced replicas)" if n < nominal else "")


@_timed
def criterion_9(n: int = 20_000, seed: int = 9, nominal: int = 20_000, **_):
    beta = 0.5
    u, v, s, t = 0.0, 0.4, 0.7, 1.5
    exact = 0.0
    for z1, z2 in ((1.0, 1.0), (0.5, -2.0), (-1.5, 0.7)):
        joint = limit_processes.xi_joint_charfn([u, v, s, t], [-z1, z1, -z2, z2], beta)
        prod = limit_processes.xi_charfn(v - u, z1, beta) * limit_processes.xi_charfn(t - s, z2, beta)
        exact = max(exact, abs(joint - prod))
    rng = np.random.default_rng(seed)
    paths = limit_processes.xi_sample([u, v, s, t], beta, rng, size=n)
    inc1, inc2 = paths[:, 1] - paths[:, 0], paths[:, 3] - paths[:, 2]
    worst = 0.0
    for z1, z2 in ((1.0, 1.0), (0.5, -2.0), (-1.5, 0.7)):
        e = np.exp(1j * (z1 * inc1 + z2 * inc2))
        emp = e.mean()
        se = math.sqrt(np.var(e.real, ddof=1) + np.var(e.imag, ddof=1)) / math.sqrt(n)
        prod = limit_processes.xi_charfn(v - u, z1, beta) * limit_processes.xi_charfn(t - s, z2, beta)
        worst = max(worst, abs(emp - prod) / se)
    ok = exact <= 1e-14 and worst <= 4.0
    status = PASS if ok else (SOFT_FAIL if exact <= 1e-14 and n < nominal else FAIL)
    return CriterionResult(9, "xi independent increments", status,
                           {"analytic_gap": exact, "sampled_dev_in_se": worst, "n": n},
                           "analytic 1e-14; sampled within 4 se")


EXPECTED_REGIME_TABLE = [
    {"regime": "intermediate", "family": "frac-SM", "convergence": ["functional"],
     "F_T": "T^((2+beta-d*beta/alpha)/(1+beta))"},
    {"regime": "critical", "family": "SM", "convergence": ["finite-dimensional", "space-time"],
     "F_T": "(T*log(T))^(1/(1+beta))"},
    {"regime": "large", "family": "S'-SM", "convergence": ["finite-dimensional", "space-time"],
     "F_T": "T^(1/(1+beta))"},
]


@_timed
def criterion_11(**_):
    table = fluctuations.regime_table()
    got = [{k: row[k] for k in ("regime", "family", "convergence", "F_T")} for row in table]
    ok = got == EXPECTED_REGIME_TABLE
    return CriterionResult(11, "regime table", PASS if ok else FAIL, {"rows": len(table)},
                           "exact match", note="" if ok else f"got {got}")


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
            6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10,
            11: criterion_11}

SUITES = {
    "unit": (1, 2, 3),
    "analytic": (6, 7, 11),
    "statistical": (5, 8, 9),
    "end2end": (4, 10, 11),
}


def run_suite(name: str, replicas_factor: float = 1.0, echo=None) -> dict:
    """Run one suite; ``replicas_factor`` < 1 shrinks Monte Carlo sizes and widens bands."""
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    results = []
    for number in SUITES[name]:
        kwargs = {}
        if number == 5:
            kwargs["n"] = max(1000, int(10_000 * replicas_factor))
        elif number == 8:
            kwargs["n"] = max(1000, int(10_000 * replicas_factor))
        elif number == 9:
            kwargs["n"] = max(1000, int(20_000 * replicas_factor))
        res = CRITERIA[number](**kwargs)
        if echo:
            echo(res.line())
        results.append(res)
    out = {"suite": name, "criteria": [r.as_dict() for r in results],
           "all_passed": all(r.passed for r in results)}
    if name == "end2end":
        out["regime_table"] = fluctuations.regime_table()
    return out
