"""Rescaled occupation-time fluctuations and dimension regimes."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .branching import Trajectory
from .errors import DomainError, RegimeError
from .testfunctions import RadialFunction

__all__ = [
    "INTERMEDIATE",
    "CRITICAL",
    "LARGE",
    "classify_regime",
    "critical_dimension",
    "RegimePlan",
    "normalization",
    "FluctuationSample",
    "build_fluctuation",
    "increments",
    "write_fluctuation_csv",
    "fluctuation_summary",
    "FLUCTUATION_COLUMNS",
    "regime_table",
    "dump_summary",
]

INTERMEDIATE = "intermediate"
CRITICAL = "critical"
LARGE = "large"

DEFAULT_GRID = 64


def critical_dimension(alpha: float, beta: float) -> float:
    """alpha (1 + beta) / beta."""
    return alpha * (1.0 + beta) / beta


def classify_regime(d: float, alpha: float, beta: float) -> str:
    """Classify d against alpha/beta and alpha(1+beta)/beta.

    Raises ``RegimeError`` when d <= alpha/beta, where no equilibrium exists.
    The comparison with the critical dimension is exact (no tolerance), so
    callers passing real d get a sharp boundary.
    """
    if not 0.0 < alpha <= 2.0:
        raise DomainError(f"alpha must lie in (0, 2], got {alpha}")
    if not 0.0 < beta < 1.0:
        raise DomainError(f"beta must lie in (0, 1), got {beta}")
    if not d * beta > alpha:
        raise RegimeError(f"d = {d} <= alpha/beta = {alpha / beta}: no equilibrium")
    # d beta vs alpha (1 + beta) avoids a rounding division
    lhs, rhs = d * beta, alpha * (1.0 + beta)
    if lhs < rhs:
        return INTERMEDIATE
    if lhs == rhs:
        return CRITICAL
    return LARGE


@dataclass(frozen=True)
class RegimePlan:
    """Model parameters, scaling horizon and the derived normalization."""

    d: float
    alpha: float
    beta: float
    V: float
    T: float
    regime: str = field(init=False)
    F_T: float = field(init=False)

    def __post_init__(self):
        regime = classify_regime(self.d, self.alpha, self.beta)
        object.__setattr__(self, "regime", regime)
        object.__setattr__(self, "F_T", normalization(self))

    @property
    def q(self) -> float:
        return 1.0 + self.beta

    def as_dict(self) -> dict:
        return {"d": self.d, "alpha": self.alpha, "beta": self.beta, "V": self.V,
                "T": self.T, "regime": self.regime, "F_T": self.F_T}


def _regime_of(plan) -> str:
    return getattr(plan, "regime", None) or classify_regime(plan.d, plan.alpha, plan.beta)


def normalization(plan) -> float:
    """F_T for the plan's regime.

    intermediate: T^((2 + beta - d beta/alpha)/(1+beta)); critical:
    (T log T)^(1/(1+beta)); large: T^(1/(1+beta)).
    """
    d, a, b, T = plan.d, plan.alpha, plan.beta, plan.T
    if not T > 0:
        raise DomainError("T must be positive")
    regime = _regime_of(plan)
    q = 1.0 + b
    if regime == INTERMEDIATE:
        return T ** ((2.0 + b - d * b / a) / q)
    if regime == CRITICAL:
        if not T > 1:
            raise DomainError("critical normalization needs T > 1")
        return (T * math.log(T)) ** (1.0 / q)
    return T ** (1.0 / q)


@dataclass
class FluctuationSample:
    """Values of <X_T(t), phi_j> on a grid of t in [0, 1].

    ``values[j, i]`` belongs to test function j at ``t[i]``.
    """

    t: np.ndarray
    values: np.ndarray
    plan: RegimePlan
    seed: int | None = None
    replica: int = 0
    phi_ids: tuple = ()

    def at(self, tq) -> np.ndarray:
        """Linear interpolation in t for every test function."""
        tq = np.atleast_1d(np.asarray(tq, dtype=float))
        return np.stack([np.interp(tq, self.t, v) for v in self.values])


def build_fluctuation(traj: Trajectory, plan: RegimePlan, phis: Sequence[RadialFunction],
                      grid: int | np.ndarray = DEFAULT_GRID, seed=None,
                      phi_ids: Sequence[str] | None = None) -> FluctuationSample:
    """<X_T(t), phi> = (occ_phi(T t) - T t int phi) / F_T on a t-grid.

    The occupation integral is interpolated linearly between step times,
    consistent with the trapezoidal accumulation.  On a torus the centering
    uses the torus integral of phi.
    """
    t = np.linspace(0.0, 1.0, grid) if np.isscalar(grid) else np.asarray(grid, float)
    if t.min() < 0 or t.max() > 1:
        raise DomainError("t-grid must lie in [0, 1]")
    if traj.times[-1] < plan.T * t.max() * (1 - 1e-12):
        raise DomainError(f"trajectory horizon {traj.times[-1]} shorter than T = {plan.T}")
    phis = list(phis)
    values = np.empty((len(phis), t.size))
    dom = traj.final.domain
    for j, phi in enumerate(phis):
        mass = phi.torus_integral(dom.side) if dom.torus else phi.integral()
        occ = np.interp(plan.T * t, traj.times, traj.occupation[j])
        values[j] = (occ - plan.T * t * mass) / plan.F_T
    values[:, t == 0.0] = 0.0
    ids = tuple(phi_ids) if phi_ids is not None else tuple(f"phi{j}" for j in range(len(phis)))
    return FluctuationSample(t, values, plan, seed, traj.replica, ids)


def increments(sample: FluctuationSample, pairs: Sequence[tuple[float, float]]) -> np.ndarray:
    """X(v) - X(u) for each pair (u, v); shape (n_phi, n_pairs)."""
    pairs = np.asarray(pairs, dtype=float).reshape(-1, 2)
    if pairs.size and (pairs.min() < 0 or pairs.max() > 1):
        raise DomainError("increment times must lie in [0, 1]")
    return sample.at(pairs[:, 1]) - sample.at(pairs[:, 0])


FLUCTUATION_COLUMNS = ("replica", "t", "phi_id", "X_value", "regime", "F_T")


def write_fluctuation_csv(path, samples: Sequence[FluctuationSample], comment: str | None = None):
    """CSV with columns (replica, t, phi_id, X_value, regime, F_T); optional ``# comment`` first line."""
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FLUCTUATION_COLUMNS)
        for s in samples:
            for j, name in enumerate(s.phi_ids):
                for t, x in zip(s.t, s.values[j]):
                    w.writerow([s.replica, f"{t:.17g}", name, f"{x:.17g}",
                                s.plan.regime, f"{s.plan.F_T:.17g}"])


def fluctuation_summary(samples: Sequence[FluctuationSample], plan: RegimePlan,
                        quantiles=(0.05, 0.25, 0.5, 0.75, 0.95)) -> dict:
    """Parameter block plus moment and quantile table of X_T(1) per test function."""
    out = {"parameters": plan.as_dict(), "replicas": len(samples), "table": []}
    if not samples:
        return out
    for j, name in enumerate(samples[0].phi_ids):
        x = np.array([s.values[j, -1] for s in samples])
        row = {"phi_id": name, "mean": float(x.mean()),
               "se": float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else None,
               "median_abs": float(np.median(np.abs(x)))}
        row.update({f"q{p:g}": float(np.quantile(x, p)) for p in quantiles})
        out["table"].append(row)
    return out


def dump_summary(path, summary: dict):
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# regime table (equilibrium start)

_TABLE = {
    INTERMEDIATE: {"process": "K eta lambda", "family": "frac-SM",
                   "convergence": ("functional",),
                   "F_T": "T^((2+beta-d*beta/alpha)/(1+beta))"},
    CRITICAL: {"process": "K lambda xi", "family": "SM",
               "convergence": ("finite-dimensional", "space-time"),
               "F_T": "(T*log(T))^(1/(1+beta))"},
    LARGE: {"process": "X", "family": "S'-SM",
            "convergence": ("finite-dimensional", "space-time"),
            "F_T": "T^(1/(1+beta))"},
}


def _eval_formula(expr: str, d, alpha, beta, T) -> float:
    env = {"T": T, "d": d, "alpha": alpha, "beta": beta, "log": math.log}
    return float(eval(expr.replace("^", "**"), {"__builtins__": {}}, env))


def regime_table(check_params: dict | None = None) -> list[dict]:
    """Rows (regime, d-range, limit process, family, convergence, F_T) for the equilibrium start.

    Each F_T formula string is evaluated against :func:`normalization` at a
    representative parameter point of its regime, so the table cannot drift
    from the code.
    """
    points = check_params or {INTERMEDIATE: (5, 2.0, 0.5), CRITICAL: (6, 2.0, 0.5), LARGE: (7, 2.0, 0.5)}
    bounds = {INTERMEDIATE: "alpha/beta < d < alpha(1+beta)/beta",
              CRITICAL: "d = alpha(1+beta)/beta", LARGE: "d > alpha(1+beta)/beta"}
    rows = []
    for regime in (INTERMEDIATE, CRITICAL, LARGE):
        entry = _TABLE[regime]
        d, a, b = points[regime]
        plan = RegimePlan(d, a, b, 1.0, 100.0)
        if plan.regime != regime:
            raise RegimeError(f"check point {points[regime]} is not {regime}")
        value = _eval_formula(entry["F_T"], d, a, b, 100.0)
        if not math.isclose(value, plan.F_T, rel_tol=1e-12):
            raise AssertionError(f"F_T formula for {regime} disagrees with normalization")
        rows.append({"regime": regime, "dimensions": bounds[regime], "process": entry["process"],
                     "family": entry["family"], "convergence": list(entry["convergence"]),
                     "F_T": entry["F_T"]})
    return rows
