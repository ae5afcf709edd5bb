"""Estimators and verification statistics for stable samples and processes."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .errors import DomainError, EstimationError, NumericError

__all__ = [
    "CharFnEstimate",
    "empirical_charfn",
    "IndexEstimate",
    "estimate_stability_index",
    "estimate_selfsim_H",
    "DependenceQuery",
    "dependence_DT",
    "power_law_fit",
    "compare_distributions",
    "estimator_report",
    "inputs_hash",
]


@dataclass
class CharFnEstimate:
    """Empirical char function on a z-grid with jackknife standard errors."""

    z: np.ndarray
    value: np.ndarray
    se: np.ndarray

    def band(self, k: float = 3.0) -> np.ndarray:
        return k * self.se


def empirical_charfn(samples, z) -> CharFnEstimate:
    """Mean of exp(i z X) with a jackknife standard error per grid point.

    For a sample mean the jackknife variance reduces to s^2/n with the
    unbiased sample variance of exp(i z X) (real and imaginary parts pooled).
    """
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    if n < 2:
        raise EstimationError("need at least two samples")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    e = np.exp(1j * np.outer(z, x))
    value = e.mean(axis=1)
    value[z == 0] = 1.0
    loo = (n * value[:, None] - e) / (n - 1)
    var = (n - 1) / n * np.sum(np.abs(loo - loo.mean(axis=1, keepdims=True)) ** 2, axis=1)
    return CharFnEstimate(z, value, np.sqrt(var))


@dataclass
class IndexEstimate:
    estimate: float
    band: float
    window: tuple
    points: int

    def __float__(self):
        return self.estimate


def estimate_stability_index(samples, lo: float = 0.2, hi: float = 0.8, grid: int = 200) -> IndexEstimate:
    """Slope of log(-log |phi_hat(z)|) against log z over the window lo <= |phi_hat| <= hi.

    The z-grid is scaled by the interquartile range, so the estimate is
    invariant under x -> c x.  ``band`` is twice the regression standard error.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 1000:
        raise EstimationError("stability-index estimation needs n >= 1000")
    iqr = np.subtract(*np.percentile(x, [75, 25]))
    if not iqr > 0:
        raise EstimationError("degenerate sample (zero interquartile range)")
    z = np.geomspace(1e-3, 1e2, grid) / iqr
    mod = np.abs(empirical_charfn(x, z).value)
    keep = (mod >= lo) & (mod <= hi)
    if keep.sum() < 3:
        raise EstimationError("char-function window contains fewer than 3 grid points")
    fit = stats.linregress(np.log(z[keep]), np.log(-np.log(mod[keep])))
    return IndexEstimate(float(fit.slope), float(2 * fit.stderr), (lo, hi), int(keep.sum()))


def estimate_selfsim_H(paths, times, pairs: Sequence[tuple[float, float]] | None = None,
                       probs=(0.6, 0.75, 0.9), n_boot: int = 200, seed: int = 0):
    """Self-similarity exponent from quantile ratios of |X_{ct}| and |X_t|.

    For every pair (t, ct) and probability p, log q_{ct}(p) - log q_t(p) = H log c;
    H is the least-squares slope through the origin.  The band is twice the
    bootstrap standard deviation over replicas.
    """
    x = np.asarray(paths, dtype=float)
    times = np.asarray(times, dtype=float)
    if x.ndim != 2 or x.shape[1] != times.size:
        raise DomainError("paths must have shape (replicas, len(times))")
    if x.shape[0] < 10:
        raise EstimationError("self-similarity estimation needs at least 10 replicas")
    if pairs is None:
        pos = [t for t in times if t > 0]
        pairs = [(a, b) for i, a in enumerate(pos) for b in pos[i + 1:]]
    idx = {float(t): i for i, t in enumerate(times)}
    cols = [(idx[float(a)], idx[float(b)], math.log(b / a)) for a, b in pairs]
    if not cols:
        raise EstimationError("no usable time pairs")

    def fit(sample):
        q = np.quantile(np.abs(sample), probs, axis=0)
        if np.any(q <= 0):
            raise EstimationError("zero quantile; paths degenerate")
        lc = np.array([c for _, _, c in cols for _ in probs])
        lr = np.array([math.log(q[k, j] / q[k, i]) for i, j, _ in cols for k in range(len(probs))])
        return float(np.dot(lc, lr) / np.dot(lc, lc))

    est = fit(x)
    rng = np.random.default_rng(seed)
    boots = [fit(x[rng.integers(0, x.shape[0], x.shape[0])]) for _ in range(n_boot)]
    return IndexEstimate(est, float(2 * np.std(boots)), tuple(probs), len(cols))


# ---------------------------------------------------------------------------
# dependence exponent


@dataclass(frozen=True)
class DependenceQuery:
    """Increments over [u, v] and [T+s, T+t] with coefficients z1, z2."""

    z1: float
    z2: float
    u: float
    v: float
    s: float
    t: float
    T_grid: tuple = field(default=tuple(np.geomspace(10.0, 1e3, 9)))

    def __post_init__(self):
        if not 0 <= self.u < self.v < self.s < self.t:
            raise DomainError("need 0 <= u < v < s < t")
        grid = np.asarray(self.T_grid, dtype=float)
        if np.any(grid < 1) or np.any(np.diff(grid) <= 0):
            raise DomainError("T-grid must be increasing with T >= 1")


def dependence_DT(query: DependenceQuery, process, level: int = 3) -> np.ndarray:
    """D_T = |log Phi_joint - log Phi_1 - log Phi_2| on the query's T-grid.

    ``process`` supplies ``dependence_gap(u, v, s, t, T, z1, z2)``.  The gap is
    integrated pointwise (no subtraction of large exponents).  A NumericError
    is raised when |1 - Phi_joint/(Phi_1 Phi_2)| >= 1, where the principal
    logarithm would be ambiguous.
    """
    out = []
    for T in query.T_grid:
        if query.z1 == 0.0 or query.z2 == 0.0:
            out.append(0.0)
            continue
        gap = process.dependence_gap(query.u, query.v, query.s, query.t, float(T),
                                     query.z1, query.z2, level=level)
        if abs(1.0 - np.exp(gap)) >= 1.0:
            raise NumericError("branch ambiguity in D_T; increase T", {"T": float(T), "gap": gap})
        out.append(abs(gap))
    return np.array(out)


def power_law_fit(x, y):
    """Slope, intercept and R^2 of log y on log x."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    fit = stats.linregress(lx, ly)
    return float(fit.slope), float(fit.intercept), float(fit.rvalue**2)


# ---------------------------------------------------------------------------
# distribution comparison


def compare_distributions(a, b, z=None) -> dict:
    """Sup char-function distance on a z-grid plus (for two samples) the KS statistic.

    ``b`` is either a second sample or a callable returning the analytic char
    function on an array of z.
    """
    a = np.asarray(a, dtype=float).ravel()
    if z is None:
        iqr = np.subtract(*np.percentile(a, [75, 25])) or 1.0
        z = np.linspace(0.05, 3.0, 30) / iqr
    z = np.atleast_1d(np.asarray(z, dtype=float))
    ea = empirical_charfn(a, z)
    if callable(b):
        phib = np.asarray(b(z), dtype=complex)
        band = ea.band()
        ks = None
    else:
        bb = np.asarray(b, dtype=float).ravel()
        eb = empirical_charfn(bb, z)
        phib = eb.value
        band = 3.0 * np.sqrt(ea.se**2 + eb.se**2)
        res = stats.ks_2samp(a, bb)
        ks = {"statistic": float(res.statistic), "pvalue": float(res.pvalue)}
    dist = np.abs(ea.value - phib)
    k = int(np.argmax(dist))
    return {"sup_distance": float(dist[k]), "at_z": float(z[k]), "band": float(band[k]),
            "max_band": float(np.max(band)), "ks": ks, "n": int(a.size)}


# ---------------------------------------------------------------------------
# reports


def inputs_hash(*arrays) -> str:
    h = hashlib.sha256()
    for arr in arrays:
        h.update(np.ascontiguousarray(np.asarray(arr, dtype=float)).tobytes())
    return h.hexdigest()


def estimator_report(name: str, estimate: float, band: float, inputs, seed=None) -> str:
    """JSON record: estimator name, point estimate, band, inputs hash, seed."""
    return json.dumps({"estimator": name, "estimate": estimate, "band": band,
                       "inputs_hash": inputs_hash(inputs), "seed": seed}, sort_keys=True)
