"""Limit processes: eta1, eta2, eta, xi, the S'-valued stable motion, and the constants K.

Stable integrals ``int f dM`` over R^d x R_+ with a totally skewed
(1+beta)-stable measure M (Lebesgue control) are handled through

    log E exp(i int f dM) = - int int psi(f(x, r)) dx dr,
    psi(y) = |y|^q (1 - i sgn(y) tan(pi q / 2)),   q = 1 + beta.

For radial kernels dx = s_d rho^(d-1) d rho.  The double integral uses one
positive-weight cell rule (tanh-sinh in r between kernel breakpoints,
log-uniform trapezoid on the unbounded r-range, log-uniform trapezoid in
rho), so the same cell list serves as a quadrature for char functions and,
coarsened, as the discretization of M for sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import AccuracyError, DomainError, NumericError, RegimeError
from .fluctuations import CRITICAL, INTERMEDIATE, LARGE, classify_regime
from .kernels import (Kernel, combine, eta1_increment_kernel, eta1_kernel, eta2_increment_kernel,
                      eta2_kernel, time_integral)
from .stable_core import (MotionSpec, StableLawSpec, radial_potential, riesz_constant,
                          sample_skewed_stable, unit_density_fast)
from .testfunctions import RadialFunction, sphere_area

__all__ = [
    "psi",
    "delta_psi",
    "CellRule",
    "build_rule",
    "StableIntegralDisc",
    "stable_integral_exponent",
    "stable_integral_charfn",
    "stable_integral_sample",
    "LimitProcess",
    "eta_path",
    "xi_charfn",
    "xi_joint_charfn",
    "xi_sample",
    "sdsm_charfn",
    "theorem_constants",
    "critical_inner_integral",
]


def _tan(q):
    return math.tan(0.5 * math.pi * q)


def psi(y, q: float):
    """|y|^q (1 - i sgn(y) tan(pi q/2))."""
    y = np.asarray(y, dtype=float)
    return np.abs(y) ** q * (1.0 - 1j * np.sign(y) * _tan(q))


def delta_psi(a, b, q: float):
    """psi(a + b) - psi(a) - psi(b), evaluated without cancellation.

    With m = max(|a|, |b|) and r = min/max in (0, 1]: for equal signs the real
    part is m^q [(1+r)^q - 1 - r^q]; for opposite signs it is
    m^q [(1-r)^q - 1 - r^q], and the sign-dependent imaginary parts follow.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    tan = _tan(q)
    big = np.where(np.abs(a) >= np.abs(b), a, b)
    small = np.where(np.abs(a) >= np.abs(b), b, a)
    m = np.abs(big)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(m > 0, np.abs(small) / np.where(m > 0, m, 1.0), 0.0)
    rq = r**q
    sb = np.sign(big)
    same = np.sign(small) * sb >= 0
    # (1 +- r)^q - 1 via expm1/log1p
    grow = np.expm1(q * np.log1p(np.where(same, r, -np.minimum(r, 1.0 - 1e-300))))
    mq = m**q
    # psi(a+b) = |a+b|^q (1 - i sgn(a+b) tan); sgn(a+b) = sgn(big) (ties give 0 magnitude)
    re = mq * (grow - rq)
    # imaginary: -tan [sgn(big) |a+b|^q - sgn(big) m^q - sgn(small) |small|^q]
    im = -tan * mq * (sb * grow - np.where(same, sb, -sb) * rq)
    return re + 1j * im


# ---------------------------------------------------------------------------
# cell rules


def _tanh_sinh(a: float, b: float, h: float, kmax: float = 3.0):
    """Nodes, weights and distances to the endpoints for tanh-sinh on [a, b]."""
    k = np.arange(-math.ceil(kmax / h), math.ceil(kmax / h) + 1) * h
    u = 0.5 * math.pi * np.sinh(k)
    x = np.tanh(u)
    # 1 -+ tanh(u) without cancellation
    one_minus = 2.0 / (1.0 + np.exp(2.0 * u))
    one_plus = 2.0 / (1.0 + np.exp(-2.0 * u))
    w = h * 0.5 * math.pi * np.cosh(k) / np.cosh(u) ** 2
    half = 0.5 * (b - a)
    return a + half * one_plus, half * w, half * one_plus, half * one_minus


@dataclass
class CellRule:
    """Positive-weight cells over (rho, r) and the data for the r-tail correction.

    ``weight`` already includes the surface factor s_d rho^d (log-rho step).
    ``tail_rows`` marks cells of the last r-node; ``tail_factor`` is
    R / (p - 1) divided by that node's r-weight, so that
    ``sum(weight[tail_rows] * g) * tail_factor`` extrapolates the r^-p decay.
    """

    rho: np.ndarray
    r: np.ndarray
    weight: np.ndarray
    tail_rows: np.ndarray
    tail_factor: float
    level: int
    r_max: float

    @property
    def size(self) -> int:
        return self.rho.size

    def integrate(self, values, tail: bool = True):
        total = np.sum(self.weight * values)
        if tail and self.tail_factor:
            total = total + np.sum(self.weight[self.tail_rows] * values[self.tail_rows]) * self.tail_factor
        return total


def _scales(kernels: Sequence[Kernel], r: float):
    """(smallest positive time, largest time, singular flag) among pieces active at r."""
    lo, hi, singular = math.inf, 0.0, False
    for k in kernels:
        for p in k.pieces:
            if p.coef == 0.0 or not (p.r_lo <= r < p.r_hi):
                continue
            a, b, width = (float(v) for v in p.limits(np.float64(r)))
            if width <= 0:
                continue
            if a == 0.0:
                singular = True
            else:
                lo = min(lo, a)
            lo = min(lo, b)
            hi = max(hi, b)
    return lo, hi, singular


def build_rule(kernels: Sequence[Kernel], beta: float, level: int = 3, eps: float = 1e-15,
               r_span: float = 1e10) -> CellRule:
    """Shared cell rule for a family of kernels.

    ``level`` halves all step sizes per unit: level 3 is the reference
    resolution used for char functions, levels 0-1 are meant for sampling.
    ``eps`` sets the relative size of the neglected rho-tails.
    """
    kernels = [k for k in kernels if not k.is_zero]
    if not kernels:
        return CellRule(np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0, bool), 0.0, level, 0.0)
    motion = kernels[0].motion
    d, alpha = motion.dim, motion.alpha
    q = 1.0 + beta
    lam_sing = d - (d - alpha) * q
    if lam_sing <= 0:
        raise RegimeError("kernel is not q-integrable near the origin in this dimension")
    mu = (d + alpha) * q - d
    scale = 2.0 ** (-level)
    h_ts, h_log, h_rho = 0.5 * scale, 0.5 * scale, 0.4 * scale

    bps = sorted({0.0, *[b for k in kernels for b in k.breakpoints()]})
    unbounded = any(k.unbounded for k in kernels)
    r_nodes, r_wts = [], []
    for a, b in zip(bps[:-1], bps[1:]):
        x, w, _, _ = _tanh_sinh(a, b, h_ts)
        keep = (x > a) & (x < b) & (w > 0)
        r_nodes.append(x[keep])
        r_wts.append(w[keep])
    tail_factor, r_max = 0.0, bps[-1]
    if unbounded:
        base = bps[-1]
        c = max(1.0, max(abs(p.b0) for k in kernels for p in k.pieces))
        s = np.arange(math.log(1e-13), math.log(r_span) + 1e-12, h_log)
        x = base + c * np.exp(s)
        r_nodes.append(x)
        r_wts.append(c * np.exp(s) * h_log)
        p_exp = d * beta / alpha
        r_max = float(x[-1])
        if p_exp > 1:
            # trapezoid end weight is half a step; add the analytic remainder R h(R)/(p-1)
            tail_factor = (r_max / (p_exp - 1) - 0.5 * c * math.exp(s[-1]) * h_log) / r_wts[-1][-1]
    r_all = np.concatenate(r_nodes)
    w_all = np.concatenate(r_wts)

    rho_l, r_l, w_l, tail_l = [], [], [], []
    sd = sphere_area(d)
    log_eps = math.log(1.0 / eps)
    for i, (rr, wr) in enumerate(zip(r_all, w_all)):
        lo, hi, singular = _scales(kernels, rr)
        if hi == 0.0:
            continue
        lam = lam_sing if singular else float(d)
        y_lo = math.log(lo) / alpha - log_eps / lam
        if alpha == 2.0:
            y_hi = math.log(2.0 * math.sqrt(hi * log_eps / q))
        else:
            y_hi = math.log(hi) / alpha + log_eps / mu + 3.0
        y = np.arange(y_lo, y_hi + h_rho, h_rho)
        rho = np.exp(y)
        rho_l.append(rho)
        r_l.append(np.full(rho.size, rr))
        w_l.append(wr * sd * rho**d * h_rho)
        tail_l.append(np.full(rho.size, i == r_all.size - 1))
    rule = CellRule(np.concatenate(rho_l), np.concatenate(r_l), np.concatenate(w_l),
                    np.concatenate(tail_l), tail_factor, level, r_max)
    if not tail_factor:
        rule.tail_rows = np.zeros(rule.size, bool)
    return rule


# ---------------------------------------------------------------------------
# stable integrals


def stable_integral_exponent(kernels: Sequence[Kernel], coeffs, beta: float,
                             rule: CellRule | None = None, level: int = 3) -> complex:
    """int int psi(sum_j z_j f_j) dx dr (the negative log char function)."""
    kernels = list(kernels)
    coeffs = np.asarray(coeffs, dtype=float)
    if not kernels or np.all(coeffs == 0):
        return 0j
    rule = rule or build_rule(kernels, beta, level)
    f = combine(kernels, coeffs)(rule.rho, rule.r)
    val = rule.integrate(psi(f, 1.0 + beta))
    if not np.isfinite(val):
        raise NumericError("stable-integral quadrature overflowed", {"level": rule.level})
    return complex(val)


def stable_integral_charfn(kernels: Sequence[Kernel], coeffs, beta: float,
                           rule: CellRule | None = None, level: int = 3) -> complex:
    """exp{- int int |sum z_j f_j|^q (1 - i sgn(.) tan(pi q/2)) dx dr}."""
    return complex(np.exp(-stable_integral_exponent(kernels, coeffs, beta, rule, level)))


def dependence_exponent_gap(kernels_a, coeffs_a, kernels_b, coeffs_b, beta: float,
                            level: int = 3) -> complex:
    """int int [psi(A + B) - psi(A) - psi(B)], A = sum z f (first family), B likewise."""
    ka, kb = list(kernels_a), list(kernels_b)
    rule = build_rule(ka + kb, beta, level)
    fa = combine(ka, coeffs_a)(rule.rho, rule.r)
    fb = combine(kb, coeffs_b)(rule.rho, rule.r)
    return complex(rule.integrate(delta_psi(fa, fb, 1.0 + beta)))


@dataclass
class StableIntegralDisc:
    """Discretized stable measure: one skewed stable variable per cell.

    M(cell) has scale ``weight^(1/q)``; ``int f dM`` is approximated by
    ``sum_c f(rho_c, r_c) M(c)``.  ``tail_bound`` is the relative size of
    int |f|^q neglected beyond the last r-node, estimated from the r^-p decay.
    """

    rule: CellRule
    beta: float
    kernels: tuple
    tail_bound: float = 0.0
    values: np.ndarray = field(default=None, repr=False)

    @classmethod
    def build(cls, kernels: Sequence[Kernel], beta: float, level: int = 0, eps: float = 1e-6,
              r_span: float = 1e20) -> "StableIntegralDisc":
        kernels = tuple(kernels)
        rule = build_rule(kernels, beta, level, eps=eps, r_span=r_span)
        vals = np.stack([k(rule.rho, rule.r) for k in kernels]) if rule.size else np.zeros((len(kernels), 0))
        q = 1.0 + beta
        bound = 0.0
        if rule.tail_factor and rule.size:
            for v in vals:
                total = rule.integrate(np.abs(v) ** q, tail=False)
                tail = np.sum(rule.weight[rule.tail_rows] * np.abs(v[rule.tail_rows]) ** q) * rule.tail_factor
                if total > 0:
                    bound = max(bound, float(tail / total))
        return cls(rule, beta, kernels, bound, vals)

    @property
    def size(self) -> int:
        return self.rule.size

    def exponent(self, coeffs) -> complex:
        """Char-function exponent of the discretized integral (exact for the sampler)."""
        f = np.asarray(coeffs, float) @ self.values
        return complex(np.sum(self.rule.weight * psi(f, 1.0 + self.beta)))

    def refinement_check(self, tol: float = 1e-2, level: int = 3):
        """Compare each kernel's discretized int |f|^q to the reference quadrature."""
        q = 1.0 + self.beta
        report = []
        for j, k in enumerate(self.kernels):
            if k.is_zero:
                continue
            coarse = float(np.sum(self.rule.weight * np.abs(self.values[j]) ** q))
            fine = stable_integral_exponent([k], [1.0], self.beta, level=level).real
            rel = abs(coarse - fine) / fine
            report.append(rel)
            if rel > tol:
                raise AccuracyError("discretization too coarse for kernel",
                                    {"kernel": j, "coarse": coarse, "fine": fine, "rel": rel})
        return report

    def sample(self, rng: np.random.Generator, size: int, block: int = 2000) -> np.ndarray:
        """Draws of (int f_j dM)_j; shape (size, n_kernels)."""
        q = 1.0 + self.beta
        out = np.zeros((size, len(self.kernels)))
        if self.size == 0:
            return out
        spec = StableLawSpec(q, 1.0, 1.0)
        scale = self.rule.weight ** (1.0 / q)
        for start in range(0, self.size, block):
            sl = slice(start, min(start + block, self.size))
            s = sample_skewed_stable(spec, rng, (size, sl.stop - sl.start))
            out += (s * scale[sl]) @ self.values[:, sl].T
        return out


def stable_integral_sample(kernels: Sequence[Kernel], beta: float, rng: np.random.Generator,
                           size: int, disc: StableIntegralDisc | None = None,
                           check: bool = True, tol: float = 1e-2) -> np.ndarray:
    """Samples of int f dM for each kernel, using one frozen M per draw."""
    disc = disc or StableIntegralDisc.build(kernels, beta)
    if check:
        disc.refinement_check(tol)
    return disc.sample(rng, size)


# ---------------------------------------------------------------------------
# eta processes


_MODES = ("eta1", "eta2", "eta")


@dataclass(frozen=True)
class LimitProcess:
    """eta1, eta2 or eta = eta1 + eta2 (independent) for an intermediate-dimension model."""

    d: int
    alpha: float
    beta: float
    mode: str = "eta"

    def __post_init__(self):
        if self.mode not in _MODES:
            raise DomainError(f"mode must be one of {_MODES}")
        if classify_regime(self.d, self.alpha, self.beta) != INTERMEDIATE:
            raise RegimeError("eta processes are defined for intermediate dimensions only")

    @property
    def motion(self) -> MotionSpec:
        return MotionSpec(self.alpha, self.d)

    @property
    def q(self) -> float:
        return 1.0 + self.beta

    @property
    def H(self) -> float:
        """Self-similarity exponent (2 + beta - d beta/alpha)/(1 + beta)."""
        return (2.0 + self.beta - self.d * self.beta / self.alpha) / self.q

    def parts(self):
        return {"eta1": ("eta1",), "eta2": ("eta2",), "eta": ("eta1", "eta2")}[self.mode]

    def kernels(self, times, part: str):
        make = eta1_kernel if part == "eta1" else eta2_kernel
        return [make(self.motion, float(t)) for t in np.atleast_1d(times)]

    def increment_kernel(self, u: float, v: float, part: str) -> Kernel:
        make = eta1_increment_kernel if part == "eta1" else eta2_increment_kernel
        return make(self.motion, u, v)

    def exponent(self, times, z, level: int = 3) -> complex:
        """-log E exp(i sum_j z_j X_{t_j})."""
        return sum(stable_integral_exponent(self.kernels(times, p), np.atleast_1d(z), self.beta,
                                            level=level) for p in self.parts())

    def log_charfn(self, times, z, level: int = 3) -> complex:
        return -self.exponent(times, z, level)

    def charfn(self, times, z, level: int = 3) -> complex:
        return complex(np.exp(self.log_charfn(times, z, level)))

    def increment_exponent(self, u: float, v: float, z: float, level: int = 3) -> complex:
        return sum(stable_integral_exponent([self.increment_kernel(u, v, p)], [z], self.beta,
                                            level=level) for p in self.parts())

    def dependence_gap(self, u, v, s, t, T, z1, z2, level: int = 3) -> complex:
        """log Phi_joint - log Phi_1 - log Phi_2 for the increments over [u, v] and [T+s, T+t]."""
        total = 0j
        for p in self.parts():
            ka = [self.increment_kernel(u, v, p)]
            kb = [self.increment_kernel(T + s, T + t, p)]
            total += -dependence_exponent_gap(ka, [z1], kb, [z2], self.beta, level)
        return total

    def disc(self, times, level: int = 0) -> dict:
        return {p: StableIntegralDisc.build(self.kernels(times, p), self.beta, level) for p in self.parts()}


def eta_path(times, d: int, alpha: float, beta: float, mode: str, rng: np.random.Generator,
             size: int = 1, disc: dict | None = None, check: bool = True, level: int = 0) -> np.ndarray:
    """Jointly consistent samples of the process on ``times``; shape (size, len(times)).

    Each part uses one frozen discretized M across all times, and eta sums
    independent eta1 and eta2 draws.
    """
    proc = LimitProcess(d, alpha, beta, mode)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0):
        raise DomainError("times must be nonnegative")
    disc = disc or proc.disc(times, level)
    out = np.zeros((size, times.size))
    for p in proc.parts():
        out += stable_integral_sample(None, beta, rng, size, disc[p], check=check)
    return out


# ---------------------------------------------------------------------------
# xi: stable motion with independent increments


def xi_charfn(t: float, z, beta: float) -> complex:
    """exp{-t |z|^q (1 - i sgn z tan(pi q/2))}."""
    if t < 0:
        raise DomainError("time must be nonnegative")
    return np.exp(-t * psi(z, 1.0 + beta))


def xi_joint_charfn(times, z, beta: float) -> complex:
    """E exp(i sum_j z_j xi_{t_j}), factorized over the increments between sorted times."""
    times = np.asarray(times, dtype=float)
    z = np.asarray(z, dtype=float)
    order = np.argsort(times)
    t, zz = times[order], z[order]
    tail = np.cumsum(zz[::-1])[::-1]
    dt = np.diff(np.concatenate([[0.0], t]))
    return complex(np.prod([xi_charfn(h, c, beta) for h, c in zip(dt, tail)]))


def xi_sample(t_grid, beta: float, rng: np.random.Generator, size: int = 1) -> np.ndarray:
    """Paths on ``t_grid`` (starting at 0 if the grid does) from independent skewed increments."""
    t = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t) < 0) or t[0] < 0:
        raise DomainError("time grid must be nondecreasing and nonnegative")
    dt = np.diff(np.concatenate([[0.0], t]))
    s = sample_skewed_stable(StableLawSpec(1.0 + beta, 1.0, 1.0), rng, (size, t.size))
    return np.cumsum(s * dt ** (1.0 / (1.0 + beta)), axis=1)


# ---------------------------------------------------------------------------
# constants and the S'-valued stable motion


def critical_inner_integral(d: int, alpha: float, beta: float, h: float = 0.05) -> float:
    """int_{R^d} (int_0^1 p_r(x) dr)^beta p_1(x) dx by a log-radius trapezoid."""
    motion = MotionSpec(alpha, d)
    lam = d - (d - alpha) * beta
    y = np.arange(-40.0 / lam - 2.0, math.log(60.0) + (0 if alpha == 2 else 8.0), h)
    rho = np.exp(y)
    inner = time_integral(motion, rho, 0.0, 1.0)
    vals = sphere_area(d) * rho**d * inner**beta * unit_density_fast(alpha, d, rho)
    return float(np.sum(vals) * h)


@dataclass(frozen=True)
class ConstantReport:
    """The constant used and the alternative reading of the printed formula."""

    regime: str
    value: float
    alternative: float
    exponent_used: float
    exponent_alternative: float
    inner_integral: float | None = None


def theorem_constants(regime: str, d: int, alpha: float, beta: float, V: float) -> ConstantReport:
    """K for the regime's limit theorem.

    The value is derived from the limiting char functions, where K^q multiplies
    the stable exponent: K = c^(1/q) with c = -(V/q) cos(pi q/2) (intermediate,
    large) or c = -V cos(pi q/2) * int (int_0^1 p_r dr)^beta p_1 dx (critical).
    The alternative is c^q, the competing reading of the exponent.
    """
    if regime != classify_regime(d, alpha, beta):
        raise RegimeError(f"parameters are not in the {regime} regime")
    if V < 0:
        raise DomainError("V must be nonnegative")
    q = 1.0 + beta
    cos = math.cos(0.5 * math.pi * q)
    inner = None
    if regime == CRITICAL:
        inner = critical_inner_integral(d, alpha, beta)
        c = -V * cos * inner
        return ConstantReport(regime, c ** (1 / q), c**q, 1 / q, q, inner)
    c = -(V / q) * cos
    return ConstantReport(regime, c ** (1 / q), c**q, 1 / q, q, inner)


def _potential_profile(motion: MotionSpec, phi: RadialFunction, r):
    return np.array([radial_potential(motion, phi.profile, float(x), phi.support) for x in np.atleast_1d(r)])


def sdsm_exponent(phi: RadialFunction, t: float, d: int, alpha: float, beta: float, V: float,
                  h: float = 0.05) -> complex:
    """K^q t int psi(G phi(x)) dx for the large-dimension limit."""
    if not d > alpha * (1 + beta) / beta or not d > alpha:
        raise RegimeError("S'-valued stable motion needs d > alpha (1 + beta)/beta")
    if t < 0:
        raise DomainError("time must be nonnegative")
    if phi.integral() == 0.0 and getattr(phi, "support", 1.0) == 0.0:
        return 0j
    q = 1.0 + beta
    motion = MotionSpec(alpha, d)
    kq = theorem_constants(LARGE, d, alpha, beta, V).value ** q
    if kq == 0.0 or t == 0.0:
        return 0j
    scale = phi.support if math.isfinite(phi.support) else 8.0 * getattr(phi, "width", 1.0)
    # G phi is smooth and bounded near 0 and ~ C <phi> r^(alpha-d) far out
    y = np.arange(math.log(scale) - 12.0, math.log(scale) + 4.0, h)
    rho = np.exp(y)
    g = _potential_profile(motion, phi, rho)
    body = np.sum(sphere_area(d) * rho**d * psi(g, q)) * h
    # analytic remainder beyond rho_max using the far-field Riesz form
    R = rho[-1]
    mass = riesz_constant(d, alpha) * phi.integral()
    rate = (d - alpha) * q - d
    tail = sphere_area(d) * psi(mass, q) * R ** (-rate) / rate - 0.5 * sphere_area(d) * R**d * psi(g[-1], q) * h
    return complex(kq * t * (body + tail))


def sdsm_charfn(phi: RadialFunction, t: float, d: int, alpha: float, beta: float, V: float) -> complex:
    """E exp(i <X(t), phi>) for the S'-valued (1+beta)-stable motion."""
    return complex(np.exp(-sdsm_exponent(phi, t, d, alpha, beta, V)))
