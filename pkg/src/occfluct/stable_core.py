"""Symmetric isotropic alpha-stable motion and totally skewed stable laws.

Conventions
-----------
The motion in R^d has characteristic function ``exp(-t |z|^alpha)``; at
alpha = 2 this is Brownian motion with generator the Laplacian (variance
``2 t`` per coordinate).  One-dimensional stable laws use the
``(1 - i sgn(z) tan(pi index / 2))`` form with skew +1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special
from scipy.interpolate import CubicSpline

from .errors import DomainError, NumericError, UnsupportedError
from .testfunctions import RadialFunction, sphere_area

__all__ = [
    "StableLawSpec",
    "MotionSpec",
    "sample_positive_stable",
    "sample_isotropic_increment",
    "sample_skewed_stable",
    "skewed_stable_charfn",
    "transition_density",
    "apply_semigroup",
    "potential_operator",
    "radial_semigroup",
    "radial_potential",
    "riesz_constant",
    "density_at_origin",
]

MAX_NUMERIC_DIM = 6


@dataclass(frozen=True)
class StableLawSpec:
    index: float
    scale: float = 1.0
    skew: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.index <= 2.0:
            raise DomainError(f"stable index must lie in (0, 2], got {self.index}")
        if self.scale < 0.0:
            raise DomainError(f"scale must be nonnegative, got {self.scale}")
        if abs(self.skew) > 1.0:
            raise DomainError(f"skew must lie in [-1, 1], got {self.skew}")
        if self.skew not in (0.0, 1.0):
            raise UnsupportedError("only skew 0 or +1 is supported")

    def scaled(self, c: float) -> "StableLawSpec":
        """Law of ``c X`` for c > 0."""
        if c <= 0:
            raise DomainError("scaling factor must be positive")
        return StableLawSpec(self.index, c * self.scale, self.skew)

    def charfn(self, z):
        return skewed_stable_charfn(z, self.index, self.scale, self.skew)


@dataclass(frozen=True)
class MotionSpec:
    alpha: float
    dim: int

    def __post_init__(self):
        if not 0.0 < self.alpha <= 2.0:
            raise DomainError(f"alpha must lie in (0, 2], got {self.alpha}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise DomainError(f"dim must be a positive integer, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))

    @property
    def closed_form(self) -> bool:
        return self.alpha in (1.0, 2.0)


def skewed_stable_charfn(z, index, scale=1.0, skew=1.0):
    """``exp{-scale^index |z|^index (1 - i skew sgn(z) tan(pi index / 2))}``."""
    z = np.asarray(z, dtype=float)
    tan = math.tan(0.5 * math.pi * index) if index != 1.0 else 0.0
    expo = (scale * np.abs(z)) ** index * (1.0 - 1j * skew * np.sign(z) * tan)
    return np.exp(-expo)


# ---------------------------------------------------------------------------
# sampling


def sample_positive_stable(a: float, size, rng: np.random.Generator) -> np.ndarray:
    """Positive a-stable variates with Laplace transform ``exp(-s^a)``, 0 < a <= 1.

    Kanter's representation: with U uniform on (0, pi) and E standard
    exponential, ``sin(aU) / sin(U)^(1/a) * (sin((1-a)U)/E)^((1-a)/a)``.
    """
    if not 0.0 < a <= 1.0:
        raise DomainError(f"positive stable index must lie in (0, 1], got {a}")
    if a == 1.0:
        return np.ones(size)
    u = rng.uniform(0.0, math.pi, size)
    e = rng.standard_exponential(size)
    return np.sin(a * u) / np.sin(u) ** (1.0 / a) * (np.sin((1.0 - a) * u) / e) ** ((1.0 - a) / a)


def sample_isotropic_increment(motion: MotionSpec, t: float, rng: np.random.Generator, size=None):
    """Increment of the isotropic alpha-stable motion over a time span ``t``.

    Returns an array of shape ``(d,)`` or ``(*size, d)``.  For alpha < 2 the
    increment is a Gaussian vector at a positive (alpha/2)-stable random time,
    which is exact in law and isotropic.
    """
    if not t > 0:
        raise DomainError(f"time span must be positive, got {t}")
    shape = () if size is None else (size,) if np.isscalar(size) else tuple(size)
    gauss = rng.standard_normal(shape + (motion.dim,))
    if motion.alpha == 2.0:
        return math.sqrt(2.0 * t) * gauss
    clock = sample_positive_stable(0.5 * motion.alpha, shape, rng)
    spread = np.sqrt(2.0 * t ** (2.0 / motion.alpha) * clock)
    return spread[..., None] * gauss


def isotropic_increments(motion: MotionSpec, spans: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Independent increments over an array of (nonnegative) time spans."""
    spans = np.asarray(spans, dtype=float)
    gauss = rng.standard_normal(spans.shape + (motion.dim,))
    if motion.alpha == 2.0:
        return np.sqrt(2.0 * spans)[..., None] * gauss
    clock = sample_positive_stable(0.5 * motion.alpha, spans.shape, rng)
    return np.sqrt(2.0 * spans ** (2.0 / motion.alpha) * clock)[..., None] * gauss


def sample_skewed_stable(spec: StableLawSpec, rng: np.random.Generator, size=None):
    """Totally skewed stable draws with index in (1, 2) (Chambers-Mallows-Stuck).

    The characteristic function is
    ``exp{-scale^index |z|^index (1 - i sgn(z) tan(pi index / 2))}``.
    """
    a = spec.index
    if not 1.0 < a < 2.0 or spec.skew != 1.0:
        raise UnsupportedError("skewed sampler needs index in (1, 2) and skew +1")
    if spec.scale == 0.0:
        return np.zeros(size) if size is not None else 0.0
    v = rng.uniform(-0.5 * math.pi, 0.5 * math.pi, size)
    w = rng.standard_exponential(size)
    tan = math.tan(0.5 * math.pi * a)
    shift = math.atan(tan) / a
    factor = (1.0 + tan * tan) ** (0.5 / a)
    x = (factor * np.sin(a * (v + shift)) / np.cos(v) ** (1.0 / a)
         * (np.cos(v - a * (v + shift)) / w) ** ((1.0 - a) / a))
    return spec.scale * x


# ---------------------------------------------------------------------------
# densities


def density_at_origin(alpha: float, d: int, t: float = 1.0) -> float:
    """p_t(0) = (2 pi)^-d |S^{d-1}| Gamma(d/alpha) / (alpha t^{d/alpha})."""
    return (sphere_area(d) * math.gamma(d / alpha) / (alpha * (2 * math.pi) ** d)
            * t ** (-d / alpha))


def _closed_form_density(alpha, d, t, r):
    if alpha == 2.0:
        return (4 * math.pi * t) ** (-d / 2) * np.exp(-r * r / (4 * t))
    c = math.gamma((d + 1) / 2) * math.pi ** (-(d + 1) / 2)
    return c * t * (t * t + r * r) ** (-(d + 1) / 2)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(32)


def _hankel_density(alpha: float, d: int, t: float, r: float) -> float:
    """Radial Fourier inversion of exp(-t k^alpha) at radius r.

    p_t(r) = (2 pi)^{-d/2} r^{1-d/2} int_0^inf exp(-t k^alpha) k^{d/2} J_{d/2-1}(k r) dk,
    integrated panel by panel between half-periods of the Bessel factor.
    """
    if r == 0.0:
        return density_at_origin(alpha, d, t)
    nu = d / 2 - 1
    kmax = (60.0 / t) ** (1.0 / alpha)
    width = min(math.pi / r, kmax / 64)
    # geometric panels near 0 resolve the k^alpha cusp; half-period panels beyond
    edges = np.concatenate([[0.0], width * np.geomspace(1e-6, 1.0, 16),
                            np.arange(2 * width, kmax, width), [kmax]])
    edges = np.unique(edges)
    a, b = edges[:-1], edges[1:]
    k = 0.5 * (b - a)[:, None] * _GL_X[None, :] + 0.5 * (a + b)[:, None]
    w = 0.5 * (b - a)[:, None] * _GL_W[None, :]
    # r^{-nu} J_nu(kr) k^{d/2} = k^{d-1} (kr)^{-nu} J_nu(kr)
    kr = k * r
    with np.errstate(invalid="ignore"):
        bessel_part = np.where(kr > 1e-8, special.jv(nu, kr) * kr ** (-nu),
                               2.0 ** (-nu) / math.gamma(nu + 1))
    vals = np.exp(-t * k**alpha) * k ** (d - 1) * bessel_part * w
    panel = vals.sum(axis=1)
    total = panel.sum()
    tail = abs(panel[-1])
    if not np.isfinite(total) or tail > 1e-10 * max(abs(total), 1e-300):
        raise NumericError("radial Fourier inversion did not converge",
                           {"alpha": alpha, "d": d, "t": t, "r": r, "tail": tail, "total": total})
    return float(total / (2 * math.pi) ** (d / 2))


def tail_coefficients(alpha: float, d: int, terms: int = 10) -> list[float]:
    """c_k in the large-radius expansion p_1(u) = sum_k c_k u^(-k alpha - d), alpha < 2."""
    out = []
    for k in range(1, terms + 1):
        ka = k * alpha
        out.append((-1) ** (k + 1) / math.factorial(k) * 2.0**ka / math.pi ** (d / 2 + 1)
                   * math.gamma(ka / 2 + 1) * math.gamma((ka + d) / 2) * math.sin(math.pi * ka / 2))
    return out


def _tail_series(alpha: float, d: int, u, terms: int = 10):
    """Large-radius expansion of p_1(u) for alpha < 2."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    for k, coef in enumerate(tail_coefficients(alpha, d, terms), start=1):
        out = out + coef * u ** (-k * alpha - d)
    return out


_SERIES_RADIUS = 20.0


def transition_density(motion: MotionSpec, t: float, r):
    """Transition density p_t at distance ``r`` (scalar or array).

    Closed forms for alpha in {1, 2}; otherwise radial Fourier inversion,
    switching to the large-radius series for ``r t^{-1/alpha} > 20``.
    """
    if not t > 0:
        raise DomainError(f"time must be positive, got {t}")
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise DomainError("radius must be nonnegative")
    alpha, d = motion.alpha, motion.dim
    if motion.closed_form:
        out = _closed_form_density(alpha, d, t, r_arr)
        return out if out.ndim else float(out)
    if d > MAX_NUMERIC_DIM:
        raise UnsupportedError(f"numeric densities are limited to d <= {MAX_NUMERIC_DIM}")
    flat = r_arr.ravel()
    u = flat * t ** (-1.0 / alpha)
    vals = np.empty_like(flat)
    far = u > _SERIES_RADIUS
    vals[far] = t ** (-d / alpha) * _tail_series(alpha, d, u[far])
    for i in np.flatnonzero(~far):
        vals[i] = _hankel_density(alpha, d, t, float(flat[i]))
    out = vals.reshape(r_arr.shape)
    return out if out.ndim else float(out)


@lru_cache(maxsize=32)
def _unit_profile(alpha: float, d: int):
    """Spline of log p_1 on [0, 20] in the variable u^(1/2), used by fast paths."""
    s = np.linspace(0.0, math.sqrt(_SERIES_RADIUS), 401)
    u = s * s
    logp = np.log([_hankel_density(alpha, d, 1.0, float(x)) for x in u])
    return CubicSpline(s, logp)


def unit_density_fast(alpha: float, d: int, u):
    """p_1(u) for any alpha: closed form, or tabulated inversion plus tail series."""
    u = np.asarray(u, dtype=float)
    if alpha in (1.0, 2.0):
        return _closed_form_density(alpha, d, 1.0, u)
    spline = _unit_profile(alpha, d)
    out = np.empty_like(u)
    far = u > _SERIES_RADIUS
    out[far] = _tail_series(alpha, d, u[far])
    out[~far] = np.exp(spline(np.sqrt(u[~far])))
    return out


# ---------------------------------------------------------------------------
# semigroup and potential


def _sphere_mean_gaussian(d, t, r, s):
    """Integral over the unit sphere of p_t(|x - s w|), |x| = r, alpha = 2."""
    kappa = np.asarray(r * s / (2 * t), dtype=float)
    base = (4 * math.pi * t) ** (-d / 2) * np.exp(-((r - s) ** 2) / (4 * t))
    if d == 1:
        return base * (1 + np.exp(-kappa * 2))
    nu = d / 2 - 1
    with np.errstate(divide="ignore", invalid="ignore"):
        safe = np.where(kappa > 1e-12, kappa, 1.0)
        ratio = np.where(kappa > 1e-12,
                         (2 * math.pi) ** (d / 2) * special.ive(nu, safe) * safe ** (-nu),
                         sphere_area(d))
    return base * ratio


def _sphere_integral(func, d, r, s):
    """Integral over |w| = 1 of func(|x - s w|) for |x| = r (d >= 2) via the polar angle."""
    if d == 1:
        return func(abs(r - s)) + func(r + s)
    const = sphere_area(d - 1)

    def integrand(theta):
        dist = math.sqrt(max(r * r + s * s - 2 * r * s * math.cos(theta), 0.0))
        return func(dist) * math.sin(theta) ** (d - 2)

    val, _ = integrate.quad(integrand, 0.0, math.pi, limit=200, epsrel=1e-10)
    return const * val


def radial_semigroup(motion: MotionSpec, t: float, profile, r: float,
                     support: float = math.inf) -> float:
    """(T_t g)(r) for a radial profile g centered at the origin."""
    if t < 0:
        raise DomainError("semigroup time must be nonnegative")
    if t == 0:
        return float(profile(r))
    d = motion.dim
    if motion.alpha == 2.0:
        def inner(s):
            return float(profile(s)) * s ** (d - 1) * float(_sphere_mean_gaussian(d, t, r, s))
    else:
        def inner(s):
            g = float(profile(s))
            if g == 0.0:
                return 0.0
            return g * s ** (d - 1) * _sphere_integral(
                lambda q: transition_density(motion, t, q), d, r, s)
    upper = support if math.isfinite(support) else np.inf
    pts = [r] if 0 < r < upper and math.isfinite(upper) else None
    val, err = integrate.quad(inner, 0.0, upper, points=pts, limit=400, epsabs=1e-14, epsrel=1e-10)
    if not math.isfinite(val):
        raise NumericError("semigroup quadrature failed", {"t": t, "r": r, "err": err})
    return val


def apply_semigroup(motion: MotionSpec, t: float, phi: RadialFunction, x) -> float:
    """(T_t phi)(x) = (p_t * phi)(x) for a radial test function."""
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x - phi.center))
    return radial_semigroup(motion, t, phi.profile, r, phi.support)


def riesz_constant(d: int, alpha: float) -> float:
    """C(d, alpha) with int_0^inf p_t(x) dt = C |x|^{alpha - d}, d > alpha."""
    if not d > alpha:
        raise DomainError("Riesz potential needs d > alpha")
    return math.gamma((d - alpha) / 2) / (2**alpha * math.pi ** (d / 2) * math.gamma(alpha / 2))


def _sphere_mean_riesz(d, alpha, r, s):
    """Integral over the unit sphere of |x - s w|^{alpha - d}, |x| = r."""
    big, small = max(r, s), min(r, s)
    if big == 0.0:
        return math.inf
    lam = (d - alpha) / 2
    hyp = special.hyp2f1(lam, 1 - alpha / 2, d / 2, (small / big) ** 2)
    return sphere_area(d) * big ** (alpha - d) * hyp


def radial_potential(motion: MotionSpec, profile, r: float, support: float) -> float:
    """G g(r) = C(d, alpha) int g(|y|) |x - y|^{alpha - d} dy for |x| = r."""
    d, alpha = motion.dim, motion.alpha
    c = riesz_constant(d, alpha)
    if alpha == 2.0:
        # shell theorem
        def inner(s):
            return float(profile(s)) * s ** (d - 1) * sphere_area(d) * max(r, s) ** (2 - d)
    else:
        def inner(s):
            g = float(profile(s))
            return 0.0 if g == 0.0 else g * s ** (d - 1) * _sphere_mean_riesz(d, alpha, r, s)
    upper = support if math.isfinite(support) else np.inf
    pts = [r] if 0 < r < upper and math.isfinite(upper) else None
    val, err = integrate.quad(inner, 0.0, upper, points=pts, limit=400, epsabs=1e-14, epsrel=1e-10)
    if not math.isfinite(val):
        raise NumericError("potential quadrature failed", {"r": r, "err": err})
    return c * val


def potential_operator(motion: MotionSpec, phi: RadialFunction, x) -> float:
    """G phi(x) = int_0^inf T_t phi(x) dt, via the Riesz kernel (needs d > alpha)."""
    if not motion.dim > motion.alpha:
        raise DomainError("potential operator diverges unless d > alpha")
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x - phi.center))
    return radial_potential(motion, phi.profile, r, phi.support)
