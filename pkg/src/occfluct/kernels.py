"""Time-integrated transition densities and the stable-integral kernels built from them.

Everything here is a function of the radius ``rho = |x|`` and a time-like
coordinate ``r``.  The basic block is

    I(rho; a, b) = int_a^b p_s(rho) ds,     0 <= a <= b,

which is evaluated in closed form for alpha = 2 (incomplete gamma) and
alpha = 1 (algebraic), and from a tabulated cumulative profile otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy import special
from scipy.interpolate import CubicSpline

from .errors import DomainError
from .stable_core import MotionSpec, density_at_origin, tail_coefficients, unit_density_fast

__all__ = [
    "time_integral",
    "KernelPiece",
    "Kernel",
    "eta1_kernel",
    "eta2_kernel",
    "eta1_increment_kernel",
    "eta2_increment_kernel",
]

_GL16_X, _GL16_W = np.polynomial.legendre.leggauss(16)


def _gl_on(lo, width, func):
    """16-point Gauss-Legendre on [lo, lo + width] (arrays broadcast).

    Taking the width separately keeps the result right when it is far below
    the resolution of ``lo``.
    """
    half = 0.5 * np.asarray(width)[..., None]
    x = np.asarray(lo)[..., None] + half * (1.0 + _GL16_X)
    return np.sum(func(x) * _GL16_W, axis=-1) * half[..., 0]


# ---------------------------------------------------------------------------
# alpha = 2


def _time_integral_gauss(d, rho, a, b, width):
    # int_a^b (4 pi s)^{-d/2} e^{-rho^2/4s} ds = (4 pi)^{-d/2} (rho^2/4)^{-nu} int_{xb}^{xa} x^{nu-1} e^{-x} dx
    nu = d / 2 - 1
    rho2 = rho * rho / 4.0
    out = np.zeros(np.broadcast(rho, a, b).shape)
    rho2, a, b, width = np.broadcast_arrays(rho2, a, b, width)
    pos = width > 0
    zero = pos & (rho2 == 0)
    if np.any(zero):
        # I(0; a, b) = (4 pi)^{-d/2} (a^{1-d/2} - b^{1-d/2}) / (d/2 - 1); a = 0 -> inf
        aa, bb = a[zero], b[zero]
        with np.errstate(divide="ignore"):
            out[zero] = (4 * math.pi) ** (-d / 2) * (aa ** (-nu) - bb ** (-nu)) / nu
    work = pos & (rho2 > 0)
    if not np.any(work):
        return out
    r2, aa, bb, ww = rho2[work], a[work], b[work], width[work]
    with np.errstate(divide="ignore"):
        xa = np.where(aa > 0, r2 / np.where(aa > 0, aa, 1.0), np.inf)
    xb = r2 / bb
    pref = (4 * math.pi) ** (-d / 2) * r2 ** (-nu) * math.gamma(nu)
    val = np.empty_like(r2)
    # x_a - x_b = rho^2/4 (b - a)/(a b), with b - a passed in exactly
    with np.errstate(divide="ignore", invalid="ignore"):
        gap = np.where(aa > 0, r2 * ww / (np.where(aa > 0, aa, 1.0) * bb), np.inf)
    close = gap < 0.5 * xb
    small = ~close & (xb < 1.0)
    large = ~close & ~small
    if np.any(close):
        val[close] = _gl_on(xb[close], gap[close], lambda x: x ** (nu - 1) * np.exp(-x)) / math.gamma(nu)
    if np.any(small):
        xa_s = xa[small]
        pa = np.where(np.isfinite(xa_s), special.gammainc(nu, np.where(np.isfinite(xa_s), xa_s, 0.0)), 1.0)
        val[small] = pa - special.gammainc(nu, xb[small])
    if np.any(large):
        xa_l = xa[large]
        qa = np.where(np.isfinite(xa_l), special.gammaincc(nu, np.where(np.isfinite(xa_l), xa_l, 0.0)), 0.0)
        val[large] = special.gammaincc(nu, xb[large]) - qa
    out[work] = pref * val
    return out


# ---------------------------------------------------------------------------
# alpha = 1


def _time_integral_cauchy(d, rho, a, b, width):
    # p_s(rho) = c s (s^2 + rho^2)^{-(d+1)/2}; antiderivative -c (s^2 + rho^2)^{-m} / (d - 1)
    c = math.gamma((d + 1) / 2) * math.pi ** (-(d + 1) / 2)
    rho, a, b, width = np.broadcast_arrays(np.asarray(rho, float), a, b, width)
    base = a * a + rho * rho
    ratio = width * (b + a) / np.where(base > 0, base, 1.0)
    if d == 1:
        with np.errstate(divide="ignore"):
            out = 0.5 * c * np.log1p(ratio)
    else:
        m = (d - 1) / 2
        with np.errstate(divide="ignore"):
            out = c / (d - 1) * base ** (-m) * -np.expm1(-m * np.log1p(ratio))
    out = np.where(width > 0, out, 0.0)
    return out


# ---------------------------------------------------------------------------
# general alpha: tabulated cumulative profile


@dataclass(frozen=True)
class _Cumulative:
    """G(w) = int_0^w v^{-d/alpha} p_1(v^{-1/alpha}) dv, so I(rho; a, b) = rho^{alpha-d} [G(b/rho^alpha) - G(a/rho^alpha)]."""

    alpha: float
    d: int
    logw: np.ndarray
    lower: CubicSpline      # log G(w)
    upper: CubicSpline      # log (G(inf) - G(w))
    total: float
    w_lo: float
    w_hi: float

    def series_lower(self, w):
        out = np.zeros_like(w)
        for k, c in enumerate(tail_coefficients(self.alpha, self.d), start=1):
            out = out + c * w ** (k + 1) / (k + 1)
        return out

    def lower_tail_upper(self, w):
        p0 = density_at_origin(self.alpha, self.d)
        e = self.d / self.alpha
        return p0 * w ** (1 - e) / (e - 1)

    def G(self, w):
        w = np.asarray(w, dtype=float)
        out = np.empty_like(w)
        lo, hi = w <= self.w_lo, w >= self.w_hi
        mid = ~lo & ~hi
        out[lo] = self.series_lower(w[lo])
        out[hi] = self.total - self.lower_tail_upper(w[hi])
        out[mid] = np.exp(self.lower(np.log(w[mid])))
        return out

    def Gc(self, w):
        """G(inf) - G(w), accurate for large w."""
        w = np.asarray(w, dtype=float)
        out = np.empty_like(w)
        lo, hi = w <= self.w_lo, w >= self.w_hi
        mid = ~lo & ~hi
        out[lo] = self.total - self.series_lower(w[lo])
        out[hi] = self.lower_tail_upper(w[hi])
        out[mid] = np.exp(self.upper(np.log(w[mid])))
        return out


@lru_cache(maxsize=16)
def _cumulative(alpha: float, d: int) -> _Cumulative:
    w_lo = 0.5 * 20.0 ** (-alpha)
    w_hi = 1e8
    edges = np.geomspace(w_lo, w_hi, 1201)

    def integrand(v):
        return v ** (-d / alpha) * unit_density_fast(alpha, d, v ** (-1.0 / alpha))

    panels = _gl_on(edges[:-1], np.diff(edges), integrand)
    head = _Cumulative(alpha, d, None, None, None, 0.0, w_lo, w_hi).series_lower(np.array([w_lo]))[0]
    cum = head + np.concatenate([[0.0], np.cumsum(panels)])
    p0 = density_at_origin(alpha, d)
    e = d / alpha
    total = cum[-1] + p0 * w_hi ** (1 - e) / (e - 1)
    upper = total - cum
    # above ~1e3 the complement is tiny relative to total; rebuild it by summing panels from the top
    rev = p0 * w_hi ** (1 - e) / (e - 1) + np.concatenate([np.cumsum(panels[::-1])[::-1], [0.0]])
    upper = np.where(upper < 0.5 * total, rev, upper)
    logw = np.log(edges)
    return _Cumulative(alpha, d, logw, CubicSpline(logw, np.log(cum)),
                       CubicSpline(logw, np.log(upper)), float(total), w_lo, w_hi)


def _time_integral_general(alpha, d, rho, a, b, width):
    rho, a, b, width = np.broadcast_arrays(np.asarray(rho, float), a, b, width)
    out = np.zeros(rho.shape)
    pos = width > 0
    if not np.any(pos):
        return out
    r, aa, bb, ww = rho[pos], a[pos], b[pos], width[pos]
    val = np.empty_like(r)
    zero = r == 0
    if np.any(zero):
        e = d / alpha
        p0 = density_at_origin(alpha, d)
        with np.errstate(divide="ignore"):
            val[zero] = p0 * (aa[zero] ** (1 - e) - bb[zero] ** (1 - e)) / (e - 1)
    nz = ~zero
    close = nz & (bb < 1.5 * aa)
    if np.any(close):
        rr = r[close][:, None]
        val[close] = _gl_on(aa[close], ww[close],
                            lambda s: s ** (-d / alpha) * unit_density_fast(alpha, d, rr * s ** (-1 / alpha)))
    far = nz & ~close
    if np.any(far):
        cum = _cumulative(alpha, d)
        ra = r[far] ** alpha
        wa, wb = aa[far] / ra, bb[far] / ra
        use_upper = wa > 1.0
        diff = np.where(use_upper, cum.Gc(np.maximum(wa, 1e-300)) - cum.Gc(wb),
                        cum.G(wb) - np.where(wa > 0, cum.G(np.maximum(wa, 1e-300)), 0.0))
        val[far] = r[far] ** (alpha - d) * diff
    out[pos] = val
    return out


def time_integral(motion: MotionSpec, rho, a, b, width=None):
    """I(rho; a, b) = int_a^b p_s(rho) ds, vectorized over broadcast arguments.

    ``a = 0`` is allowed (the integral then behaves like ``C rho^{alpha-d}``
    near the origin, which requires d > alpha for finiteness at rho = 0).
    ``width`` may carry b - a computed without rounding, which matters when
    a and b are large and close.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if np.any(a < 0) or np.any(rho < 0):
        raise DomainError("time integral needs a >= 0 and rho >= 0")
    width = b - a if width is None else np.asarray(width, dtype=float)
    d, alpha = motion.dim, motion.alpha
    if alpha == 2.0:
        out = _time_integral_gauss(d, rho, a, b, width)
    elif alpha == 1.0:
        out = _time_integral_cauchy(d, rho, a, b, width)
    else:
        out = _time_integral_general(alpha, d, rho, a, b, width)
    return out if np.ndim(out) else float(out)


# ---------------------------------------------------------------------------
# kernels


@dataclass(frozen=True)
class KernelPiece:
    """``coef * I(rho; a(r), b(r))`` on ``r_lo <= r < r_hi``, with a, b affine in r."""

    coef: float
    a0: float
    a1: float
    b0: float
    b1: float
    r_lo: float = 0.0
    r_hi: float = math.inf

    def lower(self, r):
        return self.a0 + self.a1 * r

    def upper(self, r):
        return self.b0 + self.b1 * r

    def limits(self, r):
        """(a, b, b - a) at r, with the lower limit clipped at 0 and the width kept exact."""
        a, b = self.lower(r), np.maximum(self.upper(r), 0.0)
        if self.a1 == self.b1:
            width = np.broadcast_to(self.b0 - self.a0, np.shape(r)).astype(float)
        else:
            width = b - a
        clip = a < 0
        a = np.where(clip, 0.0, a)
        width = np.where(clip, b, width)
        return a, b, np.maximum(width, 0.0)

    def active(self, r):
        return (r >= self.r_lo) & (r < self.r_hi)

    @property
    def singular(self) -> bool:
        """The lower time limit vanishes identically, so the piece blows up at rho = 0."""
        return self.a0 == 0.0 and self.a1 == 0.0


@dataclass(frozen=True)
class Kernel:
    """A finite sum of kernel pieces f(rho, r), radially symmetric in x."""

    motion: MotionSpec
    pieces: tuple = ()

    def __call__(self, rho, r):
        rho = np.asarray(rho, dtype=float)
        r = np.asarray(r, dtype=float)
        out = np.zeros(np.broadcast(rho, r).shape)
        for p in self.pieces:
            on = np.broadcast_to(p.active(r), out.shape)
            if not np.any(on):
                continue
            rr = np.broadcast_to(r, out.shape)[on]
            out[on] += p.coef * time_integral(self.motion, np.broadcast_to(rho, out.shape)[on],
                                              *p.limits(rr))
        return out

    def __add__(self, other: "Kernel") -> "Kernel":
        if other.motion != self.motion:
            raise DomainError("kernels for different motions cannot be added")
        return Kernel(self.motion, self.pieces + other.pieces)

    def __mul__(self, c: float) -> "Kernel":
        c = float(c)
        if c == 0.0:
            return Kernel(self.motion, ())
        return Kernel(self.motion, tuple(KernelPiece(p.coef * c, p.a0, p.a1, p.b0, p.b1, p.r_lo, p.r_hi)
                                         for p in self.pieces))

    __rmul__ = __mul__

    @property
    def is_zero(self) -> bool:
        return all(p.coef == 0.0 or p.r_hi <= p.r_lo for p in self.pieces)

    def breakpoints(self) -> list[float]:
        pts = set()
        for p in self.pieces:
            for v in (p.r_lo, p.r_hi):
                if math.isfinite(v):
                    pts.add(float(v))
        return sorted(pts)

    @property
    def unbounded(self) -> bool:
        """Some piece is active on an unbounded r-range."""
        return any(not math.isfinite(p.r_hi) and p.coef != 0.0 for p in self.pieces)


def combine(kernels: Sequence[Kernel], coeffs: Iterable[float]) -> Kernel:
    """sum_j z_j f_j as a single kernel."""
    kernels = list(kernels)
    if not kernels:
        raise DomainError("need at least one kernel")
    out = Kernel(kernels[0].motion, ())
    for k, z in zip(kernels, coeffs):
        out = out + k * z
    return out


def eta1_kernel(motion: MotionSpec, t: float) -> Kernel:
    """1_{r <= t} int_r^t p_{u-r}(x) du = 1_{r <= t} I(rho; 0, t - r)."""
    if t < 0:
        raise DomainError("time must be nonnegative")
    if t == 0:
        return Kernel(motion, ())
    return Kernel(motion, (KernelPiece(1.0, 0.0, 0.0, t, -1.0, 0.0, t),))


def eta2_kernel(motion: MotionSpec, t: float) -> Kernel:
    """int_0^t p_{s+r}(x) ds = I(rho; r, r + t)."""
    if t < 0:
        raise DomainError("time must be nonnegative")
    if t == 0:
        return Kernel(motion, ())
    return Kernel(motion, (KernelPiece(1.0, 0.0, 1.0, t, 1.0),))


def eta1_increment_kernel(motion: MotionSpec, u: float, v: float) -> Kernel:
    """Kernel of eta1_v - eta1_u, merged so no cancellation occurs for r < u."""
    if not 0 <= u <= v:
        raise DomainError("need 0 <= u <= v")
    if u == v:
        return Kernel(motion, ())
    pieces = [KernelPiece(1.0, 0.0, 0.0, v, -1.0, u, v)]
    if u > 0:
        pieces.append(KernelPiece(1.0, u, -1.0, v, -1.0, 0.0, u))
    return Kernel(motion, tuple(pieces))


def eta2_increment_kernel(motion: MotionSpec, u: float, v: float) -> Kernel:
    """Kernel of eta2_v - eta2_u: I(rho; r + u, r + v)."""
    if not 0 <= u <= v:
        raise DomainError("need 0 <= u <= v")
    if u == v:
        return Kernel(motion, ())
    return Kernel(motion, (KernelPiece(1.0, u, 1.0, v, 1.0),))
