"""Radially symmetric test functions on R^d."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import DomainError


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere in R^d (2 for d = 1)."""
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


class RadialFunction:
    """A function phi(x) = g(|x - center|) with g = ``profile``.

    Subclasses override ``profile``; ``support`` is the radius outside which
    the profile vanishes (``inf`` for non-compact profiles).
    """

    center: np.ndarray
    support: float = math.inf

    @property
    def dim(self) -> int:
        return len(self.center)

    def profile(self, r):
        raise NotImplementedError

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x - self.center, axis=-1)
        return self.profile(r)

    def on_torus(self, x, side: float):
        """Evaluate at points in [0, side)^d using minimum-image distance."""
        diff = np.asarray(x, dtype=float) - self.center
        diff -= side * np.round(diff / side)
        return self.profile(np.sqrt(np.einsum("...i,...i->...", diff, diff)))

    def integral(self) -> float:
        """Lebesgue integral of phi over R^d."""
        return self._integral

    def torus_integral(self, side: float) -> float:
        """Integral over the torus [0, side)^d of the minimum-image evaluation.

        Equals :meth:`integral` when the support fits in the half-side ball;
        subclasses with separable profiles override this.
        """
        if self.support <= 0.5 * side:
            return self.integral()
        raise DomainError(f"support radius {self.support} exceeds half the torus side {side}")

    @cached_property
    def _integral(self) -> float:
        d = self.dim
        upper = self.support if math.isfinite(self.support) else np.inf
        val, _ = integrate.quad(lambda r: float(self.profile(r)) * r ** (d - 1),
                                0.0, upper, epsabs=0.0, epsrel=1e-12, limit=200)
        return sphere_area(d) * val


@dataclass(frozen=True, eq=False)
class GaussianBump(RadialFunction):
    """``amplitude * exp(-|x - c|^2 / (2 width^2))``."""

    center: np.ndarray
    width: float = 1.0
    amplitude: float = 1.0
    support: float = field(default=math.inf, init=False)

    def __post_init__(self):
        object.__setattr__(self, "center", np.atleast_1d(np.asarray(self.center, float)))

    def profile(self, r):
        r = np.asarray(r, dtype=float)
        return self.amplitude * np.exp(-0.5 * (r / self.width) ** 2)

    def integral(self) -> float:
        return self.amplitude * (2.0 * math.pi * self.width**2) ** (self.dim / 2)

    def torus_integral(self, side: float) -> float:
        # minimum image acts per coordinate and the Gaussian factorizes
        one = math.sqrt(2.0 * math.pi) * self.width * math.erf(side / (2.0 * math.sqrt(2.0) * self.width))
        return self.amplitude * one**self.dim


@dataclass(frozen=True, eq=False)
class SmoothBump(RadialFunction):
    """C-infinity bump ``amplitude * exp(1 - 1/(1 - (r/width)^2))`` on r < width."""

    center: np.ndarray
    width: float = 1.0
    amplitude: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", np.atleast_1d(np.asarray(self.center, float)))

    @property
    def support(self) -> float:
        return self.width

    def profile(self, r):
        u = np.asarray(r, dtype=float) / self.width
        out = np.zeros_like(u)
        inside = u < 1.0
        out[inside] = self.amplitude * np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
        return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class RadialProfile(RadialFunction):
    """Wrap an arbitrary vectorized radial profile ``g(r)``."""

    center: np.ndarray
    func: Callable = None
    support: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "center", np.atleast_1d(np.asarray(self.center, float)))

    def profile(self, r):
        return self.func(r)


@dataclass(frozen=True, eq=False)
class Zero(RadialFunction):
    """The zero function (support radius 0)."""

    center: np.ndarray
    support: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", np.atleast_1d(np.asarray(self.center, float)))

    def profile(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    def integral(self) -> float:
        return 0.0

    def torus_integral(self, side: float) -> float:
        return 0.0


def scaled(phi: RadialFunction, c: float) -> RadialFunction:
    """Return ``c * phi`` as a new radial function."""
    if isinstance(phi, (GaussianBump, SmoothBump)):
        return type(phi)(phi.center, phi.width, phi.amplitude * c)
    return RadialProfile(phi.center, lambda r: c * phi.profile(r), phi.support)
