"""The (d, alpha, beta)-branching particle system.

Particles perform independent isotropic alpha-stable motions, die at rate V
and are replaced by a random number of children drawn from the critical
offspring law with generating function ``F(s) = s + (1 - s)^(1+beta)/(1+beta)``.
Children start at the death position of their parent.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from .errors import DomainError, ResourceError
from .stable_core import MotionSpec, isotropic_increments
from .testfunctions import RadialFunction

__all__ = [
    "OffspringLaw",
    "offspring_pmf",
    "offspring_pmf_direct",
    "generating_F",
    "generating_G",
    "sample_offspring",
    "Domain",
    "ParticleSet",
    "SystemSpec",
    "Trajectory",
    "init_poisson",
    "warmup_to_equilibrium",
    "default_warmup",
    "simulate_occupation",
    "replica_rng",
    "write_trajectory_csv",
    "TRAJECTORY_COLUMNS",
]


# ---------------------------------------------------------------------------
# offspring law


def offspring_pmf(beta: float, k: int) -> float:
    """p_k by the recursion p_{k+1} = p_k (k - 1 - beta)/(k + 1), p_2 = beta/2."""
    if k < 0 or int(k) != k:
        raise DomainError("k must be a nonnegative integer")
    if k == 0:
        return 1.0 / (1.0 + beta)
    if k == 1:
        return 0.0
    p = 0.5 * beta
    for j in range(2, int(k)):
        p *= (j - 1 - beta) / (j + 1)
    return p


def offspring_pmf_direct(beta: float, k: int) -> float:
    """p_k from the binomial-series formula (independent of the recursion)."""
    if k == 1:
        return 0.0
    return float(special.binom(1.0 + beta, k) * (-1) ** k / (1.0 + beta))


def generating_F(beta: float, s):
    """F(s) = s + (1 - s)^(1+beta) / (1+beta) on [0, 1]."""
    s = np.asarray(s, dtype=float)
    if np.any((s < 0) | (s > 1)):
        raise DomainError("generating function argument must lie in [0, 1]")
    out = s + (1.0 - s) ** (1.0 + beta) / (1.0 + beta)
    return out if out.ndim else float(out)


def generating_G(beta: float, s):
    """G(s) = F(1 - s) - (1 - s) = s^(1+beta) / (1+beta) on [0, 1]."""
    s = np.asarray(s, dtype=float)
    if np.any((s < 0) | (s > 1)):
        raise DomainError("argument must lie in [0, 1]")
    out = s ** (1.0 + beta) / (1.0 + beta)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class OffspringLaw:
    """Critical offspring law in the domain of attraction of a (1+beta)-stable law.

    ``pmf[k]`` and ``survival[k] = P(K > k)`` are cached for k < cache_size.
    The survival function has the closed form ``(-1)^(k+1) binom(beta, k)/(1+beta)``
    for k >= 1, so truncated sums can be completed exactly.
    """

    beta: float
    cache_size: int = 1 << 16
    pmf: np.ndarray = field(init=False, repr=False)
    survival: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        b = self.beta
        if not 0.0 < b < 1.0:
            raise DomainError(f"beta must lie in (0, 1), got {b}")
        n = self.cache_size
        k = np.arange(n, dtype=float)
        pmf = np.empty(n)
        pmf[0], pmf[1] = 1 / (1 + b), 0.0
        pmf[2:] = 0.5 * b * np.cumprod(np.r_[1.0, (k[3:] - 2 - b) / k[3:]])
        surv = np.empty(n)
        surv[:2] = b / (1 + b)
        surv[2:] = surv[1] * np.cumprod((k[2:] - 1 - b) / k[2:])
        pmf.setflags(write=False)
        surv.setflags(write=False)
        object.__setattr__(self, "pmf", pmf)
        object.__setattr__(self, "survival", surv)

    @property
    def tail_index(self) -> float:
        """Exponent of the pmf decay p_k ~ c k^(-(2+beta))."""
        return 2.0 + self.beta

    @property
    def tail_constant(self) -> float:
        """c in P(K > k) ~ c k^(-(1+beta))."""
        return 1.0 / ((1 + self.beta) * abs(math.gamma(-self.beta)))

    def mass_with_tail(self) -> float:
        """Truncated pmf sum completed by the exact survival tail."""
        return float(math.fsum(self.pmf) + self.survival[-1])

    def mean_with_tail(self) -> float:
        """Truncated mean plus the exact tail sum of k p_k beyond the cache."""
        b, m = self.beta, self.cache_size - 1
        k = np.arange(self.cache_size)
        # sum_{k > M} k p_k = (-1)^(M-1) binom(beta - 1, M - 1) = prod_{j<M} (j - beta)/j
        j = np.arange(1, m)
        tail = math.exp(math.fsum(np.log((j - b) / j)))
        return float(math.fsum(k * self.pmf) + tail)

    def sample(self, rng: np.random.Generator, size=None):
        return sample_offspring(self, rng, size)


def sample_offspring(law: OffspringLaw, rng: np.random.Generator, size=None):
    """Inversion sampling: K = #{k >= 0 : P(K > k) >= U}.

    Beyond the cache the survival function is continued by its power law
    ``S(k) ~ c k^(-(1+beta))`` with c matched at the cache boundary.
    """
    u = 1.0 - np.asarray(rng.uniform(size=size))
    n = law.cache_size
    count = n - np.searchsorted(law.survival[::-1], u, side="left")
    far = u <= law.survival[-1]
    if np.any(far):
        c = law.survival[-1] * (n - 1) ** (1 + law.beta)
        cont = np.floor((c / u) ** (1 / (1 + law.beta))) + 1
        count = np.where(far, np.maximum(cont, n), count)
    count = count.astype(np.int64)
    return count if count.ndim else int(count)


# ---------------------------------------------------------------------------
# particles


@dataclass(frozen=True)
class Domain:
    """Cube [0, side)^dim; periodic when ``torus`` is set, otherwise unbounded motion."""

    side: float
    dim: int
    torus: bool = True

    def __post_init__(self):
        if self.side < 0:
            raise DomainError("domain side must be nonnegative")

    @property
    def volume(self) -> float:
        return float(self.side) ** self.dim


@dataclass
class ParticleSet:
    positions: np.ndarray
    domain: Domain

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, self.domain.dim)

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    def pair(self, phi: RadialFunction) -> float:
        """<N, phi>."""
        return float(np.sum(evaluate_phi(phi, self.positions, self.domain)))

    def copy(self) -> "ParticleSet":
        return ParticleSet(self.positions.copy(), self.domain)


def evaluate_phi(phi: RadialFunction, x: np.ndarray, domain: Domain) -> np.ndarray:
    if domain.torus:
        return phi.on_torus(x, domain.side)
    return phi(x)


def init_poisson(domain: Domain, rng: np.random.Generator) -> ParticleSet:
    """Poisson field with unit intensity on the domain box."""
    n = rng.poisson(domain.volume)
    return ParticleSet(rng.uniform(0.0, domain.side, size=(n, domain.dim)), domain)


@dataclass(frozen=True)
class SystemSpec:
    motion: MotionSpec
    offspring: OffspringLaw
    branch_rate: float
    domain: Domain
    time_step: float = 1.0
    max_particles: int = 20_000_000

    def __post_init__(self):
        if not self.time_step > 0:
            raise DomainError("time step must be positive")
        if self.branch_rate < 0:
            raise DomainError("branching rate must be nonnegative")
        if self.motion.dim != self.domain.dim:
            raise DomainError("motion and domain dimensions differ")


def default_warmup(spec: SystemSpec) -> float:
    """tau_w = L^alpha / 4."""
    return spec.domain.side ** spec.motion.alpha / 4.0


@dataclass
class Trajectory:
    """Per-step record of one replica.

    ``pairings[j, i]`` is <N_{t_i}, phi_j>; ``occupation[j, i]`` is the
    integral of <N_s, phi_j> over [0, t_i].
    """

    times: np.ndarray
    pairings: np.ndarray
    occupation: np.ndarray
    final: ParticleSet
    complete: bool = True
    replica: int = 0


# ---------------------------------------------------------------------------
# dynamics


def _step(spec: SystemSpec, x: np.ndarray, h: float, rng, phis, occ) -> np.ndarray:
    """Advance all particles over a step of length h, accumulating occupation in ``occ``.

    Residual lifetimes are redrawn at the step start (memorylessness).
    Each particle path segment contributes a trapezoid between its endpoints;
    segments break at branching times.
    """
    motion, dom = spec.motion, spec.domain
    n = x.shape[0]
    if spec.branch_rate > 0:
        clock = rng.exponential(1.0 / spec.branch_rate, size=n)
    else:
        clock = np.full(n, np.inf)
    due = clock <= h
    calm = ~due
    x_calm = x[calm] + isotropic_increments(motion, np.full(calm.sum(), h), rng)
    if phis:
        f0 = [evaluate_phi(p, x[calm], dom) for p in phis]
        f1 = [evaluate_phi(p, x_calm, dom) for p in phis]
        for j in range(len(phis)):
            occ[j] += 0.5 * h * (f0[j].sum() + f1[j].sum())
    finished = [x_calm]
    pos, start, end = x[due], np.zeros(due.sum()), clock[due]
    fstart = [evaluate_phi(p, pos, dom) for p in phis]
    total = n
    while pos.shape[0]:
        span = end - start
        pos = pos + isotropic_increments(motion, span, rng)
        fend = [evaluate_phi(p, pos, dom) for p in phis]
        for j in range(len(phis)):
            occ[j] += 0.5 * np.dot(span, fstart[j] + fend[j])
        kids = sample_offspring(spec.offspring, rng, pos.shape[0])
        total += int(kids.sum()) - pos.shape[0]
        if total > spec.max_particles:
            raise ResourceError(f"population exceeded {spec.max_particles} particles")
        pos = np.repeat(pos, kids, axis=0)
        start = np.repeat(end, kids)
        fstart = [np.repeat(f, kids) for f in fend]
        end = start + (rng.exponential(1.0 / spec.branch_rate, size=start.shape[0])
                       if spec.branch_rate > 0 else np.inf)
        done = end > h
        if np.any(done):
            span = h - start[done]
            moved = pos[done] + isotropic_increments(motion, span, rng)
            for j, p in enumerate(phis):
                occ[j] += 0.5 * np.dot(span, fstart[j][done] + evaluate_phi(p, moved, dom))
            finished.append(moved)
            keep = ~done
            pos, start, end = pos[keep], start[keep], end[keep]
            fstart = [f[keep] for f in fstart]
    out = np.concatenate(finished, axis=0) if len(finished) > 1 else finished[0]
    if dom.torus and dom.side > 0:
        out = np.mod(out, dom.side)
    return out


def _step_grid(horizon: float, h: float) -> np.ndarray:
    n = max(1, int(math.ceil(horizon / h - 1e-9)))
    times = np.minimum(np.arange(n + 1) * h, horizon)
    times[-1] = horizon
    return times


def warmup_to_equilibrium(spec: SystemSpec, particles: ParticleSet, tau_w: float,
                          rng: np.random.Generator) -> ParticleSet:
    """Run the dynamics for ``tau_w`` from the given state (approximate equilibrium).

    The equilibrium exists only when d beta > alpha; otherwise the system
    goes locally extinct and a ``DomainError`` is raised.
    """
    d, alpha, beta = spec.motion.dim, spec.motion.alpha, spec.offspring.beta
    if not d * beta > alpha:
        raise DomainError(f"no equilibrium: d*beta = {d * beta} <= alpha = {alpha}")
    if tau_w < 0:
        raise DomainError("warm-up time must be nonnegative")
    if tau_w == 0:
        return particles
    x = particles.positions
    times = _step_grid(tau_w, spec.time_step)
    for h in np.diff(times):
        try:
            x = _step(spec, x, float(h), rng, [], None)
        except ResourceError as exc:
            exc.partial = ParticleSet(x, particles.domain)
            raise
    return ParticleSet(x, particles.domain)


def simulate_occupation(spec: SystemSpec, initial: ParticleSet, horizon: float,
                        phis: Sequence[RadialFunction], rng: np.random.Generator,
                        replica: int = 0) -> Trajectory:
    """Evolve the system over [0, horizon], recording <N_s, phi> and its time integral.

    Motion increments are exact in law at any step; branching happens at the
    exact exponential event times.  On a resource overflow the
    ``ResourceError.partial`` attribute holds the trajectory so far with
    ``complete=False``.
    """
    if not horizon > 0:
        raise DomainError("horizon must be positive")
    phis = list(phis)
    times = _step_grid(horizon, spec.time_step)
    m = len(phis)
    pairings = np.zeros((m, len(times)))
    occupation = np.zeros((m, len(times)))
    x = initial.positions
    dom = initial.domain
    for j, p in enumerate(phis):
        pairings[j, 0] = evaluate_phi(p, x, dom).sum()
    occ = np.zeros(m)
    for i, h in enumerate(np.diff(times), start=1):
        try:
            x = _step(spec, x, float(h), rng, phis, occ)
        except ResourceError as exc:
            exc.partial = Trajectory(times[:i], pairings[:, :i], occupation[:, :i],
                                     ParticleSet(x, dom), complete=False, replica=replica)
            raise
        occupation[:, i] = occ
        for j, p in enumerate(phis):
            pairings[j, i] = evaluate_phi(p, x, dom).sum()
    return Trajectory(times, pairings, occupation, ParticleSet(x, dom), True, replica)


# ---------------------------------------------------------------------------
# replicas and output


def replica_rng(seed: int, replica: int) -> np.random.Generator:
    """Independent stream for one replica; unaffected by the total replica count."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(replica),)))


TRAJECTORY_COLUMNS = ("replica", "t", "phi_id", "N_phi", "occ_phi")


def write_trajectory_csv(path, trajectories: Sequence[Trajectory], phi_ids: Sequence[str],
                         comment: str | None = None):
    """CSV with columns (replica, t, phi_id, N_phi, occ_phi), floats at 17 digits.

    ``comment`` goes on a leading ``# ...`` line (used for the config hash).
    """
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for traj in trajectories:
            for j, name in enumerate(phi_ids):
                for t, n_phi, occ in zip(traj.times, traj.pairings[j], traj.occupation[j]):
                    w.writerow([traj.replica, f"{t:.17g}", name, f"{n_phi:.17g}", f"{occ:.17g}"])
