"""
Particle containers, seeded random streams and initial-condition samplers.

A stochastic system is stored as a structure of arrays: an ``(capacity, 3)``
velocity block and a ``(capacity,)`` weight block, of which the first ``m``
rows are live. The collision kernels append into the spare capacity in place.

All quantities are dimensionless and every particle has unit mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, ParameterError

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One step of the SplitMix64 output function (Steele, Lea & Flood)."""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class RandomSource:
    """Reproducible random stream backed by the counter-based Philox4x64 generator.

    The wrapped :class:`numpy.random.Generator` can be handed to numba-compiled
    kernels directly; draws made there advance the same state.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & MASK64
        self.generator = np.random.Generator(np.random.Philox(self.seed))

    def substream(self, index: int) -> RandomSource:
        """Independent stream for ensemble ``index``: seed XOR splitmix64(index)."""
        return RandomSource(self.seed ^ splitmix64(int(index) & MASK64))

    def uniform(self, size=None):
        return self.generator.random(size)

    def normal(self, size=None):
        return self.generator.standard_normal(size)

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed})"


@dataclass
class Particle:
    velocity: np.ndarray
    weight: float

    def __post_init__(self):
        self.velocity = np.asarray(self.velocity, dtype=np.float64).reshape(3)
        self.weight = float(self.weight)
        if not (math.isfinite(self.weight) and self.weight >= 0.0):
            raise ParameterError(f"particle weight must be finite and >= 0, got {self.weight}")
        if not np.all(np.isfinite(self.velocity)):
            raise ParameterError("particle velocity must be finite")


@dataclass(frozen=True)
class MixtureSpec:
    """Two-component Maxwellian mixture ``alpha*M(V1,T1) + (1-alpha)*M(V2,T2)``."""

    alpha: float = 0.5
    V1: tuple[float, float, float] = (-2.0, 2.0, 0.0)
    V2: tuple[float, float, float] = (2.0, 0.0, 0.0)
    T1: float = 1.0
    T2: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "V1", tuple(float(x) for x in self.V1))
        object.__setattr__(self, "V2", tuple(float(x) for x in self.V2))
        if len(self.V1) != 3 or len(self.V2) != 3:
            raise ParameterError("drift velocities must be 3-vectors")
        if not 0.0 <= self.alpha <= 1.0:
            raise ParameterError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not (self.T1 > 0.0 and self.T2 > 0.0):
            raise ParameterError(f"temperatures must be positive, got T1={self.T1}, T2={self.T2}")

    @classmethod
    def maxwellian(cls, V=(0.0, 0.0, 0.0), T: float = 1.0) -> MixtureSpec:
        """Degenerate mixture holding a single Maxwellian."""
        return cls(alpha=1.0, V1=tuple(V), V2=tuple(V), T1=T, T2=T)


class SystemState:
    """Live particle set with cached total and maximum weight.

    ``max_weight`` is an upper bound on every live weight, not necessarily the
    exact maximum: collisions only lower weights so the bound stays valid until
    the next reduction, which refreshes it.
    """

    def __init__(self, velocities, weights, time: float = 0.0, capacity: int = 0):
        velocities = np.asarray(velocities, dtype=np.float64).reshape(-1, 3)
        weights = np.asarray(weights, dtype=np.float64).reshape(-1)
        if velocities.shape[0] != weights.shape[0]:
            raise ParameterError("velocities and weights differ in length")
        if np.any(weights < 0.0) or not np.all(np.isfinite(weights)):
            raise ParameterError("weights must be finite and non-negative")
        if not np.all(np.isfinite(velocities)):
            raise ParameterError("velocities must be finite")
        m = weights.shape[0]
        cap = max(int(capacity), m, 2)
        self.v = np.zeros((cap, 3))
        self.g = np.zeros(cap)
        self.v[:m] = velocities
        self.g[:m] = weights
        self.m = m
        self.time = float(time)
        self.refresh()

    @classmethod
    def from_particles(cls, particles, time: float = 0.0) -> SystemState:
        particles = list(particles)
        v = np.array([p.velocity for p in particles], dtype=np.float64).reshape(-1, 3)
        g = np.array([p.weight for p in particles], dtype=np.float64)
        return cls(v, g, time=time)

    @property
    def velocities(self) -> np.ndarray:
        return self.v[: self.m]

    @property
    def weights(self) -> np.ndarray:
        return self.g[: self.m]

    def __len__(self) -> int:
        return self.m

    def particles(self) -> list[Particle]:
        return [Particle(self.v[i].copy(), self.g[i]) for i in range(self.m)]

    def refresh(self) -> None:
        """Recompute the weight caches from the live particles."""
        w = self.weights
        self.total_weight = math.fsum(w) if self.m else 0.0
        self.max_weight = float(w.max()) if self.m else 0.0

    def reserve(self, capacity: int) -> None:
        """Grow storage so at least ``capacity`` particles fit."""
        if capacity <= self.v.shape[0]:
            return
        v = np.zeros((capacity, 3))
        g = np.zeros(capacity)
        v[: self.m] = self.velocities
        g[: self.m] = self.weights
        self.v, self.g = v, g

    def replace(self, velocities: np.ndarray, weights: np.ndarray) -> None:
        """Overwrite the live particles, keeping the clock."""
        n = weights.shape[0]
        self.reserve(n)
        self.v[:n] = velocities
        self.g[:n] = weights
        self.m = n
        self.refresh()

    def copy(self) -> SystemState:
        out = SystemState(self.velocities, self.weights, time=self.time, capacity=self.v.shape[0])
        out.max_weight = self.max_weight
        return out

    def check_invariants(self, rtol: float = 1e-12) -> None:
        """Raise ``AssertionError`` if a cached aggregate is inconsistent."""
        w = self.weights
        exact = math.fsum(w)
        assert abs(exact - self.total_weight) <= rtol * max(abs(exact), 1e-300), (exact, self.total_weight)
        assert self.m == 0 or self.max_weight >= w.max()
        assert np.all(w >= 0.0) and np.all(np.isfinite(w))
        assert np.all(np.isfinite(self.velocities))

    def __repr__(self) -> str:
        return f"SystemState(m={self.m}, total_weight={self.total_weight:.17g}, time={self.time:.6g})"


def sample_maxwellian(V, T: float, rng: RandomSource) -> np.ndarray:
    """Draw one velocity from the Maxwellian with drift ``V`` and temperature ``T``."""
    if not T > 0.0:
        raise ParameterError(f"temperature must be positive, got {T}")
    return np.asarray(V, dtype=np.float64) + math.sqrt(T) * rng.normal(3)


def sample_maxwellian_many(V, T: float, n: int, rng: RandomSource) -> np.ndarray:
    """Vectorised :func:`sample_maxwellian`, returns an ``(n, 3)`` array."""
    if not T > 0.0:
        raise ParameterError(f"temperature must be positive, got {T}")
    return np.asarray(V, dtype=np.float64) + math.sqrt(T) * rng.normal((n, 3))


def sample_unit_sphere(rng: RandomSource) -> np.ndarray:
    """Uniform direction on the unit sphere (Archimedes: uniform z, uniform azimuth)."""
    z = 2.0 * rng.uniform() - 1.0
    phi = 2.0 * math.pi * rng.uniform()
    r = math.sqrt(max(0.0, 1.0 - z * z))
    return np.array([r * math.cos(phi), r * math.sin(phi), z])


def sample_initial_state(spec: MixtureSpec, m0: int, rng: RandomSource, capacity: int = 0) -> SystemState:
    """Draw ``m0`` equal-weight particles (weight ``1/m0``) from the mixture.

    Each particle picks component 1 with probability ``alpha``; the state starts at ``time = 0``.
    """
    m0 = int(m0)
    if m0 < 1:
        raise ParameterError(f"m0 must be >= 1, got {m0}")
    first = rng.uniform(m0) < spec.alpha
    xi = rng.normal((m0, 3))
    v = np.where(
        first[:, None],
        np.asarray(spec.V1) + math.sqrt(spec.T1) * xi,
        np.asarray(spec.V2) + math.sqrt(spec.T2) * xi,
    )
    g = np.full(m0, 1.0 / m0)
    return SystemState(v, g, time=0.0, capacity=capacity)


def require_particles(state: SystemState, minimum: int = 1) -> None:
    if state.m < minimum:
        raise DegenerateInputError(f"operation needs at least {minimum} particle(s), state has {state.m}")
