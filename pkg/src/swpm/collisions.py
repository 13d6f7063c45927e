"""
Event-driven collision simulation for the stochastic weighted particle method.

Waiting times are drawn from the majorant frequency ``m (m-1) max_weight / (2 c)``,
where ``c`` is the transferred fraction of the smaller weight (``c = 1/2`` for
the weighted method, ``c = 1`` for equal-weight DSMC). A uniformly drawn
unordered pair is accepted with probability ``max(g_i, g_j) / max_weight``;
rejected pairs are null collisions that only advance the clock.
"""

from __future__ import annotations

import enum
import math
import time as _time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import ContractViolation, DegenerateInputError, ParameterError
from .moments import moments_of_range
from .reduction import ReductionReport, ReductionScheme, reduce_system

HALF_TRANSFER = 0.5
FULL_TRANSFER = 1.0


class CollisionKernelSpec(enum.Enum):
    """Collision kernel ``B(v, w, theta)``; only isotropic Maxwell molecules are implemented."""

    CONSTANT_MAXWELL = "constant_maxwell"

    def value(self, v=None, w=None, theta=None) -> float:
        return 1.0 / (4.0 * math.pi)

    @property
    def sphere_integral(self) -> float:
        # integral of B over the unit sphere
        return 1.0


@dataclass
class CollisionEvent:
    i: int
    j: int
    theta: np.ndarray
    dt: float
    gamma: float
    is_null: bool


def post_collision_velocities(v, w, theta) -> tuple[np.ndarray, np.ndarray]:
    """Elastic post-collision velocities ``((v+w) -+ theta |w-v|) / 2``."""
    v = np.asarray(v, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if abs(float(np.linalg.norm(theta)) - 1.0) > 1e-12:
        raise ParameterError("theta must be a unit vector")
    u = float(np.linalg.norm(w - v))
    return 0.5 * (v + w - theta * u), 0.5 * (v + w + theta * u)


def weight_transfer(gi: float, gj: float) -> float:
    """Transferred weight ``min(gi, gj) / 2``."""
    if not (gi > 0.0 and gj > 0.0):
        raise ParameterError(f"weights must be positive, got {gi}, {gj}")
    return 0.5 * min(gi, gj)


@njit(cache=True)
def _place(v, g, m, slot, x, y, z, w):
    # reuse a slot whose weight dropped to zero, otherwise append
    if g[slot] <= 0.0:
        g[slot] = w
        v[slot, 0], v[slot, 1], v[slot, 2] = x, y, z
        return m
    g[m] = w
    v[m, 0], v[m, 1], v[m, 2] = x, y, z
    return m + 1


@njit(cache=True)
def _collide_pair(v, g, m, i, j, gamma, tx, ty, tz):
    vx, vy, vz = v[i, 0], v[i, 1], v[i, 2]
    wx, wy, wz = v[j, 0], v[j, 1], v[j, 2]
    u = math.sqrt((wx - vx) ** 2 + (wy - vy) ** 2 + (wz - vz) ** 2)
    sx, sy, sz = vx + wx, vy + wy, vz + wz
    g[i] -= gamma
    g[j] -= gamma
    if g[i] < 0.0:
        g[i] = 0.0
    if g[j] < 0.0:
        g[j] = 0.0
    m = _place(v, g, m, i, 0.5 * (sx - tx * u), 0.5 * (sy - ty * u), 0.5 * (sz - tz * u), gamma)
    m = _place(v, g, m, j, 0.5 * (sx + tx * u), 0.5 * (sy + ty * u), 0.5 * (sz + tz * u), gamma)
    return m


@njit(cache=True)
def _draw_dt(m, max_w, frac, rng):
    nu = m * (m - 1.0) * max_w / (2.0 * frac)
    return -math.log(1.0 - rng.random()) / nu


@njit(cache=True)
def _pair_event(v, g, m, max_w, frac, rng, ev):
    """Pick a pair, accept or reject, collide. ``ev`` receives i, j, theta, gamma, null flag."""
    i = int(rng.random() * m)
    if i >= m:
        i = m - 1
    j = i
    while j == i:
        j = int(rng.random() * m)
        if j >= m:
            j = m - 1
    gi = g[i]
    gj = g[j]
    ev[0] = i
    ev[1] = j
    ev[2] = 0.0
    ev[3] = 0.0
    ev[4] = 0.0
    ev[5] = 0.0
    ev[6] = 1.0
    if rng.random() * max_w >= max(gi, gj):
        return m
    gamma = frac * min(gi, gj)
    if not gamma > 0.0:
        return m
    z = 2.0 * rng.random() - 1.0
    phi = 2.0 * math.pi * rng.random()
    r = math.sqrt(max(0.0, 1.0 - z * z))
    tx, ty, tz = r * math.cos(phi), r * math.sin(phi), z
    ev[2], ev[3], ev[4] = tx, ty, tz
    ev[5] = gamma
    ev[6] = 0.0
    return _collide_pair(v, g, m, i, j, gamma, tx, ty, tz)


@njit(cache=True)
def collide_until(v, g, m, max_w, t, t_stop, m_limit, frac, rng, counts):
    """Run events until the clock would pass ``t_stop`` or ``m >= m_limit``.

    Returns ``(m, t, status)``; status 0 means the clock was set to ``t_stop``
    (the crossing event is discarded), 1 means the particle limit was hit.
    """
    ev = np.empty(7)
    while m < m_limit:
        if m < 2:
            return m, t_stop, 0
        dt = _draw_dt(m, max_w, frac, rng)
        if t + dt > t_stop:
            return m, t_stop, 0
        t += dt
        m = _pair_event(v, g, m, max_w, frac, rng, ev)
        if ev[6] == 0.0:
            counts[0] += 1
        else:
            counts[1] += 1
    return m, t, 1


@njit(cache=True)
def _one_event(v, g, m, max_w, frac, rng, ev):
    dt = _draw_dt(m, max_w, frac, rng)
    m = _pair_event(v, g, m, max_w, frac, rng, ev)
    return m, dt


def apply_collision(state, event: CollisionEvent) -> None:
    """Apply a non-null event in place: weights of i, j drop by gamma, two particles of weight gamma appear."""
    if event.is_null:
        raise ContractViolation("cannot apply a null event")
    i, j = int(event.i), int(event.j)
    if not (0 <= i < state.m and 0 <= j < state.m and i != j):
        raise ContractViolation(f"invalid pair ({i}, {j}) for {state.m} particles")
    gi, gj = state.g[i], state.g[j]
    if event.gamma > min(gi, gj) or not event.gamma >= 0.0:
        raise ContractViolation(f"transferred weight {event.gamma} exceeds min({gi}, {gj})")
    theta = np.asarray(event.theta, dtype=np.float64)
    if abs(float(np.linalg.norm(theta)) - 1.0) > 1e-12:
        raise ParameterError("theta must be a unit vector")
    if state.v.shape[0] < state.m + 2:
        state.reserve(max(2 * state.v.shape[0], state.m + 2))
    state.m = _collide_pair(state.v, state.g, state.m, i, j, float(event.gamma), *map(float, theta))


def majorant_frequency(state, transfer_fraction: float = HALF_TRANSFER) -> float:
    """Upper bound ``m (m-1) max_weight / (2 c)`` of the stochastic collision frequency."""
    if state.m < 2:
        raise DegenerateInputError("at least two particles are needed for a collision")
    return state.m * (state.m - 1.0) * state.max_weight / (2.0 * transfer_fraction)


def advance_one_collision(
    state,
    kernel: CollisionKernelSpec,
    rng,
    transfer_fraction: float = HALF_TRANSFER,
) -> CollisionEvent:
    """Advance the clock by one majorant waiting time and try one pair collision."""
    if kernel is not CollisionKernelSpec.CONSTANT_MAXWELL:
        raise ParameterError(f"unsupported collision kernel {kernel}")
    if state.m < 2:
        raise DegenerateInputError("at least two particles are needed for a collision")
    if state.v.shape[0] < state.m + 2:
        state.reserve(max(2 * state.v.shape[0], state.m + 2))
    ev = np.empty(7)
    m, dt = _one_event(state.v, state.g, state.m, state.max_weight, transfer_fraction, rng.generator, ev)
    state.m = m
    state.time += dt
    return CollisionEvent(int(ev[0]), int(ev[1]), ev[2:5].copy(), dt, float(ev[5]), bool(ev[6]))


@dataclass
class ReductionController:
    """Triggers a reduction once the particle count reaches ``trigger_factor * m0``."""

    scheme: ReductionScheme
    m0: int
    trigger_factor: float = 4.0
    target_factor: float = 0.25
    keep_reports: bool = False
    reports: list[ReductionReport] = field(default_factory=list)
    count: int = 0

    def __post_init__(self):
        self.scheme = ReductionScheme.parse(self.scheme)
        if not self.trigger_factor > 1.0:
            raise ParameterError("trigger factor must exceed 1")
        if not 0.0 < self.target_factor < self.trigger_factor:
            raise ParameterError("target factor must lie in (0, trigger factor)")

    @property
    def trigger_count(self) -> int:
        return max(2, math.ceil(self.trigger_factor * self.m0))

    @property
    def target_count(self) -> int:
        return max(1, round(self.target_factor * self.m0))

    def __call__(self, state) -> ReductionReport:
        report = reduce_system(state, self.scheme, self.target_count)
        self.count += 1
        if self.keep_reports:
            self.reports.append(report)
        return report


class CollisionEngine:
    """Drives one stochastic system through time, reducing and recording along the way."""

    def __init__(
        self,
        rng,
        kernel: CollisionKernelSpec = CollisionKernelSpec.CONSTANT_MAXWELL,
        reducer: ReductionController | None = None,
        transfer_fraction: float = HALF_TRANSFER,
        max_reductions: int | None = None,
    ):
        if kernel is not CollisionKernelSpec.CONSTANT_MAXWELL:
            raise ParameterError(f"unsupported collision kernel {kernel}")
        self.rng = rng
        self.kernel = kernel
        self.reducer = reducer
        self.transfer_fraction = float(transfer_fraction)
        self.max_reductions = max_reductions
        self.counts = np.zeros(2, dtype=np.int64)  # accepted, null
        self.collision_seconds = 0.0
        self.reduction_seconds = 0.0
        self.records: list[tuple[float, np.ndarray]] = []

    @property
    def stopped(self) -> bool:
        return self.max_reductions is not None and self.reducer is not None and self.reducer.count >= self.max_reductions

    def record(self, state) -> None:
        self.records.append((state.time, moments_of_range(state.v, state.g, state.m)))

    def run_until(self, state, t_end: float, record_times=()) -> object:
        """Advance ``state`` to ``t_end``, recording flat moments at ``record_times``.

        Stops early (with ``state.time < t_end``) once ``max_reductions`` reductions happened.
        """
        if t_end < state.time:
            raise ParameterError(f"t_end={t_end} lies before the current time {state.time}")
        stops = sorted(float(t) for t in record_times if state.time < t <= t_end)
        if any(t == state.time for t in record_times):
            self.record(state)
        wanted = set(stops)
        if not stops or stops[-1] < t_end:
            stops.append(float(t_end))
        gen = self.rng.generator
        frac = self.transfer_fraction
        for stop in stops:
            while True:
                if self.reducer is not None:
                    if state.m >= self.reducer.trigger_count:
                        self._reduce(state)
                        if self.stopped:
                            return state
                    state.reserve(self.reducer.trigger_count + 2)
                    limit = self.reducer.trigger_count
                else:
                    state.reserve(state.m + 2)
                    limit = state.v.shape[0] - 1
                t0 = _time.perf_counter()
                m, t, status = collide_until(
                    state.v, state.g, state.m, state.max_weight, state.time, stop, limit, frac, gen, self.counts
                )
                self.collision_seconds += _time.perf_counter() - t0
                state.m = int(m)
                state.time = float(t)
                if status == 0:
                    break
                if self.reducer is None:
                    state.reserve(2 * state.v.shape[0])
            if stop in wanted:
                self.record(state)
        return state

    def _reduce(self, state) -> None:
        t0 = _time.perf_counter()
        m_before = state.m
        self.reducer(state)
        self.reduction_seconds += _time.perf_counter() - t0
        if state.m >= self.reducer.trigger_count or state.m >= m_before:
            raise ContractViolation(f"reduction left {state.m} of {m_before} particles")


def run_until(state, t_end: float, kernel: CollisionKernelSpec, rng, reducer=None, record_times=()):
    """Functional wrapper around :meth:`CollisionEngine.run_until`; returns the engine."""
    engine = CollisionEngine(rng, kernel, reducer)
    engine.run_until(state, t_end, record_times)
    return engine


def exact_frequency(state, transfer_fraction: float = HALF_TRANSFER) -> float:
    """Exact total stochastic collision frequency ``sum_{i<j} g_i g_j / gamma_ij`` (O(m^2))."""
    g = state.weights
    gmax = np.maximum.outer(g, g)
    iu = np.triu_indices(g.shape[0], 1)
    return float(gmax[iu].sum() / transfer_fraction)
