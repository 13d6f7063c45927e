"""
Reference moment curves for the Maxwell-molecule model with ``B = 1/(4 pi)``.

For Maxwell molecules the moment equations close. With total weight ``rho``,
momentum ``M`` and energy ``E`` conserved, the momentum flux, raw heat flux
and scalar fourth moment obey

    dPi/dt = ((rho E - |M|^2) / 6) I - (rho Pi - M M^T) / 2
    dh/dt  = -(rho/3) h + (1/3) E M - (1/6) Pi M
    ds/dt  = -(rho/3) s + (2/3) E^2 - (1/3) |Pi|_F^2

which integrate in closed form (sums of ``exp(-rho t / 3)``,
``exp(-rho t / 2)`` and ``exp(-rho t)``). These curves are exact for any
initial measure, so they serve as the transient reference; the t -> infinity
limit is the Maxwellian equilibrium fixed by the collision invariants.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .moments import E, H, K, MOM, PI, RHO, S, SCALAR_INDEX, MomentSet
from .particles import MixtureSpec


class ReferenceSource(enum.Enum):
    EQUILIBRIUM_ANALYTIC = "equilibrium_analytic"
    HIERARCHY_ANALYTIC = "hierarchy_analytic"
    ORACLE_RUN = "oracle_run"


@dataclass
class ReferenceMoments:
    """Reference flat moment vectors, one row per time in ``time_grid``."""

    source: ReferenceSource
    time_grid: np.ndarray
    values: np.ndarray  # (len(time_grid), K)

    def __post_init__(self):
        self.time_grid = np.asarray(self.time_grid, dtype=np.float64).reshape(-1)
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1, K)
        if self.values.shape[0] != self.time_grid.shape[0]:
            raise ParameterError("one row of reference values is needed per grid time")

    def series(self, name: str) -> np.ndarray:
        """Time series of a scalar component such as ``"Pi11"``, ``"h2"`` or ``"s"``."""
        return self.values[:, SCALAR_INDEX[name]].copy()

    def moments(self, i: int = -1) -> MomentSet:
        return MomentSet.from_flat(self.values[i])


def _component_raw(V, T):
    """Raw moments (M, Pi, h, E, s) of a unit-weight Maxwellian."""
    V = np.asarray(V, dtype=np.float64)
    vv = float(V @ V)
    Pi = np.outer(V, V) + T * np.eye(3)
    h = 0.5 * V * (vv + 5.0 * T)
    return V, Pi, h, vv + 3.0 * T, 15.0 * T * T + 10.0 * T * vv + vv * vv


def mixture_moments(spec: MixtureSpec) -> MomentSet:
    """Exact moments of the mixture density (unit total weight)."""
    a = spec.alpha
    c1 = _component_raw(spec.V1, spec.T1)
    c2 = _component_raw(spec.V2, spec.T2)
    M, Pi, h, En, s = (a * x + (1.0 - a) * y for x, y in zip(c1, c2))
    return MomentSet.from_raw(1.0, M, Pi, h, En, s)


def maxwellian_moments(rho: float, V, T: float) -> MomentSet:
    M, Pi, h, En, s = _component_raw(V, T)
    return MomentSet.from_raw(rho, rho * M, rho * Pi, rho * h, rho * En, rho * s)


def equilibrium_moment_set(initial: MomentSet) -> MomentSet:
    """Maxwellian with the same weight, momentum and energy as ``initial``."""
    rho = initial.rho
    V = initial.momentum / rho
    T = (initial.energy / rho - float(V @ V)) / 3.0
    if not T > 0.0:
        raise ParameterError(f"equilibrium temperature must be positive, got {T}")
    return maxwellian_moments(rho, V, T)


def equilibrium_moments(spec: MixtureSpec) -> ReferenceMoments:
    """Long-time limit of the mixture, reported at ``t = inf``."""
    eq = equilibrium_moment_set(mixture_moments(spec))
    return ReferenceMoments(ReferenceSource.EQUILIBRIUM_ANALYTIC, [math.inf], eq.to_flat()[None, :])


def hierarchy_flat(initial: MomentSet, times) -> np.ndarray:
    """Closed-form solution of the moment hierarchy; rows are flat moment vectors."""
    times = np.asarray(times, dtype=np.float64).reshape(-1)
    if np.any(times < 0.0):
        raise ParameterError("times must be non-negative")
    rho = initial.rho
    M = initial.momentum
    En = initial.energy
    Pi0 = initial.momentum_flux
    h0 = initial.raw_heat_flux
    s0 = initial.fourth_moment

    Pi_eq = (np.outer(M, M) + (rho * En - float(M @ M)) / 3.0 * np.eye(3)) / rho
    D0 = Pi0 - Pi_eq
    h_eq = (En * M - 0.5 * Pi_eq @ M) / rho
    c = D0 @ M / rho
    s_eq = (2.0 * En * En - float(np.sum(Pi_eq * Pi_eq))) / rho
    a = 4.0 * float(np.sum(Pi_eq * D0)) / rho
    b = float(np.sum(D0 * D0)) / (2.0 * rho)

    out = np.empty((times.shape[0], K))
    for n, t in enumerate(times):
        e3, e2, e1 = math.exp(-rho * t / 3.0), math.exp(-rho * t / 2.0), math.exp(-rho * t)
        Pi = Pi_eq + D0 * e2
        h = h_eq + (h0 - h_eq - c) * e3 + c * e2
        s = s_eq + (s0 - s_eq - a - b) * e3 + a * e2 + b * e1
        out[n] = MomentSet.from_raw(rho, M, Pi, h, En, s).to_flat()
        out[n, RHO], out[n, MOM], out[n, PI], out[n, H], out[n, E], out[n, S] = rho, M, Pi.ravel(), h, En, s
    return out


def hierarchy_moments(spec_or_initial, time_grid) -> ReferenceMoments:
    """Exact transient moments starting from a mixture (or from given initial moments)."""
    initial = mixture_moments(spec_or_initial) if isinstance(spec_or_initial, MixtureSpec) else spec_or_initial
    return ReferenceMoments(ReferenceSource.HIERARCHY_ANALYTIC, time_grid, hierarchy_flat(initial, time_grid))


def hierarchy_rhs(moments: MomentSet) -> dict[str, np.ndarray | float]:
    """Right-hand sides of the closed moment equations at the given moments."""
    rho, M, En, Pi = moments.rho, moments.momentum, moments.energy, moments.momentum_flux
    return {
        "momentum_flux": (rho * En - float(M @ M)) / 6.0 * np.eye(3) - 0.5 * (rho * Pi - np.outer(M, M)),
        "raw_heat_flux": -(rho / 3.0) * moments.raw_heat_flux + En * M / 3.0 - Pi @ M / 6.0,
        "fourth_moment": -(rho / 3.0) * moments.fourth_moment + 2.0 * En * En / 3.0 - float(np.sum(Pi * Pi)) / 3.0,
    }
