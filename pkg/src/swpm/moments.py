"""
Raw and central velocity moments of weighted particle sets.

Moments are produced by a compiled two-pass kernel: the first pass
accumulates the raw sums (total weight, momentum, momentum flux, raw heat
flux, energy, fourth moment), the second pass accumulates deviations from the
drift velocity (pressure tensor, central heat flux, temperature). Every sum
uses Neumaier-compensated accumulation in input order.

Inside the package the moments travel as flat ``float64`` vectors of length
:data:`K` so that compiled code can exchange them cheaply; :class:`MomentSet`
is the user-facing view.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DegenerateInputError, ParameterError

# flat layout
RHO = 0
MOM = slice(1, 4)
PI = slice(4, 13)
H = slice(13, 16)
E = 16
S = 17
V = slice(18, 21)
P = slice(21, 30)
Q = slice(30, 33)
T = 33
K = 34
N_RAW = 18  # rho, momentum, Pi, h, E, s

SCALAR_INDEX: dict[str, int] = {"rho": RHO, "E": E, "s": S, "T": T}
for _a in range(3):
    SCALAR_INDEX[f"M{_a + 1}"] = MOM.start + _a
    SCALAR_INDEX[f"h{_a + 1}"] = H.start + _a
    SCALAR_INDEX[f"V{_a + 1}"] = V.start + _a
    SCALAR_INDEX[f"q{_a + 1}"] = Q.start + _a
    for _b in range(3):
        SCALAR_INDEX[f"Pi{_a + 1}{_b + 1}"] = PI.start + 3 * _a + _b
        SCALAR_INDEX[f"P{_a + 1}{_b + 1}"] = P.start + 3 * _a + _b


@njit(inline="always")
def _nadd(acc, comp, k, x):
    s = acc[k]
    t = s + x
    if abs(s) >= abs(x):
        comp[k] += (s - t) + x
    else:
        comp[k] += (x - t) + s
    acc[k] = t


@njit(cache=True)
def moments_of(v, g, idx):
    """Flat moment vector of the particles ``v[idx], g[idx]``."""
    out = np.empty(K)
    acc = np.zeros(N_RAW)
    comp = np.zeros(N_RAW)
    for n in range(idx.shape[0]):
        i = idx[n]
        w = g[i]
        x, y, z = v[i, 0], v[i, 1], v[i, 2]
        sq = x * x + y * y + z * z
        _nadd(acc, comp, 0, w)
        _nadd(acc, comp, 1, w * x)
        _nadd(acc, comp, 2, w * y)
        _nadd(acc, comp, 3, w * z)
        _nadd(acc, comp, 4, w * x * x)
        _nadd(acc, comp, 5, w * x * y)
        _nadd(acc, comp, 6, w * x * z)
        _nadd(acc, comp, 7, w * y * y)
        _nadd(acc, comp, 8, w * y * z)
        _nadd(acc, comp, 9, w * z * z)
        _nadd(acc, comp, 10, 0.5 * w * x * sq)
        _nadd(acc, comp, 11, 0.5 * w * y * sq)
        _nadd(acc, comp, 12, 0.5 * w * z * sq)
        _nadd(acc, comp, 13, w * sq)
        _nadd(acc, comp, 14, w * sq * sq)
    r = acc + comp
    rho = r[0]
    out[RHO] = rho
    out[1], out[2], out[3] = r[1], r[2], r[3]
    out[4], out[5], out[6] = r[4], r[5], r[6]
    out[7], out[8], out[9] = r[5], r[7], r[8]
    out[10], out[11], out[12] = r[6], r[8], r[9]
    out[13], out[14], out[15] = r[10], r[11], r[12]
    out[E] = r[13]
    out[S] = r[14]
    if not rho > 0.0:
        for k in range(18, K):
            out[k] = np.nan
        return out
    vx, vy, vz = r[1] / rho, r[2] / rho, r[3] / rho
    out[18], out[19], out[20] = vx, vy, vz

    acc2 = np.zeros(10)
    comp2 = np.zeros(10)
    for n in range(idx.shape[0]):
        i = idx[n]
        w = g[i]
        cx, cy, cz = v[i, 0] - vx, v[i, 1] - vy, v[i, 2] - vz
        sq = cx * cx + cy * cy + cz * cz
        _nadd(acc2, comp2, 0, w * cx * cx)
        _nadd(acc2, comp2, 1, w * cx * cy)
        _nadd(acc2, comp2, 2, w * cx * cz)
        _nadd(acc2, comp2, 3, w * cy * cy)
        _nadd(acc2, comp2, 4, w * cy * cz)
        _nadd(acc2, comp2, 5, w * cz * cz)
        _nadd(acc2, comp2, 6, 0.5 * w * cx * sq)
        _nadd(acc2, comp2, 7, 0.5 * w * cy * sq)
        _nadd(acc2, comp2, 8, 0.5 * w * cz * sq)
        _nadd(acc2, comp2, 9, w * sq)
    c = acc2 + comp2
    out[21], out[22], out[23] = c[0], c[1], c[2]
    out[24], out[25], out[26] = c[1], c[3], c[4]
    out[27], out[28], out[29] = c[2], c[4], c[5]
    out[30], out[31], out[32] = c[6], c[7], c[8]
    out[T] = c[9] / (3.0 * rho)
    return out


@njit(cache=True)
def moments_of_range(v, g, m):
    return moments_of(v, g, np.arange(m))


@dataclass(frozen=True)
class MomentSet:
    """Velocity moments of a weighted particle collection (unit particle mass)."""

    rho: float
    momentum: np.ndarray
    drift_velocity: np.ndarray
    momentum_flux: np.ndarray
    pressure: np.ndarray
    energy: float
    temperature: float
    raw_heat_flux: np.ndarray
    central_heat_flux: np.ndarray
    fourth_moment: float

    @classmethod
    def from_flat(cls, x) -> MomentSet:
        x = np.asarray(x, dtype=np.float64)
        return cls(
            rho=float(x[RHO]),
            momentum=x[MOM].copy(),
            drift_velocity=x[V].copy(),
            momentum_flux=x[PI].reshape(3, 3).copy(),
            pressure=x[P].reshape(3, 3).copy(),
            energy=float(x[E]),
            temperature=float(x[T]),
            raw_heat_flux=x[H].copy(),
            central_heat_flux=x[Q].copy(),
            fourth_moment=float(x[S]),
        )

    @classmethod
    def from_raw(cls, rho, momentum, momentum_flux, raw_heat_flux, energy, fourth_moment) -> MomentSet:
        """Build a set from raw moments; central ones follow from the raw/central identities."""
        rho = float(rho)
        if not rho > 0.0:
            raise DegenerateInputError("total weight must be positive")
        M = np.asarray(momentum, dtype=np.float64)
        Pi = np.asarray(momentum_flux, dtype=np.float64).reshape(3, 3)
        h = np.asarray(raw_heat_flux, dtype=np.float64)
        Vd = M / rho
        Pt = Pi - rho * np.outer(Vd, Vd)
        Tt = np.trace(Pt) / (3.0 * rho)
        vv = Vd @ Vd
        q = h - Pt @ Vd - 0.5 * rho * Vd * vv - 1.5 * rho * Tt * Vd
        return cls(rho, M, Vd, Pi, Pt, float(energy), float(Tt), h, q, float(fourth_moment))

    def to_flat(self) -> np.ndarray:
        x = np.empty(K)
        x[RHO] = self.rho
        x[MOM] = self.momentum
        x[PI] = np.ravel(self.momentum_flux)
        x[H] = self.raw_heat_flux
        x[E] = self.energy
        x[S] = self.fourth_moment
        x[V] = self.drift_velocity
        x[P] = np.ravel(self.pressure)
        x[Q] = self.central_heat_flux
        x[T] = self.temperature
        return x

    def scalar(self, name: str) -> float:
        """Single component by name, e.g. ``"Pi11"``, ``"h2"`` or ``"s"``."""
        return float(self.to_flat()[SCALAR_INDEX[name]])

    def identity_residuals(self) -> dict[str, float]:
        """Relative residuals of the raw/central identities (all ~0 for a consistent set)."""
        rho, Vd, Pt = self.rho, self.drift_velocity, self.pressure
        vv = float(Vd @ Vd)
        scale_e = max(abs(self.energy), 1e-300)
        scale_pi = max(np.abs(self.momentum_flux).max(), 1e-300)
        q_pred = (
            self.raw_heat_flux
            - Pt @ Vd
            - 0.5 * rho * Vd * vv
            - 1.5 * rho * self.temperature * Vd
        )
        # every term of the heat-flux identity is of order rho * speed^3
        speed = math.sqrt(max(self.energy, 0.0) / rho) if rho > 0 else 0.0
        scale_q = max(rho * speed**3, 1e-300)
        return {
            "energy": abs(self.energy - (rho * vv + 3.0 * rho * self.temperature)) / scale_e,
            "pressure": float(np.abs(Pt - (self.momentum_flux - rho * np.outer(Vd, Vd))).max()) / scale_pi,
            "heat_flux": float(np.abs(self.central_heat_flux - q_pred).max()) / scale_q,
            "trace": abs(np.trace(Pt) - 3.0 * rho * self.temperature) / max(abs(np.trace(Pt)), 1e-300),
            "symmetry": float(np.abs(Pt - Pt.T).max()) / scale_pi,
        }


MOMENT_FIELDS = (
    "rho",
    "momentum",
    "drift_velocity",
    "momentum_flux",
    "pressure",
    "energy",
    "temperature",
    "raw_heat_flux",
    "central_heat_flux",
    "fourth_moment",
)


def compute_moments(particles_or_velocities, weights=None) -> MomentSet:
    """Moments of a particle list, or of parallel velocity/weight arrays.

    Raises :class:`DegenerateInputError` for an empty set or zero total weight.
    """
    if weights is None:
        plist = list(particles_or_velocities)
        if not plist:
            raise DegenerateInputError("no particles")
        v = np.array([p.velocity for p in plist], dtype=np.float64).reshape(-1, 3)
        g = np.array([p.weight for p in plist], dtype=np.float64)
    else:
        v = np.ascontiguousarray(particles_or_velocities, dtype=np.float64).reshape(-1, 3)
        g = np.ascontiguousarray(weights, dtype=np.float64).reshape(-1)
    if g.shape[0] == 0:
        raise DegenerateInputError("no particles")
    flat = moments_of_range(v, g, g.shape[0])
    if not flat[RHO] > 0.0:
        raise DegenerateInputError("total weight is zero")
    return MomentSet.from_flat(flat)


def state_moments(state) -> MomentSet:
    return compute_moments(state.velocities, state.weights)


def aggregate_group_moments(groups) -> MomentSet:
    """System moments from per-group moments.

    Raw moments add across groups; drift velocity, pressure tensor, temperature
    and central heat flux are rebuilt from the summed raw moments.
    """
    groups = list(groups)
    if not groups:
        raise DegenerateInputError("no groups to aggregate")
    for gm in groups:
        if not gm.rho > 0.0:
            raise DegenerateInputError("every group needs positive total weight")
    raw = np.array([gm.to_flat()[:N_RAW] for gm in groups])
    tot = np.array([math.fsum(raw[:, k]) for k in range(N_RAW)])
    return MomentSet.from_raw(tot[RHO], tot[MOM], tot[PI], tot[H], tot[E], tot[S])


def relative_moment_error(before: MomentSet, after: MomentSet, which: str) -> float:
    """``||after - before||_2 / ||before||_2`` for one moment (Frobenius norm for tensors).

    Returns NaN (the "undefined" sentinel) when the reference norm is zero.
    """
    if which not in MOMENT_FIELDS:
        raise ParameterError(f"unknown moment {which!r}; expected one of {MOMENT_FIELDS}")
    a = np.ravel(np.asarray(getattr(before, which), dtype=np.float64))
    b = np.ravel(np.asarray(getattr(after, which), dtype=np.float64))
    ref = float(np.linalg.norm(a))
    if ref == 0.0:
        return math.nan
    return float(np.linalg.norm(b - a)) / ref
