"""
Deterministic particle reduction.

Three schemes replace a group by a handful of particles:

``energy``
    two equal-weight particles ``V +- sqrt(3T) e`` with ``e`` the leading
    eigenvector of the pressure tensor; keeps total weight, momentum and energy.
``energy_hf``
    two particles on the line through ``V`` along the central heat flux with
    weights and offsets solved so that the central heat flux is kept as well.
``pthf``
    up to three pairs, one along each eigenvector of the pressure tensor with a
    non-zero eigenvalue. Keeps total weight, momentum, the full pressure tensor
    and the central heat flux, hence also the momentum-flux tensor and the raw
    heat flux of every group and of the whole system.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .clustering import cluster_kernel
from .errors import DegenerateInputError, ImpossibleMomentError, ParameterError
from .linalg import eigh3
from .moments import (
    MOMENT_FIELDS,
    E,
    H,
    MOM,
    P,
    PI,
    Q,
    RHO,
    S,
    T,
    V,
    K,
    MomentSet,
    moments_of,
    relative_moment_error,
)
from .particles import Particle

ZERO_EIG_RTOL = 1e-12
FLOOR = np.finfo(np.float64).tiny


class ReductionScheme(enum.Enum):
    ENERGY = "energy"
    ENERGY_HF = "energy_hf"
    PTHF = "pthf"

    @property
    def code(self) -> int:
        return _CODES[self]

    @property
    def max_emitted(self) -> int:
        return 6 if self is ReductionScheme.PTHF else 2

    @classmethod
    def parse(cls, text) -> ReductionScheme:
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower().replace("-", "_")
        try:
            return _ALIASES[key]
        except KeyError:
            raise ParameterError(f"unknown reduction scheme {text!r}; use energy, energy_hf or pthf") from None


_CODES = {ReductionScheme.ENERGY: 0, ReductionScheme.ENERGY_HF: 1, ReductionScheme.PTHF: 2}
_ALIASES = {
    "energy": ReductionScheme.ENERGY,
    "energy_hf": ReductionScheme.ENERGY_HF,
    "energycentralheatflux": ReductionScheme.ENERGY_HF,
    "energy_central_heat_flux": ReductionScheme.ENERGY_HF,
    "pthf": ReductionScheme.PTHF,
    "pressuretensorcentralheatflux": ReductionScheme.PTHF,
    "pressure_tensor_central_heat_flux": ReductionScheme.PTHF,
}


@njit(cache=True)
def _pair_gamma(rho_share, qhat, lam):
    # positive root of gamma^2 - 2 r gamma - 1 = 0
    if qhat == 0.0:
        return 1.0
    r = math.sqrt(rho_share) * qhat / lam**1.5
    return r + math.hypot(1.0, r)


@njit(cache=True)
def _emit_pair(vd, axis, lam, rho_share, qhat, out_v, out_g, a, b):
    gam = _pair_gamma(rho_share, qhat, lam)
    amp = math.sqrt(lam / rho_share)
    g2 = gam * gam
    for c in range(3):
        out_v[a, c] = vd[c] + gam * amp * axis[c]
        out_v[b, c] = vd[c] - (amp / gam) * axis[c]
    out_g[a] = rho_share / (1.0 + g2)
    out_g[b] = rho_share * (g2 / (1.0 + g2))


@njit(cache=True)
def _fallback_axis(pt):
    lam, qv = eigh3(pt)
    axis = np.array([1.0, 0.0, 0.0])
    if lam[0] > 0.0:
        for c in range(3):
            axis[c] = qv[c, 0]
    return axis


@njit(cache=True)
def reduce_flat(mom, scheme, out_v, out_g):
    """Reduced particles of one group from its flat moment vector.

    Writes into ``out_v``/``out_g`` (room for 6) and returns how many were emitted.
    """
    rho = mom[0]
    vd = mom[18:21].copy()
    pt = mom[21:30].copy().reshape(3, 3)
    q = mom[30:33].copy()
    trace = pt[0, 0] + pt[1, 1] + pt[2, 2]
    thr = ZERO_EIG_RTOL * max(trace, rho * FLOOR)
    if not trace > thr:
        for c in range(3):
            out_v[0, c] = vd[c]
        out_g[0] = rho
        return 1

    if scheme == 2:
        lam, qv = eigh3(pt)
        k = 0
        for j in range(3):
            if lam[j] > thr:
                k += 1
        axis = np.empty(3)
        for j in range(k):
            qhat = 0.0
            for c in range(3):
                axis[c] = qv[c, j]
                qhat += axis[c] * q[c]
            if qhat < 0.0:
                qhat = -qhat
                for c in range(3):
                    axis[c] = -axis[c]
            # each pair carries weight rho/k, variance lam_j and heat flux qhat along its axis
            _emit_pair(vd, axis, lam[j], rho / k, qhat, out_v, out_g, j, j + k)
        return 2 * k

    if scheme == 1:
        qn = math.sqrt(q[0] ** 2 + q[1] ** 2 + q[2] ** 2)
        if qn > 0.0:
            axis = q / qn
        else:
            axis = _fallback_axis(pt)
        _emit_pair(vd, axis, trace, rho, qn, out_v, out_g, 0, 1)
        return 2

    # energy scheme: symmetric pair along the principal axis of the pressure tensor
    axis = _fallback_axis(pt)
    c0 = math.sqrt(trace / rho)
    for c in range(3):
        out_v[0, c] = vd[c] + c0 * axis[c]
        out_v[1, c] = vd[c] - c0 * axis[c]
    out_g[0] = 0.5 * rho
    out_g[1] = 0.5 * rho
    return 2


@njit(cache=True)
def reduce_groups(v, g, order, starts, ends, scheme, out_v, out_g, before, after, reduced):
    """Reduce every group ``order[starts[l]:ends[l]]``; returns the new particle count.

    Groups smaller than the scheme's output are copied through untouched.
    """
    tmp_v = np.empty((6, 3))
    tmp_g = np.empty(6)
    n = 0
    for l in range(starts.shape[0]):
        s = starts[l]
        e = ends[l]
        idx = order[s:e]
        mom = moments_of(v, g, idx)
        before[l, :] = mom
        k = reduce_flat(mom, scheme, tmp_v, tmp_g)
        if k > e - s:
            reduced[l] = False
            after[l, :] = mom
            for t in range(e - s):
                i = idx[t]
                for c in range(3):
                    out_v[n, c] = v[i, c]
                out_g[n] = g[i]
                n += 1
        else:
            reduced[l] = True
            after[l, :] = moments_of(tmp_v, tmp_g, np.arange(k))
            for t in range(k):
                for c in range(3):
                    out_v[n, c] = tmp_v[t, c]
                out_g[n] = tmp_g[t]
                n += 1
    return n


_SLICES = {
    "rho": slice(RHO, RHO + 1),
    "momentum": MOM,
    "drift_velocity": V,
    "momentum_flux": PI,
    "pressure": P,
    "energy": slice(E, E + 1),
    "temperature": slice(T, T + 1),
    "raw_heat_flux": H,
    "central_heat_flux": Q,
    "fourth_moment": slice(S, S + 1),
}


def _relative_errors(before: np.ndarray, after: np.ndarray, which: str) -> np.ndarray:
    sl = _SLICES[which]
    ref = np.linalg.norm(before[:, sl], axis=1)
    diff = np.linalg.norm(after[:, sl] - before[:, sl], axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(ref > 0.0, diff / np.where(ref > 0.0, ref, 1.0), np.nan)


@dataclass
class ReductionReport:
    """Per-group moments before/after one system reduction."""

    scheme: ReductionScheme
    before: np.ndarray  # (groups, K) flat moments
    after: np.ndarray
    reduced: np.ndarray  # groups actually replaced
    sizes: np.ndarray
    particles_before: int
    particles_after: int

    @property
    def n_groups(self) -> int:
        return self.before.shape[0]

    def errors(self, which: str) -> np.ndarray:
        """Relative 2-norm error of one moment for every group (NaN where undefined)."""
        if which not in _SLICES:
            raise ParameterError(f"unknown moment {which!r}")
        return _relative_errors(self.before, self.after, which)

    def average_error(self, which: str) -> float:
        """Mean relative error over the reduced groups with a defined error."""
        err = self.errors(which)[self.reduced]
        err = err[~np.isnan(err)]
        return float(err.mean()) if err.size else math.nan

    def group(self, l: int) -> tuple[MomentSet, MomentSet]:
        return MomentSet.from_flat(self.before[l]), MomentSet.from_flat(self.after[l])

    def summary(self) -> dict[str, float]:
        return {w: self.average_error(w) for w in MOMENT_FIELDS}


@dataclass
class ReducedGroup:
    particles: list[Particle]
    source_moments: MomentSet
    moments: MomentSet
    report: dict[str, float] = field(default_factory=dict)


def _reduce_one(moments: MomentSet, scheme: ReductionScheme) -> ReducedGroup:
    if not moments.rho > 0.0:
        raise DegenerateInputError("group total weight must be positive")
    out_v = np.empty((6, 3))
    out_g = np.empty(6)
    k = reduce_flat(moments.to_flat(), scheme.code, out_v, out_g)
    parts = [Particle(out_v[i].copy(), out_g[i]) for i in range(k)]
    after = MomentSet.from_flat(moments_of(out_v, out_g, np.arange(k)))
    report = {w: relative_moment_error(moments, after, w) for w in MOMENT_FIELDS}
    return ReducedGroup(parts, moments, after, report)


def reduce_group_pthf(moments: MomentSet) -> ReducedGroup:
    """Replace a group by <= 6 particles keeping weight, momentum, pressure tensor and central heat flux."""
    return _reduce_one(moments, ReductionScheme.PTHF)


def reduce_group_energy_hf(moments: MomentSet) -> ReducedGroup:
    """Replace a group by 2 particles keeping weight, momentum, energy and central heat flux."""
    trace = float(np.trace(moments.pressure))
    if moments.rho > 0.0 and not trace > ZERO_EIG_RTOL * max(trace, moments.rho * FLOOR):
        qn = float(np.linalg.norm(moments.central_heat_flux))
        if qn > 0.0 and qn > 1e-12 * moments.rho * (abs(moments.energy) / moments.rho) ** 1.5:
            raise ImpossibleMomentError("non-zero central heat flux with zero temperature")
    return _reduce_one(moments, ReductionScheme.ENERGY_HF)


def reduce_group_energy(moments: MomentSet) -> ReducedGroup:
    """Replace a group by 2 equal-weight particles keeping weight, momentum and energy."""
    return _reduce_one(moments, ReductionScheme.ENERGY)


REDUCERS = {
    ReductionScheme.ENERGY: reduce_group_energy,
    ReductionScheme.ENERGY_HF: reduce_group_energy_hf,
    ReductionScheme.PTHF: reduce_group_pthf,
}


def target_groups_for(scheme: ReductionScheme, target_count: int) -> int:
    return max(1, math.ceil(int(target_count) / scheme.max_emitted))


def reduce_system(state, scheme, target_count: int) -> ReductionReport:
    """Cluster the state and replace every group by its reduced particles, in place."""
    scheme = ReductionScheme.parse(scheme)
    target_count = int(target_count)
    if target_count < 1:
        raise ParameterError(f"target count must be >= 1, got {target_count}")
    if state.m < target_count:
        raise ParameterError(f"state has {state.m} particles, fewer than the target {target_count}")
    n_groups = target_groups_for(scheme, target_count)
    order, starts, ends = cluster_kernel(state.v, state.g, state.m, n_groups)
    G = starts.shape[0]
    before = np.empty((G, K))
    after = np.empty((G, K))
    reduced = np.empty(G, dtype=np.bool_)
    out_v = np.empty((state.m, 3))
    out_g = np.empty(state.m)
    m_before = state.m
    n = reduce_groups(state.v, state.g, order, starts, ends, scheme.code, out_v, out_g, before, after, reduced)
    state.replace(out_v[:n], out_g[:n])
    return ReductionReport(scheme, before, after, reduced, ends - starts, m_before, n)


def transport_bound_terms(v, g, out_v, out_g) -> tuple[float, float]:
    """``(sum_j g~_j |v~_j - V|, rho * sqrt(3 T))`` for one group and its reduction."""
    mom = moments_of(
        np.ascontiguousarray(v, dtype=np.float64),
        np.ascontiguousarray(g, dtype=np.float64),
        np.arange(len(g)),
    )
    vd = mom[V]
    lhs = math.fsum(np.asarray(out_g) * np.linalg.norm(np.asarray(out_v) - vd, axis=1))
    return lhs, mom[RHO] * math.sqrt(3.0 * mom[T])
