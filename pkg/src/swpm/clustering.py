"""
Recursive principal-axis bisection of a particle set.

Groups are contiguous segments of one permutation array, so a split is an
in-place stable partition of a segment and the whole clustering costs
O(particles * depth). The group with the largest ``rho * std(|v|)`` is split
next, through the group's drift velocity, by the plane normal to the leading
eigenvector of its pressure tensor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DegenerateInputError, ParameterError
from .linalg import eigh3
from .moments import MomentSet, moments_of

ZERO_EIG_RTOL = 1e-12


class UnsplittableGroup(DegenerateInputError):
    """All particles of the group share one velocity; it cannot be bisected."""


@njit(cache=True)
def _speed_spread(v, g, idx):
    """``rho * weighted std`` of the speeds |v| over ``idx`` (two-pass)."""
    rho = 0.0
    acc = 0.0
    for n in range(idx.shape[0]):
        i = idx[n]
        rho += g[i]
        acc += g[i] * math.sqrt(v[i, 0] ** 2 + v[i, 1] ** 2 + v[i, 2] ** 2)
    if not rho > 0.0:
        return 0.0
    mean = acc / rho
    var = 0.0
    for n in range(idx.shape[0]):
        i = idx[n]
        d = math.sqrt(v[i, 0] ** 2 + v[i, 1] ** 2 + v[i, 2] ** 2) - mean
        var += g[i] * d * d
    return rho * math.sqrt(var / rho)


@njit(cache=True)
def _principal_axes(v, g, idx):
    """Drift velocity, eigenvalues and eigenvectors of the group's pressure tensor."""
    mom = moments_of(v, g, idx)
    vd = mom[18:21].copy()
    pt = mom[21:30].copy().reshape(3, 3)
    lam, qv = eigh3(pt)
    return mom[0], vd, lam, qv


@njit(cache=True)
def _partition(order, s, e, left_mask, buf):
    """Stable partition of ``order[s:e]``; returns the first index of the right half."""
    n = e - s
    k = 0
    for t in range(n):
        if left_mask[t]:
            buf[k] = order[s + t]
            k += 1
    split = s + k
    for t in range(n):
        if not left_mask[t]:
            buf[k] = order[s + t]
            k += 1
    for t in range(n):
        order[s + t] = buf[t]
    return split


@njit(cache=True)
def split_segment(v, g, order, s, e, buf):
    """Bisect ``order[s:e]`` in place; returns the split point or -1 if unsplittable.

    Tries the eigenvectors by decreasing eigenvalue, skipping those whose
    eigenvalue is below ``1e-12 * trace``. For each axis the plane through the
    drift velocity is tried first, then the weighted median of the projections.
    """
    n = e - s
    if n < 2:
        return -1
    idx = order[s:e]
    rho, vd, lam, qv = _principal_axes(v, g, idx)
    trace = lam[0] + lam[1] + lam[2]
    if not trace > 0.0:
        return -1
    thr = ZERO_EIG_RTOL * trace
    x = np.empty(n)
    mask = np.empty(n, dtype=np.bool_)
    for j in range(3):
        if not lam[j] > thr:
            break
        for t in range(n):
            i = idx[t]
            x[t] = (
                (v[i, 0] - vd[0]) * qv[0, j]
                + (v[i, 1] - vd[1]) * qv[1, j]
                + (v[i, 2] - vd[2]) * qv[2, j]
            )
        nleft = 0
        for t in range(n):
            mask[t] = x[t] <= 0.0
            if mask[t]:
                nleft += 1
        if 0 < nleft < n:
            return _partition(order, s, e, mask, buf)
        # weighted median fallback
        srt = np.argsort(x, kind="mergesort")
        half = 0.5 * rho
        cum = 0.0
        xmed = x[srt[n - 1]]
        for t in range(n):
            cum += g[idx[srt[t]]]
            if cum >= half:
                xmed = x[srt[t]]
                break
        nleft = 0
        for t in range(n):
            mask[t] = x[t] <= xmed
            if mask[t]:
                nleft += 1
        if nleft == n:
            nleft = 0
            for t in range(n):
                mask[t] = x[t] < xmed
                if mask[t]:
                    nleft += 1
        if 0 < nleft < n:
            return _partition(order, s, e, mask, buf)
    return -1


@njit(cache=True)
def cluster_kernel(v, g, m, target):
    """Greedy bisection of particles ``0..m-1`` into at most ``target`` groups.

    Returns ``(order, starts, ends)``: group ``l`` holds ``order[starts[l]:ends[l]]``.
    """
    order = np.arange(m)
    cap = max(1, min(target, m))
    starts = np.empty(cap, dtype=np.int64)
    ends = np.empty(cap, dtype=np.int64)
    crit = np.empty(cap)
    splittable = np.empty(cap, dtype=np.bool_)
    buf = np.empty(m, dtype=np.int64)
    starts[0] = 0
    ends[0] = m
    crit[0] = _speed_spread(v, g, order)
    splittable[0] = m >= 2
    ngroups = 1
    while ngroups < cap:
        best = -1
        bc = -1.0
        for j in range(ngroups):
            # strict comparison keeps the lowest creation index on ties
            if splittable[j] and crit[j] > bc:
                best = j
                bc = crit[j]
        if best < 0:
            break
        s = starts[best]
        e = ends[best]
        k = split_segment(v, g, order, s, e, buf)
        if k < 0:
            splittable[best] = False
            continue
        ends[best] = k
        starts[ngroups] = k
        ends[ngroups] = e
        crit[best] = _speed_spread(v, g, order[s:k])
        crit[ngroups] = _speed_spread(v, g, order[k:e])
        splittable[best] = k - s >= 2
        splittable[ngroups] = e - k >= 2
        ngroups += 1
    return order, starts[:ngroups].copy(), ends[:ngroups].copy()


@dataclass
class ParticleGroup:
    indices: np.ndarray
    moments: MomentSet
    split_criterion: float

    @classmethod
    def of(cls, state, indices) -> ParticleGroup:
        idx = np.ascontiguousarray(indices, dtype=np.int64)
        if idx.shape[0] == 0:
            raise DegenerateInputError("a group needs at least one particle")
        flat = moments_of(state.v, state.g, idx)
        return cls(idx, MomentSet.from_flat(flat), float(_speed_spread(state.v, state.g, idx)))

    def __len__(self) -> int:
        return self.indices.shape[0]


def principal_direction(group: ParticleGroup, state) -> np.ndarray:
    """Unit eigenvector of the group covariance for its largest eigenvalue."""
    if len(group) < 2:
        raise UnsplittableGroup("a single particle has no covariance")
    lam, qv = eigh3(np.ascontiguousarray(group.moments.pressure / group.moments.rho))
    if not lam[0] > 0.0:
        raise UnsplittableGroup("covariance vanishes: all velocities coincide")
    return qv[:, 0].copy()


def bisect_group(group: ParticleGroup, state) -> tuple[ParticleGroup, ParticleGroup]:
    """Split a group into ``(v - V).n <= 0`` and ``> 0`` halves (median fallback)."""
    order = group.indices.copy()
    k = split_segment(state.v, state.g, order, 0, order.shape[0], np.empty_like(order))
    if k < 0:
        raise UnsplittableGroup("group cannot be bisected")
    return ParticleGroup.of(state, order[:k]), ParticleGroup.of(state, order[k:])


def cluster_indices(state, target_groups: int) -> list[np.ndarray]:
    """Index arrays of the groups produced by :func:`cluster_system`."""
    if int(target_groups) < 1:
        raise ParameterError(f"target_groups must be >= 1, got {target_groups}")
    if state.m == 0:
        raise DegenerateInputError("empty system")
    order, starts, ends = cluster_kernel(state.v, state.g, state.m, int(target_groups))
    return [order[s:e] for s, e in zip(starts, ends)]


def cluster_system(state, target_groups: int) -> list[ParticleGroup]:
    """Partition the live particles into (at most) ``target_groups`` groups."""
    return [ParticleGroup.of(state, idx) for idx in cluster_indices(state, target_groups)]


def check_partition(groups, m: int) -> None:
    """Raise ``AssertionError`` unless ``groups`` partition ``range(m)``."""
    idx = np.concatenate([np.asarray(getattr(gr, "indices", gr)) for gr in groups])
    assert idx.shape[0] == m, f"{idx.shape[0]} indices for {m} particles"
    assert np.array_equal(np.sort(idx), np.arange(m)), "groups overlap or miss particles"
