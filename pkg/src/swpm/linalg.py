"""Cyclic Jacobi eigensolver for symmetric 3x3 matrices."""

from __future__ import annotations

import math

import numpy as np
from numba import njit

MAX_SWEEPS = 50
OFF_TOL = 1e-13


@njit(cache=True)
def eigh3(a_in):
    """Eigen-decomposition of a symmetric 3x3 matrix.

    Returns ``(lam, Q)`` with eigenvalues sorted in descending order and the
    matching unit eigenvectors as the columns of ``Q``. Each eigenvector is
    signed so that its first component of magnitude above 1e-12 is positive.
    Sweeps rotate the pairs (0,1), (0,2), (1,2) in that fixed order until the
    off-diagonal Frobenius norm drops below ``1e-13 * |trace|`` (or the
    matrix norm, if the trace vanishes).
    """
    a = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            a[i, j] = 0.5 * (a_in[i, j] + a_in[j, i])
    q = np.eye(3)
    fro = 0.0
    for i in range(3):
        for j in range(3):
            fro += a[i, j] * a[i, j]
    scale = max(abs(a[0, 0] + a[1, 1] + a[2, 2]), math.sqrt(fro))
    tol = OFF_TOL * scale
    for _sweep in range(MAX_SWEEPS):
        off = math.sqrt(2.0 * (a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2))
        if off <= tol:
            break
        for p, r in ((0, 1), (0, 2), (1, 2)):
            apr = a[p, r]
            if apr == 0.0:
                continue
            tau = (a[r, r] - a[p, p]) / (2.0 * apr)
            if tau >= 0.0:
                t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
            else:
                t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
            c = 1.0 / math.sqrt(1.0 + t * t)
            s = t * c
            # A <- J^T A J with J = I except J[p,p]=J[r,r]=c, J[p,r]=s, J[r,p]=-s
            for k in range(3):
                akp = a[k, p]
                akr = a[k, r]
                a[k, p] = c * akp - s * akr
                a[k, r] = s * akp + c * akr
            for k in range(3):
                apk = a[p, k]
                ark = a[r, k]
                a[p, k] = c * apk - s * ark
                a[r, k] = s * apk + c * ark
            a[p, r] = 0.0
            a[r, p] = 0.0
            for k in range(3):
                qkp = q[k, p]
                qkr = q[k, r]
                q[k, p] = c * qkp - s * qkr
                q[k, r] = s * qkp + c * qkr

    lam = np.array([a[0, 0], a[1, 1], a[2, 2]])
    order = np.argsort(-lam, kind="mergesort")
    lam_s = np.empty(3)
    q_s = np.empty((3, 3))
    for j in range(3):
        lam_s[j] = lam[order[j]]
        col = order[j]
        sign = 1.0
        for k in range(3):
            if abs(q[k, col]) > 1e-12:
                if q[k, col] < 0.0:
                    sign = -1.0
                break
        for k in range(3):
            q_s[k, j] = sign * q[k, col]
    return lam_s, q_s


def symmetric_eigen(a) -> tuple[np.ndarray, np.ndarray]:
    """Python entry point for :func:`eigh3`."""
    a = np.ascontiguousarray(a, dtype=np.float64).reshape(3, 3)
    return eigh3(a)
