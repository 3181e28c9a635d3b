"""Compiled in-place sweeps. Arrays are indexed [i, j]; loops run j outer, i inner."""

import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def gauss_seidel_inplace(v, fixed, wx, wy):
    n = v.shape[0] - 1
    dmax = 0.0
    for j in range(1, n):
        for i in range(1, n):
            if fixed[i, j]:
                continue
            new = wx * (v[i - 1, j] + v[i + 1, j]) + wy * (v[i, j - 1] + v[i, j + 1])
            d = abs(new - v[i, j])
            if d > dmax:
                dmax = d
            v[i, j] = new
    return dmax


@numba.njit(cache=True, nogil=True)
def sor_inplace(v, fixed, wx, wy, beta):
    n = v.shape[0] - 1
    keep = 1.0 - beta
    dmax = 0.0
    for j in range(1, n):
        for i in range(1, n):
            if fixed[i, j]:
                continue
            avg = wx * (v[i - 1, j] + v[i + 1, j]) + wy * (v[i, j - 1] + v[i, j + 1])
            new = keep * v[i, j] + beta * avg
            d = abs(new - v[i, j])
            if d > dmax:
                dmax = d
            v[i, j] = new
    return dmax


def jacobi_into(v, free, wx, wy, out):
    """One Jacobi sweep from v into out; returns the largest update."""
    avg = wx * (v[:-2, 1:-1] + v[2:, 1:-1]) + wy * (v[1:-1, :-2] + v[1:-1, 2:])
    np.copyto(out, v)
    inner = out[1:-1, 1:-1]
    mask = free[1:-1, 1:-1]
    inner[mask] = avg[mask]
    if not mask.any():
        return 0.0
    return float(np.abs(avg[mask] - v[1:-1, 1:-1][mask]).max())


def defect(v, free, wx, wy):
    """Largest |V - weighted neighbour average| over free interior nodes."""
    mask = free[1:-1, 1:-1]
    if not mask.any():
        return 0.0
    avg = wx * (v[:-2, 1:-1] + v[2:, 1:-1]) + wy * (v[1:-1, :-2] + v[1:-1, 2:])
    return float(np.abs(v[1:-1, 1:-1][mask] - avg[mask]).max())
