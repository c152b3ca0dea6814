"""Lexicographic Gauss-Seidel / SOR sweeps for the 5- and 7-point Laplacian.

With ``omega == 1`` each update is a convex combination of its neighbours; the
result is clamped to the neighbour range so rounding can never break the
discrete maximum principle.
"""

import numba
import numpy as np


@numba.njit(cache=True)
def sweep_2d(u, wx, wy, omega):
    nx, ny = u.shape
    diag = 2.0 * (wx + wy)
    for i in range(1, nx - 1):
        for j in range(1, ny - 1):
            a = u[i - 1, j]
            b = u[i + 1, j]
            c = u[i, j - 1]
            d = u[i, j + 1]
            avg = (wx * (a + b) + wy * (c + d)) / diag
            if omega == 1.0:
                lo = min(min(a, b), min(c, d))
                hi = max(max(a, b), max(c, d))
                u[i, j] = min(max(avg, lo), hi)
            else:
                u[i, j] += omega * (avg - u[i, j])


@numba.njit(cache=True)
def residual_2d(u, wx, wy):
    nx, ny = u.shape
    r = 0.0
    for i in range(1, nx - 1):
        for j in range(1, ny - 1):
            lap = (wx * (u[i - 1, j] - 2.0 * u[i, j] + u[i + 1, j])
                   + wy * (u[i, j - 1] - 2.0 * u[i, j] + u[i, j + 1]))
            r = max(r, abs(lap))
    return r


@numba.njit(cache=True)
def sweep_3d(u, wx, wy, wz, omega):
    nx, ny, nz = u.shape
    diag = 2.0 * (wx + wy + wz)
    for i in range(1, nx - 1):
        for j in range(1, ny - 1):
            for k in range(1, nz - 1):
                a = u[i - 1, j, k]
                b = u[i + 1, j, k]
                c = u[i, j - 1, k]
                d = u[i, j + 1, k]
                e = u[i, j, k - 1]
                f = u[i, j, k + 1]
                avg = (wx * (a + b) + wy * (c + d) + wz * (e + f)) / diag
                if omega == 1.0:
                    lo = min(min(min(a, b), min(c, d)), min(e, f))
                    hi = max(max(max(a, b), max(c, d)), max(e, f))
                    u[i, j, k] = min(max(avg, lo), hi)
                else:
                    u[i, j, k] += omega * (avg - u[i, j, k])


@numba.njit(cache=True)
def residual_3d(u, wx, wy, wz):
    nx, ny, nz = u.shape
    r = 0.0
    for i in range(1, nx - 1):
        for j in range(1, ny - 1):
            for k in range(1, nz - 1):
                c2 = 2.0 * u[i, j, k]
                lap = (wx * (u[i - 1, j, k] - c2 + u[i + 1, j, k])
                       + wy * (u[i, j - 1, k] - c2 + u[i, j + 1, k])
                       + wz * (u[i, j, k - 1] - c2 + u[i, j, k + 1]))
                r = max(r, abs(lap))
    return r


def sweep(u: np.ndarray, spacing, omega: float = 1.0) -> None:
    w = [1.0 / float(h) ** 2 for h in spacing]
    if u.ndim == 2:
        sweep_2d(u, w[0], w[1], float(omega))
    elif u.ndim == 3:
        sweep_3d(u, w[0], w[1], w[2], float(omega))
    else:
        raise ValueError("relaxation supports 2-D and 3-D grids only")


def residual(u: np.ndarray, spacing) -> float:
    w = [1.0 / float(h) ** 2 for h in spacing]
    if u.ndim == 2:
        return float(residual_2d(u, w[0], w[1]))
    if u.ndim == 3:
        return float(residual_3d(u, w[0], w[1], w[2]))
    raise ValueError("relaxation supports 2-D and 3-D grids only")
