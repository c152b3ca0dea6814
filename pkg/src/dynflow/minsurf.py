"""Harmonic relaxation of 2-parameter surfaces spanning a closed boundary loop.

Each coordinate function is relaxed to the discrete Laplace equation on the
unit parameter square with the boundary nodes pinned to the loop.  The
surface area uses cell-centred tangent blades.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _relax
from .diffchars import Region, ScalarGrid
from .exterior import blade_coefficients
from .variational import (
    NonConvergenceError,
    boundary_mask,
    dirichlet_energy,
    energy_difference,
    nonincreasing,
    random_perturbation,
    smooth_once,
)

QUARTILES = (0.0, 0.25, 0.5, 0.75)
# late sweeps lower the energy by less than its rounding; allow a few ulps
ENERGY_ULPS = 8


@dataclass(frozen=True)
class AffineCurve:
    """``x -> rotation @ x + shift`` applied to another curve."""

    curve: object
    rotation: np.ndarray
    shift: np.ndarray

    @property
    def dim(self) -> int:
        return self.curve.dim

    @property
    def closed(self) -> bool:
        return self.curve.closed

    def position(self, t):
        return self.curve.position(t) @ np.asarray(self.rotation).T + np.asarray(self.shift)


@dataclass(frozen=True)
class BoundaryLoop:
    """Closed curve whose parameter circle is split into four arcs at ``corners``.

    The arcs map onto the bottom, right, top and left sides of the parameter
    square, traversed counter-clockwise.
    """

    curve: object
    corners: tuple = QUARTILES

    def __post_init__(self):
        if not self.curve.closed:
            raise ValueError("boundary loop must be a closed curve")
        c = tuple(float(v) for v in self.corners)
        if len(c) != 4 or not all(0.0 <= a < b for a, b in zip(c, c[1:])) or not c[-1] < 1.0:
            raise ValueError("corners must be 4 increasing parameters in [0, 1)")
        object.__setattr__(self, "corners", c)

    @property
    def dim(self) -> int:
        return self.curve.dim

    def transformed(self, rotation, shift) -> "BoundaryLoop":
        return BoundaryLoop(AffineCurve(self.curve, np.asarray(rotation, float), np.asarray(shift, float)),
                            self.corners)

    def boundary_values(self, m: int) -> np.ndarray:
        """Coordinates on the boundary nodes of an ``(m+1) x (m+1)`` grid, shape ``(n, m+1, m+1)``."""
        c0, c1, c2, c3 = self.corners
        s = np.arange(m + 1) / m
        out = np.zeros((self.dim, m + 1, m + 1))
        sides = [
            ((slice(None), 0), c0 + (c1 - c0) * s),            # bottom, i increasing
            ((m, slice(None)), c1 + (c2 - c1) * s),            # right, j increasing
            ((slice(None), m), c2 + (c3 - c2) * (1.0 - s)),    # top, i decreasing
            ((0, slice(None)), (c3 + (1.0 + c0 - c3) * (1.0 - s)) % 1.0),  # left, j decreasing
        ]
        for index, t in sides:
            pts = self.curve.position(t)
            for k in range(self.dim):
                out[(k,) + index] = pts[:, k]
        return out


@dataclass(eq=False)
class SurfaceGrid:
    """Surface sampled on an ``(M+1) x (M+1)`` parameter lattice; ``coords`` has shape ``(n, M+1, M+1)``."""

    coords: np.ndarray
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)
        if self.coords.ndim != 3 or self.coords.shape[1] != self.coords.shape[2]:
            raise ValueError("coords must have shape (n, M+1, M+1)")
        if self.mask is None:
            self.mask = boundary_mask(self.coords.shape[1:])

    @property
    def dim(self) -> int:
        return self.coords.shape[0]

    @property
    def m(self) -> int:
        return self.coords.shape[1] - 1

    @property
    def region(self) -> Region:
        return Region((0.0, 0.0), (1.0, 1.0), self.coords.shape[1:])

    def component(self, k: int) -> ScalarGrid:
        return ScalarGrid(self.region, self.coords[k])

    def perturbed(self, delta: np.ndarray) -> "SurfaceGrid":
        return SurfaceGrid(self.coords + delta, self.mask)


@dataclass
class SurfaceRelaxation:
    surface: SurfaceGrid
    iterations: int
    residuals: list[float]
    energies: list[float]
    areas: list[float]

    def energy_monotone(self, ulps: int = ENERGY_ULPS) -> bool:
        return nonincreasing(self.energies, ulps)


def vector_energy(surface: SurfaceGrid) -> float:
    return float(sum(dirichlet_energy(surface.component(k)) for k in range(surface.dim)))


def surface_residual(surface: SurfaceGrid) -> float:
    h = (1.0 / surface.m,) * 2
    return max(_relax.residual(surface.coords[k], h) for k in range(surface.dim))


def relax_surface(boundary: BoundaryLoop, m: int = 64, tol: float = 1e-8,
                  max_iters: int = 200_000, track_area: bool = True) -> SurfaceRelaxation:
    """Gauss-Seidel relaxation of every coordinate until the max Laplacian residual <= tol.

    History lists hold values after 0, 1, ... sweeps.
    """
    if m < 3:
        raise ValueError("grid M must be >= 3")
    if boundary.dim not in (3, 4):
        raise ValueError("only ambient dimensions 3 and 4 are supported")
    coords = boundary.boundary_values(m)
    mask = boundary_mask(coords.shape[1:])
    for k in range(boundary.dim):
        b = coords[k][mask]
        coords[k][~mask] = min(max(float(np.mean(b)), float(b.min())), float(b.max()))
    surface = SurfaceGrid(coords, mask)
    h = (1.0 / m, 1.0 / m)
    residuals = [surface_residual(surface)]
    energies = [vector_energy(surface)]
    areas = [surface_area(surface)] if track_area else []
    it = 0
    while residuals[-1] > tol:
        if it >= max_iters:
            raise NonConvergenceError(it, residuals[-1])
        for k in range(boundary.dim):
            _relax.sweep(surface.coords[k], h, 1.0)
        it += 1
        residuals.append(surface_residual(surface))
        energies.append(vector_energy(surface))
        if track_area:
            areas.append(surface_area(surface))
    return SurfaceRelaxation(surface, it, residuals, energies, areas)


def relax_harmonic_surface(boundary: BoundaryLoop, m: int = 64, tol: float = 1e-8,
                           max_iters: int = 200_000) -> SurfaceGrid:
    return relax_surface(boundary, m, tol, max_iters, track_area=False).surface


def cell_tangents(coords: np.ndarray) -> np.ndarray:
    """Cell-centred tangents, shape ``(M, M, 2, n)``."""
    m = coords.shape[1] - 1
    x = np.moveaxis(coords, 0, -1)
    t1 = 0.5 * ((x[1:, :-1] - x[:-1, :-1]) + (x[1:, 1:] - x[:-1, 1:])) * m
    t2 = 0.5 * ((x[:-1, 1:] - x[:-1, :-1]) + (x[1:, 1:] - x[1:, :-1])) * m
    return np.stack([t1, t2], axis=-2)


def surface_area(surface: SurfaceGrid) -> float:
    """Midpoint-rule area: sum of cell-centre tangent blade norms times cell area."""
    blades = blade_coefficients(cell_tangents(surface.coords))
    return float(np.sum(np.sqrt(np.sum(blades * blades, axis=-1)))) / surface.m ** 2


def _node_tangents(coords: np.ndarray) -> np.ndarray:
    """Central-difference tangents at interior nodes; shape ``(M+1, M+1, 2, n)`` (zero on boundary)."""
    x = np.moveaxis(coords, 0, -1)
    t = np.zeros(x.shape[:2] + (2, x.shape[-1]))
    t[1:-1, 1:-1, 0] = x[2:, 1:-1] - x[:-2, 1:-1]
    t[1:-1, 1:-1, 1] = x[1:-1, 2:] - x[1:-1, :-2]
    return t


def normal_noise(surface: SurfaceGrid, rng: np.random.Generator, magnitude: float) -> np.ndarray:
    """Smoothed zero-boundary vector noise with tangential parts removed node by node."""
    shape = surface.coords.shape[1:]
    noise = np.stack([smooth_once(_raw_noise(shape, rng)) for _ in range(surface.dim)], axis=-1)
    tang = _node_tangents(surface.coords)
    for i in range(1, shape[0] - 1):
        for j in range(1, shape[1] - 1):
            q, _ = np.linalg.qr(tang[i, j].T)
            rank = np.linalg.matrix_rank(tang[i, j])
            q = q[:, :rank]
            noise[i, j] -= q @ (q.T @ noise[i, j])
    delta = np.moveaxis(noise, -1, 0)
    peak = float(np.max(np.abs(delta)))
    return delta * (magnitude / peak) if peak > 0 else delta


def _raw_noise(shape, rng):
    noise = rng.uniform(-1.0, 1.0, size=shape)
    noise[boundary_mask(shape)] = 0.0
    return noise


def coordinate_noise(surface: SurfaceGrid, rng: np.random.Generator, magnitude: float) -> np.ndarray:
    return np.stack([random_perturbation(surface.coords.shape[1:], rng, magnitude)
                     for _ in range(surface.dim)])


@dataclass
class AreaProbe:
    magnitude: float
    area_coordinate: np.ndarray
    area_normal: np.ndarray
    energy_coordinate: np.ndarray
    energy_normal: np.ndarray

    def rows(self) -> list[tuple[str, object]]:
        out: list[tuple[str, object]] = [("probe.magnitude", self.magnitude)]
        for name in ("area_coordinate", "area_normal", "energy_coordinate", "energy_normal"):
            v = getattr(self, name)
            out += [(f"probe.{name}.min", float(v.min())), (f"probe.{name}.max", float(v.max()))]
        return out


def area_variation_probe(surface: SurfaceGrid, magnitude: float = 1e-3, trials: int = 20,
                         seed: int = 0) -> AreaProbe:
    """Area and vector-energy changes under random zero-boundary perturbations.

    Area changes are reported as data; only the energy changes carry the
    discrete Dirichlet principle.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 0xA1EA])))
    base = surface_area(surface)
    comps = [surface.component(k) for k in range(surface.dim)]
    cols = {k: np.empty(trials) for k in ("ac", "an", "ec", "en")}
    for t in range(trials):
        for kind, delta in (("c", coordinate_noise(surface, rng, magnitude)),
                            ("n", normal_noise(surface, rng, magnitude))):
            cols["a" + kind][t] = surface_area(surface.perturbed(delta)) - base
            cols["e" + kind][t] = sum(energy_difference(c, d) for c, d in zip(comps, delta))
    return AreaProbe(magnitude, cols["ac"], cols["an"], cols["ec"], cols["en"])


def square_loop_coords(lo: Sequence[float] = (0.0, 0.0), hi: Sequence[float] = (1.0, 1.0)):
    """Source expressions ``(x(t), y(t))`` tracing a rectangle counter-clockwise, one side per quarter."""
    def clamp(s: str) -> str:
        return f"(abs({s}) - abs({s} - 1) + 1)/2"

    fx = f"({clamp('4*t')} - {clamp('4*t - 2')})"
    fy = f"({clamp('4*t - 1')} - {clamp('4*t - 3')})"
    x = f"{lo[0]} + {hi[0] - lo[0]}*{fx}"
    y = f"{lo[1]} + {hi[1] - lo[1]}*{fy}"
    return x, y
