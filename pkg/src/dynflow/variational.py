"""Links between integral and differential characteristics.

* circulation vs. skew closedness (Stokes),
* closed-surface flux vs. divergence (Gauss),
* energy minimality vs. harmonicity (Dirichlet principle), with a
  Gauss-Seidel Laplace solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _relax
from .diffchars import DEFAULT_GRID, Region, ScalarGrid, divergence_residual, laplacian_residual, skew_residual
from .expr import DEFAULT_STEP, Expr, FlowField, evaluate_on, parse_expr, parse_statements, read_dim, space_variables
from .integral import BoxInstrument, PolylinePath, box_boundary, box_fluxes, circulation, parse_box
from .polynomials import (
    Polynomial,
    random_field,
    random_gradient,
    random_harmonic,
    random_solenoidal,
    trial_rng,
)

ESCAPE_FACTOR = 10.0
DEFAULT_LAPLACE_TOL = 1e-8
DEFAULT_MAX_ITERS = 200_000


class NonConvergenceError(RuntimeError):
    def __init__(self, iterations: int, residual: float):
        super().__init__(f"no convergence after {iterations} sweeps (residual {residual:.3e})")
        self.iterations = iterations
        self.residual = residual


# verdict tables

@dataclass
class TrialRow:
    trial: int
    kind: str
    integral: float
    differential: float
    agree: bool


@dataclass
class VerdictTable:
    suite: str
    seed: int
    tol: float
    rows: list[TrialRow] = field(default_factory=list)

    @property
    def agreed(self) -> int:
        return sum(r.agree for r in self.rows)

    @property
    def all_agree(self) -> bool:
        return self.agreed == len(self.rows)

    def summary(self) -> list[tuple[str, object]]:
        return [
            ("suite", self.suite),
            ("seed", self.seed),
            ("trials", len(self.rows)),
            ("tol", self.tol),
            ("escape", ESCAPE_FACTOR * self.tol),
            ("agreed", self.agreed),
            ("verdict.all_agree", self.all_agree),
        ]


def nonincreasing(values, ulps: int = 0) -> bool:
    """True when every step changes by at most ``ulps`` units in the last place upward."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return True
    slack = ulps * np.spacing(np.abs(v[:-1]))
    return bool(np.all(v[1:] <= v[:-1] + slack))


def agreement(integral: float, differential: float, tol: float) -> bool:
    """Both residuals small, or both clearly large (beyond ``10 * tol``)."""
    escape = ESCAPE_FACTOR * tol
    return (integral <= tol and differential <= tol) or (integral >= escape and differential >= escape)


# random instruments

def random_loop(rng: np.random.Generator, dim: int, segments: int) -> PolylinePath:
    """Star-shaped random polygon in a random 2-plane inside [-1, 1]^dim."""
    center = rng.uniform(-0.5, 0.5, size=dim)
    radius = rng.uniform(0.1, 0.5)
    k = int(rng.integers(3, 9))
    angles = np.sort(rng.uniform(0.0, 2.0 * math.pi, size=k))
    radii = radius * rng.uniform(0.5, 1.0, size=k)
    if dim == 2:
        frame = np.eye(2)
    else:
        frame, _ = np.linalg.qr(rng.normal(size=(dim, 2)))
        frame = frame.T
    plane = np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=-1)
    return PolylinePath(center + plane @ frame, closed=True, segments_per_edge=segments)


def random_box(rng: np.random.Generator, dim: int, resolution: int) -> BoxInstrument:
    center = rng.uniform(-0.5, 0.5, size=dim)
    edges = rng.uniform(0.1, 0.5, size=dim)
    return box_boundary(center, edges, resolution)


# Stokes and Gauss links

def stokes_residuals(field: FlowField, loops, region: Region, h: float = DEFAULT_STEP) -> tuple[float, float]:
    circ = max(abs(circulation(field, loop)) for loop in loops)
    return circ, skew_residual(field, region, h)


def gauss_residuals(field: FlowField, boxes, region: Region, h: float = DEFAULT_STEP) -> tuple[float, float]:
    flux = max(abs(v) for v in box_fluxes(field, list(boxes)))
    return flux, divergence_residual(field, region, h)


def verify_stokes_link(trials: int, seed: int = 0, tol: float = 1e-6, dim: int = 2,
                       loops: int = 20, segments: int = 4096, degree: int = 3,
                       grid: int = DEFAULT_GRID, h: float = DEFAULT_STEP) -> VerdictTable:
    """Max circulation over random loops vs. skew residual, per random field.

    Even trials use gradients of random degree-``degree`` potentials, odd
    trials generic random fields of that degree.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    region = Region.cube(dim, -1.0, 1.0, grid)
    table = VerdictTable("stokes", seed, tol)
    for trial in range(trials):
        rng = trial_rng(seed, trial)
        if trial % 2 == 0:
            kind, f = "gradient", random_gradient(dim, degree, rng)
        else:
            kind, f = "generic", random_field(dim, degree, rng)
        paths = [random_loop(rng, dim, segments) for _ in range(loops)]
        left, right = stokes_residuals(f, paths, region, h)
        table.rows.append(TrialRow(trial, kind, left, right, agreement(left, right, tol)))
    return table


def verify_gauss_link(trials: int, seed: int = 0, tol: float = 1e-6, dim: int = 3,
                      boxes: int = 20, resolution: int = 16, degree: int = 3,
                      grid: int = DEFAULT_GRID, h: float = DEFAULT_STEP) -> VerdictTable:
    """Max flux over random closed boxes vs. divergence residual, per random field.

    Even trials use divergence-free fields built from random degree-``degree``
    potentials; odd trials generic random fields.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    region = Region.cube(dim, -1.0, 1.0, grid)
    table = VerdictTable("gauss", seed, tol)
    for trial in range(trials):
        rng = trial_rng(seed, trial)
        if trial % 2 == 0:
            kind, f = "solenoidal", random_solenoidal(dim, degree, rng)
        else:
            kind, f = "generic", random_field(dim, degree, rng)
        instruments = [random_box(rng, dim, resolution) for _ in range(boxes)]
        left, right = gauss_residuals(f, instruments, region, h)
        table.rows.append(TrialRow(trial, kind, left, right, agreement(left, right, tol)))
    return table


# Dirichlet problem

@dataclass(frozen=True, eq=False)
class DirichletProblem:
    """Laplace equation on a 2-D or 3-D box lattice with fixed boundary values.

    ``boundary`` has the full lattice shape; only boundary nodes are read.
    """

    region: Region
    boundary: np.ndarray
    tol: float = DEFAULT_LAPLACE_TOL
    max_iters: int = DEFAULT_MAX_ITERS
    omega: float = 1.0

    def __post_init__(self):
        if self.region.dim not in (2, 3):
            raise ValueError("Dirichlet problems are supported in 2 and 3 dimensions")
        b = np.asarray(self.boundary, dtype=float)
        if b.shape != self.region.counts:
            raise ValueError(f"boundary shape {b.shape} != grid {self.region.counts}")
        if any(c < 3 for c in self.region.counts):
            raise ValueError("need at least 3 nodes per axis")
        if not np.all(np.isfinite(b[boundary_mask(b.shape)])):
            raise ValueError("boundary values must be finite")
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if not 0.0 < self.omega < 2.0:
            raise ValueError("relaxation factor must lie in (0, 2)")
        object.__setattr__(self, "boundary", b)

    @classmethod
    def from_expr(cls, g: Expr, region: Region, **kwargs) -> "DirichletProblem":
        values = evaluate_on(g, space_variables(region.dim), region.nodes())
        return cls(region, values, **kwargs)


def boundary_mask(shape) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    for d in range(len(shape)):
        idx = [slice(None)] * len(shape)
        idx[d] = 0
        mask[tuple(idx)] = True
        idx[d] = -1
        mask[tuple(idx)] = True
    return mask


@dataclass
class Relaxation:
    grid: ScalarGrid
    iterations: int
    residuals: list[float]

    @property
    def residual_monotone(self) -> bool:
        return nonincreasing(self.residuals)


def relax_dirichlet(problem: DirichletProblem) -> Relaxation:
    """Gauss-Seidel (or SOR) sweeps until the max Laplacian residual <= tol.

    ``residuals[k]`` is the residual after ``k`` sweeps.
    """
    mask = boundary_mask(problem.boundary.shape)
    bvals = problem.boundary[mask]
    u = problem.boundary.copy()
    u[~mask] = min(max(float(np.mean(bvals)), float(bvals.min())), float(bvals.max()))
    spacing = problem.region.spacing
    history = [_relax.residual(u, spacing)]
    it = 0
    while history[-1] > problem.tol:
        if it >= problem.max_iters:
            raise NonConvergenceError(it, history[-1])
        _relax.sweep(u, spacing, problem.omega)
        it += 1
        history.append(_relax.residual(u, spacing))
    return Relaxation(ScalarGrid(problem.region, u), it, history)


def solve_laplace_dirichlet(problem: DirichletProblem) -> ScalarGrid:
    return relax_dirichlet(problem).grid


def parse_boundary_spec(text: str, grid: int = 65) -> tuple[Expr, Region]:
    """Boundary-data file: ``dim``, ``g = <expr>`` and optional ``box`` (default unit box)."""
    from .expr import DSLSyntaxError

    stmts = parse_statements(text)
    dim = read_dim(stmts)
    g = None
    lo, hi = [0.0] * dim, [1.0] * dim
    for s in stmts:
        if s.key == "dim":
            continue
        if s.key in ("g", "phi"):
            g = parse_expr(s.rhs, space_variables(dim), line=s.line, column=s.column)
        elif s.key == "box":
            lo, hi = parse_box(s.rhs, s.line, s.column)
            if len(lo) != dim:
                raise DSLSyntaxError(f"box has {len(lo)} intervals, dim is {dim}", s.line, s.column)
        else:
            raise DSLSyntaxError(f"unknown key {s.key!r} in boundary file", s.line, s.column)
    if g is None:
        raise DSLSyntaxError("missing 'g = <expr>'", 1, 1)
    return g, Region(tuple(lo), tuple(hi), (grid,) * dim)


# energy

def _edge_weights(region: Region, axis: int) -> np.ndarray:
    """Dual-cell measure of each lattice edge along ``axis`` (trapezoid across)."""
    h = region.spacing
    shape = list(region.counts)
    shape[axis] -= 1
    w = np.full(shape, 1.0)
    for k in range(region.dim):
        if k == axis:
            w = w * h[k]
            continue
        tau = np.ones(region.counts[k])
        tau[0] = tau[-1] = 0.5
        view = [1] * region.dim
        view[k] = -1
        w = w * (h[k] * tau).reshape(view)
    return w


def _edge_gradients(values: np.ndarray, region: Region) -> list[np.ndarray]:
    return [np.diff(values, axis=d) / region.spacing[d] for d in range(region.dim)]


def dirichlet_energy(phi: ScalarGrid) -> float:
    """Sum over lattice edges of squared difference quotients times dual-cell volume.

    Its interior stationarity conditions are exactly the 5/7-point Laplace
    equations solved by :func:`solve_laplace_dirichlet`.
    """
    grads = _edge_gradients(phi.values, phi.region)
    return float(sum(np.sum(_edge_weights(phi.region, d) * g * g) for d, g in enumerate(grads)))


def energy_difference(phi: ScalarGrid, delta: np.ndarray) -> float:
    """``E(phi + delta) - E(phi)`` expanded edge by edge (no cancellation)."""
    region = phi.region
    gp = _edge_gradients(phi.values, region)
    gd = _edge_gradients(np.asarray(delta, dtype=float), region)
    return float(sum(np.sum(_edge_weights(region, d) * (2.0 * a + b) * b)
                     for d, (a, b) in enumerate(zip(gp, gd))))


def discrete_laplacian(values: np.ndarray, spacing) -> np.ndarray:
    """Full-shape array holding the 3-point-per-axis Laplacian on interior nodes, 0 elsewhere."""
    out = np.zeros_like(values, dtype=float)
    interior = tuple(slice(1, -1) for _ in range(values.ndim))
    for d in range(values.ndim):
        lo = list(interior)
        hi = list(interior)
        lo[d] = slice(0, -2)
        hi[d] = slice(2, None)
        out[interior] += (values[tuple(hi)] - 2.0 * values[interior] + values[tuple(lo)]) / spacing[d] ** 2
    return out


def smooth_once(delta: np.ndarray) -> np.ndarray:
    """One Jacobi averaging sweep on interior nodes; boundary stays zero."""
    out = np.zeros_like(delta)
    interior = tuple(slice(1, -1) for _ in range(delta.ndim))
    acc = np.zeros(tuple(s - 2 for s in delta.shape))
    for d in range(delta.ndim):
        lo = list(interior)
        hi = list(interior)
        lo[d] = slice(0, -2)
        hi[d] = slice(2, None)
        acc += delta[tuple(lo)] + delta[tuple(hi)]
    out[interior] = acc / (2 * delta.ndim)
    return out


def random_perturbation(shape, rng: np.random.Generator, magnitude: float) -> np.ndarray:
    """Smoothed zero-boundary noise scaled to max-norm ``magnitude``."""
    noise = rng.uniform(-1.0, 1.0, size=shape)
    noise[boundary_mask(shape)] = 0.0
    delta = smooth_once(noise)
    peak = float(np.max(np.abs(delta)))
    return delta * (magnitude / peak) if peak > 0 else delta


def descent_direction(phi: ScalarGrid, magnitude: float) -> np.ndarray:
    """Zero-boundary direction along the discrete Laplacian (energy decreases to first order)."""
    lap = discrete_laplacian(phi.values, phi.region.spacing)
    peak = float(np.max(np.abs(lap)))
    return lap * (magnitude / peak) if peak > 0 else lap


def _level_box_flux(delta: np.ndarray, region: Region) -> float:
    """Net discrete flux of ``grad delta`` out of the central half-size node box."""
    lap = discrete_laplacian(delta, region.spacing)
    box = tuple(slice(c // 4, c - c // 4) for c in region.counts)
    return float(np.sum(lap[box]) * np.prod(region.spacing))


@dataclass
class ProbeStats:
    magnitude: float
    energy_differences: np.ndarray
    flux_differences: np.ndarray

    @property
    def min(self) -> float:
        return float(np.min(self.energy_differences))

    @property
    def max(self) -> float:
        return float(np.max(self.energy_differences))

    @property
    def mean(self) -> float:
        return float(np.mean(self.energy_differences))

    @property
    def positive(self) -> int:
        return int(np.sum(self.energy_differences > 0))

    def rows(self) -> list[tuple[str, object]]:
        return [
            ("probe.magnitude", self.magnitude),
            ("probe.count", len(self.energy_differences)),
            ("probe.positive", self.positive),
            ("probe.energy_min", self.min),
            ("probe.energy_max", self.max),
            ("probe.energy_mean", self.mean),
            ("probe.flux_abs_max", float(np.max(np.abs(self.flux_differences)))),
        ]


def stationarity_probe(phi: ScalarGrid, perturbations: int = 100, magnitude: float = 1e-3,
                       seed: int = 0) -> ProbeStats:
    """Energy change under random zero-boundary perturbations of max-norm ``magnitude``.

    The flux column (change of the discrete flux through the central level box)
    is exploratory and carries no verdict.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 0x5EED])))
    energy = np.empty(perturbations)
    flux = np.empty(perturbations)
    for k in range(perturbations):
        delta = random_perturbation(phi.values.shape, rng, magnitude)
        energy[k] = energy_difference(phi, delta)
        flux[k] = _level_box_flux(delta, phi.region)
    return ProbeStats(magnitude, energy, flux)


def minimality_defect(phi: ScalarGrid, perturbations: int, magnitude: float, seed: int) -> float:
    """First-order energy decrease rate found by probing; 0 when nothing decreases energy."""
    stats = stationarity_probe(phi, perturbations, magnitude, seed)
    worst = min(stats.min, energy_difference(phi, descent_direction(phi, magnitude)))
    return max(0.0, -worst) / magnitude


def verify_harmonic_link(trials: int, seed: int = 0, tol: float = 1e-6, grid: int = 33,
                         perturbations: int = 20, magnitude: float = 1e-3,
                         degree: int = 3) -> VerdictTable:
    """Energy minimality (probe defect) vs. Laplacian residual on the unit square.

    Even trials solve the Dirichlet problem for a random harmonic polynomial;
    odd trials sample a generic random polynomial, which is not harmonic.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    region = Region.cube(2, 0.0, 1.0, grid)
    table = VerdictTable("harmonic", seed, tol)
    for trial in range(trials):
        rng = trial_rng(seed, trial)
        if trial % 2 == 0:
            kind = "harmonic"
            poly = random_harmonic(degree, rng)
            boundary = poly(region.nodes())
            # converge well below tol so the residual side sits inside it
            phi = solve_laplace_dirichlet(DirichletProblem(region, boundary, tol=tol * 1e-2))
        else:
            kind = "generic"
            poly = Polynomial.random(2, degree, rng)
            phi = ScalarGrid(region, poly(region.nodes()))
        right = laplacian_residual(phi)
        left = minimality_defect(phi, perturbations, magnitude, seed * 1_000_003 + trial)
        table.rows.append(TrialRow(trial, kind, left, right, agreement(left, right, tol)))
    return table


SUITES: dict[str, Callable[..., VerdictTable]] = {
    "stokes": verify_stokes_link,
    "gauss": verify_gauss_link,
    "harmonic": verify_harmonic_link,
}
