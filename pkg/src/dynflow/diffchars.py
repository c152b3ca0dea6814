"""Local (differential) characteristics of a flow sampled on a box lattice.

All residuals are max-norms over lattice nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .expr import DEFAULT_STEP, Expr, FlowField, evaluate_on, jacobian, space_variables

DEFAULT_GRID = 33
DEFAULT_TOL = 1e-6


@dataclass(frozen=True)
class Region:
    """Axis-aligned box ``prod [lo_i, hi_i]`` with ``counts[i]`` lattice nodes per axis."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        counts = tuple(int(c) for c in self.counts)
        if not (len(lo) == len(hi) == len(counts)) or not lo:
            raise ValueError("lo, hi and counts must have the same positive length")
        for a, b in zip(lo, hi):
            if not a < b:
                raise ValueError(f"degenerate extent [{a}, {b}]")
        if any(c < 2 for c in counts):
            raise ValueError("grid counts must be >= 2")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def cube(cls, dim: int, lo: float = -1.0, hi: float = 1.0, count: int = DEFAULT_GRID) -> "Region":
        return cls((lo,) * dim, (hi,) * dim, (count,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def spacing(self) -> np.ndarray:
        return (np.array(self.hi) - np.array(self.lo)) / (np.array(self.counts) - 1)

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(a, b, c) for a, b, c in zip(self.lo, self.hi, self.counts)]

    def nodes(self) -> np.ndarray:
        """Lattice nodes, shape ``counts + (dim,)`` in ``ij`` order."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def with_counts(self, counts: Sequence[int]) -> "Region":
        return Region(self.lo, self.hi, tuple(counts))


@dataclass(frozen=True, eq=False)
class ScalarGrid:
    """Values of a scalar function at the lattice nodes of ``region``."""

    region: Region
    values: np.ndarray
    gauge: float = 0.0  # value added so that the corner node reads ``gauge``

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.region.counts:
            raise ValueError(f"values shape {v.shape} does not match grid {self.region.counts}")
        object.__setattr__(self, "values", v)

    @classmethod
    def sample(cls, phi: Expr, region: Region) -> "ScalarGrid":
        return cls(region, evaluate_on(phi, space_variables(region.dim), region.nodes()))


@dataclass
class CharacteristicReport:
    residuals: dict[str, float]
    tolerances: dict[str, float]
    verdicts: dict[str, bool] = field(default_factory=dict)
    extras: dict[str, float] = field(default_factory=dict)

    def rows(self) -> list[tuple[str, object]]:
        out: list[tuple[str, object]] = []
        for name, value in self.residuals.items():
            out.append((f"{name}.residual", value))
            out.append((f"{name}.tol", self.tolerances[name]))
        for name, value in self.extras.items():
            out.append((name, value))
        for name, ok in self.verdicts.items():
            out.append((f"verdict.{name}", ok))
        return out


def _check_dims(field: FlowField, region: Region) -> None:
    if field.dim != region.dim:
        raise ValueError(f"field dimension {field.dim} != region dimension {region.dim}")


def skew_residual(field: FlowField, region: Region, h: float = DEFAULT_STEP) -> float:
    """``max |dA_i/dx_j - dA_j/dx_i|`` over nodes and index pairs."""
    _check_dims(field, region)
    jac = jacobian(field, region.nodes(), h)
    return float(np.max(np.abs(jac - np.swapaxes(jac, -1, -2))))


def divergence_residual(field: FlowField, region: Region, h: float = DEFAULT_STEP) -> float:
    """``max |sum_i dA_i/dx_i|`` over nodes."""
    _check_dims(field, region)
    jac = jacobian(field, region.nodes(), h)
    return float(np.max(np.abs(np.trace(jac, axis1=-2, axis2=-1))))


def _cumtrapz(values: np.ndarray, axis: int, step: float) -> np.ndarray:
    v = np.moveaxis(values, axis, 0)
    out = np.zeros_like(v)
    out[1:] = np.cumsum(0.5 * step * (v[1:] + v[:-1]), axis=0)
    return np.moveaxis(out, 0, axis)


def _staircase(prefix: list[np.ndarray], order: Sequence[int], n: int) -> np.ndarray:
    """Sum of axis line integrals along a staircase visiting axes in ``order``.

    Axes not yet visited sit at the region corner (index 0); visited axes sit
    at the target index.
    """
    total = 0.0
    visited: set[int] = set()
    for d in order:
        index = tuple(slice(None) if (k == d or k in visited) else slice(0, 1) for k in range(n))
        total = total + prefix[d][index]
        visited.add(d)
    return np.broadcast_to(total, prefix[0].shape)


def reconstruct_potential(field: FlowField, region: Region) -> tuple[ScalarGrid, float]:
    """Line-integral potential from the lattice corner, plus a path-independence residual.

    The potential integrates along the staircase visiting axes ``1, 2, ..., n``
    (composite trapezoid on the lattice); the residual is the largest
    discrepancy against the staircase visiting ``n, ..., 1``.
    """
    _check_dims(field, region)
    n = region.dim
    comps = field.evaluate(region.nodes())
    spacing = region.spacing
    prefix = [_cumtrapz(comps[..., d], d, spacing[d]) for d in range(n)]
    forward = _staircase(prefix, range(n), n)
    backward = _staircase(prefix, range(n - 1, -1, -1), n)
    residual = float(np.max(np.abs(forward - backward)))
    return ScalarGrid(region, np.array(forward), gauge=0.0), residual


def _second_difference_sum(values: np.ndarray, spacing: np.ndarray) -> np.ndarray:
    n = values.ndim
    interior = tuple(slice(1, -1) for _ in range(n))
    lap = np.zeros(tuple(c - 2 for c in values.shape))
    for d in range(n):
        lo = list(interior)
        hi = list(interior)
        lo[d] = slice(0, -2)
        hi[d] = slice(2, None)
        lap += (values[tuple(hi)] - 2.0 * values[interior] + values[tuple(lo)]) / spacing[d] ** 2
    return lap


def laplacian_residual(phi, region: Region | None = None) -> float:
    """Max over interior nodes of the 3-point-per-axis discrete Laplacian.

    ``phi`` is either a :class:`ScalarGrid` or an expression sampled on ``region``.
    """
    if isinstance(phi, ScalarGrid):
        grid = phi
    else:
        if region is None:
            raise ValueError("an expression needs a region")
        grid = ScalarGrid.sample(phi, region)
    if any(c < 3 for c in grid.region.counts):
        raise ValueError("grid too small: need at least 3 nodes per axis")
    return float(np.max(np.abs(_second_difference_sum(grid.values, grid.region.spacing))))


def classify_flow(field: FlowField, region: Region, tol: float | dict = DEFAULT_TOL,
                  h: float = DEFAULT_STEP) -> CharacteristicReport:
    """Evaluate the four local criteria and derive the verdicts.

    ``tol`` is one tolerance for every criterion or a dict keyed by
    ``skew``, ``divergence``, ``path_independence``, ``harmonicity``.
    """
    names = ("skew", "divergence", "path_independence", "harmonicity")
    tols = dict.fromkeys(names, tol) if not isinstance(tol, dict) else {k: tol.get(k, DEFAULT_TOL) for k in names}
    potential, path_res = reconstruct_potential(field, region)
    residuals = {
        "skew": skew_residual(field, region, h),
        "divergence": divergence_residual(field, region, h),
        "path_independence": path_res,
        "harmonicity": laplacian_residual(potential),
    }
    ok = {k: residuals[k] <= tols[k] for k in names}
    laminar = ok["skew"] and ok["path_independence"]
    verdicts = {
        "skew_closed": ok["skew"],
        "direct_closed": ok["divergence"],
        "laminar": laminar,
        "harmonic": laminar and ok["harmonicity"],
    }
    return CharacteristicReport(residuals, tols, verdicts, {"potential.gauge": potential.gauge})
