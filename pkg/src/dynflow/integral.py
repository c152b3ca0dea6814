"""Integral characteristics: circulation, flux, instrument area, normalized flux.

Curves and surfaces are integrated with the composite midpoint rule on
uniform parameter grids.  Surface orientation follows the Hodge dual of the
tangent blade ``dX/du1 ^ ... ^ dX/du{n-1}``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import exterior as ext
from .expr import (
    DSLError,
    DSLSyntaxError,
    Expr,
    FlowField,
    evaluate_on,
    parse_expr,
    parse_statements,
    read_dim,
)

DEFAULT_SEGMENTS = 4096
DEFAULT_SURFACE_GRID = 64
DEFAULT_FACE_GRID = 32
CLOSURE_TOL = 1e-9


class DegenerateElementError(ValueError):
    def __init__(self, message: str, location=None):
        if location is not None:
            message = f"{message} at parameter {tuple(float(v) for v in np.ravel(location))}"
        super().__init__(message)
        self.location = location


# curves

@dataclass(frozen=True)
class CurvePath:
    """Parametric curve ``t -> (x1(t), ..., xn(t))`` for ``t`` in [0, 1]."""

    dim: int
    coords: tuple
    closed: bool = True
    segments: int = DEFAULT_SEGMENTS

    def __post_init__(self):
        if len(self.coords) != self.dim:
            raise DSLError(f"expected {self.dim} coordinate expressions, got {len(self.coords)}")
        if self.segments < 3:
            raise ValueError("segment count must be >= 3")
        if self.closed:
            ends = self.position(np.array([0.0, 1.0]))
            gap = float(np.max(np.abs(ends[1] - ends[0])))
            if gap > CLOSURE_TOL:
                raise ValueError(f"curve marked closed but endpoints differ by {gap:.3g}")

    def position(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.stack([evaluate_on(c, ("t",), t[..., None]) for c in self.coords], axis=-1)

    def quadrature(self) -> tuple[np.ndarray, np.ndarray]:
        """Segment midpoints and chord vectors, in parameter order."""
        t = np.linspace(0.0, 1.0, self.segments + 1)
        nodes = self.position(t)
        mids = self.position(0.5 * (t[1:] + t[:-1]))
        return mids, np.diff(nodes, axis=0)


@dataclass(frozen=True, eq=False)
class PolylinePath:
    """Piecewise-linear path through ``vertices``; closed paths return to the first vertex."""

    vertices: np.ndarray
    closed: bool = True
    segments_per_edge: int = DEFAULT_SEGMENTS

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if v.shape[0] < 2:
            raise ValueError("a polyline needs at least two vertices")
        object.__setattr__(self, "vertices", v)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def corners(self) -> np.ndarray:
        return np.vstack([self.vertices, self.vertices[:1]]) if self.closed else self.vertices

    def quadrature(self) -> tuple[np.ndarray, np.ndarray]:
        c = self.corners()
        k = self.segments_per_edge
        s = (np.arange(k) + 0.5) / k
        mids = c[:-1, None, :] + s[None, :, None] * (c[1:] - c[:-1])[:, None, :]
        chords = np.repeat(((c[1:] - c[:-1]) / k)[:, None, :], k, axis=1)
        return mids.reshape(-1, self.dim), chords.reshape(-1, self.dim)


def circulation(field: FlowField, curve) -> float:
    """Midpoint-rule line integral of the flow around a closed curve."""
    if not curve.closed:
        raise ValueError("circulation requires a closed curve")
    if curve.dim != field.dim:
        raise ValueError(f"curve dimension {curve.dim} != field dimension {field.dim}")
    mids, chords = curve.quadrature()
    return float(np.sum(np.einsum("ij,ij->i", field.evaluate(mids), chords)))


# surfaces

@dataclass(frozen=True)
class SurfacePatch:
    """Parametric (n-1)-surface ``[0,1]^(n-1) -> R^n``.

    Tangents use a five-point central difference of step ``step`` in each
    parameter.
    """

    dim: int
    coords: tuple
    counts: tuple = ()
    closed: bool = False
    step: float = 1e-3

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("surfaces need ambient dimension >= 2")
        if len(self.coords) != self.dim:
            raise DSLError(f"expected {self.dim} coordinate expressions, got {len(self.coords)}")
        counts = tuple(self.counts) or (DEFAULT_SURFACE_GRID,) * (self.dim - 1)
        if len(counts) != self.dim - 1 or any(c < 2 for c in counts):
            raise ValueError("need one grid count >= 2 per parameter")
        object.__setattr__(self, "counts", tuple(int(c) for c in counts))

    @property
    def params(self) -> tuple[str, ...]:
        return tuple(f"u{k}" for k in range(1, self.dim))

    def position(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.stack([evaluate_on(c, self.params, u) for c in self.coords], axis=-1)

    def tangents(self, u: np.ndarray) -> np.ndarray:
        """Shape ``(..., n-1, n)``: row k is ``dX/du_k``."""
        u = np.asarray(u, dtype=float)
        h = self.step
        rows = []
        for k in range(self.dim - 1):
            e = np.zeros(self.dim - 1)
            e[k] = h
            d = (8.0 * (self.position(u + e) - self.position(u - e))
                 - (self.position(u + 2 * e) - self.position(u - 2 * e))) / (12.0 * h)
            rows.append(d)
        return np.stack(rows, axis=-2)

    def cell_centers(self) -> tuple[np.ndarray, float]:
        axes = [(np.arange(c) + 0.5) / c for c in self.counts]
        u = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim - 1)
        return u, float(np.prod([1.0 / c for c in self.counts]))

    def reversed(self) -> "SurfacePatch":
        """Same surface with the first parameter reversed (opposite orientation)."""
        from .expr import BinOp, Num, Var, substitute

        flipped = BinOp("-", Num(1.0), Var("u1"))
        coords = tuple(substitute(c, {"u1": flipped}) for c in self.coords)
        return SurfacePatch(self.dim, coords, self.counts, self.closed, self.step)


@dataclass(frozen=True)
class SurfaceElement:
    blade: ext.GradedElement
    area_density: float
    unit_normal: np.ndarray


def _elements(surface: SurfacePatch, u: np.ndarray):
    tang = surface.tangents(u)
    blades = ext.blade_coefficients(tang)
    area = np.sqrt(np.sum(blades * blades, axis=-1))
    scale = np.prod(np.linalg.norm(tang, axis=-1), axis=-1)
    bad = ~(area > 1e-10 * scale) | (scale == 0)
    if np.any(bad):
        first = np.argmax(np.ravel(bad))
        raise DegenerateElementError("degenerate surface element", np.reshape(u, (-1, u.shape[-1]))[first])
    normals = ext.hodge_coefficients(blades, surface.dim, surface.dim - 1) / area[..., None]
    return blades, area, normals


def surface_element_at(surface: SurfacePatch, u: Sequence[float]) -> SurfaceElement:
    u = np.asarray(u, dtype=float).reshape(surface.dim - 1)
    blades, area, normals = _elements(surface, u[None, :])
    blade = ext.GradedElement(surface.dim, surface.dim - 1, blades[0])
    return SurfaceElement(blade, float(area[0]), normals[0])


# box instruments

@dataclass(frozen=True)
class BoxFace:
    axis: int  # 0-based
    side: int  # +1 outer, -1 inner face along the axis
    center: np.ndarray
    edges: np.ndarray  # full box edge lengths

    @property
    def normal(self) -> np.ndarray:
        n = np.zeros(len(self.edges))
        n[self.axis] = self.side
        return n

    @property
    def area(self) -> float:
        return float(np.prod(np.delete(self.edges, self.axis)))

    def blade(self) -> ext.GradedElement:
        """Oriented unit tangent blade whose Hodge dual is the outward normal."""
        dim = len(self.edges)
        rest = tuple(i + 1 for i in range(dim) if i != self.axis)
        sign = ext.merge_sign(rest, (self.axis + 1,))
        return ext.GradedElement.blade(dim, rest, coeff=sign * self.side)

    def cell_centers(self, count: int) -> tuple[np.ndarray, float]:
        dim = len(self.edges)
        axes = []
        for k in range(dim):
            if k == self.axis:
                axes.append(np.array([self.center[k]]))
            else:
                lo = self.center[k] - 0.5 * self.edges[k]
                axes.append(lo + (np.arange(count) + 0.5) * self.edges[k] / count)
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
        return pts, self.area / count ** (dim - 1)


@dataclass(frozen=True, eq=False)
class BoxInstrument:
    """Boundary of an axis-aligned n-parallelepiped as 2n outward-oriented faces."""

    center: np.ndarray
    edges: np.ndarray
    resolution: int = DEFAULT_FACE_GRID

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(-1)
        e = np.asarray(self.edges, dtype=float).reshape(-1)
        if c.shape != e.shape:
            raise ValueError("center and edges must have equal length")
        if np.any(~(e > 0)):
            raise ValueError(f"edge lengths must be positive, got {e.tolist()}")
        if self.resolution < 1:
            raise ValueError("face resolution must be >= 1")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "edges", e)

    @property
    def dim(self) -> int:
        return len(self.edges)

    @property
    def volume(self) -> float:
        return float(np.prod(self.edges))

    @property
    def closed(self) -> bool:
        return True

    def faces(self) -> list[BoxFace]:
        out = []
        for axis in range(self.dim):
            for side in (-1, 1):
                c = self.center.copy()
                c[axis] += 0.5 * side * self.edges[axis]
                out.append(BoxFace(axis, side, c, self.edges))
        return out

    def with_resolution(self, resolution: int) -> "BoxInstrument":
        return BoxInstrument(self.center, self.edges, resolution)


def box_boundary(center: Sequence[float], edges: Sequence[float],
                 resolution: int = DEFAULT_FACE_GRID) -> BoxInstrument:
    return BoxInstrument(np.asarray(center, float), np.asarray(edges, float), resolution)


def box_from_bounds(lo: Sequence[float], hi: Sequence[float],
                    resolution: int = DEFAULT_FACE_GRID) -> BoxInstrument:
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    return box_boundary(0.5 * (lo + hi), hi - lo, resolution)


# integral sums

def _check(field: FlowField, instrument) -> None:
    if field.dim != instrument.dim:
        raise ValueError(f"field dimension {field.dim} != instrument dimension {instrument.dim}")


def _face_samples(field: FlowField, box: BoxInstrument):
    """Per face: ``(face, cell centers, cell weight, flow at centers)``."""
    return _batched_face_samples(field, [box])[0]


def _batched_face_samples(field: FlowField, boxes):
    # one evaluation call for every face of every box
    layout = []
    for box in boxes:
        layout.append([(face,) + face.cell_centers(box.resolution) for face in box.faces()])
    flow = field.evaluate(np.concatenate([pts for faces in layout for _, pts, _ in faces]))
    out = []
    start = 0
    for faces in layout:
        samples = []
        for face, pts, w in faces:
            samples.append((face, pts, w, flow[start:start + len(pts)]))
            start += len(pts)
        out.append(samples)
    return out


def box_fluxes(field: FlowField, boxes) -> list[float]:
    """:func:`integral_measure` for many boxes at once."""
    for box in boxes:
        _check(field, box)
    out = []
    for samples in _batched_face_samples(field, boxes):
        total = 0.0
        for face, _, w, flow in samples:
            total += face.side * w * float(np.sum(flow[:, face.axis]))
        out.append(total)
    return out


def integral_measure(field: FlowField, instrument, absolute: bool = False) -> float:
    """Flux of the flow through a surface patch or out of a box.

    With ``absolute`` the normal component enters by magnitude, giving the
    total unsigned flux.
    """
    _check(field, instrument)
    fold = np.abs if absolute else (lambda v: v)
    if isinstance(instrument, BoxInstrument):
        total = 0.0
        for face, pts, w, flow in _face_samples(field, instrument):
            total += w * float(np.sum(fold(face.side * flow[:, face.axis])))
        return total
    u, w = instrument.cell_centers()
    blades, area, normals = _elements(instrument, u)
    flow = field.evaluate(instrument.position(u))
    return float(np.sum(fold(np.einsum("ij,ij->i", flow, normals)) * area) * w)


def integral_instrument_norm(instrument) -> float:
    """Total (n-1)-area of the instrument."""
    if isinstance(instrument, BoxInstrument):
        return float(sum(face.area for face in instrument.faces()))
    u, w = instrument.cell_centers()
    _, area, _ = _elements(instrument, u)
    return float(np.sum(area) * w)


def integral_normalized_measure(field: FlowField, instrument, absolute: bool = False) -> float:
    """Area-averaged cosine between the flow and the unit normal.

    With ``absolute`` the magnitude of the cosine is averaged instead.
    """
    _check(field, instrument)
    if isinstance(instrument, BoxInstrument):
        num = 0.0
        for face, pts, w, a in _face_samples(field, instrument):
            mag = _nonzero_norm(a, pts)
            cos = face.side * a[:, face.axis] / mag
            num += w * float(np.sum(np.abs(cos) if absolute else cos))
        return num / integral_instrument_norm(instrument)
    u, w = instrument.cell_centers()
    _, area, normals = _elements(instrument, u)
    a = field.evaluate(instrument.position(u))
    cos = np.einsum("ij,ij->i", a, normals) / _nonzero_norm(a, u)
    if absolute:
        cos = np.abs(cos)
    return float(np.sum(cos * area) / np.sum(area))


def _nonzero_norm(a: np.ndarray, where: np.ndarray) -> np.ndarray:
    mag = np.linalg.norm(a, axis=-1)
    if np.any(mag == 0):
        k = int(np.argmax(mag == 0))
        raise ValueError(f"flow vanishes at quadrature node {tuple(float(v) for v in where[k])}")
    return mag


def box_divergence_integral(field: FlowField, box: BoxInstrument, count: int,
                            h: float = 1e-4) -> float:
    """Midpoint-rule volume integral of the central-difference divergence."""
    from .expr import jacobian

    _check(field, box)
    lo = box.center - 0.5 * box.edges
    axes = [lo[k] + (np.arange(count) + 0.5) * box.edges[k] / count for k in range(box.dim)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, box.dim)
    div = np.trace(jacobian(field, pts, h), axis1=-2, axis2=-1)
    return float(np.sum(div) * box.volume / count ** box.dim)


# definition files

_BOX_RE = re.compile(r"\[\s*([^,\]]+)\s*,\s*([^\]]+)\s*\]")


def _parse_bool(s) -> bool:
    v = s.rhs.strip().lower()
    if v not in ("true", "false"):
        raise DSLSyntaxError(f"expected true or false, got {s.rhs!r}", s.line, s.column)
    return v == "true"


def parse_box(text: str, line: int = 1, column: int = 1) -> tuple[list[float], list[float]]:
    """Parse ``[a1,b1]x[a2,b2]x...`` into lower and upper bounds."""
    pieces = _BOX_RE.findall(text)
    rebuilt = "x".join(f"[{a},{b}]" for a, b in pieces)
    if not pieces or re.sub(r"\s+", "", rebuilt) != re.sub(r"\s+", "", text):
        raise DSLSyntaxError(f"bad box {text!r}", line, column)
    lo, hi = [], []
    for a, b in pieces:
        try:
            lo.append(float(a))
            hi.append(float(b))
        except ValueError:
            raise DSLSyntaxError(f"bad box bound in {text!r}", line, column) from None
    return lo, hi


def _coordinate_exprs(stmts, dim: int, params: tuple[str, ...], kind: str) -> tuple:
    coords: dict[int, Expr] = {}
    for s in stmts:
        m = re.fullmatch(r"x(\d+)", s.key)
        if not m:
            continue
        k = int(m.group(1))
        if not 1 <= k <= dim:
            raise DSLSyntaxError(f"coordinate {s.key} outside 1..{dim}", s.line, s.column)
        if s.args != params:
            raise DSLSyntaxError(
                f"{kind} coordinates take ({', '.join(params)}), got ({', '.join(s.args)})",
                s.line, s.column)
        coords[k] = parse_expr(s.rhs, params, aliases=False, line=s.line, column=s.column)
    missing = [k for k in range(1, dim + 1) if k not in coords]
    if missing:
        raise DSLSyntaxError(f"missing coordinates {', '.join(f'x{k}' for k in missing)}", 1, 1)
    return tuple(coords[k] for k in range(1, dim + 1))


def _reject_unknown(stmts, allowed: set[str], pattern: str, kind: str) -> None:
    for s in stmts:
        if s.key not in allowed and not re.fullmatch(pattern, s.key):
            raise DSLSyntaxError(f"unknown key {s.key!r} in {kind} file", s.line, s.column)


def parse_curve_spec(text: str, segments: int = DEFAULT_SEGMENTS) -> CurvePath:
    stmts = parse_statements(text)
    dim = read_dim(stmts)
    _reject_unknown(stmts, {"dim", "closed"}, r"x\d+", "curve")
    closed = False
    for s in stmts:
        if s.key == "closed":
            closed = _parse_bool(s)
    return CurvePath(dim, _coordinate_exprs(stmts, dim, ("t",), "curve"), closed, segments)


def parse_surface_spec(text: str, grid: int = DEFAULT_SURFACE_GRID):
    """Build a :class:`SurfacePatch` or, for ``box = ...``, a :class:`BoxInstrument`."""
    stmts = parse_statements(text)
    dim = read_dim(stmts)
    _reject_unknown(stmts, {"dim", "closed", "box"}, r"x\d+", "surface")
    boxes = [s for s in stmts if s.key == "box"]
    if boxes:
        s = boxes[0]
        lo, hi = parse_box(s.rhs, s.line, s.column)
        if len(lo) != dim:
            raise DSLSyntaxError(f"box has {len(lo)} intervals, dim is {dim}", s.line, s.column)
        try:
            return box_from_bounds(lo, hi, grid)
        except ValueError as exc:
            raise DSLSyntaxError(str(exc), s.line, s.column) from None
    closed = False
    for s in stmts:
        if s.key == "closed":
            closed = _parse_bool(s)
    params = tuple(f"u{k}" for k in range(1, dim))
    coords = _coordinate_exprs(stmts, dim, params, "surface")
    return SurfacePatch(dim, coords, (grid,) * (dim - 1), closed)
