"""Euclidean exterior algebra over R^n.

Elements of a single grade are stored as coefficient vectors over the
lexicographically ordered basis of multi-indices ``(i1 < i2 < ... < im)``,
1-based.  Orientation convention for the Hodge star::

    *e_I = sign(I, I^c) e_{I^c}

so that ``*e_{1..m} = e_{m+1..n}``, ``*1 = e_{1..n}`` and
``e_I ^ *e_I = e_{1..n}``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

VECTOR = "vector"
FORM = "form"


class AlgebraError(ValueError):
    """Raised on incompatible dimensions, grades or spaces."""


class GradeOverflowError(AlgebraError):
    pass


@lru_cache(maxsize=None)
def basis(dim: int, grade: int) -> tuple[tuple[int, ...], ...]:
    """Lexicographically ordered multi-indices of the given grade."""
    if dim < 1:
        raise AlgebraError(f"dimension must be positive, got {dim}")
    if not 0 <= grade <= dim:
        raise AlgebraError(f"grade {grade} outside [0, {dim}]")
    return tuple(itertools.combinations(range(1, dim + 1), grade))


@lru_cache(maxsize=None)
def _position(dim: int, grade: int) -> dict[tuple[int, ...], int]:
    return {idx: k for k, idx in enumerate(basis(dim, grade))}


def validate_multi_index(dim: int, indices: Sequence[int]) -> tuple[int, ...]:
    indices = tuple(int(i) for i in indices)
    if any(i < 1 or i > dim for i in indices):
        raise AlgebraError(f"index out of range [1, {dim}] in {indices}")
    if any(a >= b for a, b in zip(indices, indices[1:])):
        raise AlgebraError(f"indices must be strictly increasing: {indices}")
    return indices


def merge_sign(left: Sequence[int], right: Sequence[int]) -> int:
    """Sign of the permutation sorting ``left + right``; 0 on a repeated index.

    Both inputs must be strictly increasing.  Counts inversions during a merge.
    """
    sign = 1
    i = j = 0
    while i < len(left) and j < len(right):
        if left[i] == right[j]:
            return 0
        if left[i] < right[j]:
            i += 1
        else:
            # right[j] jumps over every remaining element of left
            if (len(left) - i) % 2:
                sign = -sign
            j += 1
    return sign


@lru_cache(maxsize=None)
def _wedge_table(dim: int, p: int, q: int):
    """Flat (target, sign) arrays for every pair of basis blades."""
    right = basis(dim, q)
    pos = _position(dim, p + q)
    target = np.zeros((len(basis(dim, p)), len(right)), dtype=np.intp)
    sign = np.zeros(target.shape)
    for a, idx_a in enumerate(basis(dim, p)):
        for b, idx_b in enumerate(right):
            s = merge_sign(idx_a, idx_b)
            if s:
                target[a, b] = pos[tuple(sorted(idx_a + idx_b))]
                sign[a, b] = s
    target.setflags(write=False)
    sign.setflags(write=False)
    return target, sign


@lru_cache(maxsize=None)
def hodge_table(dim: int, grade: int) -> tuple[np.ndarray, np.ndarray]:
    """Target positions and signs of ``*`` on each basis blade of ``grade``."""
    pos = _position(dim, dim - grade)
    full = tuple(range(1, dim + 1))
    target = np.empty(len(basis(dim, grade)), dtype=np.intp)
    sign = np.empty(len(basis(dim, grade)))
    for k, idx in enumerate(basis(dim, grade)):
        comp = tuple(i for i in full if i not in idx)
        target[k] = pos[comp]
        sign[k] = merge_sign(idx, comp)
    target.setflags(write=False)
    sign.setflags(write=False)
    return target, sign


@dataclass(frozen=True, eq=False)
class GradedElement:
    """Homogeneous element of the exterior algebra of R^n (or of its dual).

    ``space`` distinguishes m-vectors (instruments) from m-forms (actions);
    under the positive Euclidean metric the two are identified coefficient by
    coefficient, see :func:`conjugate`.
    """

    dim: int
    grade: int
    coeffs: np.ndarray = field(repr=False)
    space: str = VECTOR

    def __post_init__(self):
        if self.space not in (VECTOR, FORM):
            raise AlgebraError(f"unknown space tag {self.space!r}")
        size = len(basis(self.dim, self.grade))
        c = np.array(self.coeffs, dtype=float).reshape(-1)
        if c.shape[0] != size:
            raise AlgebraError(
                f"grade {self.grade} in dimension {self.dim} needs {size} "
                f"coefficients, got {c.shape[0]}"
            )
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # construction helpers

    @classmethod
    def zero(cls, dim: int, grade: int, space: str = VECTOR) -> "GradedElement":
        return cls(dim, grade, np.zeros(len(basis(dim, grade))), space)

    @classmethod
    def scalar(cls, dim: int, value: float = 1.0, space: str = VECTOR) -> "GradedElement":
        return cls(dim, 0, [value], space)

    @classmethod
    def blade(cls, dim: int, indices: Iterable[int], coeff: float = 1.0,
              space: str = VECTOR) -> "GradedElement":
        idx = validate_multi_index(dim, tuple(indices))
        c = np.zeros(len(basis(dim, len(idx))))
        c[_position(dim, len(idx))[idx]] = coeff
        return cls(dim, len(idx), c, space)

    @classmethod
    def vector(cls, components: Sequence[float], space: str = VECTOR) -> "GradedElement":
        return cls(len(components), 1, components, space)

    @classmethod
    def pseudoscalar(cls, dim: int, space: str = VECTOR) -> "GradedElement":
        return cls.blade(dim, range(1, dim + 1), space=space)

    # arithmetic

    def _check_same(self, other: "GradedElement") -> None:
        if not isinstance(other, GradedElement):
            raise TypeError(f"expected GradedElement, got {type(other).__name__}")
        if other.dim != self.dim:
            raise AlgebraError(f"dimension mismatch: {self.dim} vs {other.dim}")
        if other.grade != self.grade:
            raise AlgebraError(f"grade mismatch: {self.grade} vs {other.grade}")

    def __add__(self, other: "GradedElement") -> "GradedElement":
        self._check_same(other)
        return GradedElement(self.dim, self.grade, self.coeffs + other.coeffs, self.space)

    def __sub__(self, other: "GradedElement") -> "GradedElement":
        self._check_same(other)
        return GradedElement(self.dim, self.grade, self.coeffs - other.coeffs, self.space)

    def __neg__(self) -> "GradedElement":
        return GradedElement(self.dim, self.grade, -self.coeffs, self.space)

    def __mul__(self, k: float) -> "GradedElement":
        return GradedElement(self.dim, self.grade, float(k) * self.coeffs, self.space)

    __rmul__ = __mul__

    def __truediv__(self, k: float) -> "GradedElement":
        return GradedElement(self.dim, self.grade, self.coeffs / float(k), self.space)

    def __xor__(self, other: "GradedElement") -> "GradedElement":
        return wedge(self, other)

    def isclose(self, other: "GradedElement", atol: float = 1e-12) -> bool:
        return (
            self.dim == other.dim
            and self.grade == other.grade
            and bool(np.all(np.abs(self.coeffs - other.coeffs) <= atol))
        )

    def terms(self) -> list[tuple[tuple[int, ...], float]]:
        """Nonzero ``(multi_index, coefficient)`` pairs in basis order."""
        return [(idx, float(c)) for idx, c in zip(basis(self.dim, self.grade), self.coeffs) if c]

    def __repr__(self) -> str:
        return f"GradedElement({format_element(self)}, dim={self.dim}, {self.space})"


def format_element(u: GradedElement, digits: int = 17) -> str:
    prefix = "dx" if u.space == FORM else "e"
    parts = []
    for idx, c in u.terms():
        blade = prefix + "".join(map(str, idx)) if idx else "1"
        parts.append(f"{c:.{digits}g}*{blade}")
    return " + ".join(parts) if parts else "0"


def wedge(u: GradedElement, v: GradedElement) -> GradedElement:
    """Exterior product; raises on dimension mismatch or grade overflow."""
    if u.dim != v.dim:
        raise AlgebraError(f"dimension mismatch: {u.dim} vs {v.dim}")
    if u.grade + v.grade > u.dim:
        raise GradeOverflowError(
            f"grade {u.grade} + {v.grade} exceeds dimension {u.dim}"
        )
    target, sign = _wedge_table(u.dim, u.grade, v.grade)
    out = np.zeros(len(basis(u.dim, u.grade + v.grade)))
    np.add.at(out, target.ravel(), (sign * np.outer(u.coeffs, v.coeffs)).ravel())
    return GradedElement(u.dim, u.grade + v.grade, out, u.space)


def scalar_product(u: GradedElement, v: GradedElement) -> float:
    """Euclidean inner product of same-grade elements."""
    u._check_same(v)
    return float(np.dot(u.coeffs, v.coeffs))


def norm(u: GradedElement) -> float:
    return math.sqrt(max(scalar_product(u, u), 0.0))


def normalized_measure(u: GradedElement, v: GradedElement) -> float:
    """Cosine of the angle between ``u`` and ``v``."""
    nu, nv = norm(u), norm(v)
    if nu == 0.0 or nv == 0.0:
        raise AlgebraError("normalized measure undefined for a zero argument")
    c = scalar_product(u, v) / (nu * nv)
    return min(1.0, max(-1.0, c))


def hodge_dual(u: GradedElement) -> GradedElement:
    target, sign = hodge_table(u.dim, u.grade)
    out = np.zeros(len(basis(u.dim, u.dim - u.grade)))
    out[target] = sign * u.coeffs
    return GradedElement(u.dim, u.dim - u.grade, out, u.space)


def conjugate(u: GradedElement) -> GradedElement:
    """Identify m-vectors with m-forms (and back) through the Euclidean metric."""
    return GradedElement(u.dim, u.grade, u.coeffs, FORM if u.space == VECTOR else VECTOR)


def pair_form_vector(f: GradedElement, w: GradedElement) -> float:
    """Evaluate an m-form on an m-vector."""
    if f.space != FORM or w.space != VECTOR:
        raise AlgebraError("pairing expects (form, vector)")
    return scalar_product(f, w)


def blade_from_vectors(vectors: Sequence[Sequence[float]]) -> GradedElement:
    """Wedge of the given vectors in order."""
    vs = np.atleast_2d(np.asarray(vectors, dtype=float))
    m, n = vs.shape
    if not 1 <= m <= n:
        raise AlgebraError(f"need between 1 and {n} vectors, got {m}")
    out = GradedElement.vector(vs[0])
    for v in vs[1:]:
        out = wedge(out, GradedElement.vector(v))
    return out


def blade_coefficients(tangents: np.ndarray) -> np.ndarray:
    """Batched :func:`blade_from_vectors`.

    ``tangents`` has shape ``(..., m, n)``; the result has shape
    ``(..., C(n, m))`` with the coefficient on ``e_I`` equal to the minor of
    the rows ``I`` (columns 1..m of the transposed tangent matrix).
    """
    t = np.asarray(tangents, dtype=float)
    m, n = t.shape[-2:]
    idx = np.array(basis(n, m)) - 1  # (C, m)
    # minors: columns of t restricted to I, shape (..., C, m, m)
    sub = np.moveaxis(t[..., :, idx], -2, -3)
    if m == 1:
        return sub[..., 0, 0]
    if m == 2:
        return sub[..., 0, 0] * sub[..., 1, 1] - sub[..., 0, 1] * sub[..., 1, 0]
    return np.linalg.det(sub)


def hodge_coefficients(coeffs: np.ndarray, dim: int, grade: int) -> np.ndarray:
    """Batched Hodge star on the last axis of a coefficient array."""
    target, sign = hodge_table(dim, grade)
    c = np.asarray(coeffs, dtype=float)
    out = np.zeros(c.shape[:-1] + (len(basis(dim, dim - grade)),))
    out[..., target] = sign * c
    return out


def parse_element(text: str, dim: int, space: str = VECTOR) -> GradedElement:
    """Parse ``"3*e12 - 4*e13"``-style input (single-digit indices, dim <= 9).

    The prefix ``e`` denotes vectors, ``dx`` forms; a bare number is grade 0.
    """
    import re

    if dim > 9:
        raise AlgebraError("textual blades support dim <= 9")
    term_re = re.compile(
        r"\s*([+-])?\s*(?:(\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)\s*\*?\s*)?"
        r"(?:(dx|e)(\d+))?\s*"
    )
    pos = 0
    terms = []
    text = text.strip()
    if not text:
        raise AlgebraError("empty element")
    while pos < len(text):
        m = term_re.match(text, pos)
        if not m or m.end() == pos or (m.group(2) is None and m.group(4) is None):
            raise AlgebraError(f"cannot parse element at column {pos + 1}: {text!r}")
        sign = -1.0 if m.group(1) == "-" else 1.0
        coeff = float(m.group(2)) if m.group(2) else 1.0
        idx = tuple(int(ch) for ch in m.group(4)) if m.group(4) else ()
        if m.group(3) == "dx":
            space = FORM
        terms.append((sign * coeff, idx))
        pos = m.end()
    grades = {len(idx) for _, idx in terms}
    if len(grades) != 1:
        raise AlgebraError("mixed grades are not supported")
    grade = grades.pop()
    out = GradedElement.zero(dim, grade, space)
    for c, idx in terms:
        s = _permutation_parity(idx)
        if s == 0:
            continue
        sorted_idx = tuple(sorted(idx))
        out = out + GradedElement.blade(dim, sorted_idx, s * c, space)
    return out


def _permutation_parity(seq: Sequence[int]) -> int:
    if len(set(seq)) != len(seq):
        return 0
    inversions = sum(1 for a, b in itertools.combinations(seq, 2) if a > b)
    return -1 if inversions % 2 else 1
