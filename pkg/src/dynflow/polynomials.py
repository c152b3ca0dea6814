"""Seeded random polynomial potentials and fields.

Algorithm: monomials of total degree <= d are enumerated in graded
lexicographic order (degree ascending, then exponent tuples descending), and
each receives a coefficient drawn uniformly from [-1, 1] by a PCG64 generator
seeded with ``SeedSequence([seed, trial])``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .expr import BinOp, Expr, FlowField, Neg, Num, Var


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(trial)])))


def monomials(dim: int, degree: int) -> list[tuple[int, ...]]:
    out = []
    for total in range(degree + 1):
        level = [e for e in itertools.product(range(total + 1), repeat=dim) if sum(e) == total]
        out.extend(sorted(level, reverse=True))
    return out


@dataclass(frozen=True)
class Polynomial:
    dim: int
    terms: tuple[tuple[tuple[int, ...], float], ...]

    @classmethod
    def random(cls, dim: int, degree: int, rng: np.random.Generator) -> "Polynomial":
        exps = monomials(dim, degree)
        coeffs = rng.uniform(-1.0, 1.0, size=len(exps))
        return cls(dim, tuple(zip(exps, (float(c) for c in coeffs))))

    def derivative(self, axis: int) -> "Polynomial":
        out: dict[tuple[int, ...], float] = {}
        for exp, c in self.terms:
            if exp[axis] == 0:
                continue
            new = list(exp)
            new[axis] -= 1
            out[tuple(new)] = out.get(tuple(new), 0.0) + c * exp[axis]
        return Polynomial(self.dim, tuple(out.items()))

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        out = dict(self.terms)
        for exp, c in other.terms:
            out[exp] = out.get(exp, 0.0) - c
        return Polynomial(self.dim, tuple(out.items()))

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.dim, tuple((e, -c) for e, c in self.terms))

    def to_expr(self) -> Expr:
        node: Expr | None = None
        for exp, c in self.terms:
            if c == 0.0:
                continue
            term: Expr = Num(abs(c))
            for k, p in enumerate(exp):
                if p == 1:
                    term = BinOp("*", term, Var(f"x{k + 1}"))
                elif p > 1:
                    term = BinOp("*", term, BinOp("^", Var(f"x{k + 1}"), Num(float(p))))
            if node is None:
                node = Neg(term) if c < 0 else term
            else:
                node = BinOp("-" if c < 0 else "+", node, term)
        return node if node is not None else Num(0.0)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        total = np.zeros(pts.shape[:-1])
        for exp, c in self.terms:
            total = total + c * np.prod(pts ** np.array(exp), axis=-1)
        return total


def field_from(polys) -> FlowField:
    polys = list(polys)
    return FlowField(len(polys), tuple(p.to_expr() for p in polys))


def random_field(dim: int, degree: int, rng: np.random.Generator) -> FlowField:
    return field_from(Polynomial.random(dim, degree, rng) for _ in range(dim))


def random_gradient(dim: int, degree: int, rng: np.random.Generator) -> FlowField:
    """Exact gradient of a random potential of the given degree."""
    phi = Polynomial.random(dim, degree, rng)
    f = field_from(phi.derivative(k) for k in range(dim))
    return FlowField(dim, f.components, potential=phi.to_expr())


def random_solenoidal(dim: int, degree: int, rng: np.random.Generator) -> FlowField:
    """Divergence-free field: rotated gradient of a stream function (n=2) or a curl (n=3)."""
    if dim == 2:
        psi = Polynomial.random(2, degree, rng)
        return field_from([psi.derivative(1), -psi.derivative(0)])
    if dim == 3:
        a = [Polynomial.random(3, degree, rng) for _ in range(3)]
        return field_from([
            a[2].derivative(1) - a[1].derivative(2),
            a[0].derivative(2) - a[2].derivative(0),
            a[1].derivative(0) - a[0].derivative(1),
        ])
    raise ValueError("solenoidal construction supports dim 2 or 3")


def random_harmonic(degree: int, rng: np.random.Generator) -> Polynomial:
    """Real part of a random complex polynomial in ``x1 + i x2``."""
    re = rng.uniform(-1.0, 1.0, size=degree + 1)
    im = rng.uniform(-1.0, 1.0, size=degree + 1)
    out: dict[tuple[int, int], float] = {}
    for k in range(degree + 1):
        # Re[(a + ib)(x + iy)^k] = sum_j C(k,j) x^(k-j) y^j Re[(a+ib) i^j]
        for j in range(k + 1):
            binom = float(math.comb(k, j))
            ij = [1, 1j, -1, -1j][j % 4]
            c = (complex(re[k], im[k]) * ij).real * binom
            if c:
                key = (k - j, j)
                out[key] = out.get(key, 0.0) + c
    return Polynomial(2, tuple(out.items()))
