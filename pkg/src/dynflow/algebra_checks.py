"""Randomized identity checks for the exterior algebra.

Associativity is compared against a triple product expanded term by term,
with the sign of each concatenated multi-index found by cycle decomposition
rather than by the inversion count used in :mod:`dynflow.exterior`.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .exterior import (
    GradedElement,
    basis,
    hodge_dual,
    scalar_product,
    wedge,
)

PROPERTIES = (
    "anticommutativity",
    "associativity",
    "gram_determinant",
    "hodge_involution",
    "hodge_isometry",
    "wedge_hodge_pairing",
)
DEFAULT_TOL = 1e-10


def cycle_parity(seq) -> int:
    """Sign of the permutation sorting ``seq``; 0 if it has repeats."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    order = sorted(range(len(seq)), key=seq.__getitem__)
    seen = [False] * len(seq)
    sign = 1
    for start in range(len(seq)):
        length = 0
        k = start
        while not seen[k]:
            seen[k] = True
            k = order[k]
            length += 1
        if length and length % 2 == 0:
            sign = -sign
    return sign


def expanded_wedge(*elements: GradedElement) -> GradedElement:
    """Wedge of several elements by direct expansion over basis blades."""
    dim = elements[0].dim
    grade = sum(e.grade for e in elements)
    index = {idx: k for k, idx in enumerate(basis(dim, grade))}
    out = np.zeros(len(index))
    factors = [list(zip(basis(dim, e.grade), e.coeffs)) for e in elements]

    def walk(level, idx, coeff):
        if level == len(factors):
            s = cycle_parity(idx)
            if s:
                out[index[tuple(sorted(idx))]] += s * coeff
            return
        for sub, c in factors[level]:
            if c:
                walk(level + 1, idx + sub, coeff * c)

    walk(0, (), 1.0)
    return GradedElement(dim, grade, out)


def random_element(rng: np.random.Generator, dim: int, grade: int) -> GradedElement:
    return GradedElement(dim, grade, rng.uniform(-1.0, 1.0, size=len(basis(dim, grade))))


@dataclass
class AlgebraSuite:
    samples: int
    seed: int
    tol: float
    errors: dict[tuple[int, str], float] = field(default_factory=dict)
    seconds: float = 0.0

    def passed(self, dim: int, name: str) -> bool:
        return self.errors[(dim, name)] <= self.tol

    @property
    def all_pass(self) -> bool:
        return all(v <= self.tol for v in self.errors.values())

    def rows(self) -> list[tuple[str, object]]:
        out: list[tuple[str, object]] = [("samples", self.samples), ("seed", self.seed), ("tol", self.tol)]
        for (dim, name), err in self.errors.items():
            out.append((f"dim{dim}.{name}.max_error", err))
            out.append((f"dim{dim}.{name}.verdict", err <= self.tol))
        out.append(("verdict.all_pass", self.all_pass))
        return out


def _err(a: GradedElement, b: GradedElement) -> float:
    return float(np.max(np.abs(a.coeffs - b.coeffs), initial=0.0))


def check_dimension(dim: int, samples: int, rng: np.random.Generator) -> dict[str, float]:
    worst = dict.fromkeys(PROPERTIES, 0.0)
    top = GradedElement.pseudoscalar(dim)
    for _ in range(samples):
        p, q = rng.integers(0, dim + 1, size=2)
        if p + q > dim:
            p, q = dim - q, dim - p  # reflect into the admissible triangle
        r = int(rng.integers(0, dim - p - q + 1))
        u, v, w = (random_element(rng, dim, int(g)) for g in (p, q, r))

        sign = -1.0 if (p * q) % 2 else 1.0
        worst["anticommutativity"] = max(worst["anticommutativity"], _err(u ^ v, sign * (v ^ u)))

        left = (u ^ v) ^ w
        oracle = expanded_wedge(u, v, w)
        worst["associativity"] = max(worst["associativity"], _err(left, oracle), _err(u ^ (v ^ w), oracle))

        m = int(rng.integers(1, dim + 1))
        a = rng.uniform(-1.0, 1.0, size=(m, dim))
        b = rng.uniform(-1.0, 1.0, size=(m, dim))
        ba, bb = GradedElement.vector(a[0]), GradedElement.vector(b[0])
        for k in range(1, m):
            ba, bb = ba ^ GradedElement.vector(a[k]), bb ^ GradedElement.vector(b[k])
        worst["gram_determinant"] = max(worst["gram_determinant"],
                                        abs(scalar_product(ba, bb) - float(np.linalg.det(a @ b.T))))

        s = -1.0 if (p * (dim - p)) % 2 else 1.0
        worst["hodge_involution"] = max(worst["hodge_involution"], _err(hodge_dual(hodge_dual(u)), s * u))

        u2 = random_element(rng, dim, int(p))
        worst["hodge_isometry"] = max(worst["hodge_isometry"],
                                      abs(scalar_product(u, u2) - scalar_product(hodge_dual(u), hodge_dual(u2))))
        worst["wedge_hodge_pairing"] = max(worst["wedge_hodge_pairing"],
                                           _err(wedge(u, hodge_dual(u2)), scalar_product(u, u2) * top))
    return worst


def run_suite(samples: int = 1000, dims=(2, 3, 4, 5), seed: int = 0, tol: float = DEFAULT_TOL) -> AlgebraSuite:
    suite = AlgebraSuite(samples, seed, tol)
    start = time.perf_counter()
    for dim in dims:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(dim)])))
        for name, err in check_dimension(dim, samples, rng).items():
            suite.errors[(dim, name)] = err
    suite.seconds = time.perf_counter() - start
    return suite
