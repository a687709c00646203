"""Symmetric Gauss rules on the reference triangle and Gauss-Legendre rules on [0, 1].

Triangle points are barycentric triples; the reference triangle has
vertices (0,0), (1,0), (0,1) and area 1/2.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations

import numpy as np

from .errors import ArgumentError


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray   # (n, 3) barycentric or (n,) in [0, 1]
    weights: np.ndarray  # (n,)
    order: int
    domain: str          # "triangle" or "edge"

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def xy(self) -> np.ndarray:
        """Reference Cartesian coordinates of triangle points."""
        return self.points[:, 1:3]


def _orbit(bary: tuple[float, float, float]) -> list[tuple[float, float, float]]:
    return sorted(set(permutations(bary)))


# (weight per point relative to area, barycentric generator) following Dunavant's tables.
_DUNAVANT: dict[int, list[tuple[float, tuple[float, float, float]]]] = {
    1: [(1.0, (1 / 3, 1 / 3, 1 / 3))],
    2: [(1 / 3, (2 / 3, 1 / 6, 1 / 6))],
    4: [
        (0.223381589678011, (0.108103018168070, 0.445948490915965, 0.445948490915965)),
        (0.109951743655322, (0.816847572980459, 0.091576213509771, 0.091576213509771)),
    ],
    5: [
        (0.225, (1 / 3, 1 / 3, 1 / 3)),
        (0.132394152788506, (0.059715871789770, 0.470142064105115, 0.470142064105115)),
        (0.125939180544827, (0.797426985353087, 0.101286507323456, 0.101286507323456)),
    ],
    6: [
        (0.116786275726379, (0.501426509658179, 0.249286745170910, 0.249286745170910)),
        (0.050844906370207, (0.873821971016996, 0.063089014491502, 0.063089014491502)),
        (0.082851075618374, (0.053145049844817, 0.310352451033784, 0.636502499121399)),
    ],
}
# Degree 3 has no positive-weight Dunavant rule; the degree-4 rule is used instead.
_DUNAVANT[3] = _DUNAVANT[4]


@lru_cache(maxsize=None)
def triangle_rule(order: int) -> QuadratureRule:
    """Positive-weight rule exact for total degree <= ``order`` (1 to 6)."""
    if not isinstance(order, (int, np.integer)) or not 1 <= order <= 6:
        raise ArgumentError(f"triangle rule order must be in [1, 6], got {order!r}")
    pts, wts = [], []
    for w, gen in _DUNAVANT[order]:
        for p in _orbit(gen):
            pts.append(p)
            wts.append(0.5 * w)
    points = np.array(pts, dtype=float)
    points /= points.sum(axis=1, keepdims=True)
    weights = np.array(wts, dtype=float)
    points.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(points, weights, int(order), "triangle")


@lru_cache(maxsize=None)
def edge_rule(order: int) -> QuadratureRule:
    """Gauss-Legendre rule on [0, 1] exact for degree <= ``order`` (1 to 8)."""
    if not isinstance(order, (int, np.integer)) or not 1 <= order <= 8:
        raise ArgumentError(f"edge rule order must be in [1, 8], got {order!r}")
    n = (order + 2) // 2
    x, w = np.polynomial.legendre.leggauss(n)
    points = 0.5 * (x + 1.0)
    weights = 0.5 * w
    points.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(points, weights, int(order), "edge")
