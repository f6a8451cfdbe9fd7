"""Triangular node set of the simplex in the chart ``(y1, y2)``."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..errors import ValidationError
from ..spectral import ModelParams

AXES = np.array([[1, 0], [0, 1], [-1, 0], [0, -1]])


def _edge_direction(m) -> np.ndarray | None:
    """Primitive lattice vector ``(q, -p)`` along the slanted edge ``m1 y1 + m2 y2 = 1``."""
    r = Fraction(float(m[0] / m[1])).limit_denominator(64)
    if abs(float(r) - m[0] / m[1]) > 1e-12:
        return None
    return np.array([r.denominator, -r.numerator])


class SimplexGrid:
    """Nodes ``(i dy, j dy)`` with ``i, j >= 0`` and ``m1 y1 + m2 y2 <= 1``.

    ``index`` maps the full ``(n1, n2)`` rectangle to node numbers (``-1``
    outside the mask); ``nbr[k, d]`` is the neighbor of node ``k`` in
    lattice direction ``dirs[d]`` or ``-1``.
    """

    def __init__(self, params: ModelParams, dy: float = 1e-2):
        if not 0 < dy <= 0.25:
            raise ValidationError(f"grid spacing must be in (0, 0.25], got {dy}")
        m = params.m
        self.params = params
        self.dy = float(dy)
        self.n1 = int(np.floor(1.0 / (m[0] * dy) + 1e-9)) + 1
        self.n2 = int(np.floor(1.0 / (m[1] * dy) + 1e-9)) + 1
        I, J = np.meshgrid(np.arange(self.n1), np.arange(self.n2), indexing="ij")
        self.mask = m[0] * I * dy + m[1] * J * dy <= 1.0 + 1e-9
        self.i, self.j = I[self.mask], J[self.mask]
        self.index = np.full(self.mask.shape, -1)
        self.index[self.mask] = np.arange(self.mask.sum())
        c = np.column_stack([self.i, self.j]) * dy
        y3 = np.clip((1.0 - m[0] * c[:, 0] - m[1] * c[:, 1]) / m[2], 0.0, None)
        self.points = np.column_stack([c, y3])
        dirs = [d for d in AXES]
        dirs += [np.array(d) for d in ((1, 1), (-1, 1), (-1, -1), (1, -1))]
        e = _edge_direction(m)
        if e is not None and not any(np.array_equal(e, d) or np.array_equal(-e, d) for d in dirs):
            dirs += [e, -e]
        ang = np.array([np.arctan2(d[1], d[0]) for d in dirs])
        self.dirs = np.array(dirs)[np.argsort(ang)]
        self.nbr = np.stack([self.neighbor(d) for d in self.dirs], axis=1)

    @property
    def size(self) -> int:
        return int(self.i.size)

    @property
    def chart(self) -> np.ndarray:
        return self.points[:, :2]

    def neighbor(self, d) -> np.ndarray:
        i, j = self.i + d[0], self.j + d[1]
        ok = (i >= 0) & (j >= 0) & (i < self.n1) & (j < self.n2)
        out = np.full(self.size, -1)
        out[ok] = self.index[i[ok], j[ok]]
        return out

    def axis_neighbors(self) -> dict:
        """Neighbors along ``+y1, +y2, -y1, -y2``; ``-1`` marks a missing side."""
        return {tuple(d): self.neighbor(d) for d in AXES}

    def interior(self) -> np.ndarray:
        nb = self.axis_neighbors()
        return np.all(np.stack(list(nb.values())) >= 0, axis=0)

    def nearest(self, y) -> int:
        """Node nearest to the simplex point ``y`` (chart distance)."""
        c = np.asarray(y, dtype=float)[:2]
        return int(np.argmin(np.linalg.norm(self.chart - c, axis=1)))

    def to_image(self, values, fill=np.nan) -> np.ndarray:
        """Nodal values on the full ``(n1, n2)`` rectangle."""
        img = np.full(self.mask.shape, fill, dtype=float)
        img[self.mask] = values
        return img


@dataclass
class GridField:
    """Nodal values on a :class:`SimplexGrid` with free-form metadata."""

    grid: SimplexGrid
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.size,):
            raise ValidationError("field size does not match the grid")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("field has non-finite values")

    def gradient(self) -> tuple:
        """One-sided differences ``(D-, D+)``, each of shape ``(n, 2)``; NaN where a side is missing."""
        g = self.grid
        u = self.values
        out = []
        for sgn in (-1, 1):
            D = np.full((g.size, 2), np.nan)
            for k, d in enumerate(([1, 0], [0, 1])):
                nb = g.neighbor(sgn * np.array(d))
                ok = nb >= 0
                D[ok, k] = sgn * (u[nb[ok]] - u[ok]) / g.dy
            out.append(D)
        return tuple(out)

    def at(self, y) -> float:
        return float(self.values[self.grid.nearest(y)])

    def to_csv(self, path) -> None:
        g = self.grid
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j", "y1", "y2", "y3", "u"])
            for i, j, y, u in zip(g.i, g.j, g.points, self.values):
                w.writerow([int(i), int(j), *(repr(float(v)) for v in y), repr(float(u))])
