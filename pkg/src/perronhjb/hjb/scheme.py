"""Monotone upwind discretization of the reduced Hamiltonian."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from ..errors import CFLError, GeometryError, NumericsError
from ..simplex import field_b, reward
from ..spectral import ModelParams
from .grid import SimplexGrid


def hamiltonian(params: ModelParams, y, p) -> tuple:
    """``max_{alpha in [a, A]} <b(y, alpha), p> + L(y)`` for a chart gradient ``p``.

    Returns ``(value, argmax)``; ties ``<F y, p> = 0`` go to ``A``.
    """
    y = np.asarray(y, dtype=float)
    p = np.asarray(p, dtype=float)
    a, A = params.a, params.A
    ba = field_b(params, y, np.full(y.shape[:-1], a))[..., :2]
    fy = (y @ params.F.T)[..., :2]
    s = np.sum(fy * p, axis=-1)
    val = np.sum(ba * p, axis=-1) + reward(params, y) + (A - a) * np.maximum(s, 0.0)
    arg = np.where(s >= 0, A, a)
    if np.ndim(val) == 0:
        return float(val), float(arg)
    return val, arg


def _cone(b, d1, d2):
    """Coefficients ``c >= 0`` with ``b = c1 d1 + c2 d2``, or None."""
    M = np.column_stack([d1, d2]).astype(float)
    det = np.linalg.det(M)
    if abs(det) < 1e-14:
        return None
    c = np.linalg.solve(M, b)
    tol = 1e-12 * max(np.abs(b).max(), 1e-300)
    if np.any(c < -tol):
        return None
    return np.clip(c, 0.0, None)


def _fallback(grid: SimplexGrid, k: int, b) -> tuple:
    """Cheapest cone of two in-mask lattice directions containing ``b`` at node ``k``.

    Any pair spanning less than a half-turn is allowed; the cost is the
    total outflow ``c1 + c2``, i.e. the numerical diffusion.
    """
    best = None
    avail = np.flatnonzero(grid.nbr[k] >= 0)
    for x, q in enumerate(avail):
        for q2 in avail[x + 1:]:
            c = _cone(b, grid.dirs[q], grid.dirs[q2])
            if c is not None and (best is None or c.sum() < best[0].sum()):
                best = (c, (grid.nbr[k, q], grid.nbr[k, q2]))
    if best is None:
        raise GeometryError(f"no inward upwind stencil at node {k} (y = {grid.points[k]}, b = {b})")
    return best


def drift_operator(grid: SimplexGrid, alpha: float) -> sparse.csr_matrix:
    """Sparse ``D`` with ``(D u)_k ~ <b(y_k, alpha), grad u>`` by upwind differences.

    Away from the slanted edge this is the axis scheme: forward difference
    for a positive drift component, backward for a negative one. Where an
    axis neighbor is missing the drift is split over the cheapest pair of
    lattice directions whose cone contains it and whose targets are nodes. Every off-diagonal entry is nonnegative and rows sum to zero.
    """
    b = field_b(grid.params, grid.points, np.full(grid.size, alpha))[:, :2] / grid.dy
    nb = grid.axis_neighbors()
    sides = [np.where(b[:, 0] > 0, nb[(1, 0)], nb[(-1, 0)]),
             np.where(b[:, 1] > 0, nb[(0, 1)], nb[(0, -1)])]
    active = b != 0
    missing = (active[:, 0] & (sides[0] < 0)) | (active[:, 1] & (sides[1] < 0))
    rows, cols, vals = [], [], []
    for comp in (0, 1):
        k = np.flatnonzero(active[:, comp] & ~missing)
        rows.append(k)
        cols.append(sides[comp][k])
        vals.append(np.abs(b[k, comp]))
    for k in np.flatnonzero(missing):
        c, (n1, n2) = _fallback(grid, k, b[k])
        rows.append(np.array([k, k]))
        cols.append(np.array([n1, n2]))
        vals.append(c)
    r, c, v = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    off = sparse.csr_matrix((v, (r, c)), shape=(grid.size, grid.size))
    diag = np.asarray(off.sum(axis=1)).ravel()
    return (off - sparse.diags(diag)).tocsr()


@dataclass
class Scheme:
    """Upwind operators for the two extreme controls on a grid."""

    grid: SimplexGrid
    D_a: sparse.csr_matrix
    D_A: sparse.csr_matrix
    L: np.ndarray
    max_rate: float  # max over nodes and controls of the total outflow coefficient
    max_speed: float  # max over nodes and controls of |b| in the chart

    @classmethod
    def build(cls, grid: SimplexGrid) -> "Scheme":
        p = grid.params
        Da, DA = drift_operator(grid, p.a), drift_operator(grid, p.A)
        rate = max(-Da.diagonal().min(), -DA.diagonal().min())
        speed = max(np.linalg.norm(field_b(p, grid.points, np.full(grid.size, al))[:, :2],
                                   axis=1).max() for al in (p.a, p.A))
        return cls(grid, Da, DA, reward(p, grid.points), float(rate), float(speed))

    def max_step(self) -> float:
        """Largest admissible explicit step ``dy / (2 max |b|)``."""
        return self.grid.dy / (2.0 * self.max_speed)

    def cfl_ratio(self, dt: float) -> float:
        return dt * self.max_speed / self.grid.dy

    def operator(self, u) -> tuple:
        """``(H_num(u), policy, switch)``: numerical Hamiltonian, chosen control, switching value."""
        ha, hA = self.D_a @ u, self.D_A @ u
        choose_A = hA >= ha
        H = self.L + np.where(choose_A, hA, ha)
        p = self.grid.params
        return H, np.where(choose_A, p.A, p.a), (hA - ha) / (p.A - p.a)

    def policy_matrix(self, choose_A) -> sparse.csr_matrix:
        sel = sparse.diags(choose_A.astype(float))
        return (sel @ self.D_A + sparse.diags((~choose_A).astype(float)) @ self.D_a).tocsr()


def step_time_dependent(scheme: Scheme, u, dt: float) -> np.ndarray:
    """One explicit Euler step ``u + dt H_num(u)`` under the CFL bound ``dt <= dy / (2 max |b|)``."""
    if dt > scheme.max_step() * (1 + 1e-12):
        raise CFLError(f"dt = {dt} exceeds the CFL bound {scheme.max_step()}")
    H = scheme.L + np.maximum(scheme.D_a @ u, scheme.D_A @ u)
    out = u + dt * H
    if not np.all(np.isfinite(out)):
        raise NumericsError("non-finite value in the HJB update")
    return out
