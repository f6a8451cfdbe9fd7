"""Time-dependent and discounted solvers for the reduced HJB equation."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse import identity
from scipy.sparse.linalg import spsolve

from ..errors import NumericsError, ValidationError
from ..simplex import unchart
from ..spectral import ModelParams
from .grid import GridField, SimplexGrid
from .scheme import Scheme, step_time_dependent

log = logging.getLogger(__name__)

DEFAULT_PROBE = (0.3, 0.2)
COLLAPSE_PROBES = ((0.3, 0.2), (0.1, 0.1), (0.6, 0.1), (0.1, 0.4), (0.8, 0.05))


@dataclass
class HjbRun:
    """Result of a time-dependent or discounted run.

    ``lambda_ratio`` is ``u(T, y0) / T`` and ``lambda_slope`` is
    ``u(T, y0) - u(T - 1, y0)``; for a discounted run both are the mean of
    ``eps u_eps``. ``cfl`` is ``dt max|b| / dy`` for the internal step.
    """

    kind: str
    grid: SimplexGrid
    scheme: Scheme
    field: GridField
    lambda_ratio: float
    lambda_slope: float
    dy: float
    dt: Optional[float] = None
    T: Optional[float] = None
    eps: Optional[float] = None
    substeps: int = 1
    cfl: float = 0.0
    probes: np.ndarray = None  # node indices, first one is y0
    times: np.ndarray = None
    probe_values: np.ndarray = None  # (n_times, n_probes)
    snapshots: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def lambda_hj(self) -> float:
        return self.lambda_ratio

    def probe_ratios(self) -> np.ndarray:
        """``u(t, y_k) / t`` for every recorded time ``t > 0`` and probe ``k``."""
        t = self.times[1:, None]
        return self.probe_values[1:] / t

    def collapse(self) -> float:
        """Spread of ``u(T, y_k) / T`` over the probes."""
        r = self.probe_values[-1] / self.T
        return float(r.max() - r.min())

    def summary(self) -> dict:
        out = {"kind": self.kind, "dy": self.dy, "lambda_ratio": self.lambda_ratio,
               "lambda_slope": self.lambda_slope, "substeps": self.substeps, "cfl": self.cfl}
        if self.kind == "time":
            out.update(dt=self.dt, T=self.T, probe_collapse=self.collapse())
        else:
            out.update(eps=self.eps)
        out.update(self.diagnostics)
        return out


def _probe_nodes(grid: SimplexGrid, probes) -> np.ndarray:
    pts = unchart(grid.params, np.asarray(probes, dtype=float))
    return np.array([grid.nearest(y) for y in pts])


def run_time_dependent(params: ModelParams, dy: float = 1e-2, dt: float = 1e-3, T: float = 10.0,
                       probes=COLLAPSE_PROBES, snapshot_times=None, u0=None,
                       grid: Optional[SimplexGrid] = None,
                       substeps: Optional[int] = None) -> HjbRun:
    """March ``u_t = H(y, D u)`` from ``u(0) = u0`` (zero by default) to time ``T``.

    Each output step ``dt`` is split into ``k = ceil(2 dt max|b| / dy)``
    explicit sub-steps so that the CFL bound holds whatever ``dt`` is. A
    fixed ``substeps`` overrides this, and a step that then violates the
    bound raises :class:`CFLError`.
    Probe values are recorded every ``dt``; full fields at ``snapshot_times``
    (always ``T - 1`` and ``T`` when ``T >= 1``).
    """
    if not (T > 0 and dt > 0):
        raise ValidationError("need T > 0 and dt > 0")
    grid = grid or SimplexGrid(params, dy)
    scheme = Scheme.build(grid)
    if substeps is None:
        k = max(1, int(np.ceil(2.0 * dt * scheme.max_speed / grid.dy - 1e-12)))
    else:
        k = int(substeps)
        if k < 1:
            raise ValidationError("substeps must be >= 1")
    h = dt / k
    n = int(round(T / dt))
    if abs(n * dt - T) > 1e-9 * T:
        raise ValidationError("T must be a multiple of dt")
    snaps = set() if snapshot_times is None else {int(round(t / dt)) for t in snapshot_times}
    if T >= 1:
        snaps |= {n - int(round(1.0 / dt)), n}
    nodes = _probe_nodes(grid, probes)
    u = np.zeros(grid.size) if u0 is None else np.array(u0, dtype=float)
    hist = np.empty((n + 1, nodes.size))
    hist[0] = u[nodes]
    saved = {}
    if 0 in snaps:
        saved[0.0] = u.copy()
    for s in range(1, n + 1):
        for _ in range(k):
            u = step_time_dependent(scheme, u, h)
        hist[s] = u[nodes]
        if s in snaps:
            saved[round(s * dt, 12)] = u.copy()
    ratio = float(u[nodes[0]] / T)
    back = int(round(1.0 / dt))
    slope = float(hist[-1, 0] - hist[-1 - back, 0]) if n >= back else ratio
    cfl = scheme.cfl_ratio(h)
    log.info("time-dependent HJB: dy=%g dt=%g T=%g substeps=%d ratio=%.6f slope=%.6f",
             grid.dy, dt, T, k, ratio, slope)
    return HjbRun("time", grid, scheme, GridField(grid, u, {"t": T}), ratio, slope, grid.dy,
                  dt=dt, T=T, substeps=k, cfl=cfl, probes=nodes,
                  times=dt * np.arange(n + 1), probe_values=hist, snapshots=saved,
                  diagnostics={"monotone_rate": h * scheme.max_rate})


def run_discounted(params: ModelParams, eps: float, dy: float = 1e-2, tol: float = 1e-9,
                   max_iter: int = 200, grid: Optional[SimplexGrid] = None) -> HjbRun:
    """Solve ``-eps u + H_num(u) = 0`` on the grid by policy iteration.

    Each iteration fixes the control per node, solves the linear system
    ``(eps I - D_policy) u = L`` and then re-selects the better control.
    The scheme matrix is an M-matrix for every policy, so the iteration is
    monotone and stops once the sup-norm update is at most ``tol``.
    """
    if not eps > 0:
        raise ValidationError(f"need eps > 0, got {eps}")
    grid = grid or SimplexGrid(params, dy)
    scheme = Scheme.build(grid)
    I = identity(grid.size, format="csr")
    choose_A = np.ones(grid.size, bool)
    u = np.zeros(grid.size)
    for it in range(1, max_iter + 1):
        u_new = spsolve((eps * I - scheme.policy_matrix(choose_A)).tocsc(), scheme.L)
        if not np.all(np.isfinite(u_new)):
            raise NumericsError("non-finite discounted solution")
        update = float(np.max(np.abs(u_new - u)))
        u = u_new
        _, pol, _ = scheme.operator(u)
        new_choice = pol == params.A
        if update <= tol or np.array_equal(new_choice, choose_A) and it > 1:
            break
        choose_A = new_choice
    else:
        raise NumericsError(f"policy iteration did not converge in {max_iter} iterations")
    H, _, _ = scheme.operator(u)
    residual = float(np.max(np.abs(-eps * u + H)))
    eu = eps * u
    diag = {"iterations": it, "residual": residual, "last_update": update,
            "mean": float(eu.mean()), "min": float(eu.min()), "max": float(eu.max()),
            "spread": float(eu.max() - eu.min())}
    log.info("discounted HJB: eps=%g iterations=%d mean=%.6f spread=%.3e", eps, it,
             diag["mean"], diag["spread"])
    return HjbRun("discounted", grid, scheme, GridField(grid, u, {"eps": eps}),
                  diag["mean"], diag["mean"], grid.dy, eps=eps, diagnostics=diag)
