"""Post-processing of HJB runs: eigenvector, separation line, feedback and the particular solution."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.ndimage import distance_transform_edt
from scipy.optimize import brentq
from skimage.measure import find_contours

from ..controls import ControlSignal
from ..errors import ValidationError
from ..perron import lambda_P, spectrum
from ..simplex import TrajectoryRecord, e_infinity, integrate, unchart
from ..spectral import ModelParams
from .grid import GridField, SimplexGrid
from .scheme import Scheme
from .solve import HjbRun, run_time_dependent


@dataclass
class Eigenvector:
    """Gauge-fixed field ``u_bar = u(T) - lambda T`` with ``u_bar(y0) = 0``."""

    field: GridField
    switch: np.ndarray  # nodal switching value, ~ <F y, D u_bar>
    separation: list  # chart polylines where the switching value vanishes
    lambda_hj: float
    stationarity: float  # spread of u(T) - u(T - 1) over the nodes

    @property
    def grid(self) -> SimplexGrid:
        return self.field.grid

    def longest_separation(self) -> np.ndarray:
        return max(self.separation, key=len) if self.separation else np.empty((0, 2))


def _fill_outside(grid: SimplexGrid, values) -> np.ndarray:
    """Rectangle image of nodal values, nodes outside the mask copied from the nearest node."""
    img = grid.to_image(values)
    _, (ii, jj) = distance_transform_edt(~grid.mask, return_indices=True)
    return img[ii, jj]


def contour_lines(grid: SimplexGrid, values, level: float = 0.0, image=None) -> list:
    """Level-``level`` polylines of a nodal field in chart coordinates (marching squares).

    ``image`` gives values on the whole ``(n1, n2)`` rectangle when the
    field extends past the simplex; otherwise outside nodes copy their
    nearest node. Pieces are split where they leave the simplex.
    """
    img = _fill_outside(grid, values) if image is None else np.asarray(image, dtype=float)
    out = []
    for c in find_contours(img, level):
        pts = c * grid.dy  # (row, col) = (i, j) -> (y1, y2)
        keep = grid.params.m[:2] @ pts.T <= 1.0 + 1e-9
        cuts = np.flatnonzero(np.diff(keep.astype(int)) != 0) + 1
        for piece, kp in zip(np.split(pts, cuts), np.split(keep, cuts)):
            if kp[0] and len(piece) >= 2:
                out.append(piece)
    return out


def rectangle_points(grid: SimplexGrid) -> np.ndarray:
    """Points ``(y1, y2, y3)`` of the full chart rectangle, ``y3`` from ``<m, y> = 1``."""
    I, J = np.meshgrid(np.arange(grid.n1), np.arange(grid.n2), indexing="ij")
    return unchart(grid.params, np.stack([I, J], axis=-1) * grid.dy)


def extract_eigenvector(run: HjbRun) -> Eigenvector:
    """Eigenvector field and separation line from a completed time-dependent run."""
    if run.kind != "time":
        raise ValidationError("eigenvector extraction needs a time-dependent run")
    u = run.field.values
    ubar = u - run.lambda_ratio * run.T
    ubar = ubar - ubar[run.probes[0]]  # exact zero at y0 despite rounding
    prev = run.snapshots.get(round(run.T - 1.0, 12))
    stat = float(np.ptp(u - prev)) if prev is not None else np.nan
    _, _, s = run.scheme.operator(ubar)
    f = GridField(run.grid, ubar, {"lambda_hj": run.lambda_ratio, "gauge_node": int(run.probes[0])})
    return Eigenvector(f, s, contour_lines(run.grid, s), run.lambda_ratio, stat)


def polyline_distance(P, x) -> float:
    """Distance from the point ``x`` to the polyline ``P``."""
    P = np.asarray(P, dtype=float)
    x = np.asarray(x, dtype=float)
    a, d = P[:-1], np.diff(P, axis=0)
    L2 = np.maximum(np.sum(d * d, axis=1), 1e-300)
    t = np.clip(np.sum((x - a) * d, axis=1) / L2, 0.0, 1.0)
    return float(np.min(np.linalg.norm(a + t[:, None] * d - x, axis=1)))


def feedback_policy(params: ModelParams, ev: Eigenvector):
    """``alpha(y) = A`` where the interpolated switching value is >= 0, else ``a``."""
    g = ev.grid
    img = _fill_outside(g, ev.switch)
    interp = RegularGridInterpolator((np.arange(g.n1) * g.dy, np.arange(g.n2) * g.dy), img,
                                     bounds_error=False, fill_value=None)

    def policy(y):
        return params.A if interp(np.asarray(y)[:2])[0] >= 0 else params.a
    return policy


@dataclass
class OptimalTrajectory:
    record: TrajectoryRecord
    moving_average: np.ndarray  # centered moving average of the control, window ``window``
    window: float

    def tail_control(self, fraction: float = 0.5) -> float:
        k = int(len(self.moving_average) * (1 - fraction))
        return float(np.mean(self.moving_average[k:]))

    def to_csv(self, path) -> None:
        r = self.record
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "y1", "y2", "y3", "alpha", "alpha_avg", "phi"])
            for t, y, a, ma, p in zip(r.times, r.points, r.alphas, self.moving_average, r.phi):
                w.writerow([repr(float(t)), *(repr(float(v)) for v in y), repr(float(a)),
                            repr(float(ma)), repr(float(p))])


def optimal_trajectory(params: ModelParams, ev: Eigenvector, y0, T: float = 10.0,
                       dt: float = 1e-3, window_steps: int = 100) -> OptimalTrajectory:
    """Closed-loop RK4 path under the bang-bang feedback read off ``ev``."""
    pol = feedback_policy(params, ev)
    rec = integrate(params, y0, ControlSignal.feedback(pol), T, dt=dt)
    ma = np.convolve(rec.alphas, np.ones(window_steps) / window_steps, mode="same")
    return OptimalTrajectory(rec, ma, window_steps * dt)


# --------------------------------------------------------------------------
# particular solution log <phi_A, y>


def _crossing_below(params: ModelParams, y, e_inf, betas, curve, A_prime: float) -> bool:
    """Whether the line through ``y`` and ``e_inf`` meets the eigenvector curve at ``beta <= A'``.

    The crossing is the first sign change of ``det[e_beta, e_inf, y]`` along
    the sampled curve; root-finding is only needed when the bracket
    straddles ``A'``. No crossing counts as ``beta = inf``.
    """
    g = np.linalg.det(np.stack([curve, np.broadcast_to(e_inf, curve.shape),
                                np.broadcast_to(y, curve.shape)], axis=1))
    sgn = np.sign(g)
    idx = np.flatnonzero(sgn[:-1] * sgn[1:] <= 0)
    if not idx.size:
        return False
    k = idx[0]
    if betas[k + 1] <= A_prime or g[k] == 0:
        return bool(betas[k] <= A_prime)
    if betas[k] > A_prime:
        return False

    def f(b):
        return np.linalg.det(np.stack([spectrum(params, b).e1, e_inf, y]))
    return bool(brentq(f, betas[k], betas[k + 1], xtol=1e-12) <= A_prime)


def a_prime(params: ModelParams, alpha_max: float = 1e4):
    """Smallest ``A' > A`` with ``lambda_P(A') = lambda_P(A)``, or None.

    None when ``lambda_P`` stays at or above ``lambda_P(A)`` on ``(A, alpha_max]``.
    """
    A = params.A
    lA = lambda_P(params, A)
    x = A * np.geomspace(1.0 + 1e-6, alpha_max / A, 800)
    lam = np.array([lambda_P(params, v) for v in x])
    below = np.flatnonzero(lam < lA)
    if not below.size:
        return None
    k = below[0]
    lo = A if k == 0 else x[k - 1]
    return float(brentq(lambda v: lambda_P(params, v) - lA, lo, x[k], xtol=1e-12))


@dataclass
class ParticularSolutionReport:
    case: str  # "monotone" or "subdomain"
    a_prime: float | None
    in_domain: np.ndarray  # nodes where the check applies (all of S, or S')
    min_flux: float  # min <F y, phi_A> over the domain
    residual: float  # max |H_num(log<phi_A, y>) - lambda_P(A)| over interior domain nodes
    residual_bound: float
    cosine: float  # length-weighted mean |cos| between contour tangents and m x phi_A
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def summary(self) -> dict:
        return {"case": self.case, "a_prime": self.a_prime, "n_domain": int(self.in_domain.sum()),
                "min_flux": self.min_flux, "residual": self.residual,
                "residual_bound": self.residual_bound, "cosine": self.cosine,
                "checks": self.checks, "passed": self.passed}


def subdomain(params: ModelParams, grid: SimplexGrid, A_prime: float) -> np.ndarray:
    """Nodes ``y`` whose line through ``e_inf`` meets the eigenvector curve at ``beta <= A'``."""
    e_inf = e_infinity(params)
    if e_inf is None:
        raise ValidationError("the subdomain construction needs a kernel corner e_inf of F")
    betas = np.r_[0.0, np.geomspace(1e-4, 1e4, 600)]
    curve = np.array([spectrum(params, b).e1 for b in betas])
    out = np.zeros(grid.size, bool)
    for k, y in enumerate(grid.points):
        if np.linalg.norm(y - e_inf) < 1e-12:
            continue
        out[k] = _crossing_below(params, y, e_inf, betas, curve, A_prime)
    return out


def verify_particular_solution(params: ModelParams, dy: float = 1e-2, dt: float = 1e-2,
                               T: float = 10.0, residual_const: float = 1.0,
                               cos_min: float = 0.99, subdomain_ok: bool = True,
                               run: HjbRun | None = None) -> ParticularSolutionReport:
    """Check that ``lambda_P(A) t + log <phi_A, y>`` solves the HJB equation.

    (i) ``<F y, phi_A> >= -1e-9`` on the domain, (ii) the numerical
    Hamiltonian of ``log <phi_A, y>`` equals ``lambda_P(A)`` up to
    ``residual_const * dy`` at interior domain nodes, (iii) level lines of
    a time-dependent solution are parallel to ``m x phi_A`` (chart
    cosine at least ``cos_min``). The domain is the whole simplex when
    ``lambda_P`` does not come back down to ``lambda_P(A)`` beyond ``A``,
    otherwise the subdomain cut at ``A'``. Raises :class:`ValidationError`
    unless ``lambda_P`` is nondecreasing on ``[a, A]``.
    """
    al = np.linspace(params.a, params.A, 101)
    if np.any(np.diff([lambda_P(params, x) for x in al]) < -1e-12):
        raise ValidationError("lambda_P is not nondecreasing on [a, A]; "
                              "the particular solution does not apply")
    grid = run.grid if run is not None else SimplexGrid(params, dy)
    dy = grid.dy
    sA = spectrum(params, params.A)
    phi = sA.left[0]
    phi = phi if phi.sum() > 0 else -phi
    Ap = a_prime(params)
    if Ap is None:
        case, dom = "monotone", np.ones(grid.size, bool)
    else:
        if not subdomain_ok:
            raise ValidationError("lambda_P returns to lambda_P(A) beyond A; the subdomain is needed")
        case, dom = "subdomain", subdomain(params, grid, Ap)
    flux = grid.points @ params.F.T @ phi
    min_flux = float(flux[dom].min())
    # (ii) numerical Hamiltonian of the analytic field
    scheme = run.scheme if run is not None else Scheme.build(grid)
    w = np.log(grid.points @ phi)
    H, _, _ = scheme.operator(w)
    interior = dom & grid.interior()
    res = float(np.max(np.abs(H[interior] - sA.lambda1)))
    # (iii) level lines of u(T) against m x phi_A
    if run is None:
        run = run_time_dependent(params, dy=dy, dt=dt, T=T, grid=grid)
    d = np.cross(params.m, phi)[:2]
    d = d / np.linalg.norm(d)
    u = run.field.values
    inside = np.where(dom, u, np.nan)
    levels = np.linspace(np.nanmin(inside), np.nanmax(inside), 12)[1:-1]
    num = den = 0.0
    dom_img = grid.to_image(dom.astype(float), fill=0.0)
    for lv in levels:
        for line in contour_lines(grid, u, lv):
            seg = np.diff(line, axis=0)
            mid = 0.5 * (line[1:] + line[:-1]) / dy
            ii = np.clip(np.rint(mid[:, 0]).astype(int), 0, grid.n1 - 1)
            jj = np.clip(np.rint(mid[:, 1]).astype(int), 0, grid.n2 - 1)
            ok = dom_img[ii, jj] > 0
            L = np.linalg.norm(seg, axis=1)[ok]
            if not L.size:
                continue
            cos = np.abs(seg[ok] @ d) / np.maximum(L, 1e-300)
            num += float(np.sum(L * cos))
            den += float(np.sum(L))
    cosine = num / den if den > 0 else np.nan
    bound = residual_const * dy
    checks = {"flux_nonnegative": min_flux >= -1e-9, "hamiltonian_residual": res <= bound,
              "level_sets_aligned": bool(cosine >= cos_min)}
    return ParticularSolutionReport(case, Ap, dom, min_flux, res, bound, float(cosine), checks)


def optimality_identity(params: ModelParams, y) -> tuple:
    """``max_alpha {lambda_P(A) + (alpha - A) <F y, phi_A> / <y, phi_A>}`` and ``lambda_P(A)``."""
    s = spectrum(params, params.A)
    phi = s.left[0]
    y = np.asarray(y, dtype=float)
    r = (params.F @ y) @ phi / (y @ phi)
    vals = [s.lambda1 + (al - params.A) * r for al in (params.a, params.A)]
    return max(vals), s.lambda1

