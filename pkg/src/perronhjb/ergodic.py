"""Ergodic set bounded by two bang-bang trajectories, with stability, controllability and attractiveness."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from skimage.measure import points_in_poly

from .controls import ControlSignal
from .errors import GeometryError, ValidationError
from .perron import spectrum
from .simplex import ConstantFlow, chart, field_b, integrate, phi_cubic, uniform_simplex
from .spectral import ModelParams, theta_rotate

CONVERGE_TOL = 1e-6
T_MAX_CURVE = 200.0
MAX_POLY_VERTICES = 600


# --------------------------------------------------------------------------
# constant-control arcs


def arc_to_target(params: ModelParams, start, alpha: float, ds: float = 1e-3,
                  tol: float = CONVERGE_TOL, T_max: float = T_MAX_CURVE):
    """Sample the ``alpha``-trajectory from ``start`` until it is ``tol``-close to ``e_alpha``.

    Returns ``(s, points)``. Stops at the first sample with
    ``|y - e_alpha| <= tol`` or ``|b(y, alpha)| <= 1e-9``.
    """
    flow = ConstantFlow(params, alpha)
    target = flow.triple.e1
    chunks_s, chunks_y = [], []
    t0, chunk = 0.0, 10.0
    while t0 < T_max:
        t1 = min(t0 + chunk, T_max)
        n = int(round((t1 - t0) / ds))
        s = t0 + ds * np.arange(n + 1) if not chunks_s else t0 + ds * np.arange(1, n + 1)
        y = flow(start, s)
        dist = np.linalg.norm(y - target, axis=1)
        bn = np.linalg.norm(field_b(params, y, np.full(len(y), alpha)), axis=1)
        hit = np.flatnonzero((dist <= tol) | (bn <= 1e-9))
        if hit.size:
            k = hit[0] + 1
            chunks_s.append(s[:k])
            chunks_y.append(y[:k])
            return np.concatenate(chunks_s), np.vstack(chunks_y)
        chunks_s.append(s)
        chunks_y.append(y)
        t0 = t1
    raise GeometryError(f"trajectory with control {alpha} did not converge within T={T_max}")


def arc_backward(params: ModelParams, start, alpha: float, ds: float = 1e-3,
                 T_max: float = 50.0):
    """Sample the backward ``alpha``-trajectory from ``start`` until it leaves the simplex."""
    flow = ConstantFlow(params, alpha)
    s = np.arange(0.0, T_max + 0.5 * ds, ds)
    y = flow(start, -s)
    out = np.flatnonzero(np.min(y, axis=1) < 0.0)
    k = out[0] if out.size else len(s)
    return s[:k], y[:k]


# --------------------------------------------------------------------------
# the set


def _decimate(poly: np.ndarray, n_max: int) -> np.ndarray:
    step = max(1, int(np.ceil(len(poly) / n_max)))
    idx = np.r_[np.arange(0, len(poly) - 1, step), len(poly) - 1]
    return poly[idx]


@dataclass
class ErgodicSet:
    """Region enclosed by the ``lo``-trajectory from ``e_hi`` and the ``hi``-trajectory from ``e_lo``.

    With ``(lo, hi) = (a, A)`` this is the ergodic set itself; shifted
    bounds give the inner (``a + delta``, ``A - delta``) and outer
    (``a - 2 delta``, ``A + 2 delta``) sets.
    """

    lo: float
    hi: float
    e_lo: np.ndarray
    e_hi: np.ndarray
    s_lo: np.ndarray  # times along gamma_lo (from e_hi, control lo)
    gamma_lo: np.ndarray
    s_hi: np.ndarray  # times along gamma_hi (from e_lo, control hi)
    gamma_hi: np.ndarray
    delta: float = 0.0
    z_minus: Optional["ErgodicSet"] = None
    z_plus2: Optional["ErgodicSet"] = None
    polygon: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        loop = np.vstack([self.gamma_lo, self.gamma_hi])
        self.polygon = _decimate(chart(loop), MAX_POLY_VERTICES)

    # names matching the construction: control a from e_A, control A from e_a
    @property
    def gamma_a_A(self):
        return self.gamma_lo

    @property
    def gamma_A_a(self):
        return self.gamma_hi

    def endpoint_errors(self) -> dict:
        return {
            "gamma_lo_start": float(np.linalg.norm(self.gamma_lo[0] - self.e_hi)),
            "gamma_lo_end": float(np.linalg.norm(self.gamma_lo[-1] - self.e_lo)),
            "gamma_hi_start": float(np.linalg.norm(self.gamma_hi[0] - self.e_lo)),
            "gamma_hi_end": float(np.linalg.norm(self.gamma_hi[-1] - self.e_hi)),
        }

    def contains(self, y) -> np.ndarray:
        """Point membership in the chart ``(y1, y2)`` (even-odd rule on the polygon)."""
        y = np.atleast_2d(y)
        return points_in_poly(chart(y), self.polygon)

    def signed_area(self) -> float:
        x, y = self.polygon[:, 0], self.polygon[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def phi_signs(self, params: ModelParams, skip: int = 1) -> tuple:
        """Signs of ``phi`` along each boundary curve after the first ``skip`` samples.

        Samples within ``CONVERGE_TOL`` of the end equilibrium are ignored
        since ``phi`` vanishes there.
        """
        out = []
        for pts, end in ((self.gamma_lo, self.e_lo), (self.gamma_hi, self.e_hi)):
            p = pts[skip:]
            p = p[np.linalg.norm(p - end, axis=1) > 10 * CONVERGE_TOL]
            out.append(np.unique(np.sign(phi_cubic(params, p))))
        return tuple(out)


def _build(params: ModelParams, lo: float, hi: float, ds: float) -> ErgodicSet:
    if not 0 < lo < hi:
        raise ValidationError(f"need 0 < lo < hi, got {lo}, {hi}")
    e_lo = spectrum(params, lo).e1
    e_hi = spectrum(params, hi).e1
    s_lo, g_lo = arc_to_target(params, e_hi, lo, ds)
    s_hi, g_hi = arc_to_target(params, e_lo, hi, ds)
    return ErgodicSet(lo, hi, e_lo, e_hi, s_lo, g_lo, s_hi, g_hi)


def build_ergodic_set(params: ModelParams, delta: float = 0.0, ds: float = 1e-3,
                      offsets: bool = True) -> ErgodicSet:
    """Ergodic set for ``[a, A]`` with its ``-delta`` and ``+2 delta`` offsets."""
    a, A = params.a, params.A
    if delta < 0 or a - 2 * delta <= 0:
        raise ValidationError(f"need delta >= 0 and a - 2 delta > 0, got delta={delta}")
    z0 = _build(params, a, A, ds)
    z0.delta = delta
    if offsets:
        if delta == 0:
            z0.z_minus = z0.z_plus2 = z0
        else:
            z0.z_minus = _build(params, a + delta, A - delta, ds)
            z0.z_plus2 = _build(params, a - 2 * delta, A + 2 * delta, ds)
            z0.z_minus.delta = z0.z_plus2.delta = delta
    return z0


# --------------------------------------------------------------------------
# stability


@dataclass(frozen=True)
class StabilityReport:
    ok: bool
    worst: float
    worst_point: np.ndarray
    worst_alpha: float
    n_checked: int
    tol: float
    tangential: float  # max |<b(z, curve control), n>|, zero up to rounding


def outward_normals(params: ModelParams, zset: ErgodicSet, pts, alpha_curve: float) -> np.ndarray:
    """Unit exterior normals ``+-Theta b / |Theta b|`` at points of a boundary curve.

    Both curves are traversed in the flow direction, which is also the
    traversal direction of the closed boundary, so the exterior side is the
    right-hand side for a counter-clockwise boundary in the chart and the
    left-hand side otherwise.
    """
    b = field_b(params, pts, np.full(len(pts), alpha_curve))
    tb = theta_rotate(b, params.m, check=False)
    n = tb / np.linalg.norm(tb, axis=1)[:, None]
    bc, nc = chart(b), chart(n)
    left = bc[:, 0] * nc[:, 1] - bc[:, 1] * nc[:, 0] > 0
    ccw = zset.signed_area() > 0
    flip = left == ccw  # exterior is to the right when ccw
    n[flip] *= -1
    return n


def stability_check(params: ModelParams, zset: ErgodicSet, n_samples: int = 500,
                    tol: float = 1e-8, alphas=None) -> StabilityReport:
    """Check that ``b(z, alpha)`` points inward on the boundary for ``alpha`` in ``alphas``.

    By affinity in ``alpha`` the two bounds ``a, A`` cover ``[a, A]``.
    Samples are RK4-free: they are exact points of the boundary curves.
    """
    if alphas is None:
        alphas = (params.a, params.A)
    worst, wpt, wal, tang, count = -np.inf, None, None, 0.0, 0
    per_curve = int(np.ceil(n_samples / 2))
    for pts, ctrl, end in ((zset.gamma_lo, zset.lo, zset.e_lo), (zset.gamma_hi, zset.hi, zset.e_hi)):
        bn = np.linalg.norm(field_b(params, pts, np.full(len(pts), ctrl)), axis=1)
        valid = np.flatnonzero(bn > 1e-12)
        idx = valid[np.unique(np.linspace(0, len(valid) - 1, per_curve).astype(int))]
        z = pts[idx]
        n = outward_normals(params, zset, z, ctrl)
        tang = max(tang, float(np.max(np.abs(np.sum(field_b(params, z, np.full(len(z), ctrl)) * n, axis=1)))))
        for al in alphas:
            v = np.sum(field_b(params, z, np.full(len(z), al)) * n, axis=1)
            k = int(np.argmax(v))
            if v[k] > worst:
                worst, wpt, wal = float(v[k]), z[k], al
        count += len(z)
    return StabilityReport(worst <= tol, worst, wpt, wal, count, tol, tang)


# --------------------------------------------------------------------------
# controllability


@dataclass(frozen=True)
class ConnectResult:
    control: Optional[ControlSignal]
    T: float
    switch_time: float
    first: Optional[float]
    second: Optional[float]
    landing_error: float
    end: np.ndarray


def _segment_hits(P, Q, eps=1e-12):
    """All intersections of polylines ``P`` and ``Q`` as ``(i, u, j, v)`` arrays."""
    p0, d = P[:-1], np.diff(P, axis=0)
    q0, e = Q[:-1], np.diff(Q, axis=0)
    r = q0[None, :, :] - p0[:, None, :]
    den = d[:, None, 0] * e[None, :, 1] - d[:, None, 1] * e[None, :, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = (r[..., 0] * e[None, :, 1] - r[..., 1] * e[None, :, 0]) / den
        v = (r[..., 0] * d[:, None, 1] - r[..., 1] * d[:, None, 0]) / den
    ok = (np.abs(den) > 0) & (u >= -eps) & (u <= 1 + eps) & (v >= -eps) & (v <= 1 + eps)
    i, j = np.nonzero(ok)
    return i, np.clip(u[i, j], 0, 1), j, np.clip(v[i, j], 0, 1)


def polyline_intersections(P, Q, block: int = 16):
    """Intersections of two long polylines by a block bounding-box sweep.

    Returns ``(i, u, j, v)`` with the hit at ``P[i] + u (P[i+1] - P[i])``.
    """
    P, Q = np.asarray(P), np.asarray(Q)

    def boxes(X):
        starts = np.arange(0, len(X) - 1, block)
        lo = np.array([X[s:s + block + 1].min(axis=0) for s in starts])
        hi = np.array([X[s:s + block + 1].max(axis=0) for s in starts])
        return starts, lo, hi

    sp, plo, phi = boxes(P)
    sq, qlo, qhi = boxes(Q)
    overlap = np.all((plo[:, None, :] <= qhi[None, :, :]) & (qlo[None, :, :] <= phi[:, None, :]), axis=2)
    hits = []
    for bi, bj in zip(*np.nonzero(overlap)):
        a0, b0 = sp[bi], sq[bj]
        i, u, j, v = _segment_hits(P[a0:a0 + block + 1], Q[b0:b0 + block + 1])
        hits.extend(zip(i + a0, u, j + b0, v))
    if not hits:
        return (np.empty(0, int), np.empty(0), np.empty(0, int), np.empty(0))
    h = np.unique(np.array(hits, dtype=float), axis=0)
    return h[:, 0].astype(int), h[:, 1], h[:, 2].astype(int), h[:, 3]


def _run_phases(params, z, phases, dt=1e-3):
    y = np.asarray(z, dtype=float)
    for alpha, T in phases:
        if T <= 0:
            continue
        n = max(1, int(np.ceil(T / dt)))
        y = integrate(params, y, ControlSignal.constant(alpha), T, dt=T / n).end
    return y


def connect(params: ModelParams, z, z_target, region: Optional[ErgodicSet] = None,
            delta: float = 0.05, ds: float = 1e-3, check: bool = True) -> ConnectResult:
    """Two-phase bang-bang control steering ``z`` to ``z_target``.

    Forward ``a``- and ``A``-arcs from ``z`` are intersected with backward
    ``A``- and ``a``-arcs from ``z_target``; the crossing with the smallest
    total time gives the switch point. The control is re-integrated by RK4
    and the landing error reported.
    """
    z = np.asarray(z, dtype=float)
    zt = np.asarray(z_target, dtype=float)
    if check:
        if region is None:
            region = build_ergodic_set(params, delta).z_minus
        if not (region.contains(z)[0] and region.contains(zt)[0]):
            raise ValidationError("both points must lie in the inner ergodic set")
    if np.linalg.norm(z - zt) <= 1e-12:
        return ConnectResult(None, 0.0, 0.0, None, None, 0.0, z)
    a, A = params.a, params.A
    fwd = {al: arc_to_target(params, z, al, ds) for al in (a, A)}
    bwd = {al: arc_backward(params, zt, al, ds) for al in (a, A)}
    best = None
    for first, second in ((a, A), (A, a)):
        sf, yf = fwd[first]
        sb, yb = bwd[second]
        if len(yf) < 2 or len(yb) < 2:
            continue
        i, u, j, v = polyline_intersections(chart(yf), chart(yb))
        if i.size == 0:
            continue
        t1 = sf[i] + u * (sf[i + 1] - sf[i])
        t2 = sb[j] + v * (sb[j + 1] - sb[j])
        k = int(np.lexsort((t1, t1 + t2))[0])
        cand = (float(t1[k] + t2[k]), float(t1[k]), float(t2[k]), first, second)
        if best is None or cand[0] < best[0]:
            best = cand
    if best is None:
        raise GeometryError("no intersection between forward and backward bang-bang arcs",
                            fwd, bwd)
    T, t1, t2, first, second = best
    control = ControlSignal.sampled([0.0, t1], [first, second])
    end = _run_phases(params, z, [(first, t1), (second, t2)])
    return ConnectResult(control, T, t1, first, second, float(np.linalg.norm(end - zt)), end)


# --------------------------------------------------------------------------
# attractiveness


@dataclass(frozen=True)
class ProbeReport:
    entry_times: np.ndarray  # nan when a trial never enters
    exited: np.ndarray  # True when a trial leaves after entering
    all_entered: bool
    none_exited: bool
    max_entry: float
    mean_entry: float
    counterexamples: tuple

    @property
    def ok(self) -> bool:
        return self.all_entered and self.none_exited


def random_bang_sampler(a: float, A: float, mean_dwell: float = 1.0) -> Callable:
    """Piecewise-constant controls: ``Exp(mean_dwell)`` dwell, value uniform on ``[a, A]``."""
    def sample(rng):
        return rng.exponential(mean_dwell), rng.uniform(a, A)
    return sample


def attractiveness_probe(params: ModelParams, delta: float = 0.1, n_trials: int = 100,
                         control_sampler: Optional[Callable] = None, seed: int = 0,
                         T_max: float = 100.0, sample_dt: float = 0.01,
                         starts=None, zset: Optional[ErgodicSet] = None) -> ProbeReport:
    """Entry times into the outer set ``Z_{+2 delta}`` under random controls.

    Each trial has its own RNG stream spawned from ``seed``. Trajectories
    are piecewise exact constant-control flows sampled every ``sample_dt``;
    a trial that is inside at some sample and outside at a later one counts
    as an exit.
    """
    if not delta > 0:
        raise ValidationError("need delta > 0")
    if zset is None:
        zset = build_ergodic_set(params, delta).z_plus2
    if control_sampler is None:
        control_sampler = random_bang_sampler(params.a, params.A)
    streams = np.random.SeedSequence(seed).spawn(n_trials)
    if starts is None:
        starts = np.vstack([uniform_simplex(params, np.random.default_rng(s), 1) for s in streams])
    starts = np.atleast_2d(starts)
    entry = np.full(n_trials, np.nan)
    exited = np.zeros(n_trials, bool)
    bad = []
    flows = {}
    for k in range(n_trials):
        rng = np.random.default_rng(streams[k].spawn(1)[0])
        y = starts[k % len(starts)]
        t, ts, ys = 0.0, [0.0], [y[None, :]]
        while t < T_max:
            dwell, alpha = control_sampler(rng)
            dwell = min(dwell, T_max - t)
            flow = flows.get(alpha) or flows.setdefault(alpha, ConstantFlow(params, alpha))
            n = max(1, int(np.ceil(dwell / sample_dt)))
            s = np.linspace(0.0, dwell, n + 1)[1:]
            seg = flow(y, s)
            ts.append(t + s)
            ys.append(seg)
            y = seg[-1]
            t += dwell
        ts = np.concatenate([np.atleast_1d(x) for x in ts])
        inside = zset.contains(np.vstack(ys))
        first = np.flatnonzero(inside)
        if first.size:
            entry[k] = ts[first[0]]
            exited[k] = not np.all(inside[first[0]:])
        if not first.size or exited[k]:
            bad.append({"trial": k, "start": starts[k % len(starts)],
                        "entry": entry[k], "exited": bool(exited[k])})
    finite = entry[np.isfinite(entry)]
    return ProbeReport(entry, exited, bool(np.all(np.isfinite(entry))), not bool(exited.any()),
                       float(finite.max()) if finite.size else np.nan,
                       float(finite.mean()) if finite.size else np.nan, tuple(bad))
