"""Projected dynamics on the simplex ``{y >= 0 : <m, y> = 1}``."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .controls import ControlSignal
from .errors import NumericsError, ValidationError
from .perron import spectrum
from .spectral import ModelParams, _null_vector, theta_rotate

log = logging.getLogger(__name__)

SIMPLEX_TOL = 1e-9
POSITIVITY_FLOOR = -1e-6


def project(x, m) -> np.ndarray:
    """``x / <m, x>`` for a nonnegative nonzero ``x`` (vectorized over rows)."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValidationError("projection needs a nonnegative vector")
    s = x @ np.asarray(m, dtype=float)
    if np.any(s <= 0):
        raise ValidationError("cannot project the zero vector")
    return x / np.asarray(s)[..., None]


def check_simplex(params: ModelParams, y, tol: float = SIMPLEX_TOL) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if abs(params.m @ y - 1.0) > tol or np.any(y < -1e-12):
        raise ValidationError(f"point {y} is not on the simplex")
    return y


def field_b(params: ModelParams, y, alpha) -> np.ndarray:
    """``b(y, alpha) = (G + alpha F) y - <m, G y> y``, vectorized over rows of ``y``."""
    y = np.asarray(y, dtype=float)
    Gy = y @ params.G.T
    Fy = y @ params.F.T
    L = Gy @ params.m
    alpha = np.asarray(alpha, dtype=float)
    return Gy + alpha[..., None] * Fy - L[..., None] * y


def reward(params: ModelParams, y) -> np.ndarray:
    """Running reward ``L(y) = <m, G y>``."""
    return np.asarray(y, dtype=float) @ params.G.T @ params.m


def phi_cubic(params: ModelParams, y) -> np.ndarray:
    """``<G y - <m, G y> y, Theta F y>``; zero exactly on the curve of Perron eigenvectors."""
    y = np.asarray(y, dtype=float)
    d = field_b(params, y, np.zeros(y.shape[:-1]))
    return np.sum(d * theta_rotate(y @ params.F.T, params.m, check=False), axis=-1)


# --------------------------------------------------------------------------
# trajectories


@dataclass
class TrajectoryRecord:
    """Sampled path with its control trace.

    ``drift[k]`` is ``<m, y> - 1`` right after step ``k`` and before any
    renormalization; ``alphas[j]`` is the control used on the step that
    ends at ``times[j]`` (the first entry is the initial control).
    """

    times: np.ndarray
    points: np.ndarray
    alphas: np.ndarray
    drift: np.ndarray
    phi: np.ndarray
    renormalized: bool

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]

    def max_drift_rate(self) -> float:
        T = self.times[-1] - self.times[0]
        return float(np.max(np.abs(self.drift), initial=0.0) / max(T, 1e-300))

    def average_reward(self, params: ModelParams) -> np.ndarray:
        """Running average ``(1/t) int_0^t L(y)`` by the trapezoid rule."""
        L = reward(params, self.points)
        dt = np.diff(self.times)
        cum = np.r_[0.0, np.cumsum(0.5 * dt * (L[1:] + L[:-1]))]
        out = np.full_like(cum, L[0])
        out[1:] = cum[1:] / (self.times[1:] - self.times[0])
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "y1", "y2", "y3", "alpha", "phi"])
            for t, y, a, p in zip(self.times, self.points, self.alphas, self.phi):
                w.writerow([repr(float(t)), *(repr(float(v)) for v in y), repr(float(a)),
                            repr(float(p))])


def integrate(params: ModelParams, y0, control: ControlSignal, T: float, dt: float = 1e-3,
              renormalize: bool = True, stop: Optional[Callable] = None,
              record_every: int = 1) -> TrajectoryRecord:
    """Classical RK4 for ``y' = b(y, alpha(t))``.

    Feedback and piecewise-constant controls are frozen over each step at
    their value at the start of the step; smooth controls are evaluated at
    the RK4 stage times. ``stop(y)`` ends the run early when it returns True.
    """
    y = check_simplex(params, np.array(y0, dtype=float), tol=1e-8)
    if not (T >= 0 and dt > 0):
        raise ValidationError("need T >= 0 and dt > 0")
    n = int(np.ceil(T / dt - 1e-9))
    h = T / n if n else 0.0
    smooth = control.kind == "periodic" and control.interp != "left" or \
        control.kind == "sampled" and control.interp == "linear"
    m = params.m
    G, F = params.G, params.F
    gm = G.T @ m

    def rhs(x, al):
        return G @ x + al * (F @ x) - (gm @ x) * x

    const = float(control.values[0]) if control.kind == "constant" else None
    times, pts, als, drift = [0.0], [y.copy()], [], []
    renorm = False
    for k in range(n):
        t = k * h
        if const is not None:
            a1 = a2 = a3 = const
        elif smooth:
            a1, a2, a3 = control.value(np.array([t, t + 0.5 * h, t + h]))
        else:
            a1 = a2 = a3 = control.at(t, y)
        if k == 0:
            als.append(a1)
        k1 = rhs(y, a1)
        k2 = rhs(y + 0.5 * h * k1, a2)
        k3 = rhs(y + 0.5 * h * k2, a2)
        k4 = rhs(y + h * k3, a3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        d = m @ y - 1.0
        drift.append(d)
        if not (y.min() >= POSITIVITY_FLOOR):  # also catches NaN
            if not np.all(np.isfinite(y)):
                raise NumericsError("non-finite state in RK4 integration")
            raise NumericsError(f"trajectory left the simplex at t={t + h}: {y}")
        if renormalize and d != 0.0:
            y = y / (m @ y)
            renorm = True
        done = stop is not None and stop(y)
        if (k + 1) % record_every == 0 or k == n - 1 or done:
            times.append(t + h)
            pts.append(y.copy())
            als.append(a1)
        if done:
            break
    if not als:
        als.append(control.at(0.0, pts[0]))
    pts = np.array(pts)
    alphas = np.asarray(als, dtype=float)
    if renorm:
        log.debug("renormalized <m,y> during integration (max drift %.2e)",
                  np.max(np.abs(drift), initial=0.0))
    return TrajectoryRecord(np.array(times), pts, alphas, np.array(drift),
                            phi_cubic(params, pts), renorm)


# --------------------------------------------------------------------------
# exact flow for constant controls


class ConstantFlow:
    """Exact projected flow ``y(s) = P exp(s M) y0`` for ``M = G + alpha F``.

    Uses the real eigenbasis of ``M``; ``s`` may be negative (backward flow).
    Exponentials are shifted per time so that no term overflows.
    """

    def __init__(self, params: ModelParams, alpha: float):
        s = spectrum(params, alpha)
        if not s.real_diagonalizable:
            raise NumericsError("exact flow needs a real diagonalizable G + alpha F")
        self.params = params
        self.alpha = float(alpha)
        self.triple = s

    def __call__(self, y0, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        c = self.triple.left @ np.asarray(y0, dtype=float)
        E = s[:, None] * self.triple.lambdas[None, :]
        # drop the log of the weights into the exponent for the shift
        shift = np.max(E + np.log(np.abs(c) + 1e-300), axis=1, keepdims=True)
        w = c * np.exp(E - shift)
        x = w @ self.triple.right.T
        return x / (x @ self.params.m)[:, None]

    def arc(self, y0, T: float, ds: float = 1e-3) -> tuple:
        """Samples ``(s, y(s))`` for ``s`` from 0 to ``T`` (``T < 0`` runs backward)."""
        s = np.linspace(0.0, T, int(np.ceil(abs(T) / ds)) + 1)
        return s, self(y0, s)


def trace_phi0(params: ModelParams, alpha_max: float = 1e3, n: int = 200,
               include_infinity: bool = True) -> tuple:
    """Perron eigenvectors ``e_alpha`` on ``{0} U logspace(-4, log10 alpha_max)``.

    Returns ``(alphas, points)``. When ``F`` has a nonnegative kernel vector it
    is appended as the limit ``e_inf`` with ``alpha = inf``.
    """
    if n < 2:
        raise ValidationError("need n >= 2")
    alphas = np.r_[0.0, np.logspace(-4, np.log10(alpha_max), n - 1)]
    pts = np.array([spectrum(params, a).e1 for a in alphas])
    if include_infinity:
        e_inf = e_infinity(params)
        if e_inf is not None:
            alphas = np.r_[alphas, np.inf]
            pts = np.vstack([pts, e_inf])
    return alphas, pts


def e_infinity(params: ModelParams) -> Optional[np.ndarray]:
    """Normalized nonnegative kernel vector of ``F``, if there is one."""
    v = _null_vector(params.F)
    if v is None or np.linalg.norm(params.F @ v) > 1e-12 * np.abs(params.F).max():
        return None
    v = v if v.sum() > 0 else -v
    if np.any(v < -1e-12):
        return None
    v = np.clip(v, 0.0, None)
    return v / (params.m @ v)


def uniform_simplex(params: ModelParams, rng, n: int) -> np.ndarray:
    """``n`` points uniform on the simplex (Dirichlet(1,1,1) mapped by ``1/m``)."""
    z = rng.dirichlet(np.ones(3), size=n)
    return z / params.m


def chart(y) -> np.ndarray:
    """Two-coordinate chart ``(y1, y2)`` of the simplex."""
    return np.asarray(y)[..., :2]


def unchart(params: ModelParams, c) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    m = params.m
    y3 = (1.0 - m[0] * c[..., 0] - m[1] * c[..., 1]) / m[2]
    return np.stack([c[..., 0], c[..., 1], y3], axis=-1)
