"""Floquet eigenvalue of periodic controls and its expansion around a constant control."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .controls import ControlSignal
from .errors import DegenerateSpectrumError, NumericsError, ValidationError
from .perron import dlambda_P, second_order_terms, spectrum
from .spectral import ModelParams

DEFAULT_NODES = 2000
GL_ORDER = 8
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_ORDER)
_GL_X = 0.5 * (_GL_X + 1.0)  # nodes and weights on [0, 1]
_GL_W = 0.5 * _GL_W


@dataclass(frozen=True)
class FloquetResult:
    lambda_F: float
    monodromy: np.ndarray
    dominant_multiplier: float
    multipliers: np.ndarray
    theta: float
    steps: int
    h_max: float


def _period(control: ControlSignal, theta):
    if control.kind == "periodic":
        return control.theta
    if control.kind == "constant":
        return 1.0 if theta is None else float(theta)
    raise ValidationError("Floquet analysis needs a constant or periodic control")


def _rk4_poly(M, h):
    """RK4 stability polynomial ``I + hM + (hM)^2/2 + (hM)^3/6 + (hM)^4/24``."""
    Z = h * M
    Z2 = Z @ Z
    return np.eye(3) + Z + Z2 / 2 + Z2 @ Z / 6 + Z2 @ Z2 / 24


def monodromy(params: ModelParams, control: ControlSignal, theta=None, h_max=None):
    """Fundamental matrix over one period, by classical RK4.

    The period is split at the control's breakpoints and each piece is
    integrated with a uniform step no larger than ``min(theta/2000, 1e-3)``.
    On pieces where the control is constant one RK4 step is a fixed matrix,
    which is then raised to the number of steps.

    Returns
    -------
    Phi : (3, 3) ndarray
    steps : int
    """
    theta = _period(control, theta)
    if h_max is None:
        h_max = min(theta / 2000.0, 1e-3)
    if not h_max > 1e-14 * theta:
        raise NumericsError("RK4 step underflow")
    G, F = params.G, params.F
    edges = np.r_[0.0, control.breakpoints(0.0, theta), theta]
    piecewise_constant = control.kind == "constant" or control.interp == "left"
    Phi = np.eye(3)
    steps = 0
    for t0, t1 in zip(edges[:-1], edges[1:]):
        n = int(np.ceil((t1 - t0) / h_max - 1e-9))
        h = (t1 - t0) / n
        steps += n
        if piecewise_constant:
            alpha = control.value(0.5 * (t0 + t1))
            Phi = np.linalg.matrix_power(_rk4_poly(G + alpha * F, h), n) @ Phi
            continue
        t = t0 + h * np.arange(n)
        al = control.value(np.stack([t, t + 0.5 * h, t + h]))
        for k in range(n):
            M1 = G + al[0, k] * F
            M2 = G + al[1, k] * F
            M3 = G + al[2, k] * F
            k1 = M1 @ Phi
            k2 = M2 @ (Phi + 0.5 * h * k1)
            k3 = M2 @ (Phi + 0.5 * h * k2)
            k4 = M3 @ (Phi + h * k3)
            Phi = Phi + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(Phi)):
        raise NumericsError("non-finite monodromy matrix")
    return Phi, steps


def lambda_F(params: ModelParams, control: ControlSignal, theta=None, h_max=None) -> FloquetResult:
    """Floquet eigenvalue ``log(rho) / theta`` with ``rho`` the dominant multiplier."""
    theta = _period(control, theta)
    Phi, steps = monodromy(params, control, theta, h_max)
    mult = np.linalg.eigvals(Phi)
    order = np.argsort(-np.abs(mult))
    mult = mult[order]
    rho = mult[0]
    if abs(rho.imag) > 1e-12 * abs(rho) or rho.real <= 0:
        raise NumericsError(f"dominant Floquet multiplier is not real positive: {rho}")
    if abs(rho) - abs(mult[1]) < 1e-10 * abs(rho):
        raise DegenerateSpectrumError("dominant Floquet multiplier is not simple")
    h = h_max if h_max is not None else min(theta / 2000.0, 1e-3)
    return FloquetResult(float(np.log(rho.real) / theta), Phi, float(rho.real), mult,
                         theta, steps, h)


def liouville_residual(params: ModelParams, control: ControlSignal, Phi, theta=None) -> float:
    """Relative mismatch ``det Phi`` vs ``exp(int trace(G + alpha F))``.

    Only informative while ``det Phi`` is not tiny: the determinant of a
    matrix with O(1) entries loses ``log10(1 / det)`` digits to cancellation.
    """
    theta = _period(control, theta)
    tr = np.trace(params.G) * theta + np.trace(params.F) * control.mean() * theta
    return abs(np.linalg.det(Phi) / np.exp(tr) - 1.0)


# --------------------------------------------------------------------------
# relaxation of a periodic direction


@dataclass(frozen=True)
class RelaxedSignal:
    """Periodic solution of ``g' / mu + g = gamma`` sampled on a partition.

    ``mean_sq`` is the period average of ``g^2`` and ``mean_cross`` that of
    ``gamma g``; ``closure`` is ``|g(theta) - g(0)|`` after the forward sweep.
    """

    t: np.ndarray
    values: np.ndarray
    mu: float
    theta: float
    mean_sq: float
    mean_cross: float
    closure: float


def _partition(control: ControlSignal, theta: float, n_nodes: int):
    base = np.linspace(0.0, theta, n_nodes + 1)
    return np.unique(np.r_[base, control.breakpoints(0.0, theta)])


def _period_average(values, h, theta):
    return float(np.sum(h[:, None] * _GL_W * values) / theta)


def gamma_i(gamma: ControlSignal, mu: float, n_nodes: int = DEFAULT_NODES) -> RelaxedSignal:
    """Periodic relaxation of ``gamma`` at rate ``mu``.

    On each piece ``[t_k, t_k + h]`` of a partition that contains the
    breakpoints of ``gamma``, the exact update
    ``g(t_k + s) = exp(-mu s) g(t_k) + mu int_0^s exp(-mu (s - r)) gamma(t_k + r) dr``
    is evaluated with Gauss-Legendre quadrature. The start value is fixed by
    periodicity, ``g(0) = mu int_0^theta exp(-mu (theta - s)) gamma(s) ds / (1 - exp(-mu theta))``.
    """
    if not mu > 0:
        raise ValidationError(f"relaxation rate must be positive, got {mu}")
    theta = _period(gamma, None)
    t = _partition(gamma, theta, n_nodes)
    h = np.diff(t)
    # forcing integral over each full piece
    s_full = t[:-1, None] + h[:, None] * _GL_X
    g_full = gamma.value(s_full)
    inc = mu * h * np.sum(_GL_W * np.exp(-mu * h[:, None] * (1 - _GL_X)) * g_full, axis=1)
    decay = np.exp(-mu * h)
    # sweep from zero gives the affine map g(theta) = exp(-mu theta) g(0) + Q
    q = 0.0
    for d, c in zip(decay, inc):
        q = d * q + c
    g0 = q / (-np.expm1(-mu * theta))
    vals = np.empty(t.size)
    vals[0] = g0
    for k in range(h.size):
        vals[k + 1] = decay[k] * vals[k] + inc[k]
    closure = abs(vals[-1] - vals[0])
    # interior values at the quadrature nodes of each piece
    sx = h[:, None] * _GL_X  # (n, q) offsets
    r = sx[:, :, None] * _GL_X  # (n, q, q) inner nodes on [0, s_j]
    g_in = gamma.value(t[:-1, None, None] + r)
    kern = np.exp(-mu * (sx[:, :, None] - r))
    inner = mu * sx * np.sum(_GL_W * kern * g_in, axis=2)
    g_mid = np.exp(-mu * sx) * vals[:-1, None] + inner
    mean_sq = _period_average(g_mid ** 2, h, theta)
    mean_cross = _period_average(g_full * g_mid, h, theta)
    return RelaxedSignal(t, vals, float(mu), theta, mean_sq, mean_cross, float(closure))


def period_average(gamma: ControlSignal, n_nodes: int = DEFAULT_NODES) -> float:
    if gamma.kind == "constant":
        return float(gamma.values[0])
    theta = _period(gamma, None)
    t = _partition(gamma, theta, n_nodes)
    h = np.diff(t)
    return _period_average(gamma.value(t[:-1, None] + h[:, None] * _GL_X), h, theta)


# --------------------------------------------------------------------------
# directional derivatives


def first_directional(params: ModelParams, alpha: float, gamma: ControlSignal) -> float:
    """``<gamma> dlambda_P(alpha)``: derivative of ``lambda_F(alpha + eps gamma)`` at 0."""
    return period_average(gamma) * dlambda_P(params, alpha)


def second_directional(params: ModelParams, alpha: float, gamma: ControlSignal,
                       n_nodes: int = DEFAULT_NODES) -> float:
    """Second derivative of ``lambda_F(alpha + eps gamma)`` at ``eps = 0``.

    ``2 sum_{i=2,3} <g_i^2> (phi_1 F e_i)(phi_i F e_1) / (lambda_1 - lambda_i)``
    where ``g_i`` is the relaxation of ``gamma`` at rate ``lambda_1 - lambda_i``.
    A constant ``gamma = 1`` gives back the second derivative of ``lambda_P``.
    """
    s = spectrum(params, alpha)
    terms = second_order_terms(params, s)
    if gamma.kind == "constant":
        weights = np.full(2, gamma.values[0] ** 2)
    else:
        weights = np.array([gamma_i(gamma, s.lambdas[0] - s.lambdas[i], n_nodes).mean_sq
                            for i in (1, 2)])
    return float(2.0 * np.sum(weights * terms))


def perturbed(alpha: float, eps: float, gamma: ControlSignal) -> ControlSignal:
    """The control ``alpha + eps gamma``."""
    return gamma.affine(alpha, eps)


def fd_first(params, alpha, gamma, eps=1e-4):
    lp = lambda_F(params, perturbed(alpha, eps, gamma)).lambda_F
    lm = lambda_F(params, perturbed(alpha, -eps, gamma)).lambda_F
    return (lp - lm) / (2 * eps)


def fd_second(params, alpha, gamma, eps=1e-2):
    theta = _period(gamma, None)
    lp = lambda_F(params, perturbed(alpha, eps, gamma)).lambda_F
    l0 = lambda_F(params, ControlSignal.constant(alpha), theta=theta).lambda_F
    lm = lambda_F(params, perturbed(alpha, -eps, gamma)).lambda_F
    return (lp - 2 * l0 + lm) / (eps * eps)


def epsilon_sweep(params: ModelParams, alpha: float, gamma: ControlSignal, eps) -> np.ndarray:
    """Rows ``(eps, lambda_F(alpha + eps gamma))``."""
    eps = np.asarray(eps, dtype=float)
    return np.array([[e, lambda_F(params, perturbed(alpha, e, gamma)).lambda_F] for e in eps])


def write_sweep_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eps", "lambda_F"])
        for e, lam in rows:
            w.writerow([repr(float(e)), repr(float(lam))])
