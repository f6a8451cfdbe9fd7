"""Perron eigenvalue of ``G + alpha F`` as a function of a constant control."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import UnsupportedSpectrumError, ValidationError
from .spectral import ModelParams, SpectralTriple, eigen_triple

FD_STEP_FIRST = 1e-5
FD_STEP_SECOND = 1e-4
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def spectrum(params: ModelParams, alpha: float) -> SpectralTriple:
    if alpha < 0:
        raise ValidationError(f"control must be nonnegative, got {alpha}")
    return eigen_triple(params.matrix(alpha), params.m)


def lambda_P(params: ModelParams, alpha: float) -> float:
    """Dominant (Perron) eigenvalue of ``G + alpha F``."""
    return spectrum(params, alpha).lambda1


def dlambda_P(params: ModelParams, alpha: float) -> float:
    """First derivative ``phi_alpha F e_alpha``."""
    s = spectrum(params, alpha)
    return float(s.phi1 @ params.F @ s.e1)


def second_order_terms(params: ModelParams, s: SpectralTriple) -> np.ndarray:
    """``(phi_1 F e_i)(phi_i F e_1) / (lambda_1 - lambda_i)`` for ``i = 2, 3``.

    These are the coefficients shared by the second derivative of the Perron
    eigenvalue and the second directional derivative of the Floquet one.
    """
    if not s.real_diagonalizable:
        raise UnsupportedSpectrumError("G + alpha F is not diagonalizable over the reals")
    F = params.F
    e, phi = s.right, s.left
    out = np.empty(2)
    for k, i in enumerate((1, 2)):
        out[k] = (phi[0] @ F @ e[:, i]) * (phi[i] @ F @ e[:, 0]) / (s.lambdas[0] - s.lambdas[i])
    return out


def d2lambda_P(params: ModelParams, alpha: float) -> float:
    """Second derivative ``2 sum_i (phi_1 F e_i)(phi_i F e_1) / (lambda_1 - lambda_i)``."""
    s = spectrum(params, alpha)
    return float(2.0 * np.sum(second_order_terms(params, s)))


def fd_dlambda(params, alpha, h=FD_STEP_FIRST):
    return (lambda_P(params, alpha + h) - lambda_P(params, alpha - h)) / (2 * h)


def fd_d2lambda(params, alpha, h=FD_STEP_SECOND):
    return (lambda_P(params, alpha + h) - 2 * lambda_P(params, alpha)
            + lambda_P(params, alpha - h)) / (h * h)


# --------------------------------------------------------------------------
# optimization


@dataclass(frozen=True)
class PerronOptimum:
    alpha_star: float
    lambda_star: float
    interior: bool
    dlambda: float
    boundary: Optional[str] = None  # "A" when the sup sits at the upper bound

    def as_dict(self):
        return {"alpha_star": self.alpha_star, "lambda_star": self.lambda_star,
                "interior": self.interior, "boundary": self.boundary,
                "dlambda": self.dlambda}


def golden_section_max(f, lo, hi, tol=1e-6):
    """Maximize a unimodal ``f`` on ``[lo, hi]``; returns the final bracket."""
    c = hi - INV_PHI * (hi - lo)
    d = lo + INV_PHI * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc > fd:
            hi, d, fd = d, c, fc
            c = hi - INV_PHI * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + INV_PHI * (hi - lo)
            fd = f(d)
    return lo, hi


def optimize_perron(params: ModelParams, n_scan: int = 240) -> PerronOptimum:
    """Global maximizer of ``lambda_P`` over ``alpha > 0``.

    A log-spaced scan on ``[1e-3, 10 A]`` brackets the maximum, golden-section
    search shrinks the bracket to ``1e-6`` and a Newton step on the
    derivative finishes. If the scan maximum sits at the right end (monotone
    curve), the supremum over ``[a, A]`` is reported at ``alpha = A``.
    """
    alphas = np.logspace(-3, np.log10(10 * params.A), max(n_scan, 200))
    vals = np.array([lambda_P(params, a) for a in alphas])
    k = int(np.argmax(vals))
    if k == len(alphas) - 1:
        lam = lambda_P(params, params.A)
        return PerronOptimum(params.A, lam, False, dlambda_P(params, params.A), boundary="A")
    lo = alphas[max(k - 1, 0)]
    hi = alphas[k + 1]
    lo, hi = golden_section_max(lambda x: lambda_P(params, x), lo, hi, tol=1e-6)
    x = 0.5 * (lo + hi)
    d1 = dlambda_P(params, x)
    try:
        d2 = d2lambda_P(params, x)
    except UnsupportedSpectrumError:
        d2 = fd_d2lambda(params, x)
    if d2 < 0:
        x = x - d1 / d2
    return PerronOptimum(float(x), lambda_P(params, x), True, dlambda_P(params, x))


def classify_monotonicity(tau1: float, tau2: float) -> str:
    """``"interior-max"`` iff ``tau2 > 2 tau1``, else ``"increasing-to-tau1"``."""
    return "interior-max" if tau2 > 2 * tau1 else "increasing-to-tau1"


def critical_point_residual(params: ModelParams, alpha: float, lam: float) -> float:
    """Relative residual of the polynomial identity satisfied at a critical point.

    ``(b2 + b3) l^2 + t1 (b3 - b2) l + 2 alpha b2 b3 l = t1 t2 b2 b3 + 2 alpha t1 b2 b3``
    for the running example.
    """
    t1, t2, b2, b3 = _rates(params)
    lhs = (b2 + b3) * lam ** 2 + t1 * (b3 - b2) * lam + 2 * alpha * b2 * b3 * lam
    rhs = t1 * t2 * b2 * b3 + 2 * alpha * t1 * b2 * b3
    return abs(lhs - rhs) / abs(rhs)


def _rates(params):
    if params.rates is None:
        raise ValidationError("operation requires a model built from running-example rates")
    return params.rates


# --------------------------------------------------------------------------
# diagonalizability (running example)


@dataclass(frozen=True)
class DiagonalizabilityReport:
    ok: bool
    P0: float
    P_minus_alpha_beta3: float
    P_minus_tau2: float
    roots: tuple
    messages: tuple = ()


def diagonalizable_real(params: ModelParams, alpha: float) -> DiagonalizabilityReport:
    """Sign test for three real roots ``lambda_1 > 0 > lambda_2 > lambda_3``.

    Evaluates the characteristic polynomial of the running example at ``0``,
    ``-alpha beta3`` and ``-tau2`` with their closed forms; a sign change on
    ``(-inf, x) , (x, 0)`` and ``(0, +inf)`` brackets one root each.
    The closed forms are cross-checked against the eigenvalues found by
    :func:`eigen_triple`.
    """
    t1, t2, b2, b3 = _rates(params)
    msgs = []
    P0 = -alpha * t1 * t2 * b3 - alpha ** 2 * t1 * b2 * b3
    Pab = alpha * t2 * b3 * (alpha * b3 - 2 * t1)
    Pt2 = (alpha * b2 * (t2 ** 2 + t1 * t2) + alpha * b3 * (t2 ** 2 - 2 * t1 * t2)
           - alpha ** 2 * (t1 + t2) * b2 * b3)
    ok = True
    if not t2 > 2 * t1:
        msgs.append("requires tau2 > 2 tau1")
        ok = False
    if not P0 < 0:
        msgs.append(f"P(0) = {P0} is not negative")
        ok = False
    if not (Pab > 0 or Pt2 > 0):
        msgs.append("neither P(-alpha beta3) nor P(-tau2) is positive")
        ok = False
    s = spectrum(params, alpha)
    roots = tuple(complex(x) if s.complex_pair else float(x) for x in s.lambdas)
    if s.complex_pair:
        msgs.append("eigen_triple reports a complex pair")
        ok = False
    else:
        l1, l2, l3 = s.lambdas
        if not (l1 > 0 > l2 > l3):
            msgs.append(f"roots not ordered as l1 > 0 > l2 > l3: {roots}")
            ok = False
    return DiagonalizabilityReport(ok, P0, Pab, Pt2, roots, tuple(msgs))


# --------------------------------------------------------------------------
# sampled curves


@dataclass(frozen=True)
class PerronCurve:
    alphas: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    alpha_star: float
    lambda_star: float

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["alpha", "lambda", "dlambda"])
            for row in zip(self.alphas, self.values, self.derivs):
                w.writerow([repr(float(v)) for v in row])


def perron_curve(params: ModelParams, alphas=None, optimum: PerronOptimum = None) -> PerronCurve:
    if alphas is None:
        alphas = np.linspace(0.0, 10 * params.A, 601)
    alphas = np.asarray(alphas, dtype=float)
    vals = np.array([lambda_P(params, a) for a in alphas])
    ders = np.array([dlambda_P(params, a) for a in alphas])
    if optimum is None:
        optimum = optimize_perron(params)
    return PerronCurve(alphas, vals, ders, optimum.alpha_star, optimum.lambda_star)
