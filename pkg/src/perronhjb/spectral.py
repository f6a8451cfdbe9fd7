"""Exact 3x3 linear algebra for the growth-fragmentation model.

Everything here works on plain ``numpy`` arrays of shape ``(3,)`` or
``(3, 3)``. Eigenvalues come from the characteristic cubic (closed form,
then Newton polishing) and eigenvectors from cross products of rows of
``M - lambda I``, so no general-purpose eigen solver is involved.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateSpectrumError, ValidationError

MT_F_TOL = 1e-12
GAP_TOL = 1e-10
TANGENT_TOL = 1e-9


def _frozen(x, dtype=float):
    arr = np.array(x, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ModelParams:
    """Matrices ``G`` (growth), ``F`` (fragmentation), size weights ``m`` and
    control bounds ``a < A``.

    ``rates`` holds ``(tau1, tau2, beta2, beta3)`` when the model was built
    by :func:`build_running_example`, ``None`` otherwise.
    """

    G: np.ndarray
    F: np.ndarray
    m: np.ndarray
    a: float = 1.0
    A: float = 6.0
    rates: Optional[tuple] = None

    def __post_init__(self):
        G = _frozen(self.G)
        F = _frozen(self.F)
        m = _frozen(self.m)
        if G.shape != (3, 3) or F.shape != (3, 3) or m.shape != (3,):
            raise ValidationError("G, F must be 3x3 and m a 3-vector")
        if not (np.all(np.isfinite(G)) and np.all(np.isfinite(F)) and np.all(np.isfinite(m))):
            raise ValidationError("non-finite model entries")
        off = ~np.eye(3, dtype=bool)
        if np.any(G[off] < 0) or np.any(F[off] < 0):
            raise ValidationError("off-diagonal entries of G and F must be nonnegative")
        if np.any(m <= 0):
            raise ValidationError("m must be componentwise positive")
        scale = max(1.0, np.abs(F).max() * np.abs(m).max())
        if np.abs(m @ F).max() > MT_F_TOL * scale:
            raise ValidationError(f"m^T F = {m @ F} is not zero")
        if not (0 < self.a < self.A):
            raise ValidationError(f"control bounds must satisfy 0 < a < A, got a={self.a}, A={self.A}")
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "A", float(self.A))

    def matrix(self, alpha: float) -> np.ndarray:
        """``G + alpha F``."""
        return self.G + alpha * self.F

    def with_bounds(self, a: float, A: float) -> "ModelParams":
        return ModelParams(self.G, self.F, self.m, a, A, self.rates)

    def scaled(self, c: float) -> "ModelParams":
        """Time rescaling ``(cG, cF)``; the bounds are kept."""
        rates = None if self.rates is None else tuple(c * r for r in self.rates)
        return ModelParams(c * self.G, c * self.F, self.m, self.a, self.A, rates)


def build_running_example(tau1, tau2, beta2, beta3, a=1.0, A=6.0) -> ModelParams:
    """Three-compartment growth-fragmentation model with ``m = (1, 2, 3)``.

    ``tau1, tau2`` are growth rates from small to intermediate and from
    intermediate to large polymers, ``beta2, beta3`` the fragmentation rates
    of the two larger compartments.
    """
    rates = (tau1, tau2, beta2, beta3)
    if any(not np.isfinite(r) or r <= 0 for r in rates):
        raise ValidationError(f"all rates must be positive, got {rates}")
    G = [[-tau1, 0.0, 0.0],
         [tau1, -tau2, 0.0],
         [0.0, tau2, 0.0]]
    F = [[0.0, 2 * beta2, beta3],
         [0.0, -beta2, beta3],
         [0.0, 0.0, -beta3]]
    return ModelParams(G, F, [1.0, 2.0, 3.0], a, A, tuple(float(r) for r in rates))


def table1() -> ModelParams:
    """Reference parameter set: tau = (0.5, 5), beta = (1, 2), a = 1, A = 6."""
    return build_running_example(0.5, 5.0, 1.0, 2.0, a=1.0, A=6.0)


# --------------------------------------------------------------------------
# characteristic polynomial and its roots


def char_coeffs(M) -> np.ndarray:
    """Coefficients ``(1, c2, c1, c0)`` of ``det(X I - M)``."""
    M = np.asarray(M, dtype=float)
    c2 = -np.trace(M)
    c1 = (M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
          + M[0, 0] * M[2, 2] - M[0, 2] * M[2, 0]
          + M[1, 1] * M[2, 2] - M[1, 2] * M[2, 1])
    c0 = -np.linalg.det(M)
    return np.array([1.0, c2, c1, c0])


def char_poly(params: ModelParams, alpha: float) -> np.ndarray:
    """Characteristic cubic of ``G + alpha F`` as ``(1, c2, c1, c0)``."""
    return char_coeffs(params.matrix(alpha))


def _polish(x, c2, c1, c0, steps=5):
    for _ in range(steps):
        p = ((x + c2) * x + c1) * x + c0
        dp = (3 * x + 2 * c2) * x + c1
        if dp == 0:
            break
        xn = x - p / dp
        pn = ((xn + c2) * xn + c1) * xn + c0
        if abs(pn) >= abs(p):
            break
        x = xn
    return x


def cubic_roots(c2, c1, c0):
    """Roots of ``x^3 + c2 x^2 + c1 x + c0``.

    Returns ``(real_roots, complex_pair)`` where ``complex_pair`` is either
    ``None`` or a pair of conjugate complex numbers.
    """
    shift = c2 / 3.0
    p = c1 - c2 * c2 / 3.0
    q = 2.0 * c2 ** 3 / 27.0 - c2 * c1 / 3.0 + c0
    disc = -(4.0 * p ** 3 + 27.0 * q * q)
    if disc > 0 and p < 0:
        r = 2.0 * np.sqrt(-p / 3.0)
        arg = np.clip(3.0 * q / (p * r), -1.0, 1.0)
        phi = np.arccos(arg) / 3.0
        roots = [r * np.cos(phi - 2.0 * np.pi * k / 3.0) - shift for k in range(3)]
        return sorted((_polish(x, c2, c1, c0) for x in roots), reverse=True), None
    s = np.sqrt(max(q * q / 4.0 + p ** 3 / 27.0, 0.0))
    t = np.cbrt(-q / 2.0 + s) + np.cbrt(-q / 2.0 - s)
    r0 = _polish(t - shift, c2, c1, c0)
    # deflate: x^2 + B x + C
    B = c2 + r0
    C = c1 + r0 * B
    d = B * B - 4.0 * C
    if d >= 0:
        sq = np.sqrt(d)
        r1 = (-B + sq) / 2.0
        r2 = (-B - sq) / 2.0
        roots = [r0, _polish(r1, c2, c1, c0), _polish(r2, c2, c1, c0)]
        return sorted(roots, reverse=True), None
    re, im = -B / 2.0, np.sqrt(-d) / 2.0
    return [r0], (complex(re, im), complex(re, -im))


# --------------------------------------------------------------------------
# eigen-decomposition


def _null_vector(B):
    """Kernel vector of a rank-2 3x3 matrix from its rows, or ``None``.

    Takes the largest of the three pairwise row cross products.
    """
    B = np.asarray(B)
    P = B[[0, 0, 1]]
    Q = B[[1, 2, 2]]
    C = np.stack([P[:, 1] * Q[:, 2] - P[:, 2] * Q[:, 1],
                  P[:, 2] * Q[:, 0] - P[:, 0] * Q[:, 2],
                  P[:, 0] * Q[:, 1] - P[:, 1] * Q[:, 0]], axis=1)
    norms = np.sqrt(np.sum(np.abs(C) ** 2, axis=1))
    k = int(np.argmax(norms))
    scale = max(np.abs(B).max(), 1e-300)
    if norms[k] <= 1e-13 * scale * scale:
        return None
    return C[k] / norms[k]


@dataclass(frozen=True)
class SpectralTriple:
    """Eigenvalues and biorthogonal eigenvectors of a 3x3 matrix.

    ``right[:, i]`` is ``e_i`` and ``left[i]`` is ``phi_i``. The dominant
    pair is normalized by ``<m, e_1> = 1`` and ``<phi_1, e_1> = 1``; real
    subdominant vectors use ``<m, e_i> = 1`` when it is defined and always
    ``<phi_i, e_i> = 1``.
    """

    lambdas: np.ndarray
    right: np.ndarray
    left: np.ndarray
    gap: float
    complex_pair: bool = False
    defective: bool = False
    matrix: np.ndarray = field(default=None, repr=False)

    @property
    def lambda1(self) -> float:
        return float(np.real(self.lambdas[0]))

    @property
    def e1(self) -> np.ndarray:
        return np.real(self.right[:, 0])

    @property
    def phi1(self) -> np.ndarray:
        return np.real(self.left[0])

    @property
    def real_diagonalizable(self) -> bool:
        return not (self.complex_pair or self.defective)


def eigen_triple(M, m=None) -> SpectralTriple:
    """Eigen-decomposition of a real 3x3 matrix with a real dominant eigenvalue.

    Parameters
    ----------
    M : (3, 3) array
    m : (3,) array, optional
        Normalization vector, ``<m, e_1> = 1``. Defaults to ``(1, 1, 1)``.

    Raises
    ------
    DegenerateSpectrumError
        If the eigenvalue with largest real part is not real and simple
        (gap below ``1e-10``).
    """
    M = np.asarray(M, dtype=float)
    m = np.ones(3) if m is None else np.asarray(m, dtype=float)
    _, c2, c1, c0 = char_coeffs(M)
    reals, pair = cubic_roots(c2, c1, c0)
    if pair is None:
        lambdas = np.array(sorted(reals, reverse=True))
    else:
        lambdas = np.array([reals[0], pair[0], pair[1]], dtype=complex)
    gap = float(min(np.real(lambdas[0]) - np.real(lambdas[1]),
                    np.real(lambdas[0]) - np.real(lambdas[2])))
    if gap < GAP_TOL:
        raise DegenerateSpectrumError(
            f"dominant eigenvalue is not real and simple (gap={gap:.3e}, lambdas={lambdas})")

    dtype = complex if pair is not None else float
    right = np.zeros((3, 3), dtype=dtype)
    left = np.zeros((3, 3), dtype=dtype)
    defective = False
    eye = np.eye(3)
    for i, lam in enumerate(lambdas):
        B = M - lam * eye
        e = _null_vector(B)
        phi = _null_vector(B.T)
        if e is None or phi is None:
            defective = True
            continue
        me = m @ e
        if i == 0:
            if abs(me) < 1e-14:
                raise DegenerateSpectrumError("dominant eigenvector is orthogonal to m")
            e = e / me
        elif np.isrealobj(e) and abs(me) > 1e-8 * np.linalg.norm(m):
            e = e / me
        pe = phi @ e
        if abs(pe) < 1e-12 * np.linalg.norm(phi) * np.linalg.norm(e):
            defective = True
        else:
            phi = phi / pe
        right[:, i] = e
        left[i] = phi
    if pair is None and abs(lambdas[1] - lambdas[2]) < GAP_TOL * max(1.0, abs(lambdas[1])):
        defective = True
    return SpectralTriple(lambdas, right, left, gap, pair is not None, defective, M)


# --------------------------------------------------------------------------
# geometry helpers


def theta_rotate(v, m, check=True):
    """Rotation by +pi/2 in the plane orthogonal to ``m``: ``(m/|m|) x v``.

    Works on arrays of shape ``(..., 3)``.
    """
    v = np.asarray(v, dtype=float)
    m = np.asarray(m, dtype=float)
    if check:
        tang = np.abs(v @ m)
        if np.any(tang > TANGENT_TOL * np.maximum(1.0, np.linalg.norm(v, axis=-1) * np.linalg.norm(m))):
            raise ValidationError("vector is not tangent to the simplex (<m, v> != 0)")
    return np.cross(m / np.linalg.norm(m), v)


def irreducible(M) -> bool:
    """Strong connectivity of the graph with an edge ``i -> j`` when ``M[j, i] != 0``."""
    M = np.asarray(M)
    adj = (M != 0) & ~np.eye(3, dtype=bool)
    reach = np.eye(3, dtype=int) + adj.T.astype(int)
    R = np.linalg.matrix_power(reach, 2)
    return bool(np.all(R > 0))
