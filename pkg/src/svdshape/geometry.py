"""Landmark preprocessing and the SVD shape coordinate map.

Pipeline: raw landmarks X (N x K) -> centered Y = L X Theta^{-1/2}
((N-1) x K) -> thin SVD shape decomposition (V, D, H) -> size r, shape
matrix W and generalized polar angles u.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DegenerateConfigurationError, DomainError


class Mode(Enum):
    REFLECTION = "reflection"
    NO_REFLECTION = "no-reflection"


@dataclass(frozen=True)
class LandmarkSet:
    """One specimen: N landmarks in K dimensions."""

    id: str
    coords: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        object.__setattr__(self, "coords", coords)
        if coords.ndim != 2:
            raise DomainError(f"landmark matrix must be 2-D, got shape {coords.shape}")
        N, K = coords.shape
        if N < 3 or K < 2 or N <= K:
            raise DomainError(f"need N >= 3, K >= 2 and N > K; got N={N}, K={K}")
        if not np.all(np.isfinite(coords)):
            raise DomainError(f"specimen {self.id!r} has non-finite coordinates")

    @property
    def N(self) -> int:
        return self.coords.shape[0]

    @property
    def K(self) -> int:
        return self.coords.shape[1]


@dataclass(frozen=True)
class ShapeCoords:
    """Full SVD shape decomposition of a centered configuration Y.

    V' D H reconstructs Y; W = V'D / r has unit Frobenius norm; u holds the
    m = (N-1)n - 1 generalized polar angles of vec W (column-major), with the
    first m-1 angles in [0, pi] and the last in [0, 2 pi).
    """

    mode: Mode
    V: np.ndarray        # n x (N-1), orthonormal rows
    D: np.ndarray        # n singular values, |D| non-increasing
    H: np.ndarray        # n x K, orthonormal rows
    r: float
    W: np.ndarray        # (N-1) x n
    u: np.ndarray        # m angles
    jacobian: float

    @property
    def n(self) -> int:
        return self.D.shape[0]

    @property
    def m(self) -> int:
        return self.u.shape[0]


def helmert_submatrix(N: int) -> np.ndarray:
    """The (N-1) x N sub-Helmert matrix: orthonormal rows annihilating 1_N."""
    if N < 2:
        raise DomainError(f"need N >= 2, got {N}")
    L = np.zeros((N - 1, N))
    for j in range(1, N):
        c = 1.0 / math.sqrt(j * (j + 1))
        L[j - 1, :j] = -c
        L[j - 1, j] = j * c
    return L


def theta_inv_sqrt(Theta: np.ndarray) -> np.ndarray:
    """Symmetric positive definite inverse square root of Theta."""
    Theta = np.asarray(Theta, dtype=float)
    if Theta.ndim != 2 or Theta.shape[0] != Theta.shape[1]:
        raise DomainError(f"Theta must be square, got shape {Theta.shape}")
    if not np.allclose(Theta, Theta.T, atol=1e-12 * max(1.0, float(np.abs(Theta).max()))):
        raise DomainError("Theta must be symmetric")
    evals, evecs = np.linalg.eigh(Theta)
    tol = 1e-12 * float(np.abs(evals).max())
    if evals.min() <= tol:
        raise DomainError(f"Theta is not positive definite (min eigenvalue {evals.min():.3g})")
    M = (evecs / np.sqrt(evals)) @ evecs.T
    return 0.5 * (M + M.T)


def preprocess(X: LandmarkSet, Theta: np.ndarray | None = None) -> np.ndarray:
    """Centered, whitened configuration Y = L X Theta^{-1/2}."""
    Y = helmert_submatrix(X.N) @ X.coords
    if Theta is not None:
        Y = Y @ theta_inv_sqrt(Theta)
    return Y


def svd_shape(Y: np.ndarray, mode: Mode = Mode.REFLECTION) -> ShapeCoords:
    """SVD shape coordinates of a centered configuration Y ((N-1) x K).

    Reflection mode keeps all singular values non-negative; no-reflection
    mode flips the last singular pair so the rotation factor H has
    determinant +1 (requires N-1 >= K). Signs of the V columns are fixed
    deterministically (largest-magnitude entry positive, first index wins
    ties) so repeated singular values still give reproducible output.
    """
    Y = np.asarray(Y, dtype=float)
    Nm1, K = Y.shape
    n = min(Nm1, K)
    r = float(np.linalg.norm(Y))
    if r == 0.0:
        raise DegenerateConfigurationError("all landmarks coincide; shape is undefined")
    U, S, Vt = np.linalg.svd(Y, full_matrices=False)  # Y = U diag(S) Vt
    # deterministic sign convention per singular pair
    for j in range(n):
        col = U[:, j]
        lead = col[np.argmax(np.abs(col))]
        if lead < 0:
            U[:, j] = -col
            Vt[j, :] = -Vt[j, :]
    D = S.copy()
    H = Vt
    if mode is Mode.NO_REFLECTION:
        if Nm1 < K:
            raise DomainError("no-reflection mode needs N-1 >= K")
        if n == K and np.linalg.det(H) < 0:
            H = H.copy()
            H[-1, :] = -H[-1, :]
            D = D.copy()
            D[-1] = -D[-1]
    V = U.T  # n x (N-1)
    W = (U * D) / r
    u = unitvec_to_angles(W.reshape(-1, order="F"))
    return ShapeCoords(mode=mode, V=V, D=D, H=H, r=r, W=W, u=u,
                       jacobian=polar_jacobian(u))


def angles_to_unitvec(u: np.ndarray) -> np.ndarray:
    """Standard spherical chart: m angles -> unit vector of length m+1."""
    u = np.asarray(u, dtype=float)
    m = u.shape[0]
    v = np.empty(m + 1)
    sines = 1.0
    for i in range(m):
        v[i] = math.cos(u[i]) * sines
        sines *= math.sin(u[i])
    v[m] = sines
    return v


def unitvec_to_angles(v: np.ndarray) -> np.ndarray:
    """Inverse spherical chart; input is renormalized internally.

    At chart poles (an all-zero tail) the canonical representative with the
    remaining angles equal to 0 is returned.
    """
    v = np.asarray(v, dtype=float)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise DomainError("zero vector has no angle coordinates")
    v = v / norm
    m = v.shape[0] - 1
    u = np.zeros(m)
    tail = np.sqrt(np.cumsum(v[::-1] ** 2))[::-1]
    for i in range(m - 1):
        if tail[i + 1] == 0.0:
            u[i] = 0.0 if v[i] >= 0 else math.pi
        else:
            u[i] = math.atan2(tail[i + 1], v[i])
    if m >= 1:
        u[m - 1] = math.atan2(v[m], v[m - 1]) % (2 * math.pi)
    return u


def polar_jacobian(u: np.ndarray) -> float:
    """J(u) = prod_{i=1}^{m} sin^{m-i}(theta_i) (the i = m factor is 1)."""
    u = np.asarray(u, dtype=float)
    m = u.shape[0]
    out = 1.0
    for i in range(m - 1):
        out *= math.sin(u[i]) ** (m - 1 - i)
    return out


def log_polar_jacobian(u: np.ndarray) -> float:
    """log J(u); -inf at chart poles."""
    u = np.asarray(u, dtype=float)
    m = u.shape[0]
    total = 0.0
    for i in range(m - 1):
        s = math.sin(u[i])
        if s <= 0.0:
            return -math.inf
        total += (m - 1 - i) * math.log(s)
    return total


def preshape_angles(Y: np.ndarray) -> np.ndarray:
    """Generalized polar angles of the raw pre-shape vec(Y)/||Y|| (column-major).

    Unlike the SVD chart, this chart covers the whole sphere; the shape
    densities are constant on right-rotation orbits, so they take the same
    value on either chart. Simulation-based checks use this chart because the
    analytic angle density is exactly the law of these angles for a
    rotation-uniformized configuration.
    """
    Y = np.asarray(Y, dtype=float)
    r = float(np.linalg.norm(Y))
    if r == 0.0:
        raise DegenerateConfigurationError("all landmarks coincide; shape is undefined")
    return unitvec_to_angles(Y.reshape(-1, order="F") / r)
