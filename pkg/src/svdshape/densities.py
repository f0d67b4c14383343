"""Exact size-and-shape and shape densities as truncated zonal series.

Conventions. A centered, column-whitened configuration Y is (N-1) x K with
n = min(N-1, K) = K and total dimension M = (N-1)K. The shape density lives
on the box of m = M - 1 generalized polar angles (first m-1 in [0, pi], last
in [0, 2 pi)) and is the exact law of the angles of vec(Y')/||Y|| for a
configuration whose rotation H has been uniformized over O(K); it depends on
the angles only through W W', so it takes the same value on the SVD chart.
The size-and-shape density is the O(K) average of the configuration density
and lives on rotation-quotient representatives Rmat = V' D.

All series coefficients, gamma factors and prefactors are handled in log
space with sign tracking. No-reflection mode divides every density by 2 (the
excluding-reflection law keeps the same representative chart, each reflection
orbit carrying half the mass).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError, SeriesTruncationError
from .geometry import Mode, angles_to_unitvec, log_polar_jacobian
from .models import GeneratorKind, ModelSpec, h_derivative_log, h_log_value, radial_integral
from .special import LogSign, Partition
from .zonal import SeriesControl, zonal_series


class IsotropicKind(Enum):
    """Closed-bracket isotropic families with sigma^2 I covariance, R = 1/2."""

    GAUSSIAN = "gaussian"
    KOTZ_T2 = "kotz-t2"
    KOTZ_T3 = "kotz-t3"


@dataclass(frozen=True)
class DensityValue:
    """A log density plus the truncation diagnostics of its zonal series."""

    log_density: float
    degrees_used: int
    tail_bound: float
    mode: Mode

    @property
    def density(self) -> float:
        return math.exp(self.log_density)


def _mode_log_factor(mode: Mode) -> float:
    return -math.log(2.0) if mode is Mode.NO_REFLECTION else 0.0


def _noncentrality_eigs(model: ModelSpec, A: np.ndarray) -> np.ndarray:
    """Eigenvalues of Omega Sigma^{-1} A for symmetric PSD A = W W' or R R'.

    Computed as the spectrum of the K x K symmetric matrix
    mu' Sigma^{-1} A Sigma^{-1} mu (same nonzero eigenvalues, guaranteed
    real and non-negative).
    """
    mw = model.mu_whitened
    G = mw.T @ model.sigma_inv @ A @ model.sigma_inv @ mw
    eigs = np.linalg.eigvalsh(0.5 * (G + G.T))
    return np.clip(eigs, 0.0, None)


def _check_angles(u: np.ndarray, model: ModelSpec) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    m = model.M - 1
    if u.shape != (m,):
        raise DomainError(f"expected {m} angles for this model, got shape {u.shape}")
    if np.any(u[:-1] < 0) or np.any(u[:-1] > math.pi) or not 0 <= u[-1] <= 2 * math.pi:
        raise DomainError("angles must lie in [0,pi]^(m-1) x [0,2pi]")
    return u


def _angles_to_W(u: np.ndarray, model: ModelSpec) -> np.ndarray:
    v = angles_to_unitvec(u)
    return v.reshape(model.Nm1, model.K, order="F")


def size_and_shape_logdensity(Rmat: np.ndarray, model: ModelSpec,
                              mode: Mode = Mode.REFLECTION,
                              ctrl: SeriesControl | None = None) -> DensityValue:
    """Log density of the size-and-shape representative Rmat = V' D ((N-1) x K).

    g(Rmat) = |Sigma|^{-K/2} sum_t sum_kappa h^{(2t)}(tr Sigma^{-1} Rmat Rmat'
    + tr Omega) C_kappa(Omega Sigma^{-1} Rmat Rmat') / (t! (K/2)_kappa),
    doubled in no-reflection mode.
    """
    Rmat = np.asarray(Rmat, dtype=float)
    if Rmat.shape != (model.Nm1, model.K):
        raise DomainError(f"Rmat must be (N-1) x K = ({model.Nm1}, {model.K})")
    A = Rmat @ Rmat.T
    y0 = float(np.trace(model.sigma_inv @ A)) + model.trace_omega
    eigs = _noncentrality_eigs(model, A)
    gen = model.generator

    def coeff(t: int, kappa: Partition) -> LogSign:
        return h_derivative_log(gen, 2 * t, y0)

    series = zonal_series(coeff, eigs, model.K / 2.0, ctrl)
    if series.sign <= 0.0:
        raise DomainError("size-and-shape series summed to a non-positive value")
    log = (-model.K / 2.0 * model.log_det_sigma + series.log
           + _mode_log_factor(mode))
    return DensityValue(log, series.degrees_used, series.tail_bound, mode)


def central_size_and_shape_logdensity(Rmat: np.ndarray, model: ModelSpec,
                                      mode: Mode = Mode.REFLECTION) -> DensityValue:
    """Central (mu = 0) size-and-shape log density: |Sigma|^{-K/2} h(tr Sigma^{-1} R R')."""
    Rmat = np.asarray(Rmat, dtype=float)
    if Rmat.shape != (model.Nm1, model.K):
        raise DomainError(f"Rmat must be (N-1) x K = ({model.Nm1}, {model.K})")
    y0 = float(np.trace(model.sigma_inv @ (Rmat @ Rmat.T)))
    h = h_log_value(model.generator, y0)
    if h.sign <= 0.0:
        raise DomainError("generator vanished at the evaluation point")
    log = -model.K / 2.0 * model.log_det_sigma + h.log + _mode_log_factor(mode)
    return DensityValue(log, 0, 0.0, mode)


def shape_logdensity(u: np.ndarray, model: ModelSpec,
                     mode: Mode = Mode.REFLECTION,
                     ctrl: SeriesControl | None = None) -> DensityValue:
    """Log shape density at the angle vector u (length M - 1).

    f(u) = J(u) |Sigma|^{-K/2} sum_t sum_kappa [C_kappa(Omega Sigma^{-1} W W')
    / (t! (K/2)_kappa)] int_0^inf r^{M+2t-1} h^{(2t)}(r^2 a + b) dr with
    a = tr Sigma^{-1} W W' and b = tr Omega. Works for any supported
    generator; the radial integrals are exact closed forms.
    """
    u = _check_angles(u, model)
    W = _angles_to_W(u, model)
    A = W @ W.T
    a = float(np.trace(model.sigma_inv @ A))
    b = model.trace_omega
    eigs = _noncentrality_eigs(model, A)
    gen = model.generator
    m = model.M - 1

    def coeff(t: int, kappa: Partition) -> LogSign:
        return radial_integral(gen, t, a, b, m, 1)

    series = zonal_series(coeff, eigs, model.K / 2.0, ctrl)
    if series.sign <= 0.0:
        raise DomainError("shape series summed to a non-positive value")
    log = (log_polar_jacobian(u) - model.K / 2.0 * model.log_det_sigma
           + series.log + _mode_log_factor(mode))
    return DensityValue(log, series.degrees_used, series.tail_bound, mode)


def central_shape_logdensity(u: np.ndarray, model: ModelSpec,
                             mode: Mode = Mode.REFLECTION) -> DensityValue:
    """Central shape log density; generator-free.

    f(u) = J(u) |Sigma|^{-K/2} a^{-M/2} Gamma(M/2) / (2 pi^{M/2}); for
    Sigma = sigma^2 I this is the uniform law on the angle box.
    """
    u = _check_angles(u, model)
    W = _angles_to_W(u, model)
    a = float(np.trace(model.sigma_inv @ (W @ W.T)))
    M = model.M
    log = (log_polar_jacobian(u) - model.K / 2.0 * model.log_det_sigma
           - M / 2.0 * math.log(a) + math.lgamma(M / 2.0)
           - math.log(2.0) - M / 2.0 * math.log(math.pi)
           + _mode_log_factor(mode))
    return DensityValue(log, 0, 0.0, mode)


def gaussian_shape_logdensity(u: np.ndarray, model: ModelSpec,
                              mode: Mode = Mode.REFLECTION,
                              ctrl: SeriesControl | None = None) -> DensityValue:
    """Gaussian shape log density with the radial integrals in closed form.

    f(u) = J(u) |Sigma|^{-K/2} (2 pi^{M/2})^{-1} e^{-R tr Omega}
    sum_t sum_kappa Gamma(M/2 + t) a^{-M/2-t} C_kappa(R Omega Sigma^{-1} W W')
    / (t! (K/2)_kappa). Requires a Gaussian generator (or Kotz with T = 1).
    """
    if model.generator.effective_T != 1:
        raise DomainError("gaussian_shape_logdensity needs a Gaussian-type generator")
    u = _check_angles(u, model)
    W = _angles_to_W(u, model)
    A = W @ W.T
    a = float(np.trace(model.sigma_inv @ A))
    b = model.trace_omega
    R = model.generator.R
    eigs = R * _noncentrality_eigs(model, A)
    M = model.M
    log_a = math.log(a)

    def coeff(t: int, kappa: Partition) -> LogSign:
        return LogSign(math.lgamma(M / 2.0 + t) - (M / 2.0 + t) * log_a, 1.0)

    series = zonal_series(coeff, eigs, model.K / 2.0, ctrl)
    log = (log_polar_jacobian(u) - model.K / 2.0 * model.log_det_sigma
           - math.log(2.0) - M / 2.0 * math.log(math.pi)
           - R * b + series.log + _mode_log_factor(mode))
    return DensityValue(log, series.degrees_used, series.tail_bound, mode)


def isotropic_shape_logdensity(u: np.ndarray, mu: np.ndarray, sigma2: float,
                               kind: IsotropicKind,
                               mode: Mode = Mode.REFLECTION,
                               ctrl: SeriesControl | None = None) -> DensityValue:
    """Shape log density under Sigma = sigma^2 I, Theta = I, R = 1/2.

    Single-series closed brackets with Q = M/2 + t and
    x = tr(mu' mu) / (2 sigma^2), X = mu' W W' mu / (2 sigma^2):
      Gaussian:  pref 1,            B = Gamma(Q)
      Kotz T=2:  pref 2/M,          B = Gamma(Q) (M/2 + x - t)
      Kotz T=3:  pref 4/(M(M+2)),   B = Gamma(Q) [(M/2 + x - t)^2 + M/2 - t]
    f = J(u) (2 pi^{M/2})^{-1} pref e^{-x} sum_t B(t,x)/t!
        sum_kappa C_kappa(X) / (K/2)_kappa.
    """
    mu = np.asarray(mu, dtype=float)
    if mu.ndim != 2:
        raise DomainError("mu must be an (N-1) x K matrix")
    if sigma2 <= 0:
        raise DomainError(f"sigma2 must be positive, got {sigma2}")
    Nm1, K = mu.shape
    M = Nm1 * K
    u = np.asarray(u, dtype=float)
    if u.shape != (M - 1,):
        raise DomainError(f"expected {M - 1} angles, got shape {u.shape}")
    W = angles_to_unitvec(u).reshape(Nm1, K, order="F")
    X = (mu.T @ W) @ (W.T @ mu) / (2.0 * sigma2)
    eigs = np.clip(np.linalg.eigvalsh(0.5 * (X + X.T)), 0.0, None)
    x = float(np.sum(mu * mu)) / (2.0 * sigma2)
    log_pref, bracket = _isotropic_bracket(kind, M, x)

    def coeff(t: int, kappa: Partition) -> LogSign:
        return bracket(t)

    series = zonal_series(coeff, eigs, K / 2.0, ctrl)
    if series.sign <= 0.0:
        raise DomainError("isotropic shape series summed to a non-positive value")
    log = (log_polar_jacobian(u) - math.log(2.0) - M / 2.0 * math.log(math.pi)
           + log_pref - x + series.log + _mode_log_factor(mode))
    return DensityValue(log, series.degrees_used, series.tail_bound, mode)


def _angles_batch_to_unitvecs(U: np.ndarray) -> np.ndarray:
    """Vectorized spherical chart: (S, m) angles -> (S, m + 1) unit vectors."""
    S, m = U.shape
    V = np.empty((S, m + 1))
    sines = np.cumprod(np.sin(U), axis=1)
    V[:, 0] = np.cos(U[:, 0])
    V[:, 1:m] = np.cos(U[:, 1:]) * sines[:, :-1]
    V[:, m] = sines[:, -1]
    return V


def _log_jacobian_batch(U: np.ndarray) -> np.ndarray:
    m = U.shape[1]
    s = np.sin(U[:, :m - 1])
    weights = np.arange(m - 1, 0, -1, dtype=float)
    with np.errstate(divide="ignore"):
        logs = np.where(s > 0, np.log(np.where(s > 0, s, 1.0)), -np.inf)
    return logs @ weights


def batch_shape_logdensity(U: np.ndarray, model: ModelSpec,
                           mode: Mode = Mode.REFLECTION,
                           ctrl: SeriesControl | None = None) -> np.ndarray:
    """Shape log density at many angle vectors at once; returns (batch,).

    Exploits the exact scaling int r^{q-1} h^{(2t)}(a r^2 + b) dr
    = a^{-q/2} int s^{q-1} h^{(2t)}(s^2 + b) ds, so the radial integrals are
    computed once per degree and only the zonal spectra and a = tr Sigma^{-1}
    W W' vary across the batch. Same values as :func:`shape_logdensity`.
    """
    from .zonal import ZonalSumTable, signed_logsumexp
    ctrl = ctrl or SeriesControl()
    U = np.asarray(U, dtype=float)
    m = model.M - 1
    if U.ndim != 2 or U.shape[1] != m:
        raise DomainError(f"angle batch must be (batch, {m})")
    Nm1, K, M = model.Nm1, model.K, model.M
    V = _angles_batch_to_unitvecs(U)
    W = V.reshape(-1, K, Nm1).transpose(0, 2, 1)        # column-major unpack
    a = np.einsum("ab,sak,sbk->s", model.sigma_inv, W, W)
    C = model.sigma_inv @ model.mu_whitened             # (N-1, K)
    G = np.einsum("nk,snj->skj", C, W)                  # (S, K, K) = C' W
    spectra = np.clip(np.linalg.eigvalsh(G @ G.transpose(0, 2, 1)), 0.0, None)
    b = model.trace_omega
    gen = model.generator
    tmax = ctrl.max_degree
    log_i = np.empty(tmax + 1)
    sign_i = np.empty(tmax + 1)
    for t in range(tmax + 1):
        ls = radial_integral(gen, t, 1.0, b, m, 1)
        log_i[t] = ls.log
        sign_i[t] = ls.sign
    lgamma_t = np.array([math.lgamma(t + 1) for t in range(tmax + 1)])
    ts = np.arange(tmax + 1, dtype=float)
    table = ZonalSumTable(K, tmax)
    log_a = np.log(a)
    logs = (table.logsums(spectra) + (log_i - lgamma_t)[None, :]
            - (M / 2.0 + ts)[None, :] * log_a[:, None])
    series_log, series_sign = signed_logsumexp(
        logs, np.broadcast_to(sign_i, logs.shape))
    if np.any(series_sign <= 0):
        raise DomainError("shape series summed to a non-positive value in batch")
    tail = np.max(logs[:, -1] - series_log)
    if b > 0 and tail > math.log(1e-8):
        raise SeriesTruncationError(
            f"batch series tail exp({tail:.3g}) too large at degree {tmax}; "
            "raise max_degree", tail_estimate=tail)
    return (_log_jacobian_batch(U) - K / 2.0 * model.log_det_sigma
            + series_log + _mode_log_factor(mode))


def _isotropic_bracket(kind: IsotropicKind, M: int, x: float):
    """(log prefactor, t -> B(t, x) in log-sign form) for the closed brackets."""
    if kind is IsotropicKind.GAUSSIAN:
        def bracket(t: int) -> LogSign:
            return LogSign(math.lgamma(M / 2.0 + t), 1.0)
        return 0.0, bracket
    if kind is IsotropicKind.KOTZ_T2:
        def bracket(t: int) -> LogSign:
            return LogSign.of(M / 2.0 + x - t).scale(math.lgamma(M / 2.0 + t))
        return math.log(2.0 / M), bracket
    if kind is IsotropicKind.KOTZ_T3:
        def bracket(t: int) -> LogSign:
            poly = (M / 2.0 + x - t) ** 2 + (M / 2.0 - t)
            return LogSign.of(poly).scale(math.lgamma(M / 2.0 + t))
        return math.log(4.0 / (M * (M + 2.0))), bracket
    raise DomainError(f"unknown isotropic kind {kind!r}")


def isotropic_kind_T(kind: IsotropicKind) -> int:
    return {IsotropicKind.GAUSSIAN: 1, IsotropicKind.KOTZ_T2: 2,
            IsotropicKind.KOTZ_T3: 3}[kind]
