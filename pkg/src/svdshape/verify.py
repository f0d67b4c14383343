"""Simulation oracles: forward sampling, Monte Carlo normalization mass, and
simulated-versus-analytic density agreement.

These are test infrastructure with a hard contract: disagreement beyond the
stated tolerances is a build failure, not advice. All sampling uses a
counter-based generator so results are reproducible regardless of chunking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .densities import batch_shape_logdensity
from .errors import DomainError
from .geometry import LandmarkSet, Mode, helmert_submatrix, preprocess, unitvec_to_angles
from .models import GeneratorKind, ModelSpec
from .special import chi_square_sf
from .zonal import SeriesControl


def _matrix_sqrt(A: np.ndarray) -> np.ndarray:
    evals, evecs = np.linalg.eigh(A)
    if evals.min() <= 0:
        raise DomainError("matrix is not positive definite")
    return (evecs * np.sqrt(evals)) @ evecs.T


def sample_landmarks(model: ModelSpec, count: int, seed: int) -> list[LandmarkSet]:
    """Draw landmark sets X (N x K) whose centered Y = L X follows the model.

    The elliptical law is a scale mixture: a Frobenius-uniform direction
    times the radial law r^2 ~ Gamma(M/2 + T - 1, rate R) (T = 1 recovers the
    Gaussian), colored by Sigma^{1/2} and Theta^{1/2} around mu. The lift to
    N landmarks prepends the zero Helmert component, so preprocessing
    recovers Y exactly.
    """
    if count < 1:
        raise DomainError(f"count must be positive, got {count}")
    gen = model.generator
    if gen.kind not in (GeneratorKind.GAUSSIAN, GeneratorKind.KOTZ_TYPE_I):
        raise DomainError(f"unsupported generator kind {gen.kind!r}")
    Nm1, K, M = model.Nm1, model.K, model.M
    rng = np.random.Generator(np.random.Philox(seed))
    Z = rng.standard_normal((count, Nm1, K))
    norms = np.linalg.norm(Z.reshape(count, -1), axis=1)
    U = Z / norms[:, None, None]
    r2 = rng.gamma(shape=M / 2.0 + gen.effective_T - 1, scale=1.0 / gen.R, size=count)
    sig_half = _matrix_sqrt(model.Sigma)
    th_half = _matrix_sqrt(model.Theta)
    Y = model.mu[None] + np.sqrt(r2)[:, None, None] * (sig_half @ U @ th_half)
    L = helmert_submatrix(Nm1 + 1)
    lift = L.T  # N x (N-1), exact left inverse of L on centered configs
    out = []
    for i in range(count):
        out.append(LandmarkSet(id=f"sim-{i:05d}", coords=lift @ Y[i]))
    return out


def mc_normalization(model: ModelSpec, mode: Mode = Mode.REFLECTION,
                     ctrl: SeriesControl | None = None,
                     mc_samples: int = 50000, seed: int = 0,
                     chunk: int = 20000) -> tuple[float, float]:
    """Monte Carlo mass of the shape density over the angle box.

    Draws u uniformly on [0, pi]^(m-1) x [0, 2 pi] and averages
    exp(shape_logdensity) times the box volume; a correctly normalized
    density returns (1, small SE).
    """
    if mc_samples < 100:
        raise DomainError("mc_samples must be >= 100")
    m = model.M - 1
    vol = math.pi ** (m - 1) * 2.0 * math.pi
    rng = np.random.Generator(np.random.Philox(seed))
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < mc_samples:
        b = min(chunk, mc_samples - done)
        U = np.empty((b, m))
        U[:, :-1] = rng.uniform(0.0, math.pi, size=(b, m - 1))
        U[:, -1] = rng.uniform(0.0, 2.0 * math.pi, size=b)
        vals = np.exp(batch_shape_logdensity(U, model, mode, ctrl))
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
        done += b
    mean = total / mc_samples
    var = max(total_sq / mc_samples - mean * mean, 0.0)
    return vol * mean, vol * math.sqrt(var / mc_samples)


@dataclass(frozen=True)
class MarginalReport:
    angle_index: int
    chi2: float
    dof: int
    critical_99: float
    passed: bool
    observed: np.ndarray
    expected: np.ndarray


@dataclass(frozen=True)
class SimulationReport:
    sim_count: int
    bins: int
    marginals: tuple[MarginalReport, ...]

    @property
    def passed(self) -> bool:
        return all(m.passed for m in self.marginals)


def _chi2_critical_99(dof: int) -> float:
    # invert the survival function by bisection; dof is small
    lo, hi = 0.0, 10.0 * dof + 100.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if chi_square_sf(mid, dof) > 0.01:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def simulation_vs_density(model: ModelSpec, mode: Mode = Mode.REFLECTION,
                          ctrl: SeriesControl | None = None,
                          sim_count: int = 100000, seed: int = 0,
                          density_samples: int | None = None) -> SimulationReport:
    """Compare simulated shape angles against the analytic density, 1-D
    marginal by marginal.

    The analytic angle density is the law of the polar angles of
    vec(Y H)/||Y|| with H Haar-uniform on O(K) (the density depends on u only
    through W W', i.e. it is the rotation-uniformized pre-shape law), so each
    simulated configuration gets an independent Haar right rotation before
    its angles are read off the free spherical chart.

    Expected bin masses come from exact quadrature when the model is central
    with isotropic Sigma (the density is then uniform on the box times the
    chart Jacobian), and from a larger importance-sampling run otherwise.
    Each marginal is scored by Pearson chi-square against its 99% critical
    value.
    """
    if sim_count < 1000:
        raise DomainError("sim_count must be >= 1000")
    Nm1, K, M = model.Nm1, model.K, model.M
    m = M - 1
    landmarks = sample_landmarks(model, sim_count, seed)
    rng = np.random.Generator(np.random.Philox(seed + 1))
    if mode is Mode.NO_REFLECTION:
        raise DomainError("simulation comparison is defined for reflection mode")
    angles = np.empty((sim_count, m))
    for i, lm in enumerate(landmarks):
        Y = preprocess(lm, model.Theta)
        g = rng.standard_normal((K, K))
        q, r = np.linalg.qr(g)
        H = q * np.sign(np.diag(r))[None, :]   # Haar on O(K)
        Yr = Y @ H
        angles[i] = unitvec_to_angles(Yr.reshape(-1, order="F"))
    bins = math.ceil(sim_count ** (1.0 / 3.0))
    central_iso = (model.trace_omega < 1e-12
                   and np.allclose(model.Sigma, model.Sigma[0, 0] * np.eye(Nm1)))
    edges_list = [np.linspace(0.0, math.pi if j < m - 1 else 2.0 * math.pi, bins + 1)
                  for j in range(m)]
    if not central_iso:
        mc_expected = _mc_bin_masses(model, mode, ctrl, edges_list,
                                     density_samples or 10 * sim_count, seed + 2)
    reports = []
    for j in range(m):
        edges = edges_list[j]
        observed, _ = np.histogram(angles[:, j], bins=edges)
        if central_iso:
            if j < m - 1:
                p = m - 1 - j  # marginal density proportional to sin^p
                norm = integrate.quad(lambda x: math.sin(x) ** p, 0.0, math.pi)[0]
                expected = np.array([
                    integrate.quad(lambda x: math.sin(x) ** p, edges[i], edges[i + 1])[0]
                    for i in range(bins)]) / norm
            else:
                expected = np.full(bins, 1.0 / bins)
            expected_var = np.zeros(bins)
        else:
            expected, expected_var = mc_expected[0][j], mc_expected[1][j]
        expected = expected * sim_count
        # denominator carries both the multinomial variance of the observed
        # counts and the Monte Carlo variance of the expected counts
        denom = expected + sim_count ** 2 * expected_var
        mask = expected > 5.0
        chi2 = float(np.sum((observed[mask] - expected[mask]) ** 2 / denom[mask]))
        dof = int(mask.sum()) - 1
        crit = _chi2_critical_99(dof)
        reports.append(MarginalReport(angle_index=j, chi2=chi2, dof=dof,
                                      critical_99=crit, passed=chi2 < crit,
                                      observed=observed, expected=expected))
    return SimulationReport(sim_count=sim_count, bins=bins,
                            marginals=tuple(reports))


def _mc_bin_masses(model: ModelSpec, mode: Mode, ctrl: SeriesControl | None,
                   edges_list: list[np.ndarray], samples: int,
                   seed: int,
                   chunk: int = 20000) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Expected marginal bin masses of the analytic density, by box MC.

    One shared importance sample serves every marginal. Returns the bin
    masses and the variance of each mass estimate (variance of the mean),
    so callers can fold the estimation noise into their test statistics.
    """
    m = model.M - 1
    vol = math.pi ** (m - 1) * 2.0 * math.pi
    rng = np.random.Generator(np.random.Philox(seed))
    sums = [np.zeros(len(edges) - 1) for edges in edges_list]
    sums_sq = [np.zeros(len(edges) - 1) for edges in edges_list]
    done = 0
    while done < samples:
        b = min(chunk, samples - done)
        U = np.empty((b, m))
        U[:, :-1] = rng.uniform(0.0, math.pi, size=(b, m - 1))
        U[:, -1] = rng.uniform(0.0, 2.0 * math.pi, size=b)
        w = np.exp(batch_shape_logdensity(U, model, mode, ctrl))
        for j, edges in enumerate(edges_list):
            idx = np.clip(np.digitize(U[:, j], edges) - 1, 0, len(sums[j]) - 1)
            np.add.at(sums[j], idx, w)
            np.add.at(sums_sq[j], idx, w * w)
        done += b
    masses = [s * vol / samples for s in sums]
    variances = [np.maximum(sq * vol * vol / samples - mass * mass, 0.0) / samples
                 for sq, mass in zip(sums_sq, masses)]
    return masses, variances
