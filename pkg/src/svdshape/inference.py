"""Likelihood inference on samples of shapes: location MLE, modified BIC
model selection, evidence grading, and the two-group likelihood-ratio test.

The worked inference protocol is isotropic: Sigma = sigma^2 I, Theta = I,
sigma^2 fixed in advance (variance estimation in these models is known to be
badly conditioned; a free-sigma^2 fit exists but is experimental). The
likelihood depends on mu only through mu' W_i W_i' mu and tr mu' mu, so mu is
identified up to a right O(K) factor; fits are reported with a fixed sign
canonicalization and the orbit is documented rather than resolved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import optimize

from .densities import IsotropicKind, _isotropic_bracket
from .errors import DomainError, NumericError, SeriesTruncationError
from .geometry import Mode, ShapeCoords
from .special import chi_square_sf
from .zonal import SeriesControl, ZonalSumTable, signed_logsumexp


@dataclass(frozen=True)
class SampleOfShapes:
    """A homogeneous group of shape coordinates."""

    group_id: str
    items: tuple[tuple[str, ShapeCoords], ...]

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        if not self.items:
            raise DomainError(f"sample {self.group_id!r} is empty")
        shapes = [sc for _, sc in self.items]
        first = shapes[0]
        for _, sc in self.items:
            if sc.W.shape != first.W.shape or sc.mode is not first.mode:
                raise DomainError(
                    f"sample {self.group_id!r} mixes dimensions or modes")

    @property
    def size(self) -> int:
        return len(self.items)

    @property
    def Nm1(self) -> int:
        return self.items[0][1].W.shape[0]

    @property
    def K(self) -> int:
        return self.items[0][1].W.shape[1]

    @property
    def mode(self) -> Mode:
        return self.items[0][1].mode

    def merged(self, other: "SampleOfShapes", group_id: str) -> "SampleOfShapes":
        if (self.Nm1, self.K, self.mode) != (other.Nm1, other.K, other.mode):
            raise DomainError("cannot pool samples with different dimensions or modes")
        return SampleOfShapes(group_id, self.items + other.items)


@dataclass(frozen=True)
class OptimizerConfig:
    n_starts: int = 4
    seed: int = 0
    fatol: float = 1e-8
    xatol: float = 1e-6
    max_evaluations: int = 50000

    def __post_init__(self):
        if self.n_starts < 1:
            raise DomainError("need at least one optimizer start")


@dataclass(frozen=True)
class FitResult:
    mu_hat: np.ndarray
    sigma2: float
    loglik: float
    n_params: int
    bic_star: float
    converged: bool
    evaluations: int


class IsotropicLikelihood:
    """Vectorized isotropic log-likelihood of a sample, as a function of mu.

    Per specimen the angle density is
    J(u_i) (2 pi^{M/2})^{-1} pref e^{-x} sum_t B(t, x)/t!
    sum_kappa C_kappa(mu' W_i W_i' mu / (2 sigma^2)) / (K/2)_kappa;
    everything that does not depend on mu is precomputed, and the zonal inner
    sums are evaluated for the whole sample at once from a collapsed monomial
    table. B(t, x) can be negative for the Kotz kinds, so the degree sum uses
    a signed log-sum-exp.
    """

    def __init__(self, sample: SampleOfShapes, kind: IsotropicKind,
                 sigma2: float, ctrl: SeriesControl | None = None):
        if sigma2 <= 0:
            raise DomainError(f"sigma2 must be positive, got {sigma2}")
        self.sample = sample
        self.kind = kind
        self.sigma2 = float(sigma2)
        self.ctrl = ctrl or SeriesControl()
        self.Nm1, self.K = sample.Nm1, sample.K
        self.M = self.Nm1 * self.K
        self._W = np.stack([sc.W for _, sc in sample.items])     # (S, N-1, K)
        mode_log = -math.log(2.0) if sample.mode is Mode.NO_REFLECTION else 0.0
        log_pref, _ = _isotropic_bracket(kind, self.M, 0.0)
        logJ = []
        for sid, sc in sample.items:
            lj = _log_jacobian_of(sc)
            if not math.isfinite(lj):
                raise DomainError(f"specimen {sid!r} sits at a chart pole")
            logJ.append(lj)
        self._const = (float(np.sum(logJ))
                       + sample.size * (-math.log(2.0)
                                        - self.M / 2.0 * math.log(math.pi)
                                        + log_pref + mode_log))
        self._table = ZonalSumTable(self.K, self.ctrl.max_degree)
        self._lgamma_t = np.array(
            [math.lgamma(t + 1) for t in range(self.ctrl.max_degree + 1)])
        self._ts = np.arange(self.ctrl.max_degree + 1, dtype=float)

    def _bracket_arrays(self, x: float) -> tuple[np.ndarray, np.ndarray]:
        """(log |B(t,x)|, sign) for all degrees at once."""
        M, ts = self.M, self._ts
        lg = np.array([math.lgamma(M / 2.0 + t) for t in range(len(ts))])
        if self.kind is IsotropicKind.GAUSSIAN:
            return lg, np.ones_like(ts)
        if self.kind is IsotropicKind.KOTZ_T2:
            poly = M / 2.0 + x - ts
        else:
            poly = (M / 2.0 + x - ts) ** 2 + (M / 2.0 - ts)
        sign = np.sign(poly)
        with np.errstate(divide="ignore"):
            return lg + np.log(np.abs(np.where(poly == 0, 1.0, poly))), sign

    def per_specimen(self, mu: np.ndarray) -> np.ndarray:
        """Log density of each specimen at location mu."""
        mu = np.asarray(mu, dtype=float).reshape(self.Nm1, self.K)
        x = float(np.sum(mu * mu)) / (2.0 * self.sigma2)
        G = self._W.transpose(0, 2, 1) @ mu                      # (S, K, K)
        X = G.transpose(0, 2, 1) @ G / (2.0 * self.sigma2)
        spectra = np.clip(np.linalg.eigvalsh(X), 0.0, None)
        log_s = self._table.logsums(spectra)                     # (S, tmax+1)
        lb, sb = self._bracket_arrays(x)
        logs = log_s + (lb - self._lgamma_t)[None, :]
        total_log, total_sign = signed_logsumexp(logs, np.broadcast_to(sb, logs.shape))
        if np.any(total_sign <= 0):
            bad = int(np.argmax(total_sign <= 0))
            raise NumericError(
                f"specimen {self.sample.items[bad][0]!r}: series summed to a "
                "non-positive value")
        self._last_tail = float(np.max(logs[:, -1] - total_log))
        return total_log - x

    def loglik(self, mu: np.ndarray) -> float:
        return self._const + float(np.sum(self.per_specimen(mu)))

    def check_converged(self, mu: np.ndarray, rel_tol: float = 1e-8) -> None:
        """Raise if the truncated degree sum has not converged at mu."""
        self.per_specimen(mu)
        if self._last_tail > math.log(rel_tol):
            raise SeriesTruncationError(
                f"degree-{self.ctrl.max_degree} truncation leaves a relative "
                f"tail of exp({self._last_tail:.3g}); raise max_degree")


def _log_jacobian_of(sc: ShapeCoords) -> float:
    j = sc.jacobian
    return math.log(j) if j > 0 else -math.inf


def log_likelihood(sample: SampleOfShapes, mu: np.ndarray, sigma2: float,
                   kind: IsotropicKind, ctrl: SeriesControl | None = None) -> float:
    """Sum of isotropic shape log densities over the sample's specimens."""
    return IsotropicLikelihood(sample, kind, sigma2, ctrl).loglik(mu)


def bic_star(loglik: float, n_params: int, sample_size: int) -> float:
    """Modified BIC: -2 loglik + n_params (log(n + 2) - log 24)."""
    if sample_size < 1:
        raise DomainError(f"sample_size must be >= 1, got {sample_size}")
    if n_params < 0:
        raise DomainError(f"n_params must be >= 0, got {n_params}")
    return -2.0 * loglik + n_params * (math.log(sample_size + 2.0) - math.log(24.0))


class EvidenceGrade(Enum):
    WEAK = "Weak"
    POSITIVE = "Positive"
    STRONG = "Strong"
    VERY_STRONG = "VeryStrong"


def evidence_grade(delta_bic: float) -> EvidenceGrade:
    """Grade of evidence for a BIC difference; boundaries go to the lower band."""
    if delta_bic < 0:
        raise DomainError(f"delta_bic must be non-negative, got {delta_bic}")
    if delta_bic <= 2.0:
        return EvidenceGrade.WEAK
    if delta_bic <= 6.0:
        return EvidenceGrade.POSITIVE
    if delta_bic <= 10.0:
        return EvidenceGrade.STRONG
    return EvidenceGrade.VERY_STRONG


def _canonical_sign(mu: np.ndarray) -> np.ndarray:
    flat = mu.reshape(-1)
    nz = flat[flat != 0]
    if nz.size and nz[0] < 0:
        return -mu
    return mu


def fit_location(sample: SampleOfShapes, kind: IsotropicKind,
                 sigma2_fixed: float, opt: OptimizerConfig | None = None,
                 ctrl: SeriesControl | None = None,
                 free_sigma2: bool = False) -> FitResult:
    """Maximum-likelihood location fit with sigma^2 fixed by protocol.

    Derivative-free simplex search, multi-start: start 0 is the moment seed
    mean_i(r_i W_i) (an unbiased location estimate up to the rotation orbit),
    the rest are seeded perturbations. ``free_sigma2`` additionally optimizes
    log sigma^2 (experimental; variance estimation is poorly conditioned).
    """
    opt = opt or OptimizerConfig()
    like = IsotropicLikelihood(sample, kind, sigma2_fixed, ctrl)
    Nm1, K = sample.Nm1, sample.K
    n_loc = Nm1 * K
    seed0 = np.mean([sc.r * sc.W for _, sc in sample.items], axis=0)
    rng = np.random.Generator(np.random.Philox(opt.seed))
    scale = 0.25 * float(np.linalg.norm(seed0)) / math.sqrt(n_loc) \
        + math.sqrt(sigma2_fixed / sample.size)
    starts = [seed0.reshape(-1)]
    for _ in range(opt.n_starts - 1):
        starts.append(seed0.reshape(-1) + rng.normal(scale=scale, size=n_loc))

    evaluations = 0
    best = None

    if free_sigma2:
        def objective(theta):
            mu, log_s2 = theta[:n_loc], theta[n_loc]
            lk = IsotropicLikelihood(sample, kind, math.exp(log_s2), ctrl)
            return -lk.loglik(mu)
        starts = [np.concatenate([s, [math.log(sigma2_fixed)]]) for s in starts]
    else:
        def objective(theta):
            return -like.loglik(theta)

    for x0 in starts:
        res = optimize.minimize(
            objective, x0, method="Nelder-Mead",
            options={"fatol": opt.fatol, "xatol": opt.xatol,
                     "maxfev": opt.max_evaluations, "maxiter": opt.max_evaluations})
        evaluations += res.nfev
        if best is None or res.fun < best.fun:
            best = res
    assert best is not None
    if free_sigma2:
        mu_hat = best.x[:n_loc].reshape(Nm1, K)
        sigma2 = math.exp(best.x[n_loc])
        n_params = n_loc + 1
        final_like = IsotropicLikelihood(sample, kind, sigma2, ctrl)
    else:
        mu_hat = best.x.reshape(Nm1, K)
        sigma2 = sigma2_fixed
        n_params = n_loc
        final_like = like
    final_like.check_converged(mu_hat)
    loglik = -float(best.fun)
    return FitResult(mu_hat=_canonical_sign(mu_hat), sigma2=sigma2,
                     loglik=loglik, n_params=n_params,
                     bic_star=bic_star(loglik, n_params, sample.size),
                     converged=bool(best.success), evaluations=evaluations)


@dataclass(frozen=True)
class LrTestResult:
    statistic: float
    df: int
    p_value: float
    fit_pooled: FitResult
    fit_group1: FitResult
    fit_group2: FitResult


def lr_test_equal_means(sample1: SampleOfShapes, sample2: SampleOfShapes,
                        kind: IsotropicKind, sigma2_fixed: float,
                        opt: OptimizerConfig | None = None,
                        ctrl: SeriesControl | None = None) -> LrTestResult:
    """Likelihood-ratio test of equal locations across two groups.

    H0 fits one pooled mu, H1 fits each group separately; the statistic
    2 (loglik_H1 - loglik_H0) is referred to chi-square with (N-1)K degrees
    of freedom. A statistic below -1e-6 means an optimizer failure (the
    models are nested) and raises instead of returning a bogus p-value.
    """
    if (sample1.Nm1, sample1.K, sample1.mode) != (sample2.Nm1, sample2.K, sample2.mode):
        raise DomainError("groups must share N, K and mode")
    pooled = sample1.merged(sample2, f"{sample1.group_id}+{sample2.group_id}")
    fit0 = fit_location(pooled, kind, sigma2_fixed, opt, ctrl)
    fit1 = fit_location(sample1, kind, sigma2_fixed, opt, ctrl)
    fit2 = fit_location(sample2, kind, sigma2_fixed, opt, ctrl)
    stat = 2.0 * (fit1.loglik + fit2.loglik - fit0.loglik)
    if stat < -1e-6:
        raise NumericError(
            f"nested fits gave a negative LR statistic ({stat:.3g}); "
            "the pooled optimizer likely failed")
    stat = max(stat, 0.0)
    df = sample1.Nm1 * sample1.K
    return LrTestResult(statistic=stat, df=df,
                        p_value=chi_square_sf(stat, df),
                        fit_pooled=fit0, fit_group1=fit1, fit_group2=fit2)
