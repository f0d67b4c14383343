"""Zonal polynomials on symmetric-matrix spectra and truncated zonal series.

Zonal polynomial values are always computed from eigenvalues, never from
matrix entries: every argument that appears in the densities enters only
through its spectrum, so orthogonal invariance is structural.

The evaluation route is the classical recursion for the coefficients of the
zonal polynomial in the monomial symmetric function basis (the alpha = 2
member of the Jack family), with the leading coefficient fixed by the hook
products of the partition. Coefficient tables are memoized per
(weight, max_parts) because likelihood loops evaluate thousands of series
with identical partition structure.
"""

from __future__ import annotations

import itertools
import math
import threading
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SeriesTruncationError
from .special import LogSign, Partition, enumerate_partitions, gen_pochhammer_log, multivariate_gamma

_EIG_ZERO = 0.0  # structural zeros only; tiny eigenvalues still contribute


@dataclass(frozen=True)
class SeriesControl:
    """Truncation policy for every zonal series in the package.

    Convergence is declared once ``tail_window`` consecutive degree blocks
    each contribute less than ``rel_tol`` times the accumulated magnitude.
    """

    max_degree: int = 60
    rel_tol: float = 1e-12
    tail_window: int = 3

    def __post_init__(self):
        if self.max_degree < 1:
            raise DomainError("max_degree must be >= 1")
        if self.rel_tol <= 0:
            raise DomainError("rel_tol must be positive")
        if self.tail_window < 1:
            raise DomainError("tail_window must be >= 1")


@dataclass
class SeriesResult:
    """Converged series value in log-sign form plus convergence diagnostics."""

    log: float
    sign: float
    degrees_used: int
    tail_bound: float

    @property
    def value(self) -> float:
        if self.sign == 0.0:
            return 0.0
        return self.sign * math.exp(self.log)


def _dominates(kappa: tuple[int, ...], lam: tuple[int, ...]) -> bool:
    """True if kappa >= lam in the dominance order (equal weights assumed)."""
    acc_k = acc_l = 0
    for i in range(max(len(kappa), len(lam))):
        acc_k += kappa[i] if i < len(kappa) else 0
        acc_l += lam[i] if i < len(lam) else 0
        if acc_k < acc_l:
            return False
    return True


def _rho(kappa: tuple[int, ...]) -> int:
    return sum(k * (k - (i + 1)) for i, k in enumerate(kappa))


def _leading_coefficient(kappa: tuple[int, ...]) -> float:
    """Coefficient of the monomial m_kappa in C_kappa: 2^f f! / prod(upper hooks)."""
    f = sum(kappa)
    conj = [0] * (kappa[0] if kappa else 0)
    for k in kappa:
        for j in range(k):
            conj[j] += 1
    log_upper = 0.0
    for i, k in enumerate(kappa):  # cell (i+1, j+1), arm a, leg l
        for j in range(k):
            arm = k - (j + 1)
            leg = conj[j] - (i + 1)
            log_upper += math.log(2 * (arm + 1) + leg)
    return math.exp(f * math.log(2.0) + math.lgamma(f + 1) - log_upper) if f else 1.0


_table_lock = threading.Lock()
_table_cache: dict[tuple[int, int], dict[tuple[int, ...], dict[tuple[int, ...], float]]] = {}


def _zonal_table(weight: int, max_parts: int) -> dict[tuple[int, ...], dict[tuple[int, ...], float]]:
    """Monomial-basis coefficients c[kappa][lam] of C_kappa for all kappa of
    ``weight`` with at most ``max_parts`` parts (lam restricted likewise)."""
    key = (weight, max_parts)
    cached = _table_cache.get(key)
    if cached is not None:
        return cached
    with _table_lock:
        cached = _table_cache.get(key)
        if cached is not None:
            return cached
        parts_list = [p.parts for p in enumerate_partitions(weight, max_parts)]
        table: dict[tuple[int, ...], dict[tuple[int, ...], float]] = {}
        for kappa in parts_list:
            coeffs: dict[tuple[int, ...], float] = {kappa: _leading_coefficient(kappa)}
            rho_k = _rho(kappa)
            # reverse-lex order refines dominance downwards, so every mu
            # needed below is already filled when lam is processed
            for lam in parts_list:
                if lam == kappa or not _dominates(kappa, lam):
                    continue
                total = 0.0
                lam_l = list(lam)
                p = len(lam_l)
                for s in range(1, p):
                    for r in range(s):
                        for t in range(1, lam_l[s] + 1):
                            mu = lam_l.copy()
                            mu[r] += t
                            mu[s] -= t
                            coef = mu[r] - mu[s]
                            mu_sorted = tuple(sorted((x for x in mu if x > 0), reverse=True))
                            if len(mu_sorted) > max_parts:
                                continue
                            c_mu = coeffs.get(mu_sorted)
                            if c_mu is not None and _dominates(kappa, mu_sorted):
                                total += coef * c_mu
                denom = rho_k - _rho(lam)
                if total != 0.0:
                    coeffs[lam] = total / denom
            table[kappa] = coeffs
        _table_cache[key] = table
        return table


def _monomial(lam: tuple[int, ...], eigs: tuple[float, ...]) -> float:
    """Monomial symmetric function m_lam at the given values."""
    d = len(eigs)
    padded = lam + (0,) * (d - len(lam))
    total = 0.0
    for perm in set(itertools.permutations(padded)):
        prod = 1.0
        for x, e in zip(eigs, perm):
            if e:
                prod *= x**e
        total += prod
    return total


def zonal_poly(kappa: Partition, eigenvalues) -> float:
    """Zonal polynomial C_kappa at the spectrum ``eigenvalues``.

    Exactly 0 when kappa has more parts than there are nonzero eigenvalues.
    """
    eigs = tuple(sorted(float(x) for x in eigenvalues))
    if not eigs:
        raise DomainError("eigenvalue list must be non-empty")
    if len(kappa) == 0:
        return 1.0
    nonzero = tuple(x for x in eigs if x != _EIG_ZERO)
    if len(kappa.parts) > len(nonzero):
        return 0.0
    table = _zonal_table(kappa.weight, len(nonzero))
    coeffs = table[kappa.parts]
    return math.fsum(c * _monomial(lam, nonzero) for lam, c in coeffs.items())


class _ScaledAccumulator:
    """Signed accumulator that tracks a floating log scale to avoid overflow."""

    def __init__(self):
        self.shift = -math.inf
        self.total = 0.0

    def add(self, term: LogSign):
        if term.sign == 0.0:
            return
        if term.log > self.shift:
            if math.isfinite(self.shift):
                self.total *= math.exp(self.shift - term.log)
            self.shift = term.log
            self.total += term.sign
        else:
            self.total += term.sign * math.exp(term.log - self.shift)

    def logsign(self) -> LogSign:
        if self.total == 0.0 or not math.isfinite(self.shift):
            return LogSign.zero()
        return LogSign(self.shift + math.log(abs(self.total)), math.copysign(1.0, self.total))

    def log_abs(self) -> float:
        ls = self.logsign()
        return ls.log if ls.sign != 0.0 else -math.inf


def zonal_series(coeff, argument_eigenvalues, denominator_a: float,
                 ctrl: SeriesControl | None = None) -> SeriesResult:
    """Evaluate sum_t sum_kappa coeff(t, kappa) C_kappa(arg) / (t! (a)_kappa).

    ``coeff`` returns a :class:`LogSign`; the sum is accumulated degree block
    by degree block (all kappa of one degree together) because partitions
    within a degree can cancel. Raises :class:`SeriesTruncationError` when the
    tail test fails within ``ctrl.max_degree``.
    """
    ctrl = ctrl or SeriesControl()
    eigs = tuple(sorted(float(x) for x in argument_eigenvalues))
    d = max(1, sum(1 for x in eigs if x != _EIG_ZERO))
    acc = _ScaledAccumulator()
    quiet_blocks = 0
    last_block = math.inf
    degrees_used = 0
    for t in range(ctrl.max_degree + 1):
        block = _ScaledAccumulator()
        log_tfac = math.lgamma(t + 1)
        for kappa in enumerate_partitions(t, min(d, t) if t else 1):
            c = coeff(t, kappa)
            if c.sign == 0.0:
                continue
            ck = zonal_poly(kappa, eigs)
            if ck == 0.0:
                continue
            poch = gen_pochhammer_log(denominator_a, kappa)
            if poch.sign == 0.0:
                raise DomainError(
                    f"series denominator ({denominator_a})_{kappa.parts} vanishes")
            term = c.mul(LogSign.of(ck)).div(poch).scale(-log_tfac)
            block.add(term)
        block_ls = block.logsign()
        acc.add(block_ls)
        degrees_used = t
        total_log = acc.log_abs()
        block_log = block_ls.log if block_ls.sign != 0.0 else -math.inf
        last_block = block_log
        threshold = (total_log + math.log(ctrl.rel_tol)) if math.isfinite(total_log) else -math.inf
        if t >= 1:
            if block_log <= threshold:
                quiet_blocks += 1
                if quiet_blocks >= ctrl.tail_window:
                    break
            else:
                quiet_blocks = 0
    else:
        result = acc.logsign()
        raise SeriesTruncationError(
            f"zonal series did not converge within degree {ctrl.max_degree} "
            f"(last block log-magnitude {last_block:.3g})",
            partial_log=result.log, partial_sign=result.sign, tail_estimate=last_block)
    result = acc.logsign()
    total_log = result.log if result.sign != 0.0 else 0.0
    tail = math.exp(last_block - total_log) if math.isfinite(last_block) else 0.0
    return SeriesResult(log=result.log, sign=result.sign,
                        degrees_used=degrees_used, tail_bound=tail)


def _unit_coeff(t: int, kappa: Partition) -> LogSign:
    return LogSign.one()


def hypergeom_0F1(b: float, matrix_eigenvalues, ctrl: SeriesControl | None = None) -> float:
    """Hypergeometric 0F1(b; X) of matrix argument, from the spectrum of X."""
    return zonal_series(_unit_coeff, matrix_eigenvalues, b, ctrl).value


def _falling_factorial_log(p: float, k: int) -> LogSign:
    out = LogSign.one()
    for i in range(k):
        out = out.mul(LogSign.of(p - i))
        if out.sign == 0.0:
            return out
    return out


def _real_power_log(base: float, exponent: float) -> LogSign:
    if base > 0.0:
        return LogSign(exponent * math.log(base), 1.0)
    if base == 0.0:
        return LogSign.one() if exponent == 0.0 else LogSign.zero()
    if exponent != round(exponent):
        raise DomainError(f"negative base {base} with non-integer exponent {exponent}")
    sign = -1.0 if round(exponent) % 2 else 1.0
    return LogSign(exponent * math.log(-base), sign)


def log_stiefel_volume(n: int, K: int) -> float:
    """Log volume of the manifold of n x K frames with orthonormal rows."""
    if n > K:
        raise DomainError(f"frame rows n={n} cannot exceed columns K={K}")
    return n * math.log(2.0) + K * n / 2.0 * math.log(math.pi) - multivariate_gamma(n, K / 2.0).log


def power_trace_integral_series(p: float, Y_trace: float, X_gram_eigenvalues,
                                K: int, n: int, ctrl: SeriesControl | None = None) -> float:
    """Frame integral of [tr(Y + XH)]^p over n x K frames, as a zonal series.

    Equals Vol * sum_f sum_lam fall(p, 2f) (tr Y)^(p-2f) C_lam(XX'/4)
    / ((K/2)_lam f!), where fall is the falling factorial (the binomial-series
    coefficient; the rising-factorial reading fails the Monte Carlo
    cross-check). Requires tr Y != 0.
    """
    if Y_trace == 0.0:
        raise DomainError("tr Y must be nonzero for the power-trace series")

    def coeff(f: int, kappa: Partition) -> LogSign:
        fall = _falling_factorial_log(p, 2 * f)
        if fall.sign == 0.0:
            return fall
        return fall.mul(_real_power_log(Y_trace, p - 2 * f))

    quarter = [x / 4.0 for x in X_gram_eigenvalues]
    series = zonal_series(coeff, quarter, K / 2.0, ctrl)
    return series.value * math.exp(log_stiefel_volume(n, K))


def exp_trace_integral_series(Y_trace: float, X_gram_eigenvalues, K: int, n: int,
                              r: float, ctrl: SeriesControl | None = None) -> float:
    """Frame integral of tr(Y+XH) etr{r(Y+XH)} over n x K frames.

    Evaluates Vol * etr(rY) * [tr Y 0F1(K/2; r^2/4 XX')
    + sum_f 2f r^(2f-1) C_lam(XX'/4) / ((K/2)_lam f!)]; the second summand is
    d/dr of the 0F1 series, which is the reading consistent with the Monte
    Carlo oracle.
    """
    quarter = [x / 4.0 for x in X_gram_eigenvalues]
    scaled = [r * r * q for q in quarter]
    f01 = hypergeom_0F1(K / 2.0, scaled, ctrl)

    def deriv_coeff(f: int, kappa: Partition) -> LogSign:
        if f == 0:
            return LogSign.zero()
        return _real_power_log(r, 2 * f - 1).mul(LogSign.of(2.0 * f))

    deriv = zonal_series(deriv_coeff, quarter, K / 2.0, ctrl).value
    vol = math.exp(log_stiefel_volume(n, K))
    return vol * math.exp(r * Y_trace) * (Y_trace * f01 + deriv)


class ZonalSumTable:
    """Vectorized evaluator of the inner zonal sums, one value per spectrum.

    Precomputes, for every degree t <= tmax, the monomial expansion of
    S_t(X) = sum_{kappa of t} C_kappa(X) / (a)_kappa, collapsed to
    coefficients d_{t,lam} = sum_kappa c_{kappa,lam} / (a)_kappa >= 0 (zonal
    monomial coefficients are non-negative and (a)_kappa > 0 for a >= K/2).
    ``logsums`` then returns log S_t for a whole batch of K-point spectra in
    one pass, which is what likelihood loops and Monte Carlo mass checks need.
    """

    def __init__(self, K: int, tmax: int, denominator_a: float | None = None):
        if K < 1 or tmax < 0:
            raise DomainError("need K >= 1 and tmax >= 0")
        a = K / 2.0 if denominator_a is None else denominator_a
        self.K = K
        self.tmax = tmax
        exps: list[tuple[int, ...]] = []
        logd: list[float] = []
        bounds = [0]
        for t in range(tmax + 1):
            lam_coeffs: dict[tuple[int, ...], float] = {}
            if t == 0:
                lam_coeffs[(0,) * K] = 1.0
            else:
                table = _zonal_table(t, K)
                for kappa in enumerate_partitions(t, K):
                    poch = gen_pochhammer_log(a, kappa)
                    if poch.sign <= 0.0:
                        raise DomainError(
                            f"denominator ({a})_{kappa.parts} is not positive")
                    inv = math.exp(-poch.log)
                    for lam, c in table[kappa.parts].items():
                        padded = lam + (0,) * (K - len(lam))
                        lam_coeffs[padded] = lam_coeffs.get(padded, 0.0) + c * inv
            for lam, d in sorted(lam_coeffs.items()):
                if d <= 0.0:
                    continue
                for perm in sorted(set(itertools.permutations(lam))):
                    exps.append(perm)
                    logd.append(math.log(d))
            bounds.append(len(exps))
        self._exps = np.asarray(exps, dtype=float)          # (NT, K)
        self._logd = np.asarray(logd, dtype=float)          # (NT,)
        self._bounds = bounds

    def logsums(self, spectra: np.ndarray) -> np.ndarray:
        """log S_t for each row of ``spectra``; returns (batch, tmax + 1).

        Spectra must be non-negative; zero eigenvalues are handled (their
        monomials vanish exactly).
        """
        spectra = np.asarray(spectra, dtype=float)
        if spectra.ndim != 2 or spectra.shape[1] != self.K:
            raise DomainError(f"spectra must be (batch, {self.K})")
        if np.any(spectra < 0):
            raise DomainError("spectra must be non-negative")
        # zero eigenvalues: a large negative stand-in for log 0 keeps the
        # segment reductions finite (exp underflows to 0 exactly)
        loge = np.where(spectra > 0.0, np.log(np.where(spectra > 0, spectra, 1.0)),
                        -1e12)
        lm = loge @ self._exps.T + self._logd           # (batch, NT)
        starts = np.asarray(self._bounds[:-1], dtype=np.intp)
        peak = np.maximum.reduceat(lm, starts, axis=1)  # (batch, tmax + 1)
        expanded = np.repeat(peak, np.diff(self._bounds), axis=1)
        sums = np.add.reduceat(np.exp(lm - expanded), starts, axis=1)
        with np.errstate(divide="ignore"):
            return peak + np.log(sums)


def signed_logsumexp(logs: np.ndarray, signs: np.ndarray, axis: int = -1):
    """(log |sum|, sign) of sum_i signs_i exp(logs_i) along ``axis``."""
    logs = np.asarray(logs, dtype=float)
    signs = np.asarray(signs, dtype=float)
    peak = logs.max(axis=axis, keepdims=True)
    safe = np.where(np.isfinite(peak), peak, 0.0)
    total = (signs * np.exp(logs - safe)).sum(axis=axis)
    sign = np.sign(total)
    with np.errstate(divide="ignore"):
        log = np.squeeze(safe, axis=axis) + np.log(np.abs(np.where(total == 0, 1.0, total)))
    log = np.where(sign == 0, -np.inf, log)
    return log, sign


def stiefel_mc_integral(integrand, n: int, K: int, samples: int, seed: int,
                        chunk: int = 65536) -> tuple[float, float]:
    """Monte Carlo integral of ``integrand`` over Haar-uniform n x K frames,
    scaled by the frame-manifold volume.

    ``integrand`` receives a (batch, n, K) array of frames and must return a
    (batch,) array. Deterministic for a fixed seed (counter-based generator,
    fixed chunking).
    """
    if n > K:
        raise DomainError(f"frame rows n={n} cannot exceed columns K={K}")
    if samples < 100:
        raise DomainError("samples must be >= 100")
    rng = np.random.Generator(np.random.Philox(seed))
    vol = math.exp(log_stiefel_volume(n, K))
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < samples:
        b = min(chunk, samples - done)
        g = rng.standard_normal((b, n, K))
        u, _, vt = np.linalg.svd(g, full_matrices=False)
        frames = u @ vt
        vals = np.asarray(integrand(frames), dtype=float)
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
        done += b
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    se = math.sqrt(var / samples)
    return vol * mean, vol * se
