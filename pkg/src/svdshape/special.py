"""Integer partitions and the scalar special functions used by every series term.

All gamma-bearing quantities are computed in log space with explicit sign
tracking (:class:`LogSign`), because the density prefactors combine ratios of
multivariate gamma functions and powers of pi that overflow in linear space
for moderate dimensions and series degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

from scipy.special import gammaincc

from .errors import DomainError


class LogSign(NamedTuple):
    """A real number stored as (log magnitude, sign in {-1, 0, +1})."""

    log: float
    sign: float

    @staticmethod
    def of(x: float) -> "LogSign":
        if x == 0.0:
            return LogSign(-math.inf, 0.0)
        return LogSign(math.log(abs(x)), math.copysign(1.0, x))

    @staticmethod
    def zero() -> "LogSign":
        return LogSign(-math.inf, 0.0)

    @staticmethod
    def one() -> "LogSign":
        return LogSign(0.0, 1.0)

    def mul(self, other: "LogSign") -> "LogSign":
        s = self.sign * other.sign
        if s == 0.0:
            return LogSign.zero()
        return LogSign(self.log + other.log, s)

    def div(self, other: "LogSign") -> "LogSign":
        if other.sign == 0.0:
            raise ZeroDivisionError("division by a zero LogSign")
        return LogSign(self.log - other.log, self.sign * other.sign)

    def scale(self, log_factor: float) -> "LogSign":
        if self.sign == 0.0:
            return self
        return LogSign(self.log + log_factor, self.sign)

    @property
    def value(self) -> float:
        if self.sign == 0.0:
            return 0.0
        return self.sign * math.exp(self.log)


@dataclass(frozen=True)
class Partition:
    """An integer partition: positive, non-increasing parts."""

    parts: tuple[int, ...]

    def __post_init__(self):
        if any(p <= 0 for p in self.parts):
            raise DomainError(f"partition parts must be positive, got {self.parts}")
        if any(self.parts[i] < self.parts[i + 1] for i in range(len(self.parts) - 1)):
            raise DomainError(f"partition parts must be non-increasing, got {self.parts}")

    @property
    def weight(self) -> int:
        return sum(self.parts)

    def __len__(self) -> int:
        return len(self.parts)

    def __iter__(self):
        return iter(self.parts)

    def __repr__(self) -> str:
        return f"Partition{self.parts}"


@lru_cache(maxsize=None)
def enumerate_partitions(weight: int, max_parts: int) -> tuple[Partition, ...]:
    """All partitions of ``weight`` with at most ``max_parts`` parts.

    Ordered reverse-lexicographically, so (weight,) comes first and the
    ordering is deterministic across runs. Weight 0 yields the single empty
    partition.
    """
    if weight < 0:
        raise DomainError(f"weight must be non-negative, got {weight}")
    if max_parts < 1:
        raise DomainError(f"max_parts must be positive, got {max_parts}")
    out: list[Partition] = []

    def rec(remaining: int, cap: int, prefix: list[int], slots: int):
        if remaining == 0:
            out.append(Partition(tuple(prefix)))
            return
        if slots == 0:
            return
        for part in range(min(cap, remaining), 0, -1):
            prefix.append(part)
            rec(remaining - part, part, prefix, slots - 1)
            prefix.pop()

    rec(weight, weight if weight else 1, [], max_parts)
    return tuple(out)


def gen_pochhammer(a: float, kappa: Partition) -> float:
    """Generalized Pochhammer symbol (a)_kappa = prod_i (a - (i-1)/2)_{k_i}.

    Uses the rising factorial (x)_f = x(x+1)...(x+f-1); the empty partition
    gives 1. Zero factors are legitimate and give 0.
    """
    result = 1.0
    for i, k in enumerate(kappa):
        base = a - i / 2.0
        for j in range(k):
            result *= base + j
    return result


def gen_pochhammer_log(a: float, kappa: Partition) -> LogSign:
    """Log-sign form of :func:`gen_pochhammer`, safe against overflow."""
    log = 0.0
    sign = 1.0
    for i, k in enumerate(kappa):
        base = a - i / 2.0
        for j in range(k):
            factor = base + j
            if factor == 0.0:
                return LogSign.zero()
            log += math.log(abs(factor))
            sign *= math.copysign(1.0, factor)
    return LogSign(log, sign)


def multivariate_gamma(n: int, a: float) -> LogSign:
    """Log of the multivariate gamma Gamma_n[a] = pi^{n(n-1)/4} prod Gamma(a-(i-1)/2).

    Negative non-integer arguments are allowed (finite gamma values, sign
    tracked); a pole of any factor raises :class:`DomainError` naming it.
    """
    if n < 1:
        raise DomainError(f"dimension n must be positive, got {n}")
    log = n * (n - 1) / 4.0 * math.log(math.pi)
    sign = 1.0
    for i in range(1, n + 1):
        x = a - (i - 1) / 2.0
        if x <= 0.0 and x == math.floor(x):
            raise DomainError(
                f"multivariate_gamma({n}, {a}): factor Gamma({x}) (i={i}) is a pole"
            )
        log += math.lgamma(x)
        # lgamma gives log|Gamma|; Gamma(x) < 0 exactly on (-2k-1, -2k), k >= 0.
        if x < 0.0 and math.floor(x) % 2 == 1:
            sign = -sign
    return LogSign(log, sign)


def chi_square_sf(x: float, df: int) -> float:
    """Survival function of the chi-square law with ``df`` degrees of freedom."""
    if df < 1:
        raise DomainError(f"degrees of freedom must be >= 1, got {df}")
    if x < 0:
        raise DomainError(f"chi-square statistic must be non-negative, got {x}")
    return float(gammaincc(df / 2.0, x / 2.0))
