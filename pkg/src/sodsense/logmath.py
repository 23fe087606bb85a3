"""Signed log-magnitude scalars.

A value x is held as (sign, log|x|) so products and powers never overflow.
Zero is (0.0, -inf).
"""

from __future__ import annotations

import math
from typing import Iterable, NamedTuple


class SLog(NamedTuple):
    sign: float
    log: float

    @classmethod
    def of(cls, x: float) -> "SLog":
        x = float(x)
        if x == 0.0:
            return cls(0.0, -math.inf)
        return cls(math.copysign(1.0, x), math.log(abs(x)))

    def value(self) -> float:
        if self.sign == 0.0:
            return 0.0
        try:
            return self.sign * math.exp(self.log)
        except OverflowError:
            return self.sign * math.inf

    def __mul__(self, other: "SLog") -> "SLog":  # type: ignore[override]
        if self.sign == 0.0 or other.sign == 0.0:
            return ZERO
        return SLog(self.sign * other.sign, self.log + other.log)

    def pow(self, k: int) -> "SLog":
        if k == 0:
            return ONE
        if self.sign == 0.0:
            return ZERO
        return SLog(self.sign**k, k * self.log)

    def root(self, k: int) -> "SLog":
        """Real k-th root; negative values need odd k."""
        if self.sign < 0 and k % 2 == 0:
            raise ValueError("even root of a negative number")
        if self.sign == 0.0:
            return ZERO
        return SLog(self.sign, self.log / k)


ZERO = SLog(0.0, -math.inf)
ONE = SLog(1.0, 0.0)


def slog_sum(terms: Iterable[SLog]) -> SLog:
    live = [t for t in terms if t.sign != 0.0]
    if not live:
        return ZERO
    top = max(t.log for t in live)
    if math.isinf(top):
        return SLog.of(math.fsum(t.sign * math.inf for t in live))
    acc = math.fsum(t.sign * math.exp(t.log - top) for t in live)
    if acc == 0.0:
        return ZERO
    return SLog(math.copysign(1.0, acc), math.log(abs(acc)) + top)


def log_expm1(y: float) -> float:
    """log(exp(y) - 1) for y > 0 without overflow."""
    if y > 30.0:
        return y + math.log1p(-math.exp(-y))
    return math.log(math.expm1(y))
