"""Arithmetic back-ends: MPFR big floats (via gmpy2) or exact rationals."""

from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, replace
from fractions import Fraction

import gmpy2
from gmpy2 import mpfr, mpq

from .errors import InvariantViolation

DEFAULT_BITS_ENV = "POLEDYN_DEFAULT_BITS"
MIN_BITS = 64


class Mode(str, enum.Enum):
    BIGFLOAT = "bigfloat"
    RATIONAL = "rational"


def default_bits(n_steps: int = 0) -> int:
    """Working precision for an orbit of ``n_steps`` iterations.

    Graham's map loses roughly one bit per step near the origin, so the
    default grows with the planned orbit length. ``POLEDYN_DEFAULT_BITS``
    replaces the 128-bit floor.
    """
    floor = 128
    env = os.environ.get(DEFAULT_BITS_ENV)
    if env:
        try:
            floor = int(env)
        except ValueError:
            raise InvariantViolation(DEFAULT_BITS_ENV, f"not an integer: {env!r}") from None
        if floor < MIN_BITS:
            raise InvariantViolation(DEFAULT_BITS_ENV, f"must be >= {MIN_BITS}")
    return max(floor, n_steps + 64)


def to_rational(value) -> mpq:
    """Exact rational from a decimal string, int, Fraction, float, mpq or mpfr."""
    if isinstance(value, type(mpq())):
        return value
    if isinstance(value, Fraction):
        return mpq(value.numerator, value.denominator)
    if isinstance(value, str):
        text = value.strip()
        try:
            return mpq(Fraction(text))
        except (ValueError, ZeroDivisionError):
            raise InvariantViolation("number", f"not a decimal or rational string: {value!r}") from None
    if isinstance(value, float) and not math.isfinite(value):
        raise InvariantViolation("number", f"non-finite value {value!r}")
    if isinstance(value, type(mpfr())) and not gmpy2.is_finite(value):
        raise InvariantViolation("number", f"non-finite value {value!r}")
    return mpq(value)


@dataclass(frozen=True)
class PrecisionPolicy:
    """How real arithmetic is carried out.

    In rational mode ``bits`` is still used to set root-finding residual
    targets and ``rational_bit_budget`` caps the numerator plus denominator
    size of any iterate.
    """

    mode: Mode = Mode.BIGFLOAT
    bits: int = 128
    shadow_margin_bits: int = 128
    shadow_agreement_tol: float = 2.0**-100
    rational_bit_budget: int = 1 << 20

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.mode is Mode.BIGFLOAT and self.bits < MIN_BITS:
            raise InvariantViolation("bits", f"must be >= {MIN_BITS} in bigfloat mode, got {self.bits}")
        if self.bits < 1:
            raise InvariantViolation("bits", "must be positive")
        if self.shadow_margin_bits < 0:
            raise InvariantViolation("shadow_margin_bits", "must be non-negative")
        if not self.shadow_agreement_tol > 0:
            raise InvariantViolation("shadow_agreement_tol", "must be positive")
        if self.rational_bit_budget < 1:
            raise InvariantViolation("rational_bit_budget", "must be positive")

    @classmethod
    def bigfloat(cls, bits: int | None = None, **kw) -> PrecisionPolicy:
        return cls(Mode.BIGFLOAT, default_bits() if bits is None else bits, **kw)

    @classmethod
    def rational(cls, **kw) -> PrecisionPolicy:
        kw.setdefault("bits", 128)
        return cls(Mode.RATIONAL, **kw)

    @classmethod
    def for_steps(cls, n_steps: int, **kw) -> PrecisionPolicy:
        return cls(Mode.BIGFLOAT, default_bits(n_steps), **kw)

    @property
    def exact(self) -> bool:
        return self.mode is Mode.RATIONAL

    def with_bits(self, bits: int) -> PrecisionPolicy:
        return replace(self, bits=bits)

    def shadow(self) -> PrecisionPolicy:
        return replace(self, bits=self.bits + self.shadow_margin_bits)

    def context(self):
        # rational arithmetic ignores the MPFR context; it still governs
        # any float conversions made while reporting
        return gmpy2.context(precision=self.bits)

    def number(self, value):
        """Convert ``value`` to the working number type.

        Must be called inside :meth:`context` only for consistency of
        subsequent arithmetic; the conversion itself is explicit.
        """
        if self.exact:
            return to_rational(value)
        if isinstance(value, str):
            return mpfr(to_rational(value), self.bits)
        if isinstance(value, Fraction):
            return mpfr(mpq(value.numerator, value.denominator), self.bits)
        return mpfr(value, self.bits)

    def tolerance(self):
        return mpfr(self.shadow_agreement_tol, self.bits + self.shadow_margin_bits)

    def describe(self) -> dict:
        return {
            "mode": self.mode.value,
            "bits": self.bits,
            "shadow_margin_bits": self.shadow_margin_bits,
            "shadow_agreement_tol": self.shadow_agreement_tol,
            "rational_bit_budget": self.rational_bit_budget,
        }


def bit_size(q) -> int:
    """Numerator plus denominator bit length of a rational."""
    return q.numerator.bit_length() + q.denominator.bit_length()


def decimal_digits(bits: int) -> int:
    return int(math.ceil(bits * math.log10(2))) + 2


def format_number(x) -> str:
    """Full-precision text form: ``p/q`` for rationals, decimal for big floats."""
    if isinstance(x, type(mpq())) or isinstance(x, Fraction):
        q = to_rational(x)
        return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"
    if isinstance(x, type(mpfr())):
        if not gmpy2.is_finite(x):
            return str(x)
        return format(x, f".{decimal_digits(x.precision)}g")
    if isinstance(x, int):
        return str(x)
    return repr(x)


def ulp(x):
    """Spacing between ``x`` and the next representable float above ``|x|``."""
    ax = abs(x)
    with gmpy2.context(precision=x.precision):
        return gmpy2.next_above(ax) - ax
