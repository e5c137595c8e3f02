"""Extended-real values with an explicit undefined state.

Moment formulas for the models in this package routinely produce +inf,
-inf, or (when positive and negative parts are both infinite) a value
that is not defined at all.  Plain float arithmetic silently turns the
last case into nan somewhere downstream; this wrapper keeps the four
cases apart and makes the "undefined" outcome a first-class citizen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["ExtReal"]


@dataclass(frozen=True)
class ExtReal:
    """A finite float, +inf, -inf, or an explicit 'undefined' marker."""

    value: float
    defined: bool = True

    # -- constructors -------------------------------------------------

    @staticmethod
    def of(x: float) -> "ExtReal":
        if math.isnan(x):
            return ExtReal.undefined()
        return ExtReal(float(x))

    @staticmethod
    def pos_inf() -> "ExtReal":
        return ExtReal(math.inf)

    @staticmethod
    def neg_inf() -> "ExtReal":
        return ExtReal(-math.inf)

    @staticmethod
    def undefined() -> "ExtReal":
        return ExtReal(math.nan, defined=False)

    # -- predicates ----------------------------------------------------

    @property
    def is_undefined(self) -> bool:
        return not self.defined

    @property
    def is_finite(self) -> bool:
        return self.defined and math.isfinite(self.value)

    @property
    def is_pos_inf(self) -> bool:
        return self.defined and self.value == math.inf

    @property
    def is_neg_inf(self) -> bool:
        return self.defined and self.value == -math.inf

    # -- arithmetic ----------------------------------------------------

    def __add__(self, other: "ExtReal | float") -> "ExtReal":
        other = _coerce(other)
        if self.is_undefined or other.is_undefined:
            return ExtReal.undefined()
        # inf + (-inf) is the undefined case plain floats would call nan
        if (self.is_pos_inf and other.is_neg_inf) or (self.is_neg_inf and other.is_pos_inf):
            return ExtReal.undefined()
        return ExtReal(self.value + other.value)

    __radd__ = __add__

    def __neg__(self) -> "ExtReal":
        if self.is_undefined:
            return ExtReal.undefined()
        return ExtReal(-self.value)

    def __sub__(self, other: "ExtReal | float") -> "ExtReal":
        return self + (-_coerce(other))

    def scale(self, c: float) -> "ExtReal":
        """Multiply by a finite scalar; 0 * inf is undefined."""
        if self.is_undefined or math.isnan(c):
            return ExtReal.undefined()
        if c == 0.0:
            return ExtReal(0.0) if self.is_finite else ExtReal.undefined()
        return ExtReal(c * self.value)

    # -- presentation ---------------------------------------------------

    def __repr__(self) -> str:
        if self.is_undefined:
            return "ExtReal(undefined)"
        return f"ExtReal({self.value!r})"

    def as_json(self) -> str | float:
        """JSON-safe encoding: finite floats pass through, the rest are tags."""
        if self.is_undefined:
            return "undefined"
        if self.value == math.inf:
            return "+inf"
        if self.value == -math.inf:
            return "-inf"
        return self.value


def _coerce(x: "ExtReal | float") -> ExtReal:
    if isinstance(x, ExtReal):
        return x
    return ExtReal.of(float(x))
