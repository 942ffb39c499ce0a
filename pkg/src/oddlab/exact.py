"""Exact dyadic rationals and their JSON form ``{"num": int, "log2_den": int}``."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .errors import ContractError

__all__ = ["DimensionResult", "is_dyadic", "log2_den", "dyadic_from_float", "dyadic_json",
           "dyadic_from_json"]

MAX_LOG2_DEN = 20


def is_dyadic(q: Fraction) -> bool:
    d = Fraction(q).denominator
    return d & (d - 1) == 0


def log2_den(q: Fraction) -> int:
    q = Fraction(q)
    if not is_dyadic(q):
        raise ContractError(f"{q} is not a dyadic rational")
    return q.denominator.bit_length() - 1


def dyadic_from_float(x: float, tol: float = 1e-6, max_log2_den: int = MAX_LOG2_DEN) -> Fraction:
    """Nearest dyadic rational with the smallest denominator within ``tol`` of ``x``."""
    for j in range(max_log2_den + 1):
        q = Fraction(round(x * 2 ** j), 2 ** j)
        if abs(float(q) - x) <= tol:
            return q
    raise ContractError(f"{x!r} is not within {tol} of a dyadic rational with denominator <= 2^{max_log2_den}")


def dyadic_json(q) -> dict:
    q = Fraction(q)
    return {"num": q.numerator, "log2_den": log2_den(q)}


def dyadic_from_json(obj) -> Fraction:
    return Fraction(obj["num"], 2 ** obj["log2_den"])


@dataclass(frozen=True)
class DimensionResult:
    """Value of the dimension functional together with how it was obtained."""

    value: Fraction
    route: str
    witness: tuple = field(default_factory=tuple)

    def __post_init__(self):
        v = Fraction(self.value)
        if not is_dyadic(v):
            raise ContractError(f"dimension value {v} has a non power-of-two denominator")
        if self.route not in ("eta", "relative-index"):
            raise ContractError(f"unknown route {self.route!r}")
        object.__setattr__(self, "value", v)
        object.__setattr__(self, "witness", tuple(self.witness))

    def to_json(self):
        return {"value": dyadic_json(self.value), "route": self.route, "witness": list(self.witness)}
