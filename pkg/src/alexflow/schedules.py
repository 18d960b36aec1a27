"""Step-size schedules and the sublinear rate envelope."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument

SCHEDULE_KINDS = ("constant", "harmonic", "power")


@dataclass(frozen=True)
class StepSchedule:
    """lambda_k for k = 0, 1, 2, ...

    ``constant``: c.  ``harmonic``: c / (k + 1).  ``power``: c / (k + 1)**q.
    ``cap`` clips every value from above; it binds only finitely often for the
    decaying kinds, so the summability flags are unaffected.
    """

    kind: str
    c: float
    q: float = 1.0
    cap: float | None = None

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise InvalidArgument(f"unknown schedule kind {self.kind!r}")
        if not self.c > 0:
            raise InvalidArgument("schedule scale c must be positive")
        if self.kind == "harmonic":
            object.__setattr__(self, "q", 1.0)
        if self.kind == "power" and not self.q > 0:
            raise InvalidArgument("power schedule needs q > 0")
        if self.cap is not None and not self.cap > 0:
            raise InvalidArgument("cap must be positive")

    @property
    def exponent(self) -> float:
        return 0.0 if self.kind == "constant" else self.q

    @property
    def divergent_sum(self) -> bool:
        return self.exponent <= 1.0

    @property
    def square_summable(self) -> bool:
        return self.exponent > 0.5

    @property
    def name(self) -> str:
        s = {"constant": f"constant({self.c:g})", "harmonic": f"harmonic({self.c:g})"}.get(
            self.kind, f"power({self.c:g},{self.q:g})"
        )
        return s if self.cap is None else f"{s}|cap={self.cap:g}"

    def value(self, k: int) -> float:
        if k < 0:
            raise InvalidArgument("schedule index must be nonnegative")
        if self.kind == "constant":
            lam = self.c
        elif self.kind == "harmonic":
            lam = self.c / (k + 1)
        else:
            lam = self.c / (k + 1) ** self.q
        if self.cap is not None:
            lam = min(lam, self.cap)
        return lam

    def values(self, n: int) -> np.ndarray:
        return np.array([self.value(k) for k in range(n)])

    def with_cap(self, cap: float | None) -> "StepSchedule":
        return StepSchedule(self.kind, self.c, self.q, cap)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "c": self.c}
        if self.kind == "power":
            d["q"] = self.q
        if self.cap is not None:
            d["cap"] = self.cap
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StepSchedule":
        return cls(d["kind"], float(d["c"]), float(d.get("q", 1.0)), d.get("cap"))


def constant(c: float, cap=None) -> StepSchedule:
    return StepSchedule("constant", c, cap=cap)


def harmonic(c: float = 1.0, cap=None) -> StepSchedule:
    return StepSchedule("harmonic", c, cap=cap)


def power(c: float, q: float, cap=None) -> StepSchedule:
    return StepSchedule("power", c, q, cap)


def rate_envelope(alpha: float, beta: float, a0: float, k: int) -> float:
    """Upper bound on a_k for a_{k+1} <= (1 - alpha/(k+1)) a_k + beta/(k+1)^2.

    Three regimes: alpha < 1, alpha = 1 and alpha > 1.
    """
    if not (alpha > 0 and beta > 0):
        raise InvalidArgument("alpha and beta must be positive")
    if a0 < 0 or k < 0:
        raise InvalidArgument("a0 and k must be nonnegative")
    if alpha < 1:
        return (a0 + 2**alpha * beta * (2 - alpha) / (1 - alpha)) / (k + 2) ** alpha
    if alpha == 1:
        return beta * (1 + math.log(k + 1)) / (k + 1)
    return (beta + ((alpha - 1) * a0 - beta) / (k + 2) ** (alpha - 1)) / ((alpha - 1) * (k + 2))


def rate_recursion(alpha: float, beta: float, a0: float, n: int) -> np.ndarray:
    """a_0..a_n of the rate recursion taken with equality."""
    a = np.empty(n + 1)
    a[0] = a0
    for k in range(n):
        a[k + 1] = (1 - alpha / (k + 1)) * a[k] + beta / (k + 1) ** 2
    return a
