"""One-dimensional searches: golden section and bracketed root finding."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from ..errors import DomainError, NumericError

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0  # 0.618...


def golden_iteration_bound(tol: float) -> int:
    """Upper bound on the number of shrink steps ``golden_search`` takes."""
    if tol >= 1.0:
        return 0
    return math.ceil(math.log(1.0 / tol) / math.log(1.0 / INV_PHI)) + 2


def _eval(f, x):
    v = f(x)
    if not math.isfinite(v):
        raise NumericError(f"objective is not finite at x={x!r}: {v!r}", payload={"x": x, "value": v})
    return v


def golden_search(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-8):
    """Minimize a unimodal ``f`` on ``[lo, hi]``.

    ``tol`` is relative to the interval width. Returns ``(x_star, f(x_star))``.
    The two endpoints are evaluated as well so that boundary minimizers are
    returned exactly.
    """
    if not hi >= lo:
        raise DomainError(f"empty interval [{lo!r}, {hi!r}]")
    width = hi - lo
    if width == 0.0:
        return lo, _eval(f, lo)
    target = tol * width
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = _eval(f, c), _eval(f, d)
    while b - a > target:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = _eval(f, c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = _eval(f, d)
    x, fx = (c, fc) if fc <= fd else (d, fd)
    for e in (lo, hi):
        fe = _eval(f, e)
        if fe < fx:
            x, fx = e, fe
    return x, fx


@dataclass(frozen=True)
class ScalarProblem:
    objective: Callable[[float], float]
    lo: float
    hi: float
    tol: float = 1e-8

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise DomainError("lo must not exceed hi")
        if not self.tol > 0:
            raise DomainError("tol must be positive")

    def solve(self):
        return golden_search(self.objective, self.lo, self.hi, self.tol)


def bracket_increasing(phi: Callable[[float], float], lo: float, hi: float, xtol: float,
                       method: str = "illinois", max_iter: int = 500):
    """Shrink ``[lo, hi]`` around the zero crossing of a nondecreasing ``phi``.

    Requires ``phi(lo) <= 0 < phi(hi)``. Returns ``(a, b, phi(a))`` with
    ``phi(a) <= 0 < phi(b)`` and ``b - a <= xtol``. ``method`` is ``"bisect"``
    or ``"illinois"`` (regula falsi with the Illinois modification, falling
    back to a bisection step whenever the bracket fails to halve).
    """
    a, b = lo, hi
    fa, fb = phi(a), phi(b)
    if not fa <= 0.0:
        raise DomainError(f"phi(lo)={fa!r} must be <= 0")
    if not fb > 0.0:
        return b, b, fb
    side = 0
    for _ in range(max_iter):
        width = b - a
        if width <= xtol:
            return a, b, fa
        if method == "bisect":
            x = a + 0.5 * width
        else:
            x = a - fa * width / (fb - fa) if fb != fa else a + 0.5 * width
            # keep the step strictly inside and away from the ends
            margin = 0.25 * xtol
            x = min(max(x, a + margin), b - margin)
        fx = phi(x)
        if not math.isfinite(fx):
            raise NumericError(f"phi is not finite at {x!r}", payload={"x": x})
        if fx <= 0.0:
            a, fa = x, fx
            if side == -1 and method != "bisect":
                fb *= 0.5
            side = -1
        else:
            b, fb = x, fx
            if side == 1 and method != "bisect":
                fa *= 0.5
            side = 1
        if method != "bisect" and (b - a) > 0.5 * width:
            # slow progress: force one bisection step
            m = a + 0.5 * (b - a)
            fm = phi(m)
            if fm <= 0.0:
                a, fa = m, fm
            else:
                b, fb = m, fm
            side = 0
    raise NumericError("bracketing did not converge", payload={"a": a, "b": b})


def bisect_increasing(phi: Callable[[float], float], lo: float, hi: float, xtol: float,
                      max_iter: int = 2000) -> float:
    """Largest ``x`` (to ``xtol``) with ``phi(x) <= 0`` for nondecreasing ``phi``, by bisection."""
    return bracket_increasing(phi, lo, hi, xtol, method="bisect", max_iter=max_iter)[0]
