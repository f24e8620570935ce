"""Log-sum-exp evaluation and a barrier solver for small log-sum-exp programs.

The programs have the form::

    minimize    ln sum_k a_k exp(u_k . x)
    subject to  ln sum_k b_k exp(v_k . x) <= c
                w . x + e >= 0
                x >= lower

which covers one convexified step of the amplify-and-forward power problem.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.special import logsumexp

from ..errors import DomainError, InfeasibleError, NumericError


def log_sum_exp(weights, exponents) -> float:
    """Stable ``ln sum_k w_k exp(x_k)`` for positive weights."""
    w = np.asarray(weights, dtype=float).reshape(-1)
    x = np.asarray(exponents, dtype=float).reshape(-1)
    if w.size == 0:
        raise DomainError("log_sum_exp of an empty sequence")
    if w.shape != x.shape:
        raise DomainError("weights and exponents differ in length")
    if np.any(w <= 0):
        raise DomainError("weights must be positive")
    return float(logsumexp(x, b=w))


@dataclass(frozen=True)
class LseProgram:
    obj_weights: np.ndarray          # (K,)
    obj_exponents: np.ndarray        # (K, n)
    lower: np.ndarray                # (n,)
    con_weights: Optional[np.ndarray] = None    # (M,)
    con_exponents: Optional[np.ndarray] = None  # (M, n)
    con_bound: float = 0.0
    aff_w: Optional[np.ndarray] = None          # (n,)
    aff_e: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.obj_weights, dtype=float).reshape(-1)
        U = np.atleast_2d(np.asarray(self.obj_exponents, dtype=float))
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        if U.shape != (a.size, lo.size):
            raise DomainError(f"objective table has shape {U.shape}, expected {(a.size, lo.size)}")
        if np.any(a <= 0):
            raise DomainError("objective weights must be positive")
        object.__setattr__(self, "obj_weights", a)
        object.__setattr__(self, "obj_exponents", U)
        object.__setattr__(self, "lower", lo)
        if (self.con_weights is None) != (self.con_exponents is None):
            raise DomainError("constraint weights and exponents must be given together")
        if self.con_weights is not None:
            b = np.asarray(self.con_weights, dtype=float).reshape(-1)
            V = np.atleast_2d(np.asarray(self.con_exponents, dtype=float))
            if V.shape != (b.size, lo.size):
                raise DomainError(f"constraint table has shape {V.shape}, expected {(b.size, lo.size)}")
            if np.any(b <= 0):
                raise DomainError("constraint weights must be positive")
            object.__setattr__(self, "con_weights", b)
            object.__setattr__(self, "con_exponents", V)
        if self.aff_w is not None:
            w = np.asarray(self.aff_w, dtype=float).reshape(-1)
            if w.size != lo.size:
                raise DomainError("affine row has the wrong length")
            object.__setattr__(self, "aff_w", w)

    @property
    def n(self) -> int:
        return self.lower.size

    def objective(self, x) -> float:
        return log_sum_exp(self.obj_weights, self.obj_exponents @ x)

    def constraint_value(self, x) -> float:
        """``ln sum b_k exp(v_k . x) - c`` (feasible when <= 0)."""
        if self.con_weights is None:
            return -math.inf
        return log_sum_exp(self.con_weights, self.con_exponents @ x) - self.con_bound

    def affine_value(self, x) -> float:
        """``w . x + e`` (feasible when >= 0)."""
        if self.aff_w is None:
            return math.inf
        return float(self.aff_w @ x + self.aff_e)

    def slacks(self, x) -> np.ndarray:
        parts = [x - self.lower]
        if self.con_weights is not None:
            parts.append([-self.constraint_value(x)])
        if self.aff_w is not None:
            parts.append([self.affine_value(x)])
        return np.concatenate([np.asarray(p, dtype=float) for p in parts])

    def gradient(self, x) -> np.ndarray:
        """Analytic gradient of the objective."""
        z = np.log(self.obj_weights) + self.obj_exponents @ x
        p = np.exp(z - logsumexp(z))
        return self.obj_exponents.T @ p


class LseResult(NamedTuple):
    x: np.ndarray
    value: float
    kkt_residual: float
    newton_steps: int


# barrier schedule, shared with the compiled core
T0 = 1.0
T_FACTOR = 20.0
NEWTON_TOL = 1e-9        # on lambda^2 / 2 of the t-scaled barrier function
PURE_NEWTON_LAMBDA2 = 1e-3
STALL_LAMBDA2 = 1e-4     # below this a failed line search counts as centered
ALPHA = 0.25
BETA = 0.5
MAX_NEWTON = 100


def _lse_parts(logw, A, x):
    z = logw + A @ x
    m = z.max()
    e = np.exp(z - m)
    s = e.sum()
    p = e / s
    val = m + math.log(s)
    g = A.T @ p
    Ap = A * p[:, None]
    H = A.T @ Ap - np.outer(g, g)
    return val, g, H


def _phi(prob, la, lb, x, t):
    """t * f0 - sum log slacks, or +inf when not strictly feasible."""
    sl = x - prob.lower
    if np.any(sl <= 0):
        return math.inf
    val = t * float(logsumexp(la + prob.obj_exponents @ x)) - float(np.sum(np.log(sl)))
    if lb is not None:
        r = prob.con_bound - float(logsumexp(lb + prob.con_exponents @ x))
        if r <= 0:
            return math.inf
        val -= math.log(r)
    if prob.aff_w is not None:
        r = float(prob.aff_w @ x) + prob.aff_e
        if r <= 0:
            return math.inf
        val -= math.log(r)
    return val


def solve_lse_program(prob: LseProgram, start, tol: float = 1e-9) -> LseResult:
    """Log-barrier method with damped Newton centering and backtracking.

    ``start`` must be strictly feasible. Stops when the duality gap bound
    ``m / t`` drops below ``tol``; the reported KKT residual is the larger of
    that gap and the scaled centering gradient.
    """
    x = np.array(start, dtype=float).reshape(-1)
    if x.size != prob.n:
        raise DomainError("start point has the wrong dimension")
    if np.any(prob.slacks(x) <= 0):
        raise InfeasibleError("start point is not strictly feasible")
    la = np.log(prob.obj_weights)
    lb = None if prob.con_weights is None else np.log(prob.con_weights)
    n = prob.n
    m = n + (lb is not None) + (prob.aff_w is not None)
    t = T0
    steps = 0
    grad_norm = 0.0
    while True:
        for _ in range(MAX_NEWTON):
            _, g0, H0 = _lse_parts(la, prob.obj_exponents, x)
            sl = x - prob.lower
            grad = t * g0 - 1.0 / sl
            H = t * H0 + np.diag(1.0 / sl ** 2)
            if lb is not None:
                cv, gc, Hc = _lse_parts(lb, prob.con_exponents, x)
                r = prob.con_bound - cv
                grad += gc / r
                H += Hc / r + np.outer(gc, gc) / r ** 2
            if prob.aff_w is not None:
                r = float(prob.aff_w @ x) + prob.aff_e
                grad -= prob.aff_w / r
                H += np.outer(prob.aff_w, prob.aff_w) / r ** 2
            try:
                L = np.linalg.cholesky(H)
                dx = -np.linalg.solve(L.T, np.linalg.solve(L, grad))
            except np.linalg.LinAlgError:
                dx = -np.linalg.lstsq(H, grad, rcond=None)[0]
            lam2 = float(-grad @ dx)
            grad_norm = float(np.linalg.norm(grad))
            if lam2 / 2.0 <= NEWTON_TOL:
                break
            f_cur = _phi(prob, la, lb, x, t)
            s = 1.0
            stalled = False
            while True:
                xn = x + s * dx
                fn = _phi(prob, la, lb, xn, t)
                if lam2 < PURE_NEWTON_LAMBDA2:
                    if math.isfinite(fn):
                        break
                elif fn <= f_cur - ALPHA * s * lam2:
                    break
                s *= BETA
                if s < 1e-20:
                    stalled = True
                    break
            if stalled:
                if lam2 <= STALL_LAMBDA2:
                    break
                raise NumericError("line search stagnated",
                                   payload={"x": x.tolist(), "t": t, "lambda2": lam2})
            x = xn
            steps += 1
        else:
            if lam2 > STALL_LAMBDA2:
                raise NumericError("Newton centering did not converge",
                                   payload={"x": x.tolist(), "t": t, "lambda2": lam2})
        if m / t < tol:
            break
        t *= T_FACTOR
    kkt = max(m / t, grad_norm / t)
    return LseResult(x, prob.objective(x), kkt, steps)
