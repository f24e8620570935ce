# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: TDMA golden search and the AF successive convex approximation loop.

Both mirror the pure-Python paths step for step (same golden schedule, same
barrier schedule, same safeguards); results agree to rounding.
"""
import numpy as np

from libc.math cimport exp, log, expm1, sqrt, fabs, INFINITY, isfinite

from mecrelay.errors import NumericError, DomainError

cdef double INV_PHI = (sqrt(5.0) - 1.0) / 2.0

# barrier schedule; keep in sync with mecrelay.kernel.lse
cdef double T0 = 1.0
cdef double T_FACTOR = 20.0
cdef double NEWTON_TOL = 1e-9
cdef double PURE_NEWTON_LAMBDA2 = 1e-3
cdef double STALL_LAMBDA2 = 1e-4
cdef double ALPHA = 0.25
cdef double BETA = 0.5
cdef int MAX_NEWTON = 100


# ---------------------------------------------------------------- TDMA golden

cdef inline double _tdma_obj(double d, double ratio, double noise, double W, double T, double L,
                             double fB, double kappa, double D):
    cdef double tau = T - L * d / fB
    cdef double sig = 0.5 * noise * tau * expm1(2.0 * d / (W * tau))
    cdef double r = D - d
    return ratio * sig + kappa * (L * L * L) * (r * r * r) / (T * T)


cdef inline double _checked(double v, double x) except? -1.0:
    if not isfinite(v):
        raise NumericError(f"objective is not finite at x={x!r}: {v!r}", payload={"x": x, "value": v})
    return v


def golden_tdma(double ratio, double noise, double W, double T, double L, double fB,
                double kappa, double D, double lo, double hi, double tol):
    """Golden section on ``ratio * sigma(d) + E_c(d)``. Returns ``(d, value, evaluations)``."""
    cdef double a, b, c, d, fc, fd, x, fx, fe, e, target
    cdef int nev = 0
    cdef int k
    if not hi >= lo:
        raise DomainError(f"empty interval [{lo!r}, {hi!r}]")
    if hi == lo:
        return lo, _checked(_tdma_obj(lo, ratio, noise, W, T, L, fB, kappa, D), lo), 1
    target = tol * (hi - lo)
    a = lo
    b = hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc = _checked(_tdma_obj(c, ratio, noise, W, T, L, fB, kappa, D), c)
    fd = _checked(_tdma_obj(d, ratio, noise, W, T, L, fB, kappa, D), d)
    nev = 2
    while b - a > target:
        if fc <= fd:
            b = d
            d = c
            fd = fc
            c = b - INV_PHI * (b - a)
            fc = _checked(_tdma_obj(c, ratio, noise, W, T, L, fB, kappa, D), c)
        else:
            a = c
            c = d
            fc = fd
            d = a + INV_PHI * (b - a)
            fd = _checked(_tdma_obj(d, ratio, noise, W, T, L, fB, kappa, D), d)
        nev += 1
    if fc <= fd:
        x = c
        fx = fc
    else:
        x = d
        fx = fd
    for k in range(2):
        e = lo if k == 0 else hi
        fe = _checked(_tdma_obj(e, ratio, noise, W, T, L, fB, kappa, D), e)
        nev += 1
        if fe < fx:
            x = e
            fx = fe
    return x, fx, nev


# ---------------------------------------------------------------- dense helpers

cdef double _lse(double[::1] logw, double[:, ::1] A, double[::1] x, double[::1] z):
    """ln sum exp(logw_k + A_k . x); ``z`` is scratch of length K."""
    cdef Py_ssize_t K = A.shape[0], n = A.shape[1], k, j
    cdef double m = -INFINITY, s = 0.0, v
    for k in range(K):
        v = logw[k]
        for j in range(n):
            v += A[k, j] * x[j]
        z[k] = v
        if v > m:
            m = v
    for k in range(K):
        s += exp(z[k] - m)
    return m + log(s)


cdef double _lse_parts(double[::1] logw, double[:, ::1] A, double[::1] x, double[::1] z,
                       double[::1] grad, double[:, ::1] H):
    """Value, gradient and Hessian of the log-sum-exp (written into grad, H)."""
    cdef Py_ssize_t K = A.shape[0], n = A.shape[1], k, i, j
    cdef double val = _lse(logw, A, x, z)
    cdef double p
    for i in range(n):
        grad[i] = 0.0
        for j in range(n):
            H[i, j] = 0.0
    for k in range(K):
        p = exp(z[k] - val)
        for i in range(n):
            grad[i] += p * A[k, i]
        for i in range(n):
            if A[k, i] != 0.0:
                for j in range(n):
                    H[i, j] += p * A[k, i] * A[k, j]
    for i in range(n):
        for j in range(n):
            H[i, j] -= grad[i] * grad[j]
    return val


cdef int _cholesky_solve(double[:, ::1] H, double[::1] rhs, double[::1] out, double[:, ::1] Lw):
    """Solve H out = rhs by Cholesky; returns 0 on success, -1 when H is not positive definite."""
    cdef Py_ssize_t n = H.shape[0], i, j, k
    cdef double s
    for i in range(n):
        for j in range(i + 1):
            s = H[i, j]
            for k in range(j):
                s -= Lw[i, k] * Lw[j, k]
            if i == j:
                if s <= 0.0 or not isfinite(s):
                    return -1
                Lw[i, i] = sqrt(s)
            else:
                Lw[i, j] = s / Lw[j, j]
    for i in range(n):
        s = rhs[i]
        for k in range(i):
            s -= Lw[i, k] * out[k]
        out[i] = s / Lw[i, i]
    for i in range(n - 1, -1, -1):
        s = out[i]
        for k in range(i + 1, n):
            s -= Lw[k, i] * out[k]
        out[i] = s / Lw[i, i]
    return 0


cdef class _Barrier:
    """Log-barrier solver for one convexified AF subproblem (dense tables)."""
    cdef double[::1] la, lb, w, x, z_obj, z_con, g0, gc, grad, dx, xn, rhs, work
    cdef double[:, ::1] U, V, H0, Hc, H, Lw
    cdef double c, e, floor
    cdef Py_ssize_t n

    def __init__(self, la, U, lb, V, double c, double floor):
        self.la = la
        self.U = U
        self.lb = lb
        self.V = V
        self.c = c
        self.floor = floor
        n = U.shape[1]
        self.n = n
        self.w = np.zeros(n)
        self.e = 0.0
        self.x = np.zeros(n)
        self.xn = np.zeros(n)
        self.z_obj = np.zeros(U.shape[0])
        self.z_con = np.zeros(V.shape[0])
        self.g0 = np.zeros(n)
        self.gc = np.zeros(n)
        self.grad = np.zeros(n)
        self.dx = np.zeros(n)
        self.rhs = np.zeros(n)
        self.work = np.zeros(n)
        self.H0 = np.zeros((n, n))
        self.Hc = np.zeros((n, n))
        self.H = np.zeros((n, n))
        self.Lw = np.zeros((n, n))

    cdef double phi(self, double[::1] x, double t):
        cdef Py_ssize_t i
        cdef double val, r, sl
        val = 0.0
        for i in range(self.n):
            sl = x[i] - self.floor
            if sl <= 0.0:
                return INFINITY
            val -= log(sl)
        r = self.c - _lse(self.lb, self.V, x, self.z_con)
        if r <= 0.0:
            return INFINITY
        val -= log(r)
        r = self.e
        for i in range(self.n):
            r += self.w[i] * x[i]
        if r <= 0.0:
            return INFINITY
        val -= log(r)
        return val + t * _lse(self.la, self.U, x, self.z_obj)

    cdef int solve(self, double tol) except -1:
        """Minimize from self.x (strictly feasible) in place."""
        cdef Py_ssize_t n = self.n, i, j, it
        cdef int m = <int>n + 2
        cdef double t = T0, r, ra, lam2, f_cur, fn, s, sl
        cdef bint stalled, centered
        while True:
            centered = False
            lam2 = INFINITY
            for it in range(MAX_NEWTON):
                _lse_parts(self.la, self.U, self.x, self.z_obj, self.g0, self.H0)
                for i in range(n):
                    sl = self.x[i] - self.floor
                    self.grad[i] = t * self.g0[i] - 1.0 / sl
                    for j in range(n):
                        self.H[i, j] = t * self.H0[i, j]
                    self.H[i, i] += 1.0 / (sl * sl)
                r = self.c - _lse_parts(self.lb, self.V, self.x, self.z_con, self.gc, self.Hc)
                ra = self.e
                for i in range(n):
                    ra += self.w[i] * self.x[i]
                for i in range(n):
                    self.grad[i] += self.gc[i] / r - self.w[i] / ra
                    for j in range(n):
                        self.H[i, j] += (self.Hc[i, j] / r + self.gc[i] * self.gc[j] / (r * r)
                                         + self.w[i] * self.w[j] / (ra * ra))
                for i in range(n):
                    self.rhs[i] = -self.grad[i]
                if _cholesky_solve(self.H, self.rhs, self.dx, self.Lw) != 0:
                    # fall back to a gradient step scaled by the diagonal
                    for i in range(n):
                        self.dx[i] = self.rhs[i] / fabs(self.H[i, i])
                lam2 = 0.0
                for i in range(n):
                    lam2 -= self.grad[i] * self.dx[i]
                if lam2 / 2.0 <= NEWTON_TOL:
                    centered = True
                    break
                f_cur = self.phi(self.x, t)
                s = 1.0
                stalled = False
                while True:
                    for i in range(n):
                        self.xn[i] = self.x[i] + s * self.dx[i]
                    fn = self.phi(self.xn, t)
                    if lam2 < PURE_NEWTON_LAMBDA2:
                        if isfinite(fn):
                            break
                    elif fn <= f_cur - ALPHA * s * lam2:
                        break
                    s *= BETA
                    if s < 1e-20:
                        stalled = True
                        break
                if stalled:
                    if lam2 <= STALL_LAMBDA2:
                        centered = True
                        break
                    raise NumericError("line search stagnated",
                                       payload={"x": list(self.x), "t": t, "lambda2": lam2})
                for i in range(n):
                    self.x[i] = self.xn[i]
            if not centered and lam2 > STALL_LAMBDA2:
                raise NumericError("Newton centering did not converge",
                                   payload={"x": list(self.x), "t": t, "lambda2": lam2})
            if m / t < tol:
                return 0
            t *= T_FACTOR


# ---------------------------------------------------------------- AF SCA loop

cdef double _lse_w(double[::1] w, double[::1] x, Py_ssize_t N, double scale):
    """ln sum_n w_n exp(scale * x_n)."""
    cdef Py_ssize_t k
    cdef double m = -INFINITY, s = 0.0, v
    for k in range(N):
        v = log(w[k]) + scale * x[k]
        if v > m:
            m = v
    for k in range(N):
        s += exp(log(w[k]) + scale * x[k] - m)
    return m + log(s)


cdef void _restore(double[::1] x, double[::1] rg, double[::1] gext, double[::1] tmp,
                   double logpsi, double lognoise, double nudge, Py_ssize_t N):
    cdef Py_ssize_t k
    cdef double r
    tmp[0] = 0.0
    for k in range(N):
        tmp[k + 1] = x[k + 2]
    r = -logpsi - lognoise - _lse_w(gext, tmp, N + 1, 2.0) + x[1]
    if r <= nudge:
        x[1] += nudge - r
    r = 2.0 * _lse_w(rg, x[2:], N, 1.0) + x[0] - x[1]
    if r <= nudge:
        x[0] += nudge - r


def sca_solve(const double[::1] h, const double[::1] g, double noise, double psi, double tol_sca,
              double tol_gap, int max_iter, double floor, double margin, double nudge):
    """Run the SCA loop from the all-ones start. Returns ``(x, trace, converged)``."""
    cdef Py_ssize_t N = h.shape[0], n = N + 2, k, it
    cdef double logpsi = log(psi), lognoise = log(noise)
    cdef double sum_g = 0.0, sum_rg = 0.0, delta, P, Y, Yn, wsum, amax, lse0, ew
    rg_arr = np.sqrt(np.asarray(h) * np.asarray(g))
    cdef double[::1] rg = rg_arr
    cdef double[::1] gext = np.concatenate(([1.0], np.asarray(g)))
    cdef double[::1] tmp = np.zeros(N + 1)
    for k in range(N):
        sum_g += g[k]
        sum_rg += rg[k]
    # objective table: e^q, h_n e^{q + 2 a_n}, noise e^{2 a_n}
    U_arr = np.zeros((2 * N + 1, n))
    U_arr[0, 0] = 1.0
    U_arr[1:N + 1, 0] = 1.0
    U_arr[1:N + 1, 2:] = 2.0 * np.eye(N)
    U_arr[N + 1:, 2:] = 2.0 * np.eye(N)
    la_arr = np.log(np.concatenate(([1.0], np.asarray(h), np.full(N, noise))))
    # power constraint table: ln(e^{-s} + sum g_n e^{2 a_n - s})
    V_arr = np.zeros((N + 1, n))
    V_arr[:, 1] = -1.0
    V_arr[1:, 2:] = 2.0 * np.eye(N)
    lb_arr = np.log(np.asarray(gext))
    cdef _Barrier bar = _Barrier(la_arr, U_arr, lb_arr, V_arr, -logpsi - lognoise, floor)
    cdef double[::1] zs = np.zeros(2 * N + 1)

    delta = psi * noise * (1.0 + sum_g) * (1.0 + margin)
    P = delta * (1.0 + margin) / (sum_rg * sum_rg)
    x_arr = np.zeros(n)
    cdef double[::1] x = x_arr
    x[0] = log(P)
    x[1] = log(delta)
    cdef double[::1] xw = np.zeros(n)
    Y = _lse(bar.la, bar.U, x, zs)
    trace = [Y]
    for it in range(max_iter):
        # linearize 2 ln sum sqrt(hg) e^{a} around the current alphas
        amax = -INFINITY
        for k in range(N):
            if x[k + 2] > amax:
                amax = x[k + 2]
        wsum = 0.0
        for k in range(N):
            wsum += rg[k] * exp(x[k + 2] - amax)
        lse0 = _lse_w(rg, x[2:], N, 1.0)
        bar.w[0] = 1.0
        bar.w[1] = -1.0
        bar.e = 2.0 * lse0
        for k in range(N):
            ew = rg[k] * exp(x[k + 2] - amax) / wsum
            bar.w[k + 2] = 2.0 * ew
            bar.e -= 2.0 * ew * x[k + 2]
        for k in range(n):
            xw[k] = x[k]
        _restore(xw, rg, gext, tmp, logpsi, lognoise, nudge, N)
        for k in range(n):
            bar.x[k] = xw[k]
        bar.solve(tol_gap)
        for k in range(n):
            xw[k] = bar.x[k]
        _restore(xw, rg, gext, tmp, logpsi, lognoise, nudge, N)
        Yn = _lse(bar.la, bar.U, xw, zs)
        if Yn > Y:
            trace.append(Y)
            return np.array(x_arr), trace, True
        trace.append(Yn)
        for k in range(n):
            x[k] = xw[k]
        if fabs(Yn - Y) < tol_sca:
            return np.array(x_arr), trace, True
        Y = Yn
    return np.array(x_arr), trace, False
