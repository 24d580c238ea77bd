"""Compiled inner loops: transfer products, Sturm bisection, inverse iteration.

All kernels are ``nogil`` so a thread pool can run them concurrently.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

KIND_CODE = {"amo": 0, "gaa": 1, "mosaic": 2, "longrange": 3, "peaky": 4}
RENORM = 32
TWO_PI = 2.0 * math.pi


def pack(model) -> tuple[int, np.ndarray]:
    """Kind code and parameter vector consumed by the kernels."""
    prm = np.array([model.lam, model.tau, float(model.kappa), math.exp(-model.p), model.K])
    return KIND_CODE[model.kind], prm


@njit(nogil=True, cache=True)
def pot(kind, prm, x, n):
    lam = prm[0]
    if kind == 0:
        return 2.0 * lam * np.cos(TWO_PI * x)
    if kind == 1:
        c = np.cos(TWO_PI * x)
        return 2.0 * lam * c / (1.0 - prm[1] * c)
    if kind == 2:
        if n % int(prm[2]) == 0:
            return 2.0 * lam * np.cos(TWO_PI * x)
        return 0.0 * x
    if kind == 3:
        r = prm[3]
        c = np.cos(TWO_PI * x)
        return (4.0 / lam) * (-r * r + r * c) / (1.0 + r * r - 2.0 * r * c)
    s = np.sin(math.pi * x)
    return lam / (1.0 + 4.0 * prm[4] * s * s)


@njit(nogil=True, cache=True)
def _phase(theta, n, alpha):
    t = n * alpha
    return theta + (t - math.floor(t))


@njit(nogil=True, cache=True)
def _norm2(m00, m01, m10, m11):
    # spectral norm of a 2x2 (real or complex) matrix
    f = abs(m00) ** 2 + abs(m01) ** 2 + abs(m10) ** 2 + abs(m11) ** 2
    d = abs(m00 * m11 - m01 * m10)
    disc = f * f - 4.0 * d * d
    if disc < 0.0:
        disc = 0.0
    return math.sqrt(0.5 * (f + math.sqrt(disc)))


@njit(nogil=True, cache=True)
def log_growth(kind, prm, alpha, theta, E, n0, N):
    """ln ||S(n0+N-1) ... S(n0)|| for the one-step cocycle at phase theta.

    ``theta`` may be complex (complexified phase).  The running product is
    rescaled by its max-entry every RENORM steps; logs are Kahan-summed.
    """
    one = theta * 0.0 + 1.0
    zero = theta * 0.0
    m00, m01, m10, m11 = one, zero, zero, one
    acc = 0.0
    comp = 0.0
    for j in range(N):
        n = n0 + j
        c = E - pot(kind, prm, _phase(theta, n, alpha), n)
        m00, m01, m10, m11 = c * m00 - m10, c * m01 - m11, m00, m01
        if (j + 1) % RENORM == 0:
            s = max(abs(m00), abs(m01), abs(m10), abs(m11))
            m00, m01, m10, m11 = m00 / s, m01 / s, m10 / s, m11 / s
            y = math.log(s) - comp
            t = acc + y
            comp = (t - acc) - y
            acc = t
    return acc + math.log(_norm2(m00, m01, m10, m11))


@njit(nogil=True, cache=True)
def block_log_growth(lam, a0, a1, a2, kalpha, theta, E, N):
    """Same as log_growth for the closed-form mosaic block at frequency kappa*alpha.

    a0, a1, a2 are a_kappa(E), a_{kappa-1}(E), a_{kappa-2}(E).
    """
    one = theta * 0.0 + 1.0
    zero = theta * 0.0
    m00, m01, m10, m11 = one, zero, zero, one
    acc = 0.0
    comp = 0.0
    for j in range(N):
        w = E - 2.0 * lam * np.cos(TWO_PI * _phase(theta, j, kalpha))
        d00 = a0 * w - a1
        d01 = -a0
        d10 = a1 * w - a2
        d11 = -a1
        m00, m01, m10, m11 = (d00 * m00 + d01 * m10, d00 * m01 + d01 * m11,
                              d10 * m00 + d11 * m10, d10 * m01 + d11 * m11)
        if (j + 1) % RENORM == 0:
            s = max(abs(m00), abs(m01), abs(m10), abs(m11))
            m00, m01, m10, m11 = m00 / s, m01 / s, m10 / s, m11 / s
            y = math.log(s) - comp
            t = acc + y
            comp = (t - acc) - y
            acc = t
    return acc + math.log(_norm2(m00, m01, m10, m11))


@njit(nogil=True, cache=True)
def log_norms_along(kind, prm, alpha, theta, E, N, stride):
    """ln ||M_k(theta)|| for k = stride, 2 stride, ..., without renormalizing away the scale."""
    out = np.empty(N // stride)
    m00, m01, m10, m11 = 1.0, 0.0, 0.0, 1.0
    acc = 0.0
    for j in range(N):
        c = E - pot(kind, prm, _phase(theta, j, alpha), j)
        m00, m01, m10, m11 = c * m00 - m10, c * m01 - m11, m00, m01
        if (j + 1) % RENORM == 0 or (j + 1) % stride == 0:
            s = max(abs(m00), abs(m01), abs(m10), abs(m11))
            m00, m01, m10, m11 = m00 / s, m01 / s, m10 / s, m11 / s
            acc += math.log(s)
        if (j + 1) % stride == 0:
            out[(j + 1) // stride - 1] = acc + math.log(_norm2(m00, m01, m10, m11))
    return out


@njit(nogil=True, cache=True)
def rotation_angle(kind, prm, alpha, theta, E, n0, N):
    """Total lifted projective angle of the one-step action over N steps."""
    x, y = 1.0, 0.0
    total = 0.0
    for j in range(N):
        n = n0 + j
        c = E - pot(kind, prm, _phase(theta, n, alpha), n)
        wx = c * x - y
        wy = x
        d = math.atan2(x * wy - y * wx, x * wx + y * wy)
        if d < -0.5 * math.pi:
            d += TWO_PI
        total += d
        r = math.hypot(wx, wy)
        wx /= r
        wy /= r
        if wx < 0.0 or (wx == 0.0 and wy < 0.0):
            wx, wy = -wx, -wy
        x, y = wx, wy
    return total


# ---------------------------------------------------------------------------
# symmetric tridiagonal with unit off-diagonals

PIVMIN = 1e-290


@njit(nogil=True, cache=True)
def sturm_count(d, s):
    """Number of eigenvalues strictly below s (unit off-diagonal)."""
    cnt = 0
    q = d[0] - s
    if abs(q) < PIVMIN:
        q = -PIVMIN
    if q < 0.0:
        cnt += 1
    for i in range(1, d.shape[0]):
        q = d[i] - s - 1.0 / q
        if abs(q) < PIVMIN:
            q = -PIVMIN
        if q < 0.0:
            cnt += 1
    return cnt


@njit(nogil=True, cache=True)
def _charpoly(d, s):
    """det(T - s) and its derivative, rescaled by a common positive factor."""
    p0, p1 = 1.0, d[0] - s  # P_{k-1}, P_k
    q0, q1 = 0.0, -1.0  # derivatives
    for i in range(1, d.shape[0]):
        c = d[i] - s
        p0, p1 = p1, c * p1 - p0
        q0, q1 = q1, c * q1 - p0 - q0
        m = max(abs(p1), abs(q1))
        if m > 1e150:
            p0 /= m
            p1 /= m
            q0 /= m
            q1 /= m
        elif m < 1e-150 and m > 0.0:
            p0 /= m
            p1 /= m
            q0 /= m
            q1 /= m
    return p1, q1


@njit(nogil=True, cache=True)
def _isolated_root(d, a, b, tol):
    """Single eigenvalue in (a, b): Newton steps safeguarded by bisection."""
    fa, _ = _charpoly(d, a)
    if fa == 0.0:
        # a is itself an eigenvalue (counted below a by the Sturm convention);
        # the sign just right of it is opposite to the sign at b
        fb, _ = _charpoly(d, b)
        fa = -fb
    x = 0.5 * (a + b)
    width_old = b - a
    for it in range(400):
        f, df = _charpoly(d, x)
        if f == 0.0:
            return x
        if (f > 0) == (fa > 0):
            a = x
            fa = f
        else:
            b = x
        if b - a <= tol:
            return 0.5 * (a + b)
        step = f / df if df != 0.0 else 0.0
        xn = x - step
        # bisect whenever Newton leaves the bracket or stops halving it
        slow = it % 2 == 1 and (b - a) > 0.5 * width_old
        if it % 2 == 1:
            width_old = b - a
        if df == 0.0 or slow or xn <= a or xn >= b or abs(step) > 0.5 * (b - a):
            xn = 0.5 * (a + b)
        elif abs(step) <= 0.25 * tol:
            return xn
        x = xn
    return 0.5 * (a + b)


@njit(nogil=True, cache=True)
def bisect_all(d, lo, hi, tol):
    """All eigenvalues in [lo, hi] by recursive Sturm bisection."""
    n = d.shape[0]
    out = np.empty(n)
    stack_a = np.empty(4 * n + 64)
    stack_b = np.empty(4 * n + 64)
    stack_ca = np.empty(4 * n + 64, dtype=np.int64)
    stack_cb = np.empty(4 * n + 64, dtype=np.int64)
    top = 0
    stack_a[0] = lo
    stack_b[0] = hi
    stack_ca[0] = sturm_count(d, lo)
    stack_cb[0] = sturm_count(d, hi)
    top = 1
    while top > 0:
        top -= 1
        a = stack_a[top]
        b = stack_b[top]
        ca = stack_ca[top]
        cb = stack_cb[top]
        if cb == ca:
            continue
        mid = 0.5 * (a + b)
        if b - a <= tol or mid <= a or mid >= b:
            for k in range(ca, cb):
                out[k] = mid
            continue
        if cb - ca == 1:
            out[ca] = _isolated_root(d, a, b, tol)
            continue
        cm = sturm_count(d, mid)
        # push the upper half first so the lower half is processed first
        stack_a[top] = mid
        stack_b[top] = b
        stack_ca[top] = cm
        stack_cb[top] = cb
        top += 1
        stack_a[top] = a
        stack_b[top] = mid
        stack_ca[top] = ca
        stack_cb[top] = cm
        top += 1
    return out


@njit(nogil=True, cache=True)
def tridiag_solve(diag, b, eps):
    """Solve (T) x = b, T tridiagonal with unit off-diagonals and diagonal ``diag``.

    Gaussian elimination with partial pivoting; zero pivots are replaced by
    ``eps`` (this is what makes inverse iteration at an exact eigenvalue work).
    """
    n = diag.shape[0]
    u0 = np.empty(n)  # main diagonal of U
    u1 = np.zeros(n)  # first superdiagonal
    u2 = np.zeros(n)  # second superdiagonal
    rhs = b.copy()
    # current row i has entries (a_i at i, c_i at i+1); below row has (1 at i, d at i+1, 1 at i+2)
    a = diag[0]
    c = 1.0 if n > 1 else 0.0
    e2 = 0.0
    for i in range(n - 1):
        lo_d = diag[i + 1]
        lo_c = 1.0 if i + 2 < n else 0.0
        if abs(a) >= 1.0:
            # no swap: eliminate subdiagonal 1 using row i
            piv = a
            u0[i] = piv
            u1[i] = c
            u2[i] = e2
            m = 1.0 / piv
            a = lo_d - m * c
            c = lo_c - m * e2
            rhs[i + 1] -= m * rhs[i]
            e2 = 0.0
        else:
            # swap rows i and i+1
            u0[i] = 1.0
            u1[i] = lo_d
            u2[i] = lo_c
            m = a  # old row i minus m * (new pivot row)
            t = rhs[i]
            rhs[i] = rhs[i + 1]
            rhs[i + 1] = t - m * rhs[i]
            a = c - m * lo_d
            c = e2 - m * lo_c
            e2 = 0.0
    u0[n - 1] = a if a != 0.0 else eps
    if abs(u0[n - 1]) < eps:
        u0[n - 1] = eps if u0[n - 1] >= 0 else -eps
    for i in range(n - 1):
        if abs(u0[i]) < eps:
            u0[i] = eps if u0[i] >= 0 else -eps
    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        s = rhs[i]
        if i + 1 < n:
            s -= u1[i] * x[i + 1]
        if i + 2 < n:
            s -= u2[i] * x[i + 2]
        x[i] = s / u0[i]
    return x


@njit(nogil=True, cache=True)
def tri_residual(d, lam, v):
    n = d.shape[0]
    r = 0.0
    for i in range(n):
        s = (d[i] - lam) * v[i]
        if i > 0:
            s += v[i - 1]
        if i + 1 < n:
            s += v[i + 1]
        r += s * s
    return math.sqrt(r)


@njit(nogil=True, cache=True)
def inverse_iteration(d, evals, starts, cluster_tol, scale):
    """Eigenvectors (columns) for sorted ``evals`` with in-cluster re-orthogonalization.

    Returns (vectors, residuals, restarts_used_max).
    """
    n = d.shape[0]
    m = evals.shape[0]
    W = np.empty((m, n))  # row-major copy of the eigenvectors
    res = np.empty(m)
    eps = 1e-15 * scale
    worst_restarts = 0
    first = 0
    for j in range(m):
        if j == 0 or evals[j] - evals[j - 1] > cluster_tol:
            first = j
        shifted = d - evals[j]
        best = np.inf
        restarts = 0
        x = np.ascontiguousarray(starts[:, j])
        while True:
            for _it in range(4):
                for k in range(first, j):
                    x -= np.dot(W[k], x) * W[k]
                x = tridiag_solve(shifted, x, eps)
                nrm = math.sqrt(np.dot(x, x))
                x /= nrm
            for k in range(first, j):
                x -= np.dot(W[k], x) * W[k]
            x /= math.sqrt(np.dot(x, x))
            r = tri_residual(d, evals[j], x)
            best = r
            if r < 1e-10 * scale or restarts >= 10:
                break
            restarts += 1
            # perturb the start deterministically and retry
            for i in range(n):
                x[i] += starts[(i + 7 * restarts) % n, j] * 1e-3
        if restarts > worst_restarts:
            worst_restarts = restarts
        W[j] = x
        res[j] = best
    return W.T.copy(), res, worst_restarts


@njit(nogil=True, cache=True)
def det_log_sequence(c, kmax):
    """Signed log-magnitudes of D_k = det of the first k rows of tridiag(1, c, 1).

    D_0 = 1, D_1 = c_0, D_k = c_{k-1} D_{k-1} - D_{k-2}.  Returns (sign, log)
    arrays of length kmax + 1; log is -inf where D_k = 0.
    """
    sgn = np.empty(kmax + 1)
    lg = np.empty(kmax + 1)
    sgn[0] = 1.0
    lg[0] = 0.0
    prev, cur = 0.0, 1.0  # scaled D_{-1}, D_0
    acc = 0.0
    for k in range(1, kmax + 1):
        prev, cur = cur, c[k - 1] * cur - prev
        s = max(abs(prev), abs(cur))
        if s > 1e100 or (s < 1e-100 and s > 0.0):
            prev /= s
            cur /= s
            acc += math.log(s)
        if cur == 0.0:
            sgn[k] = 0.0
            lg[k] = -np.inf
        else:
            sgn[k] = 1.0 if cur > 0 else -1.0
            lg[k] = acc + math.log(abs(cur))
    return sgn, lg


@njit(nogil=True, cache=True)
def eig_index(d, k, lo, hi, tol):
    """k-th smallest eigenvalue (0-based) by bisection on the Sturm count."""
    a, b = lo, hi
    while b - a > tol:
        mid = 0.5 * (a + b)
        if mid <= a or mid >= b:
            break
        if sturm_count(d, mid) > k:
            b = mid
        else:
            a = mid
    return 0.5 * (a + b)
