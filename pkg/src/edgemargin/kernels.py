"""Hot numeric kernels.

Every kernel here is written in loop form so it compiles under ``numba.njit``.
With ``EDGEMARGIN_NUMBA=0`` the loop kernels run as plain Python, and the two
kernels that dominate runtime (frequency sweeps and trajectory integration)
switch to vectorised numpy equivalents instead.  ``freq_response`` and
``integrate_linear`` pick the path.
"""
import math

import numpy as np

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# dense real solve


@njit
def lu_solve(a, b, rel_pivot_tol):
    """Gaussian elimination with row pivoting.

    Returns ``(x, ok)``; ``ok`` is False when a pivot falls below
    ``rel_pivot_tol`` times the largest initial magnitude of its column.
    """
    n = a.shape[0]
    k = b.shape[1]
    lu = a.copy()
    x = b.copy()
    colmax = np.zeros(n)
    for j in range(n):
        for i in range(n):
            v = abs(lu[i, j])
            if v > colmax[j]:
                colmax[j] = v
    for j in range(n):
        p = j
        best = abs(lu[j, j])
        for i in range(j + 1, n):
            v = abs(lu[i, j])
            if v > best:
                best = v
                p = i
        if best == 0.0 or best < rel_pivot_tol * colmax[j]:
            return x, False
        if p != j:
            for c in range(n):
                tmp = lu[j, c]
                lu[j, c] = lu[p, c]
                lu[p, c] = tmp
            for c in range(k):
                tmp = x[j, c]
                x[j, c] = x[p, c]
                x[p, c] = tmp
        piv = lu[j, j]
        for i in range(j + 1, n):
            f = lu[i, j] / piv
            if f != 0.0:
                for c in range(j + 1, n):
                    lu[i, c] -= f * lu[j, c]
                for c in range(k):
                    x[i, c] -= f * x[j, c]
            lu[i, j] = 0.0
    for c in range(k):
        for i in range(n - 1, -1, -1):
            s = x[i, c]
            for q in range(i + 1, n):
                s -= lu[i, q] * x[q, c]
            x[i, c] = s / lu[i, i]
    return x, True


@njit
def complex_solve_vec(a, b):
    """Solve a complex square system for one right-hand side; NaN on a zero pivot."""
    n = a.shape[0]
    m = a.copy()
    x = b.copy()
    for j in range(n):
        p = j
        best = abs(m[j, j])
        for i in range(j + 1, n):
            v = abs(m[i, j])
            if v > best:
                best = v
                p = i
        if best == 0.0:
            x[:] = np.nan
            return x
        if p != j:
            for c in range(n):
                tmp = m[j, c]
                m[j, c] = m[p, c]
                m[p, c] = tmp
            tmp = x[j]
            x[j] = x[p]
            x[p] = tmp
        piv = m[j, j]
        for i in range(j + 1, n):
            f = m[i, j] / piv
            for c in range(j + 1, n):
                m[i, c] -= f * m[j, c]
            x[i] -= f * x[j]
    for i in range(n - 1, -1, -1):
        s = x[i]
        for q in range(i + 1, n):
            s -= m[i, q] * x[q]
        x[i] = s / m[i, i]
    return x


# ---------------------------------------------------------------------------
# QR with column pivoting


@njit
def qr_pivoted(a):
    """Householder QR with column pivoting: ``a[:, perm] = q @ r``.

    ``q`` is the full square orthogonal factor, so its trailing columns span
    the orthogonal complement of the numerical column space.
    """
    rows, cols = a.shape
    r = a.copy()
    q = np.eye(rows)
    perm = np.arange(cols)
    steps = min(rows, cols)
    for k in range(steps):
        # pivot: remaining column with the largest norm (recomputed, sizes are small)
        best = -1.0
        p = k
        for j in range(k, cols):
            s = 0.0
            for i in range(k, rows):
                s += r[i, j] * r[i, j]
            if s > best:
                best = s
                p = j
        if p != k:
            for i in range(rows):
                tmp = r[i, k]
                r[i, k] = r[i, p]
                r[i, p] = tmp
            t = perm[k]
            perm[k] = perm[p]
            perm[p] = t
        alpha = math.sqrt(best)
        if alpha == 0.0:
            break
        if r[k, k] > 0:
            alpha = -alpha
        v = np.zeros(rows)
        for i in range(k, rows):
            v[i] = r[i, k]
        v[k] -= alpha
        vn = 0.0
        for i in range(k, rows):
            vn += v[i] * v[i]
        if vn == 0.0:
            continue
        # r <- (I - 2 v v^T / vn) r
        for j in range(k, cols):
            s = 0.0
            for i in range(k, rows):
                s += v[i] * r[i, j]
            f = 2.0 * s / vn
            for i in range(k, rows):
                r[i, j] -= f * v[i]
        # q <- q (I - 2 v v^T / vn)
        for i in range(rows):
            s = 0.0
            for c in range(k, rows):
                s += q[i, c] * v[c]
            f = 2.0 * s / vn
            for c in range(k, rows):
                q[i, c] -= f * v[c]
        for i in range(k + 1, rows):
            r[i, k] = 0.0
    return q, r, perm


# ---------------------------------------------------------------------------
# eigenvalues: balance, Householder Hessenberg reduction, Francis double-shift QR


@njit
def balance(a):
    n = a.shape[0]
    radix = 2.0
    sqrdx = radix * radix
    done = False
    while not done:
        done = True
        for i in range(n):
            r = 0.0
            c = 0.0
            for j in range(n):
                if j != i:
                    c += abs(a[j, i])
                    r += abs(a[i, j])
            if c != 0.0 and r != 0.0:
                g = r / radix
                f = 1.0
                s = c + r
                while c < g:
                    f *= radix
                    c *= sqrdx
                g = r * radix
                while c > g:
                    f /= radix
                    c /= sqrdx
                if (c + r) / f < 0.95 * s:
                    done = False
                    g = 1.0 / f
                    for j in range(n):
                        a[i, j] *= g
                    for j in range(n):
                        a[j, i] *= f
    return a


@njit
def hessenberg(a):
    """Orthogonal reduction to upper Hessenberg form (in place)."""
    n = a.shape[0]
    for k in range(n - 2):
        alpha = 0.0
        for i in range(k + 1, n):
            alpha += a[i, k] * a[i, k]
        alpha = math.sqrt(alpha)
        if alpha == 0.0:
            continue
        if a[k + 1, k] > 0:
            alpha = -alpha
        v = np.zeros(n)
        for i in range(k + 1, n):
            v[i] = a[i, k]
        v[k + 1] -= alpha
        vn = 0.0
        for i in range(k + 1, n):
            vn += v[i] * v[i]
        if vn == 0.0:
            continue
        for j in range(n):
            s = 0.0
            for i in range(k + 1, n):
                s += v[i] * a[i, j]
            f = 2.0 * s / vn
            for i in range(k + 1, n):
                a[i, j] -= f * v[i]
        for i in range(n):
            s = 0.0
            for j in range(k + 1, n):
                s += a[i, j] * v[j]
            f = 2.0 * s / vn
            for j in range(k + 1, n):
                a[i, j] -= f * v[j]
        for i in range(k + 2, n):
            a[i, k] = 0.0
    return a


@njit
def _sign(a, b):
    return abs(a) if b >= 0.0 else -abs(a)


@njit
def hqr(hin, max_sweeps):
    """Eigenvalues of an upper Hessenberg matrix by shifted double-step QR.

    Returns ``(wr, wi, ok)``.  ``ok`` is False when more than ``max_sweeps``
    QR sweeps were needed in total.  Internally 1-based to keep the classical
    index arithmetic readable.
    """
    n = hin.shape[0]
    a = np.zeros((n + 1, n + 1))
    for i in range(n):
        for j in range(n):
            a[i + 1, j + 1] = hin[i, j]
    wr = np.zeros(n + 1)
    wi = np.zeros(n + 1)
    anorm = 0.0
    for i in range(1, n + 1):
        for j in range(max(i - 1, 1), n + 1):
            anorm += abs(a[i, j])
    nn = n
    t = 0.0
    sweeps = 0
    x = 0.0
    y = 0.0
    w = 0.0
    p = 0.0
    q = 0.0
    r = 0.0
    z = 0.0
    while nn >= 1:
        its = 0
        while True:
            l = 1
            for ll in range(nn, 1, -1):
                s = abs(a[ll - 1, ll - 1]) + abs(a[ll, ll])
                if s == 0.0:
                    s = anorm
                if abs(a[ll, ll - 1]) + s == s:
                    a[ll, ll - 1] = 0.0
                    l = ll
                    break
            x = a[nn, nn]
            if l == nn:
                wr[nn] = x + t
                wi[nn] = 0.0
                nn -= 1
            else:
                y = a[nn - 1, nn - 1]
                w = a[nn, nn - 1] * a[nn - 1, nn]
                if l == nn - 1:
                    p = 0.5 * (y - x)
                    q = p * p + w
                    z = math.sqrt(abs(q))
                    x += t
                    if q >= 0.0:
                        z = p + _sign(z, p)
                        wr[nn - 1] = x + z
                        wr[nn] = x + z
                        if z != 0.0:
                            wr[nn] = x - w / z
                        wi[nn - 1] = 0.0
                        wi[nn] = 0.0
                    else:
                        wr[nn - 1] = x + p
                        wr[nn] = x + p
                        wi[nn - 1] = -z
                        wi[nn] = z
                    nn -= 2
                else:
                    if sweeps >= max_sweeps:
                        return wr[1:], wi[1:], False
                    if its > 0 and its % 10 == 0:
                        # exceptional shift
                        t += x
                        for i in range(1, nn + 1):
                            a[i, i] -= x
                        s = abs(a[nn, nn - 1]) + abs(a[nn - 1, nn - 2])
                        x = 0.75 * s
                        y = x
                        w = -0.4375 * s * s
                    its += 1
                    sweeps += 1
                    m = nn - 2
                    while m >= l:
                        z = a[m, m]
                        r = x - z
                        s = y - z
                        p = (r * s - w) / a[m + 1, m] + a[m, m + 1]
                        q = a[m + 1, m + 1] - z - r - s
                        r = a[m + 2, m + 1]
                        s = abs(p) + abs(q) + abs(r)
                        p /= s
                        q /= s
                        r /= s
                        if m == l:
                            break
                        u = abs(a[m, m - 1]) * (abs(q) + abs(r))
                        v = abs(p) * (abs(a[m - 1, m - 1]) + abs(z) + abs(a[m + 1, m + 1]))
                        if u + v == v:
                            break
                        m -= 1
                    for i in range(m + 2, nn + 1):
                        a[i, i - 2] = 0.0
                        if i != m + 2:
                            a[i, i - 3] = 0.0
                    for k in range(m, nn):
                        if k != m:
                            p = a[k, k - 1]
                            q = a[k + 1, k - 1]
                            r = 0.0
                            if k != nn - 1:
                                r = a[k + 2, k - 1]
                            x = abs(p) + abs(q) + abs(r)
                            if x != 0.0:
                                p /= x
                                q /= x
                                r /= x
                        s = _sign(math.sqrt(p * p + q * q + r * r), p)
                        if s != 0.0:
                            if k == m:
                                if l != m:
                                    a[k, k - 1] = -a[k, k - 1]
                            else:
                                a[k, k - 1] = -s * x
                            p += s
                            x = p / s
                            y = q / s
                            z = r / s
                            q /= p
                            r /= p
                            for j in range(k, nn + 1):
                                p = a[k, j] + q * a[k + 1, j]
                                if k != nn - 1:
                                    p += r * a[k + 2, j]
                                    a[k + 2, j] -= p * z
                                a[k + 1, j] -= p * y
                                a[k, j] -= p * x
                            mmin = nn if nn < k + 3 else k + 3
                            for i in range(l, mmin + 1):
                                p = x * a[i, k] + y * a[i, k + 1]
                                if k != nn - 1:
                                    p += z * a[i, k + 2]
                                    a[i, k + 2] -= p * r
                                a[i, k + 1] -= p * q
                                a[i, k] -= p
            if l >= nn - 1:
                break
    return wr[1:], wi[1:], True


@njit
def eig_real(a, max_sweeps):
    h = a.copy()
    balance(h)
    hessenberg(h)
    return hqr(h, max_sweeps)


@njit
def min_real_eig(a, max_sweeps):
    """Smallest real part over the spectrum; NaN when QR fails to converge."""
    wr, wi, ok = eig_real(a, max_sweeps)
    if not ok:
        return np.nan
    return wr.min()


# ---------------------------------------------------------------------------
# frequency response  c (jw I - a)^-1 b


@njit
def _freq_response_loop(a, b, c, omegas):
    n = a.shape[0]
    out = np.empty(omegas.shape[0], dtype=np.complex128)
    bc = b.astype(np.complex128)
    for k in range(omegas.shape[0]):
        m = np.empty((n, n), dtype=np.complex128)
        for i in range(n):
            for j in range(n):
                m[i, j] = -a[i, j]
            m[i, i] += 1j * omegas[k]
        x = complex_solve_vec(m, bc)
        s = 0.0 + 0.0j
        for i in range(n):
            s += c[i] * x[i]
        out[k] = s
    return out


def _freq_response_numpy(a, b, c, omegas):
    n = a.shape[0]
    shifted = 1j * omegas[:, None, None] * np.eye(n) - a[None, :, :]
    rhs = np.broadcast_to(b.astype(complex), (omegas.shape[0], n))[..., None]
    try:
        x = np.linalg.solve(shifted, rhs)[..., 0]
    except np.linalg.LinAlgError:
        out = np.empty(omegas.shape[0], dtype=complex)
        for k in range(omegas.shape[0]):
            try:
                out[k] = c @ np.linalg.solve(shifted[k], b.astype(complex))
            except np.linalg.LinAlgError:
                out[k] = np.nan
        return out
    return x @ c


def freq_response(a, b, c, omegas):
    """Evaluate ``c (j w I - a)^-1 b`` at every frequency in ``omegas``."""
    a = np.ascontiguousarray(a, dtype=float)
    b = np.ascontiguousarray(b, dtype=float).ravel()
    c = np.ascontiguousarray(c, dtype=float).ravel()
    omegas = np.ascontiguousarray(omegas, dtype=float).ravel()
    if USE_NUMBA:
        return _freq_response_loop(a, b, c, omegas)
    return _freq_response_numpy(a, b, c, omegas)


# ---------------------------------------------------------------------------
# linear ODE integration (classical RK4), node picture and edge picture together


@njit
def _matvec(m, v, out):
    for i in range(m.shape[0]):
        s = 0.0
        for j in range(m.shape[1]):
            s += m[i, j] * v[j]
        out[i] = s


@njit
def _rk4_step(a, x, h, k1, k2, k3, k4, tmp):
    n = x.shape[0]
    _matvec(a, x, k1)
    for i in range(n):
        tmp[i] = x[i] + 0.5 * h * k1[i]
    _matvec(a, tmp, k2)
    for i in range(n):
        tmp[i] = x[i] + 0.5 * h * k2[i]
    _matvec(a, tmp, k3)
    for i in range(n):
        tmp[i] = x[i] + h * k3[i]
    _matvec(a, tmp, k4)
    for i in range(n):
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


@njit
def _integrate_loop(a_node, a_edge, proj, x0, h, n_records, stride, blowup):
    n = x0.shape[0]
    ne = a_edge.shape[0]
    states = np.zeros((n_records, n))
    edge_states = np.zeros((n_records, ne))
    x = x0.copy()
    xe = np.zeros(ne)
    _matvec(proj, x, xe)
    states[0, :] = x
    edge_states[0, :] = xe
    k1 = np.zeros(n)
    k2 = np.zeros(n)
    k3 = np.zeros(n)
    k4 = np.zeros(n)
    tmp = np.zeros(n)
    e1 = np.zeros(ne)
    e2 = np.zeros(ne)
    e3 = np.zeros(ne)
    e4 = np.zeros(ne)
    etmp = np.zeros(ne)
    check = np.zeros(ne)
    max_err = 0.0
    recorded = 1
    for rec in range(1, n_records):
        for _ in range(stride):
            _rk4_step(a_node, x, h, k1, k2, k3, k4, tmp)
            _rk4_step(a_edge, xe, h, e1, e2, e3, e4, etmp)
        states[rec, :] = x
        edge_states[rec, :] = xe
        recorded = rec + 1
        _matvec(proj, x, check)
        for i in range(ne):
            d = abs(check[i] - xe[i])
            if d > max_err:
                max_err = d
        lo = x[0]
        hi = x[0]
        finite = True
        for i in range(n):
            if not math.isfinite(x[i]):
                finite = False
            lo = min(lo, x[i])
            hi = max(hi, x[i])
        if not finite or hi - lo > blowup:
            break
    return states[:recorded], edge_states[:recorded], max_err


def _rk4_propagator(a, h):
    # one classical RK4 step of x' = a x is exactly this polynomial in h*a
    n = a.shape[0]
    ha = h * a
    step = np.eye(n)
    term = np.eye(n)
    for k in range(1, 5):
        term = term @ ha / k
        step = step + term
    return step


def _integrate_numpy(a_node, a_edge, proj, x0, h, n_records, stride, blowup):
    node_step = np.linalg.matrix_power(_rk4_propagator(a_node, h), stride)
    edge_step = np.linalg.matrix_power(_rk4_propagator(a_edge, h), stride)
    states = np.zeros((n_records, x0.shape[0]))
    edge_states = np.zeros((n_records, a_edge.shape[0]))
    x = x0.copy()
    xe = proj @ x
    states[0] = x
    edge_states[0] = xe
    max_err = 0.0
    recorded = 1
    with np.errstate(over="ignore", invalid="ignore"):
        for rec in range(1, n_records):
            x = node_step @ x
            xe = edge_step @ xe
            states[rec] = x
            edge_states[rec] = xe
            recorded = rec + 1
            max_err = max(max_err, float(np.max(np.abs(proj @ x - xe))))
            if not np.all(np.isfinite(x)) or x.max() - x.min() > blowup:
                break
    return states[:recorded], edge_states[:recorded], max_err


def integrate_linear(a_node, a_edge, proj, x0, h, n_records, stride, blowup):
    """RK4-integrate ``x' = a_node x`` and ``xe' = a_edge xe`` side by side.

    ``xe`` starts at ``proj @ x0``; records every ``stride`` steps and stops
    early once the node spread exceeds ``blowup``.  Returns
    ``(states, edge_states, max |proj x - xe|)``.
    """
    args = (
        np.ascontiguousarray(a_node, dtype=float),
        np.ascontiguousarray(a_edge, dtype=float),
        np.ascontiguousarray(proj, dtype=float),
        np.ascontiguousarray(x0, dtype=float),
        float(h),
        int(n_records),
        int(stride),
        float(blowup),
    )
    if USE_NUMBA:
        return _integrate_loop(*args)
    return _integrate_numpy(*args)
