"""Compiled Ewald kernels operating on raw jet coefficient arrays.

Everything here works on 1-D complex arrays of length ``order + 1`` holding
scaled Taylor coefficients in the angular frequency.  The public,
object-level interface lives in :mod:`gratingsweep.greens`; this module only
provides the inner loops, compiled with numba.

Output layout of :func:`ewald_point`: rows 0..5 of ``out`` are the value,
the two gradient components and the Hessian entries ``xx, xy, yy`` of the
Green function with respect to ``rho = x - y``.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .specfun import erfcx_scalar, expint_table

_INV_SQRT_PI = 1.0 / math.sqrt(math.pi)
HARD_TERM_CAP = 10_000

# status codes returned by the kernels
OK = 0
NO_CONVERGENCE = 1
LATTICE_POINT = 2


# ---------------------------------------------------------------------------
# jet primitives


@njit(cache=True)
def jmul(a, b, out):
    no = a.shape[0]
    for k in range(no):
        s = 0j
        for j in range(k + 1):
            s += a[j] * b[k - j]
        out[k] = s


@njit(cache=True)
def jexp(a, out):
    no = a.shape[0]
    out[0] = np.exp(a[0])
    for k in range(1, no):
        s = 0j
        for j in range(1, k + 1):
            s += j * a[j] * out[k - j]
        out[k] = s / k


@njit(cache=True)
def jerfcx(a, out):
    """erfcx of a jet: ``f' = (2 a f - 2/sqrt(pi)) a'``."""
    no = a.shape[0]
    out[0] = erfcx_scalar(a[0])
    if no == 1:
        return
    h = np.empty(no, dtype=np.complex128)
    for k in range(1, no):
        l = k - 1
        conv = 0j
        for i in range(l + 1):
            conv += a[i] * out[l - i]
        h[l] = 2.0 * conv
        if l == 0:
            h[l] -= 2.0 * _INV_SQRT_PI
        s = 0j
        for j in range(1, k + 1):
            s += j * a[j] * h[k - j]
        out[k] = s / k


@njit(cache=True)
def phase_jet(c0, c1, out):
    """Jet of ``exp(i (c0 + c1 d))`` in the offset ``d``."""
    no = out.shape[0]
    v = np.exp(1j * c0)
    out[0] = v
    z = 1j * c1
    for k in range(1, no):
        v = v * z / k
        out[k] = v


# ---------------------------------------------------------------------------
# point evaluation


@njit(cache=True)
def _group_small(contrib, total, lo, hi, tol):
    no = contrib.shape[1]
    for i in range(no):
        cmax = 0.0
        tmax = 0.0
        for r in range(lo, hi):
            c = abs(contrib[r, i])
            t = abs(total[r, i])
            if c > cmax:
                cmax = c
            if t > tmax:
                tmax = t
        if cmax > tol * tmax:
            return False
    return True


@njit(cache=True)
def _converged(contrib, total, tol, nrows):
    if not _group_small(contrib, total, 0, 1, tol):
        return False
    if nrows > 1:
        if not _group_small(contrib, total, 1, 3, tol):
            return False
        if not _group_small(contrib, total, 3, 6, tol):
            return False
    return True


@njit(cache=True)
def gp1_point(X, Y, S, jmin, E, L, beta0, beta1, tol, nrows, exclude_n0, out, counts):
    """Spatial Ewald series with spatial derivatives, accumulated into ``out``."""
    no = out.shape[1]
    jcap = S.shape[0] - 1
    etab = np.empty(jcap + 3)
    V0 = np.empty(no, dtype=np.complex128)
    V1 = np.empty(no, dtype=np.complex128)
    V2 = np.empty(no, dtype=np.complex128)
    ph = np.empty(no, dtype=np.complex128)
    tmp = np.empty(no, dtype=np.complex128)
    pair = np.zeros((6, no), dtype=np.complex128)
    total = np.zeros((6, no), dtype=np.complex128)
    E2 = E * E
    inv4pi = 1.0 / (4.0 * math.pi)
    jused = 0
    for n in range(0, HARD_TERM_CAP):
        for r in range(nrows):
            for i in range(no):
                pair[r, i] = 0.0
        for sgn in (1, -1):
            if n == 0 and sgn == -1:
                continue
            nn = n * sgn
            if nn == 0 and exclude_n0:
                continue
            rx = X - nn * L
            ry = Y
            r2 = rx * rx + ry * ry
            if r2 == 0.0:
                return LATTICE_POINT
            u = E2 * r2
            expint_table(u, jcap + 1, etab)
            # etab[j + 1] = E_j(u)
            for i in range(no):
                V0[i] = 0.0
                V1[i] = 0.0
                V2[i] = 0.0
            small_run = 0
            for j in range(jcap + 1):
                e_next = etab[j + 2]
                e_cur = etab[j + 1]
                e_prev = etab[j]
                ok = True
                for i in range(no):
                    s = S[j, i]
                    if s == 0.0:
                        continue
                    t0 = s * e_next
                    V0[i] += t0
                    if abs(t0) > tol * abs(V0[i]):
                        ok = False
                    if nrows > 1:
                        t1 = s * e_cur
                        t2 = s * e_prev
                        V1[i] += t1
                        V2[i] += t2
                        if abs(t1) > tol * abs(V1[i]) or abs(t2) > tol * abs(V2[i]):
                            ok = False
                if j > jused:
                    jused = j
                if ok and j >= jmin:
                    small_run += 1
                    if small_run >= 2:
                        break
                else:
                    small_run = 0
                if j == jcap:
                    return NO_CONVERGENCE
            phase_jet(nn * beta0, nn * beta1, ph)
            jmul(ph, V0, tmp)
            for i in range(no):
                pair[0, i] += inv4pi * tmp[i]
            if nrows > 1:
                jmul(ph, V1, tmp)
                for i in range(no):
                    w = inv4pi * tmp[i]
                    pair[1, i] += -2.0 * E2 * rx * w
                    pair[2, i] += -2.0 * E2 * ry * w
                    pair[3, i] += -2.0 * E2 * w
                    pair[5, i] += -2.0 * E2 * w
                jmul(ph, V2, tmp)
                for i in range(no):
                    w = 4.0 * E2 * E2 * inv4pi * tmp[i]
                    pair[3, i] += rx * rx * w
                    pair[4, i] += rx * ry * w
                    pair[5, i] += ry * ry * w
        for r in range(nrows):
            for i in range(no):
                total[r, i] += pair[r, i]
        if n >= 1 and _converged(pair, total, tol, nrows):
            counts[0] = n
            counts[1] = jused
            for r in range(nrows):
                for i in range(no):
                    out[r, i] += total[r, i]
            return OK
    return NO_CONVERGENCE


@njit(cache=True)
def gp2_point(X, Y, KT, IKT, EG, xi0, xi1, mcap, E, L, tol, nrows, out, counts):
    """Spectral Ewald series with spatial derivatives, accumulated into ``out``."""
    no = out.shape[1]
    a = np.empty(no, dtype=np.complex128)
    b = np.empty(no, dtype=np.complex128)
    G = np.empty(no, dtype=np.complex128)
    Ta = np.empty(no, dtype=np.complex128)
    Tb = np.empty(no, dtype=np.complex128)
    f = np.empty(no, dtype=np.complex128)
    ex = np.empty(no, dtype=np.complex128)
    tmp = np.empty(no, dtype=np.complex128)
    tmp2 = np.empty(no, dtype=np.complex128)
    ph = np.empty(no, dtype=np.complex128)
    xi = np.zeros(no, dtype=np.complex128)
    pair = np.zeros((6, no), dtype=np.complex128)
    total = np.zeros((6, no), dtype=np.complex128)
    pref = 1j / (4.0 * L)
    gscal = math.exp(-E * E * Y * Y)
    c4 = 4j * E * _INV_SQRT_PI
    for m in range(0, min(mcap, HARD_TERM_CAP) + 1):
        for r in range(nrows):
            for i in range(no):
                pair[r, i] = 0.0
        for sgn in (1, -1):
            if m == 0 and sgn == -1:
                continue
            mm = m * sgn
            mi = mm + mcap
            K = KT[mi]
            for i in range(no):
                a[i] = -1j * K[i] / (2.0 * E)
                b[i] = a[i]
                G[i] = EG[mi, i] * gscal
            a[0] += -E * Y
            b[0] += E * Y
            # T_a = exp(i K Y) erfc(a), T_b = exp(-i K Y) erfc(b)
            if a[0].real >= 0.0:
                jerfcx(a, tmp)
                jmul(G, tmp, Ta)
            else:
                for i in range(no):
                    tmp2[i] = -a[i]
                jerfcx(tmp2, tmp)
                jmul(G, tmp, Ta)
                for i in range(no):
                    tmp2[i] = 1j * Y * K[i]
                jexp(tmp2, ex)
                for i in range(no):
                    Ta[i] = 2.0 * ex[i] - Ta[i]
            if b[0].real >= 0.0:
                jerfcx(b, tmp)
                jmul(G, tmp, Tb)
            else:
                for i in range(no):
                    tmp2[i] = -b[i]
                jerfcx(tmp2, tmp)
                jmul(G, tmp, Tb)
                for i in range(no):
                    tmp2[i] = -1j * Y * K[i]
                jexp(tmp2, ex)
                for i in range(no):
                    Tb[i] = 2.0 * ex[i] - Tb[i]
            for i in range(no):
                f[i] = Ta[i] + Tb[i]
            xim0 = xi0[mi]
            phase_jet(xim0 * X, xi1 * X, ph)
            jmul(IKT[mi], f, tmp)
            jmul(ph, tmp, tmp2)
            # tmp2 holds the value term without the prefactor
            for i in range(no):
                pair[0, i] += pref * tmp2[i]
            if nrows > 1:
                xi[0] = xim0
                if no > 1:
                    xi[1] = xi1
                # d/dX: multiply by i xi
                jmul(xi, tmp2, tmp)
                for i in range(no):
                    pair[1, i] += 1j * pref * tmp[i]
                # d2/dX2: multiply by -xi^2
                jmul(xi, tmp, ex)
                for i in range(no):
                    pair[3, i] += -pref * ex[i]
                # d/dY: i (T_a - T_b)
                for i in range(no):
                    tmp[i] = 1j * (Ta[i] - Tb[i])
                jmul(ph, tmp, ex)
                for i in range(no):
                    pair[2, i] += pref * ex[i]
                jmul(xi, ex, tmp)
                for i in range(no):
                    pair[4, i] += 1j * pref * tmp[i]
                # d2/dY2: -K f + (4 i E / sqrt(pi)) G
                jmul(K, f, tmp)
                for i in range(no):
                    tmp[i] = -tmp[i] + c4 * G[i]
                jmul(ph, tmp, ex)
                for i in range(no):
                    pair[5, i] += pref * ex[i]
        for r in range(nrows):
            for i in range(no):
                total[r, i] += pair[r, i]
        if m >= 1 and _converged(pair, total, tol, nrows):
            counts[2] = m
            for r in range(nrows):
                for i in range(no):
                    out[r, i] += total[r, i]
            return OK
    return NO_CONVERGENCE


@njit(cache=True)
def ewald_point(X, Y, ctx_S, jmin, KT, IKT, EG, xi0, xi1, mcap, E, L, beta0, beta1, tol, nrows, exclude_n0, out, counts):
    for r in range(out.shape[0]):
        for i in range(out.shape[1]):
            out[r, i] = 0.0
    st = gp1_point(X, Y, ctx_S, jmin, E, L, beta0, beta1, tol, nrows, exclude_n0, out, counts)
    if st != OK:
        return st
    return gp2_point(X, Y, KT, IKT, EG, xi0, xi1, mcap, E, L, tol, nrows, out, counts)


# ---------------------------------------------------------------------------
# boundary-element blocks


@njit(cache=True)
def block_points(cx, cy, ax, ay, bx, by, elen, self_index, gx_nodes, gx_weights, n_near, n_mid, n_far, L):
    """Quadrature offsets ``rho = x_i - y`` for every non-self (row, element) pair.

    Returns the offsets, quadrature weights (including the Jacobian) and the
    row/column index of each point.  Each element gets a Gauss rule graded by
    the distance to the nearest periodic image of its midpoint.
    """
    nr = cx.shape[0]
    ne = ax.shape[0]
    cap = nr * ne * n_near
    X = np.empty(cap)
    Y = np.empty(cap)
    W = np.empty(cap)
    I = np.empty(cap, dtype=np.int64)
    J = np.empty(cap, dtype=np.int64)
    cnt = 0
    for i in range(nr):
        for j in range(ne):
            if self_index[i] == j:
                continue
            mx = 0.5 * (ax[j] + bx[j])
            my = 0.5 * (ay[j] + by[j])
            h = elen[j]
            dmin = 1e300
            for s in (-1, 0, 1):
                dx = cx[i] - mx - s * L
                dy = cy[i] - my
                d = math.sqrt(dx * dx + dy * dy)
                if d < dmin:
                    dmin = d
            if dmin > 8.0 * h:
                row = 2
                npts = n_far
            elif dmin > 2.5 * h:
                row = 1
                npts = n_mid
            else:
                row = 0
                npts = n_near
            for q in range(npts):
                t = gx_nodes[row, q]
                X[cnt] = cx[i] - (mx + 0.5 * t * (bx[j] - ax[j]))
                Y[cnt] = cy[i] - (my + 0.5 * t * (by[j] - ay[j]))
                W[cnt] = gx_weights[row, q] * 0.5 * h
                I[cnt] = i
                J[cnt] = j
                cnt += 1
    return X[:cnt], Y[:cnt], W[:cnt], I[:cnt], J[:cnt]


@njit(cache=True)
def eval_points(X, Y, ctx_S, jmin, KT, IKT, EG, xi0, xi1, mcap, E, L, beta0, beta1, tol, exclude_n0, out):
    """Evaluate value, gradient and Hessian jets at many offsets; ``out`` is (n, 6, order+1)."""
    counts = np.zeros(3, dtype=np.int64)
    res = np.empty((6, out.shape[2]), dtype=np.complex128)
    for p in range(X.shape[0]):
        st = ewald_point(X[p], Y[p], ctx_S, jmin, KT, IKT, EG, xi0, xi1, mcap,
                         E, L, beta0, beta1, tol, 6, exclude_n0, res, counts)
        if st != OK:
            return st
        out[p] = res
    return OK


@njit(cache=True)
def block_accumulate(G, idx, sx, sy, W, I, J, cnx, cny, enx, eny, alpha, out):
    """Add ``w * (dG/dn_y + alpha d2G/dn_x dn_y)`` of every point to ``out[I, J]``.

    ``G[idx[p]]`` holds the jets at the canonical offset of point ``p``; the
    true offset is the canonical one with its components multiplied by
    ``sx[p]`` and ``sy[p]`` (the Green function is even in each reflected
    component, so gradients pick up the sign and ``G_xy`` the product).
    """
    no = out.shape[2]
    for p in range(W.shape[0]):
        g = G[idx[p]]
        i = I[p]
        j = J[p]
        s_x = sx[p]
        s_y = sy[p]
        w = W[p]
        for k in range(no):
            gx = s_x * g[1, k]
            gy = s_y * g[2, k]
            hxy = s_x * s_y * g[4, k]
            dny = -(gx * enx[j] + gy * eny[j])
            hn_x = g[3, k] * enx[j] + hxy * eny[j]
            hn_y = hxy * enx[j] + g[5, k] * eny[j]
            dnxny = -(cnx[i] * hn_x + cny[i] * hn_y)
            out[i, j, k] += w * (dny + alpha * dnxny)


@njit(cache=True)
def dlp_block(px, py, ax, ay, bx, by, enx, eny, elen, gx_nodes, gx_weights, npts,
              ctx_S, jmin, KT, IKT, EG, xi0, xi1, mcap, E, L, beta0, beta1, tol, out):
    """Value-part double-layer matrix ``int_{element j} dG/dn_y(p_i, y) dGamma_y``."""
    nr = px.shape[0]
    ne = ax.shape[0]
    res = np.empty((6, 1), dtype=np.complex128)
    counts = np.zeros(3, dtype=np.int64)
    for i in range(nr):
        for j in range(ne):
            mx = 0.5 * (ax[j] + bx[j])
            my = 0.5 * (ay[j] + by[j])
            acc = 0j
            for q in range(npts):
                t = gx_nodes[q]
                w = gx_weights[q] * 0.5 * elen[j]
                yx = mx + 0.5 * t * (bx[j] - ax[j])
                yy = my + 0.5 * t * (by[j] - ay[j])
                st = ewald_point(px[i] - yx, py[i] - yy, ctx_S, jmin, KT, IKT, EG, xi0, xi1, mcap,
                                 E, L, beta0, beta1, tol, 6, False, res, counts)
                if st != OK:
                    return st
                acc += -w * (res[1, 0] * enx[j] + res[2, 0] * eny[j])
            out[i, j] = acc
    return OK
