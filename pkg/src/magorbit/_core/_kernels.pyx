# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled integration kernels (implicit midpoint with Newton inner solve).

Same field families, method names and return conventions as
``_kernels_py.FieldKernel``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, fabs, isfinite, M_PI
from libc.string cimport memcpy, memset

cnp.import_array()

cdef enum:
    MAXN = 6
    MAXD = 12

cdef double TWO_PI = 2.0 * M_PI


cdef int _solve(double* a, double* b, int m) noexcept nogil:
    """In-place Gaussian elimination on row-major ``a`` (m x m); b <- solution."""
    cdef int c, r, k, piv
    cdef double best, t, f
    for c in range(m):
        piv = c
        best = fabs(a[c * m + c])
        for r in range(c + 1, m):
            if fabs(a[r * m + c]) > best:
                best = fabs(a[r * m + c])
                piv = r
        if best < 1e-300:
            return 1
        if piv != c:
            for k in range(m):
                t = a[c * m + k]
                a[c * m + k] = a[piv * m + k]
                a[piv * m + k] = t
            t = b[c]
            b[c] = b[piv]
            b[piv] = t
        for r in range(c + 1, m):
            f = a[r * m + c] / a[c * m + c]
            if f != 0.0:
                for k in range(c, m):
                    a[r * m + k] -= f * a[c * m + k]
                b[r] -= f * b[c]
    for r in range(m - 1, -1, -1):
        t = b[r]
        for k in range(r + 1, m):
            t -= a[r * m + k] * b[k]
        b[r] = t / a[r * m + r]
    return 0


cdef int _invert(double* g, double* out, int n) noexcept nogil:
    cdef double a[MAXN * MAXN]
    cdef double col[MAXN]
    cdef int i, j
    for j in range(n):
        memcpy(a, g, n * n * sizeof(double))
        for i in range(n):
            col[i] = 1.0 if i == j else 0.0
        if _solve(a, col, n):
            return 1
        for i in range(n):
            out[i * n + j] = col[i]
    return 0


cdef void _matmul(double* a, double* b, double* out, int n) noexcept nogil:
    cdef int i, j, k
    cdef double t
    for i in range(n):
        for j in range(n):
            t = 0.0
            for k in range(n):
                t += a[i * n + k] * b[k * n + j]
            out[i * n + j] = t


cdef class FieldKernel:
    cdef readonly int family, n, dim, max_newton
    cdef readonly double kappa, newton_tol
    cdef int ng, ns, nz
    cdef int[:, ::1] g_idx, s_idx
    cdef double[:, ::1] g_modes, g_coef, s_modes, s_coef
    cdef double[::1] zonal
    cdef bint metric_const
    cdef double G0[MAXN * MAXN]

    def __init__(self, family, n, g_idx, g_modes, g_coef, s_idx, s_modes,
                 s_coef, zonal, kappa=0.0, newton_tol=1e-12, max_newton=20):
        self.family = int(family)
        self.n = int(n)
        self.dim = 2 * self.n
        if self.n > MAXN:
            raise ValueError("compiled kernel supports n <= %d" % MAXN)
        if self.family == 1 and self.n != 2:
            raise ValueError("sphere family requires n == 2")
        self.g_idx = np.ascontiguousarray(np.asarray(g_idx, dtype=np.int32).reshape(-1, 2))
        self.g_modes = np.ascontiguousarray(np.asarray(g_modes, dtype=float).reshape(-1, self.n))
        self.g_coef = np.ascontiguousarray(np.asarray(g_coef, dtype=float).reshape(-1, 2))
        self.s_idx = np.ascontiguousarray(np.asarray(s_idx, dtype=np.int32).reshape(-1, 2))
        self.s_modes = np.ascontiguousarray(np.asarray(s_modes, dtype=float).reshape(-1, self.n))
        self.s_coef = np.ascontiguousarray(np.asarray(s_coef, dtype=float).reshape(-1, 2))
        self.zonal = np.ascontiguousarray(np.asarray(zonal, dtype=float).ravel())
        self.ng = self.g_idx.shape[0]
        self.ns = self.s_idx.shape[0]
        self.nz = self.zonal.shape[0]
        self.kappa = float(kappa)
        self.newton_tol = float(newton_tol)
        self.max_newton = int(max_newton)
        self.metric_const = self.family == 0 and not np.any(np.asarray(self.g_modes))
        cdef double g[MAXN * MAXN]
        cdef double dg[MAXN * MAXN * MAXN]
        cdef double d2g[MAXN * MAXN * MAXN * MAXN]
        cdef double zero[MAXN]
        if self.metric_const:
            memset(zero, 0, MAXN * sizeof(double))
            self._trig_metric(zero, g, dg, d2g)
            if _invert(g, self.G0, self.n):
                raise ValueError("singular constant metric")

    # -- geometry --------------------------------------------------------
    cdef void _trig_metric(self, double* q, double* g, double* dg, double* d2g) noexcept nogil:
        cdef int n = self.n
        cdef int t, i, j, k, l, u, v, pair, npair
        cdef double th, c, s, val, der, a, b
        memset(g, 0, n * n * sizeof(double))
        memset(dg, 0, n * n * n * sizeof(double))
        memset(d2g, 0, n * n * n * n * sizeof(double))
        for t in range(self.ng):
            i = self.g_idx[t, 0]
            j = self.g_idx[t, 1]
            a = self.g_coef[t, 0]
            b = self.g_coef[t, 1]
            th = 0.0
            for k in range(n):
                th += self.g_modes[t, k] * q[k]
            th *= TWO_PI
            c = cos(th)
            s = sin(th)
            val = a * c + b * s
            der = TWO_PI * (-a * s + b * c)
            npair = 1 if i == j else 2
            for pair in range(npair):
                if pair == 0:
                    u = i
                    v = j
                else:
                    u = j
                    v = i
                g[u * n + v] += val
                for k in range(n):
                    if self.g_modes[t, k] != 0.0:
                        dg[(k * n + u) * n + v] += der * self.g_modes[t, k]
                        for l in range(n):
                            if self.g_modes[t, l] != 0.0:
                                d2g[((l * n + k) * n + u) * n + v] -= (
                                    TWO_PI * TWO_PI * self.g_modes[t, k] * self.g_modes[t, l] * val)

    cdef int _geom(self, double* q, int chart, double* G, double* dG, double* d2G,
                   double* S, double* dS) noexcept nogil:
        cdef int n = self.n
        cdef int nn = n * n
        cdef int t, i, j, k, l, kk
        cdef double th, c, s, val, der, a, b
        cdef double g[MAXN * MAXN]
        cdef double dg[MAXN * MAXN * MAXN]
        cdef double d2g[MAXN * MAXN * MAXN * MAXN]
        cdef double t1[MAXN * MAXN]
        cdef double t2[MAXN * MAXN]
        cdef double x, y, rho, aa, sgn, Z, dZ, B, dB, w, s12, ds
        memset(S, 0, nn * sizeof(double))
        memset(dS, 0, n * nn * sizeof(double))
        if self.family == 0:
            memset(dG, 0, n * nn * sizeof(double))
            memset(d2G, 0, n * n * nn * sizeof(double))
            if self.metric_const:
                memcpy(G, self.G0, nn * sizeof(double))
            else:
                self._trig_metric(q, g, dg, d2g)
                if _invert(g, G, n):
                    return 1
                for k in range(n):
                    _matmul(G, dg + k * nn, t1, n)
                    _matmul(t1, G, dG + k * nn, n)
                    for i in range(nn):
                        dG[k * nn + i] = -dG[k * nn + i]
                for l in range(n):
                    for k in range(n):
                        # -(dG_l dg_k G + G d2g_lk G + G dg_k dG_l)
                        _matmul(dG + l * nn, dg + k * nn, t1, n)
                        _matmul(t1, G, t2, n)
                        for i in range(nn):
                            d2G[(l * n + k) * nn + i] = -t2[i]
                        _matmul(G, d2g + (l * n + k) * nn, t1, n)
                        _matmul(t1, G, t2, n)
                        for i in range(nn):
                            d2G[(l * n + k) * nn + i] -= t2[i]
                        _matmul(G, dg + k * nn, t1, n)
                        _matmul(t1, dG + l * nn, t2, n)
                        for i in range(nn):
                            d2G[(l * n + k) * nn + i] -= t2[i]
            for t in range(self.ns):
                i = self.s_idx[t, 0]
                j = self.s_idx[t, 1]
                a = self.s_coef[t, 0]
                b = self.s_coef[t, 1]
                th = 0.0
                for k in range(n):
                    th += self.s_modes[t, k] * q[k]
                th *= TWO_PI
                c = cos(th)
                s = sin(th)
                val = a * c + b * s
                der = TWO_PI * (-a * s + b * c)
                S[i * n + j] += val
                S[j * n + i] -= val
                for k in range(n):
                    if self.s_modes[t, k] != 0.0:
                        dS[(k * n + i) * n + j] += der * self.s_modes[t, k]
                        dS[(k * n + j) * n + i] -= der * self.s_modes[t, k]
            return 0
        # round sphere, stereographic chart (n == 2)
        x = q[0]
        y = q[1]
        rho = x * x + y * y
        aa = 0.25 * (1.0 + rho) * (1.0 + rho)
        G[0] = aa
        G[1] = 0.0
        G[2] = 0.0
        G[3] = aa
        memset(dG, 0, 8 * sizeof(double))
        memset(d2G, 0, 16 * sizeof(double))
        for k in range(2):
            dG[k * 4 + 0] = (1.0 + rho) * q[k]
            dG[k * 4 + 3] = (1.0 + rho) * q[k]
        for l in range(2):
            for k in range(2):
                val = 2.0 * q[l] * q[k]
                if l == k:
                    val += 1.0 + rho
                d2G[(l * 2 + k) * 4 + 0] = val
                d2G[(l * 2 + k) * 4 + 3] = val
        sgn = 1.0 if chart == 0 else -1.0
        Z = sgn * (rho - 1.0) / (rho + 1.0)
        dZ = sgn * 2.0 / ((rho + 1.0) * (rho + 1.0))
        B = 0.0
        dB = 0.0
        for kk in range(self.nz - 1, -1, -1):
            dB = dB * Z + B
            B = B * Z + self.zonal[kk]
        w = 4.0 / ((1.0 + rho) * (1.0 + rho))
        s12 = B * w
        ds = 4.0 * dB * dZ / ((1.0 + rho) * (1.0 + rho)) - 8.0 * B / ((1.0 + rho) * (1.0 + rho) * (1.0 + rho))
        S[1] = s12
        S[2] = -s12
        for k in range(2):
            dS[k * 4 + 1] = 2.0 * ds * q[k]
            dS[k * 4 + 2] = -2.0 * ds * q[k]
        return 0

    # -- vector field ------------------------------------------------------
    cdef int _rhs_jac(self, double* z, int chart, double* F, double* J, bint want_jac) noexcept nogil:
        cdef int n = self.n
        cdef int nn = n * n
        cdef int dim = 2 * n
        cdef int i, j, k, l
        cdef double G[MAXN * MAXN]
        cdef double dG[MAXN * MAXN * MAXN]
        cdef double d2G[MAXN * MAXN * MAXN * MAXN]
        cdef double S[MAXN * MAXN]
        cdef double dS[MAXN * MAXN * MAXN]
        cdef double v[MAXN]
        cdef double w[MAXN]
        cdef double qdot[MAXN]
        cdef double dGp[MAXN * MAXN]
        cdef double dqdp[MAXN * MAXN]
        cdef double dqdq[MAXN * MAXN]
        cdef double Q, f, t, kap, pd2p
        cdef double* p = z + n
        if self._geom(z, chart, G, dG, d2G, S, dS):
            return 1
        kap = self.kappa
        Q = 0.0
        for i in range(n):
            t = 0.0
            for j in range(n):
                t += G[i * n + j] * p[j]
            v[i] = t
            Q += p[i] * t
        f = 1.0 + 4.0 * kap * Q
        for i in range(n):
            qdot[i] = f * v[i]
        for i in range(n):
            for l in range(n):
                t = 0.0
                for j in range(n):
                    t += dG[i * nn + l * n + j] * p[j]
                dGp[i * n + l] = t
            t = 0.0
            for l in range(n):
                t += dGp[i * n + l] * p[l]
            w[i] = t
        for i in range(n):
            t = -0.5 * f * w[i]
            for j in range(n):
                t += S[i * n + j] * qdot[j]
            F[i] = qdot[i]
            F[n + i] = t
        if not want_jac:
            return 0
        for i in range(n):
            for l in range(n):
                dqdp[i * n + l] = f * G[i * n + l] + 8.0 * kap * v[i] * v[l]
                dqdq[i * n + l] = f * dGp[l * n + i] + 4.0 * kap * v[i] * w[l]
        for i in range(n):
            for l in range(n):
                J[i * dim + l] = dqdq[i * n + l]
                J[i * dim + n + l] = dqdp[i * n + l]
                # d pdot_i / d p_l
                t = -0.5 * (8.0 * kap * w[i] * v[l] + 2.0 * f * dGp[i * n + l])
                for j in range(n):
                    t += S[i * n + j] * dqdp[j * n + l]
                J[(n + i) * dim + n + l] = t
                # d pdot_i / d q_l
                pd2p = 0.0
                for j in range(n):
                    for k in range(n):
                        pd2p += p[j] * d2G[(l * n + i) * nn + j * n + k] * p[k]
                t = -0.5 * (4.0 * kap * w[l] * w[i] + f * pd2p)
                for j in range(n):
                    t += dS[(l * n + i) * n + j] * qdot[j] + S[i * n + j] * dqdq[j * n + l]
                J[(n + i) * dim + l] = t
        return 0

    cdef double _energy(self, double* z, int chart) noexcept nogil:
        cdef int n = self.n
        cdef int i, j
        cdef double G[MAXN * MAXN]
        cdef double dG[MAXN * MAXN * MAXN]
        cdef double d2G[MAXN * MAXN * MAXN * MAXN]
        cdef double S[MAXN * MAXN]
        cdef double dS[MAXN * MAXN * MAXN]
        cdef double Q = 0.0
        self._geom(z, chart, G, dG, d2G, S, dS)
        for i in range(n):
            for j in range(n):
                Q += z[n + i] * G[i * n + j] * z[n + j]
        return 0.5 * Q + self.kappa * Q * Q

    # -- charts -------------------------------------------------------------
    cdef void _to_chart(self, double* z, int cfrom, int cto, double* out) noexcept nogil:
        cdef double x, y, r2, u, v, s2, s4, d00, d01, d10, d11
        cdef int i
        if self.family == 0 or cfrom == cto:
            for i in range(self.dim):
                out[i] = z[i]
            return
        x = z[0]
        y = z[1]
        r2 = x * x + y * y
        u = x / r2
        v = -y / r2
        s2 = u * u + v * v
        s4 = s2 * s2
        d00 = (v * v - u * u) / s4
        d01 = -2.0 * u * v / s4
        d10 = 2.0 * u * v / s4
        d11 = (v * v - u * u) / s4
        out[2] = d00 * z[2] + d10 * z[3]
        out[3] = d01 * z[2] + d11 * z[3]
        out[0] = u
        out[1] = v

    cdef void _maybe_switch(self, double* z, int* chart) noexcept nogil:
        cdef double tmp[4]
        cdef int i
        if self.family == 1 and z[0] * z[0] + z[1] * z[1] > 4.0:
            self._to_chart(z, chart[0], 1 - chart[0], tmp)
            for i in range(4):
                z[i] = tmp[i]
            chart[0] = 1 - chart[0]

    # -- implicit midpoint ---------------------------------------------------
    cdef int _midpoint(self, double* z, int chart, double h, double* out) noexcept nogil:
        cdef int dim = self.dim
        cdef int it, i, j
        cdef double F[MAXD]
        cdef double J[MAXD * MAXD]
        cdef double m[MAXD]
        cdef double d[MAXD]
        cdef double dmax, mmax
        if self._rhs_jac(z, chart, F, J, False):
            return 1
        for i in range(dim):
            m[i] = z[i] + 0.5 * h * F[i]
        for it in range(self.max_newton):
            if self._rhs_jac(m, chart, F, J, True):
                return 1
            for i in range(dim):
                d[i] = -(m[i] - z[i] - 0.5 * h * F[i])
                for j in range(dim):
                    J[i * dim + j] = (1.0 if i == j else 0.0) - 0.5 * h * J[i * dim + j]
            if _solve(J, d, dim):
                return 1
            dmax = 0.0
            mmax = 0.0
            for i in range(dim):
                if not isfinite(d[i]):
                    return 1
                m[i] += d[i]
                if fabs(d[i]) > dmax:
                    dmax = fabs(d[i])
                if fabs(m[i]) > mmax:
                    mmax = fabs(m[i])
            if dmax <= self.newton_tol * (1.0 + mmax):
                for i in range(dim):
                    out[i] = 2.0 * m[i] - z[i]
                return 0
        return 1

    cdef int _step(self, double* z, int* chart, double h, double* out) noexcept nogil:
        cdef double half[MAXD]
        cdef int i
        if self._midpoint(z, chart[0], h, out):
            if self._midpoint(z, chart[0], 0.5 * h, half):
                return 1
            if self._midpoint(half, chart[0], 0.5 * h, out):
                return 1
        for i in range(self.dim):
            if not isfinite(out[i]):
                return 1
        self._maybe_switch(out, chart)
        return 0

    cdef double _section(self, double* z, int chart, double* anchor, double* normal,
                         int anchor_chart) noexcept nogil:
        cdef double tmp[MAXD]
        cdef double s = 0.0
        cdef int i
        self._to_chart(z, chart, anchor_chart, tmp)
        for i in range(self.dim):
            s += normal[i] * (tmp[i] - anchor[i])
        return s

    # -- Python-facing API ---------------------------------------------------
    def rhs(self, z, int chart=0):
        cdef double[::1] zz = np.ascontiguousarray(z, dtype=float)
        out = np.zeros(self.dim)
        cdef double[::1] o = out
        cdef double J[MAXD * MAXD]
        if self._rhs_jac(&zz[0], chart, &o[0], J, False):
            raise ArithmeticError("singular metric")
        return out

    def jacobian(self, z, int chart=0):
        cdef double[::1] zz = np.ascontiguousarray(z, dtype=float)
        cdef double F[MAXD]
        out = np.zeros((self.dim, self.dim))
        cdef double[:, ::1] o = out
        if self._rhs_jac(&zz[0], chart, F, &o[0, 0], True):
            raise ArithmeticError("singular metric")
        return out

    def energy(self, z, int chart=0):
        cdef double[::1] zz = np.ascontiguousarray(z, dtype=float)
        return self._energy(&zz[0], chart)

    def to_chart(self, z, int chart_from, int chart_to):
        cdef double[::1] zz = np.ascontiguousarray(z, dtype=float)
        out = np.zeros(self.dim)
        cdef double[::1] o = out
        self._to_chart(&zz[0], chart_from, chart_to, &o[0])
        return out

    def step(self, z, int chart, double h):
        cdef double[::1] zz = np.ascontiguousarray(z, dtype=float)
        out = np.zeros(self.dim)
        cdef double[::1] o = out
        cdef int c = chart
        cdef int bad
        with nogil:
            bad = self._step(&zz[0], &c, h, &o[0])
        if bad:
            return np.asarray(zz).copy(), chart, False
        return out, c, True

    def run(self, z0, int chart0, double h, int nsteps):
        cdef int dim = self.dim
        states = np.zeros((nsteps + 1, dim))
        charts = np.zeros(nsteps + 1, dtype=np.int32)
        cdef double[:, ::1] st = states
        cdef int[::1] ch = charts
        cdef double[::1] zz = np.ascontiguousarray(z0, dtype=float)
        cdef int i, k, c = chart0
        cdef int done = nsteps
        cdef bint ok = True
        cdef double H0, H, drift = 0.0
        for i in range(dim):
            st[0, i] = zz[i]
        ch[0] = c
        with nogil:
            H0 = self._energy(&st[0, 0], c)
            for k in range(1, nsteps + 1):
                if self._step(&st[k - 1, 0], &c, h, &st[k, 0]):
                    ok = False
                    done = k - 1
                    break
                ch[k] = c
                if H0 > 0.0:
                    H = fabs(self._energy(&st[k, 0], c) - H0) / H0
                    if H > drift:
                        drift = H
        if not ok:
            return states[:done + 1], charts[:done + 1], False, drift
        return states, charts, True, drift

    def section_value(self, z, int chart, anchor, normal, int anchor_chart):
        cdef double[::1] zz = np.ascontiguousarray(z, dtype=float)
        cdef double[::1] a = np.ascontiguousarray(anchor, dtype=float)
        cdef double[::1] nv = np.ascontiguousarray(normal, dtype=float)
        return self._section(&zz[0], chart, &a[0], &nv[0], anchor_chart)

    def run_to_section(self, z0, int chart0, double h, long max_steps, anchor, normal,
                       int anchor_chart, long min_steps):
        cdef int dim = self.dim
        cdef double[::1] a = np.ascontiguousarray(anchor, dtype=float)
        cdef double[::1] nv = np.ascontiguousarray(normal, dtype=float)
        cdef double z[MAXD]
        cdef double znew[MAXD]
        cdef double[::1] z0v = np.ascontiguousarray(z0, dtype=float)
        cdef int i, c = chart0, cnew
        cdef long k
        cdef int status = 2
        cdef long kfound = max_steps
        cdef double H0, H, drift = 0.0, s_prev, s_new
        for i in range(dim):
            z[i] = z0v[i]
        with nogil:
            H0 = self._energy(z, c)
            s_prev = self._section(z, c, &a[0], &nv[0], anchor_chart)
            for k in range(1, max_steps + 1):
                cnew = c
                if self._step(z, &cnew, h, znew):
                    status = 1
                    kfound = k
                    break
                if H0 > 0.0:
                    H = fabs(self._energy(znew, cnew) - H0) / H0
                    if H > drift:
                        drift = H
                s_new = self._section(znew, cnew, &a[0], &nv[0], anchor_chart)
                if k >= min_steps and s_prev < 0.0 and s_new >= 0.0:
                    status = 0
                    kfound = k
                    break
                for i in range(dim):
                    z[i] = znew[i]
                c = cnew
                s_prev = s_new
        zout = np.zeros(dim)
        for i in range(dim):
            zout[i] = z[i]
        return status, kfound, zout, c, drift
