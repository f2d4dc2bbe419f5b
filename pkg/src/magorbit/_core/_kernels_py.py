"""Pure-Python implementation of the integration kernels.

Mirrors ``_kernels.pyx`` line for line so the two backends can be checked
against each other. Only the field families that have a compact coefficient
encoding are supported:

* family 0: trigonometric polynomials on the flat cover of the n-torus,
* family 1: zonal two-forms on the round unit sphere in stereographic charts.

State vectors are ``z = (q_1..q_n, p_1..p_n)``.
"""

import math

import numpy as np

TWO_PI = 2.0 * math.pi

FOUND = 0
NEWTON_FAILED = 1
NO_RETURN = 2
NOT_FINITE = 3


def _solve(a, b):
    """Gaussian elimination with partial pivoting; returns None if singular."""
    a = a.copy()
    b = b.copy()
    m = b.shape[0]
    for c in range(m):
        piv = c + int(np.argmax(np.abs(a[c:, c])))
        if abs(a[piv, c]) < 1e-300:
            return None
        if piv != c:
            a[[c, piv]] = a[[piv, c]]
            b[[c, piv]] = b[[piv, c]]
        for r in range(c + 1, m):
            f = a[r, c] / a[c, c]
            if f != 0.0:
                a[r, c:] -= f * a[c, c:]
                b[r] -= f * b[c]
    x = np.zeros(m)
    for r in range(m - 1, -1, -1):
        x[r] = (b[r] - a[r, r + 1:] @ x[r + 1:]) / a[r, r]
    return x


class FieldKernel:
    def __init__(self, family, n, g_idx, g_modes, g_coef, s_idx, s_modes,
                 s_coef, zonal, kappa=0.0, newton_tol=1e-12, max_newton=20):
        self.family = int(family)
        self.n = int(n)
        self.dim = 2 * self.n
        self.g_idx = np.asarray(g_idx, dtype=np.int32).reshape(-1, 2)
        self.g_modes = np.asarray(g_modes, dtype=float).reshape(-1, self.n)
        self.g_coef = np.asarray(g_coef, dtype=float).reshape(-1, 2)
        self.s_idx = np.asarray(s_idx, dtype=np.int32).reshape(-1, 2)
        self.s_modes = np.asarray(s_modes, dtype=float).reshape(-1, self.n)
        self.s_coef = np.asarray(s_coef, dtype=float).reshape(-1, 2)
        self.zonal = np.asarray(zonal, dtype=float).ravel()
        self.kappa = float(kappa)
        self.newton_tol = float(newton_tol)
        self.max_newton = int(max_newton)
        if self.family == 1 and self.n != 2:
            raise ValueError("sphere family requires n == 2")
        self.metric_const = self.family == 0 and not np.any(self.g_modes)
        if self.metric_const:
            g, _, _ = self._trig_metric(np.zeros(self.n))
            self._G0 = np.linalg.inv(g)

    # -- geometry ----------------------------------------------------------
    def _trig_metric(self, q):
        n = self.n
        g = np.zeros((n, n))
        dg = np.zeros((n, n, n))        # [k, i, j]
        d2g = np.zeros((n, n, n, n))    # [l, k, i, j]
        for t in range(self.g_idx.shape[0]):
            i, j = int(self.g_idx[t, 0]), int(self.g_idx[t, 1])
            m = self.g_modes[t]
            a, b = self.g_coef[t]
            th = TWO_PI * float(m @ q)
            c, s = math.cos(th), math.sin(th)
            val = a * c + b * s
            der = TWO_PI * (-a * s + b * c)
            for (u, v) in ((i, j), (j, i)) if i != j else ((i, j),):
                g[u, v] += val
                for k in range(n):
                    if m[k] != 0.0:
                        dg[k, u, v] += der * m[k]
                        for l in range(n):
                            if m[l] != 0.0:
                                d2g[l, k, u, v] -= TWO_PI * TWO_PI * m[k] * m[l] * val
        return g, dg, d2g

    def _geom(self, q, chart):
        """Inverse metric and its derivatives, sigma and its derivatives."""
        n = self.n
        if self.family == 0:
            if self.metric_const:
                G = self._G0
                dG = np.zeros((n, n, n))
                d2G = np.zeros((n, n, n, n))
            else:
                g, dg, d2g = self._trig_metric(q)
                G = np.linalg.inv(g)
                dG = np.zeros((n, n, n))
                for k in range(n):
                    dG[k] = -G @ dg[k] @ G
                d2G = np.zeros((n, n, n, n))
                for l in range(n):
                    for k in range(n):
                        d2G[l, k] = -(dG[l] @ dg[k] @ G + G @ d2g[l, k] @ G
                                      + G @ dg[k] @ dG[l])
            S = np.zeros((n, n))
            dS = np.zeros((n, n, n))
            for t in range(self.s_idx.shape[0]):
                i, j = int(self.s_idx[t, 0]), int(self.s_idx[t, 1])
                m = self.s_modes[t]
                a, b = self.s_coef[t]
                th = TWO_PI * float(m @ q)
                c, s = math.cos(th), math.sin(th)
                val = a * c + b * s
                der = TWO_PI * (-a * s + b * c)
                S[i, j] += val
                S[j, i] -= val
                for k in range(n):
                    if m[k] != 0.0:
                        dS[k, i, j] += der * m[k]
                        dS[k, j, i] -= der * m[k]
            return G, dG, d2G, S, dS
        # round sphere, stereographic chart
        x, y = float(q[0]), float(q[1])
        rho = x * x + y * y
        a = 0.25 * (1.0 + rho) ** 2
        da = ((1.0 + rho) * x, (1.0 + rho) * y)
        G = np.array([[a, 0.0], [0.0, a]])
        dG = np.zeros((2, 2, 2))
        d2G = np.zeros((2, 2, 2, 2))
        for k in range(2):
            dG[k, 0, 0] = dG[k, 1, 1] = da[k]
        for l in range(2):
            for k in range(2):
                v = 2.0 * q[l] * q[k] + ((1.0 + rho) if l == k else 0.0)
                d2G[l, k, 0, 0] = d2G[l, k, 1, 1] = v
        sgn = 1.0 if chart == 0 else -1.0
        Z = sgn * (rho - 1.0) / (rho + 1.0)
        dZ = sgn * 2.0 / (rho + 1.0) ** 2
        B = 0.0
        dB = 0.0
        for kk in range(self.zonal.shape[0] - 1, -1, -1):
            dB = dB * Z + B
            B = B * Z + self.zonal[kk]
        w = 4.0 / (1.0 + rho) ** 2
        s12 = B * w
        ds = 4.0 * dB * dZ / (1.0 + rho) ** 2 - 8.0 * B / (1.0 + rho) ** 3
        S = np.array([[0.0, s12], [-s12, 0.0]])
        dS = np.zeros((2, 2, 2))
        for k in range(2):
            dS[k, 0, 1] = 2.0 * ds * q[k]
            dS[k, 1, 0] = -dS[k, 0, 1]
        return G, dG, d2G, S, dS

    # -- vector field --------------------------------------------------------
    def _rhs_jac(self, z, chart, want_jac):
        n = self.n
        q = z[:n]
        p = z[n:]
        G, dG, d2G, S, dS = self._geom(q, chart)
        v = G @ p
        Q = float(p @ v)
        f = 1.0 + 4.0 * self.kappa * Q
        qdot = f * v
        dGp = np.array([dG[i] @ p for i in range(n)])      # [i, :] = dG_i p
        w = dGp @ p
        pdot = -0.5 * f * w + S @ qdot
        F = np.concatenate([qdot, pdot])
        if not want_jac:
            return F, None
        kap = self.kappa
        J = np.zeros((2 * n, 2 * n))
        dqdp = f * G + 8.0 * kap * np.outer(v, v)
        dqdq = f * dGp.T + 4.0 * kap * np.outer(v, w)
        pd2p = np.zeros((n, n))                              # [k, i] = p d2G_ki p
        for k in range(n):
            for i in range(n):
                pd2p[k, i] = p @ d2G[k, i] @ p
        dpdp = -0.5 * (8.0 * kap * np.outer(w, v) + 2.0 * f * dGp) + S @ dqdp
        dpdq = (-0.5 * (4.0 * kap * np.outer(w, w) + f * pd2p.T)
                + np.einsum("kij,j->ik", dS, qdot) + S @ dqdq)
        J[:n, :n] = dqdq
        J[:n, n:] = dqdp
        J[n:, :n] = dpdq
        J[n:, n:] = dpdp
        return F, J

    def rhs(self, z, chart=0):
        return self._rhs_jac(np.asarray(z, dtype=float), int(chart), False)[0]

    def jacobian(self, z, chart=0):
        return self._rhs_jac(np.asarray(z, dtype=float), int(chart), True)[1]

    def energy(self, z, chart=0):
        z = np.asarray(z, dtype=float)
        n = self.n
        G = self._geom(z[:n], int(chart))[0]
        Q = float(z[n:] @ G @ z[n:])
        return 0.5 * Q + self.kappa * Q * Q

    # -- charts --------------------------------------------------------------
    def to_chart(self, z, chart_from, chart_to):
        z = np.array(z, dtype=float)
        if self.family == 0 or chart_from == chart_to:
            return z
        x, y = z[0], z[1]
        r2 = x * x + y * y
        u, v = x / r2, -y / r2
        s2 = u * u + v * v
        s4 = s2 * s2
        D = np.array([[v * v - u * u, -2.0 * u * v],
                      [2.0 * u * v, v * v - u * u]]) / s4
        return np.concatenate([[u, v], D.T @ z[2:]])

    def _maybe_switch(self, z, chart):
        if self.family == 1 and z[0] * z[0] + z[1] * z[1] > 4.0:
            return self.to_chart(z, chart, 1 - chart), 1 - chart
        return z, chart

    # -- implicit midpoint -----------------------------------------------------
    def _midpoint(self, z, chart, h):
        dim = self.dim
        F0, _ = self._rhs_jac(z, chart, False)
        m = z + 0.5 * h * F0
        for _ in range(self.max_newton):
            F, J = self._rhs_jac(m, chart, True)
            R = m - z - 0.5 * h * F
            A = np.eye(dim) - 0.5 * h * J
            d = _solve(A, -R)
            if d is None or not np.all(np.isfinite(d)):
                return None
            m = m + d
            if np.max(np.abs(d)) <= self.newton_tol * (1.0 + np.max(np.abs(m))):
                return 2.0 * m - z
        return None

    def step(self, z, chart, h):
        z = np.asarray(z, dtype=float)
        chart = int(chart)
        out = self._midpoint(z, chart, h)
        if out is None:
            half = self._midpoint(z, chart, 0.5 * h)
            if half is not None:
                out = self._midpoint(half, chart, 0.5 * h)
        if out is None or not np.all(np.isfinite(out)):
            return z, chart, False
        out, chart = self._maybe_switch(out, chart)
        return out, chart, True

    def run(self, z0, chart0, h, nsteps):
        z = np.array(z0, dtype=float)
        chart = int(chart0)
        states = np.zeros((nsteps + 1, self.dim))
        charts = np.zeros(nsteps + 1, dtype=np.int32)
        states[0] = z
        charts[0] = chart
        H0 = self.energy(z, chart)
        drift = 0.0
        for k in range(1, nsteps + 1):
            z, chart, ok = self.step(z, chart, h)
            if not ok:
                return states[:k], charts[:k], False, drift
            states[k] = z
            charts[k] = chart
            if H0 > 0.0:
                drift = max(drift, abs(self.energy(z, chart) - H0) / H0)
        return states, charts, True, drift

    def section_value(self, z, chart, anchor, normal, anchor_chart):
        zz = self.to_chart(z, chart, anchor_chart)
        return float(np.dot(normal, zz - anchor))

    def run_to_section(self, z0, chart0, h, max_steps, anchor, normal,
                       anchor_chart, min_steps):
        """Step until the section function crosses zero from below.

        Returns ``(status, k, z_prev, chart_prev, drift)`` where the crossing
        lies inside step ``k`` taken from ``z_prev``.
        """
        z = np.array(z0, dtype=float)
        chart = int(chart0)
        anchor = np.asarray(anchor, dtype=float)
        normal = np.asarray(normal, dtype=float)
        H0 = self.energy(z, chart)
        drift = 0.0
        s_prev = self.section_value(z, chart, anchor, normal, anchor_chart)
        for k in range(1, max_steps + 1):
            z_new, chart_new, ok = self.step(z, chart, h)
            if not ok:
                return NEWTON_FAILED, k, z, chart, drift
            if not np.all(np.isfinite(z_new)):
                return NOT_FINITE, k, z, chart, drift
            if H0 > 0.0:
                drift = max(drift, abs(self.energy(z_new, chart_new) - H0) / H0)
            s_new = self.section_value(z_new, chart_new, anchor, normal, anchor_chart)
            if k >= min_steps and s_prev < 0.0 <= s_new:
                return FOUND, k, z, chart, drift
            z, chart, s_prev = z_new, chart_new, s_new
        return NO_RETURN, max_steps, z, chart, drift
