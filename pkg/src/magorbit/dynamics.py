"""Charged-particle flow on the cotangent bundle with a magnetic term.

Sign convention: the twisted form is

    omega(u, v) = dp_u . dq_v - dq_u . dp_v + dq_u^T sigma dq_v

and the Hamiltonian field X is defined by ``omega(X, .) = -dH``. In chart
components this gives ``qdot = dH/dp`` and ``pdot = -dH/dq + sigma qdot``.

Besides the metric Hamiltonian ``H = Q/2`` with ``Q = g^{ij} p_i p_j`` an
optional quartic term ``kappa Q^2`` is supported; it is the simplest
fiberwise non-quadratic perturbation and exercises the central projection
in the rescaled fields.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy.linalg import expm

from . import _core
from .errors import ChartEscapeError, IntegrationQualityError, NumericalDegeneracyError
from .geometry import (ChartPoint, MagneticTwoForm, ManifoldModel, MetricField,
                       RoundSphereMetric, TrigMetric, TrigTwoForm, ZonalSphereForm)

SIGN_CONVENTION = "omega(X,.) = -dH; qdot = dH/dp"


@dataclass(frozen=True, eq=False)
class PhasePoint:
    base: ChartPoint
    momentum: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "momentum", np.asarray(self.momentum, dtype=float).copy())

    @property
    def state(self) -> np.ndarray:
        return np.concatenate([self.base.coords, self.momentum])

    @classmethod
    def from_state(cls, z, chart_id=0):
        z = np.asarray(z, dtype=float)
        n = z.shape[0] // 2
        return cls(ChartPoint(chart_id, z[:n]), z[n:])

    def __repr__(self):
        return f"PhasePoint({self.base!r}, {self.momentum.tolist()})"


@dataclass(frozen=True, eq=False)
class SphereBundlePoint:
    """Point of the unit level ``{g^{ij} u_i u_j = 1}``."""

    base: ChartPoint
    direction: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "direction", np.asarray(self.direction, dtype=float).copy())


@dataclass(frozen=True)
class IntegratorConfig:
    step: float = 1e-3
    drift_budget: float = 1e-6
    max_newton_iter: int = 20
    newton_tol: float = 1e-12

    def __post_init__(self):
        if not self.step > 0 or not self.drift_budget > 0 or not self.newton_tol > 0:
            raise ValueError("integrator step, drift budget and Newton tolerance must be > 0")
        if self.max_newton_iter < 1:
            raise ValueError("max_newton_iter must be >= 1")


class MagneticSystem:
    """Metric, magnetic form and (optional) quartic coefficient on a manifold."""

    sign_convention = SIGN_CONVENTION

    def __init__(self, manifold: ManifoldModel, metric: MetricField, sigma: MagneticTwoForm,
                 kappa: float = 0.0, name: str = ""):
        if metric.dim != manifold.dim or sigma.dim != manifold.dim:
            raise ValueError("metric, form and manifold dimensions differ")
        self.manifold = manifold
        self.metric = metric
        self.sigma = sigma
        self.kappa = float(kappa)
        self.name = name or manifold.name
        self._kernels = {}
        self._lock = threading.Lock()

    @property
    def dim(self) -> int:
        return self.manifold.dim

    def __repr__(self):
        return f"MagneticSystem({self.name!r})"

    def kernel_arguments(self):
        n = self.dim
        empty = (np.zeros((0, 2), np.int32), np.zeros((0, n)), np.zeros((0, 2)))
        if self.manifold.kind == "torus":
            gt, st = self.metric.kernel_terms(), self.sigma.kernel_terms()
            if not isinstance(gt, tuple) or not isinstance(st, tuple) or isinstance(st[0], str):
                raise TypeError("torus integration needs trigonometric metric and form")
            return (0, n) + gt + st + (np.zeros(0),)
        if not isinstance(self.metric, RoundSphereMetric) or not isinstance(self.sigma, ZonalSphereForm):
            raise TypeError("sphere integration needs the round metric and a zonal form")
        return (1, 2) + empty + empty + (self.sigma.coefficients,)

    def kernel(self, newton_tol: float = 1e-12, max_newton: int = 20):
        key = (float(newton_tol), int(max_newton), _core.BACKEND)
        with self._lock:
            k = self._kernels.get(key)
            if k is None:
                k = _core.FieldKernel(*self.kernel_arguments(), kappa=self.kappa,
                                      newton_tol=newton_tol, max_newton=max_newton)
                self._kernels[key] = k
        return k

    def scaled(self, c: float) -> "MagneticSystem":
        return MagneticSystem(self.manifold, self.metric, self.sigma.scaled(c), self.kappa,
                              f"{self.name}*{c:g}")

    def to_chart(self, x: PhasePoint, j: int) -> PhasePoint:
        """Same cotangent vector in chart ``j``: ``p' = (d x / d x')^T p``."""
        i = x.base.chart_id
        y = self.manifold.transition(x.base.coords, i, j)
        back = self.manifold.transition_jacobian(y, j, i)
        return PhasePoint(ChartPoint(j, y), back.T @ x.momentum)


# -- pointwise quantities --------------------------------------------------------

def _inverse_metric_and_grad(sys: MagneticSystem, q: ChartPoint):
    G = sys.metric.inverse(q)
    dg = sys.metric.grad(q)
    dG = np.stack([-G @ dg[:, :, k] @ G for k in range(sys.dim)])   # [k, i, j]
    return G, dG


def hamiltonian(sys: MagneticSystem, x: PhasePoint) -> float:
    G = sys.metric.inverse(x.base)
    Q = float(x.momentum @ G @ x.momentum)
    return 0.5 * Q + sys.kappa * Q * Q


def hamiltonian_gradient(sys: MagneticSystem, x: PhasePoint) -> np.ndarray:
    """``(dH/dq, dH/dp)`` from the analytic metric gradient."""
    p = x.momentum
    G, dG = _inverse_metric_and_grad(sys, x.base)
    f = 1.0 + 4.0 * sys.kappa * float(p @ G @ p)
    dq = 0.5 * f * np.array([p @ dG[k] @ p for k in range(sys.dim)])
    return np.concatenate([dq, f * (G @ p)])


def twisted_form_matrix(sys: MagneticSystem, q: ChartPoint) -> np.ndarray:
    """Matrix ``W`` with ``omega(u, v) = u^T W v`` for ``u = (dq, dp)``."""
    n = sys.dim
    W = np.zeros((2 * n, 2 * n))
    W[:n, :n] = sys.sigma.eval(q)
    W[:n, n:] = -np.eye(n)
    W[n:, :n] = np.eye(n)
    return W


def twisted_form_eval(sys: MagneticSystem, x: PhasePoint, u, v) -> float:
    return float(np.asarray(u, float) @ twisted_form_matrix(sys, x.base) @ np.asarray(v, float))


def hamiltonian_vector_field(sys: MagneticSystem, x: PhasePoint) -> np.ndarray:
    """Solve ``omega(X, .) = -dH`` for ``X = (dq, dp)``."""
    W = twisted_form_matrix(sys, x.base)
    dH = hamiltonian_gradient(sys, x)
    try:
        return np.linalg.solve(W.T, -dH)
    except np.linalg.LinAlgError:
        raise NumericalDegeneracyError(f"twisted form singular at {x!r}") from None


# -- trajectories --------------------------------------------------------------

@dataclass
class Trajectory:
    """Sampled flow. For tori ``states`` are universal-cover coordinates;
    ``wrapped`` maps them to the fundamental domain. ``chart_switches`` lists
    ``(index, from, to)`` for sphere chart changes, and for tori the crossings
    of a fundamental-domain face as ``(index, from_cell, to_cell)``."""

    times: np.ndarray
    states: np.ndarray
    charts: np.ndarray
    energy_log: np.ndarray
    chart_switches: list
    dim: int

    @property
    def max_drift(self) -> float:
        H0 = self.energy_log[0]
        if H0 == 0.0:
            return float(np.max(np.abs(self.energy_log)))
        return float(np.max(np.abs(self.energy_log - H0)) / abs(H0))

    def point(self, k: int) -> PhasePoint:
        return PhasePoint.from_state(self.states[k], int(self.charts[k]))

    def wrapped(self, manifold: ManifoldModel) -> List[PhasePoint]:
        out = []
        for z, c in zip(self.states, self.charts):
            x = PhasePoint.from_state(z, int(c))
            out.append(PhasePoint(manifold.normalize(x.base), x.momentum)
                       if manifold.kind == "torus" else x)
        return out

    @property
    def final(self) -> PhasePoint:
        return self.point(len(self.times) - 1)


def integrate(sys: MagneticSystem, x0: PhasePoint, T: float,
              cfg: IntegratorConfig = IntegratorConfig()) -> Trajectory:
    """Implicit-midpoint flow for time ``T`` (negative ``T`` runs backward).

    The step is shrunk slightly so that a whole number of steps lands on ``T``.
    """
    if T == 0 or not math.isfinite(T):
        raise ValueError("integration time must be finite and nonzero")
    nsteps = max(1, int(math.ceil(abs(T) / cfg.step - 1e-9)))
    h = T / nsteps
    kern = sys.kernel(cfg.newton_tol, cfg.max_newton_iter)
    states, charts, ok, _ = kern.run(x0.state, x0.base.chart_id, h, nsteps)
    states = np.asarray(states)
    charts = np.asarray(charts)
    if not ok:
        k = len(states) - 1
        if not np.all(np.isfinite(states[k])):
            raise ChartEscapeError(f"state left the chart domains near step {k}")
        raise IntegrationQualityError(f"implicit midpoint Newton failed at step {k + 1} "
                                      f"(t = {(k + 1) * h:.6g}) even after halving")
    energy = np.array([kern.energy(z, int(c)) for z, c in zip(states, charts)])
    times = h * np.arange(nsteps + 1)
    traj = Trajectory(times, states, charts, energy, _switch_events(sys.manifold, states, charts),
                      sys.dim)
    drift = traj.max_drift
    if drift > cfg.drift_budget:
        worst = int(np.argmax(np.abs(energy - energy[0])))
        raise IntegrationQualityError(f"relative energy drift {drift:.3e} exceeds budget "
                                      f"{cfg.drift_budget:.1e}; worst at step {worst}")
    return traj


def _switch_events(manifold, states, charts):
    if manifold.kind == "torus":
        cells = np.floor(states[:, :manifold.dim]).astype(int)
        changed = np.flatnonzero(np.any(cells[1:] != cells[:-1], axis=1)) + 1
        return [(int(k), tuple(cells[k - 1].tolist()), tuple(cells[k].tolist())) for k in changed]
    changed = np.flatnonzero(charts[1:] != charts[:-1]) + 1
    return [(int(k), int(charts[k - 1]), int(charts[k])) for k in changed]


# -- rescaling near the zero section -----------------------------------------------

def unit_level_residual(sys: MagneticSystem, y: SphereBundlePoint) -> float:
    G = sys.metric.inverse(y.base)
    return float(y.direction @ G @ y.direction) - 1.0


def normalize_direction(sys: MagneticSystem, base: ChartPoint, u) -> SphereBundlePoint:
    G = sys.metric.inverse(base)
    u = np.asarray(u, dtype=float)
    return SphereBundlePoint(base, u / math.sqrt(float(u @ G @ u)))


def _level_radius(sys: MagneticSystem, eps: float, Q: float) -> float:
    """``r`` with ``H(q, eps r u) / eps^2 = 1/2`` for ``g^{ij}u_iu_j = Q``."""
    c = sys.kappa * eps * eps * Q * Q
    if c == 0.0:
        return 1.0 / math.sqrt(Q)
    # c r^4 + (Q/2) r^2 - 1/2 = 0, positive root in r^2
    s = (-0.5 * Q + math.sqrt(0.25 * Q * Q + 2.0 * c)) / (2.0 * c)
    return math.sqrt(s)


def rescaled_field(sys: MagneticSystem, eps: float, y: SphereBundlePoint) -> np.ndarray:
    """Blown-up Hamiltonian field on the unit level at scale ``eps``.

    The point is moved radially onto ``{H(q, eps u) = eps^2 / 2}`` (central
    projection), the Hamiltonian field there is pulled back by the dilation
    ``u -> eps u``, and the result is pushed back to the unit level by the
    radial projection. Base component is ``O(eps)``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    q, u = y.base, y.direction
    G, dG = _inverse_metric_and_grad(sys, q)
    Q = float(u @ G @ u)
    r = _level_radius(sys, eps, Q)
    x = PhasePoint(q, eps * r * u)
    X = hamiltonian_vector_field(sys, x)
    n = sys.dim
    pulled = np.concatenate([X[:n], X[n:] / eps])
    # differential of the radial projection w -> w / sqrt(Q(w)) at w = r u
    ru = r * u
    Qr = float(ru @ G @ ru)
    dq, du = pulled[:n], pulled[n:]
    dQ = 2.0 * float(ru @ G @ du) + float(ru @ np.tensordot(dq, dG, axes=1) @ ru)
    s = 1.0 / math.sqrt(Qr)
    return np.concatenate([dq, s * du - 0.5 * s ** 3 * dQ * ru])


def limit_field(sys: MagneticSystem, y: SphereBundlePoint) -> np.ndarray:
    """Fiberwise rotation ``udot = sigma g^{-1} u`` with zero base component."""
    G = sys.metric.inverse(y.base)
    S = sys.sigma.eval(y.base)
    return np.concatenate([np.zeros(sys.dim), S @ G @ y.direction])


def limit_generator(sys: MagneticSystem, q: ChartPoint) -> np.ndarray:
    return sys.sigma.eval(q) @ sys.metric.inverse(q)


def limit_flow(sys: MagneticSystem, y: SphereBundlePoint, t: float) -> SphereBundlePoint:
    return SphereBundlePoint(y.base, expm(t * limit_generator(sys, y.base)) @ y.direction)


def limit_period(sys: MagneticSystem, q: ChartPoint) -> float:
    """``2 pi / lambda_1`` with ``lambda_1`` the largest skew-eigenvalue modulus."""
    lam = np.max(np.abs(np.linalg.eigvals(limit_generator(sys, q)).imag))
    if lam <= 0.0:
        raise NumericalDegeneracyError(f"magnetic form vanishes at {q!r}")
    return 2.0 * math.pi / lam


def level_tangent_basis(sys: MagneticSystem, y: SphereBundlePoint) -> np.ndarray:
    """Orthonormal (Euclidean) basis of the tangent space of the unit level, as columns."""
    G, dG = _inverse_metric_and_grad(sys, y.base)
    u = y.direction
    grad = np.concatenate([np.array([u @ dG[k] @ u for k in range(sys.dim)]), 2.0 * G @ u])
    _, _, vt = np.linalg.svd(grad[None, :])
    return vt[1:].T


@dataclass
class ProbeFit:
    eps: np.ndarray
    c0: np.ndarray
    c1: np.ndarray
    c0_slope: Optional[float]
    c1_slope: Optional[float]
    c0_status: str
    c1_status: str

    def as_dict(self):
        return {
            "eps": self.eps.tolist(), "c0": self.c0.tolist(), "c1": self.c1.tolist(),
            "c0_slope": self.c0_slope, "c1_slope": self.c1_slope,
            "c0_status": self.c0_status, "c1_status": self.c1_status,
        }


def _difference(sys, eps, base, u):
    y = normalize_direction(sys, base, u)
    return rescaled_field(sys, eps, y) - limit_field(sys, y)


def _slope(eps, vals):
    if np.any(vals == 0.0):
        return None, "exact agreement"
    return float(np.polyfit(np.log(eps), np.log(vals), 1)[0]), "fit"


def convergence_probe(sys: MagneticSystem, eps_list: Sequence[float],
                      sample: Sequence[SphereBundlePoint], fd_step: float = 1e-5) -> ProbeFit:
    """Sup-norm of ``X_eps - X_0`` (C0) and of its derivative along the level (C1)."""
    eps = np.asarray(eps_list, dtype=float)
    if eps.size < 3 or np.any(np.diff(eps) >= 0) or np.any(eps <= 0):
        raise ValueError("eps_list must be positive, strictly decreasing, with >= 3 values")
    if not len(sample):
        raise ValueError("sample is empty")
    n = sys.dim
    c0 = np.zeros(eps.size)
    c1 = np.zeros(eps.size)
    for y in sample:
        basis = level_tangent_basis(sys, y)
        z = np.concatenate([y.base.coords, y.direction])
        for a, e in enumerate(eps):
            d0 = _difference(sys, e, y.base, y.direction)
            c0[a] = max(c0[a], float(np.max(np.abs(d0))))
            for col in basis.T:
                zp, zm = z + fd_step * col, z - fd_step * col
                dp = _difference(sys, e, ChartPoint(y.base.chart_id, zp[:n]), zp[n:])
                dm = _difference(sys, e, ChartPoint(y.base.chart_id, zm[:n]), zm[n:])
                c1[a] = max(c1[a], float(np.max(np.abs(dp - dm))) / (2 * fd_step))
    s0, st0 = _slope(eps, c0)
    s1, st1 = _slope(eps, c1)
    return ProbeFit(eps, c0, c1, s0, s1, st0, st1)


# -- common systems -----------------------------------------------------------------

def flat_torus_system(n: int, sigma: TrigTwoForm, kappa: float = 0.0, name: str = "") -> MagneticSystem:
    from .geometry import flat_torus
    return MagneticSystem(flat_torus(n), TrigMetric.flat(n), sigma, kappa, name)


def sphere_system(coefficients=(1.0, 0.3), kappa: float = 0.0, name: str = "") -> MagneticSystem:
    from .geometry import round_sphere
    return MagneticSystem(round_sphere(), RoundSphereMetric(), ZonalSphereForm(coefficients),
                          kappa, name)
