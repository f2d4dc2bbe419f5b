"""Periodic orbits on low energy levels by Poincare-section Newton shooting.

Seeds are fiber-like: a short momentum of fixed energy over a base point,
with the base shifted so that the base point is the expected gyration
center. Each Newton iterate re-anchors the section at the current point:

* ``nu``: unit flow direction at the anchor (section normal),
* ``d``: fiber direction ``(0, p)`` made orthogonal to ``nu``; points are
  pulled back to the energy level along ``d``,
* ``E``: orthonormal basis of the complement of ``nu`` and ``d``; these are
  the section coordinates.

The return map is evaluated by integrating until the section function
crosses zero upward, then locating the crossing inside the last step with a
root find on the step length.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq, minimize_scalar

from . import _core
from .dynamics import IntegratorConfig, MagneticSystem, PhasePoint
from .errors import (FloquetConditioningError, IntegrationQualityError, MagorbitError,
                     NoReturnError, NumericalDegeneracyError, SectionQualityError,
                     ShootingError, WindingClassificationError)
from .geometry import ChartPoint, ManifoldModel

LOOP_SAMPLES = 128


@dataclass(frozen=True)
class ShootingConfig:
    integrator: IntegratorConfig = IntegratorConfig()
    max_iter: int = 30
    converge_tol: float = 1e-10
    accept_tol: float = 1e-8
    degenerate_tol: float = 1e-7
    fd_scale: float = 1e-6
    max_time_factor: float = 3.0
    min_time_fraction: float = 0.25
    divergence_steps: int = 3
    transversality_tol: float = 1e-6
    floquet_tol: float = 1e-4
    fiber_diameter_max: float = 0.9

    def __post_init__(self):
        for name in ("converge_tol", "accept_tol", "degenerate_tol", "fd_scale", "max_time_factor",
                     "min_time_fraction", "transversality_tol", "floquet_tol", "fiber_diameter_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.max_iter < 1 or self.divergence_steps < 1:
            raise ValueError("max_iter and divergence_steps must be >= 1")


@dataclass(frozen=True, eq=False)
class SectionSpec:
    anchor: PhasePoint
    normal: np.ndarray
    energy: float
    fiber: np.ndarray
    basis: np.ndarray

    @property
    def chart(self) -> int:
        return self.anchor.base.chart_id


@dataclass(frozen=True, eq=False)
class Seed:
    index: int
    point: PhasePoint
    period_guess: float
    grid_point: ChartPoint
    phase: float
    energy: float
    warning: Optional[str] = None


@dataclass
class FloquetData:
    multipliers: np.ndarray
    min_distance_to_one: float
    nondegenerate: bool
    tol: float
    reciprocal_residual: float
    determinant: complex

    def as_dict(self):
        return {
            "multipliers": [[float(m.real), float(m.imag)] for m in self.multipliers],
            "min_distance_to_one": self.min_distance_to_one,
            "nondegenerate": self.nondegenerate,
            "tol": self.tol,
            "reciprocal_residual": self.reciprocal_residual,
            "determinant": [float(self.determinant.real), float(self.determinant.imag)],
        }


@dataclass
class PeriodicOrbit:
    start: PhasePoint
    period: float
    energy: float
    loop: np.ndarray
    loop_chart: int
    projection_center: ChartPoint
    projection_diameter: float
    fiber_winding: Optional[int]
    closure_residual: float
    energy_drift: float
    seed_index: int = -1
    iterations: int = 0
    section_jacobian: Optional[np.ndarray] = field(default=None, repr=False)
    floquet: Optional[FloquetData] = None
    winding_note: Optional[str] = None

    @property
    def dim(self) -> int:
        return self.loop.shape[1] // 2

    def as_record(self) -> dict:
        return {
            "seed_index": self.seed_index,
            "energy": self.energy,
            "period": self.period,
            "chart": self.start.base.chart_id,
            "start_base": self.start.base.coords.tolist(),
            "start_momentum": self.start.momentum.tolist(),
            "projection_center": self.projection_center.coords.tolist(),
            "projection_center_chart": self.projection_center.chart_id,
            "projection_diameter": self.projection_diameter,
            "fiber_winding": self.fiber_winding,
            "winding_note": self.winding_note,
            "closure_residual": self.closure_residual,
            "energy_drift": self.energy_drift,
            "newton_iterations": self.iterations,
            "floquet": None if self.floquet is None else self.floquet.as_dict(),
        }


# -- seeds -------------------------------------------------------------------------

def seed_grid(manifold: ManifoldModel, resolution: int) -> List[ChartPoint]:
    """Nested grids: refining ``resolution`` by an integer factor keeps all points.

    Torus: the lattice ``i / N`` in every axis. Sphere: latitudes ``j pi / N``
    with ``2N`` longitudes, the poles as single points.
    """
    N = int(resolution)
    if N < 1:
        raise ValueError("grid resolution must be >= 1")
    if manifold.kind == "torus":
        axes = np.meshgrid(*[np.arange(N) / N] * manifold.dim, indexing="ij")
        pts = np.stack([a.ravel() for a in axes], axis=1)
        return [ChartPoint(0, p) for p in pts]
    out = [manifold.from_embedding((0.0, 0.0, 1.0))]
    for j in range(1, N):
        th = math.pi * j / N
        for k in range(2 * N):
            ph = math.pi * k / N
            out.append(manifold.from_embedding((math.sin(th) * math.cos(ph),
                                                math.sin(th) * math.sin(ph), math.cos(th))))
    out.append(manifold.from_embedding((0.0, 0.0, -1.0)))
    return out


def _momentum_norm(sys: MagneticSystem, eps: float) -> float:
    """``|p|_g`` with ``H = eps``."""
    if sys.kappa == 0.0:
        return math.sqrt(2.0 * eps)
    # Q/2 + kappa Q^2 = eps
    Q = (-0.5 + math.sqrt(0.25 + 4.0 * sys.kappa * eps)) / (2.0 * sys.kappa)
    return math.sqrt(Q)


def _rotation_plane(sys: MagneticSystem, q: ChartPoint):
    """Real invariant plane of ``sigma g^{-1}`` for its largest rotation rate,
    as two covectors orthonormal for ``g^{-1}``; also that rate."""
    G = sys.metric.inverse(q)
    Y = sys.sigma.eval(q) @ G
    w, V = np.linalg.eig(Y)
    k = int(np.argmax(w.imag))
    lam = float(w[k].imag)
    if lam <= 1e-12:
        raise NumericalDegeneracyError(f"no magnetic rotation at {q!r}")
    a, b = V[:, k].real, V[:, k].imag
    # Gram-Schmidt in the g^{-1} inner product
    a = a / math.sqrt(a @ G @ a)
    b = b - (a @ G @ b) * a
    b = b / math.sqrt(b @ G @ b)
    return a, b, lam


def seed_orbits(sys: MagneticSystem, eps: float, grid: Sequence[ChartPoint], phases: int = 1,
                compat_tol: float = 1e-2) -> List[Seed]:
    """One seed per (grid point, fiber phase), on ``{H = eps}``.

    The momentum lies in the fastest rotation plane of the limit field; the
    base is displaced by ``sigma^{-1} p`` so the grid point is the gyration
    center to leading order. Incompatible points get a warning flag and the
    period guess ``2 pi / lambda_1``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    norm = _momentum_norm(sys, eps)
    seeds = []
    for q in grid:
        a, b, lam = _rotation_plane(sys, q)
        S = sys.sigma.eval(q)
        Y = S @ sys.metric.inverse(q)
        rates = np.abs(np.linalg.eigvals(Y).imag)
        warning = None
        if sys.dim > 2 and (rates.max() - rates.min()) / rates.max() > compat_tol:
            warning = "incompatible: skew-eigenvalues differ; period guess uses the largest"
        for j in range(phases):
            ph = 2.0 * math.pi * j / phases
            p = norm * (math.cos(ph) * a + math.sin(ph) * b)
            shift = np.linalg.lstsq(S, p, rcond=None)[0]
            base = ChartPoint(q.chart_id, q.coords + shift)
            if sys.manifold.kind == "torus":
                base = sys.manifold.normalize(base)
            # renormalize for the metric at the displaced base
            Gb = sys.metric.inverse(base)
            p = p * norm / math.sqrt(float(p @ Gb @ p))
            seeds.append(Seed(len(seeds), PhasePoint(base, p), 2.0 * math.pi / lam, q, ph, eps, warning))
    return seeds


# -- section and return map -------------------------------------------------------------

def _project_to_level(kern, z, chart, direction, energy):
    f = lambda c: kern.energy(z + c * direction, chart) - energy
    f0 = f(0.0)
    if f0 == 0.0:
        return z.copy()
    scale = 0.25 * max(np.linalg.norm(z[len(z) // 2:]), 1e-300)
    lo, hi = -scale, scale
    for _ in range(60):
        if f(lo) < 0.0 < f(hi):
            break
        lo, hi = 2 * lo, 2 * hi
    else:
        raise NumericalDegeneracyError("energy level not reached along the fiber direction")
    c = brentq(f, lo, hi, xtol=1e-17, rtol=4 * np.finfo(float).eps, maxiter=200)
    return z + c * direction


def make_section(sys: MagneticSystem, x: PhasePoint, energy: float,
                 cfg: ShootingConfig = ShootingConfig()) -> SectionSpec:
    """Hyperplane through ``x`` normal to the flow there, restricted to the level."""
    kern = sys.kernel(cfg.integrator.newton_tol, cfg.integrator.max_newton_iter)
    z = x.state
    F = np.asarray(kern.rhs(z, x.base.chart_id))
    nF = np.linalg.norm(F)
    if nF == 0.0:
        raise SectionQualityError("flow vanishes at the section anchor")
    nu = F / nF
    n = sys.dim
    d = np.zeros(2 * n)
    d[n:] = z[n:]
    d -= (d @ nu) * nu
    nd = np.linalg.norm(d)
    if nd < 1e-14:
        raise SectionQualityError("fiber direction is parallel to the flow")
    d /= nd
    _, _, vt = np.linalg.svd(np.vstack([nu, d]))
    return SectionSpec(x, nu, float(energy), d, vt[2:].T)


@dataclass
class ReturnResult:
    start: np.ndarray
    end: np.ndarray
    end_chart: int
    period: float
    coords: np.ndarray
    drift: float


def _first_return(sys, kern, sec: SectionSpec, s, period_guess, cfg: ShootingConfig) -> ReturnResult:
    chart = sec.chart
    anchor = sec.anchor.state
    z0 = _project_to_level(kern, anchor + sec.basis @ s, chart, sec.fiber, sec.energy)
    h = cfg.integrator.step
    max_steps = int(math.ceil(cfg.max_time_factor * period_guess / h))
    min_steps = int(cfg.min_time_fraction * period_guess / h)
    status, k, zp, cp, drift = kern.run_to_section(z0, chart, h, max_steps, anchor, sec.normal,
                                                   chart, min_steps)
    if status == _core.NO_RETURN:
        raise NoReturnError(f"no return to the section within {max_steps * h:.4g} time units")
    if status != _core.FOUND:
        raise IntegrationQualityError(f"integration failed before the return (status {status})")
    if drift > cfg.integrator.drift_budget:
        raise IntegrationQualityError(f"energy drift {drift:.3e} over budget during return")
    zp = np.asarray(zp)
    sv = lambda t: kern.section_value(kern.step(zp, cp, t)[0], kern.step(zp, cp, t)[1],
                                      anchor, sec.normal, chart)
    s0, s1 = sv(0.0), sv(h)
    if s0 == 0.0:
        tau = 0.0
    else:
        tau = brentq(sv, 0.0, h, xtol=1e-18, rtol=4 * np.finfo(float).eps, maxiter=200) \
            if s0 < 0.0 <= s1 else h
    z1, c1, _ = kern.step(zp, cp, tau)
    z1 = np.asarray(kern.to_chart(np.asarray(z1), c1, chart))
    F1 = np.asarray(kern.rhs(z1, chart))
    if abs(F1 @ sec.normal) < cfg.transversality_tol * np.linalg.norm(F1):
        raise SectionQualityError("flow crosses the section tangentially")
    period = (k - 1) * h + tau
    return ReturnResult(z0, z1, chart, period, sec.basis.T @ (z1 - anchor), drift)


def _section_jacobian(sys, kern, sec, period_guess, cfg, center=None):
    m = sec.basis.shape[1]
    s = np.zeros(m) if center is None else np.asarray(center, dtype=float)
    delta = cfg.fd_scale * max(np.linalg.norm(sec.anchor.momentum), 1e-12)
    J = np.zeros((m, m))
    for j in range(m):
        e = np.zeros(m)
        e[j] = delta
        plus = _first_return(sys, kern, sec, s + e, period_guess, cfg).coords
        minus = _first_return(sys, kern, sec, s - e, period_guess, cfg).coords
        J[:, j] = (plus - minus) / (2 * delta)
    return J


def return_map(sys: MagneticSystem, sec: SectionSpec, x: PhasePoint, cfg: ShootingConfig = ShootingConfig(),
               period_guess: Optional[float] = None):
    """First return of ``x`` (a point of the section) with transit time and the
    finite-difference Jacobian of the map in section coordinates."""
    kern = sys.kernel(cfg.integrator.newton_tol, cfg.integrator.max_newton_iter)
    if period_guess is None:
        from .dynamics import limit_period
        period_guess = limit_period(sys, x.base)
    H = kern.energy(x.state, x.base.chart_id)
    if abs(H - sec.energy) > 1e-10 * max(sec.energy, 1e-300):
        raise ValueError("point is not on the section's energy level")
    zx = np.asarray(kern.to_chart(x.state, x.base.chart_id, sec.chart))
    s = sec.basis.T @ (zx - sec.anchor.state)
    res = _first_return(sys, kern, sec, s, period_guess, cfg)
    J = _section_jacobian(sys, kern, sec, res.period, cfg, center=s)
    return PhasePoint.from_state(res.end, sec.chart), res.period, J


# -- Newton shooting -------------------------------------------------------------------

def _closure(sys, a, b):
    d = b - a
    if sys.manifold.kind == "torus":
        n = sys.dim
        d[:n] -= np.round(d[:n])
    return float(np.max(np.abs(d)))


def newton_shoot(sys: MagneticSystem, seed: Seed, cfg: ShootingConfig = ShootingConfig()) -> PeriodicOrbit:
    """Newton iteration on the section fixed-point equation ``P(s) = s``.

    Raises ``ShootingError`` with kind ``divergence``, ``max-iterations``,
    ``degenerate-direction`` or ``integration``.
    """
    kern = sys.kernel(cfg.integrator.newton_tol, cfg.integrator.max_newton_iter)
    x = seed.point
    chart = x.base.chart_id
    energy = seed.energy
    period = seed.period_guess
    history: List[float] = []
    growth = 0
    for it in range(1, cfg.max_iter + 1):
        try:
            sec = make_section(sys, x, energy, cfg)
            z0 = _project_to_level(kern, x.state, chart, sec.fiber, energy)
            x = PhasePoint.from_state(z0, chart)
            sec = make_section(sys, x, energy, cfg)
            ret = _first_return(sys, kern, sec, np.zeros(sec.basis.shape[1]), period, cfg)
            period = ret.period
            closure = _closure(sys, ret.start, ret.end)
            J = _section_jacobian(sys, kern, sec, period, cfg)
        except MagorbitError as exc:
            raise ShootingError("integration", f"{type(exc).__name__}: {exc}",
                                {"iteration": it, "residuals": history,
                                 "error": type(exc).__name__}) from exc
        history.append(closure)
        A = J - np.eye(J.shape[0])
        smin = float(np.linalg.svd(A, compute_uv=False)[-1])
        if smin < cfg.degenerate_tol:
            candidate = None
            if closure <= cfg.accept_tol:
                candidate = _build_orbit(sys, kern, x, period, closure, seed.index, it, J, cfg)
            raise ShootingError("degenerate-direction",
                                f"section Jacobian minus identity is singular (sigma_min {smin:.2e})",
                                {"iteration": it, "residuals": history, "sigma_min": smin},
                                candidate)
        if closure <= cfg.converge_tol:
            return _build_orbit(sys, kern, x, period, closure, seed.index, it, J, cfg)
        if len(history) > 1 and closure > history[-2]:
            growth += 1
            if growth >= cfg.divergence_steps:
                if closure <= cfg.accept_tol:
                    return _build_orbit(sys, kern, x, period, closure, seed.index, it, J, cfg)
                raise ShootingError("divergence", "closure residual grew on consecutive iterations",
                                    {"iteration": it, "residuals": history})
        else:
            growth = 0
        step = np.linalg.solve(A, -ret.coords)
        x = PhasePoint.from_state(sec.anchor.state + sec.basis @ step, chart)
        if not np.all(np.isfinite(x.state)):
            raise ShootingError("divergence", "non-finite Newton iterate",
                                {"iteration": it, "residuals": history})
        if sys.manifold.kind == "sphere":
            # keep the iterate in the better-conditioned chart
            if float(x.base.coords @ x.base.coords) > 4.0:
                z = np.asarray(kern.to_chart(x.state, chart, 1 - chart))
                chart = 1 - chart
                x = PhasePoint.from_state(z, chart)
    if history and history[-1] <= cfg.accept_tol:
        return _build_orbit(sys, kern, x, period, history[-1], seed.index, cfg.max_iter, J, cfg)
    raise ShootingError("max-iterations", f"no convergence in {cfg.max_iter} iterations",
                        {"iteration": cfg.max_iter, "residuals": history})


def _dense_loop(sys, kern, x: PhasePoint, period: float, h: float):
    """Uniform samples of one period by cubic Hermite interpolation of the run."""
    chart = x.base.chart_id
    nfull = int(math.floor(period / h + 1e-12))
    tau = period - nfull * h
    states, charts, ok, drift = kern.run(x.state, chart, h, nfull)
    states = [np.asarray(kern.to_chart(np.asarray(z), int(c), chart)) for z, c in zip(states, charts)]
    times = list(h * np.arange(nfull + 1))
    if tau > 1e-14:
        zl, cl, _ = kern.step(np.asarray(states[-1]), chart, tau)
        states.append(np.asarray(kern.to_chart(np.asarray(zl), cl, chart)))
        times.append(period)
    states = np.array(states)
    derivs = np.array([kern.rhs(z, chart) for z in states])
    spline = CubicHermiteSpline(np.array(times), states, derivs, axis=0)
    t = period * np.arange(LOOP_SAMPLES) / LOOP_SAMPLES
    energy = np.array([kern.energy(z, chart) for z in states])
    H0 = energy[0]
    return spline(t), float(np.max(np.abs(energy - H0)) / H0)


def _base_points(manifold, loop, chart):
    n = manifold.dim
    if manifold.kind == "torus":
        return loop[:, :n]
    return np.array([manifold.embed(ChartPoint(chart, q)) for q in loop[:, :n]])


def _build_orbit(sys, kern, x, period, closure, seed_index, iterations, J, cfg) -> PeriodicOrbit:
    man = sys.manifold
    chart = x.base.chart_id
    loop, drift = _dense_loop(sys, kern, x, period, cfg.integrator.step)
    n = sys.dim
    if man.kind == "torus":
        shift = np.floor(loop[0, :n])
        loop = loop.copy()
        loop[:, :n] -= shift
    start = PhasePoint(man.normalize(ChartPoint(chart, loop[0, :n])) if man.kind == "torus"
                       else ChartPoint(chart, loop[0, :n]), loop[0, n:])
    pts = _base_points(man, loop, chart)
    if man.kind == "torus":
        center = man.normalize(ChartPoint(0, pts.mean(axis=0)))
    else:
        c = pts.mean(axis=0)
        center = man.from_embedding(c / np.linalg.norm(c))
    diffs = pts[:, None, :] - pts[None, :, :]
    diameter = float(np.sqrt(np.max(np.sum(diffs ** 2, axis=-1))))
    orbit = PeriodicOrbit(start, float(period), float(kern.energy(x.state, chart)), loop, chart,
                          center, diameter, None, float(closure), drift, seed_index, iterations, J)
    try:
        if diameter > cfg.fiber_diameter_max:
            raise WindingClassificationError(
                f"projection diameter {diameter:.3g} above fiber threshold {cfg.fiber_diameter_max}")
        orbit.fiber_winding = fiber_winding(orbit)
    except WindingClassificationError as exc:
        orbit.winding_note = str(exc)
    return orbit


# -- Floquet analysis ---------------------------------------------------------------------

def floquet(sys: MagneticSystem, orbit: PeriodicOrbit, tol: float = 1e-4,
            cfg: ShootingConfig = ShootingConfig(), recompute: bool = False) -> FloquetData:
    """Multipliers of the section return map at the orbit's start point."""
    J = orbit.section_jacobian
    if J is None or recompute:
        kern = sys.kernel(cfg.integrator.newton_tol, cfg.integrator.max_newton_iter)
        try:
            sec = make_section(sys, _start_state(orbit), orbit.energy, cfg)
            J = _section_jacobian(sys, kern, sec, orbit.period, cfg)
        except MagorbitError as exc:
            raise FloquetConditioningError(f"return map failed near the orbit: {exc}") from exc
    if not np.all(np.isfinite(J)):
        raise FloquetConditioningError("non-finite entries in the section Jacobian")
    if np.linalg.cond(J) > 1e10:
        raise FloquetConditioningError(f"section Jacobian condition number {np.linalg.cond(J):.2e}")
    mult = np.linalg.eigvals(J)
    mult = mult[np.lexsort((mult.imag, mult.real))]
    dist = float(np.min(np.abs(mult - 1.0)))
    recip = float(max(np.min(np.abs(mult - 1.0 / m)) for m in mult))
    return FloquetData(mult, dist, dist > tol, float(tol), recip, complex(np.prod(mult)))


def _start_state(orbit):
    return PhasePoint.from_state(orbit.loop[0], orbit.loop_chart)


# -- deduplication ---------------------------------------------------------------------

def _aligned_loop(sys, ref: PeriodicOrbit, other: PeriodicOrbit) -> np.ndarray:
    """``other.loop`` expressed in ``ref``'s chart (sphere) or lattice cell (torus)."""
    man = sys.manifold
    n = sys.dim
    loop = other.loop.copy()
    if man.kind == "torus":
        cr = ref.loop[:, :n].mean(axis=0)
        co = loop[:, :n].mean(axis=0)
        loop[:, :n] += np.round(cr - co)
        return loop
    if other.loop_chart != ref.loop_chart:
        kern = sys.kernel()
        loop = np.array([kern.to_chart(z, other.loop_chart, ref.loop_chart) for z in loop])
    return loop


def _fourier_shift(loop: np.ndarray, shift: float) -> np.ndarray:
    """Resample a periodic sequence at ``index + shift`` (band-limited)."""
    N = loop.shape[0]
    k = np.fft.fftfreq(N, d=1.0 / N)
    spec = np.fft.fft(loop, axis=0) * np.exp(2j * np.pi * k * shift / N)[:, None]
    return np.real(np.fft.ifft(spec, axis=0))


def loop_distance(sys: MagneticSystem, a: PeriodicOrbit, b: PeriodicOrbit) -> float:
    """Min over cyclic (fractional) phase alignments of the max pointwise chart distance."""
    la = a.loop
    lb = _aligned_loop(sys, a, b)
    if la.shape != lb.shape:
        return math.inf
    if abs(a.period - b.period) > 0.1 * max(a.period, b.period):
        return math.inf
    N = la.shape[0]
    dist = lambda lbs: float(np.max(np.max(np.abs(la - lbs), axis=1)))
    coarse = [dist(np.roll(lb, -k, axis=0)) for k in range(N)]
    k0 = int(np.argmin(coarse))
    res = minimize_scalar(lambda s: dist(_fourier_shift(lb, k0 + s)), bounds=(-1.0, 1.0),
                          method="bounded", options={"xatol": 1e-6})
    return float(min(coarse[k0], res.fun))


def dedup(sys: MagneticSystem, orbits: Sequence[PeriodicOrbit], tol_space: float = 1e-3) -> List[PeriodicOrbit]:
    """Cluster orbits that coincide up to time shift; keep the smallest closure residual.

    The reduction runs in input order so the result is deterministic.
    """
    reps: List[PeriodicOrbit] = []
    for orb in orbits:
        for i, r in enumerate(reps):
            if loop_distance(sys, r, orb) <= tol_space:
                if (orb.closure_residual, orb.seed_index) < (r.closure_residual, r.seed_index):
                    reps[i] = orb
                break
        else:
            reps.append(orb)
    return reps


# -- winding ---------------------------------------------------------------------------

def winding_of_momenta(momenta: np.ndarray) -> float:
    """Real rotation number of a closed sequence of momentum vectors."""
    P = np.asarray(momenta, dtype=float)
    if P.shape[1] > 2:
        _, _, vt = np.linalg.svd(P, full_matrices=False)
        P = P @ vt[:2].T
    ang = np.unwrap(np.arctan2(P[:, 1], P[:, 0]))
    # close the loop back to the first sample
    last = np.arctan2(P[0, 1], P[0, 0])
    last = ang[-1] + ((last - ang[-1] + np.pi) % (2 * np.pi) - np.pi)
    return float((last - ang[0]) / (2 * np.pi))


def fiber_winding(orbit: PeriodicOrbit, tol: float = 0.1) -> int:
    n = orbit.dim
    norms = np.linalg.norm(orbit.loop[:, n:], axis=1)
    if norms.min() < 1e-3 * np.median(norms):
        # angle is undefined where the momentum (nearly) vanishes
        raise WindingClassificationError(f"momentum nearly vanishes on the loop (min {norms.min():.3e})")
    w = winding_of_momenta(orbit.loop[:, n:])
    k = int(round(w))
    if abs(w - k) > tol:
        raise WindingClassificationError(f"rotation number {w:.4f} is not within {tol} of an integer")
    return k


# -- serialization --------------------------------------------------------------------

def orbits_to_jsonl(orbits: Iterable[PeriodicOrbit]) -> str:
    return "".join(json.dumps(o.as_record(), sort_keys=True) + "\n" for o in orbits)


def write_orbits(path, orbits: Iterable[PeriodicOrbit]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(orbits_to_jsonl(orbits))


def read_orbit_records(path) -> List[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
