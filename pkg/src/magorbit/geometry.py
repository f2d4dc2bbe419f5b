"""Base manifolds, metrics and magnetic two-forms in charts.

The catalog holds flat tori ``T^n`` (one periodic chart, coordinates of
period 1) and the round unit sphere with two stereographic charts. Fields on
tori are trigonometric polynomials; on the sphere the magnetic form is a
polynomial in the height function times the area form. Both have compact
coefficient encodings that the compiled integration kernel understands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import qmc

from .errors import NumericalDegeneracyError, RankError, UnsupportedDimensionError
from .topology import CATALOG, BettiVector

TWO_PI = 2.0 * math.pi
FD_STEP = 1e-5
HALTON_SEED = 20240611
SPHERE_SWITCH_RADIUS = 2.0


@dataclass(frozen=True, eq=False)
class ChartPoint:
    chart_id: int
    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", np.asarray(self.coords, dtype=float).copy())

    def __repr__(self):
        return f"ChartPoint({self.chart_id}, {self.coords.tolist()})"


def fd_derivative(func, x, k, h=FD_STEP):
    """Fourth-order central difference of ``func`` along coordinate ``k``."""
    e = np.zeros_like(x)
    e[k] = h
    return (-func(x + 2 * e) + 8 * func(x + e) - 8 * func(x - e) + func(x - 2 * e)) / (12 * h)


# -- manifolds ----------------------------------------------------------------

@dataclass
class Chart:
    chart_id: int
    description: str
    contains: Callable[[np.ndarray], bool]


class ManifoldModel:
    """A base manifold from the built-in catalog."""

    def __init__(self, name: str, dim: int, charts: Sequence[Chart], periodic: Sequence[bool],
                 topology: BettiVector, kind: str):
        self.name = name
        self.dim = dim
        self.charts = list(charts)
        self.periodic = tuple(periodic)
        self.topology = topology
        self.kind = kind

    @property
    def euler(self) -> int:
        return self.topology.euler

    def __repr__(self):
        return f"ManifoldModel({self.name!r})"

    # chart transitions ----------------------------------------------------
    def transition(self, x, i: int, j: int) -> np.ndarray:
        """Coordinates in chart ``j`` of the point with coordinates ``x`` in chart ``i``."""
        x = np.asarray(x, dtype=float)
        if i == j or self.kind == "torus":
            return x.copy()
        return _inversion(x)

    def transition_jacobian(self, x, i: int, j: int) -> np.ndarray:
        """``d x_j / d x_i`` evaluated at ``x`` (chart ``i`` coordinates)."""
        x = np.asarray(x, dtype=float)
        if i == j or self.kind == "torus":
            return np.eye(self.dim)
        return _inversion_jacobian(x)

    def contains(self, pt: ChartPoint) -> bool:
        return bool(self.charts[pt.chart_id].contains(pt.coords))

    def point(self, coords, chart_id: int = 0) -> ChartPoint:
        return self.normalize(ChartPoint(chart_id, coords))

    def normalize(self, pt: ChartPoint) -> ChartPoint:
        """Canonical representative: torus coords in [0, 1)^n; sphere points
        moved to the other chart once ``|x| > 2``."""
        if self.kind == "torus":
            c = np.mod(pt.coords, 1.0)
            c[c >= 1.0] = 0.0
            return ChartPoint(0, c)
        if float(pt.coords @ pt.coords) > SPHERE_SWITCH_RADIUS ** 2:
            return ChartPoint(1 - pt.chart_id, _inversion(pt.coords))
        return ChartPoint(pt.chart_id, pt.coords)

    def to_chart(self, pt: ChartPoint, j: int) -> ChartPoint:
        return ChartPoint(j, self.transition(pt.coords, pt.chart_id, j))

    def embed(self, pt: ChartPoint) -> np.ndarray:
        """Sphere: point of the unit sphere in R^3. Torus: the chart coords."""
        if self.kind == "torus":
            return pt.coords.copy()
        x = pt.coords
        r2 = float(x @ x)
        X, Y, Z = 2 * x[0] / (1 + r2), 2 * x[1] / (1 + r2), (r2 - 1) / (r2 + 1)
        if pt.chart_id == 1:
            return np.array([X, -Y, -Z])
        return np.array([X, Y, Z])

    def from_embedding(self, P) -> ChartPoint:
        X, Y, Z = (float(v) for v in P)
        if Z <= 0.0:
            return ChartPoint(0, np.array([X, Y]) / (1.0 - Z))
        return ChartPoint(1, np.array([X, -Y]) / (1.0 + Z))

    def displacement(self, a: ChartPoint, b: ChartPoint) -> np.ndarray:
        """Chart-coordinate difference ``b - a`` (minimal image on tori)."""
        if self.kind == "torus":
            d = b.coords - a.coords
            return d - np.round(d)
        return self.to_chart(b, a.chart_id).coords - a.coords

    def sample(self, count: int) -> list:
        """Deterministic low-discrepancy sample of points."""
        if self.kind == "torus":
            pts = qmc.Halton(d=self.dim, scramble=True, seed=HALTON_SEED).random(count)
            return [ChartPoint(0, p) for p in pts]
        uv = qmc.Halton(d=2, scramble=True, seed=HALTON_SEED).random(count)
        out = []
        for u, v in uv:
            Z = 2.0 * u - 1.0
            r = math.sqrt(max(0.0, 1.0 - Z * Z))
            P = (r * math.cos(TWO_PI * v), r * math.sin(TWO_PI * v), Z)
            out.append(self.from_embedding(P))
        return out


def _inversion(x):
    r2 = float(x @ x)
    return np.array([x[0] / r2, -x[1] / r2])


def _inversion_jacobian(x):
    r2 = float(x @ x)
    a, b = x[0], x[1]
    return np.array([[b * b - a * a, -2 * a * b], [2 * a * b, b * b - a * a]]) / (r2 * r2)


def flat_torus(n: int) -> ManifoldModel:
    if n not in (2, 3, 4):
        raise UnsupportedDimensionError("catalog tori are T2, T3 and T4")
    chart = Chart(0, "periodic chart, fundamental domain [0,1)^n", lambda x: True)
    return ManifoldModel(f"T{n}", n, [chart], [True] * n, CATALOG[f"T{n}"][0], "torus")


def round_sphere() -> ManifoldModel:
    charts = [
        Chart(0, "stereographic from the north pole", lambda x: bool(np.all(np.isfinite(x)))),
        Chart(1, "stereographic from the south pole", lambda x: bool(np.all(np.isfinite(x)))),
    ]
    return ManifoldModel("S2", 2, charts, [False, False], CATALOG["S2"][0], "sphere")


def get_manifold(name: str) -> ManifoldModel:
    if name in ("T2", "T3", "T4"):
        return flat_torus(int(name[1]))
    if name in ("S2", "CP1"):
        return round_sphere()
    raise KeyError(f"unknown manifold {name!r}; catalog: T2, T3, T4, S2")


# -- trigonometric polynomials ------------------------------------------------------

class TrigPoly:
    """Real function ``sum_k a_k cos(2 pi m_k.x) + b_k sin(2 pi m_k.x)`` of period 1."""

    def __init__(self, n: int, terms=()):
        self.n = int(n)
        modes, a, b = [], [], []
        for mode, ca, sb in terms:
            mode = np.asarray(mode, dtype=float).reshape(self.n)
            modes.append(mode)
            a.append(float(ca))
            b.append(float(sb))
        self.modes = np.array(modes, dtype=float).reshape(-1, self.n)
        self.a = np.array(a, dtype=float)
        self.b = np.array(b, dtype=float)

    @classmethod
    def constant(cls, n, value):
        return cls(n, [((0,) * n, value, 0.0)])

    @property
    def terms(self):
        return [(tuple(m), a, b) for m, a, b in zip(self.modes, self.a, self.b)]

    def __call__(self, x) -> float:
        if not len(self.a):
            return 0.0
        th = TWO_PI * (self.modes @ np.asarray(x, dtype=float))
        return float(self.a @ np.cos(th) + self.b @ np.sin(th))

    def gradient(self, x) -> np.ndarray:
        if not len(self.a):
            return np.zeros(self.n)
        th = TWO_PI * (self.modes @ np.asarray(x, dtype=float))
        w = TWO_PI * (-self.a * np.sin(th) + self.b * np.cos(th))
        return self.modes.T @ w

    def derivative(self, k: int) -> "TrigPoly":
        terms = []
        for m, a, b in self.terms:
            c = TWO_PI * m[k]
            if c != 0.0:
                terms.append((m, c * b, -c * a))
        return TrigPoly(self.n, terms).simplified()

    def simplified(self) -> "TrigPoly":
        acc: Dict[tuple, list] = {}
        for m, a, b in self.terms:
            m = np.array(m)
            nz = np.flatnonzero(m)
            if len(nz) and m[nz[0]] < 0:
                m, b = -m, -b
            if not len(nz):
                b = 0.0
            key = tuple(float(v) for v in m)
            slot = acc.setdefault(key, [0.0, 0.0])
            slot[0] += a
            slot[1] += b
        return TrigPoly(self.n, [(k, a, b) for k, (a, b) in acc.items() if a != 0.0 or b != 0.0])

    def __add__(self, other):
        if np.isscalar(other):
            other = TrigPoly.constant(self.n, other)
        return TrigPoly(self.n, self.terms + other.terms).simplified()

    __radd__ = __add__

    def __neg__(self):
        return TrigPoly(self.n, [(m, -a, -b) for m, a, b in self.terms])

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, c):
        return TrigPoly(self.n, [(m, c * a, c * b) for m, a, b in self.terms])

    __rmul__ = __mul__

    def is_constant(self) -> bool:
        return not np.any(self.modes[(self.a != 0.0) | (self.b != 0.0)])

    def to_json(self):
        return [{"mode": [int(v) if float(v).is_integer() else float(v) for v in m],
                 "cos": a, "sin": b} for m, a, b in self.terms]

    @classmethod
    def from_json(cls, n, items):
        return cls(n, [(it["mode"], it.get("cos", 0.0), it.get("sin", 0.0)) for it in items])


# -- metric fields --------------------------------------------------------------

class MetricField:
    """Riemannian metric in charts. ``grad`` returns ``d g_ij / d x_k`` at ``[i, j, k]``."""

    dim: int

    def eval(self, pt: ChartPoint) -> np.ndarray:
        raise NotImplementedError

    def grad(self, pt: ChartPoint) -> np.ndarray:
        f = lambda x: self.eval(ChartPoint(pt.chart_id, x))
        return np.stack([fd_derivative(f, pt.coords, k) for k in range(self.dim)], axis=-1)

    def inverse(self, pt: ChartPoint) -> np.ndarray:
        g = self.eval(pt)
        try:
            ginv = np.linalg.inv(g)
        except np.linalg.LinAlgError:
            raise NumericalDegeneracyError(f"singular metric at {pt!r}") from None
        if not np.all(np.isfinite(ginv)) or np.linalg.cond(g) > 1e14:
            raise NumericalDegeneracyError(f"singular metric at {pt!r}")
        return ginv

    def kernel_terms(self):
        return None


class TrigMetric(MetricField):
    """Metric on a torus whose components are trigonometric polynomials."""

    def __init__(self, n: int, components: Optional[Dict[Tuple[int, int], TrigPoly]] = None):
        self.dim = n
        comps = {}
        for (i, j), poly in (components or {}).items():
            key = (min(i, j), max(i, j))
            comps[key] = comps[key] + poly if key in comps else poly
        self.components = comps

    @classmethod
    def flat(cls, n, scale=1.0):
        return cls(n, {(i, i): TrigPoly.constant(n, scale) for i in range(n)})

    @classmethod
    def diagonal(cls, diag):
        n = len(diag)
        return cls(n, {(i, i): TrigPoly.constant(n, d) for i, d in enumerate(diag)})

    def eval(self, pt):
        g = np.zeros((self.dim, self.dim))
        for (i, j), poly in self.components.items():
            v = poly(pt.coords)
            g[i, j] = v
            g[j, i] = v
        return g

    def grad(self, pt):
        out = np.zeros((self.dim, self.dim, self.dim))
        for (i, j), poly in self.components.items():
            d = poly.gradient(pt.coords)
            out[i, j, :] = d
            out[j, i, :] = d
        return out

    def is_constant(self):
        return all(p.is_constant() for p in self.components.values())

    def kernel_terms(self):
        idx, modes, coef = [], [], []
        for (i, j), poly in sorted(self.components.items()):
            for m, a, b in poly.terms:
                idx.append((i, j))
                modes.append(m)
                coef.append((a, b))
        return (np.array(idx, dtype=np.int32).reshape(-1, 2),
                np.array(modes, dtype=float).reshape(-1, self.dim),
                np.array(coef, dtype=float).reshape(-1, 2))

    def to_json(self):
        return {"kind": "trig", "terms": [
            {"i": i, "j": j, **t} for (i, j), p in sorted(self.components.items()) for t in p.to_json()]}


class RoundSphereMetric(MetricField):
    """Unit round metric ``4 / (1 + |x|^2)^2 dx^2`` in either stereographic chart."""

    dim = 2

    def eval(self, pt):
        r2 = float(pt.coords @ pt.coords)
        return 4.0 / (1.0 + r2) ** 2 * np.eye(2)

    def grad(self, pt):
        x = pt.coords
        r2 = float(x @ x)
        d = -16.0 / (1.0 + r2) ** 3 * x
        out = np.zeros((2, 2, 2))
        out[0, 0, :] = d
        out[1, 1, :] = d
        return out

    def kernel_terms(self):
        return "round"

    def to_json(self):
        return {"kind": "round"}


class FunctionMetric(MetricField):
    def __init__(self, dim, func, grad=None):
        self.dim = dim
        self._func = func
        self._grad = grad

    def eval(self, pt):
        return np.asarray(self._func(pt.coords), dtype=float)

    def grad(self, pt):
        if self._grad is not None:
            return np.asarray(self._grad(pt.coords), dtype=float)
        return super().grad(pt)


# -- two-forms ---------------------------------------------------------------

class MagneticTwoForm:
    """Closed two-form; ``eval`` gives the antisymmetric matrix ``sigma_ij``
    with ``sigma(u, v) = u^T sigma v`` and ``grad`` gives ``d sigma_ij / d x_k``."""

    dim: int
    symplectic: bool = False

    def eval(self, pt: ChartPoint) -> np.ndarray:
        raise NotImplementedError

    def grad(self, pt: ChartPoint) -> np.ndarray:
        f = lambda x: self.eval(ChartPoint(pt.chart_id, x))
        return np.stack([fd_derivative(f, pt.coords, k) for k in range(self.dim)], axis=-1)

    def kernel_terms(self):
        return None

    def scaled(self, c):
        return FunctionTwoForm(self.dim, lambda x, s=self: c * s.eval(ChartPoint(0, x)))


class TrigTwoForm(MagneticTwoForm):
    """Two-form on a torus, ``sum_{i<j} sigma_ij(x) dx_i ^ dx_j``."""

    def __init__(self, n: int, components: Optional[Dict[Tuple[int, int], TrigPoly]] = None,
                 symplectic: Optional[bool] = None):
        self.dim = n
        comps = {}
        for (i, j), poly in (components or {}).items():
            if i == j:
                raise ValueError("diagonal component of a two-form")
            if i > j:
                i, j, poly = j, i, -poly
            comps[(i, j)] = comps[(i, j)] + poly if (i, j) in comps else poly
        self.components = comps
        self.symplectic = (n % 2 == 0) if symplectic is None else symplectic

    @classmethod
    def constant(cls, a):
        a = np.asarray(a, dtype=float)
        n = a.shape[0]
        comps = {(i, j): TrigPoly.constant(n, a[i, j])
                 for i in range(n) for j in range(i + 1, n) if a[i, j] != 0.0}
        return cls(n, comps)

    @classmethod
    def block(cls, strengths):
        """``sum_k lambda_k dx_{2k} ^ dx_{2k+1}``."""
        n = 2 * len(strengths)
        return cls(n, {(2 * k, 2 * k + 1): TrigPoly.constant(n, s) for k, s in enumerate(strengths)})

    def eval(self, pt):
        s = np.zeros((self.dim, self.dim))
        for (i, j), poly in self.components.items():
            v = poly(pt.coords)
            s[i, j] = v
            s[j, i] = -v
        return s

    def grad(self, pt):
        out = np.zeros((self.dim, self.dim, self.dim))
        for (i, j), poly in self.components.items():
            d = poly.gradient(pt.coords)
            out[i, j, :] = d
            out[j, i, :] = -d
        return out

    def scaled(self, c):
        return TrigTwoForm(self.dim, {k: c * p for k, p in self.components.items()}, self.symplectic)

    def kernel_terms(self):
        idx, modes, coef = [], [], []
        for (i, j), poly in sorted(self.components.items()):
            for m, a, b in poly.terms:
                idx.append((i, j))
                modes.append(m)
                coef.append((a, b))
        return (np.array(idx, dtype=np.int32).reshape(-1, 2),
                np.array(modes, dtype=float).reshape(-1, self.dim),
                np.array(coef, dtype=float).reshape(-1, 2))

    def to_json(self):
        return {"kind": "trig", "terms": [
            {"i": i, "j": j, **t} for (i, j), p in sorted(self.components.items()) for t in p.to_json()]}


class ZonalSphereForm(MagneticTwoForm):
    """``f(Z) dA`` on the unit sphere, ``f`` a polynomial in the height ``Z``
    (``Z = cos`` of the polar angle) and ``dA`` the round area form."""

    dim = 2

    def __init__(self, coefficients):
        self.coefficients = np.asarray(coefficients, dtype=float).ravel()
        self.symplectic = True

    def height(self, pt):
        r2 = float(pt.coords @ pt.coords)
        z = (r2 - 1.0) / (r2 + 1.0)
        return z if pt.chart_id == 0 else -z

    def strength(self, pt) -> float:
        return float(np.polynomial.polynomial.polyval(self.height(pt), self.coefficients))

    def eval(self, pt):
        r2 = float(pt.coords @ pt.coords)
        s = self.strength(pt) * 4.0 / (1.0 + r2) ** 2
        return np.array([[0.0, s], [-s, 0.0]])

    def grad(self, pt):
        x = pt.coords
        r2 = float(x @ x)
        sgn = 1.0 if pt.chart_id == 0 else -1.0
        Z = self.height(pt)
        B = np.polynomial.polynomial.polyval(Z, self.coefficients)
        dB = np.polynomial.polynomial.polyval(Z, np.polynomial.polynomial.polyder(self.coefficients)) \
            if len(self.coefficients) > 1 else 0.0
        dZ = sgn * 2.0 / (1.0 + r2) ** 2
        ds = 4.0 * dB * dZ / (1.0 + r2) ** 2 - 8.0 * B / (1.0 + r2) ** 3
        out = np.zeros((2, 2, 2))
        out[0, 1, :] = 2.0 * ds * x
        out[1, 0, :] = -2.0 * ds * x
        return out

    def scaled(self, c):
        return ZonalSphereForm(c * self.coefficients)

    def kernel_terms(self):
        return ("zonal", self.coefficients.copy())

    def to_json(self):
        return {"kind": "zonal", "coefficients": self.coefficients.tolist()}


class FunctionTwoForm(MagneticTwoForm):
    def __init__(self, dim, func, grad=None, symplectic=False):
        self.dim = dim
        self._func = func
        self._grad = grad
        self.symplectic = symplectic

    def eval(self, pt):
        return np.asarray(self._func(pt.coords), dtype=float)

    def grad(self, pt):
        if self._grad is not None:
            return np.asarray(self._grad(pt.coords), dtype=float)
        return super().grad(pt)


# -- one-forms (gauge potentials) -------------------------------------------------

class OneForm:
    dim: int

    def eval(self, pt) -> np.ndarray:
        raise NotImplementedError

    def grad(self, pt) -> np.ndarray:
        """``d alpha_i / d x_k`` at ``[i, k]``."""
        f = lambda x: self.eval(ChartPoint(pt.chart_id, x))
        return np.stack([fd_derivative(f, pt.coords, k) for k in range(self.dim)], axis=-1)

    def exterior_derivative(self, pt) -> np.ndarray:
        """Matrix of ``d alpha``: ``(d alpha)_ij = d_i alpha_j - d_j alpha_i``."""
        d = self.grad(pt)
        return d.T - d


class TrigOneForm(OneForm):
    def __init__(self, components: Sequence[TrigPoly]):
        self.components = list(components)
        self.dim = len(self.components)

    def eval(self, pt):
        return np.array([c(pt.coords) for c in self.components])

    def grad(self, pt):
        return np.array([c.gradient(pt.coords) for c in self.components])

    def exterior(self) -> Dict[Tuple[int, int], TrigPoly]:
        out = {}
        for i in range(self.dim):
            for j in range(i + 1, self.dim):
                out[(i, j)] = (self.components[j].derivative(i) - self.components[i].derivative(j))
        return out


class FunctionOneForm(OneForm):
    def __init__(self, dim, func, grad=None):
        self.dim = dim
        self._func = func
        self._grad = grad

    def eval(self, pt):
        return np.asarray(self._func(pt.coords), dtype=float)

    def grad(self, pt):
        if self._grad is not None:
            return np.asarray(self._grad(pt.coords), dtype=float)
        return super().grad(pt)


# -- pointwise linear algebra ---------------------------------------------------

@dataclass
class SkewSpectrum:
    values: np.ndarray
    compatible: bool
    spread: float
    tol: float


def lorentz_tensor(metric: MetricField, sigma: MagneticTwoForm, x: ChartPoint) -> np.ndarray:
    """Mixed tensor ``Y = g^{-1} sigma`` (one index of sigma raised)."""
    return metric.inverse(x) @ sigma.eval(x)


def skew_spectrum(metric: MetricField, sigma: MagneticTwoForm, x: ChartPoint,
                  tol: float = 1e-2) -> SkewSpectrum:
    """Moduli ``lambda_1 >= ... >= lambda_m`` of the eigenvalue pairs
    ``+-i lambda`` of ``g^{-1} sigma`` at ``x``."""
    n = metric.dim
    if n % 2:
        raise UnsupportedDimensionError(f"skew spectrum needs even dimension, got {n}")
    Y = lorentz_tensor(metric, sigma, x)
    ev = np.linalg.eigvals(Y)
    lam = np.sort(np.abs(ev.imag))[::-1]
    # each modulus appears twice (conjugate pair)
    values = lam[0::2][: n // 2]
    if values[-1] <= 1e-12 * max(values[0], 1e-300):
        raise RankError(f"magnetic form is degenerate at {x!r}")
    spread = float((values[0] - values[-1]) / values[0])
    return SkewSpectrum(values, spread <= tol, spread, tol)


@dataclass
class CompatibilityReport:
    passed: bool
    worst_spread: float
    witness: Optional[ChartPoint]
    samples: int
    tol: float

    def as_dict(self):
        return {
            "passed": self.passed,
            "worst_spread": self.worst_spread,
            "witness_chart": None if self.witness is None else self.witness.chart_id,
            "witness_coords": None if self.witness is None else self.witness.coords.tolist(),
            "samples": self.samples,
            "tol": self.tol,
        }


def compatibility_check(manifold: ManifoldModel, metric: MetricField, sigma: MagneticTwoForm,
                        sample_count: int = 64, tol: float = 1e-2) -> CompatibilityReport:
    """Worst eigenvalue spread of ``g^{-1} sigma`` over a Halton sample."""
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    worst, witness = -1.0, None
    for pt in manifold.sample(sample_count):
        try:
            spec = skew_spectrum(metric, sigma, pt, tol)
        except RankError as exc:
            raise RankError(f"{exc} (sample point {pt!r})") from None
        if spec.spread > worst:
            worst, witness = spec.spread, pt
    return CompatibilityReport(worst <= tol, float(worst), witness, sample_count, tol)


def closedness_residual(sigma: MagneticTwoForm, x: ChartPoint, h: float = FD_STEP) -> float:
    """Max over index triples of ``d_k s_ij + d_i s_jk + d_j s_ki`` by finite differences."""
    n = sigma.dim
    f = lambda y: sigma.eval(ChartPoint(x.chart_id, y))
    d = [fd_derivative(f, x.coords, k, h) for k in range(n)]
    worst = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                worst = max(worst, abs(d[k][i, j] + d[i][j, k] + d[j][k, i]))
    return worst


def gauge_shift(sigma: MagneticTwoForm, alpha: OneForm) -> MagneticTwoForm:
    """``sigma - d alpha``: same cohomology class, shifted representative."""
    if isinstance(sigma, TrigTwoForm) and isinstance(alpha, TrigOneForm):
        comps = dict(sigma.components)
        for key, poly in alpha.exterior().items():
            comps[key] = (comps[key] - poly) if key in comps else -poly
        comps = {k: p.simplified() for k, p in comps.items()}
        return TrigTwoForm(sigma.dim, comps, sigma.symplectic)

    def ev(x, chart=0):
        pt = ChartPoint(chart, x)
        return sigma.eval(pt) - alpha.exterior_derivative(pt)

    return FunctionTwoForm(sigma.dim, ev, symplectic=sigma.symplectic)


def period_integral(form: MagneticTwoForm, manifold: ManifoldModel, cycle=(0, 1),
                    nodes: int = 96) -> float:
    """Integral of the form over a 2-cycle.

    On a torus ``cycle = (i, j)`` is the coordinate 2-torus through the
    origin; the periodic trapezoid rule is spectrally accurate there. On the
    sphere the cycle is the fundamental class, integrated as two unit disks,
    one per chart, with Gauss-Legendre in the radius.
    """
    if manifold.kind == "torus":
        i, j = cycle
        t = np.arange(nodes) / nodes
        total = 0.0
        x = np.zeros(manifold.dim)
        for s in t:
            for u in t:
                x[i], x[j] = s, u
                total += form.eval(ChartPoint(0, x))[i, j]
        return total / nodes ** 2
    r, wr = np.polynomial.legendre.leggauss(nodes)
    r = 0.5 * (r + 1.0)
    wr = 0.5 * wr
    phi = TWO_PI * np.arange(2 * nodes) / (2 * nodes)
    total = 0.0
    for chart in (0, 1):
        for rk, wk in zip(r, wr):
            for ph in phi:
                x = np.array([rk * math.cos(ph), rk * math.sin(ph)])
                total += wk * rk * form.eval(ChartPoint(chart, x))[0, 1] * TWO_PI / len(phi)
    return total


# -- canned systems ---------------------------------------------------------------

def cosine_field_t2(base=1.0, ax=0.3, ay=0.3) -> TrigTwoForm:
    """``(base + ax cos 2pi x + ay cos 2pi y) dx ^ dy`` on T2."""
    poly = TrigPoly(2, [((0, 0), base, 0.0), ((1, 0), ax, 0.0), ((0, 1), ay, 0.0)]).simplified()
    return TrigTwoForm(2, {(0, 1): poly})
