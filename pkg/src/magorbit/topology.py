"""Topological bookkeeping: Betti vectors, orbit-count lower bounds,
Morse-Bott inequality checks and the linear symplectic splitting of a
twisted form on the cover of a torus cotangent bundle."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
import math
from math import comb
from typing import Optional, Sequence

import numpy as np

from .errors import HypothesisViolationError


@dataclass(frozen=True)
class BettiVector:
    """Real Betti numbers ``beta_0 .. beta_dim``."""

    betti: tuple
    dim: int

    def __post_init__(self):
        b = tuple(int(v) for v in self.betti)
        if len(b) != self.dim + 1:
            raise ValueError(f"expected {self.dim + 1} Betti numbers, got {len(b)}")
        if any(v < 0 for v in b):
            raise ValueError("Betti numbers must be nonnegative")
        object.__setattr__(self, "betti", b)

    def __getitem__(self, i):
        if 0 <= i <= self.dim:
            return self.betti[i]
        return 0

    @property
    def euler(self) -> int:
        return sum((-1) ** i * b for i, b in enumerate(self.betti))

    def satisfies_duality(self) -> bool:
        return all(self.betti[i] == self.betti[self.dim - i] for i in range(self.dim + 1))


def betti(*values) -> BettiVector:
    return BettiVector(tuple(values), len(values) - 1)


def torus_betti(n: int) -> BettiVector:
    return BettiVector(tuple(comb(n, i) for i in range(n + 1)), n)


def sphere_betti(n: int) -> BettiVector:
    return BettiVector((1,) + (0,) * (n - 1) + (1,), n)


# name -> (Betti vector, cup-length with real coefficients, tangent bundle trivial)
CATALOG = {
    "T2": (torus_betti(2), 2, True),
    "T3": (torus_betti(3), 3, True),
    "T4": (torus_betti(4), 4, True),
    "S2": (sphere_betti(2), 1, False),
    "CP1": (sphere_betti(2), 1, False),
    "point": (betti(1), 0, True),
}


def sum_betti(b: BettiVector) -> int:
    return int(sum(b.betti))


def sphere_bundle_betti(base: BettiVector, n: Optional[int] = None) -> BettiVector:
    """Betti numbers of the unit (co)tangent sphere bundle over a base with
    nonzero Euler characteristic.

    For ``0 <= i <= n-1`` the bundle's ``b_i`` equals ``beta_i`` of the base;
    for ``n <= i <= 2n-1`` it equals ``beta_{i-n+1}``.
    """
    n = base.dim if n is None else int(n)
    if n != base.dim:
        raise ValueError("n must equal the base dimension")
    if base.euler == 0:
        raise HypothesisViolationError(
            "sphere_bundle_betti needs a base with nonzero Euler characteristic")
    out = [base[i] if i <= n - 1 else base[i - n + 1] for i in range(2 * n)]
    return BettiVector(tuple(out), 2 * n - 1)


def product_betti(a: BettiVector, b: BettiVector) -> BettiVector:
    """Kunneth formula over a field."""
    out = [0] * (a.dim + b.dim + 1)
    for i, x in enumerate(a.betti):
        for j, y in enumerate(b.betti):
            out[i + j] += x * y
    return BettiVector(tuple(out), a.dim + b.dim)


def total_space_betti(name: str) -> BettiVector:
    """Betti numbers of the unit cotangent bundle of a catalog manifold."""
    base, _, parallelizable = CATALOG[name]
    if base.euler != 0:
        return sphere_bundle_betti(base)
    if parallelizable:
        return product_betti(base, sphere_betti(base.dim - 1) if base.dim > 1 else betti(2))
    raise HypothesisViolationError(f"no Betti formula for the sphere bundle of {name}")


# -- Morse-Bott inequalities -------------------------------------------------

@dataclass(frozen=True)
class MorseBottCensus:
    """Counts ``mu_i`` of critical circles of index ``i``; out-of-range is 0."""

    mu: tuple

    def __getitem__(self, i):
        if 0 <= i < len(self.mu):
            return int(self.mu[i])
        return 0

    @property
    def total(self) -> int:
        return int(sum(self.mu))


@dataclass
class MorseBottVerdict:
    passed: bool
    basic_slack: list            # mu_i + mu_{i-1} - b_i, i = 0..2k+1
    refined_slack: list          # mu_1 - b_1, mu_{2k-1} - b_{2k}
    summed_slack: float          # sum mu - SB(E)/2 - (mu_0 + mu_2k)/2
    conclusion_slack: float      # sum mu - (SB(E)/2 + 1)
    first_failure: Optional[str] = None


def check_morse_bott(census: MorseBottCensus, b_E: BettiVector) -> MorseBottVerdict:
    """Check the Morse-Bott inequalities for a function whose critical
    manifolds are circles on an odd-dimensional total space ``E``."""
    dim = b_E.dim
    if dim % 2 != 1:
        raise ValueError("total space must be odd-dimensional")
    if len(census.mu) != dim + 1:
        raise ValueError("census length must equal dim E + 1")
    k = (dim - 1) // 2
    mu = census
    basic = [mu[i] + mu[i - 1] - b_E[i] for i in range(0, 2 * k + 2)]
    refined = [mu[1] - b_E[1], mu[2 * k - 1] - b_E[2 * k]]
    sb = sum_betti(b_E)
    summed = mu.total - sb / 2 - (mu[0] + mu[2 * k]) / 2
    conclusion = mu.total - (sb / 2 + 1)
    failure = None
    for i, s in enumerate(basic):
        if s < 0:
            failure = f"mu_{i} + mu_{i - 1} >= b_{i}"
            break
    if failure is None:
        if refined[0] < 0:
            failure = "mu_1 >= b_1"
        elif refined[1] < 0:
            failure = f"mu_{2 * k - 1} >= b_{2 * k}"
    return MorseBottVerdict(failure is None, basic, refined, summed, conclusion, failure)


def summed_conclusion(total: int, b_E: BettiVector, trivial_bundle: bool) -> tuple:
    """Branch-appropriate consequence of the summed inequalities.

    Returns ``(threshold, holds)``: ``SB(E)/2`` for the trivial circle
    bundle, ``SB(E)/2 + 1`` otherwise.
    """
    threshold = sum_betti(b_E) / 2 + (0 if trivial_bundle else 1)
    return threshold, total >= threshold


# -- bound prediction ----------------------------------------------------------

@dataclass
class BoundReport:
    manifold: str
    dim: int
    sb_base: int
    sb_total_space: Optional[int]
    cup_length_bound: Optional[int]
    branch: str
    predicted_min_orbits: Optional[int]
    general_branch_bound: Optional[float]
    conjectural_bound: Optional[int]
    notes: list = field(default_factory=list)

    def as_dict(self):
        return {
            "manifold": self.manifold,
            "dim": self.dim,
            "sb_base": self.sb_base,
            "sb_total_space": self.sb_total_space,
            "cup_length_bound": self.cup_length_bound,
            "branch": self.branch,
            "predicted_min_orbits": self.predicted_min_orbits,
            "general_branch_bound": self.general_branch_bound,
            "conjectural_bound_unproven": self.conjectural_bound,
            "notes": list(self.notes),
        }


def bundle_is_trivial(name: str) -> bool:
    """Catalog rule: the circle bundle over the projectivized unit bundle
    is trivial only for the 2-torus."""
    return name == "T2"


def predict_bound(base: BettiVector, n: int, bundle_trivial: bool,
                  name: Optional[str] = None) -> BoundReport:
    """Lower bound on the number of nondegenerate periodic orbits on a low
    energy level for a compatible symplectic magnetic field on ``base``."""
    notes = []
    sb = sum_betti(base)
    cl = None
    if name is not None and name in CATALOG:
        cl = CATALOG[name][1]
    elif name is None:
        notes.append("cup-length unknown: manifold not named")
    else:
        notes.append(f"cup-length unknown for {name}")
    if n % 2:
        notes.append("odd dimension: no symplectic magnetic field, bound not applicable")
        return BoundReport(name or "?", n, sb, None, None, "not-applicable", None,
                           None, None, notes)
    m = n // 2
    branch = "trivial-bundle" if bundle_trivial else "nontrivial-bundle"
    sb_E = None
    general = None
    try:
        if name is not None and name in CATALOG:
            sb_E = sum_betti(total_space_betti(name))
        elif base.euler != 0:
            sb_E = sum_betti(sphere_bundle_betti(base))
    except HypothesisViolationError as exc:
        notes.append(str(exc))
    if sb_E is not None:
        general = sb_E / 2 if bundle_trivial else sb_E / 2 + 1
    predicted = sb
    if base.euler == 0 and not bundle_trivial:
        predicted = sb + 1
        notes.append("chi(M) = 0 and M is not T2: one extra orbit")
    return BoundReport(
        manifold=name or "?", dim=n, sb_base=sb, sb_total_space=sb_E,
        cup_length_bound=None if cl is None else cl + m,
        branch=branch, predicted_min_orbits=predicted,
        general_branch_bound=general, conjectural_bound=m * sb, notes=notes)


def predict_bound_for(name: str) -> BoundReport:
    base = CATALOG[name][0]
    return predict_bound(base, base.dim, bundle_is_trivial(name), name)


# -- linear symplectic splitting ------------------------------------------------

@dataclass
class SymplecticSplit:
    """Basis in which the twisted form on R^{2n} becomes block diagonal.

    Columns ``0..2k-1`` of ``basis_change`` span the symplectic factor
    (standard form ``[[0, I], [-I, 0]]``); the remaining ``2(n-k)`` columns
    span the factor that contains the lattice directions (first ``n`` of
    them are exactly the coordinate directions of the base).
    """

    k: int
    n: int
    basis_change: np.ndarray
    block_form: np.ndarray
    omega: np.ndarray
    exact: bool                  # input entries were integers

    @property
    def w1_dim(self) -> int:
        return 2 * (self.n - self.k)

    def congruence_residual(self) -> float:
        B = self.basis_change
        return float(np.max(np.abs(B.T @ self.omega @ B - self.block_form), initial=0.0))

    def as_dict(self):
        return {
            "k": self.k,
            "n": self.n,
            "w1_dim": self.w1_dim,
            "integral_input": self.exact,
            "basis_change": self.basis_change.tolist(),
            "block_form": self.block_form.tolist(),
            "congruence_residual": self.congruence_residual(),
        }


def twisted_matrix(a):
    """Matrix of ``dp ^ dq + sigma`` on R^{2n} in ``(q, p)`` order.

    ``a`` is the antisymmetric matrix with ``sigma(u, v) = u^T a v``.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    om = np.zeros((2 * n, 2 * n))
    om[:n, :n] = a
    om[:n, n:] = -np.eye(n)
    om[n:, :n] = np.eye(n)
    return om


def _is_integral(a) -> bool:
    arr = np.asarray(a)
    if arr.dtype.kind in "iu":
        return True
    return bool(np.all(np.isfinite(arr)) and np.all(arr == np.round(arr)))


def _rank_and_kernel(a):
    """Exact row reduction of a Fraction matrix; return (rank, kernel basis)."""
    n = len(a)
    m = [list(row) for row in a]
    zero = Fraction(0)
    pivots = []
    r = 0
    for c in range(n):
        piv = max(range(r, n), key=lambda i: abs(m[i][c]), default=None)
        if piv is None or m[piv][c] == zero:
            continue
        m[r], m[piv] = m[piv], m[r]
        pv = m[r][c]
        m[r] = [x / pv for x in m[r]]
        for i in range(n):
            if i != r and m[i][c] != zero:
                f = m[i][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == n:
            break
    free = [c for c in range(n) if c not in pivots]
    kernel = []
    for fc in free:
        v = [zero] * n
        v[fc] = Fraction(1)
        for row, pc in enumerate(pivots):
            v[pc] = -m[row][fc]
        kernel.append(v)
    return len(pivots), kernel


def _unit(v):
    # exact rescaling to max-abs 1
    s = max(abs(x) for x in v)
    return [x / s for x in v]


def torus_split(a, n: Optional[int] = None) -> SymplecticSplit:
    """Split ``(R^{2n}, dp^dq + sigma)`` into a standard symplectic factor of
    dimension ``2k = rank(a)`` and a factor containing the zero-section
    directions.

    The construction runs in exact rational arithmetic on the binary values
    of the entries; only the returned matrices are rounded to float.
    """
    arr = np.asarray(a)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError("a must be a square matrix")
    if n is not None and arr.shape[0] != n:
        raise ValueError("matrix size does not match n")
    n = arr.shape[0]
    if not np.all(np.isfinite(arr.astype(float))):
        raise ValueError("a must be finite")
    if not np.allclose(arr, -arr.T, atol=1e-14, rtol=0.0):
        raise ValueError("a must be antisymmetric")
    integral = _is_integral(arr)
    if not integral:
        # entries at roundoff level relative to the matrix are zero
        arr = arr.astype(float)
        arr = np.where(np.abs(arr) <= 1e-14 * np.max(np.abs(arr), initial=0.0), 0.0, arr)
    A = [[Fraction(int(arr[i, j])) if integral else Fraction(float(arr[i, j])) for j in range(n)]
         for i in range(n)]
    # enforce exact antisymmetry from the upper triangle
    for i in range(n):
        A[i][i] = Fraction(0)
        for j in range(i):
            A[i][j] = -A[j][i]
    zero, one = Fraction(0), Fraction(1)

    rank, kernel = _rank_and_kernel(A)
    k = rank // 2

    def omega(u, v):
        # u, v in (q, p) order
        s = zero
        for i in range(n):
            s += u[n + i] * v[i] - u[i] * v[n + i]
            for j in range(n):
                if A[i][j] != zero:
                    s += u[i] * A[i][j] * v[j]
        return s

    # E = {(x, a x) : x in im(a)}; image spanned by the columns of a.
    cands = []
    for j in range(n):
        col = [A[i][j] for i in range(n)]
        if any(c != zero for c in col):
            ax = [sum((A[i][l] * col[l] for l in range(n)), zero) for i in range(n)]
            cands.append(_unit(col + ax))
    es, fs = [], []
    while len(es) < k:
        best, pair = None, None
        for i in range(len(cands)):
            for j in range(i + 1, len(cands)):
                w = omega(cands[i], cands[j])
                if best is None or abs(w) > abs(best):
                    best, pair = w, (i, j)
        if pair is None or best == zero:
            raise ArithmeticError("symplectic basis completion failed")
        i, j = pair
        # split the scale evenly (rational approximation of sqrt) so columns stay O(1)
        r = Fraction(math.sqrt(float(abs(best)))).limit_denominator(1 << 40) or one
        e = [x / r for x in cands[i]]
        f = [x * r / best for x in cands[j]]
        es.append(e)
        fs.append(f)
        rest = []
        for idx, w in enumerate(cands):
            if idx in pair:
                continue
            wf = omega(w, f)
            we = omega(w, e)
            w2 = [wi - wf * ei + we * fi for wi, ei, fi in zip(w, e, f)]
            if any(x != zero for x in w2):
                rest.append(_unit(w2))
        cands = rest

    lattice = [[one if i == j else zero for i in range(2 * n)] for j in range(n)]
    extra = [[zero] * n + list(v) for v in kernel]
    cols = es + fs + lattice + extra
    B = np.array([[float(c[i]) for c in cols] for i in range(2 * n)])
    om = twisted_matrix(np.array([[float(x) for x in row] for row in A]))
    block = np.zeros((2 * n, 2 * n))
    block[:k, k:2 * k] = np.eye(k)
    block[k:2 * k, :k] = -np.eye(k)
    w1 = cols[2 * k:]
    for i, u in enumerate(w1):
        for j, v in enumerate(w1):
            block[2 * k + i, 2 * k + j] = float(omega(u, v))
    return SymplecticSplit(k=k, n=n, basis_change=B, block_form=block, omega=om, exact=integral)
