"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s`` or ``python tests/test_acceptance.py``.
"""

import json
import math
import sys
import time
from pathlib import Path

import numpy as np

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))

from conftest import ACCEPTANCE_LINES, catalog_systems  # noqa: E402

from magorbit import harness  # noqa: E402
from magorbit.dynamics import (PhasePoint, flat_torus_system, hamiltonian_gradient,  # noqa: E402
                               twisted_form_eval)
from magorbit.geometry import (ChartPoint, TrigOneForm, TrigPoly, TrigTwoForm,  # noqa: E402
                               flat_torus, gauge_shift, period_integral)
from magorbit.orbits import make_section, return_map, seed_orbits  # noqa: E402
from magorbit.topology import (MorseBottCensus, check_morse_bott, sphere_betti,  # noqa: E402
                               sphere_bundle_betti, sum_betti, torus_split, twisted_matrix)

CONFIGS = HERE.parent / "configs"
CRITICAL = [(0.0, 0.0), (0.5, 0.0), (0.0, 0.5), (0.5, 0.5)]


def record(number, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def load(name, **over):
    raw = json.loads((CONFIGS / name).read_text())
    raw.update(over)
    return harness.ExperimentConfig.from_dict(raw)


def test_criterion_1_hamiltonian_field_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240611)
    worst = 0.0
    for sys_ in catalog_systems():
        kern = sys_.kernel()
        n = sys_.dim
        for _ in range(100):
            if sys_.manifold.kind == "torus":
                base = ChartPoint(0, rng.random(n))
            else:
                base = ChartPoint(int(rng.integers(2)), rng.uniform(-1.5, 1.5, 2))
            x = PhasePoint(base, rng.normal(size=n) * 0.5)
            X = np.asarray(kern.rhs(x.state, base.chart_id))
            dH = hamiltonian_gradient(sys_, x)
            for _ in range(5):
                v = rng.normal(size=2 * n)
                res = abs(twisted_form_eval(sys_, x, X, v) + dH @ v) / (1 + np.linalg.norm(v))
                worst = max(worst, res)
    dt = time.perf_counter() - t0
    record(1, worst <= 1e-9 and dt < 5,
           f"max |omega(X_H,v)+dH(v)|/(1+|v|) = {worst:.2e} (<= 1e-9), {dt:.2f} s (< 5 s)")


def test_criterion_2_cyclotron_oracle():
    eps = 0.02
    sys_ = flat_torus_system(2, TrigTwoForm.block([1.0]))
    seed = seed_orbits(sys_, eps, [ChartPoint(0, [0.3, 0.6])])[0]
    sec = make_section(sys_, seed.point, eps)
    _, period, _ = return_map(sys_, sec, seed.point, period_guess=seed.period_guess)
    period_err = abs(period - 2 * math.pi) / (2 * math.pi)

    rep = harness.run_census(load("t2_constant.json"))
    lv = rep.levels[0]
    cands = [f for f in lv.failures if "candidate_floquet" in f]
    mult_err = max(abs(complex(*m) - 1) for f in cands for m in f["candidate_floquet"]["multipliers"]) \
        if cands else math.inf

    # radius from the candidate loop of the shooting run
    from magorbit.errors import ShootingError
    from magorbit.orbits import newton_shoot
    try:
        newton_shoot(sys_, seed)
        radius_err = math.inf
    except ShootingError as exc:
        q = exc.candidate.loop[:, :2]
        radius_err = float(np.max(np.abs(np.linalg.norm(q - q.mean(axis=0), axis=1) - math.sqrt(2 * eps))))
    ok = period_err <= 1e-6 and radius_err <= 1e-6 and mult_err <= 1e-6 and lv.degenerate_family
    record(2, ok, f"period rel err {period_err:.1e}, radius err {radius_err:.1e}, "
                  f"multiplier err {mult_err:.1e} (all <= 1e-6), degenerate flag {lv.degenerate_family}")


def _torus_distance(a, b):
    d = np.asarray(a) - np.asarray(b)
    return float(np.linalg.norm(d - np.round(d)))


def test_criterion_3_variable_field_torus():
    t0 = time.perf_counter()
    cfg = load("t2_variable.json")
    cfg.data.pop("probe")
    rep = harness.run_census(cfg)
    dt = time.perf_counter() - t0
    parts, ok = [], dt < 120
    for lv in rep.levels:
        counted = [o for o in lv.orbits if o.floquet is not None and o.floquet.nondegenerate
                   and abs(o.fiber_winding) == 1]
        far = max(min(_torus_distance(o.projection_center.coords, c) for o in counted) for c in CRITICAL) \
            if counted else math.inf
        ok = ok and lv.counted_orbits >= 4 and far <= 0.1
        parts.append(f"eps={lv.energy:g}: count {lv.counted_orbits} (>= 4), worst center offset {far:.3f}")
    ok = ok and [lv.energy for lv in rep.levels] == [1e-2, 1e-3]
    record(3, ok, "; ".join(parts) + f"; {dt:.1f} s (< 120 s)")


def test_criterion_4_sphere():
    rep = harness.run_census(load("s2_zonal.json"))
    lv = rep.levels[0]
    E = sphere_bundle_betti(sphere_betti(2), 2)
    half = sum_betti(E) / 2 + 1
    ok = lv.energy == 1e-2 and lv.counted_orbits >= 2 and E.betti == (1, 0, 0, 1) and half == 2
    record(4, ok, f"count {lv.counted_orbits} (>= 2) at eps=1e-2, b(E) = {E.betti}, SB(E)/2+1 = {half:g}")


def test_criterion_5_rescaling_convergence():
    t0 = time.perf_counter()
    res = harness.run_probe(load("t2_variable.json"))
    dt = time.perf_counter() - t0
    s0, s1 = res["c0_slope"], res["c1_slope"]
    ok = res["eps"] == [1e-1, 3e-2, 1e-2, 3e-3] and s0 is not None and s1 is not None \
        and 0.9 <= s0 <= 1.1 and 0.9 <= s1 <= 1.1 and dt < 30
    record(5, ok, f"C0 slope {s0:.4f}, C1 slope {s1:.4f} (in [0.9, 1.1]), {dt:.2f} s (< 30 s)")


def test_criterion_6_morse_bott():
    E = sphere_bundle_betti(sphere_betti(2))
    v = check_morse_bott(MorseBottCensus((1, 0, 1, 0)), E)
    ok = v.passed and min(v.basic_slack) >= 0 and min(v.refined_slack) >= 0 and v.conclusion_slack == 0
    record(6, ok, f"basic slack {v.basic_slack}, refined slack {v.refined_slack}, "
                  f"sum mu - (SB(E)/2+1) = {v.conclusion_slack:g}")


def test_criterion_7_torus_split():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    worst, rank_ok = 0.0, True
    for t in range(100):
        n = (2, 3, 4)[t % 3]
        a = np.zeros((n, n), dtype=int)
        a[np.triu_indices(n, 1)] = rng.integers(-5, 6, n * (n - 1) // 2)
        a = a - a.T
        s = torus_split(a, n)
        B = s.basis_change
        worst = max(worst, float(np.max(np.abs(B.T @ twisted_matrix(a) @ B - s.block_form))))
        rank_ok = rank_ok and 2 * s.k == np.linalg.matrix_rank(a)
    e = np.zeros((3, 3), dtype=int)
    e[0, 1], e[1, 0] = 1, -1
    w1 = torus_split(e, 3).w1_dim
    dt = time.perf_counter() - t0
    record(7, worst <= 1e-12 and rank_ok and w1 == 4 and dt < 5,
           f"max congruence residual {worst:.1e} (<= 1e-12), 2k = rank {rank_ok}, "
           f"elementary block W1 dim {w1}, {dt:.2f} s (< 5 s)")


def test_criterion_8_gauge_shift():
    sigma = TrigTwoForm(2, {(0, 1): TrigPoly(2, [((0, 0), 1.0, 0.0), ((1, 0), 0.0, 0.3)])})
    # alpha = -(0.3 / 2 pi) cos(2 pi x) dy, so d alpha = 0.3 sin(2 pi x) dx^dy
    alpha = TrigOneForm([TrigPoly(2, []), TrigPoly(2, [((1, 0), -0.3 / (2 * math.pi), 0.0)])])
    shifted = gauge_shift(sigma, alpha)
    t2 = flat_torus(2)
    pts = t2.sample(200) + [ChartPoint(0, np.array([x, y])) for x in np.linspace(0, 1, 11)
                            for y in (0.0, 0.5)]
    spread = max(abs(shifted.eval(p)[0, 1] - 1.0) for p in pts)
    dper = abs(period_integral(shifted, t2) - period_integral(sigma, t2))
    record(8, spread <= 1e-10 and dper <= 1e-8,
           f"sigma' constant within {spread:.1e} (<= 1e-10), period integral diff {dper:.1e} (<= 1e-8)")


def test_criterion_9_determinism(tmp_path=None):
    import tempfile
    out = Path(tmp_path) if tmp_path is not None else Path(tempfile.mkdtemp())
    cfg = load("t2_variable.json", energies=[1e-2])
    cfg.data.pop("probe")
    files = {}
    for threads in (1, 8):
        paths = harness.emit_report(harness.run_census(cfg, threads=threads), out / f"threads{threads}")
        files[threads] = {Path(p).name: Path(p).read_bytes() for p in paths}
    same = files[1] == files[8] and len(files[1]) == 3
    record(9, same, f"report.json, orbits.jsonl, census.tsv byte-identical at 1 and 8 threads: {same}")


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted((k, v) for k, v in globals().items() if k.startswith("test_criterion_")):
        try:
            fn()
        except AssertionError:
            failed += 1
        except Exception as exc:  # report and continue
            failed += 1
            print(f"[FAIL] {name}: {type(exc).__name__}: {exc}")
    sys.exit(1 if failed else 0)
