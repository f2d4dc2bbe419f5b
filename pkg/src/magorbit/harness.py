"""Experiment configs, orbit censuses and report emission.

Config files are JSON with ``"schema_version": 1``; unknown keys anywhere
are rejected. Reports are byte-stable: no timestamps, sorted keys, and
per-seed work is reduced in seed order whatever the thread count.
"""

from __future__ import annotations

import copy
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from . import _core
from .dynamics import (IntegratorConfig, MagneticSystem, convergence_probe, normalize_direction)
from .errors import ConfigError, MagorbitError, ShootingError
from .geometry import (RoundSphereMetric, TrigMetric, TrigPoly, TrigTwoForm, ZonalSphereForm,
                       compatibility_check, get_manifold)
from .orbits import (PeriodicOrbit, ShootingConfig, dedup, floquet, newton_shoot, orbits_to_jsonl,
                     seed_grid, seed_orbits)
from .topology import predict_bound_for, torus_split

SCHEMA_VERSION = 1
EXIT_OK, EXIT_ERROR, EXIT_BOUND_FAILED = 0, 1, 2
DEFAULT_PROBE_EPS = (1e-1, 3e-2, 1e-2, 3e-3)

_SCHEMA: Dict[str, Any] = {
    "schema_version": int,
    "name": str,
    "system": {
        "manifold": str,
        "metric": dict,
        "sigma": dict,
        "kappa": float,
    },
    "energies": list,
    "seed_grid": {"resolution": int, "phases": int},
    "integrator": {"step": float, "drift_budget": float, "max_newton_iter": int},
    "shooting": {
        "max_iter": int, "converge_tol": float, "accept_tol": float, "degenerate_tol": float,
        "fd_scale": float, "max_time_factor": float, "min_time_fraction": float,
        "divergence_steps": int, "transversality_tol": float, "fiber_diameter_max": float,
    },
    "floquet": {"tol": float},
    "dedup": {"tol_space": float},
    "compatibility": {"sample_count": int, "tol": float},
    "probe": {"eps": list, "sample_count": int},
    "output": {"dir": str, "format": str},
    "parallelism": int,
}

_DEFAULTS: Dict[str, Any] = {
    "schema_version": SCHEMA_VERSION,
    "name": "experiment",
    "system": {"kappa": 0.0},
    "energies": [],
    "seed_grid": {"resolution": 4, "phases": 1},
    "integrator": {"step": 1e-3, "drift_budget": 1e-6, "max_newton_iter": 20},
    "shooting": {
        "max_iter": 30, "converge_tol": 1e-10, "accept_tol": 1e-8, "degenerate_tol": 1e-7,
        "fd_scale": 1e-6, "max_time_factor": 3.0, "min_time_fraction": 0.25,
        "divergence_steps": 3, "transversality_tol": 1e-6, "fiber_diameter_max": 0.9,
    },
    "floquet": {"tol": 1e-4},
    "dedup": {"tol_space": 1e-3},
    "compatibility": {"sample_count": 64, "tol": 1e-2},
    "output": {"dir": "out", "format": "both"},
    "parallelism": 1,
}

# fields that must be strictly positive
_POSITIVE = {
    ("integrator", "step"), ("integrator", "drift_budget"), ("integrator", "max_newton_iter"),
    ("floquet", "tol"), ("dedup", "tol_space"), ("compatibility", "sample_count"),
    ("compatibility", "tol"), ("seed_grid", "resolution"), ("seed_grid", "phases"),
    ("parallelism",), ("probe", "sample_count"),
} | {("shooting", k) for k in _SCHEMA["shooting"]}


def _merge(defaults, given):
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _check(node, schema, path):
    if not isinstance(node, dict):
        raise ConfigError(f"{path or 'config'}: expected an object")
    for key, val in node.items():
        where = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigError(f"unknown key '{where}'")
        kind = schema[key]
        if isinstance(kind, dict):
            _check(val, kind, where)
        elif kind is float:
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                raise ConfigError(f"'{where}' must be a number")
        elif kind is int:
            if isinstance(val, bool) or not isinstance(val, int):
                raise ConfigError(f"'{where}' must be an integer")
        elif not isinstance(val, kind):
            raise ConfigError(f"'{where}' must be of type {kind.__name__}")


@dataclass
class ExperimentConfig:
    data: Dict[str, Any]

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "ExperimentConfig":
        _check(raw, _SCHEMA, "")
        if raw.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError(f"schema_version must be {SCHEMA_VERSION}")
        if "system" not in raw or "manifold" not in raw["system"]:
            raise ConfigError("system.manifold is required")
        data = _merge(_DEFAULTS, raw)
        for path in _POSITIVE:
            node = data
            for k in path:
                node = node.get(k) if isinstance(node, dict) else None
            if node is not None and not node > 0:
                raise ConfigError(f"'{'.'.join(path)}' must be > 0")
        for i, e in enumerate(data["energies"]):
            if isinstance(e, bool) or not isinstance(e, (int, float)) or not e > 0:
                raise ConfigError(f"energies[{i}] must be a positive number")
        if "probe" in data:
            eps = data["probe"].get("eps", list(DEFAULT_PROBE_EPS))
            if any(isinstance(e, bool) or not isinstance(e, (int, float)) or not e > 0 for e in eps):
                raise ConfigError("probe.eps must hold positive numbers")
        if data["output"]["format"] not in ("json", "tsv", "both"):
            raise ConfigError("output.format must be 'json', 'tsv' or 'both'")
        cfg = cls(data)
        cfg.build_system()
        return cfg

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "ExperimentConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
        return cls.from_dict(raw)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_text(text, str(path))

    def to_dict(self) -> Dict[str, Any]:
        return copy.deepcopy(self.data)

    def to_text(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True) + "\n"

    # typed views -------------------------------------------------------------
    @property
    def energies(self) -> List[float]:
        return [float(e) for e in self.data["energies"]]

    @property
    def integrator(self) -> IntegratorConfig:
        i = self.data["integrator"]
        return IntegratorConfig(float(i["step"]), float(i["drift_budget"]), int(i["max_newton_iter"]))

    @property
    def shooting(self) -> ShootingConfig:
        s = self.data["shooting"]
        return ShootingConfig(integrator=self.integrator, floquet_tol=float(self.data["floquet"]["tol"]),
                              **{k: (int(v) if k in ("max_iter", "divergence_steps") else float(v))
                                 for k, v in s.items()})

    @property
    def threads(self) -> int:
        return int(self.data["parallelism"])

    def science_view(self) -> Dict[str, Any]:
        """Config without output and parallelism settings (those must not
        change the report)."""
        d = self.to_dict()
        d.pop("output", None)
        d.pop("parallelism", None)
        return d

    def build_system(self) -> MagneticSystem:
        spec = self.data["system"]
        try:
            man = get_manifold(spec["manifold"])
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from None
        n = man.dim
        metric_spec = spec.get("metric", {"kind": "flat" if man.kind == "torus" else "round"})
        sigma_spec = spec.get("sigma")
        if sigma_spec is None:
            raise ConfigError("system.sigma is required")
        try:
            metric = _metric_from_spec(metric_spec, man)
            sigma = _sigma_from_spec(sigma_spec, man)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad field definition: {exc}") from None
        return MagneticSystem(man, metric, sigma, float(spec.get("kappa", 0.0)),
                              self.data.get("name", ""))


def _terms(items, n, where):
    out: Dict[tuple, list] = {}
    for t in items:
        extra = set(t) - {"i", "j", "mode", "cos", "sin"}
        if extra:
            raise ConfigError(f"unknown key(s) {sorted(extra)} in {where} term")
        mode = t.get("mode", [0] * n)
        if len(mode) != n:
            raise ConfigError(f"{where} term mode must have length {n}")
        out.setdefault((int(t["i"]), int(t["j"])), []).append(
            (mode, float(t.get("cos", 0.0)), float(t.get("sin", 0.0))))
    return {k: TrigPoly(n, v) for k, v in out.items()}


def _metric_from_spec(spec, man):
    kind = spec.get("kind")
    allowed = {"flat": {"kind", "scale"}, "trig": {"kind", "terms"}, "round": {"kind"}}
    if kind not in allowed:
        raise ConfigError(f"metric.kind must be one of {sorted(allowed)}")
    if set(spec) - allowed[kind]:
        raise ConfigError(f"unknown key(s) {sorted(set(spec) - allowed[kind])} in metric")
    if man.kind == "sphere":
        if kind != "round":
            raise ConfigError("the sphere supports only the round metric")
        return RoundSphereMetric()
    if kind == "flat":
        return TrigMetric.flat(man.dim, float(spec.get("scale", 1.0)))
    if kind == "trig":
        return TrigMetric(man.dim, _terms(spec["terms"], man.dim, "metric"))
    raise ConfigError("the round metric needs the sphere")


def _sigma_from_spec(spec, man):
    kind = spec.get("kind")
    allowed = {"trig": {"kind", "terms"}, "block": {"kind", "strengths"},
               "constant": {"kind", "matrix"}, "zonal": {"kind", "coefficients"}}
    if kind not in allowed:
        raise ConfigError(f"sigma.kind must be one of {sorted(allowed)}")
    if set(spec) - allowed[kind]:
        raise ConfigError(f"unknown key(s) {sorted(set(spec) - allowed[kind])} in sigma")
    if man.kind == "sphere":
        if kind != "zonal":
            raise ConfigError("the sphere supports only zonal magnetic forms")
        return ZonalSphereForm(spec["coefficients"])
    if kind == "zonal":
        raise ConfigError("zonal forms need the sphere")
    if kind == "block":
        if 2 * len(spec["strengths"]) != man.dim:
            raise ConfigError("block strengths must number dim/2")
        return TrigTwoForm.block([float(s) for s in spec["strengths"]])
    if kind == "constant":
        a = np.asarray(spec["matrix"], dtype=float)
        if a.shape != (man.dim, man.dim) or not np.allclose(a, -a.T, atol=0):
            raise ConfigError("sigma.matrix must be an antisymmetric dim x dim matrix")
        return TrigTwoForm.constant(a)
    return TrigTwoForm(man.dim, _terms(spec["terms"], man.dim, "sigma"))


# -- census -------------------------------------------------------------------------

@dataclass
class LevelReport:
    energy: float
    seeds_tried: int
    orbits_converged: int
    deduplicated_count: int
    winding_once_count: int
    nondegenerate_count: int
    counted_orbits: int
    unclassified_count: int
    degenerate_family: bool
    predicted_bound: Optional[int]
    bound_status: str
    bound_satisfied: Optional[bool]
    total_count_meets_bound: Optional[bool]
    count_discrepancy: bool
    orbits: List[PeriodicOrbit] = field(default_factory=list)
    failures: List[dict] = field(default_factory=list)

    def as_dict(self):
        return {
            "energy": self.energy,
            "seeds_tried": self.seeds_tried,
            "orbits_converged": self.orbits_converged,
            "deduplicated_count": self.deduplicated_count,
            "winding_once_count": self.winding_once_count,
            "nondegenerate_count": self.nondegenerate_count,
            "counted_orbits": self.counted_orbits,
            "unclassified_count": self.unclassified_count,
            "degenerate_family": self.degenerate_family,
            "predicted_bound": self.predicted_bound,
            "bound_status": self.bound_status,
            "bound_satisfied": self.bound_satisfied,
            "total_count_meets_bound": self.total_count_meets_bound,
            "count_discrepancy": self.count_discrepancy,
            "orbits": [o.as_record() for o in self.orbits],
            "failures": self.failures,
        }


@dataclass
class CensusReport:
    name: str
    manifold: str
    backend: str
    config: Dict[str, Any]
    compatibility: Dict[str, Any]
    bound: Dict[str, Any]
    levels: List[LevelReport]
    probe: Optional[Dict[str, Any]]
    largest_passing_energy: Optional[float]

    @property
    def exit_code(self) -> int:
        if any(lv.bound_status == "failed" for lv in self.levels):
            return EXIT_BOUND_FAILED
        return EXIT_OK

    def as_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "manifold": self.manifold,
            "backend": self.backend,
            "config": self.config,
            "compatibility": self.compatibility,
            "bound": self.bound,
            "levels": [lv.as_dict() for lv in self.levels],
            "probe": self.probe,
            "largest_passing_energy": self.largest_passing_energy,
            "exit_code": self.exit_code,
        }


def _shoot_task(sys, seed, scfg, ftol):
    """Worker: one seed. Returns ``(orbit or None, failure record or None, degenerate flag)``."""
    try:
        orbit = newton_shoot(sys, seed, scfg)
    except ShootingError as exc:
        rec = {"seed_index": seed.index, "kind": exc.kind, "message": str(exc),
               "seed_base": seed.point.base.coords.tolist(), "seed_chart": seed.point.base.chart_id,
               "residuals": [float(r) for r in exc.diagnostics.get("residuals", [])]}
        degenerate = False
        if exc.kind == "degenerate-direction" and exc.candidate is not None:
            degenerate = True
            try:
                fl = floquet(sys, exc.candidate, ftol, scfg)
                rec["candidate_period"] = exc.candidate.period
                rec["candidate_floquet"] = fl.as_dict()
            except MagorbitError as inner:
                rec["candidate_floquet_error"] = str(inner)
        return None, rec, degenerate
    except MagorbitError as exc:
        return None, {"seed_index": seed.index, "kind": type(exc).__name__, "message": str(exc)}, False
    try:
        orbit.floquet = floquet(sys, orbit, ftol, scfg)
    except MagorbitError as exc:
        orbit.winding_note = (orbit.winding_note or "") + f" floquet: {exc}"
    if seed.warning:
        orbit.winding_note = ((orbit.winding_note + "; ") if orbit.winding_note else "") + seed.warning
    return orbit, None, False


def _census_level(cfg: ExperimentConfig, sys: MagneticSystem, eps: float, bound: Optional[int],
                  threads: int) -> LevelReport:
    grid = seed_grid(sys.manifold, cfg.data["seed_grid"]["resolution"])
    seeds = seed_orbits(sys, eps, grid, cfg.data["seed_grid"]["phases"],
                        cfg.data["compatibility"]["tol"])
    scfg = cfg.shooting
    ftol = float(cfg.data["floquet"]["tol"])
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda s: _shoot_task(sys, s, scfg, ftol), seeds))
    else:
        results = [_shoot_task(sys, s, scfg, ftol) for s in seeds]
    converged = [r[0] for r in results if r[0] is not None]
    failures = [r[1] for r in results if r[1] is not None]
    degenerate = any(r[2] for r in results)
    unique = dedup(sys, converged, float(cfg.data["dedup"]["tol_space"]))
    once = [o for o in unique if o.fiber_winding is not None and abs(o.fiber_winding) == 1]
    nondeg = [o for o in unique if o.floquet is not None and o.floquet.nondegenerate]
    counted = [o for o in once if o.floquet is not None and o.floquet.nondegenerate]
    unclassified = sum(1 for o in unique if o.fiber_winding is None)
    if degenerate:
        status, satisfied, total_ok = "not-applicable", None, None
    elif bound is None:
        status, satisfied, total_ok = "not-applicable", None, None
    else:
        satisfied = len(counted) >= bound
        total_ok = len(unique) >= bound
        status = "satisfied" if satisfied else "failed"
    return LevelReport(
        energy=eps, seeds_tried=len(seeds), orbits_converged=len(converged),
        deduplicated_count=len(unique), winding_once_count=len(once),
        nondegenerate_count=len(nondeg), counted_orbits=len(counted),
        unclassified_count=unclassified, degenerate_family=degenerate, predicted_bound=bound,
        bound_status=status, bound_satisfied=satisfied, total_count_meets_bound=total_ok,
        count_discrepancy=(satisfied is not None and satisfied != total_ok),
        orbits=unique, failures=failures)


def _compatibility(cfg, sys):
    c = cfg.data["compatibility"]
    if sys.dim % 2:
        return {"passed": None, "note": "odd dimension: skew spectrum undefined"}
    try:
        return compatibility_check(sys.manifold, sys.metric, sys.sigma, int(c["sample_count"]),
                                   float(c["tol"])).as_dict()
    except MagorbitError as exc:
        return {"passed": False, "error": f"{type(exc).__name__}: {exc}"}


def run_probe(cfg: ExperimentConfig, sys: Optional[MagneticSystem] = None) -> Dict[str, Any]:
    sys = sys or cfg.build_system()
    p = cfg.data.get("probe", {})
    eps = [float(e) for e in p.get("eps", DEFAULT_PROBE_EPS)]
    count = int(p.get("sample_count", 16))
    sample = []
    for k, q in enumerate(sys.manifold.sample(count)):
        ang = 2.0 * math.pi * k / max(count, 1) + 0.5
        u = np.zeros(sys.dim)
        u[0], u[1] = math.cos(ang), math.sin(ang)
        sample.append(normalize_direction(sys, q, u))
    return convergence_probe(sys, eps, sample).as_dict()


def run_census(cfg: ExperimentConfig, threads: Optional[int] = None) -> CensusReport:
    """Compatibility check, then seed, shoot, Floquet and dedup per energy."""
    sys = cfg.build_system()
    threads = cfg.threads if threads is None else int(threads)
    name = sys.manifold.name
    try:
        bound_report = predict_bound_for(name).as_dict()
    except KeyError:
        bound_report = {"predicted_min_orbits": None, "branch": "not-applicable",
                        "notes": [f"no bound data for {name}"]}
    bound = bound_report.get("predicted_min_orbits")
    levels = [_census_level(cfg, sys, eps, bound, threads) for eps in cfg.energies]
    probe = run_probe(cfg, sys) if "probe" in cfg.data else None
    passing = [lv.energy for lv in levels if lv.bound_status == "satisfied"]
    return CensusReport(cfg.data.get("name", ""), name, _core.BACKEND, cfg.science_view(),
                        _compatibility(cfg, sys), bound_report, levels, probe,
                        max(passing) if passing else None)


def run_split(a, n: Optional[int] = None) -> Dict[str, Any]:
    return torus_split(a, n).as_dict()


# -- emission ---------------------------------------------------------------------------

TSV_COLUMNS = ("energy", "seeds_tried", "orbits_converged", "deduplicated_count",
               "winding_once_count", "nondegenerate_count", "counted_orbits",
               "degenerate_family", "predicted_bound", "bound_status")


def report_json(report: CensusReport) -> str:
    return json.dumps(report.as_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"


def report_tsv(report: CensusReport) -> str:
    lines = ["\t".join(TSV_COLUMNS)]
    for lv in report.levels:
        d = lv.as_dict()
        lines.append("\t".join("" if d[c] is None else (repr(d[c]) if isinstance(d[c], float)
                                                        else str(d[c]).lower() if isinstance(d[c], bool)
                                                        else str(d[c])) for c in TSV_COLUMNS))
    return "\n".join(lines) + "\n"


def emit_report(report: CensusReport, out_dir, fmt: str = "both") -> List[str]:
    """Write ``report.json`` / ``census.tsv`` / ``orbits.jsonl``; returns the paths."""
    if fmt not in ("json", "tsv", "both"):
        raise ValueError("format must be 'json', 'tsv' or 'both'")
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def put(name, text):
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        written.append(path)

    if fmt in ("json", "both"):
        put("report.json", report_json(report))
        put("orbits.jsonl", "".join(orbits_to_jsonl(lv.orbits) for lv in report.levels))
    if fmt in ("tsv", "both"):
        put("census.tsv", report_tsv(report))
    return written
