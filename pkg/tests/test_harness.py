import json
from pathlib import Path

import numpy as np
import pytest

from magorbit import harness
from magorbit.cli import main, read_matrix
from magorbit.errors import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def small_t2(**over):
    raw = json.loads((CONFIGS / "t2_variable.json").read_text())
    raw["energies"] = [0.01]
    raw.pop("probe")
    raw.update(over)
    return harness.ExperimentConfig.from_dict(raw)


@pytest.fixture(scope="module")
def small_report():
    return harness.run_census(small_t2())


def test_all_shipped_configs_load():
    for path in sorted(CONFIGS.glob("*.json")):
        if path.name.startswith("split"):
            continue
        cfg = harness.ExperimentConfig.load(path)
        again = harness.ExperimentConfig.from_text(cfg.to_text())
        assert again.to_dict() == cfg.to_dict()


def test_config_defaults_and_views():
    cfg = harness.ExperimentConfig.from_dict(
        {"schema_version": 1, "system": {"manifold": "T2", "sigma": {"kind": "block", "strengths": [2.0]}}})
    assert cfg.energies == [] and cfg.threads == 1
    assert cfg.shooting.converge_tol == 1e-10 and cfg.integrator.step == 1e-3
    assert "parallelism" not in cfg.science_view() and "output" not in cfg.science_view()
    from magorbit.geometry import ChartPoint
    assert cfg.build_system().sigma.eval(ChartPoint(0, [0.0, 0.0]))[0, 1] == 2.0


@pytest.mark.parametrize("raw, msg", [
    ({"schema_version": 1, "system": {"manifold": "T2", "sigma": {"kind": "block", "strengths": [1.0]}},
      "colour": 1}, "unknown key 'colour'"),
    ({"schema_version": 2, "system": {"manifold": "T2"}}, "schema_version"),
    ({"schema_version": 1, "system": {"manifold": "T2", "sigma": {"kind": "block", "strengths": [1.0]}},
      "energies": [-0.1]}, "energies[0]"),
    ({"schema_version": 1, "system": {"manifold": "T2", "sigma": {"kind": "block", "strengths": [1.0]}},
      "integrator": {"step": 0}}, "integrator.step"),
    ({"schema_version": 1, "system": {"manifold": "K3", "sigma": {"kind": "block", "strengths": [1.0]}}},
      "K3"),
    ({"schema_version": 1, "system": {"manifold": "S2", "sigma": {"kind": "block", "strengths": [1.0]}}},
      "zonal"),
    ({"schema_version": 1, "system": {"manifold": "T2", "sigma": {"kind": "constant",
                                                                 "matrix": [[0, 1], [1, 0]]}}},
      "antisymmetric"),
    ({"schema_version": 1, "system": {"manifold": "T2", "sigma": {"kind": "block", "strengths": [1.0]}},
      "output": {"format": "xml"}}, "output.format"),
])
def test_config_errors(raw, msg):
    with pytest.raises(ConfigError) as info:
        harness.ExperimentConfig.from_dict(raw)
    assert msg in str(info.value)


def test_parse_error_position():
    text = '{\n  "schema_version": 1,\n  "name": oops\n}'
    with pytest.raises(ConfigError) as info:
        harness.ExperimentConfig.from_text(text, "bad.json")
    assert str(info.value).startswith("bad.json:3:11")


def test_empty_energy_list_gives_empty_census():
    cfg = small_t2(energies=[])
    rep = harness.run_census(cfg)
    assert rep.levels == [] and rep.exit_code == 0
    assert rep.compatibility["passed"] is True


def test_census_report_content(small_report):
    lv = small_report.levels[0]
    assert lv.deduplicated_count == 4 and lv.counted_orbits == 4
    assert lv.bound_status == "satisfied" and lv.predicted_bound == 4
    assert not lv.degenerate_family and not lv.count_discrepancy
    assert small_report.largest_passing_energy == 0.01
    d = small_report.as_dict()
    assert d["bound"]["conjectural_bound_unproven"] == 4
    assert d["levels"][0]["orbits"][0]["floquet"]["nondegenerate"] is True


def test_emit_is_byte_identical(tmp_path, small_report):
    a = harness.emit_report(small_report, tmp_path / "a")
    b = harness.emit_report(harness.run_census(small_t2(), threads=3), tmp_path / "b")
    assert [Path(p).name for p in a] == ["report.json", "orbits.jsonl", "census.tsv"]
    for pa, pb in zip(a, b):
        assert Path(pa).read_bytes() == Path(pb).read_bytes()
    tsv = (tmp_path / "a" / "census.tsv").read_text().splitlines()
    assert len(tsv) == 1 + len(small_report.levels)
    assert tsv[0].split("\t") == list(harness.TSV_COLUMNS)
    assert len((tmp_path / "a" / "orbits.jsonl").read_text().splitlines()) == 4
    assert harness.emit_report(small_report, tmp_path / "c", "tsv")[0].endswith("census.tsv")
    with pytest.raises(ValueError):
        harness.emit_report(small_report, tmp_path / "d", "xml")


def test_degenerate_family_reported():
    rep = harness.run_census(harness.ExperimentConfig.load(CONFIGS / "t2_constant.json"))
    lv = rep.levels[0]
    assert lv.degenerate_family and lv.bound_status == "not-applicable"
    assert lv.counted_orbits == 0 and rep.exit_code == 0
    rec = lv.failures[0]
    assert rec["kind"] == "degenerate-direction"
    assert abs(rec["candidate_period"] - 2 * np.pi) < 1e-6
    assert max(abs(complex(*m) - 1) for m in rec["candidate_floquet"]["multipliers"]) < 1e-6
    assert rec["residuals"]


def test_bound_failure_exit_code(tmp_path):
    cfg = small_t2(seed_grid={"resolution": 1, "phases": 1})
    rep = harness.run_census(cfg)
    assert rep.levels[0].bound_status == "failed" and rep.exit_code == harness.EXIT_BOUND_FAILED
    path = tmp_path / "cfg.json"
    raw = cfg.to_dict()
    raw["output"]["dir"] = str(tmp_path / "out")
    path.write_text(json.dumps(raw))
    assert main(["census", str(path)]) == 2
    assert (tmp_path / "out" / "report.json").exists()


def test_cli_census_format_and_threads(tmp_path, capsys):
    cfg = harness.ExperimentConfig.load(CONFIGS / "s2_zonal.json")
    path = tmp_path / "s2.json"
    path.write_text(cfg.to_text())
    assert main(["census", str(path), "--out-dir", str(tmp_path / "o"), "--format", "tsv",
                 "--threads", "2"]) == 0
    assert sorted(p.name for p in (tmp_path / "o").iterdir()) == ["census.tsv"]
    assert "bound 2: satisfied" in capsys.readouterr().out
    assert main(["census", str(path), "--threads", "0"]) == 1


def test_cli_split(tmp_path, capsys):
    assert main(["split", str(CONFIGS / "split_example.json"), "--out-dir", str(tmp_path)]) == 0
    out = json.loads((tmp_path / "split.json").read_text())
    assert out["k"] == 1 and out["w1_dim"] == 4
    txt = tmp_path / "m.txt"
    txt.write_text("# 2x2\n0 1\n-1 0\n")
    a, n = read_matrix(txt)
    assert a.shape == (2, 2) and n is None
    assert main(["split", str(txt)]) == 0
    assert '"k": 1' in capsys.readouterr().out
    txt.write_text("0 1\n1 0\n")
    assert main(["split", str(txt)]) == 1


def test_cli_probe(tmp_path, capsys):
    raw = json.loads((CONFIGS / "t2_variable.json").read_text())
    raw["probe"] = {"eps": [0.1, 0.03, 0.01], "sample_count": 4}
    path = tmp_path / "p.json"
    path.write_text(json.dumps(raw))
    assert main(["probe", str(path), "--out-dir", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "probe.json").read_text())
    assert abs(res["c0_slope"] - 1) < 0.1
    assert "c0" in capsys.readouterr().out


def test_cli_check_topology(tmp_path, capsys):
    assert main(["check-topology", "S2", "--out-dir", str(tmp_path)]) == 0
    out = json.loads((tmp_path / "topology.json").read_text())
    assert out["unit_bundle_betti"] == [1, 0, 0, 1] and out["bound"]["predicted_min_orbits"] == 2
    assert main(["check-topology", "T2"]) == 0
    assert main(["check-topology", "K3"]) == 1
    assert "unknown manifold" in capsys.readouterr().err


def test_cli_missing_config():
    assert main(["census", "/nonexistent/config.json"]) == 1
