import csv
import json
import os
import textwrap

import pytest

from main import main

SHORT = """\
vehicle:
  truth: perturbed
  model: nominal
path:
  segments:
    - {label: line, kind: line, length: 40.0}
controller:
  name: PROP
run:
  speed_profile: [[0.0, 5.0]]
  duration: 2.0
  y_e0: 0.3
  seed: 3
"""


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "short.yaml"
    path.write_text(textwrap.dedent(SHORT), encoding="utf-8")
    return str(path)


def _summary(out_dir):
    with open(os.path.join(out_dir, "summary.json"), encoding="utf-8") as f:
        return json.load(f)


def test_simulate_writes_every_output(tmp_path, scenario_file):
    out = tmp_path / "run"
    assert main(["simulate", "--scenario", scenario_file, "--out", str(out)]) == 0
    for name in ("trace.csv", "reference.csv", "summary.json", "lateral_error.svg"):
        assert (out / name).exists()
    with open(out / "trace.csv", encoding="utf-8") as f:
        first, header = f.readline(), next(csv.reader(f))
    assert first.startswith("# manifest ")
    assert header[:3] == ["t", "s_ref", "x"]
    summary = _summary(out)
    assert summary["summary"]["steps"] == 201
    assert [seg["label"] for seg in summary["summary"]["segments"]] == ["line"]


def test_simulate_is_reproducible_across_output_dirs(tmp_path, scenario_file):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--scenario", scenario_file, "--out", str(a)]) == 0
    assert main(["simulate", "--scenario", scenario_file, "--out", str(b)]) == 0
    sa, sb = _summary(a), _summary(b)
    assert sa["manifest_hash"] == sb["manifest_hash"]
    assert sa["trace_sha256"] == sb["trace_sha256"]


def test_seed_override_changes_the_manifest(tmp_path, scenario_file):
    assert main(["simulate", "--scenario", scenario_file, "--out", str(tmp_path / "a")]) == 0
    assert main(["simulate", "--scenario", scenario_file, "--out", str(tmp_path / "b"), "--seed", "4"]) == 0
    assert _summary(tmp_path / "a")["manifest_hash"] != _summary(tmp_path / "b")["manifest_hash"]


def test_missing_duration_exits_with_code_2(tmp_path, capsys):
    path = tmp_path / "broken.yaml"
    path.write_text(textwrap.dedent(SHORT).replace("  duration: 2.0\n", ""), encoding="utf-8")
    assert main(["simulate", "--scenario", str(path), "--out", str(tmp_path / "out")]) == 2
    assert "run.duration" in capsys.readouterr().err


@pytest.mark.slow
def test_compare_writes_a_table(tmp_path, scenario_file):
    out = tmp_path / "cmp"
    argv = ["compare", "--scenario", scenario_file, "--out", str(out), "--controller", "PROP", "B", "--seeds", "2"]
    assert main(argv) == 0
    with open(out / "comparison.csv", encoding="utf-8") as f:
        lines = f.read().splitlines()
    assert lines[0].startswith("# manifest ")
    assert lines[1] == "segment,metric,PROP avg,PROP std,B avg,B std"
    assert len(lines) == 2 + 5
    assert (out / "E_RMS.svg").exists()
    assert _summary(out)["columns"] == ["PROP", "B"]


def test_figures_command(tmp_path):
    out = tmp_path / "fig"
    assert main(["figures", "--figure", "lyapunov", "--out", str(out)]) == 0
    for ext in ("csv", "json", "svg"):
        assert (out / f"lyapunov.{ext}").exists()
