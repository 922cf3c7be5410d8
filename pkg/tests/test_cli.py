import csv
import json

import pytest

from roipose.cli import main


def run(*argv):
    return main([str(a) for a in argv])


def usage_exit(*argv):
    with pytest.raises(SystemExit) as info:
        run(*argv)
    return info.value.code


@pytest.fixture
def scene(tmp_path):
    path = tmp_path / "scene.json"
    assert run("synth", "--seed", 7, "--count", 10, "--model", "cube", "--out", path) == 0
    return path


def test_synth_is_byte_identical(tmp_path, scene):
    other = tmp_path / "again.json"
    assert run("synth", "--seed", 7, "--count", 10, "--model", "cube", "--out", other) == 0
    assert scene.read_bytes() == other.read_bytes()
    manifest = json.loads((tmp_path / "scene.json.manifest.json").read_text())
    assert manifest["command"] == "synth" and manifest["seed"] == 7 and "duration_s" in manifest


def test_synth_schema(scene):
    doc = json.loads(scene.read_text())
    inst = doc["instances"][0]
    assert len(inst["pose"]["q"]) == 4 and len(inst["pose"]["t"]) == 3
    assert len(inst["roi"]) == 4 and len(inst["box8"]) == 8


def test_synth_usage_errors(tmp_path, capsys):
    assert usage_exit("synth", "--seed", 1) == 2
    assert usage_exit("synth", "--jitter", 0.9, "--out", tmp_path / "x.json") == 2
    assert "--jitter" in capsys.readouterr().err


def test_synth_unknown_model(tmp_path):
    assert run("synth", "--model", "teapot", "--out", tmp_path / "x.json") == 1


def test_roundtrip(scene, tmp_path, capsys):
    out = tmp_path / "rt.json"
    assert run("roundtrip", "--scene", scene, "--out", out) == 0
    report = json.loads(out.read_text())
    assert report["passed"] and report["max_error"] < 1e-9
    assert run("roundtrip", "--scene", scene, "--tol", 0) == 1


def test_roundtrip_rejects_negative_depth(scene, capsys):
    doc = json.loads(scene.read_text())
    doc["instances"][3]["pose"]["t"][2] = -1.0
    scene.write_text(json.dumps(doc))
    assert run("roundtrip", "--scene", scene) == 1
    assert "depth" in capsys.readouterr().err


def test_roundtrip_bad_json(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{\n  \"instances\": [\n")
    assert run("roundtrip", "--scene", p) == 1


def test_refine_zero_perturbation(scene, tmp_path):
    out = tmp_path / "ref.json"
    assert run("refine", "--scene", scene, "--rot-deg", 0, "--depth-pct", 0, "--out", out) == 0
    doc = json.loads(out.read_text())
    assert all(r["iterations"] == 0 and r["converged"] for r in doc["instances"])


def test_refine_modes(scene, tmp_path, capsys):
    out = tmp_path / "ref.json"
    assert run("refine", "--scene", scene, "--out", out) == 0
    doc = json.loads(out.read_text())
    assert doc["summary"]["reached_label"] == 10
    for r in doc["instances"]:
        assert all(b <= a for a, b in zip(r["trace"], r["trace"][1:]))
    out2 = tmp_path / "ref2d.json"
    assert run("refine", "--scene", scene, "--mode", "coords2d", "--iters", 50, "--out", out2) == 0
    assert len(json.loads(out2.read_text())["instances"]) == 10
    assert usage_exit("refine", "--scene", scene, "--mode", "coords9d") == 2


def _shifted(scene, tmp_path, dx):
    doc = json.loads(scene.read_text())
    for inst in doc["instances"]:
        inst["pose"]["t"][0] += dx
    p = tmp_path / "est.json"
    p.write_text(json.dumps(doc))
    return p


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_eval_identical(scene, tmp_path):
    out = tmp_path / "e.csv"
    assert run("eval", "--est", scene, "--gt", scene, "--out", out) == 0
    rows = _read_csv(out)
    assert rows[0] == ["instance_id", "add", "add_s"]
    assert all(float(r[1]) == 0.0 and float(r[2]) == 0.0 for r in rows[1:11])
    assert rows[11][0] == "auc" and float(rows[11][1]) == 1.0


def test_eval_shifted(scene, tmp_path):
    est = _shifted(scene, tmp_path, 0.02)
    out = tmp_path / "e.csv"
    assert run("eval", "--est", est, "--gt", scene, "--threshold", 0.1, "--out", out) == 0
    rows = _read_csv(out)
    assert [int(r[0]) for r in rows[1:11]] == list(range(10))
    for r in rows[1:11]:
        assert float(r[1]) == pytest.approx(0.02, abs=1e-12)
    auc = {r[0]: r for r in rows[11:]}
    assert float(auc["auc"][1]) == pytest.approx(0.8, abs=1e-12)
    assert float(auc["mean"][1]) == pytest.approx(0.02, abs=1e-12)


def test_eval_missing_instance(scene, tmp_path, capsys):
    doc = json.loads(scene.read_text())
    del doc["instances"][4]
    p = tmp_path / "gt.json"
    p.write_text(json.dumps(doc))
    assert run("eval", "--est", scene, "--gt", p) == 1
    assert "4" in capsys.readouterr().err


def test_check_suites(capsys):
    assert run("check", "--suite", "homography", "--seed", 1) == 0
    assert "homography.center_anchor" in capsys.readouterr().out
    assert run("check", "--suite", "homography", "--inject-fault") == 1
    assert run("check", "--suite", "attention", "--inject-fault") == 1
    assert usage_exit("check", "--suite", "bogus") == 2


def test_module_entry_point(scene):
    import subprocess
    import sys
    proc = subprocess.run([sys.executable, "-m", "roipose", "roundtrip", "--scene", str(scene)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "PASS" in proc.stdout
