import json

import pytest

from hammerpuf.cli import main


@pytest.fixture
def ws(tmp_path, monkeypatch):
    monkeypatch.setenv("HAMMERPUF_WORKSPACE", str(tmp_path / "ws"))
    monkeypatch.chdir(tmp_path)
    return tmp_path / "ws"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _device(capsys, ws, seed=1):
    code, out, err = run(capsys, "device", "gen", "--seed", str(seed))
    assert code == 0
    return ws / "devices" / f"device-{seed}.json", out.strip()


def _query(capsys, dev, seed, *extra):
    code, out, _ = run(capsys, "puf", "query", "--device", str(dev), "--puf-size", "32768",
                       "--measurement-seed", str(seed), "--out", f"m{seed}.json", *extra)
    assert code == 0
    return f"m{seed}.json", int(out)


def test_device_gen_notes_shipped_calibration(ws, capsys):
    path, device_id = _device(capsys, ws)
    data = json.loads(path.read_text())
    assert len(device_id) == 16
    assert data["device_seed"] == 1
    _, _, err = run(capsys, "device", "gen", "--seed", "2")
    assert "note: using shipped calibration" in err


def test_missing_params_file_falls_back(ws, capsys):
    code, _, err = run(capsys, "device", "gen", "--seed", "3", "--params", "nope.json")
    assert code == 0 and "shipped calibration" in err


def test_refuses_overwrite_without_force(ws, capsys):
    path, _ = _device(capsys, ws)
    before = path.read_text()
    code, _, err = run(capsys, "device", "gen", "--seed", "1")
    assert code == 2 and "--force" in err
    assert run(capsys, "device", "gen", "--seed", "1", "--force")[0] == 0
    assert path.read_text() == before


def test_invalid_geometry_is_usage_error(ws, capsys):
    code, _, err = run(capsys, "device", "gen", "--seed", "1", "--rows-per-bank", "0")
    assert code == 2 and "rows_per_bank" in err


def test_query_deterministic(ws, capsys):
    dev, _ = _device(capsys, ws)
    a, na = _query(capsys, dev, 4)
    text = json.loads(open(a).read())
    b = run(capsys, "puf", "query", "--device", str(dev), "--puf-size", "32768",
            "--measurement-seed", "4", "--out", a, "--force")
    assert b[0] == 0
    again = json.loads(open(a).read())
    text.pop("created_at"), again.pop("created_at")
    assert text == again and na > 0


def test_bad_iv_and_pattern_overflow(ws, capsys):
    dev, _ = _device(capsys, ws)
    code, _, _ = run(capsys, "puf", "query", "--device", str(dev), "--measurement-seed", "1",
                     "--puf-iv", "0x100")
    assert code == 2
    code, _, err = run(capsys, "puf", "query", "--device", str(dev), "--measurement-seed", "1",
                       "--puf-size", str(512 * 1024))
    assert code == 2


def test_metrics_modes(ws, capsys):
    dev, _ = _device(capsys, ws)
    files = [_query(capsys, dev, s)[0] for s in range(3)]
    code, out, _ = run(capsys, "metrics", "--mode", "intra", *files)
    assert code == 0 and out.splitlines()[0] == "id_a,id_b,jaccard,kind"
    assert len(out.splitlines()) == 4
    code, out, _ = run(capsys, "metrics", "--mode", "intra", "--format", "json", *files)
    assert json.loads(out)["count"] == 3
    code, out, _ = run(capsys, "metrics", "--mode", "entropy", files[0])
    assert json.loads(out)[0]["n"] == 32768 * 8


def test_fe_enroll_and_reconstruct(ws, capsys):
    dev, _ = _device(capsys, ws)
    files = [_query(capsys, dev, s)[0] for s in range(5)]
    code, out, _ = run(capsys, "fe", "enroll", *files, "--rng-seed", "1", "--reveal-key",
                       "--out", "helper.json")
    assert code == 0
    key = out.strip()
    fresh, _ = _query(capsys, dev, 99)
    code, out, _ = run(capsys, "fe", "reconstruct", fresh, "--helper", "helper.json",
                       "--reveal-key")
    assert code == 0 and out.strip() == key

    other, _ = _device(capsys, ws, seed=2)
    code, _, _ = run(capsys, "puf", "query", "--device", str(other), "--puf-size", "32768",
                     "--measurement-seed", "0", "--out", "other.json")
    code, _, err = run(capsys, "fe", "reconstruct", "other.json", "--helper", "helper.json")
    assert code == 1 and "failed" in err


def test_fe_config_mismatch(ws, capsys):
    dev, _ = _device(capsys, ws)
    files = [_query(capsys, dev, s)[0] for s in range(3)]
    assert run(capsys, "fe", "enroll", *files, "--out", "h.json")[0] == 0
    run(capsys, "puf", "query", "--device", str(dev), "--puf-size", "32768", "--rh-time", "60",
        "--measurement-seed", "1", "--out", "x.json")
    code, _, _ = run(capsys, "fe", "reconstruct", "x.json", "--helper", "h.json")
    assert code == 2


def test_missing_input_file(ws, capsys):
    code, _, err = run(capsys, "metrics", "--mode", "entropy", "absent.json")
    assert code == 2 and "no such file" in err


def test_experiment_writes_reports(ws, capsys):
    code, out, _ = run(capsys, "experiment", "decay", "--scale", "0.05", "--master-seed", "2")
    assert code == 0
    assert "PASS" in out or "FAIL" in out
    rep = ws / "reports"
    assert (rep / "decay-2.json").exists() and (rep / "decay-2.csv").exists()
    assert run(capsys, "experiment", "decay", "--scale", "0.05", "--master-seed", "2")[0] == 2


def test_experiment_uniqueness_artifacts(ws, capsys):
    code, _, _ = run(capsys, "experiment", "uniqueness", "--scale", "0.05", "--out-dir", "r")
    assert code == 0
    names = {p.name for p in (ws.parent / "r").iterdir()}
    assert names == {"uniqueness-0.json", "uniqueness-0.csv", "uniqueness-0-pairs.csv",
                     "uniqueness-0-histogram.svg"}
