import json

import pytest

from juliapprox import cli
from juliapprox import dynamics as dyn

DISK = '{"type": "disk", "center": [0, 0], "radius": 1}'
SEGMENT = '{"type": "segment", "a": [-1, 0], "b": [1, 0]}'
BAD_POLYGON = '{"type": "polygon", "vertices": [[0, 0], [1, 1], [1, 0], [0, 1]]}'


def _run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_nodes_csv(tmp_path, capsys):
    out = tmp_path / "nodes.csv"
    code, _, _ = _run(["nodes", "--set", DISK, "--n", "16", "--out", str(out)], capsys)
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("index,re,im")
    assert len(lines) == 18


def test_lebesgue_equispaced(tmp_path, capsys):
    out = tmp_path / "leb.csv"
    code, _, _ = _run(["lebesgue", "--set", SEGMENT, "--family", "equispaced", "--n-list", "2",
                       "--out", str(out)], capsys)
    assert code == 0
    row = out.read_text().splitlines()[1].split(",")
    assert float(row[1]) == pytest.approx(1.25, abs=1e-6)


def test_config_errors(capsys):
    code, _, err = _run(["nodes", "--set", BAD_POLYGON], capsys)
    assert code == 2
    assert "polygon not simple" in json.loads(err.strip().splitlines()[-1])["error"]
    code, _, _ = _run(["nodes", "--set", DISK, "--n", "0"], capsys)
    assert code == 2
    code, _, _ = _run(["approximate", "--set", DISK, "--cap", "0"], capsys)
    assert code == 2


def test_config_file_overrides_flags(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 4}))
    out = tmp_path / "nodes.csv"
    code, _, _ = _run(["nodes", "--set", DISK, "--n", "16", "--config", str(cfg), "--out", str(out)],
                      capsys)
    assert code == 0
    assert len(out.read_text().splitlines()) == 6
    cfg.write_text(json.dumps({"bogus": 1}))
    code, _, _ = _run(["nodes", "--set", DISK, "--config", str(cfg)], capsys)
    assert code == 2


def test_precondition_exit(capsys):
    code, _, err = _run(["approximate", "--set", DISK, "--n", "8", "--resolution", "32"], capsys)
    assert code == 3
    doc = json.loads(err.strip().splitlines()[-1])
    assert 2 in doc["failing_conditions"]


def test_approximate_ok_and_deterministic(tmp_path, capsys):
    outs = []
    for k in range(2):
        out = tmp_path / f"a{k}.json"
        code, _, _ = _run(["approximate", "--set", DISK, "--eps", "0.5", "--resolution", "64",
                           "--samples", "300", "--out", str(out)], capsys)
        assert code == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    doc = json.loads(outs[0])
    assert doc["certificate"]["passed"] and doc["degree"] == doc["n"] + 1


def test_certificate_failure_exit(monkeypatch, capsys):
    def failing(*args, **kwargs):
        return {"checks": [], "samples": 0, "cap": 0, "margin": 0.0, "failures": {"a": 1},
                "passed": False}

    monkeypatch.setattr(dyn, "certify_inclusions", failing)
    code, _, _ = _run(["approximate", "--set", DISK, "--resolution", "32", "--samples", "50"], capsys)
    assert code == 4


def test_rates_deterministic(tmp_path, capsys):
    outs = []
    for k in range(2):
        out = tmp_path / f"r{k}.csv"
        code, _, _ = _run(["rates", "--set", DISK, "--n-list", "16,32", "--resolution", "128",
                           "--out", str(out)], capsys)
        assert code == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    assert outs[0].decode().splitlines()[0] == "n,s_n,gamma_measured,gamma_bound,chi_measured,chi_bound,pass"


def test_render_expands_window(tmp_path, capsys):
    out = tmp_path / "k.pgm"
    code, _, err = _run(["render", "--poly", "[[0, 0], [0, 0], [1, 0]]", "--window=-1,1,-1,1",
                         "--resolution", "32", "--out", str(out)], capsys)
    assert code == 0
    assert "warning" in err
    assert out.read_bytes().startswith(b"P5\n32 32\n255\n")


def test_help_shows_defaults(capsys):
    with pytest.raises(SystemExit):
        cli.main(["approximate", "--help"])
    out = capsys.readouterr().out
    assert "default: 0.5" in out and "default: 1000" in out
