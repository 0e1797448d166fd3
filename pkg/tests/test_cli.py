import io
import json
import subprocess
import sys

import numpy as np
import pytest

from perfid.cli import EXIT_GENERICITY, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, main, read_config, UsageError
from perfid.tensors import Decomposition, RankOneTerm, dumps, loads


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def test_info_345():
    code, text = run("info", "3,4,5", "--json")
    data = json.loads(text)
    assert code == EXIT_OK
    assert data["expected_generic_rank"] == "6"
    assert data["perfect"] and data["balanced"]
    assert data["de_lathauwer_bound"] == 5


def test_info_boundary_and_text():
    code, text = run("info", "3,4,7")
    assert code == EXIT_OK
    assert "boundary" in text and "120" in text
    data = json.loads(run("info", "2,2,2,3", "--json")[1])
    assert data["expected_generic_rank"] == "4" and data["de_lathauwer_bound"] == 3


def test_info_symmetric():
    data = json.loads(run("info", "sym5:3", "--json")[1])
    assert data["expected_generic_rank"] == "7"
    assert "regime" not in data


def test_usage_errors(capsys):
    assert run("info", "3,,4")[0] == EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        run("frobnicate")
    assert info.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        run("count")
    assert info.value.code == EXIT_USAGE
    assert run("count", "2,2,2,2")[0] == EXIT_USAGE


def test_koszul_table_cli():
    code, text = run("koszul-table", "3,4,5")
    assert code == EXIT_OK
    line = next(l for l in text.splitlines() if l.startswith("K_(1,0,-1) "))
    cells = [c.strip() for c in line.split("|")]
    assert cells[1:] == ["12x15", "2", "6"]
    text22 = run("koszul-table", "2,2")[1]
    assert "K_(0,-1)" in text22 and len(text22.strip().splitlines()) == 3


def test_random_decompose_verify(tmp_path, capsys):
    t, truth, rec = tmp_path / "t.json", tmp_path / "truth.json", tmp_path / "rec.json"
    assert run("random-tensor", "3,4,5", "--seed", "7", "-o", str(t), "--truth", str(truth))[0] == EXIT_OK
    assert run("decompose", str(t), "-o", str(rec))[0] == EXIT_OK
    assert "relative_residual" in capsys.readouterr().err
    dec = loads(rec.read_text())
    assert isinstance(dec, Decomposition) and dec.rank == 6
    code, text = run("verify", str(t), str(rec))
    assert code == EXIT_OK and text.startswith("pass")
    assert run("verify", str(t), str(truth))[0] == EXIT_OK


def test_decompose_2223_cli(tmp_path):
    t = tmp_path / "t.json"
    run("random-tensor", "2,2,2,3", "--seed", "3", "-o", str(t))
    code, text = run("decompose", str(t))
    assert code == EXIT_OK
    assert len(json.loads(text)["terms"]) == 4


def test_decompose_unsupported_and_generic_gate(tmp_path):
    t = tmp_path / "t.json"
    run("random-tensor", "2,2,2", "--rank", "2", "-o", str(t))
    assert run("decompose", str(t))[0] == EXIT_USAGE
    run("random-tensor", "3,4,5", "--rank", "5", "-o", str(t))
    assert run("decompose", str(t))[0] == EXIT_GENERICITY
    assert run("decompose", str(t), "--rank", "5")[0] == EXIT_OK
    assert run("decompose", str(tmp_path / "missing.json"))[0] == EXIT_USAGE


def test_verify_dropped_term(tmp_path):
    t, truth, bad = tmp_path / "t.json", tmp_path / "d.json", tmp_path / "bad.json"
    run("random-tensor", "2,2,2,3", "--seed", "1", "-o", str(t), "--truth", str(truth))
    dec = loads(truth.read_text())
    T = loads(t.read_text())
    dropped = dec.terms[0]
    terms = [RankOneTerm(0.0, dropped.vectors)] + list(dec.terms[1:])
    bad.write_text(dumps(dec.replace_terms(terms)))
    code, text = run("verify", str(t), str(bad))
    assert code == EXIT_NUMERICAL and text.startswith("fail")
    res = float(text.split("residual ")[1].split()[0])
    expect = np.linalg.norm(dropped.tensor(dec.format)) / T.norm()
    assert res == pytest.approx(expect, rel=1e-3)  # printed with 4 digits
    assert run("verify", str(t), str(bad), "--tol", "1")[0] == EXIT_OK


def test_verify_format_mismatch(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run("random-tensor", "2,2,2,3", "-o", str(a))
    run("random-tensor", "3,4,5", "-o", str(tmp_path / "x.json"), "--truth", str(b))
    assert run("verify", str(a), str(b))[0] == EXIT_USAGE


def test_count_echoes_seed_and_dumps(tmp_path):
    dump = tmp_path / "orbits.json"
    code, text = run("count", "2,2,2,3", "--seed", "4", "--stabilize", "5", "--json", "--dump", str(dump))
    assert code == EXIT_OK
    lines = text.strip().splitlines()
    assert lines[0].startswith("# config:") and '"seed": 4' in lines[0]
    report = json.loads(lines[1])
    assert report["orbit_count"] == 1 and report["seed"] == 4 and report["stabilized"]
    payload = json.loads(dump.read_text())
    assert len(payload["decompositions"]) == 1


def test_count_reproducible():
    a = json.loads(run("count", "2,2,2,5", "--seed", "2", "--stabilize", "3", "--json")[1].splitlines()[1])
    b = json.loads(run("count", "2,2,2,5", "--seed", "2", "--stabilize", "3", "--json")[1].splitlines()[1])
    assert a["orbit_count"] == b["orbit_count"] and a["loops_run"] == b["loops_run"]


def test_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\nseed = 9\nstabilize = 2\nmax-loops = 4\npredictor = euler\n")
    assert read_config(cfg) == {"seed": 9, "stabilize": 2, "max_loops": 4, "predictor": "euler"}
    code, text = run("--config", str(cfg), "count", "2,2,2,3", "--json")
    assert code == EXIT_OK
    report = json.loads(text.splitlines()[1])
    assert report["seed"] == 9 and report["loops_run"] == 2
    # explicit flags win over the file
    text = run("--config", str(cfg), "count", "2,2,2,3", "--seed", "3", "--json")[1]
    assert json.loads(text.splitlines()[1])["seed"] == 3
    cfg.write_text("bogus = 1\n")
    with pytest.raises(UsageError):
        read_config(cfg)
    with pytest.raises(SystemExit) as info:
        run("--config", str(cfg), "info", "3,4,5")
    assert info.value.code == EXIT_USAGE


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "perfid", "info", "3,3,5"], capture_output=True, text=True)
    assert out.returncode == 0 and "decompositions" in out.stdout
