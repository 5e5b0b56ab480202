import json
import subprocess
import sys

import pytest

from conftest import cauchy_schwarz_tensor, example_tensor, screen_failing_tensor
from idealcp import io
from idealcp.cli import main
from idealcp.tensor import from_decomposition, l1_distance


@pytest.fixture
def files(tmp_path):
    out = {}
    for name, a in (("ex1", example_tensor()), ("fail", screen_failing_tensor()),
                    ("cs4", cauchy_schwarz_tensor())):
        p = tmp_path / f"{name}.txt"
        io.save_tensor(a, p)
        out[name] = p
    return out


def test_cliques_command(files, capsys):
    assert main(["cliques", str(files["ex1"])]) == 0
    out = capsys.readouterr().out
    assert "1: 1 2\n2: 1 3\n" in out and "necessary condition: pass" in out
    assert main(["cliques", str(files["fail"]), "--format", "struct"]) == 3
    d = json.loads(capsys.readouterr().out)
    assert d["passed"] is False and [1, 2, 3] in d["uncovered"]


def test_screen_reports_dominance(files, capsys):
    assert main(["screen", str(files["fail"])]) == 3
    out = capsys.readouterr().out
    assert "zero-entry dominance violations:" in out and "uncovered: (1,2,3)" in out


def test_decompose_cp_writes_both_forms(files, capsys):
    assert main(["decompose", str(files["ex1"]), "--level", "2"]) == 0
    out = capsys.readouterr().out
    assert "verdict: CompletelyPositive" in out and "timings (s):" in out
    weighted = files["ex1"].with_name("ex1.decomp.txt")
    absorbed = files["ex1"].with_name("ex1.decomp.absorbed.txt")
    a = example_tensor()
    for p in (weighted, absorbed):
        d = io.parse_decomposition(p.read_text())
        assert l1_distance(from_decomposition(d), a) <= 1e-5


def test_decompose_dense_reports_block_sizes(files, capsys):
    assert main(["decompose", str(files["ex1"]), "--level", "2", "--dense"]) == 0
    assert "max PSD block: dense 10 vs sparse 6 at t=2" in capsys.readouterr().out


def test_decompose_not_cp_writes_certificate(files, capsys):
    assert main(["decompose", str(files["cs4"]), "--level", "2"]) == 3
    cert = json.loads(files["cs4"].with_name("cs4.cert.json").read_text())
    assert cert["type"] == "SdpInfeasibility" and cert["report"]["valid"]
    assert main(["decompose", str(files["fail"])]) == 3
    cert = json.loads(files["fail"].with_name("fail.cert.json").read_text())
    assert cert["type"] == "CliqueViolation"


def test_decompose_inconclusive(files, tmp_path):
    out = tmp_path / "v.json"
    code = main(["decompose", str(files["ex1"]), "--level", "2", "--max-level", "2",
                 "--tol-recon", "-1", "-o", str(out)])
    assert code == 4
    assert json.loads(out.read_text())["verdict"] == "Inconclusive"


def test_struct_output_deterministic(files, tmp_path):
    outs = []
    for k in range(2):
        p = tmp_path / f"v{k}.json"
        assert main(["decompose", str(files["ex1"]), "--format", "struct", "--no-timings",
                     "-o", str(p)]) == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_env_override(files, tmp_path, monkeypatch):
    monkeypatch.setenv("IDEALCP_MAX_LEVEL", "2")
    monkeypatch.setenv("IDEALCP_TOL_RECON", "-1")
    assert main(["decompose", str(files["ex1"]), "-o", str(tmp_path / "v.json")]) == 4


def test_gen_binary_count(capsys):
    # ceil(0.5 * (10 - 3)) + 3 = 7 nonzeros
    assert main(["gen", "binary", "--n", "3", "--m", "3", "--nzd", "0.5", "--seed", "1"]) == 0
    a = io.parse_tensor(capsys.readouterr().out)
    assert a.nnz == 7


def test_gen_cp_deterministic_with_witness(tmp_path):
    paths = []
    for k in range(2):
        p = tmp_path / f"t{k}.txt"
        assert main(["gen", "cp", "--n", "5", "--m", "3", "--atoms", "3", "--seed", "4",
                     "-o", str(p), "--witness", str(tmp_path / "w.txt")]) == 0
        paths.append(p)
    assert paths[0].read_text() == paths[1].read_text()
    a = io.load_tensor(paths[0])
    w = io.parse_decomposition((tmp_path / "w.txt").read_text())
    assert l1_distance(from_decomposition(w), a) < 1e-9


def test_input_errors(tmp_path, capsys):
    assert main(["decompose", str(tmp_path / "missing.txt")]) == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("3 2\n1 1 1 1\n1 1 1 2\n")
    assert main(["cliques", str(bad)]) == 2
    assert "line 3" in capsys.readouterr().err
    assert main(["nonsense"]) == 2
    assert main(["gen", "binary", "--n", "3", "--m", "3", "--nzd", "1.5"]) == 2


def test_bench_struct(tmp_path, capsys):
    suite = tmp_path / "s.json"
    suite.write_text(json.dumps({"kind": "screen", "n": [6], "m": [3], "nzd": [0.5],
                                 "instances": 2, "seed": 0}))
    assert main(["bench", str(suite), "--format", "struct", "--no-timings"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["cells"][0]["instances"] == 2 and "max_time" not in rep["cells"][0]


def test_module_entry_point(files):
    r = subprocess.run([sys.executable, "-m", "idealcp", "cliques", str(files["ex1"])],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "1: 1 2" in r.stdout
