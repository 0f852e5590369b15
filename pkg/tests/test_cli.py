import json
import subprocess
import sys

import numpy as np
import pytest

from agmonlab.cli import main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_gen_then_verify(tmp_path, capsys):
    gfile = tmp_path / "g.json"
    assert run(["gen", "--lattice", "1", "--radius", "80", "--well", "-1.5", "--out", str(gfile)], capsys)[0] == 0
    rep = tmp_path / "r.json"
    code, _, err = run(["verify", "--suite", "below-ess", "--graph", str(gfile), "--out", str(rep)], capsys)
    assert code == 0 and "below-ess: pass" in err
    doc = json.loads(rep.read_text())
    assert doc["status"] == "pass" and doc["config"]["suite"] == "below-ess"
    code, _, _ = run(["verify", "--suite", "below-ess", "--graph", str(gfile), "--perturb-rhs", "1e-6",
                      "--out", str(tmp_path / "bad.json")], capsys)
    assert code == 1


def test_spectrum_p3(capsys):
    code, out, _ = run(["spectrum", "--family", "path", "--n", "3", "--k", "3"], capsys)
    assert code == 0
    np.testing.assert_allclose(json.loads(out)["eigenvalues"], [0.0, 1.0, 3.0], atol=1e-12)


def test_spectrum_essential(capsys):
    code, out, _ = run(["spectrum", "--lattice", "1", "--radius", "60", "--well", "-1.5", "--exhaustion", "1:8:1"],
                       capsys)
    doc = json.loads(out)
    assert doc["eigenvalues"][0] == pytest.approx(-0.5, abs=1e-9)
    assert doc["lambda0_ess_estimate"] == pytest.approx(0.0, abs=0.05)


@pytest.mark.parametrize("argv", [
    ["verify"],
    ["verify", "--suite", "nope"],
    ["spectrum", "--lattice", "1"],
    ["spectrum", "--graph", "/nonexistent/g.json"],
    ["spectrum", "--family", "path"],
    ["spectrum", "--family", "path", "--n", "3", "--k", "9"],
    ["verify", "--suite", "sparse", "--exhaustion", "3:1:1"],
    ["gen", "--lattice", "1", "--radius", "2", "--family", "path", "--n", "2"],
])
def test_usage_errors(argv, capsys):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 3


def test_bad_graph_file(tmp_path, capsys):
    p = tmp_path / "g.json"
    p.write_text("{not json")
    assert run(["spectrum", "--graph", str(p)], capsys)[0] == 3


def test_hypothesis_exit(capsys):
    code, _, err = run(["verify", "--suite", "below-ess", "--gap", "5"], capsys)
    assert code == 2 and "hypothesis" in err


def test_report_merge(tmp_path, capsys):
    files = {}
    for name, status in (("a", "pass"), ("b", "hypothesis"), ("c", "violation")):
        files[name] = tmp_path / f"{name}.json"
        files[name].write_text(json.dumps({"status": status, "suite": name, "checks": []}))
    assert run(["report", str(files["a"])], capsys)[0] == 0
    assert run(["report", str(files["a"]), str(files["b"])], capsys)[0] == 2
    code, out, _ = run(["report", str(files["b"]), str(files["c"]), str(files["a"])], capsys)
    assert code == 1 and json.loads(out)["all_pass"] is False
    bad = tmp_path / "x.json"
    bad.write_text("[]")
    assert run(["report", str(bad)], capsys)[0] == 3


def test_hardy_csv(tmp_path, capsys):
    out = tmp_path / "h.csv"
    assert run(["hardy", "--lattice", "3", "--radius", "6", "--out", str(out)], capsys)[0] == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "vertex,label,v,w,v_alpha,norm_x,w_norm_x_sq"
    assert len(lines) == 1 + 13 ** 3


def test_agmon_metric_csv(capsys):
    code, out, _ = run(["agmon-metric", "--lattice", "1", "--radius", "5", "--w", "0.25"], capsys)
    rows = out.splitlines()
    assert code == 0 and rows[0] == "vertex_id,label,dist,pred"
    # uniform path with scaled metric 1/sqrt(2) per edge and w = 1/4: dist = |x| * 0.5 / sqrt(2)
    dist = {int(r.split(",")[0]): float(r.split(",")[2]) for r in rows[1:]}
    assert dist[10] == pytest.approx(5 * 0.5 / np.sqrt(2), rel=1e-12)


def test_determinism_subprocess(tmp_path):
    outs = []
    for i in range(2):
        p = tmp_path / f"r{i}.json"
        subprocess.run([sys.executable, "-m", "agmonlab", "verify", "--suite", "two-sided", "--seed", "7",
                        "--out", str(p)], check=True, capture_output=True)
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]
