import json
import subprocess
import sys

import numpy as np
import pytest

from stochtarget.cli import main
from stochtarget.paths import load_pathset


def write_index(path, name, start_year, months, growth):
    lines = ["date," + name]
    level = 100.0
    for k in range(months):
        y, m = divmod(k, 12)
        lines.append(f"{start_year + y}-{m + 1:02d},{level!r}")
        level *= growth
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def indexes(tmp_path):
    return (write_index(tmp_path / "stock.csv", "stock", 2000, 25, 1.01),
            write_index(tmp_path / "bond.csv", "bond", 2000, 25, 1.003),
            write_index(tmp_path / "cpi.csv", "cpi", 2000, 25, 1.002))


@pytest.fixture(scope="module")
def kou_file(tmp_path_factory):
    out = tmp_path_factory.mktemp("kou") / "train"
    assert main(["simulate", "--paths", "200", "--seed", "3", "--out", str(out)]) == 0
    return out


def test_ingest_real_returns(indexes, tmp_path, capsys):
    stock, bond, cpi = indexes
    out = tmp_path / "panel.csv"
    assert main(["ingest", "--index", f"stock={stock}", "--index", f"bond={bond}", "--cpi", str(cpi),
                 "--out", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert len(rows) == 25 and rows[0].split(",")[1:] == ["stock", "bond"]
    vals = np.array([[float(v) for v in r.split(",")[1:]] for r in rows[1:]])
    np.testing.assert_allclose(vals[:, 0], 1.01 / 1.002, rtol=1e-12)
    np.testing.assert_allclose(vals[:, 1], 1.003 / 1.002, rtol=1e-12)


def test_missing_file_names_path(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    assert main(["ingest", "--index", f"a={missing}", "--out", str(tmp_path / "x.csv")]) == 2
    assert str(missing) in capsys.readouterr().err


def test_mismatched_dates(tmp_path, capsys):
    a = write_index(tmp_path / "a.csv", "a", 2000, 12, 1.01)
    b = write_index(tmp_path / "b.csv", "b", 2001, 12, 1.01)
    assert main(["ingest", "--index", str(a), "--index", str(b), "--out", str(tmp_path / "p.csv")]) == 2
    assert "date axes differ" in capsys.readouterr().err


def test_zero_paths_rejected(tmp_path):
    assert main(["simulate", "--paths", "0", "--out", str(tmp_path / "s")]) == 2


def test_bad_config_key(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("bogus = 1\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "s")]) == 2


def test_config_precedence(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("paths = 7\nperiods = 4  # comment\n")
    assert main(["simulate", "--preset", "paper", "--config", str(cfg), "--paths", "5",
                 "--out", str(tmp_path / "s")]) == 0
    ps = load_pathset(tmp_path / "s")
    assert ps.returns.shape == (5, 4, 2)


def test_bootstrap_deterministic(indexes, tmp_path):
    stock, bond, _ = indexes
    panel = tmp_path / "panel.csv"
    main(["ingest", "--index", f"stock={stock}", "--index", f"bond={bond}", "--out", str(panel)])
    argv = ["bootstrap", "--panel", str(panel), "--mode", "stationary", "--blocksize-months", "6",
            "--paths", "50", "--periods", "3", "--seed", "7", "--out"]
    assert main(argv + [str(tmp_path / "a")]) == 0
    assert main(argv + [str(tmp_path / "b")]) == 0
    assert (tmp_path / "a.npy").read_bytes() == (tmp_path / "b.npy").read_bytes()
    ps = load_pathset(tmp_path / "a")
    np.testing.assert_allclose(ps.returns[..., 0], 1.01**12, rtol=1e-12)


def test_shortfall_train_reaches_zero(kou_file, tmp_path):
    out = tmp_path / "tr"
    assert main(["train", "--paths-file", str(kou_file), "--objective", "shortfall", "--restarts", "1",
                 "--max-iter", "60", "--seed", "2", "--out-dir", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["best_objective"] <= 1e-6 * 300**2
    assert (out / "params.txt").read_text().splitlines()[1] == "3 3 2"


def test_evaluate_constant_policy_zero_fan(kou_file, tmp_path):
    out = tmp_path / "ev"
    assert main(["evaluate", "--paths-file", str(kou_file), "--constant-policy", "0.5,0.5",
                 "--out-dir", str(out)]) == 0
    lines = (out / "fan_wealth_diff.csv").read_text().splitlines()
    assert lines[0] == "time,p5,p20,p50,p80,p95,mean"
    for row in lines[1:]:
        assert all(float(v) == 0.0 for v in row.split(",")[1:])
    summary = json.loads((out / "summary.json").read_text())
    for row in ("constant_proportion", "adaptive"):
        assert {"E", "std", "median", "Pr_below_median_CP", "Pr_below_median_NN"} <= set(summary[row])


def test_evaluate_shape_mismatch(kou_file, tmp_path):
    assert main(["evaluate", "--paths-file", str(kou_file), "--constant-policy", "0.2,0.3,0.5",
                 "--benchmark", "0.2,0.3,0.5", "--out-dir", str(tmp_path / "e")]) == 2


def test_backtest_csv(tmp_path):
    lines = ["date,stock,bond"] + [f"{1990 + k}-01,1.08,1.02" for k in range(30)]
    ret = tmp_path / "hist.csv"
    ret.write_text("\n".join(lines) + "\n")
    out = tmp_path / "bt.csv"
    assert main(["backtest", "--returns", str(ret), "--constant-policy", "0.5,0.5", "--horizon", "30",
                 "--out", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "time,W_adaptive,W_benchmark,p_stock,p_bond"
    assert len(rows) == 32
    t, w, wb, *_ = rows[-1].split(",")
    assert float(t) == 30.0 and float(w) == float(wb)


def test_backtest_wrong_length(tmp_path):
    ret = tmp_path / "hist.csv"
    ret.write_text("date,stock,bond\n1990-01,1.1,1.0\n1990-02,1.1,1.0\n1990-03,1.1,1.0\n")
    assert main(["backtest", "--returns", str(ret), "--constant-policy", "0.5,0.5",
                 "--months-per-period", "2", "--out", str(tmp_path / "o.csv")]) == 2


def test_verify_identity_report(tmp_path, capsys):
    out = tmp_path / "v.json"
    assert main(["verify-theorems", "--N", "360", "--n-tot", "1080", "--mode", "stationary",
                 "--b1", "6", "--b2", "24", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["probability"] == pytest.approx(8.737e-39, rel=1e-4)
    assert "mc_skipped" in rep and "notice" in capsys.readouterr().out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "stochtarget", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "verify-theorems" in res.stdout
