import json

import pytest

from grouptest.cli import main
from grouptest.core import PoolDesign, girth_at_least_6, load_design, save_design
from grouptest.experiment import ExperimentSpec, render_csv, run_experiment


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def path_file(tmp_path):
    path = tmp_path / "path.txt"
    save_design(PoolDesign(3, [[0, 1], [1, 2]]), path)
    return path


def test_design_rr6(tmp_path, capsys):
    out = tmp_path / "d.json"
    code, text, _ = run(capsys, "design", "--family", "rr6", "--n", 9, "--l", 2, "--m", 6,
                        "--seed", 1, "--out", out)
    assert code == 0
    d = load_design(out)
    assert girth_at_least_6(d) and d.n_tests == 6
    meta = json.loads((tmp_path / "d.json.meta.json").read_text())
    assert meta["girth_at_least_6"] and meta["variable_degree"]["min"] == 2
    assert meta["test_degree"] == {"min": 3, "max": 3, "mean": 3.0}
    assert json.loads(text) == meta


def test_design_from_p(tmp_path, capsys):
    out = tmp_path / "d.txt"
    code, text, _ = run(capsys, "design", "--family", "pp", "--n", 1024, "--p", 0.0625,
                        "--seed", 2, "--out", out)
    assert code == 0 and load_design(out).n_tests == 482
    assert json.loads(text)["L"] == 7


def test_decode_hand_example(path_file, capsys):
    code, text, _ = run(capsys, "decode", "--design", path_file, "--x", "100")
    res = json.loads(text)
    assert code == 0 and res["total_tests"] == 2
    assert res["sure_zeros"] == [1, 2] and res["sure_ones"] == [0]


def test_decode_from_file(path_file, tmp_path, capsys):
    xf = tmp_path / "x.txt"
    xf.write_text("110\n")
    code, text, _ = run(capsys, "decode", "--design", path_file, "--x-file", xf)
    assert json.loads(text)["total_tests"] == 5


def test_analyze_c(capsys):
    code, text, _ = run(capsys, "analyze", "--quantity", "c", "--p", 0.1)
    res = json.loads(text)
    assert code == 0 and res["c"] == pytest.approx(0.480192, abs=1e-6)
    assert res["inputs"] == {"quantity": "c", "p": 0.1}


@pytest.mark.parametrize("argv, key", [
    (["--quantity", "U", "--p", "0.1"], "U"),
    (["--quantity", "lower-bound", "--p", "0.01", "--n", "1000"], "lower_bound"),
    (["--quantity", "Rp", "--p", "0.0625", "--n", "4096"], "Rp"),
    (["--quantity", "Rp", "--p", "0.1", "--k", "5", "--l", "2"], "Rp"),
    (["--quantity", "pp-u0", "--p", "0.1", "--n", "50", "--m", "10", "--k", "5"], "pp_u0"),
    (["--quantity", "pp-opt", "--p", "0.01", "--n", "5000"], "ratio"),
    (["--quantity", "params", "--p", "0.0625", "--n", "1024", "--family", "rp"], "M"),
    (["--quantity", "A-bar", "--p", "0.1", "--n", "50"], "A_bar"),
])
def test_analyze_quantities(capsys, argv, key):
    code, text, _ = run(capsys, "analyze", *argv)
    assert code == 0 and key in json.loads(text)


def test_analyze_b_csv(path_file, capsys):
    code, text, _ = run(capsys, "analyze", "--quantity", "B", "--p", 0.5, "--design", path_file,
                        "--format", "csv")
    header, row = text.strip().splitlines()
    assert header.split(",")[-1] == "B" and float(row.split(",")[-1]) == pytest.approx(0.625)


def test_missing_option_is_usage_error(capsys):
    code, _, err = run(capsys, "analyze", "--quantity", "pp-u0", "--p", 0.1)
    assert code == 2 and json.loads(err)["error"] == "usage"


def test_bad_file_is_structured_error(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("3 1\n0 9\n")
    code, _, err = run(capsys, "decode", "--design", bad, "--x", "100")
    assert code == 1 and "out of range" in json.loads(err)["message"]


def test_simulate_design_file(path_file, tmp_path, capsys):
    out = tmp_path / "s.csv"
    code, _, _ = run(capsys, "simulate", "--design", path_file, "--p", 0.5, "--exact", "--out", out)
    header, row = out.read_text().strip().splitlines()
    cols = dict(zip(header.split(","), row.split(",")))
    assert code == 0
    for c in ("N", "p", "M", "L", "family", "seed", "mean_T", "se", "mean_U0", "mean_U1", "ratio"):
        assert c in cols
    assert float(cols["mean_U0"]) == pytest.approx(0.625)


def test_simulate_family_json(capsys):
    code, text, _ = run(capsys, "simulate", "--family", "rp", "--n", 512, "--p", 0.0625,
                        "--trials", 200, "--design-samples", 2, "--seed", 3)
    res = json.loads(text)
    assert code == 0 and res["designs"] == 2 and res["trials"] == 400
    code, again, _ = run(capsys, "simulate", "--family", "rp", "--n", 512, "--p", 0.0625,
                         "--trials", 200, "--design-samples", 2, "--seed", 3)
    assert again == text


def test_env_seed_default(capsys, monkeypatch):
    monkeypatch.setenv("GT_SEED", "41")
    _, text, _ = run(capsys, "simulate", "--family", "rp", "--n", 256, "--p", 0.0625, "--trials", 10)
    assert json.loads(text)["seed"] == 41
    _, text, _ = run(capsys, "simulate", "--family", "rp", "--n", 256, "--p", 0.0625,
                     "--trials", 10, "--seed", 5)
    assert json.loads(text)["seed"] == 5


def test_config_file_flags_win(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"quantity": "c", "p": 0.3}))
    _, text, _ = run(capsys, "analyze", "--config", cfg)
    assert json.loads(text)["inputs"]["p"] == 0.3
    _, text, _ = run(capsys, "analyze", "--config", cfg, "--p", 0.1)
    assert json.loads(text)["inputs"]["p"] == 0.1


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    code, _, err = run(capsys, "analyze", "--config", cfg)
    assert code == 2 and "bogus" in err


def _body(text):
    lines = text.splitlines()
    assert lines[0].startswith("# grouptest")
    return lines[1:]


def test_experiment_rerun_identical(tmp_path, capsys):
    args = ["experiment", "--beta", "0.25", "--n-grid", "256,1024", "--families", "rr6,rp,pp",
            "--trials", "200", "--design-samples", "2", "--seed", "7"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(capsys, *args, "--out", a)[0] == 0
    assert run(capsys, *args, "--workers", "3", "--out", b, "--json", tmp_path / "b.json")[0] == 0
    assert _body(a.read_text()) == _body(b.read_text())
    assert len(json.loads((tmp_path / "b.json").read_text())["rows"]) == 6


def test_experiment_rows_and_bounds():
    spec = ExperimentSpec(mode="fixed_p_sweep", p=2.0 ** -5, n_grid=(1024, 4096),
                          families=("rr6", "rp"), trials=300, seed=1)
    rows = run_experiment(spec)
    assert [(r["N"], r["family"]) for r in rows] == [(1024, "rr6"), (1024, "rp"),
                                                     (4096, "rr6"), (4096, "rp")]
    for r in rows:
        assert r["status"] == "ok"
        assert r["lower_bound"] <= r["upper_bound"]
        assert r["lower_bound"] <= r["mc_mean"] + 4 * r["mc_se"]


def test_experiment_infeasible_rows_reported():
    spec = ExperimentSpec(mode="fixed_p_sweep", p=0.7, n_grid=(64,), families=("rr6",), trials=10)
    (row,) = run_experiment(spec)
    assert row["status"].startswith("infeasible")


def test_experiment_analytic_only_above_mc_limit():
    spec = ExperimentSpec(beta=0.25, n_grid=(2 ** 12, 2 ** 16, 2 ** 20), families=("rr6",),
                          trials=50, mc_max_n=2 ** 12)
    rows = run_experiment(spec)
    ratios = [r["upper_ratio"] for r in rows]
    assert all(b < a for a, b in zip(ratios, ratios[1:]))
    assert rows[0]["mc_mean"] != "" and rows[2]["mc_mean"] == ""


def test_experiment_beta_zero_lower_bound():
    spec = ExperimentSpec(beta=0.0, p=2.0 ** -8, n_grid=(2 ** 16,), families=("rr6",), mc_max_n=0)
    (row,) = run_experiment(spec)
    assert row["lower_ratio"] >= 2.0814 * 0.95


def test_experiment_adaptive_trials():
    spec = ExperimentSpec(beta=0.25, n_grid=(1024,), families=("rp",), design_samples=2, seed=4)
    (row,) = run_experiment(spec)
    half_width = 1.96 * row["mc_se"]
    assert row["trials"] >= 100
    assert half_width < 0.0125 * row["mc_mean"] / row["mc_ratio"]


@pytest.mark.parametrize("bad", [
    {"mode": "nope"},
    {"n_grid": [10, 5]},
    {"beta": 1.0},
    {"mode": "fixed_p_sweep"},
    {"families": ["xx"]},
    {"extra": 1},
])
def test_experiment_spec_validation(bad):
    with pytest.raises(ValueError):
        ExperimentSpec.from_dict(bad)


def test_spec_digest_ignores_workers():
    a = ExperimentSpec(n_grid=(64,), workers=1)
    b = ExperimentSpec(n_grid=(64,), workers=4)
    assert a.digest() == b.digest()
    assert render_csv(a, [], timestamp="t") == render_csv(b, [], timestamp="t")


def test_verify_subset(capsys):
    code, text, _ = run(capsys, "verify", "--only", "3,4")
    assert code == 0
    assert "[PASS]  3" in text and "[PASS]  4" in text and "2/2" in text
