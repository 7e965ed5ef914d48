import filecmp
import os

import pytest

from onsetblend import formats
from onsetblend.cli import RunConfig, main, parse_years, read_key_values
from onsetblend.errors import ValidationError

SMALL = ["--set", "n_years=6", "--set", "n_cells=2"]


@pytest.fixture(scope="module")
def world(tmp_path_factory):
    root = tmp_path_factory.mktemp("world")
    cfg = root / "synth.cfg"
    cfg.write_text("n_years = 5\nn_cells = 2  # two cells\n")
    assert main(["synth", "--config", str(cfg), "--seed", "3", "--out", str(root)]) == 0
    return root


def test_synth_files(world):
    for name in ("rain.csv", "forecasts.csv", "onsets.csv", "onset.cfg"):
        assert (world / name).exists()
    onsets = formats.read_onsets(world / "onsets.csv")
    assert len(onsets) == 10 and all(d is not None for d in onsets.values())


def test_stage_chain(world, tmp_path, capsys):
    w = lambda n: str(world / n)
    t = lambda n: str(tmp_path / n)
    assert main(["onset", "detect", "--rain", w("rain.csv"), "--config", w("onset.cfg"), "--out", t("on.csv")]) == 0
    assert formats.read_onsets(t("on.csv")) == formats.read_onsets(w("onsets.csv"))
    assert main(["clim", "fit", "--onsets", t("on.csv"), "--out", t("clim.csv")]) == 0
    args = ["--forecasts", w("forecasts.csv"), "--clim", t("clim.csv"), "--threshold", "20"]
    assert main(["blend", "features", *args, "--onsets", t("on.csv"), "--out", t("feat.csv")]) == 0
    assert main(["blend", "train", "--features", t("feat.csv"), "--out", t("model.csv")]) == 0
    assert main(["blend", "predict", "--model", t("model.csv"), "--features", t("feat.csv"), "--out", t("blend.csv")]) == 0
    assert main(["clim", "predict", "--model", t("clim.csv"), "--inits", t("blend.csv"), "--kind", "static", "--out", t("static.csv")]) == 0
    assert main(["clim", "predict", "--model", t("clim.csv"), "--inits", t("blend.csv"), "--out", t("evolving.csv")]) == 0
    capsys.readouterr()
    assert main(["eval", "run", "--pred", t("blend.csv"), "--truth", t("on.csv"), "--reference", t("static.csv"), "--by", "lead"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "n,brier,rps,auc,bss,rpss" and out[2] == "bin,brier,bss,auc"
    assert float(out[1].split(",")[5]) > 0  # in-sample blend beats static
    assert main(["calibrate", "--raw", t("evolving.csv"), "--truth", t("on.csv"), "--out", t("platt.csv")]) == 0
    formats.read_platt(t("platt.csv"))
    comps = ",".join([t("blend.csv"), t("evolving.csv")])
    assert main(["mme", "fit", "--components", comps, "--truth", t("on.csv"), "--reference", t("static.csv"), "--out", t("w.csv")]) == 0
    weights = [float(r["weight"]) for _, r in formats.read_rows(t("w.csv"))]
    assert abs(sum(weights) - 1) < 1e-5


def test_stdout_emit(world, capsys):
    assert main(["onset", "detect", "--rain", str(world / "rain.csv"), "--config", str(world / "onset.cfg")]) == 0
    assert capsys.readouterr().out.startswith("grid_id,year,onset_date\n")


def test_exit_codes(world, tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("grid_id,date,rain_mm\ng,2000-06-01,-3\n")
    assert main(["onset", "detect", "--rain", str(bad)]) == 2
    assert main(["onset", "detect", "--rain", str(tmp_path / "missing.csv")]) == 2
    assert main(["onset", "detect", "--rain", str(world / "rain.csv"), "--variant", "true-mok"]) == 1
    assert main(["run", "--cv", "split", "--train-years", "2000-2003", "--test-years", "2003", "--out", str(tmp_path / "r")]) == 1
    assert not (tmp_path / "r").exists()
    with pytest.raises(SystemExit) as exc:
        main(["eval", "run"])
    assert exc.value.code == 1
    err = capsys.readouterr().err
    assert "ValidationError" in err or "error" in err


def test_decision_demo(capsys):
    assert main(["decision", "demo"]) == 0
    lines = dict(line.split(",", 1) for line in capsys.readouterr().out.splitlines()[1:7])
    assert float(lines["EU no insurance"]) == 9.0
    assert float(lines["EU insurance"]) == 8.5
    assert float(lines["EU forecast-informed"]) == 9.3
    assert float(lines["income no insurance"]) == 90.0
    assert float(lines["income insurance"]) == 74.5
    assert abs(float(lines["income forecast-informed"]) - 89.7) < 0.05


def test_decision_check(tmp_path, capsys):
    rows = ["problem_id,record,i,j,value"]
    rows += ["p1,prior,0,,0.9", "p1,prior,1,,0.1"]
    rows += [f"p1,payoff,{a},{s},{v}" for (a, s), v in {(0, 0): 10, (0, 1): 0, (1, 0): 9, (1, 1): 4}.items()]
    rows += ["p1,signal,0,,0.8", "p1,signal,1,,0.2"]
    rows += ["p1,posterior,0,0,1", "p1,posterior,0,1,0", "p1,posterior,1,0,0.5", "p1,posterior,1,1,0.5"]
    path = tmp_path / "problems.csv"
    path.write_text("\n".join(rows) + "\n")
    assert main(["decision", "check", "--problems", str(path)]) == 0
    out = capsys.readouterr().out
    assert "violations,0" in out and "p1,0.3," in out
    path.write_text("\n".join(rows[:-1]) + "\n")
    assert main(["decision", "check", "--problems", str(path)]) == 2


def test_config_helpers(tmp_path):
    assert parse_years("2000-2002,2005") == [2000, 2001, 2002, 2005]
    p = tmp_path / "c.cfg"
    p.write_text("# comment\nseed = 3\n\nauc=strict\n")
    assert read_key_values(p) == {"seed": "3", "auc": "strict"}
    p.write_text("nonsense\n")
    with pytest.raises(ValidationError):
        read_key_values(p)
    with pytest.raises(ValidationError):
        RunConfig(auc="sometimes")
    with pytest.raises(ValidationError):
        RunConfig(cv="split", train_years="2000", test_years="")


def test_unknown_run_key(tmp_path):
    assert main(["run", "--out", str(tmp_path / "r"), "--set", "colour=blue"]) == 1


@pytest.fixture(scope="module")
def two_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("runs")
    codes = [main(["run", "--seed", "7", "--out", str(root / k), *SMALL]) for k in ("a", "b")]
    return root, codes


def test_run_is_byte_identical(two_runs):
    root, codes = two_runs
    assert codes == [0, 0]
    names = sorted(os.listdir(root / "a"))
    assert names == sorted(os.listdir(root / "b"))
    for expected in ("onsets.csv", "climatology.csv", "blend_model.csv", "platt.csv", "features.csv",
                     "predictions_blend.csv", "predictions_static.csv", "predictions_mme.csv",
                     "mme_weights.csv", "eval_report.csv", "reliability.csv", "run_config.txt"):
        assert expected in names
    match, mismatch, errors = filecmp.cmpfiles(root / "a", root / "b", names, shallow=False)
    assert mismatch == [] and errors == []


def test_run_artifacts_round_trip(two_runs):
    root, _ = two_runs
    formats.read_blend_model(root / "a" / "blend_model.csv")
    formats.read_climatology(root / "a" / "climatology.csv")
    formats.read_features(root / "a" / "features.csv")
    g, d, p = formats.read_predictions(root / "a" / "predictions_blend.csv")
    assert len(g) == len(p) > 0
    report = {r["model"]: r for _, r in formats.read_rows(root / "a" / "eval_report.csv")}
    assert float(report["static"]["rpss"]) == 0.0
