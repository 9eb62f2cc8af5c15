import numpy as np

from byzsgd.cli import main
from byzsgd.engine import run_experiment
from byzsgd.harness import ExperimentConfig, emit_csv, load_csv
from byzsgd.report import render_figures

CFG_TEXT = """
run.scheme = randomized
run.n = 3
run.f = 1
run.m = 3
run.T = 40
run.trials = 2
run.seed = 4242
data.task = linear_regression
data.N = 12
data.d = 2
adversary.strategy = sign_flip
adversary.p = 0.6
randomized.delta = 0.2
output.path = {out}
"""


def test_cli_run_and_summarize(tmp_path, capsys):
    out = tmp_path / "records.csv"
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(CFG_TEXT.format(out=out))
    assert main(["run", str(cfg)]) == 0
    captured = capsys.readouterr().out
    assert "wrote 80 rows" in captured
    assert out.exists()

    assert main(["summarize", str(out), "--f", "1", "--p", "0.6"]) == 0
    captured = capsys.readouterr().out
    assert "overall efficiency" in captured
    assert "efficiency bound" in captured


def test_cli_run_overrides(tmp_path, capsys):
    out = tmp_path / "records.csv"
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(CFG_TEXT.format(out=out))
    other = tmp_path / "other.csv"
    assert main(["run", str(cfg), "--trials", "1", "--out", str(other)]) == 0
    assert other.exists()
    assert len(load_csv(other)) == 1


def test_cli_config_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(CFG_TEXT.format(out="x.csv").replace("run.f = 1", "run.f = 2"))
    assert main(["run", str(cfg)]) == 2
    assert "f < n/2" in capsys.readouterr().err


def test_cli_verify_selected_criteria(capsys):
    assert main(["verify", "acceptance", "--only", "9"]) == 0
    out = capsys.readouterr().out
    assert "PASS linear detection code" in out
    assert "1/1 criteria passed" in out


def test_cli_verify_unknown_suite(capsys):
    assert main(["verify", "bogus"]) == 2


def test_summarize_with_plots(tmp_path, capsys):
    cfg = ExperimentConfig(
        scheme="randomized", n=3, f=1, m=3, T=30, trials=2, seed=7,
        N=12, d=2, p=0.8, q=0.5,
    )
    path = emit_csv(run_experiment(cfg), tmp_path / "r.csv")
    plots = tmp_path / "figs"
    assert main(["summarize", str(path), "--f", "1", "--p", "0.8", "--plots", str(plots)]) == 0
    out = capsys.readouterr().out
    pngs = sorted(p.name for p in plots.glob("*.png"))
    assert "efficiency.png" in pngs and "loss.png" in pngs and "distance.png" in pngs


def test_render_figures_direct(tmp_path):
    cfg = ExperimentConfig(
        scheme="deterministic", n=5, f=2, m=6, T=20, trials=1, seed=3,
        N=30, d=2, p=1.0,
    )
    results = run_experiment(cfg)
    written = render_figures(results, tmp_path, f=cfg.f, p=cfg.p)
    assert all(p.exists() and p.stat().st_size > 0 for p in written)
