"""Experiment orchestration and the command-line front end."""

import json
import subprocess
import sys

import numpy as np
import pytest

from rmoamp import (
    AnalyticGaussianPrior,
    BridgePrior,
    DctSoftThresholdPrior,
    DdimPrior,
    ExperimentConfig,
    FlowMatchingPrior,
    GaussianMixturePrior,
    InvalidParameterError,
    MetricReport,
    SourceSignal,
    TrialResult,
    baseline_psnr,
    build_channel,
    build_prior,
    read_matrix,
    run_experiment,
    save_source_pgm,
    sweep,
)
from rmoamp.cli import config_from_dict, main, parse_config_text
from rmoamp.experiment import (OUTPUT_ROOT_ENV, SWEEP_COLUMNS, TRIAL_COLUMNS,
                               run_trial)
from rmoamp.receiver import TRACE_COLUMNS


def toy_config(**overrides):
    base = dict(source={"kind": "gaussian", "n": 64, "seed": 9},
                beta=1.0, sigma=0.0, max_iters=6)
    base.update(overrides)
    return ExperimentConfig(**base)


class TestConfigParsing:
    def test_json_object_passthrough(self):
        data = parse_config_text('{"beta": 0.5, "sigma": 0.1}')
        assert data == {"beta": 0.5, "sigma": 0.1}

    def test_key_value_lines_nest_on_dots(self):
        text = ("# toy run\n"
                "source.kind=gaussian\n"
                "source.n=64\n"
                "beta=0.5\n"
                "\n"
                "prior.kind=analytic-gaussian  # denoiser\n")
        data = parse_config_text(text)
        assert data == {"source": {"kind": "gaussian", "n": 64},
                        "beta": 0.5,
                        "prior": {"kind": "analytic-gaussian"}}

    def test_values_parse_as_json_when_possible(self):
        data = parse_config_text("a=[1, 2]\nb=true\nc=plain text\n")
        assert data == {"a": [1, 2], "b": True, "c": "plain text"}

    def test_missing_equals_reports_line(self):
        with pytest.raises(ValueError, match="line 2"):
            parse_config_text("a=1\nnonsense\n")

    def test_unknown_config_key_rejected(self):
        with pytest.raises(ValueError, match="unknown config keys"):
            config_from_dict({"source": {"kind": "gaussian"}, "bogus": 1})

    def test_output_dir_override(self, tmp_path):
        cfg = config_from_dict(
            {"source": {"kind": "gaussian", "n": 8, "seed": 0}},
            output_dir=str(tmp_path))
        assert cfg.output_dir == str(tmp_path)


class TestExperimentConfig:
    def test_validation(self):
        with pytest.raises(InvalidParameterError):
            toy_config(beta=0.0)
        with pytest.raises(InvalidParameterError):
            toy_config(beta=1.5)
        with pytest.raises(InvalidParameterError):
            toy_config(sigma=-0.1)
        with pytest.raises(InvalidParameterError):
            toy_config(num_trials=0)

    def test_receiver_config_offsets_divergence_seed(self):
        cfg = toy_config(divergence_seed=4, max_iters=7, damping=0.25)
        rc = cfg.receiver_config(trial=2)
        assert rc.divergence_seed == 6
        assert rc.max_iters == 7
        assert rc.damping == 0.25


class TestBuilders:
    def test_prior_kinds(self):
        assert isinstance(build_prior({"kind": "analytic-gaussian"}),
                          AnalyticGaussianPrior)
        gm = build_prior({"kind": "analytic-gauss-mixture",
                          "weights": [0.5, 0.5], "means": [-1.0, 1.0],
                          "variances": [0.1, 0.1]})
        assert isinstance(gm, GaussianMixturePrior)
        assert isinstance(build_prior({"kind": "dct-soft-threshold"}),
                          DctSoftThresholdPrior)
        dd = build_prior({"kind": "ddim", "alpha_bar": [0.9, 0.5, 0.1]})
        assert isinstance(dd, DdimPrior)
        assert dd.schedule.alpha_bar.tolist() == [0.9, 0.5, 0.1]
        fm = build_prior({"kind": "flow-matching", "num_steps": 7})
        assert isinstance(fm, FlowMatchingPrior)
        assert fm.num_steps == 7

    def test_external_bridge_spawn(self):
        prior = build_prior({
            "kind": "external-bridge",
            "argv": [sys.executable, "-m", "rmoamp.echo_bridge"],
            "snr_kind": "ddim"})
        try:
            assert isinstance(prior, BridgePrior)
            assert prior.snr_kind == "ddim"
            out = prior.client.denoise_once(np.ones(3), 0.5, 1.0)
            assert np.array_equal(out, np.ones(3))
        finally:
            prior.client.close()

    def test_unknown_kinds_rejected(self):
        with pytest.raises(InvalidParameterError):
            build_prior({"kind": "oracle"})
        with pytest.raises(InvalidParameterError):
            build_prior({"kind": "ddim", "predictor": {"kind": "cnn"}})
        with pytest.raises(InvalidParameterError):
            build_channel({"kind": "rician"}, 16, 0.0, 0)

    def test_channel_kinds(self):
        ident = build_channel({"kind": "identity"}, 16, 0.01, 0)
        assert ident.sigma2 == 0.01
        cond = build_channel({"kind": "conditioned", "kappa": 4.0}, 16, 0.0, 3)
        assert cond.condition_number() == pytest.approx(4.0)
        tdl = build_channel({"kind": "tdl-fading", "num_taps": 2,
                             "tap_powers": (0.5, 0.5), "num_symbols": 4},
                            16, 0.0, 1)
        assert tdl.m_rows == 16


class TestRunExperiment:
    def test_noiseless_full_rate_hits_psnr_ceiling(self):
        report = run_experiment(toy_config(num_trials=2))
        assert len(report.trials) == 2
        assert report.num_errors == 0
        assert [t.psnr for t in report.trials] == [99.0, 99.0]
        assert report.mean_psnr == 99.0
        assert all(np.isnan(t.ssim) for t in report.trials)  # 1-D source
        assert all(t.nfe == 0 for t in report.trials)  # analytic prior

    def test_artifacts_written(self, tmp_path):
        cfg = toy_config(output_dir=str(tmp_path))
        run_experiment(cfg)
        trace_text = (tmp_path / "trace_trial0.csv").read_text()
        assert trace_text.splitlines()[0] == ",".join(TRACE_COLUMNS)
        trials_text = (tmp_path / "trials.csv").read_text()
        assert trials_text.splitlines()[0] == ",".join(TRIAL_COLUMNS)
        agg_text = (tmp_path / "aggregate.csv").read_text()
        assert agg_text.splitlines()[0] == ",".join(SWEEP_COLUMNS)
        recon = read_matrix(str(tmp_path / "recon_trial0.mat"))
        assert recon.shape == (1, 64)

    def test_rerun_is_bit_identical(self, tmp_path):
        texts = []
        for name in ("a", "b"):
            out = tmp_path / name
            run_experiment(toy_config(sigma=0.2, beta=0.5, num_trials=2,
                                      output_dir=str(out)))
            texts.append((out / "trials.csv").read_text()
                         + (out / "trace_trial0.csv").read_text()
                         + (out / "trace_trial1.csv").read_text()
                         + (out / "aggregate.csv").read_text())
        assert texts[0] == texts[1]

    def test_image_source_gets_pgm_recon_and_ssim(self, tmp_path):
        rng = np.random.Generator(np.random.Philox(0))
        img = SourceSignal(rng.random(64), shape=(8, 8))
        src_path = tmp_path / "src.pgm"
        save_source_pgm(img, str(src_path))
        cfg = toy_config(source=str(src_path), output_dir=str(tmp_path))
        report = run_experiment(cfg)
        assert (tmp_path / "recon_trial0.pgm").exists()
        assert report.trials[0].psnr == 99.0
        assert report.trials[0].ssim == pytest.approx(1.0, rel=1e-9)

    def test_nfe_counts_predictor_evaluations(self):
        cfg = toy_config(sigma=0.1, max_iters=3, tolerance=1e-12,
                         prior={"kind": "flow-matching", "num_steps": 5})
        report = run_experiment(cfg)
        t = report.trials[0]
        assert t.error == ""
        # denoise + shared-probe divergence per iteration, 5 Euler steps each
        assert t.nfe == 10 * t.iterations

    def test_external_bridge_prior_round_trips(self):
        cfg = toy_config(sigma=0.05, max_iters=2, source={
            "kind": "gaussian", "n": 32, "seed": 9},
            prior={"kind": "external-bridge",
                   "argv": [sys.executable, "-m", "rmoamp.echo_bridge"]})
        report = run_experiment(cfg)
        t = report.trials[0]
        assert t.error == ""
        assert t.nfe == 2 * t.iterations

    def test_failed_trial_recorded_not_raised(self):
        cfg = toy_config(prior={"kind": "analytic-gauss-mixture",
                                "weights": [0.5, 0.2],
                                "means": [0.0, 0.0],
                                "variances": [1.0, 1.0]})
        report = run_experiment(cfg)
        assert report.num_errors == 1
        assert np.isnan(report.trials[0].psnr)
        assert np.isnan(report.mean_psnr)

    def test_output_root_env_prefixes_relative_dirs(self, tmp_path,
                                                    monkeypatch):
        monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path))
        run_experiment(toy_config(output_dir="nested/run"))
        assert (tmp_path / "nested" / "run" / "trials.csv").exists()

    def test_run_trial_returns_trace_and_estimate(self):
        result, trace, estimate = run_trial(toy_config(), 0)
        assert result.trial == 0
        assert len(trace) == result.iterations
        assert estimate.n == 64


class TestMetricReport:
    def make_report(self):
        report = MetricReport(config=toy_config())
        report.trials.append(TrialResult(0, 20.0, 0.5, 3, 6, 0.1))
        report.trials.append(TrialResult(1, 40.0, 0.7, 5, 10, 0.1))
        report.trials.append(TrialResult(
            2, float("nan"), float("nan"), 0, 0, 0.1, error="boom, bang"))
        return report

    def test_aggregates_skip_non_finite(self):
        report = self.make_report()
        assert report.mean_psnr == 30.0
        assert report.std_psnr == 10.0
        assert report.mean_ssim == pytest.approx(0.6)
        assert report.num_errors == 1

    def test_trials_csv_escapes_commas(self):
        text = self.make_report().trials_csv()
        assert "boom; bang" in text
        assert text.splitlines()[1] == "0,20.0,0.5,3,6,"

    def test_sweep_row_fields(self):
        row = self.make_report().sweep_row()
        assert len(row) == len(SWEEP_COLUMNS)
        assert row[0] == "1.0"
        assert row[2] == "analytic-gaussian"
        assert row[-2:] == ["3", "1"]


class TestBaselineAndSweep:
    def test_baseline_matches_linear_solution(self):
        assert baseline_psnr(toy_config()) == 99.0

    def test_sweep_orders_by_beta_then_sigma(self, tmp_path):
        grid = [toy_config(beta=1.0, sigma=0.0, max_iters=3),
                toy_config(beta=0.5, sigma=0.3, max_iters=3),
                toy_config(beta=0.5, sigma=0.1, max_iters=3)]
        text, reports = sweep(grid, output_dir=str(tmp_path))
        lines = text.splitlines()
        assert lines[0] == ",".join(SWEEP_COLUMNS)
        keys = [(line.split(",")[0], line.split(",")[1])
                for line in lines[1:]]
        assert keys == [("0.5", "0.1"), ("0.5", "0.3"), ("1.0", "0.0")]
        assert (tmp_path / "sweep.csv").read_text() == text
        text2, _ = sweep(grid)
        assert text2 == text

    def test_empty_grid_rejected(self):
        with pytest.raises(InvalidParameterError):
            sweep([])


CONFIG_TEXT = """\
# toy full-rate run
source.kind=gaussian
source.n=64
source.seed=9
beta=1.0
sigma=0.0
prior.kind=analytic-gaussian
num_trials=2
"""


class TestCli:
    def write_config(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(CONFIG_TEXT)
        return str(path)

    def test_run_prints_aggregate(self, tmp_path, capsys):
        assert main(["run", self.write_config(tmp_path)]) == 0
        out = capsys.readouterr().out
        lines = out.splitlines()
        assert lines[0] == ",".join(SWEEP_COLUMNS)
        assert lines[1].split(",")[4] == "99.0"  # mean_psnr

    def test_run_set_overrides(self, tmp_path, capsys):
        code = main(["run", self.write_config(tmp_path),
                     "--set", "sigma=0.5", "--set", "num_trials=1"])
        assert code == 0
        row = capsys.readouterr().out.splitlines()[1].split(",")
        assert row[1] == "0.5"
        assert float(row[4]) < 99.0

    def test_run_writes_artifacts(self, tmp_path, capsys):
        out_dir = tmp_path / "artifacts"
        assert main(["run", self.write_config(tmp_path),
                     "--output-dir", str(out_dir)]) == 0
        capsys.readouterr()
        assert (out_dir / "aggregate.csv").exists()

    def test_unknown_key_exits_2(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text("bogus=1\n")
        assert main(["run", str(path)]) == 2
        assert capsys.readouterr().err.startswith("rmoamp:")

    def test_missing_config_exits_2(self, capsys):
        assert main(["run", "/nonexistent/path.cfg"]) == 2
        assert "rmoamp:" in capsys.readouterr().err

    def test_all_trials_failing_exits_1(self, tmp_path, capsys):
        path = tmp_path / "fail.cfg"
        path.write_text(CONFIG_TEXT
                        + 'prior.kind=analytic-gauss-mixture\n'
                        + 'prior.weights=[0.5, 0.2]\n'
                        + 'prior.means=[0.0, 0.0]\n'
                        + 'prior.variances=[1.0, 1.0]\n')
        assert main(["run", str(path)]) == 1
        capsys.readouterr()

    def test_sweep_grid_with_base_and_points(self, tmp_path, capsys):
        grid_path = tmp_path / "grid.json"
        grid_path.write_text(json.dumps({
            "base": {"source": {"kind": "gaussian", "n": 32, "seed": 1},
                     "sigma": 0.1, "max_iters": 3},
            "points": [{"beta": 1.0}, {"beta": 0.5}]}))
        assert main(["sweep", str(grid_path),
                     "--output-dir", str(tmp_path / "sw")]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 3
        assert [line.split(",")[0] for line in lines[1:]] == ["0.5", "1.0"]
        assert (tmp_path / "sw" / "sweep.csv").exists()

    def test_inspect_conditioned_channel(self, tmp_path, capsys):
        out_csv = tmp_path / "spectrum.csv"
        code = main(["inspect-channel", "--kind", "conditioned",
                     "--dim", "32", "--seed", "3", "--set", "kappa=4",
                     "--output", str(out_csv)])
        assert code == 0
        out = capsys.readouterr().out.splitlines()
        desc = json.loads(out[0])
        assert desc["type"] == "conditioned"
        assert "condition=4" in out[1]
        csv_lines = out_csv.read_text().splitlines()
        assert csv_lines[0] == "index,singular_value"
        assert len(csv_lines) == 33

    def test_inspect_fading_emits_rayleigh_statistic(self, capsys):
        code = main(["inspect-channel", "--kind", "tdl-fading",
                     "--dim", "32", "--samples", "2000", "--seed", "1",
                     "--set", "num_taps=2",
                     "--set", "tap_powers=[0.5, 0.5]",
                     "--set", "num_symbols=8"])
        assert code == 0
        out = capsys.readouterr().out
        assert "rayleigh_ks_statistic=" in out
        stat_line = [l for l in out.splitlines()
                     if l.startswith("rayleigh_ks_statistic")][0]
        stat = float(stat_line.split("=")[1].split()[0])
        assert 0.0 < stat < 1.0

    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "rmoamp.cli", "run",
             self.write_config(tmp_path)],
            capture_output=True, text=True, timeout=120)
        assert proc.returncode == 0
        assert proc.stdout.splitlines()[0] == ",".join(SWEEP_COLUMNS)
