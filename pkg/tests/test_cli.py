import numpy as np
import pytest

from gacoop.cli import main

SMALL_CFG = """
seed = 5
n_classes = 6
d_embed = 24
n_regions = 4
train_shots = 4
test_per_class = 8
ood_samples = 40
ood_classes = 3
epochs = 6
batch_size = 8
d_token = 4
ctx_len = 4
"""


@pytest.fixture
def workdir(tmp_path):
    cfg = tmp_path / "small.cfg"
    cfg.write_text(SMALL_CFG)
    return tmp_path, cfg


def run(argv):
    return main([str(a) for a in argv])


class TestGenData:
    def test_writes_three_banks_and_config_echo(self, workdir):
        base, cfg = workdir
        assert run(["gen-data", "--config", cfg, "--out-dir", base / "data"]) == 0
        for name in ("train.fbnk", "id_test.fbnk", "ood_synthetic.fbnk", "config_used.txt"):
            assert (base / "data" / name).exists()

    def test_idempotent_outputs(self, workdir):
        base, cfg = workdir
        run(["gen-data", "--config", cfg, "--out-dir", base / "d1"])
        run(["gen-data", "--config", cfg, "--out-dir", base / "d2"])
        assert (base / "d1" / "train.fbnk").read_bytes() == (base / "d2" / "train.fbnk").read_bytes()

    def test_config_error_exit_code(self, workdir, capsys):
        base, _ = workdir
        bad = base / "bad.cfg"
        bad.write_text("lr = -5\n")
        assert run(["gen-data", "--config", bad, "--out-dir", base / "x"]) == 4
        assert "lr" in capsys.readouterr().err


class TestTrainEval:
    @pytest.fixture
    def trained(self, workdir):
        base, cfg = workdir
        run(["gen-data", "--config", cfg, "--out-dir", base / "data"])
        code = run([
            "train", "--config", cfg, "--data-dir", base / "data",
            "--strategy", "gacoop", "--out", base / "run" / "ckpt.fbnk", "--no-figures",
        ])
        assert code == 0
        return base, cfg

    def test_train_outputs(self, trained):
        base, _ = trained
        assert (base / "run" / "ckpt.fbnk").exists()
        log = (base / "run" / "ckpt.train_log.csv").read_text()
        assert log.startswith("epoch,l_coop,l_ood,train_acc,conflict_ratio")
        assert "# params_checksum=" in log
        assert len(log.strip().splitlines()) == 6 + 2  # header + epochs + checksum

    def test_eval_report_schema_and_idempotence(self, trained):
        base, _ = trained
        args = ["eval", "--checkpoint", base / "run" / "ckpt.fbnk",
                "--data-dir", base / "data", "--no-figures"]
        assert run(args + ["--out", base / "r1.csv"]) == 0
        assert run(args + ["--out", base / "r2.csv"]) == 0
        r1 = (base / "r1.csv").read_text()
        assert r1 == (base / "r2.csv").read_text()
        lines = r1.strip().splitlines()
        assert lines[0] == "strategy,dataset,fpr95,auroc,id_acc,conflict_ratio,seed"
        assert lines[-1].startswith("gacoop,average,")

    def test_eval_renders_figures(self, trained):
        base, _ = trained
        code = run(["eval", "--checkpoint", base / "run" / "ckpt.fbnk",
                    "--data-dir", base / "data", "--out", base / "fig" / "r.csv"])
        assert code == 0
        assert (base / "fig" / "r.density_ood_synthetic.png").exists()

    def test_pretty_table(self, trained, capsys):
        base, _ = trained
        run(["eval", "--checkpoint", base / "run" / "ckpt.fbnk",
             "--data-dir", base / "data", "--out", base / "p.csv",
             "--pretty", "--no-figures"])
        out = capsys.readouterr().out
        assert "strategy" in out and "average" in out

    def test_missing_checkpoint_is_io_error(self, trained, capsys):
        base, _ = trained
        assert run(["eval", "--checkpoint", base / "nope.fbnk",
                    "--data-dir", base / "data", "--out", base / "x.csv"]) == 2

    def test_corrupt_checkpoint_is_format_error(self, trained):
        base, _ = trained
        bad = base / "bad.fbnk"
        bad.write_bytes(b"JUNKJUNKJUNK")
        assert run(["eval", "--checkpoint", bad, "--data-dir", base / "data",
                    "--out", base / "x.csv"]) == 3

    def test_dimension_mismatch_exit_code(self, trained, capsys):
        base, cfg = trained
        other = base / "other.cfg"
        other.write_text(SMALL_CFG.replace("d_embed = 24", "d_embed = 16"))
        run(["gen-data", "--config", other, "--out-dir", base / "data16"])
        run(["train", "--config", other, "--data-dir", base / "data16",
             "--out", base / "run16" / "ckpt.fbnk", "--no-figures"])
        code = run(["eval", "--checkpoint", base / "run16" / "ckpt.fbnk",
                    "--data-dir", base / "data", "--out", base / "m.csv"])
        assert code == 3
        assert "d_embed" in capsys.readouterr().err


class TestBenchSweep:
    def test_bench_counts_and_summary(self, workdir):
        base, cfg = workdir
        fast = base / "fast.cfg"
        fast.write_text(SMALL_CFG.replace("epochs = 6", "epochs = 2"))
        assert run(["bench", "--config", fast, "--seeds", "2",
                    "--out-dir", base / "bench", "--no-figures"]) == 0
        runs = (base / "bench" / "bench_runs.csv").read_text().strip().splitlines()
        # header + 3 strategies x 2 seeds x (1 dataset + average)
        assert len(runs) == 1 + 3 * 2 * 2
        summary = (base / "bench" / "bench_summary.csv").read_text().strip().splitlines()
        assert len(summary) == 1 + 3
        assert summary[0] == "strategy,fpr95,auroc,id_acc,conflict_ratio,n_seeds"

    def test_bench_renders_comparison_figure(self, workdir):
        base, cfg = workdir
        fast = base / "fast.cfg"
        fast.write_text(SMALL_CFG.replace("epochs = 6", "epochs = 1"))
        assert run(["bench", "--config", fast, "--seeds", "1",
                    "--strategies", "coop,gacoop", "--out-dir", base / "benchfig"]) == 0
        assert (base / "benchfig" / "bench_summary.png").exists()

    def test_sweep_renders_curves_figure(self, workdir):
        base, cfg = workdir
        fast = base / "fast.cfg"
        fast.write_text(SMALL_CFG.replace("epochs = 6", "epochs = 1"))
        assert run(["sweep", "--param", "beta", "--values", "0.0,0.4",
                    "--config", fast, "--seeds", "1", "--strategies", "gacoop",
                    "--out-dir", base / "sweepfig"]) == 0
        assert (base / "sweepfig" / "sweep_summary.png").exists()

    def test_sweep_grid(self, workdir):
        base, cfg = workdir
        fast = base / "fast.cfg"
        fast.write_text(SMALL_CFG.replace("epochs = 6", "epochs = 2"))
        assert run(["sweep", "--param", "lambda", "--values", "0.1,0.5",
                    "--config", fast, "--seeds", "1", "--strategies", "gacoop",
                    "--out-dir", base / "sweep", "--no-figures"]) == 0
        summary = (base / "sweep" / "sweep_summary.csv").read_text().strip().splitlines()
        assert len(summary) == 1 + 2  # one row per value
        assert summary[1].startswith("lambda,0.1,gacoop,")

    def test_unknown_strategy_rejected(self, workdir):
        base, cfg = workdir
        assert run(["bench", "--config", cfg, "--seeds", "1",
                    "--strategies", "adam", "--out-dir", base / "x"]) == 4


class TestGradCheckCommand:
    def test_passes_on_correct_build(self):
        assert run(["grad-check", "--trials", "3", "--pairs", "200"]) == 0

    def test_property_violation_exit_code(self, monkeypatch, capsys):
        import gacoop.checks as checks_mod
        from gacoop.checks import SuiteReport

        def broken(**kwargs):
            return SuiteReport(name="gradient-fd", trials=1, failures=["trial 0: fake"])

        monkeypatch.setattr(checks_mod, "run_gradient_check", broken)
        monkeypatch.setattr("gacoop.cli.checks.run_gradient_check", broken)
        assert run(["grad-check", "--trials", "1", "--pairs", "50"]) == 6


class TestUsage:
    def test_unknown_subcommand_exits_1(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["definitely-not-a-command"])
        assert exc.value.code == 1

    def test_missing_required_flag_exits_1(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["train"])
        assert exc.value.code == 1

    @pytest.mark.parametrize(
        "cmd", ["gen-data", "train", "eval", "bench", "sweep", "grad-check"]
    )
    def test_help_documents_flags(self, cmd, capsys):
        with pytest.raises(SystemExit) as exc:
            main([cmd, "--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        assert "--" in out
