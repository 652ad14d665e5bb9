"""Command-line interface.

Subcommands: gen-data, train, eval, bench, sweep, grad-check. All
randomness flows from one seed (config `seed` key, overridable with
--seed); sub-streams are derived by the documented splitmix mixing.

Exit codes:
  0 success
  1 usage error (bad flags, unknown subcommand)
  2 I/O error (missing or unreadable/unwritable files)
  3 format or data error (bad magic, version, truncation, dimension or
    invariant violations)
  4 configuration error (unknown key, invalid value, inconsistent configs)
  5 numeric abort (non-finite gradient during training)
  6 property violation reported by grad-check
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import bench as bench_mod
from . import checks
from .config import (
    STRATEGIES,
    SynthConfig,
    TrainConfig,
    default_config,
    dump_config,
    load_config,
)
from .data_io import (
    Checkpoint,
    generate_synthetic,
    load_id_and_ood_banks,
    read_bank,
    read_checkpoint,
    write_bank,
    write_checkpoint,
)
from .errors import (
    ConfigError,
    ContractViolation,
    DegenerateVectorError,
    DimensionMismatchError,
    FormatError,
    GacoopError,
    NumericAbortError,
)
from .metrics import evaluate, scored_samples
from .model import build_encoder, PromptParams
from .report import (
    EVAL_COLUMNS,
    eval_report_rows,
    pretty_table,
    write_csv,
    write_eval_csv,
    write_train_log_csv,
)
from .trainer import train

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_FORMAT = 3
EXIT_CONFIG = 4
EXIT_NUMERIC = 5
EXIT_PROPERTY = 6


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _load_configs(path: str | None, seed: int | None) -> tuple[TrainConfig, SynthConfig]:
    if path is None:
        train_cfg, synth_cfg = default_config()
    else:
        train_cfg, synth_cfg = load_config(path)
    if seed is not None:
        train_cfg.seed = seed
        synth_cfg.seed = seed
    return train_cfg, synth_cfg


def _write_config_used(out_dir: Path, train_cfg: TrainConfig, synth_cfg: SynthConfig) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config_used.txt").write_text(dump_config(train_cfg, synth_cfg))


def cmd_gen_data(args) -> int:
    train_cfg, synth_cfg = _load_configs(args.config, args.seed)
    out_dir = Path(args.out_dir)
    train_bank, id_test, ood = generate_synthetic(synth_cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_bank(train_bank, out_dir / "train.fbnk")
    write_bank(id_test, out_dir / "id_test.fbnk")
    write_bank(ood, out_dir / "ood_synthetic.fbnk")
    _write_config_used(out_dir, train_cfg, synth_cfg)
    print(f"wrote train/id_test/ood_synthetic banks to {out_dir}")
    return EXIT_OK


def cmd_train(args) -> int:
    train_cfg, synth_cfg = _load_configs(args.config, args.seed)
    if args.strategy is not None:
        train_cfg = replace(train_cfg, strategy=args.strategy)
    bank = read_bank(Path(args.data_dir) / "train.fbnk")
    enc = build_encoder(
        train_cfg.seed, bank.n_classes, bank.d_embed, train_cfg.d_token,
        train_cfg.ctx_len, train_cfg.tau,
    )
    params, log, stats = train(train_cfg, bank, enc)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_checkpoint(
        Checkpoint(
            strategy=train_cfg.strategy,
            params=params.ctx,
            d_embed=bank.d_embed,
            n_classes=bank.n_classes,
            seed=train_cfg.seed,
            tau=train_cfg.tau,
            conflict_ratio=stats.conflict_ratio,
        ),
        out,
    )
    log_path = Path(args.log) if args.log else out.with_suffix(".train_log.csv")
    write_train_log_csv(log_path, log)
    _write_config_used(out.parent, train_cfg, synth_cfg)
    if args.figures:
        from .plots import save_training_curves

        save_training_curves(log, out.with_suffix(".training_curves.png"))
    print(f"checkpoint {out} (params checksum {log.final_checksum})")
    print(f"train log {log_path}")
    return EXIT_OK


def _eval_checkpoint(ckpt: Checkpoint, data_dir) -> tuple:
    id_bank, ood_banks = load_id_and_ood_banks(data_dir)
    if id_bank.d_embed != ckpt.d_embed:
        raise DimensionMismatchError(
            f"checkpoint d_embed {ckpt.d_embed} vs bank {id_bank.d_embed}"
        )
    if id_bank.n_classes != ckpt.n_classes:
        raise DimensionMismatchError(
            f"checkpoint n_classes {ckpt.n_classes} vs bank {id_bank.n_classes}"
        )
    enc = build_encoder(
        ckpt.seed, ckpt.n_classes, ckpt.d_embed, ckpt.d_token, ckpt.ctx_len, ckpt.tau
    )
    params = PromptParams(ctx=ckpt.params)
    report = evaluate(
        params,
        enc,
        id_bank,
        ood_banks,
        ckpt.tau,
        strategy=ckpt.strategy,
        seed=ckpt.seed,
        conflict_ratio=ckpt.conflict_ratio,
    )
    return report, params, enc, id_bank, ood_banks


def cmd_eval(args) -> int:
    ckpt = read_checkpoint(args.checkpoint)
    report, params, enc, id_bank, ood_banks = _eval_checkpoint(ckpt, args.data_dir)
    write_eval_csv(args.out, [report])
    if args.figures:
        from .plots import save_score_density

        id_scores = [s.score for s in scored_samples(id_bank, params, enc, ckpt.tau)]
        for name, bank in sorted(ood_banks.items()):
            ood_scores = [s.score for s in scored_samples(bank, params, enc, ckpt.tau)]
            fig_path = Path(args.out).with_suffix(f".density_{name}.png")
            save_score_density(id_scores, ood_scores, fig_path, title=name)
    if args.pretty:
        print(pretty_table(EVAL_COLUMNS, eval_report_rows(report)))
    print(f"report {args.out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    train_cfg, synth_cfg = _load_configs(args.config, args.seed)
    strategies = tuple(args.strategies.split(","))
    for s in strategies:
        if s not in STRATEGIES:
            raise ConfigError(f"unknown strategy {s!r}")
    reports = bench_mod.run_bench(train_cfg, synth_cfg, strategies, args.seeds)
    out_dir = Path(args.out_dir)
    rows = []
    for r in reports:
        rows.extend(eval_report_rows(r))
    write_csv(out_dir / "bench_runs.csv", EVAL_COLUMNS, rows)
    summary = bench_mod.summarize(reports)
    summary_cols = ("strategy", "fpr95", "auroc", "id_acc", "conflict_ratio", "n_seeds")
    write_csv(out_dir / "bench_summary.csv", summary_cols, summary)
    if args.figures:
        from .plots import save_strategy_comparison

        save_strategy_comparison(summary, out_dir / "bench_summary.png")
    if args.pretty:
        print(pretty_table(summary_cols, summary))
    print(f"bench results in {out_dir}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    train_cfg, synth_cfg = _load_configs(args.config, args.seed)
    strategies = tuple(args.strategies.split(","))
    for s in strategies:
        if s not in STRATEGIES:
            raise ConfigError(f"unknown strategy {s!r}")
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --values list: {exc}") from None
    if not values:
        raise ConfigError("--values is empty")
    out_dir = Path(args.out_dir)
    run_rows = []
    summary_rows = []
    for value in values:
        t_cfg, s_cfg = bench_mod.apply_sweep_value(train_cfg, synth_cfg, args.param, value)
        reports = bench_mod.run_bench(t_cfg, s_cfg, strategies, args.seeds)
        for r in reports:
            for row in eval_report_rows(r):
                run_rows.append({"param": args.param, "value": value, **row})
        for row in bench_mod.summarize(reports):
            summary_rows.append({"param": args.param, "value": value, **row})
    run_cols = ("param", "value") + EVAL_COLUMNS
    write_csv(out_dir / "sweep_runs.csv", run_cols, run_rows)
    summary_cols = ("param", "value", "strategy", "fpr95", "auroc", "id_acc", "conflict_ratio")
    write_csv(out_dir / "sweep_summary.csv", summary_cols, summary_rows)
    if args.figures:
        from .plots import save_sweep_curves

        save_sweep_curves(summary_rows, args.param, out_dir / "sweep_summary.png")
    if args.pretty:
        print(pretty_table(summary_cols, summary_rows))
    print(f"sweep results in {out_dir}")
    return EXIT_OK


def cmd_grad_check(args) -> int:
    dims = tuple(int(d) for d in args.dims.split(","))
    fd = checks.run_gradient_check(trials=args.trials, seed=args.seed or 2024)
    print(
        f"gradient-fd: {fd.trials} trials, worst rel err {fd.worst:.3e}, "
        f"{'PASS' if fd.passed else 'FAIL'}"
    )
    geom = checks.run_align_check(pairs=args.pairs, dims=dims, seed=args.seed or 99)
    print(
        f"align-geometry: {geom.trials} pairs over dims {dims}, "
        f"{'PASS' if geom.passed else 'FAIL'}"
    )
    failures = fd.failures + geom.failures
    if failures:
        for line in failures[:20]:
            print(f"  violation: {line}", file=sys.stderr)
        if len(failures) > 20:
            print(f"  ... {len(failures) - 20} more", file=sys.stderr)
        return EXIT_PROPERTY
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="gacoop", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config=True):
        if config:
            p.add_argument("--config", help="key=value config file (defaults when omitted)")
        p.add_argument("--seed", type=int, help="override the config seed")

    p = sub.add_parser("gen-data", help="generate synthetic feature banks")
    add_common(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a prompt on a data directory")
    add_common(p)
    p.add_argument("--data-dir", required=True)
    p.add_argument("--strategy", choices=STRATEGIES, help="override the config strategy")
    p.add_argument("--out", required=True, help="checkpoint output path (.fbnk)")
    p.add_argument("--log", help="train-log CSV path (default: next to checkpoint)")
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.set_defaults(func=cmd_train, figures=True)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data-dir", required=True)
    p.add_argument("--out", required=True, help="report CSV path")
    p.add_argument("--pretty", action="store_true")
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.set_defaults(func=cmd_eval, figures=True)

    p = sub.add_parser("bench", help="gen+train+eval every strategy over k seeds")
    add_common(p)
    p.add_argument("--seeds", type=int, default=5, help="number of seed indices")
    p.add_argument("--strategies", default=",".join(STRATEGIES))
    p.add_argument("--out-dir", required=True)
    p.add_argument("--pretty", action="store_true")
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.set_defaults(func=cmd_bench, figures=True)

    p = sub.add_parser("sweep", help="bench over a grid of one parameter")
    add_common(p)
    p.add_argument("--param", required=True, choices=bench_mod.SWEEP_PARAMS)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--strategies", default=",".join(STRATEGIES))
    p.add_argument("--out-dir", required=True)
    p.add_argument("--pretty", action="store_true")
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.set_defaults(func=cmd_sweep, figures=True)

    p = sub.add_parser("grad-check", help="finite-difference and geometry suites")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--pairs", type=int, default=10000)
    p.add_argument("--dims", default="2,16,512,4096")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_grad_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FormatError, DimensionMismatchError, ContractViolation, DegenerateVectorError) as exc:
        print(f"format/data error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except NumericAbortError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FileNotFoundError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except GacoopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT


if __name__ == "__main__":
    sys.exit(main())
