"""CSV serialization of reports and logs, plus the aligned text tables.

Floats are written with repr (shortest round-trip), so identical runs
produce byte-identical files.
"""

from __future__ import annotations

import csv
from pathlib import Path

from .metrics import EvalReport
from .trainer import TrainLog

EVAL_COLUMNS = ("strategy", "dataset", "fpr95", "auroc", "id_acc", "conflict_ratio", "seed")
AVERAGE_ROW = "average"


def _fmt(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def eval_report_rows(report: EvalReport) -> list[dict]:
    rows = []
    for name, m in sorted(report.per_dataset.items()):
        rows.append(
            {
                "strategy": report.strategy,
                "dataset": name,
                "fpr95": m.fpr95,
                "auroc": m.auroc,
                "id_acc": report.id_accuracy,
                "conflict_ratio": report.conflict_ratio,
                "seed": report.seed,
            }
        )
    rows.append(
        {
            "strategy": report.strategy,
            "dataset": AVERAGE_ROW,
            "fpr95": report.average_fpr95,
            "auroc": report.average_auroc,
            "id_acc": report.id_accuracy,
            "conflict_ratio": report.conflict_ratio,
            "seed": report.seed,
        }
    )
    return rows


def write_csv(path, columns: tuple[str, ...], rows: list[dict]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def write_eval_csv(path, reports: list[EvalReport]) -> None:
    rows = []
    for report in reports:
        rows.extend(eval_report_rows(report))
    write_csv(path, EVAL_COLUMNS, rows)


def write_train_log_csv(path, log: TrainLog) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("epoch", "l_coop", "l_ood", "train_acc", "conflict_ratio"))
        for e in log.entries:
            writer.writerow(
                (e.epoch, repr(e.l_coop), repr(e.l_ood), repr(e.train_accuracy), repr(e.conflict_ratio))
            )
        fh.write(f"# params_checksum={log.final_checksum}\n")


def pretty_table(columns: tuple[str, ...], rows: list[dict], floats: str = ".4f") -> str:
    """Aligned text table; float cells formatted with `floats`."""
    rendered = [
        [
            format(row[c], floats) if isinstance(row[c], float) else str(row[c])
            for c in columns
        ]
        for row in rows
    ]
    widths = [
        max(len(columns[i]), *(len(r[i]) for r in rendered)) if rendered else len(columns[i])
        for i in range(len(columns))
    ]
    lines = [
        "  ".join(c.ljust(w) for c, w in zip(columns, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for r in rendered:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)))
    return "\n".join(lines)
