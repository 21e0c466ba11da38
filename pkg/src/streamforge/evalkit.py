"""Test-set evaluation: PAR2 sums, virtual-best-encoding analysis, outputs.

Instances on which every variant timed out (or errored) are excluded from
all aggregates; remaining timeouts score twice the limit. The reduction
percentage compares the VBE sum against the original encoding's sum.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .aspkit.snippets import Snippet, compose
from .solver_backend import RunRecord, SolveOutcome

ORIGINAL_VARIANT = "original"

SUMMARY_SCHEMA_VERSION = 1


class GridIncomplete(Exception):
    """The record set does not cover the full variant x instance grid."""


def par2(outcome: SolveOutcome, timeout_seconds: float) -> float:
    """Solved runs score their wall time; TIMEOUT and ERROR score 2x limit."""
    if outcome.solved:
        return outcome.wall_seconds
    return 2.0 * float(timeout_seconds)


def vbe(outcomes: Iterable[SolveOutcome], timeout_seconds: float) -> float:
    """Per-instance virtual best: the minimum PAR2 across variants."""
    scores = [par2(o, timeout_seconds) for o in outcomes]
    if not scores:
        raise ValueError("vbe needs at least one outcome")
    return min(scores)


@dataclass
class VariantSet:
    """The programs under evaluation: original, singles, and the union."""

    original_text: str
    singles: list[tuple[str, Snippet]] = field(default_factory=list)

    def variants(self) -> list[tuple[str, str]]:
        out = [(ORIGINAL_VARIANT, self.original_text)]
        for variant_id, snippet in self.singles:
            out.append((variant_id, compose(self.original_text, [snippet], ids=[variant_id])))
        if self.singles:
            ids = [variant_id for variant_id, _ in self.singles]
            combined = compose(
                self.original_text, [s for _, s in self.singles], ids=ids
            )
            out.append(("+".join(ids), combined))
        return out


@dataclass
class EvaluationReport:
    per_variant_par2_sum: dict[str, float]
    vbe_sum: float
    reduction_percent: int
    solved_counts: dict[str, int]
    excluded_instances: list[str]
    included_instances: list[str]
    cactus_rows: list[tuple[str, int, float]]
    timeout_seconds: float


def _round_half_up(x: float) -> int:
    import math

    return int(math.floor(x + 0.5))


def reduction_percent(original_sum: float, vbe_sum: float) -> int:
    if original_sum <= 0:
        return 0
    return _round_half_up(100.0 * (1.0 - vbe_sum / original_sum))


def aggregate(records: Sequence[RunRecord], timeout_seconds: float) -> EvaluationReport:
    """Build the evaluation report from a complete variant x instance grid."""
    variants: list[str] = []
    instances: list[str] = []
    cells: dict[tuple[str, str], SolveOutcome] = {}
    for record in records:
        if record.variant_id not in variants:
            variants.append(record.variant_id)
        if record.instance_id not in instances:
            instances.append(record.instance_id)
        cells[(record.variant_id, record.instance_id)] = record.outcome
    missing = [
        (v, i) for v in variants for i in instances if (v, i) not in cells
    ]
    if missing:
        raise GridIncomplete(f"missing {len(missing)} cells, e.g. {missing[0]}")

    excluded = [
        inst for inst in instances if all(not cells[(v, inst)].solved for v in variants)
    ]
    included = [inst for inst in instances if inst not in excluded]

    sums = {
        v: sum(par2(cells[(v, i)], timeout_seconds) for i in included) for v in variants
    }
    vbe_sum = sum(
        vbe((cells[(v, i)] for v in variants), timeout_seconds) for i in included
    )
    solved_counts = {
        v: sum(1 for i in included if cells[(v, i)].solved) for v in variants
    }
    cactus_rows: list[tuple[str, int, float]] = []
    for v in variants:
        runtimes = sorted(
            cells[(v, i)].wall_seconds for i in included if cells[(v, i)].solved
        )
        for rank, seconds in enumerate(runtimes, start=1):
            cactus_rows.append((v, rank, seconds))

    original_sum = sums.get(ORIGINAL_VARIANT, 0.0)
    return EvaluationReport(
        per_variant_par2_sum=sums,
        vbe_sum=vbe_sum,
        reduction_percent=reduction_percent(original_sum, vbe_sum),
        solved_counts=solved_counts,
        excluded_instances=excluded,
        included_instances=included,
        cactus_rows=cactus_rows,
        timeout_seconds=timeout_seconds,
    )


def emit_outputs(report: EvaluationReport, out_dir) -> list[Path]:
    """Write summary.json, par2_table.csv, cactus.csv, and report.md."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IOError(f"cannot create output directory {out}: {exc}") from exc

    summary_path = out / "summary.json"
    summary = {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "timeout_seconds": report.timeout_seconds,
        "per_variant_par2_sum": report.per_variant_par2_sum,
        "vbe_sum": report.vbe_sum,
        "reduction_percent": report.reduction_percent,
        "solved_counts": report.solved_counts,
        "excluded_instances": report.excluded_instances,
        "included_instances": report.included_instances,
    }
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", "utf-8")

    par2_path = out / "par2_table.csv"
    with par2_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variant", "par2_sum_seconds", "solved", "total_included"])
        for variant, total in report.per_variant_par2_sum.items():
            writer.writerow(
                [
                    variant,
                    f"{total:.3f}",
                    report.solved_counts[variant],
                    len(report.included_instances),
                ]
            )

    cactus_path = out / "cactus.csv"
    with cactus_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variant", "rank", "seconds"])
        for variant, rank, seconds in report.cactus_rows:
            writer.writerow([variant, rank, f"{seconds:.3f}"])

    md_path = out / "report.md"
    md_path.write_text(_render_markdown(report), "utf-8")
    return [summary_path, par2_path, cactus_path, md_path]


def _render_markdown(report: EvaluationReport) -> str:
    lines = ["# Evaluation report", ""]
    lines.append(
        f"Included instances: {len(report.included_instances)}; "
        f"excluded (no variant solved): {len(report.excluded_instances)}; "
        f"timeout: {report.timeout_seconds:g}s (PAR2)."
    )
    lines.append("")
    lines.append("| variant | PAR2 sum (s) | solved |")
    lines.append("|---|---|---|")
    for variant, total in report.per_variant_par2_sum.items():
        lines.append(f"| {variant} | {total:,.0f} | {report.solved_counts[variant]} |")
    lines.append(f"| VBE | {report.vbe_sum:,.0f} | - |")
    lines.append("")
    lines.append(
        f"The virtual best encoding reduces the original encoding's summed "
        f"running time by {report.reduction_percent}%."
    )
    if report.excluded_instances:
        lines.append("")
        lines.append("Excluded instances: " + ", ".join(report.excluded_instances))
    lines.append("")
    return "\n".join(lines)
