"""CSV writers for result tables.

``runs.csv`` keeps full precision (``repr`` floats) so every summary cell can
be recomputed from it. ``summary.csv`` is rounded for reading: accuracy x100
to one decimal, loss/ECE/OE to three decimals.
"""

from __future__ import annotations

import csv
from pathlib import Path

from .experiments import METRICS, PeEstimate, ResultTable, sample_std

RUN_COLUMNS = ("rep", "init", "criterion", "trn_val", "variant", "accuracy", "loss", "ece",
               "oe", "stop_epoch", "stop_reason")


def _cell(v) -> str:
    if hasattr(v, "item"):  # numpy scalar
        v = v.item()
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(float(v))
    return "" if v is None else str(v)


def fmt_metric(name: str, value: float) -> str:
    if name == "accuracy":
        return f"{100 * value:.1f}"
    if name == "stop_epoch":
        return f"{value:.1f}"
    return f"{value:.3f}"


def _write(path: Path, header, rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def summary_rows(table: ResultTable):
    header = ["init", "criterion", "trn_val", "variant", "runs"]
    for m in METRICS:
        header += [f"{m}_mean", f"{m}_std"]
    rows = []
    for s in table.rows:
        row = [s.init, s.criterion, s.trn_val, s.variant, s.runs]
        for m in METRICS:
            row += [fmt_metric(m, s.mean[m]), fmt_metric(m, s.std[m])]
        rows.append(row)
    return header, rows


def run_rows(table: ResultTable):
    extra = sorted({k for r in table.runs for k in r.extra})
    header = list(RUN_COLUMNS) + extra
    rows = []
    for r in sorted(table.runs, key=lambda r: r.rep):
        rows.append([getattr(r, c) for c in RUN_COLUMNS] + [r.extra.get(k) for k in extra])
    return header, rows


def write_table(table: ResultTable, out) -> list[Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths = [
        _write(out / "summary.csv", *summary_rows(table)),
        _write(out / "runs.csv", *run_rows(table)),
    ]
    for name, (header, rows) in {**table.traces, **table.histograms}.items():
        paths.append(_write(out / f"{name}.csv", header, rows))
    return paths


def write_pe(estimates: list[PeEstimate], out) -> list[Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    runs = [
        (e.rep, ";".join(map(str, e.fold_stop_epochs)), e.pe_stop_epoch, " | ".join(e.warnings))
        for e in estimates
    ]
    pes = [e.pe_stop_epoch for e in estimates]
    summary = [(len(pes), f"{sum(pes) / len(pes):.1f}", f"{sample_std(pes):.1f}", min(pes), max(pes))]
    return [
        _write(out / "summary.csv", ("runs", "pe_mean", "pe_std", "pe_min", "pe_max"), summary),
        _write(out / "runs.csv", ("rep", "fold_stop_epochs", "pe_stop_epoch", "warnings"), runs),
    ]
