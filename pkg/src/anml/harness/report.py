"""CSV and JSON writers for trial results and their summaries."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

from .. import __version__
from ..federated import summarize_condition, sweep_correlation

SUMMARY_COLUMNS = ["method", "sweep", "sweep_value", "n", "mean", "std", "ci_lo", "ci_hi", "improvement", "p_value",
                   "cohens_d", "effect", "precision", "precision_std", "stage1_rate", "stage2_rate", "blend_rate",
                   "fallback_rate", "rho_c"]
TRIAL_COLUMNS = ["method", "sweep", "sweep_value", "trial", "seed", "metric", "value"]


class ReportError(RuntimeError):
    pass


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        return "" if math.isnan(x) else f"{x:.10g}"
    return str(x)


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _extra_columns(stats) -> list[str]:
    return sorted({k for s in stats for k in s.extra if k.startswith("sel_") or k == "rho_d"})


def summary_rows(stats) -> list[dict]:
    extras = _extra_columns(stats)
    rows = []
    for s in stats:
        row = {c: getattr(s, c) for c in SUMMARY_COLUMNS if c != "effect"}
        row["effect"] = s.effect
        for k in extras:
            row[k] = s.extra.get(k, float("nan"))
        rows.append(row)
    return rows


def trial_rows(results) -> list[dict]:
    """Long format: one row per (trial, method, metric)."""
    rows = []
    for t in results:
        base = {"method": t.method, "sweep": t.point.label, "sweep_value": t.point.value, "trial": t.trial,
                "seed": t.seed}
        metrics = {"error": t.error, "precision": t.precision}
        if t.rho_c is not None:
            metrics["rho_c"] = t.rho_c
        for k, v in sorted(t.extra.items()):
            if isinstance(v, (int, float)) and v is not None:
                metrics[k] = v
        rows.append({**base, "metric": "branch", "value": t.branch})
        rows.extend({**base, "metric": k, "value": v} for k, v in metrics.items())
    return rows


def detectability_rows(results) -> tuple[list[dict], dict]:
    by_point: dict[int, dict] = {}
    values = {}
    for t in results:
        cell = by_point.setdefault(t.point.index, {}).setdefault(t.trial, {"rho_d": t.extra.get("rho_d", 0.0)})
        cell[t.method] = {"error": t.error}
        values[t.point.index] = t.point.value
    rows = [summarize_condition(values[i], [cells[k] for k in sorted(cells)]) for i, cells in sorted(by_point.items())]
    return rows, sweep_correlation(rows)


def _csv_text(columns: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def _write(path: Path, text: str) -> Path:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def emit_report(results, stats, format: str = "both", path: str | Path = ".", config=None,
                wall_time: float | None = None) -> list[Path]:
    """Write ``summary.csv``, ``trials.csv`` and/or ``summary.json`` into directory ``path``.

    CSV output carries no timing information so identical seeds give
    byte-identical files.
    """
    if format not in ("csv", "json", "both"):
        raise ValueError(f"unknown report format {format!r}")
    results, stats = list(results), list(stats)
    if not results or not stats:
        raise ReportError("no results to report")
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ReportError(f"cannot create output directory {out}: {exc.strerror or exc}") from exc

    srows = summary_rows(stats)
    columns = SUMMARY_COLUMNS + _extra_columns(stats)
    detect = None
    if config is not None and config["experiment"] == "detectability":
        detect = detectability_rows(results)
    written = []
    if format in ("csv", "both"):
        written.append(_write(out / "summary.csv", _csv_text(columns, srows)))
        written.append(_write(out / "trials.csv", _csv_text(TRIAL_COLUMNS, trial_rows(results))))
        if detect is not None:
            cols = ["subtle_fraction", "abs_rho_d", "sample_delta", "contributor_delta", "ratio", "err_uniform",
                    "err_sample", "err_contributor"]
            written.append(_write(out / "detectability.csv", _csv_text(cols, detect[0])))
    if format in ("json", "both"):
        doc = {
            "version": __version__,
            "config": config.raw if config is not None else None,
            "summary": srows,
            "wall_time_seconds": wall_time,
        }
        if detect is not None:
            doc["detectability"] = {"rows": detect[0], "correlation": detect[1]}
        text = json.dumps(_jsonable(doc), indent=2, ensure_ascii=False, default=str) + "\n"
        written.append(_write(out / "summary.json", text))
    return written
