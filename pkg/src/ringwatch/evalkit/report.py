"""Report tables and plot-data files.

``metrics.csv``       one row per report, columns ``REPORT_COLUMNS``
``ablation.csv``      variant, RMSE, MAE, Pearson (only when several variants are present)
``per_finger.jsonl``  one series per line: {"series": "<label>/<metric>", "x": fingers, "y": values}
``per_user.jsonl``    one series per line over users, for reports that carry a user id
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from ..synthhand import FINGERS
from .metrics import MetricsReport

REPORT_COLUMNS = (
    ["label", "variant", "user_id", "n_windows", "mpjpe_cm", "angle_diff_deg", "force_rmse", "force_mae",
     "force_pearson"]
    + [f"{f}_{m}" for f in FINGERS for m in ("rmse", "mae", "pearson")]
)
ABLATION_COLUMNS = ["variant", "RMSE", "MAE", "Pearson"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv(rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def report_row(r: MetricsReport) -> list:
    row = [r.label, r.variant, r.user_id, r.n_windows, r.mpjpe_cm, r.angle_diff_deg, r.force_rmse, r.force_mae,
           r.force_pearson]
    for f in FINGERS:
        pf = r.per_finger.get(f)
        row += [pf["rmse"], pf["mae"], pf["pearson"]] if pf else [None, None, None]
    return row


def _series(name: str, x: list, y: list) -> str:
    return json.dumps({"series": name, "x": x, "y": y}, sort_keys=True)


def emit_report(reports: list[MetricsReport], path: Path) -> list[Path]:
    """Write the tables and plot-data files into directory ``path``; returns the files written."""
    if not reports:
        raise ValueError("nothing to report")
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def put(name: str, text: str):
        p = out / name
        p.write_text(text)
        written.append(p)

    put("metrics.csv", _csv([REPORT_COLUMNS] + [report_row(r) for r in reports]))

    lines = []
    for r in reports:
        if not r.per_finger:
            continue
        for metric in ("rmse", "mae", "pearson"):
            lines.append(_series(f"{r.label}/{metric}", list(FINGERS), [r.per_finger[f][metric] for f in FINGERS]))
    put("per_finger.jsonl", "".join(line + "\n" for line in lines))

    users = [r for r in reports if r.user_id is not None]
    if users:
        x = [r.user_id for r in users]
        lines = [_series(m, x, [getattr(r, m) for r in users]) for m in ("mpjpe_cm", "angle_diff_deg", "force_pearson")]
        put("per_user.jsonl", "".join(line + "\n" for line in lines))

    variants = [r.variant for r in reports]
    if len(set(variants)) > 1:
        put("ablation.csv", _csv([ABLATION_COLUMNS] + [[r.variant, r.force_rmse, r.force_mae, r.force_pearson]
                                                       for r in reports]))
    return written
