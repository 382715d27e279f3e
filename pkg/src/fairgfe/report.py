"""Rendering of fairness reports: JSON, aligned text tables and histogram CSV."""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Mapping

import numpy as np


def _clean(obj):
    if isinstance(obj, float):
        return None if not math.isfinite(obj) else obj
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def to_json(payload) -> str:
    """Deterministic JSON text; NaN/inf become null."""
    if hasattr(payload, "to_dict"):
        payload = payload.to_dict()
    return json.dumps(_clean(payload), indent=2) + "\n"


def fmt(v, decimals=2):
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return "-"
    return f"{v:,.{decimals}f}"


def table(header, rows) -> str:
    cells = [header] + rows
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = []
    for k, r in enumerate(cells):
        lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))))
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def group_table(groups, title="binding data") -> str:
    """Groups as columns, before/after means as rows."""
    header = [f"Group ({title})"] + [g.name for g in groups]
    rows = [
        ["Support"] + [str(g.support) for g in groups],
        ["Original"] + [fmt(g.mean_before) for g in groups],
        ["Perturbed"] + [fmt(g.mean_after) for g in groups],
    ]
    return table(header, rows)


def format_report(report) -> str:
    parts = [
        f"mode={report.mode} weighted={str(report.weighted).lower()} sigma_n_sq={report.sigma_n_sq:g}",
        "",
        group_table(report.groups),
        "",
    ]
    if report.constraints:
        rows = [[f"{c.a} vs {c.b}", fmt(c.gap_before, 4), f"{c.gap_after:.3e}"] for c in report.constraints]
        parts += [table(["Constraint", "Gap before", "Gap after"], rows), ""]
    ranks = sorted(set(report.effective_ranks))
    parts.append(
        f"constraints={len(report.constraints)} effective_rank={','.join(map(str, ranks))} "
        f"perturbation_norm={report.total_perturbation_norm:.6g} max_gap_after={report.max_gap_after:.3e}"
    )
    if report.rmse_before is not None:
        parts.append(
            f"holdout RMSE {fmt(report.rmse_before)} -> {fmt(report.rmse_after)} "
            f"(cost of fairness {fmt(report.rmse_after - report.rmse_before)})"
        )
    if report.holdout_groups:
        parts += ["", group_table(report.holdout_groups, "holdout")]
    for note in report.notes:
        parts.append(f"note: {note}")
    return "\n".join(parts) + "\n"


HISTOGRAM_FIELDS = ("record", "group", "bin_lower", "bin_upper", "before", "after")


def histogram_rows(before, after, groups: Mapping[str, np.ndarray], bins: int = 20) -> list[dict]:
    """Binned prediction counts per group, before and after constraining.

    One set of edges spans every prediction in every group, before and
    after, so all rows are directly comparable. Each group also gets one
    ``mean`` row holding its mean prediction before and after.
    """
    if bins < 1:
        raise ValueError("bins must be >= 1")
    before = np.asarray(before, dtype=float)
    after = np.asarray(after, dtype=float)
    pooled = [v[r] for r in groups.values() if r.size for v in (before, after)]
    if pooled:
        allv = np.concatenate(pooled)
        lo, hi = float(allv.min()), float(allv.max())
    else:
        lo, hi = 0.0, 1.0
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    out = []
    for name, rows in groups.items():
        cb, _ = np.histogram(before[rows], edges)
        ca, _ = np.histogram(after[rows], edges)
        for i in range(bins):
            out.append({"record": "bin", "group": name, "bin_lower": float(edges[i]),
                        "bin_upper": float(edges[i + 1]), "before": int(cb[i]), "after": int(ca[i])})
        mb = float(before[rows].mean()) if rows.size else float("nan")
        ma = float(after[rows].mean()) if rows.size else float("nan")
        out.append({"record": "mean", "group": name, "bin_lower": "", "bin_upper": "", "before": mb, "after": ma})
    return out


def histogram_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, HISTOGRAM_FIELDS, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()
