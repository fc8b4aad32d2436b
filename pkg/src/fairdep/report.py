"""Run reports: machine JSON plus an aligned text table.

A report covers one or more runs. Runs that differ only in the
gender-balance flag are paired, and the balanced run gains a
Difference (%) column computed against its unbalanced partner's
F1 Total Average. Output is deterministic: stable ordering, fixed
rounding, no timestamps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from fairdep.errors import DataError
from fairdep.metrics import F1Breakdown, F1Row, relative_difference

JSON_DECIMALS = 6
F1_DECIMALS = 3
DIFF_DECIMALS = 1
MODEL_ORDER = {"depaudionet": 0, "rawaudio": 1}


def make_run_id(
    model: str, lam: int, conv_filters: int, gender_balance: bool, seed: int
) -> str:
    gb = "on" if gender_balance else "off"
    return f"{model}_lam{lam}_c{conv_filters}_gb-{gb}_seed{seed}"


@dataclass(frozen=True)
class RunResult:
    run_id: str
    model: str
    lam: int
    conv_filters: int
    gender_balance: bool
    breakdown: F1Breakdown
    spd: float
    sufficiency_gap: float


def _sort_key(run: RunResult):
    return (
        MODEL_ORDER.get(run.model, 99),
        run.lam,
        run.conv_filters,
        run.gender_balance,
        run.run_id,
    )


def _partner(run: RunResult, runs: list[RunResult]) -> RunResult | None:
    """The unbalanced partner of a balanced run, if unambiguous."""
    if not run.gender_balance:
        return None
    flipped = run.run_id.replace("_gb-on_", "_gb-off_")
    by_id = {r.run_id: r for r in runs}
    if flipped in by_id and not by_id[flipped].gender_balance:
        return by_id[flipped]
    candidates = [
        r
        for r in runs
        if not r.gender_balance
        and (r.model, r.lam, r.conv_filters) == (run.model, run.lam, run.conv_filters)
    ]
    if len(candidates) == 1:
        return candidates[0]
    return None


def _run_json(run: RunResult, diff: float | None) -> dict:
    doc = {
        "run_id": run.run_id,
        "model": run.model,
        "lambda": run.lam,
        "conv_filters": run.conv_filters,
        "gender_balance": run.gender_balance,
        "per_gender": {
            name: {
                "f1_nd": round(row.f1_nd, JSON_DECIMALS),
                "f1_d": round(row.f1_d, JSON_DECIMALS),
                "f1_avg": round(row.f1_avg, JSON_DECIMALS),
            }
            for name, row in run.breakdown.rows.items()
        },
        "f1_total_avg": round(run.breakdown.f1_total_avg, JSON_DECIMALS),
        "spd": round(run.spd, JSON_DECIMALS),
        "sufficiency_gap": round(run.sufficiency_gap, JSON_DECIMALS),
    }
    if diff is not None:
        doc["diff_percent"] = round(diff, JSON_DECIMALS)
    return doc


def run_result_from_json(doc: dict) -> RunResult:
    """Rebuild a RunResult from one entry of a report's "runs" list."""
    try:
        rows = {
            name: F1Row(f1_nd=row["f1_nd"], f1_d=row["f1_d"])
            for name, row in doc["per_gender"].items()
        }
        return RunResult(
            run_id=doc["run_id"],
            model=doc["model"],
            lam=doc["lambda"],
            conv_filters=doc["conv_filters"],
            gender_balance=doc["gender_balance"],
            breakdown=F1Breakdown(rows=rows),
            spd=doc["spd"],
            sufficiency_gap=doc["sufficiency_gap"],
        )
    except KeyError as exc:
        raise DataError(f"run JSON missing field {exc}") from exc


# 3-decimal rounding moves the mean of the two per-class values by at
# most 5e-4 and the reported average itself by another 5e-4, so a gap
# above 1e-3 cannot be rounding.
ROUNDING_SLACK = 1e-3


def audit_reported_averages(rows, log=None) -> list[int]:
    """Indices of rows whose reported average is not the mean of its parts.

    Each row is a (f1_nd, f1_d, reported_avg) triple rounded to 3
    decimals, as found in published results tables. Rows whose reported
    average sits further from (f1_nd + f1_d) / 2 than rounding allows
    are returned, and one line per flagged row is written to ``log``.
    """
    flagged = []
    for i, (f1_nd, f1_d, reported) in enumerate(rows):
        mean = (f1_nd + f1_d) / 2.0
        gap = abs(mean - reported)
        if gap > ROUNDING_SLACK + 1e-9:
            flagged.append(i)
            if log is not None:
                log(
                    f"row {i}: reported avg {reported:.3f} but "
                    f"(f1_nd + f1_d)/2 = {mean:.4f}; gap {gap:.4f} "
                    "exceeds 3-decimal rounding"
                )
    return flagged


def render_report(runs: list[RunResult]) -> tuple[str, str]:
    """Return (json_text, table_text) for a list of runs."""
    if not runs:
        raise DataError("report needs at least one run")
    ordered = sorted(runs, key=_sort_key)
    diffs: dict[str, float] = {}
    for run in ordered:
        partner = _partner(run, ordered)
        if partner is not None:
            diffs[run.run_id] = relative_difference(
                partner.breakdown.f1_total_avg, run.breakdown.f1_total_avg
            )

    json_text = (
        json.dumps(
            {"runs": [_run_json(r, diffs.get(r.run_id)) for r in ordered]},
            sort_keys=True,
            indent=2,
        )
        + "\n"
    )

    header = [
        "row",
        "model",
        "lambda",
        "C",
        "gb",
        "F f1_avg",
        "F f1_nd",
        "F f1_d",
        "M f1_avg",
        "M f1_nd",
        "M f1_d",
        "f1_total_avg",
        "diff_%",
    ]
    body: list[list[str]] = []
    for i, run in enumerate(ordered, start=1):
        rows = run.breakdown.rows

        def cell(gender: str, field: str) -> str:
            row = rows.get(gender)
            if row is None:
                return "-"
            return f"{getattr(row, field):.{F1_DECIMALS}f}"

        # the difference is only defined for a balanced run with an
        # unbalanced partner, so it prints on the balanced row
        diff = diffs.get(run.run_id)
        body.append(
            [
                str(i),
                run.model,
                str(run.lam),
                str(run.conv_filters),
                "Y" if run.gender_balance else "N",
                cell("F", "f1_avg"),
                cell("F", "f1_nd"),
                cell("F", "f1_d"),
                cell("M", "f1_avg"),
                cell("M", "f1_nd"),
                cell("M", "f1_d"),
                f"{run.breakdown.f1_total_avg:.{F1_DECIMALS}f}",
                f"{diff:+.{DIFF_DECIMALS}f}" if diff is not None else "",
            ]
        )

    widths = [max(len(header[c]), *(len(r[c]) for r in body)) for c in range(len(header))]
    lines = [
        "  ".join(h.ljust(widths[c]) for c, h in enumerate(header)).rstrip(),
        "  ".join("-" * widths[c] for c in range(len(header))),
    ]
    for r in body:
        lines.append("  ".join(r[c].ljust(widths[c]) for c in range(len(header))).rstrip())
    table_text = "\n".join(lines) + "\n"
    return json_text, table_text
