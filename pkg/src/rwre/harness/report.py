"""One-page summary of finished runs."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable

from ..errors import RWREError

COLUMNS = ["run", "name", "experiment", "headline", "value", "se", "exponent", "exponent_se", "checks", "status"]


class ReportError(RWREError):
    """A manifest or result file is missing or unreadable."""


def _load(path: Path) -> dict:
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise ReportError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ReportError(f"corrupt JSON in {path}: {exc}") from exc


def _manifest_path(p: str | Path) -> Path:
    p = Path(p)
    return p / "manifest.json" if p.is_dir() else p


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, list):
        return "[" + ", ".join(_fmt(v) for v in x) + "]"
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def summarize(paths: Iterable[str | Path]) -> list[dict]:
    """Rows of the summary table, one per experiment (plus one per cross check)."""
    rows = []
    for p in paths:
        mpath = _manifest_path(p)
        man = _load(mpath)
        if not isinstance(man, dict) or "experiments" not in man:
            raise ReportError(f"{mpath} is not a run manifest")
        run = str(mpath.parent)
        for e in man["experiments"]:
            rec = _load(mpath.parent / e["files"]["result"])
            res = rec.get("result", {})
            head = res.get("headline", {})
            checks = rec.get("checks", [])
            n_ok = sum(1 for c in checks if c["passed"])
            rows.append({
                "run": run,
                "name": e["name"],
                "experiment": e["experiment"],
                "headline": head.get("label", ""),
                "value": head.get("value"),
                "se": head.get("se"),
                "exponent": res.get("fitted_exponent"),
                "exponent_se": res.get("exponent_se"),
                "checks": f"{n_ok}/{len(checks)}" if checks else "",
                "status": ("PASS" if e["checks_failed"] == 0 else "FAIL") if checks else "-",
            })
        for c in man.get("cross_checks", []):
            rows.append({
                "run": run, "name": c["name"], "experiment": "cross-check",
                "headline": f"{c['lhs']} {c['rule']} {c['rhs']} + {c['offset']}",
                "value": c["observed"], "se": None, "exponent": None, "exponent_se": None,
                "checks": "1/1" if c["passed"] else "0/1", "status": "PASS" if c["passed"] else "FAIL",
            })
    return rows


def render(rows: list[dict], fmt: str = "text") -> str:
    cells = [[_fmt(r[c]) for c in COLUMNS] for r in rows]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        w.writerows(cells)
        return buf.getvalue()
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(COLUMNS)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(COLUMNS, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() for row in cells]
    return "\n".join(lines) + "\n"
