"""Run configured experiments and persist their results.

Layout of an output directory::

    manifest.json             written last, atomically
    <name>/result.json        inputs, seed, result values, check outcomes
    <name>/<table>.csv        tidy tables (scans, matrices, per-env values)

``result.json`` and the CSV files depend only on the config and master seed;
timestamps live in the manifest.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

from .. import __version__
from ..env import validate_model
from ..errors import ConfigError, RWREError
from .config import ExperimentConfig, RunConfig, run_check
from .experiments import REGISTRY

RESULT_SCHEMA = "rwre.result/1"
MANIFEST_SCHEMA = "rwre.manifest/1"

EXIT_PASS, EXIT_CHECK_FAIL, EXIT_USAGE, EXIT_WARNING = 0, 1, 2, 3


class ExperimentError(RWREError):
    """An estimator failed inside a named experiment."""


def clean(x: Any) -> Any:
    """Recursively convert to plain JSON types; non-finite floats become strings."""
    if isinstance(x, dict):
        return {str(k): clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return clean(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


def dumps(doc: Any) -> str:
    return json.dumps(clean(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header: list, rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


@dataclass(frozen=True)
class MemberRun:
    record: dict
    files: dict
    failed_checks: int
    warning: bool


def run_member(cfg: ExperimentConfig, out: Path, master_seed: int) -> MemberRun:
    if cfg.model is not None and cfg.experiment != "validate":
        status = validate_model(cfg.model).status
        if status == "invalid":
            raise ConfigError(f"{cfg.name}: model fails validation ({status}); run 'validate' for the report")
    try:
        outcome = REGISTRY[cfg.experiment](cfg.model, cfg.params, cfg.seed)
    except ConfigError as exc:
        raise ConfigError(f"{cfg.name}: {exc}") from exc
    except (RWREError, ValueError, ArithmeticError) as exc:
        raise ExperimentError(f"{cfg.name} ({cfg.experiment}): {exc}") from exc

    result = clean(outcome.result)
    checks = [run_check(c, result) for c in cfg.checks]
    record = {
        "schema": RESULT_SCHEMA,
        "name": cfg.name,
        "experiment": cfg.experiment,
        "master_seed": master_seed,
        "seed": cfg.seed,
        "model": cfg.model.to_dict() if cfg.model is not None else None,
        "params": cfg.params,
        "result": result,
        "warnings": outcome.warnings,
        "checks": checks,
    }
    files = {"result": f"{cfg.name}/result.json"}
    write_atomic(out / files["result"], dumps(record))
    for table, (header, rows) in sorted(outcome.tables.items()):
        files[table] = f"{cfg.name}/{table}.csv"
        write_atomic(out / files[table], csv_text(header, rows))
    failed = sum(1 for c in checks if c["acceptance"] and not c["passed"])
    warning = cfg.experiment == "validate" and result["status"] != "ok"
    if cfg.experiment == "validate" and result["status"] == "invalid":
        failed += 1
    return MemberRun(record, files, failed, warning)


def tool_version() -> str:
    return __version__


def run(config: RunConfig, log=None) -> dict:
    """Run every member of ``config``; returns the manifest (also written to disk)."""
    started = datetime.now(timezone.utc).isoformat()
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    entries, results, failed, warning = [], {}, 0, False
    for member in config.members:
        if log:
            log(f"running {member.name} ({member.experiment})")
        mr = run_member(member, out, config.master_seed)
        results[member.name] = mr.record["result"]
        failed += mr.failed_checks
        warning |= mr.warning
        entries.append({
            "name": member.name,
            "experiment": member.experiment,
            "files": mr.files,
            "checks_failed": mr.failed_checks,
            "checks_total": len(mr.record["checks"]),
        })
    cross = [c.evaluate(results) for c in config.cross_checks]
    failed += sum(1 for c in cross if c["acceptance"] and not c["passed"])
    if cross:
        write_atomic(out / "cross_checks.json", dumps(cross))
    code = EXIT_CHECK_FAIL if failed else (EXIT_WARNING if warning else EXIT_PASS)
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "tool_version": tool_version(),
        "config_sha256": hashlib.sha256(config.canonical.encode("utf-8")).hexdigest(),
        "master_seed": config.master_seed,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "experiments": entries,
        "cross_checks": cross,
        "checks_failed": failed,
        "exit_code": code,
    }
    write_atomic(out / "manifest.json", dumps(manifest))
    return manifest
