"""Experiment configuration: parsing, model resolution and check evaluation.

Config documents are JSON objects with ``"version": 1``::

    {
      "version": 1,
      "experiment": "velocity",          # or "suite"
      "model": "desk",                   # preset name, inline model, or "model_file"
      "params": {"cycles": 1000000},
      "master_seed": 12345,
      "output_dir": "runs/velocity",
      "checks": [{"name": "v1", "path": "value.0", "target": 1.125, "se_path": "se.0", "k_se": 3}]
    }

A suite lists member experiments under ``"experiments"``; each member may
override ``model``.  Member ``name``s must be unique, and member seeds are
``derive_seed(master_seed, name)``.  ``"cross_checks"`` compare values from two
members, addressed as ``"<member>:<path>"``:
``{"name": ..., "lhs": "a:x", "rule": "le", "rhs": "b:y", "offset": 0.15}``.

Check rules
-----------
``target``   ``|obs - target| <= max(tol, k_se * se)``, elementwise
``le``/``lt`` ``obs + k_se * se`` is ``<=``/``<`` the bound
``ge``/``gt`` ``obs - k_se * se`` is ``>=``/``>`` the bound
``equals``   exact equality

``se_path`` defaults to no SE.  Checks with ``"acceptance": false`` are
reported but never change the exit status.
"""

from __future__ import annotations

import json
import math
import operator
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..env import ModelSpec
from ..errors import ConfigError, ModelError
from ..models import preset
from ..rng import derive_seed
from .experiments import REGISTRY

SCHEMA_VERSION = 1
EXPERIMENTS = tuple(REGISTRY)
_NAME = re.compile(r"[A-Za-z0-9][A-Za-z0-9_.-]*")
_RULES = {"le": operator.le, "lt": operator.lt, "ge": operator.ge, "gt": operator.gt}


@dataclass(frozen=True)
class Check:
    name: str
    path: str
    rule: str
    bound: Any
    se_path: str | None = None
    k_se: float = 0.0
    tol: float = 0.0
    acceptance: bool = True

    def to_dict(self) -> dict:
        return {"name": self.name, "path": self.path, "rule": self.rule, "bound": self.bound,
                "se_path": self.se_path, "k_se": self.k_se, "tol": self.tol, "acceptance": self.acceptance}


@dataclass(frozen=True)
class CrossCheck:
    """``lhs <rule> rhs + offset`` between two suite members."""

    name: str
    lhs: str
    rule: str
    rhs: str
    offset: float = 0.0
    acceptance: bool = True

    def evaluate(self, results: dict) -> dict:
        def get(ref):
            member, path = ref.split(":", 1)
            return lookup(results[member], path)

        a, b = get(self.lhs), get(self.rhs)
        try:
            ok = bool(_RULES[self.rule](float(_num(a)), float(_num(b)) + self.offset))
        except (TypeError, ValueError):
            ok = False
        return {"name": self.name, "lhs": self.lhs, "rule": self.rule, "rhs": self.rhs, "offset": self.offset,
                "observed": [a, b], "passed": ok, "acceptance": self.acceptance}


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    experiment: str
    model: ModelSpec | None
    params: dict
    seed: int
    checks: tuple = ()


@dataclass(frozen=True)
class RunConfig:
    master_seed: int
    output_dir: Path
    members: tuple  # of ExperimentConfig
    cross_checks: tuple = ()  # of CrossCheck
    canonical: str = ""  # canonical JSON of the parsed document, hashed into the manifest
    suite: bool = False
    extra: dict = field(default_factory=dict)


def _resolve_model(doc: dict, base_dir: Path, default: ModelSpec | None) -> ModelSpec | None:
    try:
        if "model_file" in doc:
            return ModelSpec.load(base_dir / doc["model_file"])
        m = doc.get("model")
        if m is None:
            return default
        if isinstance(m, str):
            return preset(m)
        if isinstance(m, dict):
            return ModelSpec.from_dict(m)
    except (ModelError, OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"bad model: {exc}") from exc
    raise ConfigError("model must be a preset name or an inline model object")


def _parse_check(doc: dict, where: str) -> Check:
    if not isinstance(doc, dict) or "name" not in doc or "path" not in doc:
        raise ConfigError(f"{where}: each check needs 'name' and 'path'")
    rules = [r for r in ("target", "le", "lt", "ge", "gt", "equals") if r in doc]
    if len(rules) != 1:
        raise ConfigError(f"{where}: check {doc['name']!r} needs exactly one rule")
    rule = rules[0]
    try:
        return Check(str(doc["name"]), str(doc["path"]), rule, doc[rule], doc.get("se_path"),
                     float(doc.get("k_se", 0.0)), float(doc.get("tol", 0.0)), bool(doc.get("acceptance", True)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: check {doc['name']!r}: {exc}") from exc


def _parse_member(doc: dict, base_dir: Path, default_model, master_seed: int, where: str) -> ExperimentConfig:
    exp = doc.get("experiment")
    if exp not in REGISTRY:
        raise ConfigError(f"{where}: unknown experiment {exp!r}; known: {', '.join(EXPERIMENTS)}")
    name = str(doc.get("name", exp))
    if not _NAME.fullmatch(name):
        raise ConfigError(f"{where}: name {name!r} must match {_NAME.pattern}")
    params = doc.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError(f"{where}: params must be an object")
    model = _resolve_model(doc, base_dir, default_model)
    checks = tuple(_parse_check(c, f"{where}.checks") for c in doc.get("checks", []))
    return ExperimentConfig(name, exp, model, params, derive_seed(master_seed, name), checks)


def parse_config(doc: dict, base_dir: str | Path = ".", *, experiment: str | None = None,
                 seed: int | None = None, output_dir: str | Path | None = None) -> RunConfig:
    """Validate a config document; ``experiment``/``seed``/``output_dir`` come from the command line."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    if doc.get("version") != SCHEMA_VERSION:
        raise ConfigError(f"config version must be {SCHEMA_VERSION}")
    doc = dict(doc)
    if experiment is not None:
        if doc.get("experiment", experiment) != experiment:
            raise ConfigError(f"command {experiment!r} does not match config experiment {doc['experiment']!r}")
        doc["experiment"] = experiment
    if seed is not None:
        doc["master_seed"] = seed
    master = doc.get("master_seed")
    if not isinstance(master, int) or isinstance(master, bool) or not 0 <= master < 1 << 64:
        raise ConfigError("master_seed must be an integer in [0, 2^64)")
    out = output_dir if output_dir is not None else doc.get("output_dir")
    if out is None:
        raise ConfigError("output_dir missing (set it in the config or pass --out)")
    base_dir = Path(base_dir)

    if doc.get("experiment") == "suite":
        default = _resolve_model(doc, base_dir, None)
        members = tuple(_parse_member(m, base_dir, default, master, f"experiments[{i}]")
                        for i, m in enumerate(doc.get("experiments", [])))
        if not members:
            raise ConfigError("suite has no experiments")
        names = [m.name for m in members]
        if len(set(names)) != len(names):
            raise ConfigError("suite member names must be unique")
        cross = []
        for i, c in enumerate(doc.get("cross_checks", [])):
            rule = c.get("rule", "le")
            if rule not in _RULES or "name" not in c:
                raise ConfigError(f"cross_checks[{i}]: needs a name and rule in {sorted(_RULES)}")
            for ref in (c.get("lhs", ""), c.get("rhs", "")):
                if ":" not in ref or ref.split(":", 1)[0] not in names:
                    raise ConfigError(f"cross_checks[{i}]: bad reference {ref!r}")
            cross.append(CrossCheck(str(c["name"]), c["lhs"], rule, c["rhs"], float(c.get("offset", 0.0)),
                                    bool(c.get("acceptance", True))))
        suite = True
    else:
        members = (_parse_member(doc, base_dir, None, master, "config"),)
        cross, suite = [], False

    for m in members:
        if m.model is None and m.experiment not in ("renewal", "rationalize"):
            raise ConfigError(f"{m.name}: experiment {m.experiment!r} needs a model")
    canon = {k: v for k, v in doc.items() if k != "output_dir"}
    return RunConfig(master, Path(out), members, tuple(cross),
                     json.dumps(canon, sort_keys=True, separators=(",", ":")), suite)


def load_config(path: str | Path, **overrides) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(doc, path.parent, **overrides)


def lookup(doc: Any, path: str) -> Any:
    """Value at a dotted path; integer segments index lists."""
    cur = doc
    for part in path.split(".") if path else []:
        try:
            cur = cur[int(part)] if isinstance(cur, list) else cur[part]
        except (KeyError, IndexError, ValueError, TypeError):
            raise ConfigError(f"path {path!r} not found in result") from None
    return cur


def _num(x):
    """Nested lists of numbers, with the JSON encodings of infinities decoded."""
    if isinstance(x, list):
        return [_num(v) for v in x]
    if x == "inf":
        return math.inf
    if x == "-inf":
        return -math.inf
    if x is None:
        return math.nan
    return x


def evaluate(check: Check, obs: Any, se: Any = None) -> bool:
    if check.rule == "equals":
        return obs == check.bound
    o = np.asarray(_num(obs), dtype=float)
    s = np.zeros_like(o) if se is None else np.asarray(_num(se), dtype=float)
    b = np.asarray(_num(check.bound), dtype=float)
    with np.errstate(invalid="ignore"):
        if check.rule == "target":
            slack = np.maximum(check.tol, check.k_se * s)
            ok = np.abs(o - b) <= slack
        elif check.rule in ("le", "lt"):
            ok = _RULES[check.rule](o + check.k_se * s, b)
        else:
            ok = _RULES[check.rule](o - check.k_se * s, b)
    return bool(np.all(ok))


def run_check(check: Check, result: dict) -> dict:
    obs = lookup(result, check.path)
    se = lookup(result, check.se_path) if check.se_path else None
    return {**check.to_dict(), "observed": obs, "observed_se": se, "passed": evaluate(check, obs, se)}
