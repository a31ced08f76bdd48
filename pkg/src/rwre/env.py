"""Step laws, i.i.d. environment models, their validation, and lazy environments.

An environment is never materialized.  The law at site ``x`` is component
``k`` of the mixture, where ``k`` is drawn from the mixture weights with the
uniform ``rng.uniform(seed, TAG_SITE, *x)``; see :mod:`rwre.rng`.
"""

from __future__ import annotations

import bisect
import functools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import rng
from .direction import exact_rank
from .errors import ModelError

Point = tuple  # tuple[int, ...]

PROB_TOL = 1e-12
MODEL_SCHEMA = "rwre.model/1"


def as_point(x: Iterable) -> Point:
    return tuple(int(c) for c in x)


def dot_int(a: Sequence[int], b: Sequence[int]) -> int:
    return sum(int(x) * int(y) for x, y in zip(a, b))


@dataclass(frozen=True)
class StepLaw:
    """Finitely supported probability vector over lattice steps."""

    steps: tuple
    probs: tuple

    def __post_init__(self):
        steps = tuple(as_point(z) for z in self.steps)
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "probs", probs)
        if not steps or len(steps) != len(probs):
            raise ModelError("a step law needs one probability per step and at least one step")
        if len({len(z) for z in steps}) != 1:
            raise ModelError("steps of a law must share one dimension")
        if len(set(steps)) != len(steps):
            raise ModelError("steps of a law must be pairwise distinct")
        if any(p < 0 or not math.isfinite(p) for p in probs):
            raise ModelError("step probabilities must be finite and nonnegative")
        if abs(math.fsum(probs) - 1.0) > PROB_TOL:
            raise ModelError(f"step probabilities sum to {math.fsum(probs)!r}, not 1")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[Sequence[int], float]]) -> "StepLaw":
        pairs = list(pairs)
        return cls(tuple(z for z, _ in pairs), tuple(p for _, p in pairs))

    @classmethod
    def point_mass(cls, z: Sequence[int]) -> "StepLaw":
        return cls((as_point(z),), (1.0,))

    @classmethod
    def uniform(cls, steps: Iterable[Sequence[int]]) -> "StepLaw":
        steps = [as_point(z) for z in steps]
        return cls(tuple(steps), tuple(1.0 / len(steps) for _ in steps))

    @property
    def dimension(self) -> int:
        return len(self.steps[0])

    @property
    def support(self) -> tuple:
        return tuple(z for z, p in zip(self.steps, self.probs) if p > 0)

    def prob(self, z: Sequence[int]) -> float:
        z = as_point(z)
        return sum(p for s, p in zip(self.steps, self.probs) if s == z)

    def to_json(self) -> list:
        return [{"z": list(z), "p": p} for z, p in zip(self.steps, self.probs)]

    @classmethod
    def from_json(cls, entries: list) -> "StepLaw":
        return cls.from_pairs((e["z"], e["p"]) for e in entries)


def drift(law: StepLaw) -> np.ndarray:
    """Mean step ``sum_z z * p(z)``."""
    steps = np.asarray(law.steps, dtype=np.float64)
    return np.asarray(law.probs) @ steps


@dataclass(frozen=True)
class ModelTables:
    """Dense arrays derived from a model, shared by all simulation engines."""

    steps: np.ndarray  # (S, d) int64, union of supported steps
    levels: np.ndarray  # (S,) int64, step . u_hat
    probs: np.ndarray  # (K, S)
    cum: np.ndarray  # (K, S) cumulative probs, 2.0 past the last positive entry
    weight_cum: np.ndarray  # (K,) cumulative weights, same convention
    cum_lists: tuple  # per component, python lists for scalar draws
    step_tuples: tuple


def _cumulative(p: np.ndarray) -> np.ndarray:
    c = np.cumsum(p, axis=-1)
    if p.ndim == 1:
        last = np.flatnonzero(p > 0)[-1]
        c[last:] = 2.0
        return c
    for k in range(p.shape[0]):
        last = np.flatnonzero(p[k] > 0)[-1]
        c[k, last:] = 2.0
    return c


@dataclass(frozen=True)
class ModelSpec:
    """Finite mixture of step laws plus an integer drift direction ``u_hat``."""

    dimension: int
    u_hat: tuple
    components: tuple  # ((weight, StepLaw), ...)

    def __post_init__(self):
        object.__setattr__(self, "u_hat", as_point(self.u_hat))
        comps = tuple((float(w), law) for w, law in self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise ModelError("a model needs at least one component")
        if any(w < 0 or not math.isfinite(w) for w, _ in comps):
            raise ModelError("component weights must be finite and nonnegative")
        if abs(math.fsum(w for w, _ in comps) - 1.0) > PROB_TOL:
            raise ModelError("component weights must sum to 1")
        if not any(self.u_hat):
            raise ModelError("u_hat must be nonzero")

    @classmethod
    def homogeneous(cls, law: StepLaw, u_hat: Sequence[int]) -> "ModelSpec":
        return cls(law.dimension, as_point(u_hat), ((1.0, law),))

    @property
    def laws(self) -> tuple:
        return tuple(law for _, law in self.components)

    @property
    def weights(self) -> tuple:
        return tuple(w for w, _ in self.components)

    def level(self, x: Sequence[int]) -> int:
        return dot_int(x, self.u_hat)

    def with_direction(self, u_hat: Sequence[int]) -> "ModelSpec":
        return ModelSpec(self.dimension, as_point(u_hat), self.components)

    @cached_property
    def tables(self) -> ModelTables:
        union: list = []
        for _, law in self.components:
            for z in law.support:
                if z not in union:
                    union.append(z)
        index = {z: i for i, z in enumerate(union)}
        probs = np.zeros((len(self.components), len(union)))
        for k, (_, law) in enumerate(self.components):
            for z, p in zip(law.steps, law.probs):
                if p > 0:
                    probs[k, index[z]] = p
        steps = np.asarray(union, dtype=np.int64).reshape(len(union), self.dimension)
        cum = _cumulative(probs)
        wcum = _cumulative(np.asarray(self.weights))
        return ModelTables(
            steps=steps,
            levels=steps @ np.asarray(self.u_hat, dtype=np.int64),
            probs=probs,
            cum=cum,
            weight_cum=wcum,
            cum_lists=tuple(list(row) for row in cum),
            step_tuples=tuple(union),
        )

    # serialization

    def to_dict(self) -> dict:
        return {
            "schema": MODEL_SCHEMA,
            "dimension": self.dimension,
            "u_hat": list(self.u_hat),
            "components": [{"weight": w, "steps": law.to_json()} for w, law in self.components],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelSpec":
        schema = doc.get("schema", MODEL_SCHEMA)
        if schema != MODEL_SCHEMA:
            raise ModelError(f"unsupported model schema {schema!r}")
        try:
            comps = tuple((c["weight"], StepLaw.from_json(c["steps"])) for c in doc["components"])
            return cls(int(doc["dimension"]), as_point(doc["u_hat"]), comps)
        except (KeyError, TypeError) as exc:
            raise ModelError(f"malformed model document: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path: str | Path) -> "ModelSpec":
        return cls.from_json(Path(path).read_text())

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")


@dataclass(frozen=True)
class ValidationReport:
    forbidden_direction_ok: bool
    nonnestling_delta: float | None
    moment_bound_M: float
    ellipticity_2_3_ok: bool
    ellipticity_span_ok: bool
    support_J: tuple

    @property
    def elliptic(self) -> bool:
        return self.ellipticity_2_3_ok and self.ellipticity_span_ok

    @property
    def status(self) -> str:
        """``invalid`` (simulation not allowed), ``inelliptic`` (valid, fails (E)) or ``ok``."""
        if not self.forbidden_direction_ok or self.nonnestling_delta is None:
            return "invalid"
        return "ok" if self.elliptic else "inelliptic"

    def to_dict(self) -> dict:
        return {
            "forbidden_direction_ok": self.forbidden_direction_ok,
            "nonnestling_delta": self.nonnestling_delta,
            "moment_bound_M": self.moment_bound_M,
            "ellipticity_2_3_ok": self.ellipticity_2_3_ok,
            "ellipticity_span_ok": self.ellipticity_span_ok,
            "support_J": [list(z) for z in self.support_J],
            "status": self.status,
        }


@functools.lru_cache(maxsize=256)
def validate_model(model: ModelSpec) -> ValidationReport:
    d = model.dimension
    if len(model.u_hat) != d:
        raise ModelError(f"u_hat has dimension {len(model.u_hat)}, model has {d}")
    for _, law in model.components:
        if law.dimension != d:
            raise ModelError(f"step dimension {law.dimension} does not match model dimension {d}")

    live = [law for w, law in model.components if w > 0]
    forbidden = all(dot_int(z, model.u_hat) >= 0 for law in live for z in law.support)
    u = np.asarray(model.u_hat, dtype=np.float64)
    drifts = [float(drift(law) @ u) for law in live]
    delta = min(drifts)
    support = sorted({z for law in live for z in law.support})
    moment = max(math.sqrt(dot_int(z, z)) for z in support)

    zero = (0,) * d

    def strictly_random(law: StepLaw) -> bool:
        p0 = law.prob(zero)
        return all(p0 + p < 1 for z, p in zip(law.steps, law.probs) if z != zero)

    return ValidationReport(
        forbidden_direction_ok=forbidden,
        nonnestling_delta=delta if delta > 0 else None,
        moment_bound_M=moment,
        ellipticity_2_3_ok=any(strictly_random(law) for law in live),
        ellipticity_span_ok=exact_rank(support) >= 2,
        support_J=tuple(support),
    )


def require_walkable(model: ModelSpec, *, nonnestling: bool = False) -> ValidationReport:
    report = validate_model(model)
    if not report.forbidden_direction_ok:
        raise ModelError("model allows steps with z.u_hat < 0 (forbidden direction violated)")
    if nonnestling and report.nonnestling_delta is None:
        raise ModelError("model is not nonnestling in direction u_hat")
    return report


# environments


class EnvironmentView:
    """A deterministic map site -> component index of ``model``.

    ``components`` is the vectorized form; ``rows`` selects per-row seeds for
    batched environments and is ignored by single environments.
    """

    model: ModelSpec

    def components(self, coords: np.ndarray, rows: np.ndarray | None = None) -> np.ndarray:
        raise NotImplementedError

    def component_at(self, x: Point, row: int = 0) -> int:
        raise NotImplementedError

    def site_law(self, x: Sequence[int]) -> StepLaw:
        return self.model.components[self.component_at(as_point(x))][1]


def _pick(cum: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.searchsorted(cum, u, side="right").astype(np.int64)


def _pick_scalar(cum, u: float) -> int:
    return bisect.bisect_right(cum, u)


def draw_components(model: ModelSpec, seeds, coords: np.ndarray, tag: int = rng.TAG_SITE) -> np.ndarray:
    coords = np.asarray(coords, dtype=np.int64).reshape(-1, model.dimension)
    u = rng.uniform_array(seeds, tag, *coords.T)
    if u.shape[0] != coords.shape[0]:
        u = np.broadcast_to(u, (coords.shape[0],))
    return _pick(model.tables.weight_cum, u)


def draw_component_scalar(model: ModelSpec, seed: int, x: Point, tag: int = rng.TAG_SITE) -> int:
    return _pick_scalar(model.tables.weight_cum, rng.uniform_scalar(seed, tag, *x))


@dataclass(frozen=True)
class Environment(EnvironmentView):
    """One realization of the i.i.d. environment: a model plus a seed."""

    model: ModelSpec
    seed: int

    def components(self, coords, rows=None):
        return draw_components(self.model, int(self.seed), coords)

    def component_at(self, x, row=0):
        return draw_component_scalar(self.model, int(self.seed), x)

    def to_dict(self) -> dict:
        return {"model": self.model.to_dict(), "seed": int(self.seed)}

    @classmethod
    def from_dict(cls, doc: dict) -> "Environment":
        return cls(ModelSpec.from_dict(doc["model"]), int(doc["seed"]))


@dataclass(frozen=True, eq=False)
class EnvironmentBatch(EnvironmentView):
    """Independent environments, one per row (replica), sharing a model."""

    model: ModelSpec
    seeds: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "seeds", rng.as_u64(self.seeds).ravel())

    def components(self, coords, rows=None):
        seeds = self.seeds if rows is None else self.seeds[rows]
        return draw_components(self.model, seeds, coords)

    def component_at(self, x, row=0):
        return draw_component_scalar(self.model, int(self.seeds[row]), x)


@dataclass(frozen=True)
class PerturbedEnvironment(EnvironmentView):
    """``base`` everywhere except ``site``, whose law is redrawn from the mixture."""

    base: EnvironmentView
    site: tuple
    resample_seed: int

    @property
    def model(self) -> ModelSpec:  # type: ignore[override]
        return self.base.model

    @cached_property
    def site_component(self) -> int:
        return draw_component_scalar(self.model, int(self.resample_seed), self.site, rng.TAG_RESAMPLE)

    def components(self, coords, rows=None):
        coords = np.asarray(coords, dtype=np.int64).reshape(-1, self.model.dimension)
        out = self.base.components(coords, rows)
        hit = np.all(coords == np.asarray(self.site, dtype=np.int64), axis=1)
        if hit.any():
            out = out.copy()
            out[hit] = self.site_component
        return out

    def component_at(self, x, row=0):
        if as_point(x) == self.site:
            return self.site_component
        return self.base.component_at(x, row)


@dataclass(frozen=True)
class HalfSpaceEnvironment(EnvironmentView):
    """``base`` on levels ``<= threshold``; an independent draw keyed by ``seed`` above."""

    base: EnvironmentView
    threshold: int
    seed: int

    @property
    def model(self) -> ModelSpec:  # type: ignore[override]
        return self.base.model

    def components(self, coords, rows=None):
        coords = np.asarray(coords, dtype=np.int64).reshape(-1, self.model.dimension)
        out = self.base.components(coords, rows)
        upper = coords @ np.asarray(self.model.u_hat, dtype=np.int64) > self.threshold
        if upper.any():
            out = out.copy()
            out[upper] = draw_components(self.model, int(self.seed), coords[upper])
        return out

    def component_at(self, x, row=0):
        if self.model.level(x) > self.threshold:
            return draw_component_scalar(self.model, int(self.seed), as_point(x))
        return self.base.component_at(x, row)


def site_law(env: EnvironmentView, x: Sequence[int]) -> StepLaw:
    return env.site_law(x)
