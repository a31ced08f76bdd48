"""Exact forward propagation of the quenched law ``P_{x0}^omega(X_t = .)``.

The law at time ``t`` lives in the box ``x0 + [t * lo, t * hi]`` where ``lo``
and ``hi`` are the coordinatewise extremes of the supported steps.  The
environment is evaluated once on the union of these boxes, each step's
transition weight becomes a dense array over that region, and one time step
is a shifted multiply-add per supported step.  Nothing is pruned; zeros in
the box simply carry no mass.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .env import EnvironmentView, PerturbedEnvironment, as_point, require_walkable
from .errors import SimulationCapError

DEFAULT_SUPPORT_CAP = 10**7


@dataclass(frozen=True, eq=False)
class QuenchedDistribution:
    """Law of ``X_n``: support points sorted lexicographically with their masses."""

    horizon: int
    sites: np.ndarray  # (N, d) int64
    probs: np.ndarray  # (N,)

    @property
    def support(self) -> dict:
        return {tuple(int(c) for c in s): float(p) for s, p in zip(self.sites, self.probs)}

    def mean(self) -> np.ndarray:
        return self.probs @ self.sites

    def total_mass(self) -> float:
        return float(self.probs.sum())

    def to_csv(self, path: str | Path) -> None:
        d = self.sites.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"coord_{i}" for i in range(d)] + ["prob"])
            for s, p in zip(self.sites, self.probs):
                w.writerow([*(int(c) for c in s), repr(float(p))])


class _Propagator:
    """Dense-box forward DP for one environment and start point."""

    def __init__(self, env: EnvironmentView, x0: Sequence[int], n: int, cap: int, comp: np.ndarray | None = None):
        model = env.model
        require_walkable(model)
        tables = model.tables
        self.d = model.dimension
        self.x0 = np.asarray(as_point(x0), dtype=np.int64)
        steps = tables.steps
        self.steps = steps
        self.lo_step = steps.min(axis=0)
        self.hi_step = steps.max(axis=0)
        self.origin = self.x0 + n * np.minimum(self.lo_step, 0)
        top = self.x0 + n * np.maximum(self.hi_step, 0)
        shape = tuple(int(s) for s in top - self.origin + 1)
        if int(np.prod(shape, dtype=object)) > cap:
            raise SimulationCapError(f"quenched DP region of {shape} sites exceeds the cap of {cap}")
        self.shape = shape
        if comp is None:
            axes = [np.arange(o, o + s, dtype=np.int64) for o, s in zip(self.origin, shape)]
            grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.d)
            comp = env.components(grid).reshape(shape)
        self.comp = comp
        # weight[s] is the probability of taking step s from each site of the region
        self.weight = tables.probs[:, :].T[:, comp]  # (S, *shape)
        self.t = 0
        self.p = np.ones((1,) * self.d)

    def _box(self, t: int) -> tuple[np.ndarray, np.ndarray]:
        lo = self.x0 + t * self.lo_step - self.origin
        hi = self.x0 + t * self.hi_step - self.origin
        return lo, hi

    def advance(self) -> None:
        lo, hi = self._box(self.t)
        nlo, nhi = self._box(self.t + 1)
        src = tuple(slice(a, b + 1) for a, b in zip(lo, hi))
        new = np.zeros(tuple(int(b - a + 1) for a, b in zip(nlo, nhi)))
        tmp = np.empty_like(self.p)
        for s, step in enumerate(self.steps):
            off = lo + step - nlo
            dst = tuple(slice(int(o), int(o) + int(b - a + 1)) for o, a, b in zip(off, lo, hi))
            np.multiply(self.p, self.weight[s][src], out=tmp)
            new[dst] += tmp
        self.p = new
        self.t += 1

    def coords(self) -> list[np.ndarray]:
        lo, hi = self._box(self.t)
        return [np.arange(a, b + 1) + o for a, b, o in zip(lo, hi, self.origin)]

    def mean(self) -> np.ndarray:
        out = np.empty(self.d)
        axes = tuple(range(self.d))
        for i, c in enumerate(self.coords()):
            marginal = self.p.sum(axis=tuple(a for a in axes if a != i))
            out[i] = marginal @ c
        return out

    def mass_at(self, z: np.ndarray) -> float:
        lo, hi = self._box(self.t)
        rel = z - self.origin - lo
        if np.any(rel < 0) or np.any(rel > hi - lo):
            return 0.0
        return float(self.p[tuple(int(r) for r in rel)])

    def kill_at(self, z: np.ndarray) -> float:
        lo, hi = self._box(self.t)
        rel = z - self.origin - lo
        if np.any(rel < 0) or np.any(rel > hi - lo):
            return 0.0
        idx = tuple(int(r) for r in rel)
        m = float(self.p[idx])
        self.p[idx] = 0.0
        return m

    def distribution(self) -> QuenchedDistribution:
        nz = np.nonzero(self.p)
        lo, _ = self._box(self.t)
        sites = np.stack(nz, axis=1).astype(np.int64) + lo + self.origin
        # np.nonzero walks C order, which is lexicographic on sites
        return QuenchedDistribution(self.t, sites.reshape(-1, self.d), self.p[nz])


def quenched_distribution(
    env: EnvironmentView, x0: Sequence[int], n: int, cap: int = DEFAULT_SUPPORT_CAP
) -> QuenchedDistribution:
    """Exact law of ``X_n`` under ``P_{x0}^omega``."""
    if n < 0:
        raise ValueError("horizon must be nonnegative")
    prop = _Propagator(env, x0, n, cap)
    for _ in range(n):
        prop.advance()
    return prop.distribution()


def quenched_mean(env: EnvironmentView, x0: Sequence[int], n: int, cap: int = DEFAULT_SUPPORT_CAP) -> np.ndarray:
    """``E_{x0}^omega(X_n)``."""
    return quenched_means(env, x0, [n], cap)[0]


def quenched_means(
    env: EnvironmentView, x0: Sequence[int], horizons: Iterable[int], cap: int = DEFAULT_SUPPORT_CAP
) -> np.ndarray:
    """Quenched means at several horizons from one forward pass; rows follow ``horizons``."""
    horizons = [int(h) for h in horizons]
    if not horizons or min(horizons) < 0:
        raise ValueError("horizons must be nonnegative")
    wanted = set(horizons)
    prop = _Propagator(env, x0, max(horizons), cap)
    found = {}
    for t in range(max(horizons) + 1):
        if t in wanted:
            found[t] = prop.mean()
        if t < max(horizons):
            prop.advance()
    return np.array([found[h] for h in horizons])


def hitting_probability(
    env: EnvironmentView, x0: Sequence[int], z: Sequence[int], n: int, cap: int = DEFAULT_SUPPORT_CAP
) -> float:
    """``P_{x0}^omega(z in X_[0, n-1])``, by killing mass on arrival at ``z``."""
    if n <= 0:
        return 0.0
    z = np.asarray(as_point(z), dtype=np.int64)
    prop = _Propagator(env, x0, n - 1, cap)
    hit = prop.kill_at(z)
    for _ in range(n - 1):
        prop.advance()
        hit += prop.kill_at(z)
    return hit


def quenched_mean_pair(
    env: EnvironmentView, z: Sequence[int], resample_seed: int, x0: Sequence[int], n: int,
    cap: int = DEFAULT_SUPPORT_CAP,
) -> tuple[np.ndarray, np.ndarray]:
    """``(E^omega(X_n), E^omega~(X_n))`` with ``omega~ = perturb_site(env, z, resample_seed)``.

    Equivalent to two calls of :func:`quenched_mean` but evaluates the
    environment once.
    """
    tilde = perturb_site(env, z, resample_seed)
    a = _Propagator(env, x0, n, cap)
    comp = a.comp
    rel = np.asarray(tilde.site, dtype=np.int64) - a.origin
    if np.all(rel >= 0) and np.all(rel < np.asarray(a.shape)):
        comp = comp.copy()
        comp[tuple(int(r) for r in rel)] = tilde.site_component
    b = _Propagator(tilde, x0, n, cap, comp)
    for _ in range(n):
        a.advance()
    for _ in range(n):
        b.advance()
    return a.mean(), b.mean()


def perturb_site(env: EnvironmentView, z: Sequence[int], resample_seed: int) -> PerturbedEnvironment:
    """View equal to ``env`` except at ``z``, whose law is redrawn with ``resample_seed``."""
    return PerturbedEnvironment(env, as_point(z), int(resample_seed))
