"""Quenched walk engines and extraction of regeneration / common-level structure.

Step randomness of a walk is keyed by ``(walk_seed, step_index)``, so the
path of a walk depends only on its environment, start and seed, never on how
walks are interleaved or batched.  Single walks run through a pure-Python
path; :class:`WalkBatch` advances many walks at once with numpy.  Both use the
same pseudorandom function and agree exactly.
"""

from __future__ import annotations

import bisect
import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import rng
from .env import EnvironmentView, PerturbedEnvironment, as_point, require_walkable
from .errors import SimulationCapError

DEFAULT_CAP = 10**7


@dataclass(frozen=True, eq=False)
class Trajectory:
    start: tuple
    positions: np.ndarray  # (n+1, d) int64, X_0..X_n
    walk_seed: int

    def __len__(self) -> int:
        return self.positions.shape[0]

    def points(self) -> list[tuple]:
        return [tuple(int(c) for c in row) for row in self.positions]

    def levels(self, u_hat: Sequence[int]) -> np.ndarray:
        return self.positions @ np.asarray(u_hat, dtype=np.int64)

    def to_csv(self, path: str | Path, u_hat: Sequence[int]) -> None:
        d = self.positions.shape[1]
        levels = self.levels(u_hat)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step_index"] + [f"coord_{i}" for i in range(d)] + ["level"])
            for k, (row, lev) in enumerate(zip(self.positions, levels)):
                w.writerow([k, *(int(c) for c in row), int(lev)])


@dataclass(frozen=True)
class RegenerationRecord:
    sigma_increment: int
    x_increment: tuple


@dataclass(frozen=True)
class LevelChainRecord:
    common_level: int
    entry_a: tuple
    entry_b: tuple
    z_state: tuple


@dataclass(frozen=True, eq=False)
class CoupledPairResult:
    traj_a: Trajectory
    traj_b: Trajectory
    tau: int | None


# scalar engine


class _Walker:
    """One quenched walk, stepped in pure Python."""

    __slots__ = ("env", "tables", "seed", "x", "t", "level", "u_hat")

    def __init__(self, env: EnvironmentView, x0: Sequence[int], walk_seed: int):
        self.env = env
        self.tables = env.model.tables
        self.seed = int(walk_seed)
        self.x = as_point(x0)
        self.t = 0
        self.u_hat = env.model.u_hat
        self.level = sum(a * b for a, b in zip(self.x, self.u_hat))

    def step(self) -> tuple:
        k = self.env.component_at(self.x)
        u = rng.uniform_scalar(self.seed, rng.TAG_STEP, self.t)
        s = self.tables.step_tuples[bisect.bisect_right(self.tables.cum_lists[k], u)]
        self.x = tuple(a + b for a, b in zip(self.x, s))
        self.level = sum(a * b for a, b in zip(self.x, self.u_hat))
        self.t += 1
        return self.x


def simulate(env: EnvironmentView, x0: Sequence[int], n: int, walk_seed: int) -> Trajectory:
    """``n``-step quenched trajectory from ``x0``."""
    require_walkable(env.model)
    w = _Walker(env, x0, walk_seed)
    path = [w.x]
    for _ in range(n):
        path.append(w.step())
    return Trajectory(as_point(x0), np.asarray(path, dtype=np.int64).reshape(n + 1, env.model.dimension), int(walk_seed))


def regenerations(
    env: EnvironmentView, x0: Sequence[int], k: int, walk_seed: int, cap: int = DEFAULT_CAP
) -> list[RegenerationRecord]:
    """First ``k`` regeneration cycles ``(sigma_j - sigma_{j-1}, X_{sigma_j} - X_{sigma_{j-1}})``."""
    require_walkable(env.model, nonnestling=True)
    w = _Walker(env, x0, walk_seed)
    records: list[RegenerationRecord] = []
    last_t, last_x, last_level = 0, w.x, w.level
    while len(records) < k:
        w.step()
        if w.level >= last_level + 1:
            records.append(RegenerationRecord(w.t - last_t, tuple(a - b for a, b in zip(w.x, last_x))))
            last_t, last_x, last_level = w.t, w.x, w.level
        elif w.t - last_t > cap:
            raise SimulationCapError(
                f"regeneration cycle exceeded {cap} steps; sigma has tails heavier than the cap allows"
            )
    return records


def simulate_pair(env, x0_a, x0_b, n, seed_a, seed_b) -> tuple[Trajectory, Trajectory]:
    """Two walks, independent given the environment, in the same realization."""
    return simulate(env, x0_a, n, seed_a), simulate(env, x0_b, n, seed_b)


def intersections(traj_a: Trajectory, traj_b: Trajectory) -> int:
    """Number of distinct sites visited by both trajectories."""
    if len(traj_a) != len(traj_b):
        raise ValueError("intersections expects trajectories of equal length")
    return len(set(traj_a.points()) & set(traj_b.points()))


def level_chain(
    env: EnvironmentView,
    x0_a: Sequence[int],
    x0_b: Sequence[int],
    j_max: int,
    seeds: tuple[int, int],
    cap: int = DEFAULT_CAP,
) -> list[LevelChainRecord]:
    """First ``j_max`` common levels of two walks and the entry points there."""
    require_walkable(env.model, nonnestling=True)
    a = _Walker(env, x0_a, seeds[0])
    b = _Walker(env, x0_b, seeds[1])
    if a.level != b.level:
        raise ValueError("level_chain walks must start on the same level")
    ea, eb = a.x, b.x
    la, lb = a.level, b.level
    current = la
    records: list[LevelChainRecord] = []
    while len(records) < j_max:
        moves = 0
        while not (la == lb and la > current):
            if la <= lb:
                a.step()
                if a.level > la:
                    la, ea = a.level, a.x
            else:
                b.step()
                if b.level > lb:
                    lb, eb = b.level, b.x
            moves += 1
            if moves > cap:
                raise SimulationCapError(f"no common level within {cap} steps")
        current = la
        records.append(LevelChainRecord(la, ea, eb, tuple(p - q for p, q in zip(ea, eb))))
    return records


def coupled_pair(
    env: EnvironmentView,
    z: Sequence[int],
    resample_seed: int,
    x0: Sequence[int],
    n: int,
    walk_seed: int,
) -> CoupledPairResult:
    """Edge-stack coupling of walks in ``env`` and in ``env`` perturbed at ``z``.

    Each site ``x`` carries a stack of i.i.d. edges; the ``v``-th visit to ``x``
    uses edge ``v``, drawn with ``rng.uniform(walk_seed, TAG_EDGE, *x, v)``.
    The perturbed walk shares every stack except the one at ``z``, which is
    drawn independently from the resampled law at ``z``.
    """
    require_walkable(env.model)
    z = as_point(z)
    tables = env.model.tables
    tilde = PerturbedEnvironment(env, z, int(resample_seed))
    seed = int(walk_seed)

    def run(view, alt_at_z: bool) -> list[tuple]:
        visits: dict[tuple, int] = {}
        x = as_point(x0)
        path = [x]
        for _ in range(n):
            v = visits.get(x, 0)
            visits[x] = v + 1
            tag = rng.TAG_EDGE_ALT if (alt_at_z and x == z) else rng.TAG_EDGE
            u = rng.uniform_scalar(seed, tag, *x, v)
            k = view.component_at(x)
            s = tables.step_tuples[bisect.bisect_right(tables.cum_lists[k], u)]
            x = tuple(p + q for p, q in zip(x, s))
            path.append(x)
        return path

    pa = run(env, False)
    pb = run(tilde, True)
    tau = next((i for i, x in enumerate(pa) if x == z), None)
    d = env.model.dimension
    start = as_point(x0)
    return CoupledPairResult(
        Trajectory(start, np.asarray(pa, dtype=np.int64).reshape(n + 1, d), seed),
        Trajectory(start, np.asarray(pb, dtype=np.int64).reshape(n + 1, d), seed),
        tau,
    )


# batched engine


class WalkBatch:
    """Many quenched walks advanced together.

    ``env`` may be a single environment (all walks share it) or an
    :class:`~rwre.env.EnvironmentBatch` whose rows align with the walks.
    """

    def __init__(self, env: EnvironmentView, starts, walk_seeds):
        self.env = env
        self.model = env.model
        tables = self.model.tables
        self._cum = tables.cum
        self._steps = tables.steps
        self._slevels = tables.levels
        self.seeds = rng.as_u64(walk_seeds).ravel()
        w = self.seeds.shape[0]
        starts = np.asarray(starts, dtype=np.int64)
        self.pos = np.array(np.broadcast_to(starts.reshape(-1, self.model.dimension), (w, self.model.dimension)))
        self.level = self.pos @ np.asarray(self.model.u_hat, dtype=np.int64)
        self.t = np.zeros(w, dtype=np.int64)

    def __len__(self) -> int:
        return self.pos.shape[0]

    def step(self, idx: np.ndarray | None = None) -> np.ndarray:
        """Advance walks ``idx`` (all if None) by one step; returns the step level increments."""
        if idx is None:
            comps = self.env.components(self.pos)
            u = rng.uniform_array(self.seeds, rng.TAG_STEP, self.t)
            k = (self._cum[comps] <= u[:, None]).sum(axis=1)
            self.pos += self._steps[k]
            self.t += 1
            inc = self._slevels[k]
            self.level += inc
            return inc
        comps = self.env.components(self.pos[idx], idx)
        u = rng.uniform_array(self.seeds[idx], rng.TAG_STEP, self.t[idx])
        k = (self._cum[comps] <= u[:, None]).sum(axis=1)
        self.pos[idx] += self._steps[k]
        self.t[idx] += 1
        inc = self._slevels[k]
        self.level[idx] += inc
        return inc


def simulate_many(env: EnvironmentView, x0, n: int, walk_seeds) -> np.ndarray:
    """Positions ``(W, n+1, d)`` of ``W`` walks; row ``i`` equals ``simulate(env, x0, n, walk_seeds[i])``."""
    require_walkable(env.model)
    batch = WalkBatch(env, x0, walk_seeds)
    out = np.empty((len(batch), n + 1, env.model.dimension), dtype=np.int64)
    out[:, 0] = batch.pos
    for t in range(n):
        batch.step()
        out[:, t + 1] = batch.pos
    return out


def first_common_level_batch(
    env: EnvironmentView, starts_a, starts_b, seeds_a, seeds_b, cap: int = DEFAULT_CAP
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """First common level above the start level for ``P`` pairs of walks.

    ``env`` rows ``0..P-1`` serve pair ``i`` for both of its walks (the batch
    is built with rows ``[0..P-1, 0..P-1]``).  Returns ``(L, entry_a, entry_b)``.
    """
    from .env import EnvironmentBatch  # local to avoid widening the import surface

    seeds_a = rng.as_u64(seeds_a).ravel()
    seeds_b = rng.as_u64(seeds_b).ravel()
    p = seeds_a.shape[0]
    if isinstance(env, EnvironmentBatch):
        env2 = EnvironmentBatch(env.model, np.concatenate([env.seeds, env.seeds]))
    else:
        env2 = env
    d = env.model.dimension
    starts = np.concatenate(
        [np.broadcast_to(np.asarray(starts_a, dtype=np.int64).reshape(-1, d), (p, d)),
         np.broadcast_to(np.asarray(starts_b, dtype=np.int64).reshape(-1, d), (p, d))]
    )
    batch = WalkBatch(env2, starts, np.concatenate([seeds_a, seeds_b]))
    base = batch.level[:p].copy()
    if not np.array_equal(base, batch.level[p:]):
        raise ValueError("paired walks must start on the same level")
    entry = batch.pos.copy()
    found = np.zeros(p, dtype=bool)
    moves = 0
    while not found.all():
        la, lb = batch.level[:p], batch.level[p:]
        active = ~found
        ia = np.flatnonzero(active & (la <= lb))
        ib = np.flatnonzero(active & (lb < la)) + p
        idx = np.concatenate([ia, ib])
        inc = batch.step(idx)
        moved = idx[inc > 0]
        entry[moved] = batch.pos[moved]
        la, lb = batch.level[:p], batch.level[p:]
        found |= (la == lb) & (la > base)
        moves += 1
        if moves > cap:
            raise SimulationCapError(f"no common level within {cap} steps")
    return batch.level[:p].copy(), entry[:p], entry[p:]
