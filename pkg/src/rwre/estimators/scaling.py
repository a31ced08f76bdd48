"""Growth scans: quenched-mean variance and two-walk intersections."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .. import rng
from ..env import Environment, EnvironmentBatch, ModelSpec, as_point, require_walkable, validate_model
from ..errors import EstimatorError
from ..quenched import DEFAULT_SUPPORT_CAP, quenched_means
from ..walker import WalkBatch
from .stats import EstimateWithError, ScanResult, mean_se, scan_from_points

PAIR_CHUNK = 256


def _check_ns(n_list: Sequence[int]) -> list[int]:
    ns = [int(n) for n in n_list]
    if any(b <= a for a, b in zip(ns, ns[1:])) or not ns or ns[0] < 1:
        raise EstimatorError("n_list must be positive and strictly increasing")
    return ns


def quenched_mean_table(model: ModelSpec, n_list: Sequence[int], env_count: int, seed: int,
                        cap: int = DEFAULT_SUPPORT_CAP) -> np.ndarray:
    """Quenched means ``(env_count, len(n_list), d)`` from 0 in environments ``0..env_count-1``."""
    ns = _check_ns(n_list)
    seeds = rng.replica_seeds(seed, rng.TAG_ENV, np.arange(env_count))
    return np.stack([quenched_means(Environment(model, int(s)), (0,) * model.dimension, ns, cap) for s in seeds])


def variance_scan(model: ModelSpec, n_list: Sequence[int], env_count: int, seed: int,
                  cap: int = DEFAULT_SUPPORT_CAP) -> ScanResult:
    """Mean of ``|E_0^omega(X_n) - grand mean|^2`` over environments, per ``n``, by exact DP."""
    require_walkable(model)
    if env_count < 2:
        raise EstimatorError("variance_scan needs at least two environments")
    ns = _check_ns(n_list)
    means = quenched_mean_table(model, ns, env_count, seed, cap)
    dev = ((means - means.mean(axis=0)) ** 2).sum(axis=2)  # (env, n)
    val, se = mean_se(dev)
    points = [(n, float(v), float(s)) for n, v, s in zip(ns, val, se)]
    return scan_from_points(points, env_count)


def _site_keys(pos: np.ndarray, span: int) -> np.ndarray:
    # injective int64 code for sites within `span` of the origin in every coordinate
    base = 2 * span + 1
    key = np.zeros(pos.shape[:-1], dtype=np.int64)
    for i in range(pos.shape[-1]):
        key = key * base + (pos[..., i] + span)
    return key


def pair_intersections(model: ModelSpec, n: int, start: int, count: int, seed: int,
                       start_b: Sequence[int] | None = None) -> np.ndarray:
    """``|X_[0,n-1] ∩ X~_[0,n-1]|`` for pairs ``start..start+count-1``, both walks in one environment."""
    d = model.dimension
    xb = np.zeros(d, dtype=np.int64) if start_b is None else np.asarray(as_point(start_b), dtype=np.int64)
    idx = np.arange(start, start + count, dtype=np.int64)
    env_seeds = rng.replica_seeds(seed, rng.TAG_ENV, idx, n)
    env = EnvironmentBatch(model, np.concatenate([env_seeds, env_seeds]))
    walk = np.concatenate([rng.replica_seeds(seed, rng.TAG_WALK, idx, n, 0), rng.replica_seeds(seed, rng.TAG_WALK, idx, n, 1)])
    starts = np.concatenate([np.zeros((count, d), dtype=np.int64), np.broadcast_to(xb, (count, d))])
    batch = WalkBatch(env, starts, walk)
    path = np.empty((2 * count, n, d), dtype=np.int64)
    path[:, 0] = batch.pos
    for t in range(1, n):
        batch.step()
        path[:, t] = batch.pos
    m = model.tables.steps
    span = int(np.abs(xb).max()) + (n - 1) * int(np.abs(m).max())
    keys = _site_keys(path, span)
    out = np.empty(count, dtype=np.int64)
    for i in range(count):
        out[i] = np.intersect1d(keys[i], keys[count + i]).size
    return out


def intersection_scan(model: ModelSpec, n_list: Sequence[int], pair_count: int, seed: int,
                      start_b: Sequence[int] | None = None) -> ScanResult:
    """Mean distinct-site intersection count of two walks over ``n`` steps, per ``n``."""
    require_walkable(model)
    ns = _check_ns(n_list)
    if pair_count < 2:
        raise EstimatorError("intersection_scan needs at least two pairs")
    points = []
    for n in ns:
        counts = np.concatenate([
            pair_intersections(model, n, s, min(PAIR_CHUNK, pair_count - s), seed, start_b)
            for s in range(0, pair_count, PAIR_CHUNK)
        ])
        m, se = mean_se(counts)
        points.append((n, float(m), float(se)))
    extra = {} if validate_model(model).elliptic else {"control": "inelliptic"}
    return scan_from_points(points, pair_count, **extra)


def estimate_h(model: ModelSpec, z: Sequence[int], reps: int, seed: int) -> EstimateWithError:
    """``h(z)``: distinct common sites of ``X_[0,sigma_1]`` from ``z`` and ``X~_[0,sigma~_1]`` from 0."""
    require_walkable(model, nonnestling=True)
    z = as_point(z)
    if model.level(z) != 0:
        raise EstimatorError("h(z) needs z on level 0")
    if reps < 2:
        raise EstimatorError("need at least two replicas")
    d = model.dimension
    vals = []
    for start in range(0, reps, PAIR_CHUNK):
        count = min(PAIR_CHUNK, reps - start)
        idx = np.arange(start, start + count, dtype=np.int64)
        env_seeds = rng.replica_seeds(seed, rng.TAG_ENV, idx)
        env = EnvironmentBatch(model, np.concatenate([env_seeds, env_seeds]))
        walk = np.concatenate([rng.replica_seeds(seed, rng.TAG_WALK, idx, 0), rng.replica_seeds(seed, rng.TAG_WALK, idx, 1)])
        starts = np.concatenate([np.broadcast_to(np.asarray(z, dtype=np.int64), (count, d)), np.zeros((count, d), dtype=np.int64)])
        batch = WalkBatch(env, starts, walk)
        sites = [{tuple(p)} for p in batch.pos.tolist()]
        base = batch.level.copy()
        active = np.ones(2 * count, dtype=bool)
        while active.any():
            ia = np.flatnonzero(active)
            batch.step(ia)
            for i, p in zip(ia.tolist(), batch.pos[ia].tolist()):
                sites[i].add(tuple(p))
            active[ia[batch.level[ia] >= base[ia] + 1]] = False
        vals.extend(len(sites[i] & sites[count + i]) for i in range(count))
    m, se = mean_se(np.asarray(vals, dtype=float))
    return EstimateWithError(float(m), float(se), reps, {"z": list(z)})
