"""First common point of two independent delayed renewal processes."""

from __future__ import annotations

import math
from typing import Mapping

import numpy as np

from .. import rng
from ..errors import EstimatorError
from .stats import CHUNK, EstimateWithError, mean_se

TAG_RENEWAL = 9


def _law(step_dist: Mapping[int, float]) -> tuple[np.ndarray, np.ndarray, int]:
    items = sorted((int(k), float(p)) for k, p in step_dist.items() if float(p) > 0)
    if not items or items[0][0] < 1:
        raise EstimatorError("renewal steps must be positive integers")
    vals = np.array([k for k, _ in items], dtype=np.int64)
    probs = np.array([p for _, p in items])
    if abs(probs.sum() - 1) > 1e-9:
        raise EstimatorError("renewal step probabilities must sum to 1")
    cum = np.cumsum(probs)
    cum[-1] = 2.0
    return vals, cum, math.gcd(*vals.tolist())


def sample_common_level(step_dist: Mapping[int, float], i: int, j: int, start: int, count: int,
                        seed: int, cap: int = 10**7) -> np.ndarray:
    """``L_{i,j}`` for replicas ``start..start+count-1``.

    Renewal ``b`` of replica ``r`` uses ``Y = F^{-1}(u(seed, r, b, k))`` for its
    ``k``-th step, so every replica is reproducible on its own.
    """
    vals, cum, h = _law(step_dist)
    if i < 0 or j < 0 or i % h or j % h:
        raise EstimatorError(f"i and j must be nonnegative multiples of the span {h}")
    idx = np.arange(start, start + count, dtype=np.int64)
    pos = np.stack([np.full(count, i, dtype=np.int64), np.full(count, j, dtype=np.int64)])
    taken = np.zeros((2, count), dtype=np.int64)
    done = (pos[0] == pos[1]) & (pos[0] >= 1)
    moves = 0
    while not done.all():
        act = np.flatnonzero(~done)
        b = (pos[0, act] > pos[1, act]).astype(np.int64)  # advance the laggard, process 0 on ties
        u = rng.uniform_array(seed, TAG_RENEWAL, idx[act], b, taken[b, act])
        pos[b, act] += vals[np.searchsorted(cum, u, side="right")]
        taken[b, act] += 1
        done[act] = (pos[0, act] == pos[1, act]) & (pos[0, act] >= 1)
        moves += 1
        if moves > cap:
            raise EstimatorError(f"no common renewal within {cap} moves")
    return pos[0]


def renewal_common_level(step_dist: Mapping[int, float], i: int, j: int, reps: int, r: float,
                         seed: int) -> EstimateWithError:
    """Monte Carlo ``E(L_{i,j}^r)``."""
    if r < 1:
        raise EstimatorError("the moment order r must be at least 1")
    if reps < 2:
        raise EstimatorError("need at least two replicas")
    ls = np.concatenate([
        sample_common_level(step_dist, i, j, s, min(CHUNK, reps - s), seed) for s in range(0, reps, CHUNK)
    ])
    m, se = mean_se(ls.astype(float) ** r)
    return EstimateWithError(float(m), float(se), reps, {"i": i, "j": j, "r": r,
                                                         "min_L": int(ls.min()), "max_L": int(ls.max())})
