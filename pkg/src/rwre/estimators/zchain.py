"""The difference chain on the zero level: kernel moments and Green functions.

One transition of the chain from state ``x`` runs two walks from ``x`` and
from ``0`` in a fresh environment until their first common level ``L`` and
returns the difference of their entry points there.  Restarting the
environment at every transition is legitimate because the two walks only
ever see unexplored sites beyond the common level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .. import rng
from ..env import EnvironmentBatch, ModelSpec, as_point, require_walkable
from ..errors import EstimatorError
from ..walker import DEFAULT_CAP, first_common_level_batch
from .stats import CHUNK, ScanResult, _jsonable, mean_se, scan_from_points

P_HAT = 2


def _on_zero_level(model: ModelSpec, x: Sequence[int]) -> tuple:
    x = as_point(x)
    if len(x) != model.dimension:
        raise EstimatorError("state has the wrong dimension")
    if model.level(x) != 0:
        raise EstimatorError(f"state {x} is not on the zero level")
    return x


def z_transition(model: ModelSpec, states: np.ndarray, env_seeds, walk_a, walk_b,
                 cap: int = DEFAULT_CAP) -> np.ndarray:
    """One step of the difference chain for each row of ``states``."""
    env = EnvironmentBatch(model, rng.as_u64(env_seeds))
    zero = np.zeros_like(states)
    _, ea, eb = first_common_level_batch(env, states, zero, walk_a, walk_b, cap)
    return ea - eb


@dataclass(frozen=True, eq=False)
class QKernelEstimate:
    state_x: tuple
    mean_increment: np.ndarray
    mean_increment_se: np.ndarray
    p_hat_moment: float
    p_hat_moment_se: float
    holding_prob: float
    holding_prob_se: float
    replicas: int

    def to_dict(self) -> dict:
        return {
            "state_x": list(self.state_x),
            "mean_increment": _jsonable(self.mean_increment),
            "mean_increment_se": _jsonable(self.mean_increment_se),
            "p_hat": P_HAT,
            "p_hat_moment": self.p_hat_moment,
            "p_hat_moment_se": self.p_hat_moment_se,
            "holding_prob": self.holding_prob,
            "holding_prob_se": self.holding_prob_se,
            "replicas": self.replicas,
        }


def estimate_q(model: ModelSpec, x: Sequence[int], reps: int, seed: int, cap: int = DEFAULT_CAP) -> QKernelEstimate:
    """Moments of ``Z_1 - x`` for the chain started at ``x``."""
    require_walkable(model, nonnestling=True)
    x = _on_zero_level(model, x)
    if reps < 2:
        raise EstimatorError("need at least two replicas")
    d = model.dimension
    incs = []
    for start in range(0, reps, CHUNK):
        idx = np.arange(start, min(start + CHUNK, reps), dtype=np.int64)
        states = np.broadcast_to(np.asarray(x, dtype=np.int64), (idx.size, d))
        z1 = z_transition(
            model, states,
            rng.replica_seeds(seed, rng.TAG_ENV, idx),
            rng.replica_seeds(seed, rng.TAG_WALK, idx, 0),
            rng.replica_seeds(seed, rng.TAG_WALK, idx, 1),
            cap,
        )
        incs.append(z1 - states)
    m = np.concatenate(incs).astype(float)
    mean, mean_sd = mean_se(m)
    mom, mom_se = mean_se((m**2).sum(axis=1) ** (P_HAT / 2))
    hold, _ = mean_se(np.all(m == 0, axis=1).astype(float))
    hold_se = math.sqrt(hold * (1 - hold) / reps)
    return QKernelEstimate(x, mean, mean_sd, float(mom), float(mom_se), float(hold), hold_se, reps)


def green_function(model: ModelSpec, x: Sequence[int], y: Sequence[int], n_list: Sequence[int] | int,
                   chains: int, seed: int, cap: int = DEFAULT_CAP) -> ScanResult:
    """``G_n(x, y) = sum_{k <= n} P(Z_k = y | Z_0 = x)`` by running ``chains`` chains to ``max(n_list)``.

    The exponent is fitted over the positive ``n`` of the scan.
    """
    require_walkable(model, nonnestling=True)
    x = _on_zero_level(model, x)
    y = _on_zero_level(model, y)
    ns = [int(n_list)] if isinstance(n_list, (int, np.integer)) else [int(n) for n in n_list]
    if not ns or ns[0] < 0 or any(b <= a for a, b in zip(ns, ns[1:])):
        raise EstimatorError("n_list must be nonnegative and strictly increasing")
    if chains < 2:
        raise EstimatorError("need at least two chains")
    d = model.dimension
    yv = np.asarray(y, dtype=np.int64)
    n_max = ns[-1]
    visits = []
    for start in range(0, chains, CHUNK):
        idx = np.arange(start, min(start + CHUNK, chains), dtype=np.int64)
        z = np.array(np.broadcast_to(np.asarray(x, dtype=np.int64), (idx.size, d)))
        count = np.zeros(idx.size, dtype=np.int64)
        snap = np.zeros((idx.size, len(ns)), dtype=np.int64)
        count += np.all(z == yv, axis=1)
        for k in range(n_max + 1):
            if k > 0:
                z = z_transition(
                    model, z,
                    rng.replica_seeds(seed, rng.TAG_ENV, idx, k),
                    rng.replica_seeds(seed, rng.TAG_WALK, idx, k, 0),
                    rng.replica_seeds(seed, rng.TAG_WALK, idx, k, 1),
                    cap,
                )
                count += np.all(z == yv, axis=1)
            for j, n in enumerate(ns):
                if n == k:
                    snap[:, j] = count
        visits.append(snap)
    g = np.concatenate(visits).astype(float)
    val, se = mean_se(g)
    points = [(n, float(v), float(s)) for n, v, s in zip(ns, val, se)]
    fit = [p for p in points if p[0] > 0]
    res = scan_from_points(fit, chains) if len(fit) >= 3 else ScanResult(fit, None, None, chains, "insufficient")
    return ScanResult(points, res.fitted_exponent, res.exponent_se, chains, res.flag,
                      {"x": list(x), "y": list(y)})
