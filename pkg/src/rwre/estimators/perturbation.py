"""Influence of a single-site perturbation on the quenched mean."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .. import rng
from ..env import Environment, HalfSpaceEnvironment, ModelSpec, as_point, require_walkable
from ..errors import EstimatorError
from ..quenched import hitting_probability, quenched_mean_pair
from .stats import EstimateWithError, mean_se

DEFAULT_MAX_N = 24


def perturbation_influence(model: ModelSpec, z: Sequence[int], n: int, env_reps: int, resample_reps: int,
                           seed: int, max_n: int = DEFAULT_MAX_N) -> tuple[EstimateWithError, EstimateWithError]:
    """Both sides of the single-site influence bound, per base environment.

    For base environment ``e`` the law at ``z`` is redrawn once, and the
    half-space ``U = {x : x.u > z.u}`` is re-randomized ``resample_reps``
    times.  ``left[e]`` is the Euclidean norm of the average of
    ``E^omega(X_n) - E^omega~(X_n)`` over those re-randomizations;
    ``right[e]`` is the exact ``P_0^omega(z in X_[0,n-1])``, which does not
    depend on ``omega_U``.
    """
    require_walkable(model, nonnestling=True)
    z = as_point(z)
    if model.level(z) < 0:
        raise EstimatorError("z must satisfy z.u >= 0")
    if n > max_n:
        raise EstimatorError(f"n={n} exceeds the exact-DP limit {max_n}")
    if resample_reps < 2 or env_reps < 1:
        raise EstimatorError("need at least one environment and two resamplings")
    zero = (0,) * model.dimension
    thr = model.level(z)
    left, left_se, right = [], [], []
    for e in range(env_reps):
        base = Environment(model, rng.hash_scalar(seed, rng.TAG_ENV, e))
        resample = rng.hash_scalar(seed, rng.TAG_RESAMPLE, e)
        diffs = []
        for r in range(resample_reps):
            env = HalfSpaceEnvironment(base, thr, rng.hash_scalar(seed, rng.TAG_ENV, e, r))
            a, b = quenched_mean_pair(env, z, resample, zero, n)
            diffs.append(a - b)
        m, se = mean_se(np.asarray(diffs))
        norm = float(np.linalg.norm(m))
        left.append(norm)
        left_se.append(float(np.linalg.norm(se)))
        right.append(hitting_probability(base, zero, z, n))
    info = {"z": list(z), "n": n}
    return (
        EstimateWithError(np.array(left), np.array(left_se), resample_reps, dict(info, side="left")),
        EstimateWithError(np.array(right), np.zeros(env_reps), resample_reps, dict(info, side="right")),
    )
