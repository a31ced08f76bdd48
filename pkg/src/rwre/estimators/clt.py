"""Quenched central limit checks in one fixed environment."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from .. import rng
from ..env import Environment, ModelSpec, require_walkable
from ..errors import EstimatorError
from ..walker import WalkBatch
from .stats import _jsonable


def lattice_ks(sample: np.ndarray) -> float:
    """KS distance between an integer sample and its fitted normal, discretized to the sample's lattice.

    The sample's span ``h`` is the gcd of its offsets from the minimum.  The
    normal is evaluated at ``k + h/2`` for each lattice point ``k``, which is
    the CDF of the normal rounded to the lattice.
    """
    s = np.sort(np.asarray(sample, dtype=np.int64))
    lo = int(s[0])
    h = int(np.gcd.reduce(s - lo)) or 1
    mu = s.mean()
    sd = s.std(ddof=1)
    if sd == 0:
        return 0.0
    k = np.arange(lo - h, int(s[-1]) + 1, h)
    emp = np.searchsorted(s, k, side="right") / s.size
    fit = ndtr((k + h / 2 - mu) / sd)
    return float(np.abs(emp - fit).max())


@dataclass(frozen=True, eq=False)
class CLTReport:
    env_seed: int
    n: int
    walks: int
    covariance: np.ndarray
    reference: np.ndarray
    frobenius_rel: float
    ks: list
    centering_gaps: dict
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "env_seed": int(self.env_seed),
            "n": self.n,
            "walks": self.walks,
            "covariance": self.covariance.tolist(),
            "reference": self.reference.tolist(),
            "frobenius_rel": self.frobenius_rel,
            "ks": self.ks,
            "centering_gaps": {str(k): v for k, v in self.centering_gaps.items()},
            **{k: _jsonable(v) for k, v in self.extra.items()},
        }


def clt_test(model: ModelSpec, env_seed: int, n: int, walks: int, seed: int,
             v_ref: Sequence[float], d_ref: np.ndarray, checkpoints: Sequence[int] | None = None) -> CLTReport:
    """Test battery for ``B_n(1) = (X_n - n v) / sqrt(n)`` under one quenched environment.

    ``v_ref`` and ``d_ref`` are the annealed velocity and diffusion matrix.
    ``centering_gaps[c] = max_{k <= c} |mean_k - k v| / sqrt(c)`` where
    ``mean_k`` is the Monte Carlo quenched mean at time ``k``.
    """
    require_walkable(model)
    if walks < 2:
        raise EstimatorError("need at least two walks")
    checkpoints = sorted({int(c) for c in (checkpoints or [n])})
    if checkpoints[0] < 1 or checkpoints[-1] > n:
        raise EstimatorError("checkpoints must lie in 1..n")
    v = np.asarray(v_ref, dtype=float)
    d_ref = np.asarray(d_ref, dtype=float)
    env = Environment(model, int(env_seed))
    batch = WalkBatch(env, np.zeros(model.dimension, dtype=np.int64),
                      rng.replica_seeds(seed, rng.TAG_WALK, np.arange(walks)))
    worst = 0.0
    gaps = {}
    for k in range(1, n + 1):
        batch.step()
        worst = max(worst, float(np.linalg.norm(batch.pos.mean(axis=0) - k * v)))
        if k in checkpoints:
            gaps[k] = worst / math.sqrt(k)
    b = (batch.pos - n * v) / math.sqrt(n)
    cov = np.atleast_2d(np.cov(b, rowvar=False))
    ref_norm = np.linalg.norm(d_ref)
    frob = float(np.linalg.norm(cov - d_ref) / ref_norm) if ref_norm > 0 else float(np.linalg.norm(cov))
    ks = [lattice_ks(batch.pos[:, i]) for i in range(model.dimension)]
    return CLTReport(int(env_seed), n, walks, cov, d_ref, frob, ks, gaps)
