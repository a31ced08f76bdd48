"""Estimators built on i.i.d. regeneration cycles.

Replica ``i`` gets its own environment and walk seed, derived from the run
seed and ``i`` alone, so every estimate is a deterministic function of
``(model, replicas, seed)`` and does not depend on the chunking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .. import rng
from ..env import EnvironmentBatch, ModelSpec, require_walkable
from ..errors import EstimatorError, SimulationCapError
from ..walker import DEFAULT_CAP, WalkBatch
from .stats import CHUNK, EstimateWithError, ScanResult, _jsonable, batch_groups, mean_se, ratio_se, weighted_line


@dataclass(frozen=True)
class SiteFunctional:
    """``f(T_x omega)`` evaluated for a batch of current sites.

    ``k`` is the depth below the current level that ``f`` may look at;
    ``fn(env, coords, rows)`` returns an array of shape ``(m, dim)``.
    """

    name: str
    k: int
    dim: int
    fn: Callable


def _one(env, coords, rows):
    return np.ones((coords.shape[0], 1))


def _drift(env, coords, rows):
    t = env.model.tables
    return (t.probs @ t.steps)[env.components(coords, rows)]


def _drift_level(env, coords, rows):
    u = np.asarray(env.model.u_hat, dtype=float)
    return _drift(env, coords, rows) @ u[:, None]


def functional(name: str, model: ModelSpec) -> SiteFunctional:
    """Built-in functionals by name: ``one``, ``drift``, ``drift_level``."""
    if name == "one":
        return SiteFunctional("one", 0, 1, _one)
    if name == "drift":
        return SiteFunctional("drift", 0, model.dimension, _drift)
    if name == "drift_level":
        return SiteFunctional("drift_level", 0, 1, _drift_level)
    raise EstimatorError(f"unknown functional {name!r}")


def run_cycles(
    model: ModelSpec,
    seed: int,
    start: int,
    count: int,
    k: int = 0,
    f: SiteFunctional | None = None,
    cap: int = DEFAULT_CAP,
) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Cycle ``k + 1`` of replicas ``start .. start + count - 1``.

    Returns ``(sigma_increment, x_increment, f_sum)`` where ``f_sum`` adds
    ``f`` over the times ``sigma_k <= m < sigma_{k+1}``.
    """
    idx = np.arange(start, start + count, dtype=np.int64)
    env = EnvironmentBatch(model, rng.replica_seeds(seed, rng.TAG_ENV, idx))
    batch = WalkBatch(env, np.zeros(model.dimension, dtype=np.int64), rng.replica_seeds(seed, rng.TAG_WALK, idx))
    w = count
    cyc = np.zeros(w, dtype=np.int64)
    reg_level = batch.level.copy()
    reg_pos = batch.pos.copy()
    reg_t = np.zeros(w, dtype=np.int64)
    sig = np.zeros(w, dtype=np.int64)
    xinc = np.zeros((w, model.dimension), dtype=np.int64)
    fsum = np.zeros((w, f.dim)) if f is not None else None
    active = np.ones(w, dtype=bool)
    while True:
        ia = np.flatnonzero(active)
        if ia.size == 0:
            break
        if f is not None:
            inwin = ia[cyc[ia] == k]
            if inwin.size:
                fsum[inwin] += f.fn(env, batch.pos[inwin], inwin)
        batch.step(ia)
        adv = batch.level[ia] >= reg_level[ia] + 1
        j = ia[adv]
        if j.size:
            last = j[cyc[j] == k]
            sig[last] = batch.t[last] - reg_t[last]
            xinc[last] = batch.pos[last] - reg_pos[last]
            cyc[j] += 1
            reg_level[j] = batch.level[j]
            reg_pos[j] = batch.pos[j]
            reg_t[j] = batch.t[j]
            active[last] = False
        if np.any(batch.t[ia] - reg_t[ia] > cap):
            raise SimulationCapError(f"regeneration cycle exceeded {cap} steps")
    return sig, xinc, fsum


def _collect(model, cycles, seed, k=0, f=None, cap=DEFAULT_CAP):
    sig, xinc, fsum = [], [], []
    for start in range(0, cycles, CHUNK):
        s, x, fs = run_cycles(model, seed, start, min(CHUNK, cycles - start), k, f, cap)
        sig.append(s)
        xinc.append(x)
        if fs is not None:
            fsum.append(fs)
    return np.concatenate(sig), np.concatenate(xinc), (np.concatenate(fsum) if fsum else None)


@dataclass(frozen=True, eq=False)
class VelocityEstimate:
    v: np.ndarray
    se: np.ndarray
    mean_cycle_time: float
    mean_cycle_disp: np.ndarray
    cycles: int

    def to_dict(self) -> dict:
        return {
            "value": self.v.tolist(),
            "se": self.se.tolist(),
            "mean_cycle_time": self.mean_cycle_time,
            "mean_cycle_disp": self.mean_cycle_disp.tolist(),
            "replicas": self.cycles,
        }


def estimate_velocity(model: ModelSpec, cycles: int, seed: int, cap: int = DEFAULT_CAP) -> VelocityEstimate:
    """``v = E X_{sigma_1} / E sigma_1`` over ``cycles`` independent first cycles.

    The SE is the delta-method SE of a ratio of means.
    """
    require_walkable(model, nonnestling=True)
    if cycles < 2:
        raise EstimatorError("need at least two cycles")
    total = _sum_groups(cycle_sums(model, cycles, seed, cap))
    s, sx, sxx, sxs, sss = total
    d = len(sx)
    v = [Fraction(c, s) for c in sx]
    # the residuals X - v sigma sum to zero exactly, so their sample variance is Q / (N - 1)
    q = [sxx[j][j] - 2 * v[j] * sxs[j] + v[j] * v[j] * sss for j in range(d)]
    mean_t = s / cycles
    se = np.array([math.sqrt(float(q[j]) / (cycles - 1) / cycles) / mean_t for j in range(d)])
    return VelocityEstimate(np.array([float(c) for c in v]), se, mean_t, np.array(sx, dtype=float) / cycles, cycles)


def _int_sums(sig: np.ndarray, xinc: np.ndarray) -> tuple:
    d = xinc.shape[1]
    s = int(sig.sum())
    sx = [int(c) for c in xinc.sum(axis=0)]
    sxx = [[int(xinc[:, a] @ xinc[:, b]) for b in range(d)] for a in range(d)]
    sxs = [int(c) for c in sig @ xinc]
    sss = int(sig @ sig)
    return s, sx, sxx, sxs, sss


def _add_sums(a: tuple, b: tuple) -> tuple:
    d = len(a[1])
    return (
        a[0] + b[0],
        [a[1][i] + b[1][i] for i in range(d)],
        [[a[2][i][j] + b[2][i][j] for j in range(d)] for i in range(d)],
        [a[3][i] + b[3][i] for i in range(d)],
        a[4] + b[4],
    )


def _diffusion_num(sums: tuple) -> list[list[int]]:
    # D = Num / S^3 with v = S_X / S
    s, sx, sxx, sxs, sss = sums
    d = len(sx)
    return [
        [s * s * sxx[a][b] - s * sx[a] * sxs[b] - s * sxs[a] * sx[b] + sx[a] * sx[b] * sss for b in range(d)]
        for a in range(d)
    ]


def _diffusion_exact(sums: tuple) -> list[list[Fraction]]:
    s3 = sums[0] ** 3
    return [[Fraction(x, s3) for x in row] for row in _diffusion_num(sums)]


@dataclass(frozen=True, eq=False)
class DiffusionEstimate:
    """Plug-in diffusion matrix with batch-means SE.

    The moment sums are kept as exact integers so quadratic forms along
    integer directions are exact rationals.
    """

    matrix: np.ndarray
    se: np.ndarray
    v: np.ndarray
    cycles: int
    total: tuple
    group_sums: list

    def quadratic_form(self, xi: Sequence[int]) -> tuple[float, float]:
        """``xi^t D xi / |xi|^2`` for an integer direction, with its batch-means SE."""
        xi = [int(c) for c in xi]
        nrm = sum(c * c for c in xi)

        def q(sums):
            num = _diffusion_num(sums)
            val = sum(xi[a] * num[a][b] * xi[b] for a in range(len(xi)) for b in range(len(xi)))
            return Fraction(val, sums[0] ** 3 * nrm)

        groups = np.array([float(q(g)) for g in self.group_sums])
        return float(q(self.total)), float(groups.std(ddof=1) / math.sqrt(groups.size))

    def to_dict(self) -> dict:
        return {"value": self.matrix.tolist(), "se": self.se.tolist(), "v": self.v.tolist(), "replicas": self.cycles}


def cycle_sums(model: ModelSpec, cycles: int, seed: int, cap: int = DEFAULT_CAP) -> list[tuple]:
    """Exact integer moment sums of first cycles, one tuple per batch-means group.

    Replicas are streamed in chunks, so memory does not grow with ``cycles``.
    """
    groups = batch_groups(cycles)
    out = [None] * len(groups)
    g = 0
    for start in range(0, cycles, CHUNK):
        stop = min(start + CHUNK, cycles)
        sig, xinc, _ = run_cycles(model, seed, start, stop - start, cap=cap)
        pos = start
        while pos < stop:
            end = min(stop, groups[g].stop)
            part = _int_sums(sig[pos - start:end - start], xinc[pos - start:end - start])
            out[g] = part if out[g] is None else _add_sums(out[g], part)
            pos = end
            if end == groups[g].stop:
                g += 1
    return out


def _sum_groups(groups: list[tuple]) -> tuple:
    total = groups[0]
    for g in groups[1:]:
        total = _add_sums(total, g)
    return total


def estimate_diffusion(model: ModelSpec, cycles: int, seed: int, cap: int = DEFAULT_CAP) -> DiffusionEstimate:
    """``E[(X_s - v s)(X_s - v s)^t] / E s`` over first cycles ``s = sigma_1``."""
    require_walkable(model, nonnestling=True)
    if cycles < 2:
        raise EstimatorError("need at least two cycles")
    groups = cycle_sums(model, cycles, seed, cap)
    total = _sum_groups(groups)
    exact = _diffusion_exact(total)
    matrix = np.array([[float(x) for x in row] for row in exact])
    per_group = np.array([[[float(x) for x in row] for row in _diffusion_exact(g)] for g in groups])
    se = per_group.std(axis=0, ddof=1) / math.sqrt(len(groups))
    v = np.array([Fraction(c, total[0]) for c in total[1]], dtype=float)
    return DiffusionEstimate(matrix, se, v, cycles, total, groups)


def estimate_equilibrium(
    model: ModelSpec, f: SiteFunctional | str, k: int, cycles: int, seed: int, cap: int = DEFAULT_CAP
) -> EstimateWithError:
    """Cycle average of ``f`` over ``[sigma_k, sigma_{k+1})`` divided by the mean cycle length."""
    require_walkable(model, nonnestling=True)
    if isinstance(f, str):
        f = functional(f, model)
    if k < f.k:
        raise EstimatorError(f"functional {f.name!r} looks {f.k} levels back; k={k} is too small")
    if cycles < 2:
        raise EstimatorError("need at least two cycles")
    sig, _, fsum = _collect(model, cycles, seed, k, f, cap)
    val, se = ratio_se(fsum, sig)
    if f.dim == 1:
        val, se = float(val[0]), float(se[0])
    return EstimateWithError(val, se, cycles, {"functional": f.name, "k": k})


def sigma_tail(model: ModelSpec, reps: int, seed: int, n_max: int = 30, cap: int = DEFAULT_CAP) -> ScanResult:
    """Empirical ``P(sigma_1 > n)`` for ``n = 1..n_max`` and its fitted log-linear slope.

    ``fitted_exponent`` is the slope of ``log P(sigma_1 > n)`` in ``n``; the
    geometric rate is its exponential.  A tail that is already zero at
    ``n = 1`` is flagged ``"degenerate"`` and reported with slope ``-inf``.
    """
    require_walkable(model, nonnestling=True)
    sig, _, _ = _collect(model, reps, seed, cap=cap)
    ns = np.arange(1, n_max + 1)
    tail = (sig[None, :] > ns[:, None]).mean(axis=1)
    se = np.sqrt(tail * (1 - tail) / reps)
    points = [(int(n), float(p), float(s)) for n, p, s in zip(ns, tail, se)]
    pos = [(n, p, s) for n, p, s in points if p > 0 and s > 0]
    if tail[0] == 0:
        return ScanResult(points, -math.inf, 0.0, reps, "degenerate", {"rate": 0.0, "max_sigma": int(sig.max())})
    if len(pos) < 3:
        return ScanResult(points, None, None, reps, "insufficient", {"max_sigma": int(sig.max())})
    x = np.array([p[0] for p in pos], dtype=float)
    y = np.log([p[1] for p in pos])
    w = np.array([(p[1] / p[2]) ** 2 for p in pos])
    slope, slope_se, _ = weighted_line(x, y, w)
    return ScanResult(points, slope, slope_se, reps, None, {"rate": math.exp(slope), "max_sigma": int(sig.max())})


def cycle_level_distribution(model: ModelSpec, cycles: int, seed: int) -> dict[int, float]:
    """Empirical law of the level gained over one regeneration cycle."""
    _, xinc, _ = _collect(model, cycles, seed)
    levels = xinc @ np.asarray(model.u_hat, dtype=np.int64)
    vals, counts = np.unique(levels, return_counts=True)
    return {int(v): float(c) / cycles for v, c in zip(vals, counts)}


def lln_velocity(model: ModelSpec, n: int, walks: int, seed: int) -> EstimateWithError:
    """``X_n / n`` averaged over independent walks, each in its own environment."""
    require_walkable(model)
    idx = np.arange(walks, dtype=np.int64)
    env = EnvironmentBatch(model, rng.replica_seeds(seed, rng.TAG_ENV, idx))
    batch = WalkBatch(env, np.zeros(model.dimension, dtype=np.int64), rng.replica_seeds(seed, rng.TAG_WALK, idx))
    for _ in range(n):
        batch.step()
    m, se = mean_se(batch.pos / n)
    return EstimateWithError(m, se, walks, {"n": n})


__all__ = [
    "SiteFunctional",
    "functional",
    "run_cycles",
    "VelocityEstimate",
    "estimate_velocity",
    "DiffusionEstimate",
    "estimate_diffusion",
    "cycle_sums",
    "estimate_equilibrium",
    "sigma_tail",
    "cycle_level_distribution",
    "lln_velocity",
    "_jsonable",
]
