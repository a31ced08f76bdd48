"""Experiment implementations behind the CLI.

Each experiment maps ``(model, params, seed)`` to an :class:`Outcome`: a
JSON-ready result dict, optional CSV tables and warnings.  Sub-streams of the
experiment seed are named with :func:`rwre.rng.derive_seed`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .. import direction
from ..env import ModelSpec, validate_model
from ..errors import ConfigError
from ..estimators import clt, cycles, perturbation, renewal, scaling, zchain
from ..estimators.stats import CHUNK, _jsonable, mean_se
from ..rng import derive_seed


@dataclass
class Outcome:
    result: dict
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    warnings: list = field(default_factory=list)


def _need(params: dict, key: str):
    if key not in params:
        raise ConfigError(f"missing parameter {key!r}")
    return params[key]


def _scan_table(scan) -> tuple:
    return (["n", "value", "se"], scan.rows())


def _headline(label: str, value, se=None) -> dict:
    return {"label": label, "value": _jsonable(value), "se": _jsonable(se)}


def _combined_z(a, sa, b, sb) -> float:
    a, sa, b, sb = (np.atleast_1d(np.asarray(x, dtype=float)) for x in (a, sa, b, sb))
    s = np.sqrt(sa**2 + sb**2)
    diff = np.abs(a - b)
    z = np.where(s > 0, diff / np.where(s > 0, s, 1), np.where(diff == 0, 0.0, np.inf))
    return float(z.max())


def run_validate(model: ModelSpec, params: dict, seed: int) -> Outcome:
    rep = validate_model(model)
    warn = [] if rep.status == "ok" else [f"model status: {rep.status}"]
    return Outcome({"report": rep.to_dict(), "status": rep.status, "headline": _headline("status", rep.status)},
                   warnings=warn)


def run_velocity(model: ModelSpec, params: dict, seed: int) -> Outcome:
    est = cycles.estimate_velocity(model, int(params.get("cycles", 10**6)), derive_seed(seed, "cycles"))
    res = est.to_dict()
    res["headline"] = _headline("v", est.v, est.se)
    if "lln_n" in params:
        lln = cycles.lln_velocity(model, int(params["lln_n"]), int(params.get("lln_walks", 100)),
                                  derive_seed(seed, "lln"))
        res["lln"] = lln.to_dict()
        res["lln_max_z"] = _combined_z(est.v, est.se, lln.value, lln.std_error)
    return Outcome(res)


def run_diffusion(model: ModelSpec, params: dict, seed: int) -> Outcome:
    est = cycles.estimate_diffusion(model, int(params.get("cycles", 10**6)), derive_seed(seed, "cycles"))
    res = est.to_dict()
    res["headline"] = _headline("D", est.matrix, est.se)
    if "xi" in params:
        q, qse = est.quadratic_form(params["xi"])
        res["quadratic_form"] = {"xi": list(params["xi"]), "value": q, "se": qse}
    d = model.dimension
    rows = [(i, j, float(est.matrix[i, j]), float(est.se[i, j])) for i in range(d) for j in range(d)]
    return Outcome(res, {"matrix": (["i", "j", "value", "se"], rows)})


def run_equilibrium(model: ModelSpec, params: dict, seed: int) -> Outcome:
    n = int(params.get("cycles", 10**6))
    est = cycles.estimate_equilibrium(model, params.get("functional", "drift"), int(params.get("k", 0)), n,
                                      derive_seed(seed, "equilibrium"))
    res = est.to_dict()
    res["headline"] = _headline(f"E_inf[{est.extra['functional']}]", est.value, est.std_error)
    if params.get("compare_velocity"):
        vel = cycles.estimate_velocity(model, int(params.get("velocity_cycles", n)), derive_seed(seed, "velocity"))
        res["velocity"] = vel.to_dict()
        res["velocity_max_z"] = _combined_z(est.value, est.std_error, vel.v, vel.se)
    return Outcome(res)


def run_variance_scan(model: ModelSpec, params: dict, seed: int) -> Outcome:
    ns = [int(n) for n in _need(params, "n_list")]
    envs = int(params.get("env_count", 200))
    means = scaling.quenched_mean_table(model, ns, envs, seed)
    dev = ((means - means.mean(axis=0)) ** 2).sum(axis=2)
    val, se = mean_se(dev)
    scan = scaling.scan_from_points([(n, float(v), float(s)) for n, v, s in zip(ns, val, se)], envs)
    res = scan.to_dict()
    res["headline"] = _headline("exponent", scan.fitted_exponent, scan.exponent_se)
    rows = [(e, n, *(float(c) for c in means[e, k])) for e in range(envs) for k, n in enumerate(ns)]
    header = ["env", "n"] + [f"mean_{i}" for i in range(model.dimension)]
    return Outcome(res, {"scan": _scan_table(scan), "quenched_means": (header, rows)})


def run_intersection_scan(model: ModelSpec, params: dict, seed: int) -> Outcome:
    scan = scaling.intersection_scan(model, _need(params, "n_list"), int(params.get("pair_count", 2000)), seed,
                                     params.get("start_b"))
    res = scan.to_dict()
    res["headline"] = _headline("exponent", scan.fitted_exponent, scan.exponent_se)
    warn = ["inelliptic model: negative control"] if scan.extra.get("control") else []
    return Outcome(res, {"scan": _scan_table(scan)}, warn)


def _zero_level_points(model: ModelSpec, radius: int) -> list[tuple]:
    d = model.dimension
    pts = [z for z in itertools.product(range(-radius, radius + 1), repeat=d) if model.level(z) == 0]
    return sorted(pts, key=lambda z: (max(abs(c) for c in z), z))


def run_h_profile(model: ModelSpec, params: dict, seed: int) -> Outcome:
    radius = int(params.get("radius", 8))
    reps = int(params.get("reps", 10**4))
    rows, by_r = [], {}
    for z in _zero_level_points(model, radius):
        est = scaling.estimate_h(model, z, reps, derive_seed(seed, "h", *z))
        r = max(abs(c) for c in z)
        rows.append((*z, est.value, est.std_error))
        by_r[r] = by_r.get(r, 0.0) + est.value
    cum, acc = [], 0.0
    for r in sorted(by_r):
        acc += by_r[r]
        cum.append({"radius": r, "partial_sum": acc, "shell": by_r[r]})
    header = [f"z_{i}" for i in range(model.dimension)] + ["h", "se"]
    res = {
        "partial_sums": cum,
        "last_shell_fraction": cum[-1]["shell"] / cum[-1]["partial_sum"] if cum[-1]["partial_sum"] > 0 else 0.0,
        "replicas": reps,
    }
    res["headline"] = _headline("sum h", acc)
    return Outcome(res, {"h": (header, rows)})


def run_q_kernel(model: ModelSpec, params: dict, seed: int) -> Outcome:
    states = [tuple(s) for s in _need(params, "states")]
    reps = int(params.get("reps", 10**5))
    recs = [zchain.estimate_q(model, x, reps, derive_seed(seed, "state", i)) for i, x in enumerate(states)]
    zs, moments, upper = [], [], []
    for r in recs:
        zs.append(_combined_z(r.mean_increment, r.mean_increment_se, 0.0, 0.0))
        moments.append(r.p_hat_moment)
        upper.append(r.holding_prob + 3 * r.holding_prob_se)
    res = {
        "states": [r.to_dict() for r in recs],
        "max_abs_z": max(zs),
        "moment_ratio": max(moments) / min(moments) if min(moments) > 0 else math.inf,
        "max_holding_upper": max(upper),
        "eps_hat": 1.0 - max(upper),
        "replicas": reps,
    }
    res["headline"] = _headline("eps_hat", res["eps_hat"])
    rows = [(*r.state_x, *r.mean_increment.tolist(), r.p_hat_moment, r.holding_prob) for r in recs]
    d = model.dimension
    header = [f"x_{i}" for i in range(d)] + [f"mean_inc_{i}" for i in range(d)] + ["p_hat_moment", "holding_prob"]
    return Outcome(res, {"states": (header, rows)})


def run_green(model: ModelSpec, params: dict, seed: int) -> Outcome:
    d = model.dimension
    x = tuple(params.get("x", (0,) * d))
    y = tuple(params.get("y", (0,) * d))
    ns = [int(n) for n in _need(params, "n_list")]
    chains = int(params.get("chains", 10**4))
    scan = zchain.green_function(model, x, y, ns, chains, derive_seed(seed, "main"))
    res = scan.to_dict()
    res["headline"] = _headline("exponent", scan.fitted_exponent, scan.exponent_se)
    tables = {"scan": _scan_table(scan)}
    spots = params.get("spot_x", [])
    if spots:
        if x == y:
            ref_v, ref_se = scan.points[-1][1], scan.points[-1][2]
        else:
            ref = zchain.green_function(model, y, y, [ns[-1]], chains, derive_seed(seed, "diagonal"))
            ref_v, ref_se = ref.points[-1][1], ref.points[-1][2]
        out, ok = [], True
        for i, xs in enumerate(spots):
            g = zchain.green_function(model, tuple(xs), y, [ns[-1]], chains, derive_seed(seed, "spot", i))
            v, s = g.points[-1][1], g.points[-1][2]
            bound = ref_v + 4 * math.hypot(s, ref_se)
            ok &= v <= bound
            out.append({"x": list(xs), "n": ns[-1], "value": v, "se": s, "bound": bound})
        res["spot_checks"] = out
        res["diagonal"] = {"value": ref_v, "se": ref_se}
        res["spot_ok"] = bool(ok)
    return Outcome(res, tables)


def _step_dist(model: ModelSpec | None, spec, seed: int) -> dict:
    if isinstance(spec, dict) and "from_model" in spec:
        if model is None:
            raise ConfigError("step_dist.from_model needs a model")
        return cycles.cycle_level_distribution(model, int(spec["from_model"]), derive_seed(seed, "levels"))
    if isinstance(spec, dict):
        return {int(k): float(v) for k, v in spec.items()}
    raise ConfigError("step_dist must be a mapping or {'from_model': cycles}")


def run_renewal(model: ModelSpec | None, params: dict, seed: int) -> Outcome:
    dist = _step_dist(model, _need(params, "step_dist"), seed)
    grid = [int(g) for g in params.get("grid", [0, 5, 10])]
    r_list = [float(r) for r in params.get("r_list", [1])]
    reps = int(params.get("reps", 10**5))
    rows, identity_ok = [], True
    norm = {r: [] for r in r_list}
    for i in grid:
        for j in grid:
            ls = np.concatenate([
                renewal.sample_common_level(dist, i, j, s, min(CHUNK, reps - s), derive_seed(seed, i, j))
                for s in range(0, reps, CHUNK)
            ]).astype(float)
            if i == j and i > 0:
                identity_ok &= bool(np.all(ls == i))
            for r in r_list:
                m, se = mean_se(ls**r)
                nv = float(m) / (1 + i**r + j**r)
                norm[r].append(nv)
                rows.append((i, j, r, float(m), float(se), nv))
    ratios = {str(_jsonable(r)): max(v) / min(v) for r, v in norm.items()}
    res = {
        "step_dist": {str(k): v for k, v in sorted(dist.items())},
        "ratios": ratios,
        "max_ratio": max(ratios.values()),
        "identity_ok": identity_ok,
        "replicas": reps,
    }
    res["headline"] = _headline("max ratio", res["max_ratio"])
    return Outcome(res, {"moments": (["i", "j", "r", "moment", "se", "normalized"], rows)})


def run_clt(model: ModelSpec, params: dict, seed: int) -> Outcome:
    env_seeds = params.get("env_seeds", 5)
    if isinstance(env_seeds, int):
        env_seeds = [derive_seed(seed, "env", e) for e in range(env_seeds)]
    n = int(params.get("n", 10**4))
    walks = int(params.get("walks", 10**4))
    checkpoints = [int(c) for c in params.get("checkpoints", [n])]
    ref = cycles.estimate_diffusion(model, int(params.get("reference_cycles", 10**7)), derive_seed(seed, "reference"))
    reports = [
        clt.clt_test(model, int(es), n, walks, derive_seed(seed, "walks", k), ref.v, ref.matrix, checkpoints)
        for k, es in enumerate(env_seeds)
    ]
    first, last = checkpoints[0], checkpoints[-1]
    mean_gaps = {c: float(np.mean([r.centering_gaps[c] for r in reports])) for c in checkpoints}
    env_decreasing = sum(r.centering_gaps[last] < r.centering_gaps[first] for r in reports)
    res = {
        "reference": {"v": ref.v.tolist(), "D": ref.matrix.tolist(), "cycles": ref.cycles},
        "environments": [r.to_dict() for r in reports],
        "max_frobenius_rel": max(r.frobenius_rel for r in reports),
        "max_ks": max(max(r.ks) for r in reports),
        "mean_centering_gaps": {str(c): g for c, g in mean_gaps.items()},
        "gaps_decreasing": mean_gaps[last] < mean_gaps[first],
        "envs_gap_decreasing": int(env_decreasing),
        "replicas": walks,
    }
    res["headline"] = _headline("max Frobenius rel", res["max_frobenius_rel"])
    rows = [(int(r.env_seed), c, g) for r in reports for c, g in sorted(r.centering_gaps.items())]
    return Outcome(res, {"centering_gaps": (["env_seed", "n", "gap"], rows)})


def _grid_points(spec) -> list[tuple]:
    if isinstance(spec, dict):
        return [(int(x), int(y)) for x in spec["xs"] for y in spec["ys"]]
    return [tuple(int(c) for c in z) for z in spec]


def run_perturbation(model: ModelSpec, params: dict, seed: int) -> Outcome:
    n = int(params.get("n", 20))
    pts = _grid_points(_need(params, "grid")) + [tuple(z) for z in params.get("controls", [])]
    env_reps = int(params.get("env_reps", 2))
    resample_reps = int(params.get("resample_reps", 200))
    rows = []
    for z in pts:
        left, right = perturbation.perturbation_influence(model, z, n, env_reps, resample_reps,
                                                          derive_seed(seed, "z", *z))
        for e in range(env_reps):
            rows.append((*z, e, float(left.value[e]), float(left.std_error[e]), float(right.value[e])))
    ratios = [l / r for *_, l, _, r in rows if r > 0]
    c_hat = max(ratios) if ratios else 0.0
    zero_ok = all(l == 0 for *_, l, _, r in rows if r == 0)
    bound_ok = all(l <= c_hat * r * (1 + 1e-12) for *_, l, _, r in rows)
    res = {
        "C_hat": c_hat,
        "zero_implication_ok": zero_ok,
        "bound_ok": bound_ok,
        "reachable": sum(1 for *_, r in rows if r > 0),
        "unreachable": sum(1 for *_, r in rows if r == 0),
        "replicas": resample_reps,
    }
    res["headline"] = _headline("C_hat", c_hat)
    d = model.dimension
    header = [f"z_{i}" for i in range(d)] + ["env", "left", "left_se", "right"]
    return Outcome(res, {"influence": (header, rows)})


def run_sigma_tail(model: ModelSpec, params: dict, seed: int) -> Outcome:
    scan = cycles.sigma_tail(model, int(params.get("reps", 10**6)), seed, int(params.get("n_max", 30)))
    res = scan.to_dict()
    res["headline"] = _headline("log-slope", scan.fitted_exponent, scan.exponent_se)
    warn = ["sigma_1 tail vanishes: every step gains a level"] if scan.flag == "degenerate" else []
    return Outcome(res, {"tail": _scan_table(scan)}, warn)


def run_rationalize(model: ModelSpec | None, params: dict, seed: int) -> Outcome:
    if "A" in params:
        out = direction.direction_from_json(params)
        res = out.to_dict()
        res["headline"] = _headline("u_hat", list(out.u_hat))
        return Outcome(res)
    gen = np.random.default_rng(seed)
    n_inst = int(params.get("random_instances", 1000))
    fails, max_res = 0, 0
    for _ in range(n_inst):
        A, v = direction.random_instance(gen, int(params.get("d_max", 5)), int(params.get("size_max", 20)))
        out = direction.rationalize_direction(A, v)
        max_res = max(max_res, out.resolution)
        fails += not direction.certificate_holds(A, v, out.u_hat)
    n_f = int(params.get("f_identity_cases", 10**4))
    f_fails = 0
    for _ in range(n_f):
        d = int(gen.integers(2, 6))
        rows = [[Fraction(int(gen.integers(-9, 10)), int(gen.integers(1, 9))) for _ in range(d)] for _ in range(d)]
        z = direction.vector_product(*rows[:-1])
        f_fails += direction.det(rows) != direction.dot(rows[-1], z)
        f_fails += any(direction.dot(h, z) != 0 for h in rows[:-1])
    res = {"instances": n_inst, "failures": fails, "max_resolution": max_res,
           "f_identity_cases": n_f, "f_identity_failures": f_fails}
    res["headline"] = _headline("failures", fails + f_fails)
    return Outcome(res)


# experiments that do not need a model
MODEL_OPTIONAL = {"renewal", "rationalize"}

REGISTRY: dict[str, Callable[..., Outcome]] = {
    "validate": run_validate,
    "velocity": run_velocity,
    "diffusion": run_diffusion,
    "equilibrium": run_equilibrium,
    "variance-scan": run_variance_scan,
    "intersection-scan": run_intersection_scan,
    "h-profile": run_h_profile,
    "q-kernel": run_q_kernel,
    "green": run_green,
    "renewal": run_renewal,
    "clt": run_clt,
    "perturbation": run_perturbation,
    "sigma-tail": run_sigma_tail,
    "rationalize": run_rationalize,
}
