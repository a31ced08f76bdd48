import math

import numpy as np
import pytest

from rwre import models, rng
from rwre.env import Environment, EnvironmentBatch
from rwre.errors import SimulationCapError
from rwre.walker import (
    Trajectory,
    coupled_pair,
    first_common_level_batch,
    intersections,
    level_chain,
    regenerations,
    simulate,
    simulate_many,
    simulate_pair,
)

from .conftest import homogeneous


def test_point_mass_path():
    env = Environment(models.point_mass(), 0)
    tr = simulate(env, (0, 0), 5, 1)
    assert tr.points() == [(k, 0) for k in range(6)]


@pytest.mark.parametrize("seed", range(5))
def test_levels_nondecreasing_and_steps_in_support(seed):
    m = models.desk()
    env = Environment(m, seed)
    tr = simulate(env, (0, 0), 200, seed + 100)
    lev = tr.levels(m.u_hat)
    assert np.all(np.diff(lev) >= 0)
    for x, y in zip(tr.points(), tr.points()[1:]):
        step = tuple(b - a for a, b in zip(x, y))
        assert step in env.site_law(x).steps


def test_two_step_binomial_oracle():
    env = Environment(models.two_jump(), 0)
    n = 10**5
    pos = simulate_many(env, (0, 0), 2, rng.replica_seeds(11, rng.TAG_WALK, np.arange(n)))
    p = np.mean(np.all(pos[:, 2] == (2, 0), axis=1))
    assert abs(p - 0.25) <= 3 * math.sqrt(0.25 * 0.75 / n)


def test_batch_walks_equal_scalar_walks():
    m = models.desk()
    env = Environment(m, 77)
    seeds = rng.replica_seeds(5, rng.TAG_WALK, np.arange(20))
    pos = simulate_many(env, (0, 0), 50, seeds)
    for i, s in enumerate(seeds):
        assert np.array_equal(pos[i], simulate(env, (0, 0), 50, int(s)).positions)


def test_regenerations_unit_level_steps():
    env = Environment(models.desk(), 4)
    recs = regenerations(env, (0, 0), 50, 9)
    assert all(r.sigma_increment == 1 for r in recs)
    assert all(r.x_increment[0] >= 1 for r in recs)


def test_regenerations_point_mass():
    env = Environment(models.point_mass(), 0)
    recs = regenerations(env, (0, 0), 10, 0)
    assert [(r.sigma_increment, r.x_increment) for r in recs] == [(1, (1, 0))] * 10


def test_regenerations_geometric_oracle():
    env = Environment(models.geometric(), 0)
    recs = regenerations(env, (0, 0), 10**5, 3)
    s = np.array([r.sigma_increment for r in recs], dtype=float)
    # geometric(1/2) on {1, 2, ...}: mean 2, variance 2
    assert abs(s.mean() - 2) <= 3 * math.sqrt(2 / s.size)


def test_regenerations_cap():
    stay = homogeneous([((0, 1), 0.999999), ((1, 0), 0.000001)], (1, 0))
    with pytest.raises(SimulationCapError):
        regenerations(Environment(stay, 0), (0, 0), 1, 0, cap=100)


def test_pair_point_mass_translates():
    env = Environment(models.point_mass(), 0)
    a, b = simulate_pair(env, (0, 0), (0, 3), 10, 1, 2)
    assert np.array_equal(b.positions - a.positions, np.tile([0, 3], (11, 1)))


def test_pair_same_seed_same_path():
    env = Environment(models.desk(), 8)
    a, b = simulate_pair(env, (0, 0), (0, 0), 100, 42, 42)
    assert np.array_equal(a.positions, b.positions)


def test_pair_agree_until_step_draws_differ():
    m = models.desk()
    env = Environment(m, 12)
    n = 60
    a, b = simulate_pair(env, (0, 0), (0, 0), n, 1, 2)
    tables = m.tables
    # replay: the paths agree up to the first step whose selected step differs
    for t in range(n):
        x = a.points()[t]
        k = env.component_at(x)
        cum = np.asarray(tables.cum_lists[k])
        sa = np.searchsorted(cum, rng.uniform_scalar(1, rng.TAG_STEP, t), side="right")
        sb = np.searchsorted(cum, rng.uniform_scalar(2, rng.TAG_STEP, t), side="right")
        if sa != sb:
            assert a.points()[: t + 1] == b.points()[: t + 1]
            assert a.points()[t + 1] != b.points()[t + 1]
            break
    else:
        assert np.array_equal(a.positions, b.positions)


def _traj(points):
    return Trajectory(points[0], np.asarray(points, dtype=np.int64), 0)


def test_intersections_by_hand():
    a = _traj([(0, 0), (1, 0), (1, 1)])
    b = _traj([(0, 0), (0, 1), (1, 1)])
    assert intersections(a, b) == 2
    assert intersections(a, a) == 3
    assert intersections(a, _traj([(5, 5), (6, 5), (7, 5)])) == 0


def test_level_chain_point_mass():
    env = Environment(models.point_mass(), 0)
    recs = level_chain(env, (0, 0), (0, 0), 5, (1, 2))
    assert [r.common_level for r in recs] == [1, 2, 3, 4, 5]
    assert all(r.z_state == (0, 0) for r in recs)


def test_level_chain_unit_steps_every_level_common():
    env = Environment(models.two_jump_diagonal(), 3)
    recs = level_chain(env, (0, 0), (0, 4), 30, (5, 6))
    assert [r.common_level for r in recs] == list(range(1, 31))
    for r in recs:
        assert r.entry_a[0] == r.entry_b[0] == r.common_level
        assert r.z_state[0] == 0


def test_level_chain_invariants_desk():
    m = models.desk()
    env = Environment(m, 21)
    recs = level_chain(env, (0, 0), (0, 2), 40, (7, 8))
    levels = [r.common_level for r in recs]
    assert all(b > a for a, b in zip(levels, levels[1:]))
    for r in recs:
        assert m.level(r.entry_a) == m.level(r.entry_b) == r.common_level
        assert m.level(r.z_state) == 0


def test_first_common_level_oracle():
    # steps 1 or 2 along u: both first jumps equal 1 with probability 1/4
    m = homogeneous([((1, 0), 0.5), ((2, 0), 0.5)], (1, 0))
    n = 10**5
    idx = np.arange(n)
    env = EnvironmentBatch(m, rng.replica_seeds(1, rng.TAG_ENV, idx))
    zero = np.zeros((n, 2), dtype=np.int64)
    L, _, _ = first_common_level_batch(env, zero, zero, rng.replica_seeds(1, rng.TAG_WALK, idx, 0),
                                       rng.replica_seeds(1, rng.TAG_WALK, idx, 1))
    p = np.mean(L == 1)
    assert abs(p - 0.25) <= 3 * math.sqrt(0.25 * 0.75 / n)


def test_first_common_level_batch_matches_scalar_chain():
    m = models.desk()
    env = Environment(m, 31)
    starts_b = np.array([[0, 0], [0, 1], [0, -3], [0, 5]])
    zero = np.zeros_like(starts_b)
    sa = np.array([1, 2, 3, 4], dtype=np.uint64)
    sb = np.array([9, 8, 7, 6], dtype=np.uint64)
    L, ea, eb = first_common_level_batch(env, zero, starts_b, sa, sb)
    for i in range(4):
        rec = level_chain(env, (0, 0), tuple(starts_b[i]), 1, (int(sa[i]), int(sb[i])))[0]
        assert (L[i], tuple(ea[i]), tuple(eb[i])) == (rec.common_level, rec.entry_a, rec.entry_b)


def test_coupled_pair_unreachable_site():
    env = Environment(models.desk(), 3)
    res = coupled_pair(env, (2, 9), 5, (0, 0), 30, 1)
    assert res.tau is None
    assert np.array_equal(res.traj_a.positions, res.traj_b.positions)


def test_coupled_pair_point_mass():
    env = Environment(models.point_mass(), 0)
    res = coupled_pair(env, (4, 0), 5, (0, 0), 10, 1)
    assert res.tau == 4
    assert np.array_equal(res.traj_a.positions, res.traj_b.positions)


def test_coupled_pair_agrees_until_tau():
    env = Environment(models.desk(), 6)
    for s in range(200):
        res = coupled_pair(env, (3, 1), s, (0, 0), 15, s)
        stop = len(res.traj_a) if res.tau is None else res.tau + 1
        assert np.array_equal(res.traj_a.positions[:stop], res.traj_b.positions[:stop])


def test_coupled_pair_difference_dominated_by_hitting():
    env = Environment(models.desk(), 6)
    n, reps = 12, 10**4
    differ = hit = 0
    for s in range(reps):
        res = coupled_pair(env, (3, 1), s, (0, 0), n, s)
        differ += not np.array_equal(res.traj_a.positions, res.traj_b.positions)
        hit += res.tau is not None and res.tau < n
    assert 0 < differ <= hit


def test_trajectory_csv(tmp_path):
    env = Environment(models.desk(), 1)
    tr = simulate(env, (0, 0), 3, 1)
    p = tmp_path / "t.csv"
    tr.to_csv(p, (1, 0))
    lines = p.read_text().splitlines()
    assert lines[0] == "step_index,coord_0,coord_1,level"
    assert len(lines) == 5
