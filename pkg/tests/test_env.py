import json
import math

import numpy as np
import pytest

from rwre import models
from rwre.env import (
    Environment,
    EnvironmentBatch,
    ModelSpec,
    StepLaw,
    drift,
    require_walkable,
    site_law,
    validate_model,
)
from rwre.errors import ModelError

from .conftest import homogeneous


def test_steplaw_rejects_bad_probabilities():
    with pytest.raises(ModelError):
        StepLaw.from_pairs([((1, 0), 0.5), ((0, 1), 0.4)])
    with pytest.raises(ModelError):
        StepLaw.from_pairs([((1, 0), 1.5), ((0, 1), -0.5)])


def test_steplaw_rejects_repeated_steps():
    with pytest.raises(ModelError):
        StepLaw.from_pairs([((1, 0), 0.5), ((1, 0), 0.5)])


def test_model_rejects_bad_weights_and_zero_direction():
    law = StepLaw.point_mass((1, 0))
    with pytest.raises(ModelError):
        ModelSpec(2, (1, 0), ((0.7, law), (0.7, law)))
    with pytest.raises(ModelError):
        ModelSpec(2, (0, 0), ((1.0, law),))


def test_validate_point_mass_is_inelliptic():
    rep = validate_model(models.point_mass())
    assert rep.forbidden_direction_ok
    assert rep.nonnestling_delta == 1.0
    assert not rep.ellipticity_2_3_ok
    assert rep.status == "inelliptic"


def test_validate_two_jump_is_elliptic():
    rep = validate_model(models.two_jump())
    assert rep.forbidden_direction_ok
    assert rep.nonnestling_delta == 1.0
    assert rep.ellipticity_2_3_ok and rep.ellipticity_span_ok
    assert rep.status == "ok"


def test_validate_backward_step_breaks_forbidden_direction():
    m = homogeneous([((-1, 0), 0.25), ((1, 0), 0.75)], (1, 0))
    rep = validate_model(m)
    assert not rep.forbidden_direction_ok
    assert rep.status == "invalid"
    with pytest.raises(ModelError):
        require_walkable(m)


def test_validate_desk():
    rep = validate_model(models.desk())
    assert rep.status == "ok"
    assert rep.nonnestling_delta == 1.0
    assert rep.moment_bound_M == 2.0
    assert set(rep.support_J) == {(1, 0), (1, 1), (1, -1), (2, 0)}


def test_nonnestling_absent_when_some_component_has_no_drift():
    flat = StepLaw.from_pairs([((0, 1), 0.5), ((0, -1), 0.5)])
    fwd = StepLaw.point_mass((1, 0))
    rep = validate_model(ModelSpec(2, (1, 0), ((0.5, flat), (0.5, fwd))))
    assert rep.forbidden_direction_ok
    assert rep.nonnestling_delta is None


def test_zero_weight_component_is_ignored_in_support():
    back = StepLaw.point_mass((-1, 0))
    fwd = StepLaw.from_pairs([((1, 0), 0.5), ((1, 1), 0.5)])
    rep = validate_model(ModelSpec(2, (1, 0), ((0.0, back), (1.0, fwd))))
    assert rep.forbidden_direction_ok
    assert (-1, 0) not in rep.support_J


@pytest.mark.parametrize(
    "pairs, expected",
    [
        ([((1, 0), 1.0)], (1.0, 0.0)),
        ([((1, 0), 0.5), ((0, 1), 0.5)], (0.5, 0.5)),
        ([((1, 0), 0.25), ((2, 0), 0.25), ((0, 1), 0.25), ((1, 1), 0.25)], (1.0, 0.5)),
    ],
)
def test_drift(pairs, expected):
    assert np.allclose(drift(StepLaw.from_pairs(pairs)), expected, atol=1e-15)


def test_site_law_is_pure():
    env = Environment(models.desk(), 99)
    for x in [(0, 0), (3, -2), (10**6, 7)]:
        assert site_law(env, x) == site_law(env, x)
        assert Environment(models.desk(), 99).component_at(x) == env.component_at(x)


def test_single_component_site_law():
    m = models.two_jump()
    env = Environment(m, 5)
    for x in [(0, 0), (1, 2), (-4, 9)]:
        assert site_law(env, x) == m.components[0][1]


def test_component_frequencies_match_weights():
    env = Environment(models.desk(), 2024)
    n = 10**5
    coords = np.stack([np.arange(n), np.zeros(n, dtype=np.int64)], axis=1)
    freq = (env.components(coords) == 0).mean()
    se = math.sqrt(0.25 / n)
    assert abs(freq - 0.5) <= 3 * se


def test_batch_rows_match_scalar_environments():
    m = models.desk()
    seeds = [3, 17, 2**63 + 5]
    batch = EnvironmentBatch(m, seeds)
    coords = np.array([[0, 0], [4, -1], [7, 3]])
    rows = np.array([0, 1, 2])
    got = batch.components(coords, rows)
    assert got.tolist() == [Environment(m, s).component_at(tuple(c)) for s, c in zip(seeds, coords.tolist())]


def test_model_json_round_trip(tmp_path):
    m = models.desk()
    assert ModelSpec.from_json(m.to_json()) == m
    p = tmp_path / "m.json"
    m.dump(p)
    assert ModelSpec.load(p) == m
    doc = json.loads(p.read_text())
    doc["schema"] = "other/9"
    with pytest.raises(ModelError):
        ModelSpec.from_dict(doc)
