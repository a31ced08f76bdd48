"""Named reference models."""

from __future__ import annotations

from .env import ModelSpec, StepLaw
from .errors import ConfigError


def desk() -> ModelSpec:
    """Two-component elliptic model in d=2 with u=(1,0); every step gains a level."""
    a = StepLaw.from_pairs([((1, 0), 0.5), ((1, 1), 0.5)])
    b = StepLaw.from_pairs([((1, 0), 0.25), ((1, 1), 0.25), ((1, -1), 0.25), ((2, 0), 0.25)])
    return ModelSpec(2, (1, 0), ((0.5, a), (0.5, b)))


def lazy_desk() -> ModelSpec:
    """Variant of :func:`desk` whose walks may stay on a level, so sigma_1 is nontrivial."""
    a = StepLaw.from_pairs([((1, 0), 0.5), ((0, 1), 0.5)])
    b = StepLaw.from_pairs([((1, 0), 0.25), ((1, 1), 0.25), ((0, -1), 0.25), ((2, 0), 0.25)])
    return ModelSpec(2, (1, 0), ((0.5, a), (0.5, b)))


def two_jump() -> ModelSpec:
    """Homogeneous 1/2-1/2 on a=(1,0), b=(0,1) with u=(1,1)."""
    return ModelSpec.homogeneous(StepLaw.from_pairs([((1, 0), 0.5), ((0, 1), 0.5)]), (1, 1))


def two_jump_diagonal() -> ModelSpec:
    """Homogeneous 1/2-1/2 on a=(1,1), b=(1,-1) with u=(1,0)."""
    return ModelSpec.homogeneous(StepLaw.from_pairs([((1, 1), 0.5), ((1, -1), 0.5)]), (1, 0))


def point_mass() -> ModelSpec:
    """Deterministic walk along (1,0)."""
    return ModelSpec.homogeneous(StepLaw.point_mass((1, 0)), (1, 0))


def geometric() -> ModelSpec:
    """Homogeneous 1/2 on (0,1), 1/2 on (1,1) with u=(1,0): sigma_1 is geometric(1/2)."""
    return ModelSpec.homogeneous(StepLaw.from_pairs([((0, 1), 0.5), ((1, 1), 0.5)]), (1, 0))


PRESETS = {
    "desk": desk,
    "lazy-desk": lazy_desk,
    "two-jump": two_jump,
    "two-jump-diagonal": two_jump_diagonal,
    "point-mass": point_mass,
    "geometric": geometric,
}


def preset(name: str) -> ModelSpec:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown model preset {name!r}; known: {', '.join(sorted(PRESETS))}") from None
