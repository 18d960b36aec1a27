"""YAML configuration documents for the command line front end.

A run document looks like::

    schema: 1
    space: {kind: sphere, dim: 2, kappa: 1.0}
    region: {center: [1, 0, 0], radius: 0.5}
    functionals:
      - {kind: squared_distance, anchor: [0.98, 0.2, 0]}
    flow: cyclic_ppa          # ppa | cyclic_ppa | stochastic_ppa | inductive_mean | jensen
    schedule: {kind: harmonic, c: 0.1}
    x0: [1, 0, 0]
    max_k: 1000
    seed: 0

See README.md for every key.
"""

from __future__ import annotations

from pathlib import Path

import yaml

from .errors import InvalidArgument
from .functionals import FunctionalSpec
from .schedules import StepSchedule
from .spaces import GeodesicBall, Point, SpaceDescriptor

SCHEMA_VERSION = 1
FLOWS = ("ppa", "cyclic_ppa", "stochastic_ppa", "inductive_mean", "jensen")


class ConfigError(InvalidArgument):
    pass


def load(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from e
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"config is not valid YAML: {e}") from e
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    version = doc.get("schema", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema version {version!r}")
    return doc


def need(doc: dict, key: str):
    if key not in doc:
        raise ConfigError(f"config is missing {key!r}")
    return doc[key]


def space_of(doc: dict) -> SpaceDescriptor:
    return SpaceDescriptor.from_dict(need(doc, "space"))


def region_of(doc: dict, space: SpaceDescriptor | None = None) -> GeodesicBall:
    space = space or space_of(doc)
    reg = need(doc, "region")
    center = reg.get("center")
    c = space.base_point() if center is None else Point(space, center)
    return GeodesicBall(c, float(need(reg, "radius")))


def functional_of(region: GeodesicBall, d: dict) -> FunctionalSpec:
    return FunctionalSpec.from_dict(region, d)


def functionals_of(doc: dict, region: GeodesicBall) -> list:
    fs = need(doc, "functionals")
    if not isinstance(fs, list) or not fs:
        raise ConfigError("'functionals' must be a nonempty list")
    return [functional_of(region, d) for d in fs]


def schedule_of(doc: dict) -> StepSchedule:
    return StepSchedule.from_dict(need(doc, "schedule"))


def point_of(space: SpaceDescriptor, coords, default: Point | None = None) -> Point:
    if coords is None:
        if default is None:
            raise ConfigError("missing point coordinates")
        return default
    return Point(space, coords)
