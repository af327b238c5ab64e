import json

import numpy as np
import pytest

from htype_harnack.config import (
    DEFAULTS,
    ConfigError,
    RunConfig,
    check_field_dimension,
    field_from_config,
    group_from_config,
    load_file,
    parse_override,
)
from htype_harnack.exceptions import DomainError, StructureError
from htype_harnack.group import heisenberg
from htype_harnack.operator import identity_field


def test_defaults_and_digest():
    a = RunConfig.build()
    b = RunConfig.build()
    assert a.tree == DEFAULTS
    assert a.digest() == b.digest() and len(a.digest()) == 16
    c = RunConfig.build(overrides=["seed=3"])
    assert c.seed == 3 and c.digest() != a.digest()
    assert a.group().name == "heisenberg:1"


def test_override_parsing():
    assert parse_override("a.b.c=1.5") == {"a": {"b": {"c": 1.5}}}
    assert parse_override("x=[1, 2]") == {"x": [1, 2]}
    assert parse_override("name=quaternionic:2") == {"name": "quaternionic:2"}
    with pytest.raises(ConfigError):
        parse_override("novalue")
    with pytest.raises(ConfigError):
        parse_override("=3")


def test_overrides_merge_deeply():
    cfg = RunConfig.build(overrides=["barrier.budget=1000", {"barrier": {"region": {"radius": 0.3}}}])
    assert cfg["barrier"]["budget"] == 1000
    assert cfg["barrier"]["region"]["radius"] == 0.3
    assert cfg["barrier"]["tolerance"] == DEFAULTS["barrier"]["tolerance"]


def test_load_yaml_and_json(tmp_path):
    y = tmp_path / "c.yaml"
    y.write_text("seed: 5\nharnack:\n  resolution: 9\n")
    j = tmp_path / "c.json"
    j.write_text(json.dumps({"seed": 6}))
    assert RunConfig.build(y)["harnack"]["resolution"] == 9
    assert RunConfig.build(j).seed == 6
    empty = tmp_path / "e.yaml"
    empty.write_text("")
    assert load_file(empty) == {}


def test_load_errors_carry_location(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("seed: 1\ngroup: {preset: [\n")
    with pytest.raises(ConfigError) as info:
        load_file(bad)
    assert "bad.yaml:" in info.value.location
    with pytest.raises(ConfigError):
        load_file(tmp_path / "missing.yaml")
    lst = tmp_path / "list.yaml"
    lst.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_file(lst)
    with pytest.raises(ConfigError):
        RunConfig.build(overrides=["seed=abc"]).seed


def test_group_from_config(tmp_path):
    assert group_from_config({"preset": "r5_example"}).is_rescaled
    spec = group_from_config({"m": 2, "n": 1, "B": [[0, -1], [1, 0]]})
    assert spec.Q == 4
    f = tmp_path / "g.yaml"
    f.write_text("group: {m: 2, n: 1, B: [[0, -1], [1, 0]], name: mine}\n")
    assert group_from_config({"file": str(f)}).name == "mine"
    with pytest.raises(ConfigError):
        group_from_config({"preset": "nosuch"})
    with pytest.raises(ConfigError):
        group_from_config({"m": 2, "n": 1})
    with pytest.raises(ConfigError):
        group_from_config({"m": 2, "n": 1, "B": [[0, 1, 2], [1, 0]]})
    with pytest.raises(ConfigError):
        group_from_config("heisenberg")


def test_field_from_config():
    spec = heisenberg(1)
    p = np.array([[0.3, 0.1, 0.0]])
    assert field_from_config({}, spec).kind == "identity"
    np.testing.assert_allclose(field_from_config({"kind": "diagonal", "diag": [1, 2]}, spec)(p)[0], np.diag([1, 2]))
    np.testing.assert_allclose(field_from_config({"kind": "constant", "matrix": [[2, 0], [0, 1]]}, spec)(p)[0],
                               np.diag([2, 1]))
    ramp = field_from_config({"kind": "diagonal_ramp", "start": [1, 1], "end": [1, 1.5]}, spec)
    assert ramp.bounds.Lam == 1.5
    rot = field_from_config({"kind": "rotating", "diag": [1, 1.3], "rate": 2.0}, spec)
    assert rot.bounds.lam == 1.0
    ratio = field_from_config({"kind": "ratio", "lambda": 1, "Lambda": 1.2}, spec)
    assert ratio.bounds.ratio == pytest.approx(1.2)
    with pytest.raises(ConfigError):
        field_from_config({"kind": "diagonal"}, spec)
    with pytest.raises(ConfigError):
        field_from_config({"kind": "wavy"}, spec)
    with pytest.raises(DomainError):
        field_from_config({"kind": "diagonal", "diag": [1, -1]}, spec)


def test_field_dimension_check():
    check_field_dimension(identity_field(2), heisenberg(1))
    with pytest.raises(StructureError):
        check_field_dimension(identity_field(4), heisenberg(1))
