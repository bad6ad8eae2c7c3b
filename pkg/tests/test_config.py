"""Configuration parsing, validation messages, and hashing."""

import math

import pytest

from periflow.config import (
    RunConfig,
    SignalSpec,
    load_config,
    parse_config,
    reference_config,
)
from periflow.errors import ConfigError


def test_defaults_build():
    cfg = RunConfig()
    assert cfg.n_modes == 8
    assert cfg.params.rho == 1.0
    geom = cfg.build_geometry()
    assert geom.half_length == 6.0
    phi = cfg.build_flowrate()
    assert phi.period == pytest.approx(2.0 * math.pi)
    assert phi(phi.period / 4.0) == pytest.approx(1.0, abs=1e-12)


def test_parse_empty_mapping_gives_defaults():
    assert parse_config({}) == RunConfig()


def test_parse_full_document():
    cfg = parse_config(
        {
            "geometry": {"half_length": 7.0, "body": [-0.4, 0.4, -0.2, 0.2]},
            "params": {"rho": 2.0, "stiffness": 3.0},
            "flowrate": {"period": 1.0, "harmonics": [[1, 0.1, -0.2]]},
            "cutoff": {"inner": 0.1, "outer": 0.5},
            "solver": {
                "n_modes": 6,
                "n_steps": 512,
                "mesh_h": 0.05,
                "tol": 1e-8,
                "alphas": [0.5, 1.0],
            },
            "output": {"dir": "results"},
            "seed": 3,
            "warn_only": True,
        }
    )
    assert cfg.half_length == 7.0
    assert cfg.params.rho == 2.0 and cfg.params.stiffness == 3.0
    assert cfg.flowrate == SignalSpec(1.0, ((1, 0.1, -0.2),))
    assert cfg.cutoff_inner == 0.1
    assert cfg.n_modes == 6 and cfg.fixed_point_tol == 1e-8
    assert cfg.alphas == (0.5, 1.0)
    assert cfg.output_dir == "results" and cfg.seed == 3 and cfg.warn_only


@pytest.mark.parametrize(
    "doc, fragment",
    [
        ({"bogus": 1}, "bogus"),
        ({"geometry": {"radius": 2}}, "radius"),
        ({"geometry": {"body": [1, 2, 3]}}, "geometry.body"),
        ({"flowrate": {"period": 1, "harmonics": [[1, 0.0]]}}, "flowrate.harmonics[0]"),
        ({"flowrate": {"period": -1, "harmonics": []}}, "flowrate.period"),
        ({"flowrate": {"harmonics": [[1.5, 0.0, 0.0]], "period": 1}}, "integer"),
        ({"solver": {"n_modes": "many"}}, "solver.n_modes"),
        ({"seed": -1}, "seed"),
        ({"warn_only": "yes"}, "warn_only"),
        ({"forces": {"tilde_f": {"box": [0, 1, 0, 1]}}}, "direction"),
    ],
)
def test_parse_errors_name_the_field(doc, fragment):
    with pytest.raises(ConfigError) as exc_info:
        parse_config(doc)
    assert fragment in str(exc_info.value)


def test_dataclass_validation():
    with pytest.raises(ConfigError):
        RunConfig(mesh_h=0.0)
    with pytest.raises(ConfigError):
        RunConfig(profile_nodes=256)
    with pytest.raises(ConfigError):
        RunConfig(n_modes=0)


def test_external_force_inherits_flowrate_period():
    cfg = parse_config(
        {
            "flowrate": {"period": 2.0, "harmonics": [[1, 0.0, -0.5]]},
            "forces": {
                "tilde_f": {
                    "box": [1.0, 2.0, -0.4, 0.4],
                    "direction": [0.0, 1.0],
                    "harmonics": [[1, 0.1, 0.0]],
                },
                "tilde_g": {"harmonics": [[0, 0.2, 0.0]]},
            },
        }
    )
    assert cfg.tilde_f.signal.period == 2.0
    assert cfg.tilde_g.period == 2.0
    tf, tg = cfg.build_external_forces()
    assert tf.signal.period == 2.0
    assert tg(0.0) == pytest.approx(0.2)


def test_with_period_rescales_all_signals():
    cfg = parse_config(
        {
            "flowrate": {"period": 2.0, "harmonics": [[1, 0.0, -0.5]]},
            "forces": {"tilde_g": {"harmonics": [[1, 0.1, 0.0]]}},
        }
    )
    moved = cfg.with_period(5.0)
    assert moved.flowrate.period == 5.0
    assert moved.tilde_g.period == 5.0
    assert moved.flowrate.harmonics == cfg.flowrate.harmonics


def test_config_hash_stable_and_sensitive():
    a = reference_config()
    b = reference_config()
    assert a.config_hash() == b.config_hash()
    c = reference_config(n_steps=1024)
    assert c.config_hash() != a.config_hash()
    assert len(a.config_hash()) == 16


def test_load_config_yaml_roundtrip(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(
        "geometry:\n  half_length: 6.5\n"
        "solver:\n  n_modes: 5\n  n_steps: 512\n"
        "seed: 11\n"
    )
    cfg = load_config(str(path))
    assert cfg.half_length == 6.5
    assert cfg.n_modes == 5 and cfg.n_steps == 512 and cfg.seed == 11


def test_load_config_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/run.yaml")


def test_load_config_bad_yaml(tmp_path):
    path = tmp_path / "broken.yaml"
    path.write_text("geometry: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_signal_spec_build_matches_closed_form():
    spec = SignalSpec(2.0 * math.pi, ((0, 0.3, 0.0), (2, 0.0, -0.5)))
    sig = spec.build()
    for t in (0.0, 0.4, 1.7):
        expect = 0.3 + math.sin(2.0 * t)
        assert sig(t) == pytest.approx(expect, abs=1e-12)
