import numpy as np
import pytest

from surfhodge.config import (
    compile_expression,
    constant_band_forcing,
    expression_forcing,
    forcing_from_dict,
    load_simulation_config,
    parse_config_file,
    rigid_rotation_forcing,
)
from surfhodge.errors import ParseError


def test_expression_basics():
    f = compile_expression("sin(x) + 2*y**2 - z/2 + t")
    env = {"x": np.array([0.0, np.pi / 2]), "y": np.array([1.0, 2.0]),
           "z": np.array([2.0, 4.0]), "t": 3.0}
    got = f(env)
    assert np.allclose(got, [0 + 2 - 1 + 3, 1 + 8 - 2 + 3])


def test_expression_step_and_constants():
    f = compile_expression("step(1 - x) * pi")
    env = {"x": np.array([0.0, 2.0]), "y": 0.0, "z": 0.0, "t": 0.0}
    assert np.allclose(f(env), [np.pi, 0.0])


def test_expression_rejects_unsafe():
    for bad in ("__import__('os')", "x.__class__", "lambda: 1", "open('f')",
                "unknown_name", "foo(x)"):
        with pytest.raises(ParseError):
            compile_expression(bad)


def test_expression_forcing_vectorized():
    f = expression_forcing("y", "-x", "0")
    pts = np.array([[1.0, 2.0, 3.0], [0.0, -1.0, 0.5]])
    got = f(pts, t=0.0)
    assert np.allclose(got, [[2.0, -1.0, 0.0], [-1.0, 0.0, 0.0]])


def test_constant_band_forcing():
    f = constant_band_forcing(direction=(0, 1, 0), amplitude=2.0,
                              band_axis=0, band_max=1.0)
    pts = np.array([[0.5, 0, 0], [1.5, 0, 0]])
    assert np.allclose(f(pts), [[0, 2.0, 0], [0, 0, 0]])


def test_rigid_rotation_forcing():
    f = rigid_rotation_forcing(center=(0, 0, 0), axis=(0, 0, 1), amplitude=3.0)
    pts = np.array([[2.0, 0.0, 0.0]])
    # (x/|x|) x e_z = (1,0,0) x (0,0,1) = (0,-1,0)
    assert np.allclose(f(pts), [[0.0, -3.0, 0.0]])


def test_config_file_round_trip(tmp_path):
    cfg_text = """# demo
mesh = builtin:torus
k = 2
mu = 0.25
dt = 1e-3
t_end = 0.01
output_every = 5
seed = 7
bc = noslip
forcing = constant_band
direction = 0,1,0
amplitude = 4e-5
band_axis = 0
band_max = 40
"""
    path = tmp_path / "run.cfg"
    path.write_text(cfg_text)
    values = parse_config_file(path)
    assert values["k"] == 2
    assert values["direction"] == (0.0, 1.0, 0.0)
    config, raw = load_simulation_config(path)
    assert config.k == 2 and config.mu == 0.25 and config.seed == 7
    pts = np.array([[10.0, 0, 0], [50.0, 0, 0]])
    assert np.allclose(config.forcing(pts, 0.0), [[0, 4e-5, 0], [0, 0, 0]])


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("this is not a key value line\n")
    with pytest.raises(ParseError):
        parse_config_file(bad)
    with pytest.raises(ParseError):
        forcing_from_dict({"forcing": "warp_drive"})
