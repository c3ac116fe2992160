"""Tests for config parsing and binary model persistence."""

import numpy as np
import pytest

from conftest import ToyProblem
from proxyrb.config import ConfigError, build_problem, load_config
from proxyrb.model_io import ModelFormatError, load_model, save_model
from proxyrb.offline import Thresholds, run_offline


def write_config(tmp_path, text):
    path = tmp_path / "run.ini"
    path.write_text(text)
    return path


BASIC = """
[run]
problem = synthetic_affine
seed = 3

[thresholds]
epsilon = 1e-6
eta = 2.0

[synthetic_affine]
dimension = 16
rank = 2
samples = 30
"""


class TestLoadConfig:
    def test_basic_round_trip(self, tmp_path):
        cfg = load_config(write_config(tmp_path, BASIC))
        assert cfg.problem == "synthetic_affine"
        assert cfg.seed == 3
        assert cfg.epsilons == [1e-6]
        assert cfg.eta == 2.0
        assert cfg.driver["dimension"] == "16"

    def test_epsilon_list(self, tmp_path):
        text = BASIC.replace("epsilon = 1e-6", "epsilon = 1e-2, 1e-3, 1e-4")
        cfg = load_config(write_config(tmp_path, text))
        assert cfg.epsilons == [1e-2, 1e-3, 1e-4]

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.ini")

    def test_unknown_section_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown config section"):
            load_config(write_config(tmp_path, BASIC + "\n[bogus]\nx = 1\n"))

    def test_unknown_key_rejected(self, tmp_path):
        text = BASIC.replace("seed = 3", "seed = 3\ncolor = red")
        with pytest.raises(ConfigError, match="unknown keys"):
            load_config(write_config(tmp_path, text))

    def test_missing_problem_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="problem"):
            load_config(write_config(tmp_path, "[run]\nseed = 1\n"))

    def test_unknown_problem_rejected(self, tmp_path):
        text = "[run]\nproblem = quantum_foo\n"
        with pytest.raises(ConfigError, match="unknown problem"):
            load_config(write_config(tmp_path, text))

    def test_mismatched_driver_section_rejected(self, tmp_path):
        text = BASIC + "\n[rte]\nn_fine = 8\n"
        with pytest.raises(ConfigError, match="does not match"):
            load_config(write_config(tmp_path, text))

    def test_epsilon_out_of_range(self, tmp_path):
        text = BASIC.replace("epsilon = 1e-6", "epsilon = 2.0")
        with pytest.raises(ConfigError, match="epsilon"):
            load_config(write_config(tmp_path, text))

    def test_operator_columns_auto_and_int(self, tmp_path):
        text = BASIC + "\n[pipeline]\noperator_columns = auto\n"
        assert load_config(write_config(tmp_path, text)).operator_columns is None
        text = BASIC + "\n[pipeline]\noperator_columns = 5\n"
        assert load_config(write_config(tmp_path, text)).operator_columns == 5
        text = BASIC + "\n[pipeline]\noperator_columns = maybe\n"
        with pytest.raises(ConfigError, match="operator_columns"):
            load_config(write_config(tmp_path, text))

    def test_invalid_rhs_mode(self, tmp_path):
        text = BASIC + "\n[pipeline]\nrhs_mode = sideways\n"
        with pytest.raises(ConfigError, match="rhs_mode"):
            load_config(write_config(tmp_path, text))

    def test_invalid_boolean(self, tmp_path):
        text = BASIC + "\n[pipeline]\nenrich = perhaps\n"
        with pytest.raises(ConfigError, match="boolean"):
            load_config(write_config(tmp_path, text))


class TestBuildProblem:
    def test_affine_dimensions_flow_through(self, tmp_path):
        cfg = load_config(write_config(tmp_path, BASIC))
        prob = build_problem(cfg)
        assert prob.name == "synthetic_affine"
        assert prob.fine_dim == 16
        assert prob.sample_space().size == 30

    def test_bie_defaults(self, tmp_path):
        cfg = load_config(write_config(tmp_path, "[run]\nproblem = laplace_bie\n"))
        prob = build_problem(cfg)
        assert prob.fine_dim == 512
        assert prob.coarse_dim == 64

    def test_rte_config(self, tmp_path):
        text = "[run]\nproblem = rte\n\n[rte]\nn_fine = 8\nn_coarse = 4\ngrid_n = 2\n"
        prob = build_problem(load_config(write_config(tmp_path, text)))
        assert prob.fine_dim == 64
        assert prob.sample_space().size == 3 * 3 * 9

    def test_rhs_mode_override(self, tmp_path):
        text = BASIC + "\n[pipeline]\nrhs_mode = interpolated\n"
        prob = build_problem(load_config(write_config(tmp_path, text)))
        assert prob.rhs_mode == "interpolated"

    def test_driver_value_error_wrapped(self, tmp_path):
        text = BASIC.replace("dimension = 16", "dimension = tiny")
        with pytest.raises(ConfigError, match="dimension"):
            build_problem(load_config(write_config(tmp_path, text)))


@pytest.fixture(scope="module")
def toy_model():
    prob = ToyProblem(n=8, p=10, offset=2.0)
    return run_offline(prob, Thresholds(1e-8), seed=0, operator_columns=3)


class TestModelPersistence:
    def test_round_trip_all_fields(self, toy_model, tmp_path):
        path = tmp_path / "model.rbm"
        save_model(toy_model, path)
        loaded = load_model(path)
        assert loaded.problem_name == toy_model.problem_name
        assert loaded.rhs_mode == toy_model.rhs_mode
        assert loaded.fine_dim == toy_model.fine_dim
        assert loaded.epsilon == toy_model.epsilon
        assert loaded.eta == toy_model.eta
        np.testing.assert_array_equal(loaded.basis, toy_model.basis)
        np.testing.assert_array_equal(loaded.mixing, toy_model.mixing)
        np.testing.assert_array_equal(
            loaded.skeleton_indices, toy_model.skeleton_indices
        )
        np.testing.assert_array_equal(
            loaded.projected_operators, toy_model.projected_operators
        )
        np.testing.assert_array_equal(
            loaded.projected_offset, toy_model.projected_offset
        )
        np.testing.assert_array_equal(loaded.projected_rhs, toy_model.projected_rhs)

    def test_resave_byte_identical(self, toy_model, tmp_path):
        p1 = tmp_path / "a.rbm"
        p2 = tmp_path / "b.rbm"
        save_model(toy_model, p1)
        save_model(load_model(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic_rejected(self, toy_model, tmp_path):
        path = tmp_path / "model.rbm"
        save_model(toy_model, path)
        data = bytearray(path.read_bytes())
        data[:4] = b"JUNK"
        path.write_bytes(bytes(data))
        with pytest.raises(ModelFormatError):
            load_model(path)

    def test_truncated_file_rejected(self, toy_model, tmp_path):
        path = tmp_path / "model.rbm"
        save_model(toy_model, path)
        path.write_bytes(path.read_bytes()[:40])
        with pytest.raises(ModelFormatError):
            load_model(path)

    def test_none_offset_preserved(self, tmp_path):
        prob = ToyProblem(n=8, p=10, offset=None)
        model = run_offline(prob, Thresholds(1e-8), seed=0, operator_columns=3)
        path = tmp_path / "m.rbm"
        save_model(model, path)
        assert load_model(path).projected_offset is None
