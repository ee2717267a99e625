import json
import math

import numpy as np
import pytest

import cellflow

SMALL = {
    "schema_version": 1,
    "group": "p4",
    "domain": {"cells_x": 1, "cells_y": 1},
    "pores": {"segments": 16},
    "mesh": {"target_h": 0.25},
    "flow": {"n_steps": 8},
    "load": {"mode": "tension", "final_strain": 0.05, "n_increments": 2},
    "loss": {"kind": "poisson_target", "nu_target": -0.5},
    "optimizer": {"budget": 3, "restarts": 1, "seed": 3},
}


def test_groups():
    names = cellflow.group_names()
    assert len(names) == 17
    assert cellflow.group_info("p6m")["order"] == 12
    assert cellflow.group_info("p1")["order"] == 1


def test_psi_reference_value():
    F = np.array([[2.0, 0.0], [0.0, 1.0]])
    expected = 0.5 * (5.0 - 2.0 - 2.0 * math.log(2.0)) + 0.5 * math.log(2.0) ** 2
    assert cellflow.psi(F, 2.5, 0.25) == pytest.approx(expected, abs=1e-12)
    assert cellflow.psi(np.eye(2)) == pytest.approx(0.0, abs=1e-14)


def test_velocity_equivariant_under_translation():
    theta = cellflow.random_params(5, 0.3)
    x = np.array([[0.13, 0.41], [0.72, 0.05]])
    v0 = cellflow.velocity("p4", theta, x, 0.4)
    v1 = cellflow.velocity("p4", theta, x + np.array([1.0, -2.0]), 0.4)
    np.testing.assert_allclose(v0, v1, atol=1e-12)


def test_flow_points_shape():
    theta = cellflow.random_params(2, 0.2)
    x = np.random.default_rng(0).random((10, 2))
    y = cellflow.flow_points("p2", theta, x, 1.0, 16)
    assert y.shape == (10, 2)
    assert np.all(np.isfinite(y))


def test_config_defaults_and_errors():
    cfg = cellflow.load_config(SMALL)
    assert cfg["group"] == "p4"
    bad = dict(SMALL, unknown_key=1)
    with pytest.raises(cellflow.ConfigError):
        cellflow.load_config(bad)


def test_design_evaluate_and_gradient():
    d = cellflow.Design(json.dumps(SMALL))
    assert d.nodes.shape[1] == 2
    assert d.triangles.shape[1] == 3
    zero = np.zeros(d.num_params)
    ref = d.evaluate(zero)
    assert ref["ok"]
    assert ref["nu_ef"] > 0.0
    theta = d.random_params(1, 0.1)
    ev = d.evaluate(theta, gradient=True)
    assert ev["ok"]
    assert ev["gradient"].shape == (d.num_params,)
    np.testing.assert_allclose(d.deform(zero), d.nodes, atol=1e-14)


def test_verify_passes_default():
    checks = cellflow.verify(SMALL)
    assert checks and all(c["passed"] for c in checks)


def test_design_run_writes_outputs(tmp_path):
    summary = cellflow.design(SMALL, str(tmp_path))
    assert summary["steps"] >= 1
    assert (tmp_path / "history.csv").exists()
    assert (tmp_path / "checkpoint.json").exists()
    sim = cellflow.simulate(SMALL, str(tmp_path / "checkpoint.json"), str(tmp_path / "sim"))
    assert len(sim["curve"]["strain"]) == 3
