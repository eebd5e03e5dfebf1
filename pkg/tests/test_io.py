import json

import numpy as np
import pytest

from stochviab.dp import solve
from stochviab.io import (
    ModelFormatError,
    format_estimate,
    load_model,
    model_from_dict,
    model_to_dict,
    read_value_csv,
    save_model,
    write_argmax_csv,
    write_kernel_csv,
    write_policy_csv,
    write_trajectories_csv,
    write_value_csv,
)
from stochviab.kernel import kernel_slice, select_feedback
from stochviab.mc import ProbabilityEstimate, simulate_batch
from stochviab.model import (
    ConstraintSets,
    ControlMap,
    DisturbanceLaw,
    Model,
    StateSpace,
    TableDynamics,
    TimeGrid,
    make_three_state_example,
    validate,
)


def table_model() -> Model:
    nested = [
        [[[1, 0]], [[0, -1]]],
        [[[0, 0]], [[1, 1]]],
    ]
    return Model(
        TimeGrid(0, 2),
        StateSpace(np.array([[0.0], [2.5]])),
        ControlMap.shared(np.array([[1.0]]), 2),
        DisturbanceLaw(np.array([[0.0], [1.0]]), np.array([0.75, 0.25])),
        TableDynamics.from_nested(nested, 2, 1, 2, 2),
        ConstraintSets("set", per_stage=((0, 1), (0,), (0, 1))),
    )


class TestModelJson:
    def test_expr_model_round_trip(self, tmp_path, example_model):
        path = tmp_path / "model.json"
        save_model(example_model, path)
        loaded = load_model(path)
        assert validate(loaded) == []
        assert np.array_equal(loaded.tables.next_state, example_model.tables.next_state)
        assert np.array_equal(loaded.tables.member, example_model.tables.member)
        assert np.array_equal(loaded.noise.probs, example_model.noise.probs)
        assert loaded.dynamics.sources == ("x + u + w",)

    def test_table_model_round_trip(self, tmp_path):
        model = table_model()
        path = tmp_path / "table.json"
        save_model(model, path)
        loaded = load_model(path)
        assert np.array_equal(loaded.tables.next_state, model.tables.next_state)
        assert np.array_equal(loaded.tables.member, model.tables.member)

    def test_unknown_top_level_field_rejected(self, tmp_path, example_model):
        doc = model_to_dict(example_model)
        doc["comment"] = "hello"
        with pytest.raises(ModelFormatError, match="comment"):
            model_from_dict(doc)

    def test_unknown_nested_field_rejected(self, example_model):
        doc = model_to_dict(example_model)
        doc["noise"]["skew"] = 1
        with pytest.raises(ModelFormatError, match="skew"):
            model_from_dict(doc)

    def test_missing_field_rejected(self, example_model):
        doc = model_to_dict(example_model)
        del doc["dynamics"]
        with pytest.raises(ModelFormatError, match="dynamics"):
            model_from_dict(doc)

    def test_bad_modes_rejected(self, example_model):
        doc = model_to_dict(example_model)
        doc["controls"]["mode"] = "everywhere"
        with pytest.raises(ModelFormatError, match="everywhere"):
            model_from_dict(doc)

    def test_not_json(self, tmp_path):
        path = tmp_path / "nope.json"
        path.write_text("{ not json")
        with pytest.raises(ModelFormatError):
            load_model(path)

    def test_per_stage_constraints_round_trip(self, tmp_path):
        model = table_model()
        path = tmp_path / "m.json"
        save_model(model, path)
        doc = json.loads(path.read_text())
        assert doc["constraints"]["per_stage"] == [[0, 1], [0], [0, 1]]


class TestValueCsv:
    def test_round_trip_is_exact(self, tmp_path, example_model):
        vf, _ = solve(example_model)
        path = tmp_path / "value.csv"
        write_value_csv(vf, path)
        back = read_value_csv(path)
        assert back.t0 == vf.t0 and back.T == vf.T
        assert np.array_equal(back.table, vf.table)
        assert np.array_equal(back.points, vf.points)

    def test_header_and_row_order(self, tmp_path, example_model):
        vf, _ = solve(example_model)
        path = tmp_path / "value.csv"
        write_value_csv(vf, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "t,state_index,x1,value"
        assert lines[1].startswith("0,0,-1,")
        assert lines[2].startswith("0,1,0,")
        assert len(lines) == 1 + 41 * 3

    def test_missing_rows_detected(self, tmp_path, example_model):
        vf, _ = solve(example_model)
        path = tmp_path / "value.csv"
        write_value_csv(vf, path)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(ModelFormatError, match="missing"):
            read_value_csv(path)


def test_policy_and_argmax_csv(tmp_path, example_model):
    vf, am = solve(example_model)
    fb = select_feedback(am)
    ppath = tmp_path / "policy.csv"
    apath = tmp_path / "argmax.csv"
    write_policy_csv(example_model, fb, ppath)
    write_argmax_csv(example_model, am, apath)

    plines = ppath.read_text().splitlines()
    assert plines[0] == "t,state_index,control_index,u1"
    assert len(plines) == 1 + 40 * 3
    assert plines[1] == "0,0,1,1"  # state -1 picks control +1

    alines = apath.read_text().splitlines()
    assert alines[0] == "t,state_index,control_index,u1"
    # per stage: one maximizer at each boundary, two at the center
    assert len(alines) == 1 + 40 * 4


def test_kernel_csv(tmp_path, example_model):
    vf, _ = solve(example_model)
    sl = kernel_slice(vf, 39, 0.995)
    path = tmp_path / "kernel.csv"
    write_kernel_csv([sl], vf.points, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,beta,state_index,x1"
    assert lines[1] == "39,0.995,0,-1"
    assert lines[2] == "39,0.995,2,1"


def test_trajectories_csv(tmp_path, example_model):
    _, am = solve(example_model)
    fb = select_feedback(am)
    states, controls, draws, ok = simulate_batch(example_model, fb, 1, 3, 42)
    path = tmp_path / "traj.csv"
    write_trajectories_csv(example_model, states, controls, ok, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "sample,t,state_index,x1,control_index,success"
    assert len(lines) == 1 + 3 * 41
    first = lines[1].split(",")
    assert first[:3] == ["0", "0", "1"] and first[3] == "0"
    # terminal rows carry no control
    last_of_first = lines[41].split(",")
    assert last_of_first[1] == "40" and last_of_first[4] == ""


def test_trajectory_csv_sink_rows_have_empty_coords(tmp_path, example_model):
    from stochviab.kernel import FeedbackPolicy

    push_up = Model(
        example_model.time, example_model.states, example_model.controls,
        DisturbanceLaw(np.array([[1.0]]), np.array([1.0])),
        example_model.dynamics, example_model.constraints,
    )
    fb = FeedbackPolicy.constant(push_up, [1.0])
    states, controls, draws, ok = simulate_batch(push_up, fb, 1, 1, 0)
    path = tmp_path / "sink.csv"
    write_trajectories_csv(push_up, states, controls, ok, path)
    row = path.read_text().splitlines()[2].split(",")
    assert row[2] == "3" and row[3] == "" and row[5] == "0"


def test_format_estimate():
    est = ProbabilityEstimate(0.5, 100, 0.25, 0.75, 7)
    assert format_estimate(est) == "0.5 100 0.25 0.75 7"
