import numpy as np
import pytest

from stochviab.model import (
    ConstraintSets,
    ControlMap,
    DisturbanceLaw,
    ExprDynamics,
    Model,
    ModelError,
    StateSpace,
    TableDynamics,
    TimeGrid,
    make_three_state_example,
    project_to_grid,
    validate,
)


def test_time_grid_rejects_empty_horizon():
    with pytest.raises(ModelError):
        TimeGrid(3, 3)
    assert TimeGrid(0, 40).steps == 40
    with pytest.raises(ModelError):
        TimeGrid(0, 2).stage_index(3)
    assert TimeGrid(0, 2).stage_index(2) == 2
    with pytest.raises(ModelError):
        TimeGrid(0, 2).stage_index(2, terminal=False)


class TestProjectToGrid:
    grid = StateSpace(np.array([[-1.0], [0.0], [1.0]]))

    def test_exact_point(self):
        assert project_to_grid(self.grid, [0.0]) == 1

    def test_outside_every_cell(self):
        assert project_to_grid(self.grid, [2.0]) == self.grid.sink

    def test_midpoint_tie_breaks_to_smaller_index(self):
        assert project_to_grid(self.grid, [0.5]) == 1

    def test_all_midpoints_exhaustively(self):
        # every midpoint between neighbours ties; the smaller index must win
        pts = self.grid.points[:, 0]
        for i in range(len(pts) - 1):
            mid = (pts[i] + pts[i + 1]) / 2.0
            assert project_to_grid(self.grid, [mid]) == i

    def test_dimension_mismatch(self):
        with pytest.raises(ModelError):
            project_to_grid(self.grid, [0.0, 0.0])

    def test_2d(self):
        grid = StateSpace(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
        assert project_to_grid(grid, [0.1, 0.1]) == 0
        assert project_to_grid(grid, [0.9, 0.05]) == 1
        assert project_to_grid(grid, [5.0, 5.0]) == grid.sink


class TestValidate:
    def test_example_is_valid(self):
        for p in (0.01, 0.1, 0.3):
            assert validate(make_three_state_example(p, 0, 40)) == []

    def test_unnormalized_probs_named(self):
        m = make_three_state_example(0.01)
        bad = Model(
            m.time, m.states, m.controls,
            DisturbanceLaw(m.noise.support, np.array([0.01, 0.97, 0.01])),
            m.dynamics, m.constraints,
        )
        issues = validate(bad)
        assert len(issues) == 1
        assert "DisturbanceLaw" in issues[0]

    def test_empty_control_list_named(self):
        m = make_three_state_example(0.01, 0, 2)
        ctable = [
            [[[-1.0], [1.0]] if x != 1 else [] for x in range(3)]
            for _ in range(2)
        ]
        bad = Model(
            m.time, m.states,
            ControlMap.per_stage_state(ctable, 3, 0),
            m.noise, m.dynamics, m.constraints,
        )
        issues = validate(bad)
        assert any("ControlMap" in v and "empty" in v for v in issues)

    def test_constraint_indices_out_of_range(self):
        m = make_three_state_example(0.01)
        bad = Model(
            m.time, m.states, m.controls, m.noise, m.dynamics,
            ConstraintSets("set", stationary=(0, 1, 2, 7)),
        )
        assert any("ConstraintSets" in v for v in validate(bad))

    def test_non_absorbing_sink_reported(self):
        table = np.zeros((1, 3, 1, 1), dtype=np.int64)
        table[0, 2, 0, 0] = 0  # sink jumps back to the grid
        bad = Model(
            TimeGrid(0, 1),
            StateSpace(np.array([[0.0], [1.0]])),
            ControlMap.shared(np.array([[0.0]]), 2),
            DisturbanceLaw(np.array([[0.0]]), np.array([1.0])),
            TableDynamics(table),
            ConstraintSets("set", stationary=(0, 1)),
        )
        assert any("absorbing" in v for v in validate(bad))


class TestThreeStateExample:
    def test_shapes(self):
        m = make_three_state_example(0.01, 0, 40)
        assert m.states.n_total == 4
        assert m.controls.admissible(0, 0).shape == (2, 1)
        assert m.noise.n_atoms == 3

    def test_probs_substitution(self):
        m = make_three_state_example(0.25)
        assert np.allclose(m.noise.probs, [0.25, 0.5, 0.25])

    def test_out_of_grid_goes_to_sink(self):
        m = make_three_state_example(0.1, 0, 2)
        tab = m.tables
        # x=1 (index 2), u=+1 (slot 1), w=+1 (index 2): 1+1+1=3 is off the grid
        assert tab.next_state[0, 2, 1, 2] == tab.sink

    def test_p_range_guard(self):
        for bad in (0.0, 0.5, 0.6, -0.1):
            with pytest.raises(ModelError):
                make_three_state_example(bad)

    def test_sink_absorbs(self):
        m = make_three_state_example(0.1, 0, 3)
        tab = m.tables
        assert np.all(tab.next_state[:, tab.sink, :, :] == tab.sink)
        assert not tab.member[:, tab.sink].any()


def test_model_rejects_inconsistent_shapes():
    m = make_three_state_example(0.1)
    with pytest.raises(ModelError):
        Model(
            m.time, m.states,
            ControlMap.shared(np.array([[-1.0], [1.0]]), 5),  # wrong state count
            m.noise, m.dynamics, m.constraints,
        )
    with pytest.raises(ModelError):
        DisturbanceLaw(np.array([[0.0], [1.0]]), np.array([1.0]))  # length mismatch


def test_expr_dynamics_dimension_check():
    with pytest.raises(ModelError):
        ExprDynamics.parse(["x1 + u", "x2"], (1, 1, 1))


def test_box_constraints_membership():
    m = make_three_state_example(0.1, 0, 2)
    boxed = Model(
        m.time, m.states, m.controls, m.noise, m.dynamics,
        ConstraintSets("box", stationary=([0.0], [10.0])),
    )
    member = boxed.tables.member
    assert list(member[0][:3]) == [False, True, True]
    assert not member[:, 3].any()
