import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from penmin.models import regressogram_collection
from penmin.path import (
    PenaltyShape,
    SelectionPath,
    StepFunction,
    brute_force_select,
    complexity_path,
    compute_path,
    path_to_csv,
    select_at,
)

TWO_LINES = ({"m1": 1.0, "m2": 0.5}, PenaltyShape({"m1": 0.1, "m2": 0.5}))


def test_two_line_breakpoint():
    risks, shape = TWO_LINES
    path = compute_path(risks, shape)
    np.testing.assert_allclose(path.breakpoints, [1.25])
    assert path.model_ids == ["m2", "m1"]


def test_select_at_interior_breakpoint_and_tail():
    risks, shape = TWO_LINES
    path = compute_path(risks, shape)
    assert select_at(path, 1.0) == "m2"
    assert select_at(path, 1.25) == "m1"  # right-continuity at the breakpoint
    assert select_at(path, 1e9) == "m1"
    with pytest.raises(ValueError):
        select_at(path, -0.1)


def test_single_model_path():
    path = compute_path({"only": 2.0}, PenaltyShape({"only": 0.3}))
    assert path.breakpoints.size == 0
    assert select_at(path, 0.0) == "only" and select_at(path, 100.0) == "only"


def test_dominated_model_absent():
    risks = {"good": 1.0, "bad": 2.0}
    shape = PenaltyShape({"good": 0.1, "bad": 0.2})
    path = compute_path(risks, shape)
    assert path.model_ids == ["good"]


def test_collinear_lines_deduplicated_by_id():
    risks = {"b": 1.0, "a": 1.0, "c": 0.0}
    shape = PenaltyShape({"b": 0.1, "a": 0.1, "c": 0.5})
    path = compute_path(risks, shape)
    assert "a" in path.model_ids and "b" not in path.model_ids


def test_brute_force_examples():
    risks, shape = TWO_LINES
    assert brute_force_select(risks, shape, 0.0) == "m2"
    assert brute_force_select(risks, shape, 1.25) == "m1"  # tie -> smaller weight
    all_equal = {"a": 1.0, "b": 1.0}
    sh = PenaltyShape({"a": 0.2, "b": 0.2})
    assert brute_force_select(all_equal, sh, 3.0) == "a"  # full tie -> smaller id


def test_empty_and_mismatched_inputs():
    with pytest.raises(ValueError):
        compute_path({}, PenaltyShape({"a": 0.1}))
    with pytest.raises(ValueError):
        compute_path({"a": 1.0, "b": 2.0}, PenaltyShape({"a": 0.1}))
    with pytest.raises(ValueError):
        brute_force_select({"a": 1.0}, PenaltyShape({"b": 0.1}), 1.0)


def test_path_monotonicity_invariants():
    rng = np.random.default_rng(0)
    for _ in range(50):
        m = rng.integers(2, 30)
        risks = {f"m{i}": float(rng.normal()) for i in range(m)}
        shape = PenaltyShape({f"m{i}": float(rng.uniform(0, 2)) for i in range(m)})
        path = compute_path(risks, shape)
        ws = [s.weight for s in path.segments]
        ints = [s.intercept for s in path.segments]
        assert all(w1 > w2 for w1, w2 in zip(ws, ws[1:]))
        assert all(a1 < a2 for a1, a2 in zip(ints, ints[1:]))


def test_envelope_matches_brute_force_on_grid():
    rng = np.random.default_rng(1)
    for _ in range(30):
        m = rng.integers(2, 50)
        risks = {f"m{i}": float(rng.normal()) for i in range(m)}
        shape = PenaltyShape({f"m{i}": float(rng.uniform(0, 3)) for i in range(m)})
        path = compute_path(risks, shape)
        for c in rng.uniform(0, 10, 100):
            assert select_at(path, c) == brute_force_select(risks, shape, c)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.floats(min_value=-100, max_value=100),
            st.floats(min_value=0, max_value=50),
        ),
        min_size=1,
        max_size=25,
    ),
    st.floats(min_value=0, max_value=200),
)
def test_envelope_agrees_with_brute_force_hypothesis(lines, c):
    risks = {f"m{i}": a for i, (a, _) in enumerate(lines)}
    shape = PenaltyShape({f"m{i}": w for i, (_, w) in enumerate(lines)})
    path = compute_path(risks, shape)
    got = select_at(path, c)
    want = brute_force_select(risks, shape, c)
    if got != want:
        # equally good is acceptable only at exact criterion ties
        va = risks[got] + c * shape[got]
        vb = risks[want] + c * shape[want]
        assert va == pytest.approx(vb, rel=1e-9, abs=1e-12)


def test_scale_equivariance_and_shift_invariance():
    rng = np.random.default_rng(2)
    risks = {f"m{i}": float(rng.normal()) for i in range(12)}
    shape = PenaltyShape({f"m{i}": float(rng.uniform(0, 2)) for i in range(12)})
    path = compute_path(risks, shape)
    s = 3.7
    scaled = compute_path({k: s * v for k, v in risks.items()}, shape)
    assert scaled.model_ids == path.model_ids
    np.testing.assert_allclose(scaled.breakpoints, s * path.breakpoints, rtol=1e-12)
    shifted = compute_path({k: v + 11.0 for k, v in risks.items()}, shape)
    assert shifted.model_ids == path.model_ids
    np.testing.assert_allclose(shifted.breakpoints, path.breakpoints, rtol=1e-12)


def test_complexity_path_two_lines():
    risks, shape = TWO_LINES
    path = compute_path(risks, shape)
    step = complexity_path(path, {"m1": 1, "m2": 5})
    assert step(0.5) == 5 and step(1.25) == 1 and step(2.0) == 1
    np.testing.assert_allclose(step.breakpoints, [1.25])
    with pytest.raises(ValueError):
        complexity_path(path, {"m1": 1})


def test_complexity_path_constant_for_single_model():
    path = compute_path({"a": 1.0}, PenaltyShape({"a": 0.1}))
    step = complexity_path(path, {"a": 7})
    assert step(0.0) == 7 and step(1e6) == 7


def test_largest_model_selected_at_zero_for_nested_simulation():
    rng = np.random.default_rng(3)
    n = 64
    coll = regressogram_collection(n, [1, 2, 4, 8, 16, 32, 64])
    y = rng.standard_normal(n)
    from penmin.models import emp_risks

    risks = emp_risks(coll, y)
    path = compute_path(risks, PenaltyShape.dimension(coll))
    step = complexity_path(path, coll.dims())
    assert step(0.0) == 64


def test_covariance_shape_reduces_to_dimension_for_iid():
    coll = regressogram_collection(20, [1, 4, 10])
    sigma2 = 2.0
    cov_shape = PenaltyShape.covariance(coll, sigma2 * np.eye(20))
    dim_shape = PenaltyShape.dimension(coll)
    for mid in coll.ids:
        assert cov_shape[mid] == pytest.approx(sigma2 * dim_shape[mid], rel=1e-12)


def test_penalty_shape_validation():
    with pytest.raises(ValueError):
        PenaltyShape({})
    with pytest.raises(ValueError):
        PenaltyShape({"a": -0.5})
    with pytest.raises(ValueError):
        PenaltyShape({"a": float("nan")})


def test_step_function_right_continuity():
    step = StepFunction(np.array([1.0, 2.0]), np.array([5.0, 3.0, 1.0]))
    assert step(0.999) == 5 and step(1.0) == 3 and step(1.5) == 3 and step(2.0) == 1


def test_path_csv_serialization():
    risks, shape = TWO_LINES
    path = compute_path(risks, shape)
    text = path_to_csv(path, {"m1": 1, "m2": 5})
    lines = text.strip().splitlines()
    assert lines[0] == "C_low,C_high,model_id,dim,emp_risk"
    assert lines[1].startswith("0.0,1.25,m2,5,")
    assert lines[2].startswith("1.25,inf,m1,1,")


def test_selection_path_validation():
    from penmin.path import PathSegment

    with pytest.raises(ValueError):
        SelectionPath(np.array([1.0]), (PathSegment("a", 0.0, 1.0),))
    with pytest.raises(ValueError):
        SelectionPath(
            np.array([1.0]),
            (PathSegment("a", 0.0, 1.0), PathSegment("b", 5.0, 0.5)),
        )
