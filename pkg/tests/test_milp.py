import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tenantopt.milp import MilpModel


def small_model():
    m = MilpModel("small")
    x = m.add_vars("x", 3, 0.0, 10.0)
    y = m.add_var("y", binary=True)
    m.add_constraints("cap", [(1.0, x), (-4.0, y)], "<=", 0.0)
    m.add_constraint("total", x, 1.0, ">=", 2.0)
    m.add_objective(x, [1.0, 2.0, 3.0])
    m.add_objective(y, -5.0)
    m.objective_constant = 7.0
    return m, x, y


def test_block_indices_and_names():
    m, x, y = small_model()
    assert x.tolist() == [0, 1, 2]
    assert y == 3
    assert m.var_names() == ["x[0]", "x[1]", "x[2]", "y"]
    assert m.con_name(0) == "cap[0]"
    assert m.con_name(2) == "cap[2]"
    assert m.con_name(3) == "total"
    assert m.num_cons == 4


def test_two_dimensional_block_name():
    m = MilpModel()
    z = m.add_vars("z", (2, 3))
    assert z.shape == (2, 3)
    assert m.var_name(int(z[1, 2])) == "z[1,2]"


def test_matrix_and_row_bounds():
    m, x, y = small_model()
    A = m.matrix().toarray()
    expected = np.array([
        [1, 0, 0, -4],
        [0, 1, 0, -4],
        [0, 0, 1, -4],
        [1, 1, 1, 0],
    ], dtype=float)
    np.testing.assert_array_equal(A, expected)
    assert np.all(np.isinf(m.row_lo[:3])) and np.all(m.row_hi[:3] == 0)
    assert m.row_lo[3] == 2 and np.isinf(m.row_hi[3])


def test_evaluate_includes_constant():
    m, x, y = small_model()
    # 1*1 + 2*2 + 3*3 - 5 + 7
    assert m.evaluate(np.array([1.0, 2.0, 3.0, 1.0])) == 16.0


def test_binary_bounds_are_clipped():
    m = MilpModel()
    b = m.add_vars("b", 2, -3.0, 8.0, binary=True)
    assert m.lb[b].tolist() == [0.0, 0.0]
    assert m.ub[b].tolist() == [1.0, 1.0]
    assert m.integrality[b].all()


def test_fix_and_set_bounds():
    m, x, y = small_model()
    m.fix(x[0], 2.5)
    m.set_bounds(x[1], ub=1.0)
    assert (m.lb[0], m.ub[0]) == (2.5, 2.5)
    assert m.ub[1] == 1.0


def test_duplicate_names_rejected():
    m, x, y = small_model()
    with pytest.raises(ValueError, match="duplicate"):
        m.add_vars("x", 2)
    with pytest.raises(ValueError, match="duplicate"):
        m.add_constraints("cap", [(1.0, x)], "<=", 1.0)


def test_bad_sense_and_inconsistent_rows():
    m, x, y = small_model()
    with pytest.raises(ValueError, match="sense"):
        m.add_constraints("bad", [(1.0, x)], "<", 0.0)
    z = m.add_vars("z", 2)
    with pytest.raises(ValueError, match="inconsistent"):
        m.add_constraints("mixed", [(1.0, x), (1.0, z)], "<=", 0.0)


def test_audit_clean_and_dirty():
    m, x, y = small_model()
    assert m.audit() == []
    m.set_bounds(x[2], lb=5.0, ub=1.0)
    m.add_objective(x[0], np.nan)
    where = {i.where for i in m.audit()}
    assert "x[2]" in where
    assert "objective" in where


def test_lp_export(tmp_path):
    m, x, y = small_model()
    text = m.write_lp(tmp_path / "m.lp").read_text()
    assert "Maximize" in text and "Subject To" in text
    assert "Binaries" in text or "Binary" in text
    assert "cap_0" in text
    assert "y" in text


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=3, max_size=3),
       st.lists(st.floats(0, 10), min_size=4, max_size=4))
def test_evaluate_is_affine(coefs, point):
    m = MilpModel()
    x = m.add_vars("x", 3)
    m.add_objective(x, coefs)
    m.objective_constant = 1.5
    p = np.array(point[:3])
    assert m.evaluate(p) == pytest.approx(float(np.dot(coefs, p)) + 1.5, abs=1e-9)
    # activity is linear: A(p+q) = Ap + Aq
    m.add_constraints("r", [(np.array(coefs)[None, :], np.tile(x, (2, 1)))], "<=", 0.0)
    q = np.full(3, point[3])
    np.testing.assert_allclose(m.row_activity(p + q), m.row_activity(p) + m.row_activity(q), atol=1e-9)
