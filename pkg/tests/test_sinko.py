import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import SINKO_CANON
from oracles import renewal_integral_closed, sinko_matrix_loops
from structpop import linalg, sinko, stability
from structpop.errors import DegenerateNullspaceError, NoSteadyStateError
from structpop.grid import Grid, project, sup_error
from structpop.model import Affine, ParamPoint, SinkoRates, sinko_canonical

CANON = sinko_canonical(SINKO_CANON)


def exact_canon(x):
    return 1.0 / (np.asarray(x) + 1.0) ** 2


class TestAssemble:
    def test_n2_hand_values(self):
        m = sinko.assemble(Grid(2), CANON).matrix
        assert_allclose(m, [[-1.8359, 2.8854], [3.0, -5.0]], atol=1e-4)

    def test_pure_shift(self):
        r = SinkoRates(Affine(0, 0), Affine(0, 1), Affine(0, 0))
        m = sinko.assemble(Grid(3, 3.0), r).matrix
        assert_allclose(np.diag(m), [-1, -1, -1])
        assert_allclose(np.diag(m, -1), [1, 1])
        assert np.count_nonzero(m) == 5

    @pytest.mark.parametrize("n", [2, 7, 40])
    def test_against_loop_oracle(self, n):
        q, g, mu = (lambda x: 1.3 * (x + 1)), (lambda x: 0.7 * (x + 1)), (lambda x: 0.4 * x + 0.2)
        r = SinkoRates(q, g, mu)
        assert_allclose(sinko.assemble(Grid(n, 2.0), r).matrix, sinko_matrix_loops(n, 2.0, q, g, mu), rtol=1e-14)

    @pytest.mark.parametrize("p", [SINKO_CANON, ParamPoint(0.3, 0.8, 0.1), ParamPoint(2, 3, 5)])
    def test_column_sums(self, p):
        grid = Grid(25)
        r = sinko_canonical(p)
        m = sinko.assemble(grid, r).matrix
        x = grid.nodes
        ref = r.q(x) - r.mu(x)
        ref[-1] -= r.g(x[-1]) / grid.dx
        assert_allclose(m.sum(axis=0), ref, rtol=1e-12, atol=1e-12 * np.abs(m).max())

    def test_structure(self):
        m = sinko.assemble(Grid(10), CANON).matrix
        rest = m.copy()
        rest[0] = 0.0
        assert np.all(np.tril(rest, -2) == 0)
        assert np.all(np.triu(rest, 1) == 0)
        assert np.all(np.diag(m, -1) > 0)


class TestExact:
    def test_canonical_closed_form(self):
        x = np.array([0.0, 0.25, 0.5, 1.0])
        assert_allclose(sinko.exact_steady_state(CANON, x), exact_canon(x), rtol=1e-10)
        assert sinko.exact_steady_state(CANON, 0.0) == pytest.approx(1.0)
        assert sinko.exact_steady_state(CANON, 1.0) == pytest.approx(0.25)

    def test_no_decay_unit_growth(self):
        r = SinkoRates(Affine(0, 1.0), Affine(0, 1.0), Affine(0, 0))
        assert_allclose(sinko.exact_steady_state(r, [0.0, 0.3, 1.0]), 1.0)

    def test_violation_reports_integral(self):
        r = sinko_canonical(ParamPoint(0.1, 1, 1))
        with pytest.raises(NoSteadyStateError) as info:
            sinko.exact_steady_state(r, 0.5)
        assert info.value.value == pytest.approx(0.1 * math.log(2))

    def test_scaling(self):
        grid = Grid(50)
        m = sinko.assemble(grid, CANON).matrix
        u = project(exact_canon, grid).coeffs
        assert_allclose(m @ (3 * u), 3 * (m @ u), rtol=1e-13, atol=1e-13)


class TestNecessaryCondition:
    def test_canonical_is_one(self):
        assert sinko.necessary_condition(CANON, 1.0) == pytest.approx(1.0, abs=1e-10)

    def test_zero_renewal(self):
        assert sinko.necessary_condition(sinko_canonical(ParamPoint(0, 1, 1))) == 0.0

    def test_linear_in_a(self):
        p = ParamPoint(2 / math.log(2), 1, 1)
        assert sinko.necessary_condition(sinko_canonical(p)) == pytest.approx(2.0, rel=1e-10)

    @pytest.mark.parametrize("a, b, c, x_max", [(0.7, 0.4, 1.3, 1.0), (1.0, 2.0, 0.5, 3.0), (0.2, 0.9, 0.9, 2.0)])
    def test_general_closed_form(self, a, b, c, x_max):
        r = sinko_canonical(ParamPoint(a, b, c))
        assert sinko.necessary_condition(r, x_max) == pytest.approx(renewal_integral_closed(a, b, c, x_max), rel=1e-10)


class TestSteadyState:
    def test_canonical_found(self, sinko_op100):
        ss = sinko.steady_state(sinko_op100)
        assert ss is not None and ss.positive
        grid = sinko_op100.grid
        flux = grid.dx * float(CANON.q(grid.nodes) @ ss.state.coeffs)
        assert flux == pytest.approx(1.0, rel=1e-12)

    @pytest.mark.xfail(strict=True, reason="faithful discretisation gives about 0.02 at n = 100; see decisions ledger")
    def test_canonical_error_near_reported_value(self, sinko_op100):
        ss = sinko.steady_state(sinko_op100)
        assert 0.10 <= sup_error(ss.state, exact_canon) <= 0.18

    def test_canonical_error_first_order(self, sinko_op100):
        ss = sinko.steady_state(sinko_op100)
        err = sup_error(ss.state, exact_canon)
        assert 0.01 < err < 0.03

    def test_violating_rates_not_found(self):
        op = sinko.assemble(Grid(100), sinko_canonical(ParamPoint(0.1, 1, 1)))
        assert sinko.steady_state(op) is None
        s = linalg.singular_values(op.matrix)
        assert s[-1] / s[0] > 1e-3

    def test_residual_contract_when_exactly_balanced(self):
        grid = Grid(100)
        op0 = sinko.assemble(grid, CANON)
        a = SINKO_CANON.a / sinko.renewal_number(op0)
        op = sinko.assemble(grid, sinko_canonical(ParamPoint(a, 1, 1)))
        assert sinko.renewal_number(op) == pytest.approx(1.0, abs=1e-13)
        ss = sinko.steady_state(op)
        unit = ss.state.coeffs / np.linalg.norm(ss.state.coeffs)
        assert np.linalg.norm(op.matrix @ unit) <= 1e-8 * np.linalg.norm(op.matrix, 2)

    def test_degenerate_nullspace(self):
        # valid rates never give a rank-deficient generator of corank 2,
        # so hand the checker one directly
        op = sinko.SinkoOperator(Grid(3), CANON, np.diag([0.0, 0.0, -1.0]))
        with pytest.raises(DegenerateNullspaceError):
            sinko.steady_state(op, existence_tol=np.inf)

    def test_renewal_number_tracks_integral(self):
        for n in (50, 100, 200, 400):
            op = sinko.assemble(Grid(n), CANON)
            assert abs(sinko.renewal_number(op) - 1.0) < 0.2 / n


def test_convergence_slope():
    ns = [25, 50, 100, 200, 400]
    errs = []
    for n in ns:
        ss = sinko.steady_state(sinko.assemble(Grid(n), CANON))
        errs.append(sup_error(ss.state, exact_canon))
    slope = np.polyfit(np.log(ns), np.log(errs), 1)[0]
    assert slope == pytest.approx(-1.0, abs=0.25)


@pytest.mark.parametrize("n", [10, 50, 100])
def test_stable_when_renewal_below_removal(n):
    r = SinkoRates(Affine(0.2, 0.1), Affine(0.5, 1.0), Affine(0.0, 0.6))
    holds, _ = stability.sinko_condition(r, Grid(n))
    assert holds
    assert stability.classify(sinko.assemble(Grid(n), r).matrix).classification == stability.STABLE
