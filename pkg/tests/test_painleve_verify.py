import dataclasses
import json
from fractions import Fraction

import mpmath as mp
import pytest

from hankel_painleve import painleve_verify as pv
from hankel_painleve.errors import InsufficientPrecisionError
from hankel_painleve.painleve_verify import (
    build_stencil,
    chebyshev_grid,
    diff_relation_residuals,
    export_painleve_csv,
    hankel_sigma,
    numeric_derivative,
    painleve_matrix,
    painleve_report,
    prop_residuals,
    pvi_nu,
    sigma_constants,
    sigma_pvi_residual,
    sn_mu,
    sn_pvi_residual,
    sn_residue_residual,
    sod_residual,
    sod_terms,
)
from hankel_painleve.report import FAIL, PASS, SINGULAR, SKIPPED, term_normalized
from hankel_painleve.weight_moments import PrecisionContext, WeightParams, to_mpf
from conftest import stencil_for

HALF = Fraction(1, 2)
STANDARD = WeightParams(1, 1, 1, 1, 1, HALF)
SMOOTH = WeightParams(1, 2, 0, 1, 0, "0.4")
JUMP_ONLY = WeightParams(1, 2, 1, 0, 1, "0.7")


def fr(*vals):
    return tuple(Fraction(v) for v in vals)


class TestFiniteDifferences:
    def test_first_derivative_of_square(self, work):
        h, t0 = mp.mpf("0.01"), mp.mpf("0.3")
        vals = [(t0 + k * h) ** 2 for k in range(-2, 3)]
        assert abs(numeric_derivative(vals, h, 1)[0] - 2 * t0) < mp.mpf(10) ** -100

    def test_second_derivative_of_cube(self, work):
        h, t0 = mp.mpf("0.01"), mp.mpf("0.3")
        vals = [(t0 + k * h) ** 3 for k in range(-2, 3)]
        assert abs(numeric_derivative(vals, h, 2)[0] - 6 * t0) < mp.mpf(10) ** -100

    def test_smooth_function_on_micro_step(self, prec, work):
        h, t0 = prec.fd_step, mp.mpf("0.3")
        hm = mp.mpf(h.numerator) / h.denominator
        vals = [mp.exp(t0 + k * hm) for k in range(-2, 3)]
        tol = mp.mpf(10) ** -prec.guard_digits
        assert abs(numeric_derivative(vals, h, 1, prec)[0] - mp.exp(t0)) < tol
        assert abs(numeric_derivative(vals, h, 2, prec)[0] - mp.exp(t0)) < tol

    def test_policy_rejects_step_below_precision(self, work):
        prec = PrecisionContext(precision_bits=200, quad_rel_tol=1e-25, fd_step=Fraction(1, 10**8))
        with pytest.raises(InsufficientPrecisionError):
            numeric_derivative([mp.mpf(0)] * 5, Fraction(1, 10**40), 2, prec)

    def test_policy_rejects_coarse_step(self, prec, work):
        with pytest.raises(ValueError, match="coarse"):
            numeric_derivative([mp.mpf(0)] * 5, Fraction(1, 10), 1, prec)

    def test_argument_checks(self, work):
        with pytest.raises(ValueError):
            numeric_derivative([0] * 5, 1, 3)
        with pytest.raises(ValueError):
            numeric_derivative([0] * 4, 1, 1)

    def test_chebyshev_grid(self):
        grid = chebyshev_grid()
        assert len(grid) == 9 and all(isinstance(t, Fraction) for t in grid)
        assert Fraction(1, 10) < grid[0] < grid[-1] < Fraction(9, 10)
        assert grid[4] == HALF
        assert all(abs(a + b - 1) < Fraction(1, 10**19) for a, b in zip(grid, reversed(grid)))


class TestParameters:
    def test_shift_constants(self):
        assert sigma_constants(2, WeightParams(1, 2, 3, 1, 1, HALF)) == (Fraction(-73, 4), Fraction(41, 4))

    def test_sigma_form_parameters(self):
        assert pvi_nu(2, WeightParams(1, 2, 3, 1, 1, HALF)) == fr("3/2", "1/2", "7/2", "13/2")

    def test_sn_parameters(self):
        assert sn_mu(2, WeightParams(1, 2, 3, 1, 1, HALF)) == fr("121/2", "-1/2", 2, -4)
        assert sn_mu(2, SMOOTH)[3] == HALF


class TestStencil:
    def test_neighbours_reuse_centre_counts(self, work):
        st = stencil_for(STANDARD, 4)
        assert [c.params.t - st.t for c in st.cells] == [k * st.h for k in (-2, -1, 0, 1, 2)]
        assert all(c.node_counts == st.center.node_counts for c in st.cells)

    def test_standing_assumptions(self, prec):
        with pytest.raises(ValueError, match="gamma = 0 requires B = 0"):
            build_stencil(WeightParams(1, 1, 0, 1, 1, HALF), prec, 3)


class TestHankelSigma:
    def test_two_routes_agree(self, work):
        sig = hankel_sigma(3, [stencil_for(STANDARD, 4)])
        assert sig.discrepancy[0] < mp.mpf(10) ** -25
        assert sig.c1 == sigma_constants(3, STANDARD)[0]

    def test_index_checks(self, work):
        with pytest.raises(ValueError):
            hankel_sigma(5, [stencil_for(STANDARD, 4)])
        with pytest.raises(ValueError):
            diff_relation_residuals(4, stencil_for(STANDARD, 4))


class TestRelations:
    @pytest.mark.parametrize("params", [STANDARD, SMOOTH, JUMP_ONLY], ids=["standard", "smooth", "jump_only"])
    def test_differential_relations(self, params, work):
        st = stencil_for(params, 4)
        for n in range(1, 4):
            rep = diff_relation_residuals(n, st)
            assert rep.passed and rep.worst() < mp.mpf(10) ** -25, rep.to_json()

    @pytest.mark.parametrize("params", [STANDARD, SMOOTH, JUMP_ONLY], ids=["standard", "smooth", "jump_only"])
    def test_proposition_relations(self, params, work):
        st = stencil_for(params, 4)
        for n in range(1, 4):
            rep = prop_residuals(n, st)
            assert rep.passed and rep.worst() < mp.mpf(10) ** -25, rep.to_json()

    def test_corrupted_r_fails(self, work):
        st = stencil_for(STANDARD, 4)
        cells = []
        for c in st.cells:
            r = list(c.aux.r)
            r[1] += mp.mpf(10) ** -10 * to_mpf(c.params.t)
            cells.append(dataclasses.replace(c, aux=dataclasses.replace(c.aux, r=tuple(r))))
        rep = diff_relation_residuals(1, dataclasses.replace(st, cells=tuple(cells)))
        assert rep["re"].status == FAIL
        assert mp.mpf(10) ** -12 < rep["re"].residual < mp.mpf(10) ** -9


class TestEquations:
    def test_second_order_example(self, work):
        sig = hankel_sigma(3, [stencil_for(STANDARD, 4)])
        assert sod_residual(3, HALF, sig) < mp.mpf(10) ** -20

    def test_second_order_jump_only(self, work):
        sig = hankel_sigma(2, [stencil_for(JUMP_ONLY, 4)])
        assert sod_residual(2, JUMP_ONLY.t, sig) < mp.mpf(10) ** -20

    def test_second_order_needs_second_derivative(self, work):
        sig = hankel_sigma(3, [stencil_for(STANDARD, 4)])
        terms = sod_terms(3, to_mpf(HALF), sig.Hn[0], sig.Hn_d1[0], 0, STANDARD)
        assert term_normalized(terms, pv.ODE_FLOOR)[0] > mp.mpf(10) ** -3

    @pytest.mark.parametrize("params", [WeightParams(1, 2, 3, 1, 1, "0.3"), SMOOTH], ids=["generic", "smooth"])
    def test_sigma_form(self, params, work):
        sig = hankel_sigma(2, [stencil_for(params, 4)])
        assert sigma_pvi_residual(2, params.t, sig) < mp.mpf(10) ** -20

    def test_sigma_form_parameter_sensitivity(self, work):
        params = WeightParams(1, 2, 3, 1, 1, "0.3")
        sig = hankel_sigma(2, [stencil_for(params, 4)])
        nu = list(pvi_nu(2, params))
        nu[3] += 1
        assert sigma_pvi_residual(2, params.t, sig, nu) > mp.mpf(10) ** -3

    def test_sn_equation(self, work):
        params = WeightParams(1, 2, 3, 1, 1, "0.3")
        sig = hankel_sigma(2, [stencil_for(params, 4)])
        assert sn_pvi_residual(2, params.t, sig) < mp.mpf(10) ** -15
        m1, m2, m3, m4 = sn_mu(2, params)
        assert sn_pvi_residual(2, params.t, sig, (m1, m3, m2, m4)) > mp.mpf(10) ** -3

    def test_sn_singular_without_t_dependence(self, work):
        sig = hankel_sigma(2, [stencil_for(SMOOTH, 4)])
        assert sn_pvi_residual(2, SMOOTH.t, sig) is None
        rep = painleve_report(2, stencil_for(SMOOTH, 4))
        assert rep["sn_pvi"].status == SINGULAR and rep.passed and not rep.skipped
        assert rep["sn_residue"].residual < mp.mpf(10) ** -15

    def test_symmetric_weight_crosses_pole(self, work):
        # alpha = beta, B = 0 and t = 1/2 is symmetric under x -> 1 - x, which forces S_n = t
        params = WeightParams(1, 1, "5/2", 1, 0, "1/2")
        st = stencil_for(params, 4)
        sig = hankel_sigma(2, [st])
        assert sn_pvi_residual(2, params.t, sig) is None
        assert sn_residue_residual(2, params.t, sig) < mp.mpf(10) ** -15
        m1, m2, m3, m4 = sn_mu(2, params)
        assert sn_residue_residual(2, params.t, sig, (m1, m2, m3, m4 + 1)) > mp.mpf(10) ** -3
        rep = painleve_report(2, st)
        assert rep["sn_pvi"].status == SINGULAR and rep["sn_residue"].status == PASS and rep.passed

    def test_residue_absent_off_crossing(self, work):
        sig = hankel_sigma(2, [stencil_for(STANDARD, 4)])
        assert sn_residue_residual(2, STANDARD.t, sig) is None
        assert "sn_residue" not in painleve_report(2, stencil_for(STANDARD, 4)).entries

    def test_wrong_point(self, work):
        sig = hankel_sigma(2, [stencil_for(STANDARD, 4)])
        with pytest.raises(ValueError):
            sod_residual(3, HALF, sig)

    def test_truncation_error_scales_with_step_to_fourth(self, work):
        residuals = []
        for h in (Fraction(1, 10**20), Fraction(1, 2 * 10**20)):
            prec = PrecisionContext(fd_step=h)
            st = build_stencil(WeightParams(1, 2, 3, 1, 1, "0.3"), prec, 3)
            with prec.workprec():
                residuals.append(sod_residual(2, st.t, hankel_sigma(2, [st])))
        assert 10 < residuals[0] / residuals[1] < 25


class TestReport:
    def test_full_report(self, work):
        rep = painleve_report(2, stencil_for(STANDARD, 4))
        assert set(rep.entries) == set(pv.DIFF_NAMES + pv.PROP_NAMES + pv.ODE_NAMES)
        assert all(e.status == PASS for _, e in rep)

    def test_degenerate_cell_skipped(self, monkeypatch, work):
        monkeypatch.setattr(pv, "_degenerate", lambda n, st: "forced underflow")
        rep = painleve_report(2, stencil_for(STANDARD, 4))
        assert all(e.status == SKIPPED for _, e in rep) and rep.skipped and not rep.passed

    def test_matrix_skips_on_precision_failure(self, monkeypatch, prec, work):
        def refuse(*args, **kwargs):
            raise InsufficientPrecisionError("forced", 2)

        monkeypatch.setattr(pv, "build_stencil", refuse)
        matrix = painleve_matrix(STANDARD, prec, [1, 2], [HALF])
        assert len(matrix) == 2 and all(rep.skipped for _, _, rep in matrix)

    def test_matrix_and_csv(self, prec, work):
        matrix = painleve_matrix(STANDARD, prec, [1, 2], [Fraction(2, 5), Fraction(3, 5)])
        assert [(n, t) for n, t, _ in matrix] == [(1, Fraction(2, 5)), (2, Fraction(2, 5)), (1, Fraction(3, 5)), (2, Fraction(3, 5))]
        assert all(rep.passed for _, _, rep in matrix)
        lines = export_painleve_csv(STANDARD, prec, matrix).splitlines()
        assert json.loads(lines[0])["kind"] == "painleve_residuals"
        assert lines[1] == "alpha,beta,gamma,A,B,n,t,identity,residual,pass"
        assert len(lines) == 2 + 4 * len(pv.DIFF_NAMES + pv.PROP_NAMES + pv.ODE_NAMES)
