import numpy as np
import pytest

from epichain import sysid
from epichain.sysid import (
    DependentColumnError,
    DesignMatrix,
    RankDeficiencyError,
    VolterraSpec,
)
from epichain.rng import substream


def random_design(n, m, seed, names=None):
    cols = substream(seed).normal(size=(n, m))
    return DesignMatrix(cols, names or [f"p{j}" for j in range(m)])


class TestDesignMatrix:
    def test_shape_accessors(self):
        dm = random_design(30, 4, 0)
        assert dm.n_samples == 30
        assert dm.n_terms == 4

    def test_name_count_mismatch(self):
        with pytest.raises(ValueError):
            DesignMatrix(np.ones((5, 2)), ["a"])

    def test_zero_column_rejected(self):
        cols = np.ones((5, 2))
        cols[:, 1] = 0.0
        with pytest.raises(ValueError):
            DesignMatrix(cols, ["a", "b"])


class TestLeastSquares:
    def test_recovers_exact_coefficients(self):
        dm = random_design(100, 3, 1)
        theta = np.array([2.0, -1.0, 0.5])
        y = dm.columns @ theta
        est = sysid.least_squares(dm, y)
        assert np.allclose(est, theta, atol=1e-10)

    def test_matches_lstsq_with_noise(self):
        dm = random_design(200, 4, 2)
        gen = substream(3)
        y = dm.columns @ np.array([1.0, 2.0, 3.0, 4.0]) + gen.normal(size=200)
        est = sysid.least_squares(dm, y)
        ref = np.linalg.lstsq(dm.columns, y, rcond=None)[0]
        assert np.allclose(est, ref, atol=1e-10)

    def test_rank_deficiency(self):
        cols = np.ones((20, 2))
        cols[:, 0] = np.arange(20.0) + 1.0
        cols[:, 1] = 2.0 * cols[:, 0]
        y = cols[:, 0]
        with pytest.raises(RankDeficiencyError):
            sysid.least_squares(cols, y)
        est = sysid.least_squares(cols, y, allow_rank_deficient=True)
        assert np.allclose(cols @ est, y, atol=1e-8)


class TestGramSchmidt:
    def test_factorization_properties(self):
        dm = random_design(60, 5, 4)
        dec = sysid.gram_schmidt(dm)
        # P = W A with orthogonal W and unit upper-triangular A.
        assert np.allclose(dec.W @ dec.A, dm.columns, atol=1e-10)
        gram = dec.W.T @ dec.W
        assert np.allclose(gram - np.diag(np.diag(gram)), 0.0, atol=1e-8)
        assert np.allclose(np.diag(dec.A), 1.0)
        assert np.allclose(np.tril(dec.A, -1), 0.0)

    def test_projections_reconstruct_target(self):
        dm = random_design(80, 4, 5)
        theta = np.array([1.0, -2.0, 0.5, 3.0])
        y = dm.columns @ theta
        dec = sysid.gram_schmidt(dm, y=y)
        assert np.allclose(dec.W @ dec.g, y, atol=1e-8)

    def test_column_order(self):
        dm = random_design(40, 3, 6)
        dec = sysid.gram_schmidt(dm, order=[2, 0, 1])
        assert np.allclose(dec.W @ dec.A, dm.columns[:, [2, 0, 1]], atol=1e-10)

    def test_dependent_column(self):
        cols = substream(7).normal(size=(30, 2))
        cols = np.column_stack([cols, cols[:, 0] + cols[:, 1]])
        with pytest.raises(DependentColumnError) as info:
            sysid.gram_schmidt(cols)
        assert info.value.column == 2


class TestFrols:
    def test_err_sums_to_explained_variance(self):
        dm = random_design(200, 6, 8)
        gen = substream(9)
        y = dm.columns @ gen.normal(size=6) + 0.1 * gen.normal(size=200)
        sel = sysid.frols(dm, y, max_terms=6)
        fit = dm.columns[:, sel.indices] @ sel.coefficients
        explained = 1.0 - ((y - fit) @ (y - fit)) / (y @ y)
        assert sel.total_err == pytest.approx(explained, abs=1e-10)

    def test_noiseless_exact_recovery(self):
        # Three active terms among many irrelevant candidates.
        dm = random_design(300, 10, 10)
        true_idx = [1, 4, 7]
        theta = np.array([2.0, -1.5, 0.8])
        y = dm.columns[:, true_idx] @ theta
        sel = sysid.frols(dm, y, rho=1e-10)
        assert sorted(sel.indices) == true_idx
        assert sel.status == "converged"
        order = [sel.indices.index(j) for j in true_idx]
        assert np.allclose(sel.coefficients[order], theta, atol=1e-8)
        assert sel.total_err >= 1.0 - 1e-10

    def test_coefficients_match_least_squares_on_selected(self):
        dm = random_design(150, 5, 11)
        gen = substream(12)
        y = dm.columns @ gen.normal(size=5) + gen.normal(size=150)
        sel = sysid.frols(dm, y, max_terms=5)
        ls = sysid.least_squares(dm.columns[:, sel.indices], y)
        assert np.allclose(sel.coefficients, ls, atol=1e-8)
        assert np.allclose(sysid.frols_coefficients(sel), sel.coefficients)

    def test_max_terms_stops_selection(self):
        dm = random_design(100, 8, 13)
        y = dm.columns @ substream(14).normal(size=8)
        sel = sysid.frols(dm, y, rho=1e-12, max_terms=3)
        assert len(sel.indices) == 3
        assert sel.status == "max_terms"

    def test_duplicate_columns_exhaust(self):
        col = substream(15).normal(size=50)
        cols = np.column_stack([col, 2.0 * col, -col])
        y = 3.0 * col + 0.5  # constant offset keeps some residual
        sel = sysid.frols(DesignMatrix(cols, ["a", "b", "c"]), y, rho=1e-15)
        # Only one independent direction exists; selection stops there.
        assert len(sel.indices) == 1
        assert sel.status == "dependent_exhausted"

    def test_first_pick_maximizes_err(self):
        dm = random_design(120, 6, 16)
        y = dm.columns @ substream(17).normal(size=6)
        sel = sysid.frols(dm, y, max_terms=1)
        w = dm.columns
        errs = (y @ w) ** 2 / (np.einsum("ij,ij->j", w, w) * (y @ y))
        assert sel.indices[0] == int(np.argmax(errs))
        assert sel.err[0] == pytest.approx(errs.max())

    def test_zero_target_rejected(self):
        dm = random_design(20, 2, 18)
        with pytest.raises(ValueError):
            sysid.frols(dm, np.zeros(20))

    def test_residual_variance(self):
        dm = random_design(400, 3, 19)
        gen = substream(20)
        y = dm.columns @ np.array([1.0, 1.0, 1.0]) + gen.normal(size=400)
        sel = sysid.frols(dm, y, max_terms=3)
        fit = dm.columns[:, sel.indices] @ sel.coefficients
        assert sel.residual_variance == pytest.approx(
            ((y - fit) @ (y - fit)) / 400.0, rel=1e-8
        )


class TestVolterra:
    def test_term_count_formula(self):
        spec = VolterraSpec(max_lag=5, max_order=2)
        # 5 linear + C(6, 2) = 15 quadratic + constant
        assert sysid.volterra_term_count(spec) == 21
        assert sysid.volterra_term_count(VolterraSpec(3, 1, include_constant=False)) == 3

    def test_matrix_matches_count_and_rows(self):
        u = substream(21).normal(size=100)
        spec = VolterraSpec(max_lag=5, max_order=2)
        dm = sysid.volterra_terms(u, spec)
        assert dm.n_terms == 21
        assert dm.n_samples == 95

    def test_column_values(self):
        u = np.arange(1.0, 11.0)
        dm = sysid.volterra_terms(u, VolterraSpec(max_lag=2, max_order=2))
        names = dm.names
        assert names[0] == "1"
        j = names.index("u(k-1)")
        assert np.array_equal(dm.columns[:, j], u[1:-1])
        j = names.index("u(k-2)")
        assert np.array_equal(dm.columns[:, j], u[:-2])
        j = names.index("u(k-1)*u(k-2)")
        assert np.array_equal(dm.columns[:, j], u[1:-1] * u[:-2])

    def test_no_duplicate_terms(self):
        u = substream(22).normal(size=50)
        dm = sysid.volterra_terms(u, VolterraSpec(max_lag=4, max_order=3))
        assert len(set(dm.names)) == dm.n_terms

    def test_series_too_short(self):
        with pytest.raises(ValueError):
            sysid.volterra_terms(np.ones(5), VolterraSpec(max_lag=4))

    def test_validation(self):
        with pytest.raises(ValueError):
            VolterraSpec(max_lag=0)
        with pytest.raises(ValueError):
            VolterraSpec(max_lag=2, max_order=0)

    def test_identifies_generating_terms(self):
        gen = substream(23)
        u = gen.normal(size=505)
        spec = VolterraSpec(max_lag=5, max_order=2)
        dm = sysid.volterra_terms(u, spec)
        active = ["u(k-1)", "u(k-3)", "u(k-2)*u(k-2)"]
        idx = [dm.names.index(n) for n in active]
        y = dm.columns[:, idx] @ np.array([0.8, -0.5, 0.3])
        sel = sysid.frols(dm, y, rho=1e-8)
        assert sorted(sel.names) == sorted(active)
