"""Least squares, orthogonal least squares and FROLS term selection.

The forward-regression orthogonal least squares (FROLS) algorithm greedily
selects candidate regressors by maximal error reduction ratio
ERR = g^2 (q^T q) / (y^T y), deflating the remaining candidates against each
selected orthogonalized column, and recovers the original-basis coefficients
by back-substitution of the unit upper-triangular system A beta = g.
"""

from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from math import comb

import numpy as np
from scipy.linalg import solve_triangular

__all__ = [
    "DesignMatrix",
    "OrthogonalDecomposition",
    "TermSelection",
    "VolterraSpec",
    "RankDeficiencyError",
    "DependentColumnError",
    "least_squares",
    "gram_schmidt",
    "frols",
    "frols_coefficients",
    "volterra_terms",
    "volterra_term_count",
]

DEPENDENCE_TOL = 1e-12


class RankDeficiencyError(ValueError):
    """The candidate matrix is rank deficient for a full-rank solve."""


class DependentColumnError(ValueError):
    """A column is numerically dependent on the ones before it."""

    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"column {column} is linearly dependent")


@dataclass
class DesignMatrix:
    """N x M candidate regressor matrix with human-readable term names."""

    columns: np.ndarray
    names: list

    def __post_init__(self):
        self.columns = np.asarray(self.columns, dtype=float)
        if self.columns.ndim != 2:
            raise ValueError("columns must be a 2-D array")
        if len(self.names) != self.columns.shape[1]:
            raise ValueError("one name per column required")
        norms = np.linalg.norm(self.columns, axis=0)
        if np.any(norms == 0.0):
            dead = [self.names[j] for j in np.flatnonzero(norms == 0.0)]
            raise ValueError(f"all-zero candidate columns: {dead}")

    @property
    def n_samples(self):
        return self.columns.shape[0]

    @property
    def n_terms(self):
        return self.columns.shape[1]


@dataclass
class OrthogonalDecomposition:
    """P = W A with W orthogonal columns and A unit upper triangular."""

    W: np.ndarray
    A: np.ndarray
    g: np.ndarray


@dataclass
class TermSelection:
    """Ordered FROLS selection with its ERR ledger and coefficients."""

    indices: list
    names: list
    err: np.ndarray
    coefficients: np.ndarray
    residual_variance: float
    status: str  # "converged" | "max_terms" | "dependent_exhausted"
    A: np.ndarray = field(repr=False, default=None)
    g: np.ndarray = field(repr=False, default=None)
    W: np.ndarray = field(repr=False, default=None)

    @property
    def total_err(self):
        return float(self.err.sum())


@dataclass
class VolterraSpec:
    """Lagged-input monomial expansion up to order ``max_order``."""

    max_lag: int
    max_order: int = 1
    include_constant: bool = True

    def __post_init__(self):
        if self.max_lag < 1:
            raise ValueError(f"max_lag must be >= 1, got {self.max_lag}")
        if self.max_order < 1:
            raise ValueError(f"max_order must be >= 1, got {self.max_order}")


def least_squares(P, y, allow_rank_deficient=False):
    """Solve min ||y - P theta||_2 via an orthogonal decomposition.

    Rank deficiency raises RankDeficiencyError unless
    ``allow_rank_deficient`` opts into the minimum-norm solution.
    """
    cols = P.columns if isinstance(P, DesignMatrix) else np.asarray(P, dtype=float)
    y = np.asarray(y, dtype=float)
    q, r = np.linalg.qr(cols)
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-10 * max(diag.max(), 1e-300):
        if not allow_rank_deficient:
            raise RankDeficiencyError(
                "design matrix is rank deficient; pass allow_rank_deficient=True "
                "for the minimum-norm solution"
            )
        return np.linalg.lstsq(cols, y, rcond=None)[0]
    return solve_triangular(r, q.T @ y)


def gram_schmidt(P, y=None, order=None):
    """Modified Gram-Schmidt factorization P[:, order] = W A.

    W has pairwise-orthogonal columns, A is unit upper triangular, and g
    holds the scalar projections of ``y`` onto each W column (zeros when no
    target is given).
    """
    cols = P.columns if isinstance(P, DesignMatrix) else np.asarray(P, dtype=float)
    if order is not None:
        cols = cols[:, list(order)]
    n, m = cols.shape
    W = cols.copy()
    A = np.eye(m)
    for j in range(m):
        v = W[:, j]
        for r in range(j):
            w_r = W[:, r]
            a = (w_r @ v) / (w_r @ w_r)
            A[r, j] = a
            v = v - a * w_r
        if np.linalg.norm(v) < DEPENDENCE_TOL * np.linalg.norm(cols[:, j]):
            raise DependentColumnError(j)
        W[:, j] = v
    if y is None:
        g = np.zeros(m)
    else:
        y = np.asarray(y, dtype=float)
        g = (W.T @ y) / np.einsum("ij,ij->j", W, W)
    return OrthogonalDecomposition(W=W, A=A, g=g)


def frols(P, y, rho=1e-6, max_terms=None):
    """Forward-regression orthogonal least squares term selection.

    At each step the remaining candidates (already deflated against every
    selected orthogonal column) are scored by ERR; the argmax is selected
    (ties go to the lowest candidate index).  Selection stops when
    1 - sum(err) <= rho, ``max_terms`` is reached, or no numerically
    independent candidate remains.
    """
    if not isinstance(P, DesignMatrix):
        P = DesignMatrix(np.asarray(P, dtype=float), [f"p{j}" for j in range(np.asarray(P).shape[1])])
    y = np.asarray(y, dtype=float)
    sigma = float(y @ y)
    if sigma == 0.0:
        raise ValueError("target vector y is all zero")
    m_total = P.n_terms
    if max_terms is None:
        max_terms = min(m_total, P.n_samples)
    orig_sq = np.einsum("ij,ij->j", P.columns, P.columns)

    resid = P.columns.copy()  # candidates deflated against selected columns
    available = np.ones(m_total, dtype=bool)
    coef = np.zeros((max_terms, m_total))  # MGS projection coefficients
    selected, err_list, g_list, w_cols = [], [], [], []
    status = "max_terms"

    for s in range(max_terms):
        q_sq = np.einsum("ij,ij->j", resid, resid)
        usable = available & (q_sq > (DEPENDENCE_TOL**2) * orig_sq)
        if not np.any(usable):
            status = "dependent_exhausted"
            break
        g_all = np.zeros(m_total)
        g_all[usable] = (y @ resid[:, usable]) / q_sq[usable]
        err_all = np.where(usable, g_all**2 * q_sq / sigma, -np.inf)
        ell = int(np.argmax(err_all))  # ties resolve to the lowest index

        selected.append(ell)
        err_list.append(float(err_all[ell]))
        g_list.append(float(g_all[ell]))
        w = resid[:, ell].copy()
        w_cols.append(w)
        available[ell] = False

        # Deflate the remaining candidates against the new orthogonal column.
        d = float(w @ w)
        proj = (w @ resid) / d
        coef[s] = proj
        resid = resid - np.outer(w, proj) * available  # keep selected cols intact
        if 1.0 - sum(err_list) <= rho:
            status = "converged"
            break

    m0 = len(selected)
    A = np.eye(m0)
    for s in range(m0):
        for r in range(s):
            A[r, s] = coef[r, selected[s]]
    g = np.asarray(g_list)
    err = np.asarray(err_list)
    beta = solve_triangular(A, g, unit_diagonal=True) if m0 else np.empty(0)
    W = np.column_stack(w_cols) if m0 else np.empty((P.n_samples, 0))
    resid_var = float((1.0 - err.sum()) * sigma / P.n_samples)
    return TermSelection(
        indices=selected,
        names=[P.names[j] for j in selected],
        err=err,
        coefficients=beta,
        residual_variance=resid_var,
        status=status,
        A=A,
        g=g,
        W=W,
    )


def frols_coefficients(selection):
    """Original-basis coefficients beta from A beta = g (back-substitution)."""
    if len(selection.indices) == 0:
        return np.empty(0)
    return solve_triangular(selection.A, selection.g, unit_diagonal=True)


def volterra_term_count(spec):
    """Number of candidate terms: sum_l C(M + l - 1, l) (+1 for the constant)."""
    count = sum(comb(spec.max_lag + l - 1, l) for l in range(1, spec.max_order + 1))
    return count + (1 if spec.include_constant else 0)


def volterra_terms(u, spec):
    """Candidate design matrix of unique lag-product monomials of ``u``.

    Rows cover k = max_lag .. len(u) - 1, so the target must be trimmed to
    ``y[max_lag:]``.  Terms are deduplicated across kernel permutations by
    enumerating non-decreasing lag tuples only.
    """
    u = np.asarray(u, dtype=float)
    m = spec.max_lag
    if u.size < m + 2:
        raise ValueError(f"series length {u.size} too short for max_lag {m}")
    n_rows = u.size - m
    lagged = {lag: u[m - lag : u.size - lag] for lag in range(1, m + 1)}
    columns, names = [], []
    if spec.include_constant:
        columns.append(np.ones(n_rows))
        names.append("1")
    for order in range(1, spec.max_order + 1):
        for lags in combinations_with_replacement(range(1, m + 1), order):
            col = np.ones(n_rows)
            for lag in lags:
                col = col * lagged[lag]
            columns.append(col)
            names.append("*".join(f"u(k-{lag})" for lag in lags))
    return DesignMatrix(np.column_stack(columns), names)
