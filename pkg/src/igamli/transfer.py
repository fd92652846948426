"""Coarse-to-fine transfer operators between dyadic B-spline/NURBS levels.

`restriction_1d` builds the univariate matrix G expressing every coarse basis
function exactly as a combination of fine ones (one bisection step).  Small
levels are tabulated; general levels are assembled from repeating interior
stencils with fixed boundary rows (C^{p-1}) or from overlapping blocks (C^0).
NURBS operators R and the weight refinement W_fine = G^T W_coarse are derived
from G.  Higher-dimensional operators are Kronecker products of the 1D ones.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import UnsupportedCaseError
from .linalg import kron, prune
from .splines import C0, CPM1, _check_continuity

# ---------------------------------------------------------------------------
# Tabulated small-level matrices, C^{p-1}.
# ---------------------------------------------------------------------------

_G_CPM1_LEVEL2 = {
    2: np.array([[4, 2, 0, 0], [0, 2, 2, 0], [0, 0, 2, 4]]) / 4.0,
    3: np.array(
        [[2, 1, 0, 0, 0], [0, 1, 1, 0, 0], [0, 0, 1, 1, 0], [0, 0, 0, 1, 2]]
    ) / 2.0,
    4: np.array(
        [
            [2, 1, 0, 0, 0, 0],
            [0, 1, 1, 0, 0, 0],
            [0, 0, 1, 1, 0, 0],
            [0, 0, 0, 1, 1, 0],
            [0, 0, 0, 0, 1, 2],
        ]
    ) / 2.0,
}

_G_CPM1_LEVEL3 = {
    3: np.array(
        [
            [16, 8, 0, 0, 0, 0, 0],
            [0, 8, 12, 3, 0, 0, 0],
            [0, 0, 4, 10, 4, 0, 0],
            [0, 0, 0, 3, 12, 8, 0],
            [0, 0, 0, 0, 0, 8, 16],
        ]
    ) / 16.0,
    4: np.array(
        [
            [48, 24, 0, 0, 0, 0, 0, 0],
            [0, 24, 36, 9, 0, 0, 0, 0],
            [0, 0, 12, 30, 9, 0, 0, 0],
            [0, 0, 0, 9, 30, 12, 0, 0],
            [0, 0, 0, 0, 9, 36, 24, 0],
            [0, 0, 0, 0, 0, 0, 24, 48],
        ]
    ) / 48.0,
}

# General-level row patterns, C^{p-1}: p fixed boundary rows (row i starts at
# column i, except the first), then the repeating interior stencil at column
# 2i - p - 1 (1-based), mirrored at the other end.
_G_CPM1_TOP = {
    2: (np.array([4.0, 2.0]), np.array([2.0, 3.0, 1.0])),
    3: (
        np.array([16.0, 8.0]),
        np.array([8.0, 12.0, 3.0]),
        np.array([4.0, 11.0, 8.0, 2.0]),
    ),
    4: (
        np.array([48.0, 24.0]),
        np.array([24.0, 36.0, 9.0]),
        np.array([12.0, 33.0, 20.0, 4.0]),
        np.array([6.0, 25.0, 29.0, 15.0, 3.0]),
    ),
}

_G_CPM1_INTERIOR = {
    2: np.array([1.0, 3.0, 3.0, 1.0]),
    3: np.array([2.0, 8.0, 12.0, 8.0, 2.0]),
    4: np.array([3.0, 15.0, 30.0, 30.0, 15.0, 3.0]),
}

_G_CPM1_SCALE = {2: 4.0, 3: 16.0, 4: 48.0}

# C^0 blocks ((p+1) x (2p+1)), replicated with a one-entry overlap: a block
# ending at position (i, j) is followed by a block starting at (i, j).
_G_C0_BLOCK = {
    2: np.array([[4, 2, 1, 0, 0], [0, 2, 2, 2, 0], [0, 0, 1, 2, 4]]) / 4.0,
    3: np.array(
        [
            [8, 4, 2, 1, 0, 0, 0],
            [0, 4, 4, 3, 2, 0, 0],
            [0, 0, 2, 3, 4, 4, 0],
            [0, 0, 0, 1, 2, 4, 8],
        ]
    ) / 8.0,
    4: np.array(
        [
            [16, 8, 4, 2, 1, 0, 0, 0, 0],
            [0, 8, 8, 6, 4, 2, 0, 0, 0],
            [0, 0, 4, 6, 6, 6, 4, 0, 0],
            [0, 0, 0, 2, 4, 6, 8, 8, 0],
            [0, 0, 0, 0, 1, 2, 4, 8, 16],
        ]
    ) / 16.0,
}


@dataclass(frozen=True)
class RestrictionOperator:
    """Univariate restriction G (coarse dim x fine dim) for one bisection."""

    G: sp.csr_matrix
    degree: int
    continuity: str
    level: int  # fine level k; the operator maps level k to level k-1

    @property
    def shape(self):
        return self.G.shape


@dataclass
class WeightVectors:
    """Per-level NURBS weight vectors of one parametric direction."""

    weights: dict  # level -> positive 1d array

    def __post_init__(self):
        for k, w in self.weights.items():
            w = np.asarray(w, dtype=float)
            if np.any(w <= 0):
                raise ValueError(f"weights at level {k} must be positive")
            self.weights[k] = w

    def diagonal(self, level):
        return sp.diags(self.weights[level], format="csr")


def _restriction_cpm1(p, k):
    if k == 2:
        return _G_CPM1_LEVEL2[p]
    if k == 3 and p in _G_CPM1_LEVEL3:
        return _G_CPM1_LEVEL3[p]
    n_c = 2 ** (k - 2)
    n_f = 2 * n_c
    rows, cols = n_c + p, n_f + p
    G = np.zeros((rows, cols))
    top = _G_CPM1_TOP[p]
    interior = _G_CPM1_INTERIOR[p]
    for i in range(1, rows + 1):  # 1-based row index, mirroring the catalog
        if i <= p:
            pat = top[i - 1]
            start = 1 if i == 1 else i
            G[i - 1, start - 1 : start - 1 + len(pat)] = pat
        elif i <= rows - p:
            start = 2 * i - p - 1
            G[i - 1, start - 1 : start - 1 + len(interior)] = interior
        else:
            pat = top[rows - i][::-1]
            jj = rows + 1 - i
            start_m = 1 if jj == 1 else jj
            end = cols + 1 - start_m
            G[i - 1, end - len(pat) : end] = pat
    return G / _G_CPM1_SCALE[p]


def _restriction_c0(p, k):
    n_c = 2 ** (k - 2)
    block = _G_C0_BLOCK[p]
    rows, cols = p * n_c + 1, 2 * p * n_c + 1
    G = np.zeros((rows, cols))
    for b in range(n_c):
        G[b * p : b * p + p + 1, b * 2 * p : b * 2 * p + 2 * p + 1] = block
    return G


def restriction_1d(degree, continuity, level):
    """Restriction operator from fine level `level` to level `level` - 1.

    Parameters
    ----------
    degree : int
        Polynomial degree, one of 2, 3, 4.
    continuity : str
        ``"cpm1"`` or ``"c0"``.
    level : int
        Fine level k >= 2.

    Returns
    -------
    RestrictionOperator
        With G of shape (n_{k-1}+p) x (n_k+p) for ``cpm1`` and
        (p n_{k-1}+1) x (p n_k+1) for ``c0``; every column sums to one and
        coarse functions are reproduced exactly in the fine basis.
    """
    _check_continuity(continuity)
    if degree not in (2, 3, 4):
        raise UnsupportedCaseError(f"no restriction cataloged for degree {degree}")
    if level < 2:
        raise UnsupportedCaseError("restriction needs a fine level k >= 2")
    dense = (
        _restriction_cpm1(degree, level)
        if continuity == CPM1
        else _restriction_c0(degree, level)
    )
    return RestrictionOperator(prune(sp.csr_matrix(dense)), degree, continuity, level)


def refine_weights(G, w_coarse):
    """Fine-level weights W^k = G^T W^{k-1}; preserves the weight function."""
    G = G.G if isinstance(G, RestrictionOperator) else G
    w_coarse = np.asarray(w_coarse, dtype=float)
    if G.shape[0] != len(w_coarse):
        raise ValueError(f"dimension mismatch: G {G.shape}, weights {len(w_coarse)}")
    return G.T @ w_coarse


def nurbs_restriction(G, w_coarse):
    """NURBS restriction R with r_ij = w^{k-1}_i g_ij / w^k_j.

    Needs only the coarse-level weights; the fine weights are obtained by
    `refine_weights`.  For unit weights R equals G.
    """
    G = G.G if isinstance(G, RestrictionOperator) else G
    w_coarse = np.asarray(w_coarse, dtype=float)
    w_fine = refine_weights(G, w_coarse)
    if np.any(w_fine <= 0.0):
        raise RuntimeError("refined weights must stay positive")
    R = sp.diags(w_coarse) @ G @ sp.diags(1.0 / w_fine)
    return prune(R)


def tensorize(ops):
    """Kronecker product of per-direction operators (first factor slowest)."""
    mats = [op.G if isinstance(op, RestrictionOperator) else op for op in ops]
    if not 1 <= len(mats) <= 3:
        raise ValueError("tensorize expects 1 to 3 factors")
    out = sp.csr_matrix(mats[0])
    for M in mats[1:]:
        out = kron(out, M)
    return prune(out)


def restrict_interior(op, row_keep=None, col_keep=None):
    """Delete rows/columns outside the given index sets (None keeps all)."""
    A = sp.csr_matrix(op)
    if row_keep is not None:
        A = A[np.asarray(row_keep, dtype=int), :]
    if col_keep is not None:
        A = A[:, np.asarray(col_keep, dtype=int)]
    return prune(A)
