"""Hierarchical two-level splittings and their quality metrics.

The complement operator T selects fine-level combinations spanning a
complement of the coarse space, so that J = [T; G] is square and invertible
and the congruence J A J^T exposes the coarse Galerkin matrix as its (2,2)
block.  Two cataloged choices of T exist per degree/continuity; quality is
measured by the strengthened-CBS constant gamma^2 of the block splitting and
by the condition number of the (1,1) block.
"""

import warnings
from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, SplittingError, UnsupportedCaseError
from .linalg import kron, lanczos_extreme, prune
from .splines import C0, CPM1, _check_continuity, space_dim
from .transfer import RestrictionOperator

# Blocks of the first/second choice complement operators.  C^{p-1} blocks are
# 2 x (p+4), consecutive blocks shifted by (2 rows, 4 columns); C^0 blocks
# are p x (2p+1), shifted by (p rows, 2p columns).
_M1_CPM1 = {
    2: [[0, 1, -1, 0, 0, 0], [0, 0, 0, 1, -1, 0]],
    3: [[0, -1 / 2, 3 / 4, -1 / 2, 0, 0, 0], [0, 0, 0, -1 / 2, 3 / 4, -1 / 2, 0]],
    4: [
        [0, 1 / 2, -1, 1, -1 / 2, 0, 0, 0],
        [0, 0, 0, 1 / 2, -1, 1, -1 / 2, 0],
    ],
}

_M2_CPM1 = {
    2: [[-1 / 2, 1, -1, 1 / 2, 0, 0], [0, 0, -1 / 2, 1, -1, 1 / 2]],
    3: [
        [1 / 8, -1 / 2, 3 / 4, -1 / 2, 1 / 8, 0, 0],
        [0, 0, 1 / 8, -1 / 2, 3 / 4, -1 / 2, 1 / 8],
    ],
    # no distinct second choice is cataloged for degree 4 with C^{p-1}
}

_M1_C0 = {
    2: [[0, 1, -1 / 4, 0, 0], [0, 0, 1, -1 / 4, 0]],
    3: [
        [0, 1, -1, 0, 0, 0, 0],
        [0, 0, 0, 1 / 2, -1 / 2, 0, 0],
        [0, 0, 0, 0, 1, -1, 0],
    ],
    4: [
        [0, -2 / 3, 5 / 4, 0, 0, 0, 0, 0, 0],
        [0, 0, -2 / 3, 5 / 4, 0, 0, 0, 0, 0],
        [0, 0, 0, 0, 0, 5 / 4, -2 / 3, 0, 0],
        [0, 0, 0, 0, 0, 0, 5 / 4, -2 / 3, 0],
    ],
}

_M2_C0 = {
    2: [[-1 / 4, 1, -1 / 4, 0, 0], [0, 0, -1 / 4, 1, -1 / 4]],
    3: [
        [0, -1 / 2, 1 / 2, 0, 0, 0, 0],
        [0, 0, -1 / 4, 1 / 10, -1 / 4, 0, 0],
        [0, 0, 0, 0, 1 / 2, -1 / 2, 0],
    ],
    4: [
        [0, -5 / 9, 1, -5 / 9, 0, 0, 0, 0, 0],
        [0, 0, -5 / 9, 1, -5 / 9, 0, 0, 0, 0],
        [0, 0, 0, 0, -5 / 9, 1, -5 / 9, 0, 0],
        [0, 0, 0, 0, 0, -5 / 9, 1, -5 / 9, 0],
    ],
}


@dataclass(frozen=True)
class ComplementOperator:
    """Univariate complement operator T ((fine dim - coarse dim) x fine dim)."""

    T: sp.csr_matrix
    degree: int
    continuity: str
    level: int
    choice: int

    @property
    def shape(self):
        return self.T.shape


@dataclass
class HierarchicalBlocks:
    """2x2 block form of J A J^T with the coarse Galerkin matrix last."""

    A11: sp.csr_matrix
    A12: sp.csr_matrix
    A21: sp.csr_matrix
    A22: sp.csr_matrix


def _block_for(degree, continuity, choice):
    table = {
        (CPM1, 1): _M1_CPM1,
        (CPM1, 2): _M2_CPM1,
        (C0, 1): _M1_C0,
        (C0, 2): _M2_C0,
    }[(continuity, choice)]
    if degree not in table:
        raise UnsupportedCaseError(
            f"no choice-{choice} complement cataloged for degree {degree} {continuity}"
        )
    return np.asarray(table[degree], dtype=float)


def complement_1d(degree, continuity, level, choice=1):
    """Hierarchical complement operator for the pair (level-1, level).

    Block-structured: 2-row blocks of width p+4 overlapping p columns for
    ``cpm1`` (needs level >= 3 so whole blocks fit), p-row blocks of width
    2p+1 overlapping one column for ``c0`` (level >= 2).

    Raises
    ------
    UnsupportedCaseError
        For combinations without a cataloged block (notably the second
        choice for degree 4 with ``cpm1``) or levels too coarse to tile.
    """
    _check_continuity(continuity)
    if degree not in (2, 3, 4):
        raise UnsupportedCaseError(f"no complement cataloged for degree {degree}")
    if choice not in (1, 2):
        raise ValueError("choice must be 1 or 2")
    block = _block_for(degree, continuity, choice)
    n_c = 2 ** (level - 2) if level >= 2 else 0
    fine_dim = space_dim(degree, level, continuity) if level >= 2 else 0
    coarse_dim = space_dim(degree, level - 1, continuity) if level >= 2 else 0
    rows = fine_dim - coarse_dim
    if continuity == CPM1:
        if level < 3:
            raise UnsupportedCaseError(
                "cpm1 complement blocks need level >= 3 (two rows per block)"
            )
        n_blocks = n_c // 2
        rstride, cstride = 2, 4
    else:
        if level < 2:
            raise UnsupportedCaseError("c0 complement needs level >= 2")
        n_blocks = n_c
        rstride, cstride = degree, 2 * degree
    T = np.zeros((rows, fine_dim))
    bh, bw = block.shape
    for b in range(n_blocks):
        T[b * rstride : b * rstride + bh, b * cstride : b * cstride + bw] = block
    if n_blocks * rstride + (bh - rstride) != rows:
        raise SplittingError("complement blocks do not tile the fine dimension")
    return ComplementOperator(prune(sp.csr_matrix(T)), degree, continuity, level, choice)


def interior_complement(op, fine_interior):
    """Restrict T to interior fine columns; rows losing all entries are
    dropped (the dimension invariant is re-checked by build_transform)."""
    T = op.T if isinstance(op, ComplementOperator) else sp.csr_matrix(op)
    T = prune(T[:, np.asarray(fine_interior, dtype=int)])
    keep = np.diff(T.indptr) > 0
    if not np.all(keep):
        T = T[np.nonzero(keep)[0], :]
    return T


def build_transform(pairs, check=None):
    """Square transform J from per-direction (T_interior, G_interior) pairs.

    J is the Kronecker product of the per-direction stacks [T; G], with rows
    reordered so that every row containing at least one complement factor
    precedes all pure-coarse rows; the trailing block then equals the
    tensorized coarse restriction exactly.

    Returns
    -------
    J : csr_matrix
    n_complement : int
        Number of leading (complement) rows.
    """
    stacks, flags = [], []
    for T, G in pairs:
        T = T.T if isinstance(T, ComplementOperator) else T
        G = G.G if isinstance(G, RestrictionOperator) else G
        if T.shape[0] + G.shape[0] != T.shape[1] or G.shape[1] != T.shape[1]:
            raise SplittingError(
                f"stack [T; G] is not square: {T.shape} over {G.shape}"
            )
        stacks.append(sp.vstack([T, G], format="csr"))
        flags.append(np.arange(T.shape[0] + G.shape[0]) < T.shape[0])
    J = stacks[0]
    for s in stacks[1:]:
        J = kron(J, s)
    mask = reduce(lambda a, b: np.logical_or.outer(a, b).ravel(), flags)
    perm = np.concatenate([np.nonzero(mask)[0], np.nonzero(~mask)[0]])
    J = prune(J[perm, :])
    n_complement = int(mask.sum())
    if check is None:
        check = J.shape[0] <= 2500
    if check:
        smin = smallest_singular_value(J)
        if smin <= 1e-8:
            raise SplittingError(f"transform close to singular (sigma_min={smin:.2e})")
    return J, n_complement


def smallest_singular_value(J):
    """Smallest singular value (dense SVD when small, else inverse power)."""
    n = J.shape[0]
    if n <= 2500:
        return float(np.linalg.svd(J.toarray(), compute_uv=False)[-1])
    lu = spla.splu(sp.csc_matrix(J))
    lut = spla.splu(sp.csc_matrix(J.T))
    est = lanczos_extreme(
        lambda v: lu.solve(lut.solve(v)), n=n, which="largest", tol=1e-4, seed=3
    )
    return float(1.0 / np.sqrt(est.value))


def hb_blocks(A, J, coarse_count):
    """Blocks of J A J^T split with the coarse DOFs numbered last.

    A21 is stored as the exact transpose of A12, so the hierarchical matrix
    is symmetric by construction; A22 is the coarse Galerkin matrix.
    """
    n = J.shape[0]
    n1 = n - coarse_count
    T = J[:n1, :]
    G = J[n1:, :]
    TA = prune(T @ A)
    A11 = prune(TA @ T.T)
    A12 = prune(TA @ G.T)
    A22 = prune((G @ A) @ G.T)
    return HierarchicalBlocks(A11, A12, prune(A12.T.tocsr()), A22)


def cbs_gamma_sq(blocks, tol=1e-4, max_steps=300, seed=0):
    """Strengthened-CBS constant gamma^2 of a hierarchical 2x2 splitting.

    Computed as the largest eigenvalue of A22^{-1} A21 A11^{-1} A12, i.e.
    1 - mu_min of the Schur-complement pencil S v = mu A22 v, by Lanczos in
    the A22 inner product with direct inner solves.
    """
    if blocks.A12.nnz == 0:
        return 0.0
    lu11 = spla.splu(sp.csc_matrix(blocks.A11))
    lu22 = spla.splu(sp.csc_matrix(blocks.A22))
    A12, A21, A22 = blocks.A12, blocks.A21, blocks.A22

    def apply_op(v):
        return lu22.solve(A21 @ lu11.solve(A12 @ v))

    est = lanczos_extreme(
        apply_op,
        n=A22.shape[0],
        which="largest",
        inner=lambda v: A22 @ v,
        tol=tol,
        max_steps=max_steps,
        seed=seed,
    )
    if not est.converged:
        warnings.warn(
            f"gamma^2 Lanczos stopped at tol {est.achieved_tol:.2e}", RuntimeWarning
        )
    return float(est.value)


def cond_a11(blocks_or_matrix, tol=1e-4, max_steps=300, seed=0):
    """Spectral condition number of the complement block A11."""
    A11 = (
        blocks_or_matrix.A11
        if isinstance(blocks_or_matrix, HierarchicalBlocks)
        else blocks_or_matrix
    )
    top = lanczos_extreme(A11, which="largest", tol=tol, max_steps=max_steps, seed=seed)
    lu = spla.splu(sp.csc_matrix(A11))
    bot = lanczos_extreme(
        lu.solve, n=A11.shape[0], which="largest", tol=tol, max_steps=max_steps, seed=seed
    )
    if not (top.converged and bot.converged):
        warnings.warn("condition-number Lanczos not fully converged", RuntimeWarning)
    return float(top.value * bot.value)


def optimality_range(gamma_sq, tau, form="multiplicative"):
    """Admissible stabilization-degree interval (lower, upper) for given
    gamma^2 and coarsening factor tau; the caller picks an integer strictly
    inside.  An empty interval (lower >= tau) means no optimal-order degree
    exists for this splitting."""
    if not 0.0 <= gamma_sq < 1.0:
        raise ConfigurationError(f"gamma_sq must be in [0, 1), got {gamma_sq}")
    if tau <= 1.0:
        raise ConfigurationError(f"tau must exceed 1, got {tau}")
    if form == "multiplicative":
        lower = 1.0 / np.sqrt(1.0 - gamma_sq)
    elif form == "additive":
        g = np.sqrt(gamma_sq)
        lower = np.sqrt((1.0 + g) / (1.0 - g))
    else:
        raise ConfigurationError(f"unknown form {form!r}")
    return float(lower), float(tau)


def admissible_nus(lower, upper):
    """Integers strictly inside the optimality interval (may be empty)."""
    lo = int(np.floor(lower)) + 1
    hi = int(np.ceil(upper)) - 1
    return list(range(max(lo, 1), hi + 1))
