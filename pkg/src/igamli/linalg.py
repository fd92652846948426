"""Sparse kernels shared by all modules.

CSR matrices are plain `scipy.sparse.csr_matrix` values, kept canonical
(sorted, duplicate-free, entries below 1e-15 pruned) by `prune`.  The module
provides the SpMV/triple-product/Kronecker primitives, a zero-fill ILU(0)
factorization with numba-compiled sweeps, dense LU for coarsest solves,
Lanczos extreme-eigenvalue estimation with full reorthogonalization, and the
PCG/FCG drivers used by the outer and inner AMLI iterations.
"""

import json
import time
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp

from .errors import FactorizationError

PRUNE_TOL = 1e-15


def prune(A, tol=PRUNE_TOL):
    """Canonical CSR: sorted unique column indices, tiny entries dropped."""
    A = sp.csr_matrix(A)
    A.sum_duplicates()
    A.data[np.abs(A.data) < tol] = 0.0
    A.eliminate_zeros()
    A.sort_indices()
    return A


def spmv(A, x):
    """Sparse matrix-vector product y = A x."""
    if A.shape[1] != len(x):
        raise ValueError(f"dimension mismatch: {A.shape} @ {len(x)}")
    return A @ x


def triple_product(P, A, Q):
    """Sparse triple product P A Q^T."""
    if P.shape[1] != A.shape[0] or A.shape[1] != Q.shape[1]:
        raise ValueError(
            f"dimension mismatch in triple product: {P.shape}, {A.shape}, {Q.shape}"
        )
    return prune(P @ A @ Q.T)


def kron(A, B):
    """Kronecker product, row-major ordering (first factor varies slowest)."""
    return prune(sp.kron(sp.csr_matrix(A), sp.csr_matrix(B), format="csr"))


def dense_lu_solve(A, b):
    """Direct solve of a (small) dense system by LU with partial pivoting."""
    return DenseLu(A).solve(b)


class DenseLu:
    """LU factorization of a dense(ified) matrix, reusable for many solves."""

    def __init__(self, A):
        M = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
        if M.shape[0] != M.shape[1]:
            raise ValueError("matrix must be square")
        self.n = M.shape[0]
        try:
            self._lu, self._piv = scipy.linalg.lu_factor(M)
        except scipy.linalg.LinAlgError as exc:  # pragma: no cover
            raise FactorizationError(str(exc)) from exc
        if np.any(np.abs(np.diag(self._lu)) < 1e-300):
            raise FactorizationError("singular matrix in dense LU")

    def solve(self, b):
        return scipy.linalg.lu_solve((self._lu, self._piv), b)


# ----------------------------------------------------------------------------
# ILU(0): incomplete LU on the unchanged sparsity pattern.
# ----------------------------------------------------------------------------


@numba.njit(cache=True)
def _ilu0_factor_kernel(n, indptr, indices, data, diag_pos):
    for i in range(n):
        r1 = indptr[i + 1]
        for pk in range(indptr[i], r1):
            k = indices[pk]
            if k >= i:
                break
            dk = data[diag_pos[k]]
            if dk == 0.0:
                return k
            lik = data[pk] / dk
            data[pk] = lik
            pj = diag_pos[k] + 1
            pi = pk + 1
            rk1 = indptr[k + 1]
            while pj < rk1 and pi < r1:
                jk = indices[pj]
                ji = indices[pi]
                if jk == ji:
                    data[pi] -= lik * data[pj]
                    pj += 1
                    pi += 1
                elif jk < ji:
                    pj += 1
                else:
                    pi += 1
        if data[diag_pos[i]] == 0.0:
            return i
    return -1


@numba.njit(cache=True)
def _ilu0_solve_kernel(n, indptr, indices, data, diag_pos, b, out):
    for i in range(n):
        s = b[i]
        for pp in range(indptr[i], diag_pos[i]):
            s -= data[pp] * out[indices[pp]]
        out[i] = s
    for i in range(n - 1, -1, -1):
        s = out[i]
        for pp in range(diag_pos[i] + 1, indptr[i + 1]):
            s -= data[pp] * out[indices[pp]]
        out[i] = s / data[diag_pos[i]]


@dataclass
class Ilu0Factors:
    """Combined L\\U storage of an ILU(0) factorization (zero fill)."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    diag_pos: np.ndarray

    def apply(self, v):
        out = np.empty(self.n)
        _ilu0_solve_kernel(
            self.n, self.indptr, self.indices, self.data, self.diag_pos,
            np.ascontiguousarray(v, dtype=float), out,
        )
        return out


def ilu0(A):
    """ILU(0) factorization of a square CSR matrix with nonzero diagonal.

    The factors live on the sparsity pattern of A (no fill); the strictly
    lower part stores L (unit diagonal implied) and the upper part stores U.

    Raises
    ------
    FactorizationError
        On a zero pivot, reporting the offending row.
    """
    A = prune(A)
    n = A.shape[0]
    if A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    indptr = A.indptr
    indices = A.indices
    data = A.data.copy()
    diag_pos = np.full(n, -1, dtype=indices.dtype)
    for i in range(n):
        lo, hi = indptr[i], indptr[i + 1]
        j = np.searchsorted(indices[lo:hi], i)
        if j < hi - lo and indices[lo + j] == i:
            diag_pos[i] = lo + j
    if np.any(diag_pos < 0):
        row = int(np.nonzero(diag_pos < 0)[0][0])
        raise FactorizationError(f"missing diagonal entry in row {row}")
    bad = _ilu0_factor_kernel(n, indptr, indices, data, diag_pos)
    if bad >= 0:
        raise FactorizationError(f"zero pivot in ILU(0) at row {bad}")
    return Ilu0Factors(n, indptr, indices, data, diag_pos)


def ilu0_apply(factors, v):
    """Forward/backward substitution z = (L U)^{-1} v with ILU(0) factors."""
    return factors.apply(v)


# ----------------------------------------------------------------------------
# Lanczos extreme eigenvalue estimation.
# ----------------------------------------------------------------------------


@dataclass
class EigEstimate:
    value: float
    converged: bool
    achieved_tol: float
    steps: int


def _as_matvec(op, n=None):
    if sp.issparse(op) or isinstance(op, np.ndarray):
        return (lambda v: op @ v), op.shape[0]
    if callable(op):
        if n is None:
            raise ValueError("n is required when op is a callable")
        return op, n
    raise TypeError(f"unsupported operator type {type(op)}")


def lanczos_extreme(op, n=None, which="largest", inner=None, tol=1e-6,
                    max_steps=300, seed=0):
    """Extreme Ritz value of a self-adjoint operator by Lanczos iteration.

    Full reorthogonalization is used throughout; `inner`, when given, is the
    action v -> M v of an SPD matrix defining the inner product, in which case
    `op` must be self-adjoint with respect to M (generalized problems).

    Returns
    -------
    EigEstimate
        Ritz estimate, convergence flag, achieved relative tolerance, steps.
    """
    apply_op, n = _as_matvec(op, n)
    if n == 1:
        e1 = np.ones(1)
        return EigEstimate(float(apply_op(e1)[0] / (inner(e1)[0] if inner else 1.0)),
                           True, 0.0, 1)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    mv = inner(v) if inner is not None else v
    nrm = np.sqrt(v @ mv)
    v, mv = v / nrm, mv / nrm
    V = [v]
    MV = [mv]
    alphas, betas = [], []
    prev = None
    achieved = np.inf
    max_steps = min(max_steps, n)
    for j in range(max_steps):
        w = apply_op(V[j])
        alphas.append(float(w @ MV[j]))
        # full reorthogonalization against all previous Lanczos vectors
        for _ in range(2):
            coeffs = np.array([w @ m for m in MV])
            for c, vv in zip(coeffs, V):
                w = w - c * vv
        mw = inner(w) if inner is not None else w
        beta = float(np.sqrt(max(w @ mw, 0.0)))
        theta = _extreme_ritz(alphas, betas, which)
        if prev is not None:
            achieved = abs(theta - prev) / max(abs(theta), 1e-300)
            if achieved <= tol:
                return EigEstimate(theta, True, achieved, j + 1)
        prev = theta
        if beta < 1e-14 or j == max_steps - 1:
            return EigEstimate(theta, beta < 1e-14, achieved, j + 1)
        betas.append(beta)
        V.append(w / beta)
        MV.append(mw / beta)
    return EigEstimate(prev, False, achieved, max_steps)  # pragma: no cover


def _extreme_ritz(alphas, betas, which):
    if len(alphas) == 1:
        return alphas[0]
    vals = scipy.linalg.eigh_tridiagonal(
        np.asarray(alphas), np.asarray(betas), eigvals_only=True
    )
    return float(vals[-1] if which == "largest" else vals[0])


def extreme_eigs(op, mode="largest", n=None, solve=None, tol=1e-6,
                 max_steps=300, seed=0):
    """Largest or smallest eigenvalue estimate of a symmetric operator.

    Parameters
    ----------
    op : sparse matrix or callable
        The operator A (matvec when callable; pass `n`).
    mode : {"largest", "smallest_via_shift_invert"}
        Smallest is computed as 1/largest of A^{-1}; `solve` supplies the
        action of A^{-1} (a sparse factorization is built when omitted and
        `op` is a matrix).
    """
    if mode == "largest":
        return lanczos_extreme(op, n=n, which="largest", tol=tol,
                               max_steps=max_steps, seed=seed)
    if mode != "smallest_via_shift_invert":
        raise ValueError(f"unknown mode {mode!r}")
    if solve is None:
        if not sp.issparse(op):
            raise ValueError("shift-invert needs `solve` or a sparse matrix")
        lu = sp.linalg.splu(sp.csc_matrix(op))
        solve = lu.solve
        n = op.shape[0]
    est = lanczos_extreme(solve, n=n, which="largest", tol=tol,
                          max_steps=max_steps, seed=seed)
    return EigEstimate(1.0 / est.value, est.converged, est.achieved_tol, est.steps)


# ----------------------------------------------------------------------------
# Krylov drivers.
# ----------------------------------------------------------------------------


@dataclass
class SolveReport:
    """Iteration record of a PCG/FCG solve.

    rho is the average convergence factor (||r_it||/||r_0||)^{1/n_it}; t_c and
    t_s carry setup/solve wall times when the caller fills them in.
    """

    n_it: int
    rel_residuals: np.ndarray
    rho: float
    converged: bool
    t_c: float = 0.0
    t_s: float = 0.0
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "n_it": self.n_it,
            "rel_residuals": [float(r) for r in self.rel_residuals],
            "rho": float(self.rho),
            "converged": bool(self.converged),
            "t_c": float(self.t_c),
            "t_s": float(self.t_s),
            **self.extras,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _report(rels, converged, t0):
    n_it = len(rels) - 1
    rho = rels[-1] ** (1.0 / n_it) if n_it > 0 else 0.0
    return SolveReport(n_it, np.asarray(rels), rho, converged, t_s=time.perf_counter() - t0)


def pcg(A, apply_M, b, tol=1e-8, max_it=100, x0=None):
    """Preconditioned conjugate gradients with relative-residual stopping.

    `apply_M` is the action of a fixed SPD preconditioner inverse (None for
    unpreconditioned CG).  Stops when ||r_it|| / ||r_0|| <= tol; a zero right
    hand side converges immediately with n_it = 0.
    """
    t0 = time.perf_counter()
    apply_A, n = _as_matvec(A, len(b))
    if apply_M is None:
        apply_M = lambda v: v
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - apply_A(x) if x0 is not None else np.array(b, dtype=float)
    r0_norm = np.linalg.norm(r)
    rels = [1.0]
    if r0_norm == 0.0:
        return x, SolveReport(0, np.array([0.0]), 0.0, True, t_s=time.perf_counter() - t0)
    z = apply_M(r)
    d = z.copy()
    rz = r @ z
    for _ in range(max_it):
        Ad = apply_A(d)
        alpha = rz / (d @ Ad)
        x += alpha * d
        r -= alpha * Ad
        rels.append(np.linalg.norm(r) / r0_norm)
        if rels[-1] <= tol:
            return x, _report(rels, True, t0)
        z = apply_M(r)
        rz_new = r @ z
        beta = rz_new / rz
        rz = rz_new
        d = z + beta * d
    return x, _report(rels, False, t0)


def fcg(A, apply_M, b, tol=1e-8, max_it=100, truncation=10, x0=None):
    """Flexible conjugate gradients with direction truncation.

    The new preconditioned residual is A-orthogonalized against the last
    `truncation` stored directions, which tolerates a preconditioner that
    changes between iterations (nonlinear AMLI cycles).  With a fixed SPD
    preconditioner the iterates coincide with PCG.
    """
    t0 = time.perf_counter()
    apply_A, n = _as_matvec(A, len(b))
    if apply_M is None:
        apply_M = lambda v: v
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - apply_A(x) if x0 is not None else np.array(b, dtype=float)
    r0_norm = np.linalg.norm(r)
    rels = [1.0]
    if r0_norm == 0.0:
        return x, SolveReport(0, np.array([0.0]), 0.0, True, t_s=time.perf_counter() - t0)
    dirs = []  # (d, Ad, d^T Ad), most recent last
    for _ in range(max_it):
        d = apply_M(r)
        for dj, Adj, dAdj in dirs[-truncation:]:
            d = d - (d @ Adj) / dAdj * dj
        Ad = apply_A(d)
        dAd = d @ Ad
        if dAd <= 0.0:
            raise FactorizationError("FCG direction with nonpositive curvature")
        alpha = (d @ r) / dAd
        x += alpha * d
        r -= alpha * Ad
        dirs.append((d, Ad, dAd))
        if len(dirs) > truncation:
            dirs.pop(0)
        rels.append(np.linalg.norm(r) / r0_norm)
        if rels[-1] <= tol:
            return x, _report(rels, True, t0)
    return x, _report(rels, False, t0)


# ----------------------------------------------------------------------------
# Matrix Market I/O.
# ----------------------------------------------------------------------------


def save_matrix_market(path, A):
    """Write a sparse matrix (or dense vector) in Matrix Market format."""
    if sp.issparse(A):
        scipy.io.mmwrite(str(path), sp.coo_matrix(A))
    else:
        scipy.io.mmwrite(str(path), np.atleast_2d(np.asarray(A)).T)


def load_matrix_market(path):
    """Read a Matrix Market file; sparse input comes back as canonical CSR."""
    M = scipy.io.mmread(str(path))
    if sp.issparse(M):
        return prune(M)
    M = np.asarray(M)
    return M[:, 0] if M.ndim == 2 and M.shape[1] == 1 else M
