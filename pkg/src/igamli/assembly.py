"""Galerkin assembly of the elliptic model problem on a NURBS patch.

Elements are the nonzero knot spans of the analysis space; each element is
integrated with a per-direction Gauss-Legendre rule (degree+1 points by
default) and local matrices are scattered into CSR.  Dirichlet boundary
conditions are imposed by full elimination: boundary coefficients come from
tensor Greville interpolation of the exact trace and move to the right-hand
side, so the reduced matrix stays symmetric positive definite.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import GeometryError
from .linalg import prune, save_matrix_market
from .splines import eval_basis, eval_basis_deriv, greville

_CHUNK_TRIPLETS = 3_000_000


@dataclass
class DiscreteSystem:
    """Stiffness matrix and load vector reduced to the interior unknowns."""

    A: sp.csr_matrix
    f: np.ndarray
    interior: np.ndarray
    boundary: np.ndarray
    boundary_values: np.ndarray
    lift: np.ndarray
    dims: tuple

    @property
    def n(self):
        return self.A.shape[0]

    def expand(self, x_interior):
        """Full coefficient vector with the Dirichlet data filled back in."""
        full = np.zeros(int(np.prod(self.dims)))
        full[self.interior] = x_interior
        full[self.boundary] = self.boundary_values
        return full

    def export(self, path_a, path_f):
        """Matrix Market dump of A and f for debugging."""
        save_matrix_market(path_a, self.A)
        save_matrix_market(path_f, self.f)


def boundary_dofs(dims):
    """Tensor indices with any direction index at either end (trace support)."""
    dims = tuple(int(m) for m in dims)
    mask = np.zeros(dims, dtype=bool)
    for d in range(len(dims)):
        sl = [slice(None)] * len(dims)
        for edge in (0, dims[d] - 1):
            sl[d] = edge
            mask[tuple(sl)] = True
    return np.nonzero(mask.ravel())[0]


def interior_dofs(dims):
    dims = tuple(int(m) for m in dims)
    mask = np.ones(dims, dtype=bool)
    for d in range(len(dims)):
        sl = [slice(None)] * len(dims)
        for edge in (0, dims[d] - 1):
            sl[d] = edge
            mask[tuple(sl)] = False
    return np.nonzero(mask.ravel())[0]


def uniform_weights(spaces):
    """Unit weight vectors (polynomial B-spline analysis)."""
    return [np.ones(s.dim) for s in spaces]


def analysis_weights(patch, spaces):
    """Per-direction analysis weights reproducing the patch weight function.

    Each direction's geometry weight factor (a spline of degree <= the
    analysis degree) is interpolated exactly in the analysis space at the
    Greville points, so the tensor weight function of the analysis basis
    coincides with the geometry's.
    """
    factors = weight_factors(patch)
    out = []
    for s, gs, gf in zip(spaces, patch.spaces, factors):
        pts = greville(s)
        vals = np.array(
            [gf @ _dense_row(gs, x) for x in pts]
        )
        C = collocation_matrix(s, pts)
        w = spla.splu(sp.csc_matrix(C)).solve(vals)
        if np.any(w <= 0):
            raise GeometryError("analysis weights must stay positive")
        out.append(w)
    return out


def weight_factors(patch):
    """Per-direction factors of a separable patch weight tensor."""
    W = patch.weights
    d = W.ndim
    if d == 1:
        return [W.copy()]
    origin = (0,) * d
    factors = []
    for k in range(d):
        sl = list(origin)
        sl[k] = slice(None)
        f = W[tuple(sl)].astype(float)
        if k > 0:
            f = f / W[origin]
        factors.append(f)
    T = factors[0]
    for f in factors[1:]:
        T = np.multiply.outer(T, f)
    if not np.allclose(T, W, rtol=1e-12, atol=1e-14):
        raise GeometryError("patch weights are not a tensor product of 1d factors")
    return factors


def collocation_matrix(space, points):
    """Sparse collocation matrix C[m, i] = B_i(points[m])."""
    rows, cols, vals = [], [], []
    for m, x in enumerate(points):
        first, v = eval_basis(space, float(x))
        rows.extend([m] * len(v))
        cols.extend(range(first, first + len(v)))
        vals.extend(v)
    return sp.csr_matrix(
        (vals, (rows, cols)), shape=(len(points), space.dim)
    )


def _dense_row(space, x):
    first, v = eval_basis(space, float(x))
    row = np.zeros(space.dim)
    row[first : first + len(v)] = v
    return row


def _tabulate_1d(space, nq):
    """Per-element Gauss nodes/weights and basis values of one direction."""
    n_el = space.n_spans
    h = space.h
    gx, gw = np.polynomial.legendre.leggauss(nq)
    nodes = np.empty((n_el, nq))
    weights = np.empty((n_el, nq))
    p = space.degree
    vals = np.empty((n_el, nq, p + 1))
    ders = np.empty((n_el, nq, p + 1))
    firsts = np.empty(n_el, dtype=int)
    for e in range(n_el):
        a = e * h
        nodes[e] = a + (gx + 1.0) * (h / 2.0)
        weights[e] = gw * (h / 2.0)
        for q, x in enumerate(nodes[e]):
            f, v = eval_basis(space, x)
            _, dv = eval_basis_deriv(space, x)
            vals[e, q] = v
            ders[e, q] = dv
            if q == 0:
                firsts[e] = f
    return nodes, weights, vals, ders, firsts


def _geometry_tab(patch, axes_nodes):
    """Dense geometry basis values/derivatives at 1d node arrays."""
    out = []
    for s, pts in zip(patch.spaces, axes_nodes):
        V = np.empty((len(pts), s.dim))
        D = np.empty((len(pts), s.dim))
        for q, x in enumerate(pts):
            V[q] = _dense_row(s, x)
            f, dv = eval_basis_deriv(s, float(x))
            row = np.zeros(s.dim)
            row[f : f + len(dv)] = dv
            D[q] = row
        out.append((V, D))
    return out


def _rational_block(vals, ders, wslices):
    """Rational values/gradients on a tensor block of active functions.

    vals/ders: per-direction (nq_d, p_d+1) arrays; wslices: per-direction
    active weight vectors.  Returns N (nq, nloc), Gpar (d, nq, nloc), W (nq,).
    """
    d = len(vals)
    s = [V @ w for V, w in zip(vals, wslices)]
    sd = [D @ w for D, w in zip(ders, wslices)]
    if d == 1:
        B = vals[0]
        dB = [ders[0]]
        W = s[0]
        dW = [sd[0]]
        wA = wslices[0]
    elif d == 2:
        B = np.einsum("qi,rj->qrij", vals[0], vals[1])
        dB = [
            np.einsum("qi,rj->qrij", ders[0], vals[1]),
            np.einsum("qi,rj->qrij", vals[0], ders[1]),
        ]
        W = np.multiply.outer(s[0], s[1])
        dW = [np.multiply.outer(sd[0], s[1]), np.multiply.outer(s[0], sd[1])]
        wA = np.multiply.outer(wslices[0], wslices[1])
    else:
        B = np.einsum("qi,rj,sk->qrsijk", vals[0], vals[1], vals[2])
        dB = [
            np.einsum("qi,rj,sk->qrsijk", ders[0], vals[1], vals[2]),
            np.einsum("qi,rj,sk->qrsijk", vals[0], ders[1], vals[2]),
            np.einsum("qi,rj,sk->qrsijk", vals[0], vals[1], ders[2]),
        ]
        W = np.multiply.outer(np.multiply.outer(s[0], s[1]), s[2])
        dW = [
            np.multiply.outer(np.multiply.outer(sd[0], s[1]), s[2]),
            np.multiply.outer(np.multiply.outer(s[0], sd[1]), s[2]),
            np.multiply.outer(np.multiply.outer(s[0], s[1]), sd[2]),
        ]
        wA = np.multiply.outer(np.multiply.outer(wslices[0], wslices[1]), wslices[2])
    nq = int(np.prod([V.shape[0] for V in vals]))
    nloc = int(np.prod([V.shape[1] for V in vals]))
    B = B.reshape(nq, nloc)
    W = W.reshape(nq)
    wA = wA.reshape(nloc)
    N = (wA[None, :] * B) / W[:, None]
    Gpar = np.empty((d, nq, nloc))
    for k in range(d):
        Gpar[k] = (wA[None, :] * dB[k].reshape(nq, nloc) - N * dW[k].reshape(nq)[:, None]) / W.reshape(nq)[:, None]
    return N, Gpar, W


def element_blocks(patch, spaces, weights=None, quad_order=None):
    """Iterate elements yielding (global_idx, N, Gphys, X, wdet) blocks.

    Shared by matrix assembly, load assembly and error quadrature.
    """
    d = len(spaces)
    if patch.dim != d:
        raise ValueError("patch dimension must match number of analysis spaces")
    if weights is None:
        weights = analysis_weights(patch, spaces)
    if quad_order is None:
        nqs = [s.degree + 1 for s in spaces]
    elif np.isscalar(quad_order):
        nqs = [int(quad_order)] * d
    else:
        nqs = [int(q) for q in quad_order]
    for s, nq in zip(spaces, nqs):
        if nq < s.degree + 1:
            raise ValueError("quad_order must be at least degree+1 per direction")
    tabs = [_tabulate_1d(s, nq) for s, nq in zip(spaces, nqs)]
    dims = tuple(s.dim for s in spaces)
    gP = patch.control_points.reshape(-1, d)
    gfactors = weight_factors(patch)
    n_els = [s.n_spans for s in spaces]
    for flat_el in range(int(np.prod(n_els))):
        el = np.unravel_index(flat_el, n_els)
        vals = [tabs[k][2][el[k]] for k in range(d)]
        ders = [tabs[k][3][el[k]] for k in range(d)]
        firsts = [tabs[k][4][el[k]] for k in range(d)]
        wsl = [w[f : f + v.shape[1]] for w, f, v in zip(weights, firsts, vals)]
        N, Gpar, _ = _rational_block(vals, ders, wsl)

        nodes = [tabs[k][0][el[k]] for k in range(d)]
        gtab = _geometry_tab(patch, nodes)
        gN, gGpar, _ = _rational_block(
            [V for V, _ in gtab], [D for _, D in gtab], gfactors
        )
        X = gN @ gP
        nq = X.shape[0]
        J = np.empty((nq, d, d))
        for k in range(d):
            J[:, :, k] = gGpar[k] @ gP
        detJ = np.linalg.det(J)
        if np.any(detJ <= 0.0):
            raise GeometryError(f"non-positive Jacobian in element {tuple(el)}")
        Jinv = np.linalg.inv(J)
        Gphys = np.einsum("eqa,qei->qai", Gpar, Jinv, optimize=True)

        wq = tabs[0][1][el[0]]
        for k in range(1, d):
            wq = np.multiply.outer(wq, tabs[k][1][el[k]])
        wdet = wq.reshape(-1) * detJ

        ranges = [np.arange(f, f + v.shape[1]) for f, v in zip(firsts, vals)]
        grids = np.meshgrid(*ranges, indexing="ij")
        gidx = np.ravel_multi_index([g.ravel() for g in grids], dims)
        yield gidx, N, Gphys, X, wdet


def assemble_full(patch, spaces, problem=None, quad_order=None, weights=None):
    """Stiffness matrix and load vector over all tensor DOFs (no elimination)."""
    if weights is None:
        weights = analysis_weights(patch, spaces)
    dims = tuple(s.dim for s in spaces)
    n_full = int(np.prod(dims))
    load = np.zeros(n_full)
    chunks = []
    rows_buf, cols_buf, vals_buf = [], [], []
    buffered = 0
    for gidx, N, Gphys, X, wdet in element_blocks(patch, spaces, weights, quad_order):
        Gw = Gphys * wdet[:, None, None]
        Ae = np.tensordot(Gphys, Gw, axes=([0, 2], [0, 2]))
        nloc = len(gidx)
        rows_buf.append(np.repeat(gidx, nloc))
        cols_buf.append(np.tile(gidx, nloc))
        vals_buf.append(Ae.ravel())
        buffered += nloc * nloc
        if problem is not None:
            load[gidx] += N.T @ (wdet * problem.f_at(X))
        if buffered >= _CHUNK_TRIPLETS:
            chunks.append(_to_csr(rows_buf, cols_buf, vals_buf, n_full))
            rows_buf, cols_buf, vals_buf = [], [], []
            buffered = 0
    chunks.append(_to_csr(rows_buf, cols_buf, vals_buf, n_full))
    A_full = chunks[0]
    for c in chunks[1:]:
        A_full = A_full + c
    return prune(A_full, tol=0.0), load


def assemble(patch, spaces, problem=None, quad_order=None, weights=None):
    """Assemble the interior stiffness system for -div(grad u) = f.

    Parameters
    ----------
    patch : NurbsPatch
        Geometry map (fixed, exact coarse representation).
    spaces : sequence of SplineSpace
        Analysis space per parametric direction.
    problem : ManufacturedProblem, optional
        Supplies the source term and Dirichlet trace; without it the load
        vector is zero and the boundary data vanish.
    quad_order : int or sequence, optional
        Gauss points per direction (default degree+1).
    weights : list of ndarray, optional
        Per-direction analysis weights (default: derived from the patch).

    Returns
    -------
    DiscreteSystem
        With A restricted to interior unknowns, symmetric positive definite.
    """
    if weights is None:
        weights = analysis_weights(patch, spaces)
    dims = tuple(s.dim for s in spaces)
    A_full, load = assemble_full(patch, spaces, problem, quad_order, weights)
    interior = interior_dofs(dims)
    boundary = boundary_dofs(dims)
    if problem is not None and not problem.homogeneous:
        coeffs = interpolate(patch, spaces, weights, problem.u_at)
        g = coeffs[boundary]
    else:
        g = np.zeros(len(boundary))
    A_ii = A_full[interior][:, interior]
    lift = A_full[interior][:, boundary] @ g
    f_int = load[interior] - lift
    return DiscreteSystem(prune(A_ii, tol=0.0), f_int, interior, boundary, g, lift, dims)


def _to_csr(rows_buf, cols_buf, vals_buf, n):
    if not rows_buf:
        return sp.csr_matrix((n, n))
    return sp.coo_matrix(
        (np.concatenate(vals_buf), (np.concatenate(rows_buf), np.concatenate(cols_buf))),
        shape=(n, n),
    ).tocsr()


def map_grid(patch, axes_points):
    """Physical images of a tensor grid of parametric points (vectorized)."""
    d = patch.dim
    gtab = _geometry_tab(patch, axes_points)
    gN, _, _ = _rational_block(
        [V for V, _ in gtab], [D for _, D in gtab], weight_factors(patch)
    )
    X = gN @ patch.control_points.reshape(-1, d)
    return X.reshape(tuple(len(p) for p in axes_points) + (d,))


def interpolate(patch, spaces, weights, fn):
    """Tensor Greville interpolation of fn (physical coordinates) in the
    rational analysis basis; returns the flat coefficient vector."""
    d = len(spaces)
    pts = [greville(s) for s in spaces]
    X = map_grid(patch, pts)
    vals = fn(X)
    # scale by the weight function: interpolate (fn . map) * W in B-splines
    sfac = []
    for s, w, g in zip(spaces, weights, pts):
        sfac.append(np.array([w @ _dense_row(s, x) for x in g]))
    Wg = sfac[0]
    for f in sfac[1:]:
        Wg = np.multiply.outer(Wg, f)
    T = np.asarray(vals, dtype=float) * Wg
    for k in range(d):
        C = collocation_matrix(spaces[k], pts[k])
        lu = spla.splu(sp.csc_matrix(C))
        Tm = np.moveaxis(T, k, 0).reshape(spaces[k].dim, -1)
        Tm = lu.solve(Tm)
        T = np.moveaxis(Tm.reshape((spaces[k].dim,) + T.shape[:k] + T.shape[k + 1 :]), 0, k)
    wT = weights[0]
    for w in weights[1:]:
        wT = np.multiply.outer(wT, w)
    return (T / wT).ravel()


def l2_error(patch, spaces, weights, coeffs_full, problem, quad_order=None):
    """Quadrature L2 norm of u_h - u over the physical domain."""
    err2 = 0.0
    for gidx, N, _, X, wdet in element_blocks(patch, spaces, weights, quad_order):
        uh = N @ coeffs_full[gidx]
        err2 += float(wdet @ (uh - problem.u_at(X)) ** 2)
    return np.sqrt(err2)
