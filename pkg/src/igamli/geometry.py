"""NURBS geometry maps for the example domains and manufactured problems.

A patch is a tensor-product rational map from the unit cube (d = 1, 2, 3) to
the physical domain.  The three cataloged domains are a unit square (identity
map), the quarter annulus with inner radius 1 and outer radius 2 represented
exactly by a rational quadratic in the angular direction, and the quarter
thick ring obtained by extruding the annulus linearly over z in [0, 1].
"""

from dataclasses import dataclass, field

import numpy as np
import sympy

from .errors import GeometryError
from .splines import eval_basis, eval_basis_deriv, make_space

DOMAINS = ("square", "quarter_annulus", "quarter_thick_ring")


@dataclass(frozen=True)
class NurbsPatch:
    """Tensor-product NURBS geometry: per-direction spaces, control net, weights.

    control_points has shape dims + (d,) and weights has shape dims, where
    dims are the per-direction space dimensions.
    """

    spaces: tuple
    control_points: np.ndarray
    weights: np.ndarray
    name: str = "patch"

    def __post_init__(self):
        dims = tuple(s.dim for s in self.spaces)
        cp = np.ascontiguousarray(self.control_points, dtype=float)
        w = np.ascontiguousarray(self.weights, dtype=float)
        if w.shape != dims:
            raise ValueError(f"weights shape {w.shape} != space dims {dims}")
        if cp.shape != dims + (len(dims),):
            raise ValueError(f"control net shape {cp.shape} incompatible with {dims}")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        object.__setattr__(self, "control_points", cp)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self):
        return len(self.spaces)


def _active_block(spaces, xi, derivs=True):
    """Per-direction active values/derivatives at a parametric point."""
    starts, vals, ders = [], [], []
    for s, x in zip(spaces, xi):
        f, v = eval_basis(s, float(x))
        starts.append(f)
        vals.append(v)
        if derivs:
            _, d = eval_basis_deriv(s, float(x))
            ders.append(d)
    return starts, vals, ders


def _tensor_products(vals, ders):
    """Tensor value block and its parametric gradient blocks."""
    d = len(vals)
    B = vals[0]
    for v in vals[1:]:
        B = np.multiply.outer(B, v)
    grads = []
    for k in range(d):
        g = ders[0] if k == 0 else vals[0]
        for j in range(1, d):
            g = np.multiply.outer(g, ders[j] if k == j else vals[j])
        grads.append(g)
    return B, grads


def rational_basis(spaces, weights, xi):
    """Active NURBS basis values and parametric gradients at xi.

    Parameters
    ----------
    spaces : sequence of SplineSpace
    weights : ndarray
        Weight tensor over all tensor basis functions, shape = space dims.
    xi : sequence of float
        Point in the unit cube.

    Returns
    -------
    starts : list of int
        First active index per direction.
    values : ndarray
        Active rational values, shape (p1+1, ..., pd+1); they sum to one.
    grads : ndarray
        Parametric gradients, shape (d,) + values.shape; each component sums
        to zero.
    """
    starts, vals, ders = _active_block(spaces, xi)
    B, Bgrads = _tensor_products(vals, ders)
    sl = tuple(slice(f, f + len(v)) for f, v in zip(starts, vals))
    w = weights[sl]
    wB = w * B
    W = wB.sum()
    dW = [(w * g).sum() for g in Bgrads]
    N = wB / W
    grads = np.stack([(w * g - N * dW[k]) / W for k, g in enumerate(Bgrads)])
    return starts, N, grads


def eval_nurbs_basis(patch, xi):
    """Rational basis of the patch itself at xi (flattened active set)."""
    starts, N, grads = rational_basis(patch.spaces, patch.weights, xi)
    dims = tuple(s.dim for s in patch.spaces)
    idx = np.meshgrid(
        *[np.arange(f, f + n) for f, n in zip(starts, N.shape)], indexing="ij"
    )
    flat = np.ravel_multi_index([i.ravel() for i in idx], dims)
    return flat, N.ravel(), grads.reshape(len(starts), -1).T


def map_point(patch, xi):
    """Physical image x and Jacobian J = dx/dxi of the geometry map at xi.

    Raises
    ------
    GeometryError
        If the Jacobian determinant is not strictly positive.
    """
    starts, N, grads = rational_basis(patch.spaces, patch.weights, xi)
    sl = tuple(slice(f, f + n) for f, n in zip(starts, N.shape))
    P = patch.control_points[sl]  # active control points, block + (d,)
    d = patch.dim
    x = np.tensordot(N, P, axes=(tuple(range(d)), tuple(range(d))))
    J = np.empty((d, d))
    for k in range(d):
        J[:, k] = np.tensordot(grads[k], P, axes=(tuple(range(d)), tuple(range(d))))
    if np.linalg.det(J) <= 0.0:
        raise GeometryError(f"non-positive Jacobian determinant at xi={tuple(xi)}")
    return x, J


def _linear_space():
    return make_space(1, 1)


def _quadratic_space():
    return make_space(2, 1)


def unit_interval():
    """Identity map on [0, 1] (handy for one-dimensional tests)."""
    cp = np.array([[0.0], [1.0]])
    return NurbsPatch((_linear_space(),), cp, np.ones(2), name="interval")


def _quarter_annulus_net():
    # exact rational quarter circle: control points (1,0), (1,1), (0,1),
    # middle weight 1/sqrt(2); radial direction linear between radii 1 and 2
    circle = np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    radii = np.array([1.0, 2.0])
    cp = radii[:, None, None] * circle[None, :, :]
    w = np.tile(np.array([1.0, 1.0 / np.sqrt(2.0), 1.0]), (2, 1))
    return cp, w


def make_domain(name):
    """Geometry patch for one of the cataloged example domains.

    ``square``: identity map on (0,1)^2 with unit weights.
    ``quarter_annulus``: first-quadrant ring, inner radius 1, outer radius 2;
    degree 1 radially, rational degree 2 in the angular direction.
    ``quarter_thick_ring``: the annulus extruded linearly in z over [0, 1].
    """
    if name == "square":
        cp = np.array([[[0.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [1.0, 1.0]]])
        return NurbsPatch(
            (_linear_space(), _linear_space()), cp, np.ones((2, 2)), name=name
        )
    if name == "quarter_annulus":
        cp, w = _quarter_annulus_net()
        return NurbsPatch((_linear_space(), _quadratic_space()), cp, w, name=name)
    if name == "quarter_thick_ring":
        cp2, w2 = _quarter_annulus_net()
        z = np.array([0.0, 1.0])
        cp = np.empty((2, 3, 2, 3))
        cp[..., :2] = cp2[:, :, None, :]
        cp[..., 2] = z[None, None, :]
        w = np.repeat(w2[:, :, None], 2, axis=2)
        return NurbsPatch(
            (_linear_space(), _quadratic_space(), _linear_space()), cp, w, name=name
        )
    raise ValueError(f"unknown domain {name!r}; expected one of {DOMAINS}")


@dataclass(frozen=True)
class ManufacturedProblem:
    """Exact solution, matching source f = -div(grad u), and Dirichlet trace."""

    name: str
    dim: int
    u: callable
    f: callable
    homogeneous: bool = False
    _exprs: tuple = field(default=(), repr=False)

    def u_at(self, points):
        pts = np.asarray(points, dtype=float)
        return self.u(*[pts[..., i] for i in range(self.dim)])

    def f_at(self, points):
        pts = np.asarray(points, dtype=float)
        return self.f(*[pts[..., i] for i in range(self.dim)])


def _build_problem(name, u_expr, coords, homogeneous):
    lap = sum(sympy.diff(u_expr, c, 2) for c in coords)
    f_expr = sympy.simplify(-lap)
    u_fn = sympy.lambdify(coords, u_expr, "numpy")
    f_fn = sympy.lambdify(coords, f_expr, "numpy")
    dim = len(coords)

    def u(*args):
        return np.broadcast_to(np.asarray(u_fn(*args), dtype=float), np.broadcast_shapes(
            *[np.shape(a) for a in args])).copy()

    def f(*args):
        return np.broadcast_to(np.asarray(f_fn(*args), dtype=float), np.broadcast_shapes(
            *[np.shape(a) for a in args])).copy()

    return ManufacturedProblem(name, dim, u, f, homogeneous, (u_expr, f_expr))


_PROBLEMS = {}


def manufactured_problem(example):
    """Manufactured solution of one of the three test examples.

    ``ex1``: u = e^x sin(y) on the square (harmonic, so f = 0).
    ``ex2``: u = -x y^2 (x^2+y^2-1)(x^2+y^2-4) on the quarter annulus, which
    vanishes on the whole boundary (homogeneous Dirichlet data).
    ``ex3``: u = e^x sin(x y) cos(z) on the quarter thick ring.
    """
    key = {1: "ex1", 2: "ex2", 3: "ex3"}.get(example, example)
    if key in _PROBLEMS:
        return _PROBLEMS[key]
    x, y, z = sympy.symbols("x y z")
    if key == "ex1":
        prob = _build_problem(key, sympy.exp(x) * sympy.sin(y), (x, y), False)
    elif key == "ex2":
        u = -x * y**2 * (x**2 + y**2 - 1) * (x**2 + y**2 - 4)
        prob = _build_problem(key, u, (x, y), True)
    elif key == "ex3":
        u = sympy.exp(x) * sympy.sin(x * y) * sympy.cos(z)
        prob = _build_problem(key, u, (x, y, z), False)
    else:
        raise ValueError(f"unknown example {example!r}")
    _PROBLEMS[key] = prob
    return prob


def domain_for(example):
    key = {1: "ex1", 2: "ex2", 3: "ex3"}.get(example, example)
    return make_domain(
        {"ex1": "square", "ex2": "quarter_annulus", "ex3": "quarter_thick_ring"}[key]
    )
