"""Univariate B-spline spaces on dyadically refined open uniform knot vectors.

Two evaluation paths are provided: the Cox-de Boor recursion (`eval_basis`,
`eval_basis_deriv`) and closed-form piecewise polynomials per level
(`eval_explicit`).  Both use the half-open span convention [xi_i, xi_{i+1}),
with the last span closed at x = 1; 0/0 in the recursion counts as zero.
Evaluation at C^0 breakpoints takes the right limit (basis values are
continuous, so only derivative one-sided limits are affected).
"""

from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import UnsupportedCaseError

CPM1 = "cpm1"
C0 = "c0"
CONTINUITIES = (C0, CPM1)


def _check_continuity(continuity):
    if continuity not in CONTINUITIES:
        raise ValueError(f"continuity must be one of {CONTINUITIES}, got {continuity!r}")


@dataclass(frozen=True)
class KnotVector:
    """Open knot vector on [0, 1] with uniform interior spacing.

    For continuity ``cpm1`` interior knots are simple (C^{p-1} basis), for
    ``c0`` each interior knot is repeated p times.
    """

    values: np.ndarray
    degree: int
    continuity: str

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if np.any(np.diff(vals) < 0):
            raise ValueError("knot values must be non-decreasing")

    @property
    def n_spans(self):
        return int(round(1.0 / self.h))

    @property
    def h(self):
        kv = self.values
        dk = np.diff(kv)
        return float(dk[dk > 0][0])

    @property
    def dim(self):
        return len(self.values) - self.degree - 1


@dataclass(frozen=True)
class SplineSpace:
    """B-spline space of degree p at dyadic level k (2^{k-1} knot spans)."""

    knots: KnotVector
    level: int

    @property
    def degree(self):
        return self.knots.degree

    @property
    def continuity(self):
        return self.knots.continuity

    @property
    def h(self):
        return self.knots.h

    @property
    def n_spans(self):
        return self.knots.n_spans

    @property
    def dim(self):
        return self.knots.dim


def open_uniform_knots(degree, n_spans, continuity=CPM1):
    """Build the open uniform knot vector E_k with 2^{k-1} = n_spans spans.

    Parameters
    ----------
    degree : int
        Polynomial degree p >= 1.
    n_spans : int
        Number of knot spans; must be a power of two (dyadic refinement).
    continuity : str
        ``"cpm1"`` for simple interior knots, ``"c0"`` for multiplicity-p
        interior knots.

    Returns
    -------
    KnotVector
    """
    _check_continuity(continuity)
    if degree < 1:
        raise ValueError("degree must be >= 1")
    if n_spans < 1 or (n_spans & (n_spans - 1)) != 0:
        raise ValueError(
            f"n_spans must be a power of two for dyadic refinement, got {n_spans}"
        )
    h = 1.0 / n_spans
    mult = 1 if continuity == CPM1 else degree
    interior = np.repeat(np.arange(1, n_spans) * h, mult)
    vals = np.concatenate([np.zeros(degree + 1), interior, np.ones(degree + 1)])
    return KnotVector(vals, degree, continuity)


def make_space(degree, level, continuity=CPM1):
    """SplineSpace at dyadic level k >= 1 (level 1 is the single span [0, 1])."""
    if level < 1:
        raise ValueError("level must be >= 1")
    return SplineSpace(open_uniform_knots(degree, 2 ** (level - 1), continuity), level)


def space_dim(degree, level, continuity=CPM1):
    n = 2 ** (level - 1)
    return n + degree if continuity == CPM1 else degree * n + 1


def find_span(knots, degree, x):
    """Index mu of the nonempty span with knots[mu] <= x < knots[mu+1].

    The last nonempty span is treated as closed at its right end.
    """
    kv = knots
    last = len(kv) - degree - 2
    mu = int(np.searchsorted(kv, x, side="right")) - 1
    mu = min(max(mu, degree), last)
    while kv[mu + 1] <= kv[mu]:
        mu -= 1
    return mu


def eval_basis(space, x):
    """Nonzero B-spline basis values at x by the Cox-de Boor recursion.

    Parameters
    ----------
    space : SplineSpace
    x : float
        Point in [0, 1].

    Returns
    -------
    first_active : int
        0-based index of the first of the p+1 active basis functions.
    values : ndarray, shape (p+1,)
        Values of functions first_active .. first_active+p; nonnegative and
        summing to one.
    """
    p = space.degree
    kv = space.knots.values
    if x < 0.0 or x > 1.0:
        raise ValueError(f"x={x} outside [0, 1]")
    mu = find_span(kv, p, x)
    vals = np.empty(p + 1)
    left = np.empty(p)
    right = np.empty(p)
    vals[0] = 1.0
    for j in range(1, p + 1):
        left[j - 1] = x - kv[mu + 1 - j]
        right[j - 1] = kv[mu + j] - x
        saved = 0.0
        for r in range(j):
            tmp = vals[r] / (right[r] + left[j - 1 - r])
            vals[r] = saved + right[r] * tmp
            saved = left[j - 1 - r] * tmp
        vals[j] = saved
    return mu - p, vals


def eval_basis_deriv(space, x):
    """First derivatives of the p+1 active basis functions at x.

    Uses the degree-reduction formula on the (p-1)-degree values from the same
    recursion; the returned derivatives sum to zero.
    """
    p = space.degree
    kv = space.knots.values
    if x < 0.0 or x > 1.0:
        raise ValueError(f"x={x} outside [0, 1]")
    mu = find_span(kv, p, x)
    if p == 0:
        return mu, np.zeros(1)
    # values of degree p-1 at the same span: functions mu-p+1 .. mu
    low = np.empty(p)
    left = np.empty(p)
    right = np.empty(p)
    low[0] = 1.0
    for j in range(1, p):
        left[j - 1] = x - kv[mu + 1 - j]
        right[j - 1] = kv[mu + j] - x
        saved = 0.0
        for r in range(j):
            tmp = low[r] / (right[r] + left[j - 1 - r])
            low[r] = saved + right[r] * tmp
            saved = left[j - 1 - r] * tmp
        low[j] = saved
    ders = np.zeros(p + 1)
    for a in range(p + 1):
        i = mu - p + a
        acc = 0.0
        if a >= 1:  # contribution of B_{i,p-1}
            d = kv[i + p] - kv[i]
            if d > 0.0:
                acc += low[a - 1] / d
        if a <= p - 1:  # contribution of B_{i+1,p-1}
            d = kv[i + p + 1] - kv[i + 1]
            if d > 0.0:
                acc -= low[a] / d
        ders[a] = p * acc
    return mu - p, ders


def basis_row(space, x):
    """Dense vector of all basis values at x (mostly zeros; for testing)."""
    first, vals = eval_basis(space, x)
    row = np.zeros(space.dim)
    row[first : first + len(vals)] = vals
    return row


def greville(space):
    """Greville abscissae: averages of p consecutive interior knots."""
    p = space.degree
    kv = space.knots.values
    return np.array([kv[i + 1 : i + p + 1].mean() for i in range(space.dim)])


# ----------------------------------------------------------------------------
# Closed-form piecewise polynomials per level.
#
# Coefficient tuples are monomial coefficients (low to high order) in the
# local coordinate s = x/h - span_index of each successive span of the
# function's support.  All values are exact rationals of the underlying
# piecewise polynomials; right-boundary functions are mirror images
# B(1 - x) of the left-boundary ones.
# ----------------------------------------------------------------------------

# Left-boundary families for C^{p-1}; family j (1-based) spans j spans.
_CPM1_LEFT = {
    2: (
        ((1, -2, 1),),
        ((0, 2, -3 / 2), (1 / 2, -1, 1 / 2)),
    ),
    3: (
        ((1, -3, 3, -1),),
        ((0, 3, -9 / 2, 7 / 4), (1 / 4, -3 / 4, 3 / 4, -1 / 4)),
        (
            (0, 0, 3 / 2, -11 / 12),
            (7 / 12, 1 / 4, -5 / 4, 7 / 12),
            (1 / 6, -1 / 2, 1 / 2, -1 / 6),
        ),
    ),
    4: (
        ((1, -4, 6, -4, 1),),
        ((0, 4, -9, 7, -15 / 8), (1 / 8, -1 / 2, 3 / 4, -1 / 2, 1 / 8)),
        (
            (0, 0, 3, -11 / 3, 85 / 72),
            (37 / 72, -5 / 18, -11 / 12, 19 / 18, -23 / 72),
            (1 / 18, -2 / 9, 1 / 3, -2 / 9, 1 / 18),
        ),
        (
            (0, 0, 0, 2 / 3, -25 / 72),
            (23 / 72, 11 / 18, -1 / 12, -13 / 18, 23 / 72),
            (4 / 9, -4 / 9, -1 / 3, 5 / 9, -13 / 72),
            (1 / 24, -1 / 6, 1 / 4, -1 / 6, 1 / 24),
        ),
    ),
}

# Translation-invariant interior function (p+1 spans) for C^{p-1}.
_CPM1_INTERIOR = {
    2: ((0, 0, 1 / 2), (1 / 2, 1, -1), (1 / 2, -1, 1 / 2)),
    3: (
        (0, 0, 0, 1 / 6),
        (1 / 6, 1 / 2, 1 / 2, -1 / 2),
        (2 / 3, 0, -1, 1 / 2),
        (1 / 6, -1 / 2, 1 / 2, -1 / 6),
    ),
    4: (
        (0, 0, 0, 0, 1 / 24),
        (1 / 24, 1 / 6, 1 / 4, 1 / 6, -1 / 6),
        (11 / 24, 1 / 2, -1 / 4, -1 / 2, 1 / 4),
        (11 / 24, -1 / 2, -1 / 4, 1 / 2, -1 / 6),
        (1 / 24, -1 / 6, 1 / 4, -1 / 6, 1 / 24),
    ),
}

# Level-2 middle functions whose support covers both spans (p >= 3 only;
# for p = 2 the level-2 middles are mirrors of the boundary family).
_CPM1_LEVEL2_MID = {
    3: ((0, 0, 3 / 2, -1), (1 / 2, 0, -3 / 2, 1)),
    4: ((0, 0, 3, -4, 11 / 8), (3 / 8, -1 / 2, -3 / 4, 3 / 2, -5 / 8)),
}


def _piecewise(pieces, start_span, n_spans, h, x):
    if x == 1.0:
        ispan = n_spans - 1
    else:
        ispan = min(int(x / h), n_spans - 1)
    j = ispan - start_span
    if j < 0 or j >= len(pieces):
        return 0.0
    s = x / h - ispan
    acc = 0.0
    for c in reversed(pieces[j]):
        acc = acc * s + c
    return acc


def _bernstein(p, j, x):
    return comb(p, j) * x**j * (1.0 - x) ** (p - j)


def _eval_explicit_cpm1(p, k, j1, x):
    # j1 is the 1-based function index; n spans, dim m = n + p
    n = 2 ** (k - 1)
    m = n + p
    h = 1.0 / n
    if n == 1:
        return _bernstein(p, j1 - 1, x)
    fams = _CPM1_LEFT[p]
    if j1 <= p and j1 <= n:
        return _piecewise(fams[j1 - 1], 0, n, h, x)
    jj = m + 1 - j1
    if jj <= p and jj <= n:
        return _piecewise(fams[jj - 1], 0, n, h, 1.0 - x)
    if p < j1 <= n:
        return _piecewise(_CPM1_INTERIOR[p], j1 - p - 1, n, h, x)
    # remaining cases exist only on the two-span level for p >= 3
    mid = _CPM1_LEVEL2_MID[p]
    if j1 == 3:
        return _piecewise(mid, 0, n, h, x)
    return _piecewise(mid, 0, n, h, 1.0 - x)  # p = 4, j1 = 4


def _eval_explicit_c0(p, k, g, x):
    # g is the 0-based function index in 0 .. p*n; function i*p+r with r > 0
    # is the r-th Bernstein polynomial on span i, r = 0 marks breakpoints.
    n = 2 ** (k - 1)
    h = 1.0 / n
    if x == 1.0:
        ispan = n - 1
    else:
        ispan = min(int(x / h), n - 1)
    t = x / h - ispan
    i, r = divmod(g, p)
    if r != 0:
        return _bernstein(p, r, t) if ispan == i else 0.0
    if i == 0:
        return (1.0 - t) ** p if ispan == 0 else 0.0
    if i == n:
        return t**p if ispan == n - 1 else 0.0
    if ispan == i - 1:
        return t**p
    if ispan == i:
        return (1.0 - t) ** p
    return 0.0


def eval_explicit(degree, continuity, level, index, x):
    """Closed-form value of basis function `index` (0-based) at level `level`.

    Evaluates the cataloged piecewise polynomial representation; agrees with
    `eval_basis` to machine precision.  Only degrees 2, 3, 4 are cataloged.

    Raises
    ------
    UnsupportedCaseError
        If (degree, continuity) is outside the catalog or index out of range.
    ValueError
        If x is outside [0, 1].
    """
    _check_continuity(continuity)
    if degree not in (2, 3, 4):
        raise UnsupportedCaseError(f"no explicit form cataloged for degree {degree}")
    if level < 1:
        raise UnsupportedCaseError(f"level must be >= 1, got {level}")
    if x < 0.0 or x > 1.0:
        raise ValueError(f"x={x} outside [0, 1]")
    dim = space_dim(degree, level, continuity)
    if not 0 <= index < dim:
        raise UnsupportedCaseError(f"index {index} out of range for dim {dim}")
    if continuity == CPM1:
        return _eval_explicit_cpm1(degree, level, index + 1, x)
    if level == 1:
        return _bernstein(degree, index, x)
    return _eval_explicit_c0(degree, level, index, x)
