import numpy as np
import pytest
import scipy.sparse as sp

from igamli.errors import UnsupportedCaseError
from igamli.splines import C0, CPM1, basis_row, make_space, space_dim
from igamli.transfer import (
    nurbs_restriction,
    refine_weights,
    restrict_interior,
    restriction_1d,
    tensorize,
)

QUARTER_CIRCLE_W = np.array([1.0, 1.0 / np.sqrt(2.0), 1.0])


def dense(p, cont, k):
    return restriction_1d(p, cont, k).G.toarray()


def test_printed_matrices_cpm1():
    assert np.allclose(
        dense(2, CPM1, 2), np.array([[4, 2, 0, 0], [0, 2, 2, 0], [0, 0, 2, 4]]) / 4.0
    )
    assert np.allclose(
        dense(2, CPM1, 3),
        np.array(
            [[4, 2, 0, 0, 0, 0], [0, 2, 3, 1, 0, 0], [0, 0, 1, 3, 2, 0], [0, 0, 0, 0, 2, 4]]
        ) / 4.0,
    )
    assert np.allclose(
        dense(3, CPM1, 2),
        np.array([[2, 1, 0, 0, 0], [0, 1, 1, 0, 0], [0, 0, 1, 1, 0], [0, 0, 0, 1, 2]]) / 2.0,
    )
    assert np.allclose(
        dense(3, CPM1, 3),
        np.array(
            [
                [16, 8, 0, 0, 0, 0, 0],
                [0, 8, 12, 3, 0, 0, 0],
                [0, 0, 4, 10, 4, 0, 0],
                [0, 0, 0, 3, 12, 8, 0],
                [0, 0, 0, 0, 0, 8, 16],
            ]
        ) / 16.0,
    )


def test_printed_matrices_c0():
    assert np.allclose(
        dense(2, C0, 2), np.array([[4, 2, 1, 0, 0], [0, 2, 2, 2, 0], [0, 0, 1, 2, 4]]) / 4.0
    )
    assert np.allclose(
        dense(3, C0, 2),
        np.array(
            [
                [8, 4, 2, 1, 0, 0, 0],
                [0, 4, 4, 3, 2, 0, 0],
                [0, 0, 2, 3, 4, 4, 0],
                [0, 0, 0, 1, 2, 4, 8],
            ]
        ) / 8.0,
    )
    assert np.allclose(
        dense(4, C0, 2),
        np.array(
            [
                [16, 8, 4, 2, 1, 0, 0, 0, 0],
                [0, 8, 8, 6, 4, 2, 0, 0, 0],
                [0, 0, 4, 6, 6, 6, 4, 0, 0],
                [0, 0, 0, 2, 4, 6, 8, 8, 0],
                [0, 0, 0, 0, 1, 2, 4, 8, 16],
            ]
        ) / 16.0,
    )


@pytest.mark.parametrize("p", [2, 3, 4])
@pytest.mark.parametrize("cont", [CPM1, C0])
@pytest.mark.parametrize("k", [2, 3, 4, 5, 6])
def test_shapes_column_sums_and_sparsity(p, cont, k):
    op = restriction_1d(p, cont, k)
    assert op.shape == (space_dim(p, k - 1, cont), space_dim(p, k, cont))
    assert np.allclose(np.asarray(op.G.sum(axis=0)).ravel(), 1.0, atol=1e-14)
    if cont == CPM1:
        assert max(np.diff(op.G.indptr)) <= p + 2


@pytest.mark.parametrize("p", [2, 3, 4])
@pytest.mark.parametrize("cont", [CPM1, C0])
@pytest.mark.parametrize("k", [2, 3, 4, 5])
def test_exactness_of_coarse_reproduction(p, cont, k):
    G = dense(p, cont, k)
    coarse = make_space(p, k - 1, cont)
    fine = make_space(p, k, cont)
    for x in np.linspace(0, 1, 197):
        bc = basis_row(coarse, x)
        bf = basis_row(fine, x)
        assert np.allclose(bc, G @ bf, atol=1e-12)


def test_unsupported_cases():
    with pytest.raises(UnsupportedCaseError):
        restriction_1d(5, CPM1, 3)
    with pytest.raises(UnsupportedCaseError):
        restriction_1d(2, CPM1, 1)


def test_refine_weights_ones():
    op = restriction_1d(3, CPM1, 4)
    w = refine_weights(op, np.ones(op.shape[0]))
    assert np.allclose(w, 1.0)


def test_refine_weights_quarter_circle():
    op = restriction_1d(2, CPM1, 2)
    w = refine_weights(op, QUARTER_CIRCLE_W)
    expected = np.array([1.0, (2 + np.sqrt(2)) / 4, (2 + np.sqrt(2)) / 4, 1.0])
    assert np.allclose(w, expected, atol=1e-15)


@pytest.mark.parametrize("p,cont", [(2, CPM1), (3, CPM1), (2, C0), (4, C0)])
def test_weight_function_invariance(p, cont):
    rng = np.random.default_rng(11)
    for k in (2, 3, 4):
        op = restriction_1d(p, cont, k)
        wc = 0.5 + rng.random(op.shape[0])
        wf = refine_weights(op, wc)
        coarse = make_space(p, k - 1, cont)
        fine = make_space(p, k, cont)
        for x in np.linspace(0, 1, 83):
            assert wc @ basis_row(coarse, x) == pytest.approx(
                wf @ basis_row(fine, x), abs=1e-12
            )


def test_nurbs_restriction_unit_weights_is_g():
    op = restriction_1d(3, C0, 3)
    R = nurbs_restriction(op, np.ones(op.shape[0]))
    assert np.allclose(R.toarray(), op.G.toarray())


def test_nurbs_restriction_definitional_identity():
    op = restriction_1d(2, CPM1, 2)
    wc = QUARTER_CIRCLE_W
    wf = refine_weights(op, wc)
    R = nurbs_restriction(op, wc).toarray()
    G = op.G.toarray()
    # r_ij * w^k_j = w^{k-1}_i * g_ij, entry by entry
    assert np.allclose(R * wf[None, :], wc[:, None] * G, atol=1e-15)


@pytest.mark.parametrize("p", [2, 3])
@pytest.mark.parametrize("k", [2, 3, 4])
def test_nurbs_rational_exactness(p, k):
    # rational 1d bases with a genuinely non-constant weight function
    rng = np.random.default_rng(5)
    op = restriction_1d(p, CPM1, k)
    wc = 0.5 + rng.random(op.shape[0])
    wf = refine_weights(op, wc)
    R = nurbs_restriction(op, wc).toarray()
    coarse = make_space(p, k - 1, CPM1)
    fine = make_space(p, k, CPM1)
    for x in np.linspace(0, 1, 157):
        bc = basis_row(coarse, x)
        bf = basis_row(fine, x)
        nc = wc * bc / (wc @ bc)
        nf = wf * bf / (wf @ bf)
        assert np.allclose(nc, R @ nf, atol=1e-12)


def test_tensorize_matches_kron_and_2d_exactness():
    op = restriction_1d(2, CPM1, 3)
    G2d = tensorize([op, op])
    assert G2d.shape == (op.shape[0] ** 2, op.shape[1] ** 2)
    coarse = make_space(2, 2, CPM1)
    fine = make_space(2, 3, CPM1)
    rng = np.random.default_rng(3)
    for _ in range(40):
        x, y = rng.random(2)
        bc = np.kron(basis_row(coarse, x), basis_row(coarse, y))
        bf = np.kron(basis_row(fine, x), basis_row(fine, y))
        assert np.allclose(bc, G2d @ bf, atol=1e-12)


def test_restrict_interior_identity():
    I = sp.identity(5, format="csr")
    out = restrict_interior(I, [1, 2, 3], [1, 2, 3])
    assert np.allclose(out.toarray(), np.eye(3))


def test_restrict_interior_of_printed_g():
    op = restriction_1d(2, CPM1, 2)
    out = restrict_interior(op.G, [1], [1, 2])
    assert out.shape == (1, 2)
    assert np.allclose(out.toarray(), [[0.5, 0.5]])


@pytest.mark.parametrize("p", [2, 3, 4])
def test_restrict_interior_dimensions(p):
    op = restriction_1d(p, CPM1, 4)
    nc, nf = op.shape
    out = restrict_interior(op.G, np.arange(1, nc - 1), np.arange(1, nf - 1))
    assert out.shape == (nc - 2, nf - 2)
