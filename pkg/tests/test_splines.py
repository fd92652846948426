import numpy as np
import pytest

from igamli.errors import UnsupportedCaseError
from igamli.splines import (
    C0,
    CPM1,
    basis_row,
    eval_basis,
    eval_basis_deriv,
    eval_explicit,
    greville,
    make_space,
    open_uniform_knots,
    space_dim,
)


def test_open_knots_level1_p2():
    kv = open_uniform_knots(2, 1, CPM1)
    assert np.allclose(kv.values, [0, 0, 0, 1, 1, 1])


def test_open_knots_level2_p2():
    kv = open_uniform_knots(2, 2, CPM1)
    assert np.allclose(kv.values, [0, 0, 0, 0.5, 1, 1, 1])


def test_open_knots_c0_multiplicity():
    kv = open_uniform_knots(3, 2, C0)
    assert np.allclose(kv.values, [0, 0, 0, 0, 0.5, 0.5, 0.5, 1, 1, 1, 1])
    assert kv.dim == 7


def test_open_knots_rejects_non_dyadic():
    with pytest.raises(ValueError):
        open_uniform_knots(2, 3)


@pytest.mark.parametrize("p,level,cont,dim", [
    (2, 3, CPM1, 6), (3, 4, CPM1, 11), (4, 2, CPM1, 6),
    (2, 3, C0, 9), (3, 3, C0, 13), (4, 4, C0, 33),
])
def test_space_dims(p, level, cont, dim):
    sp = make_space(p, level, cont)
    assert sp.dim == dim == space_dim(p, level, cont)
    assert sp.dim == len(sp.knots.values) - p - 1


def test_eval_basis_level1_midpoint():
    sp = make_space(2, 1)
    first, vals = eval_basis(sp, 0.5)
    assert first == 0
    assert np.allclose(vals, [0.25, 0.5, 0.25])


def test_eval_basis_endpoint_interpolation():
    for p, cont in [(2, CPM1), (3, C0), (4, CPM1), (1, CPM1)]:
        sp = make_space(p, 3, cont)
        first, vals = eval_basis(sp, 0.0)
        assert first == 0
        assert vals[0] == pytest.approx(1.0)
        assert np.allclose(vals[1:], 0.0)
        _, vals = eval_basis(sp, 1.0)
        assert vals[-1] == pytest.approx(1.0)


def test_eval_basis_level2_row():
    sp = make_space(2, 2)
    row = basis_row(sp, 0.25)
    assert np.allclose(row, [0.25, 0.625, 0.125, 0.0])


def test_eval_basis_domain_error():
    sp = make_space(2, 2)
    with pytest.raises(ValueError):
        eval_basis(sp, 1.5)
    with pytest.raises(ValueError):
        eval_basis_deriv(sp, -0.1)


def test_deriv_level1_p2():
    sp = make_space(2, 1)
    _, d = eval_basis_deriv(sp, 0.5)
    assert np.allclose(d, [-1.0, 0.0, 1.0])


def test_deriv_hat_functions():
    sp = make_space(1, 2)
    first, d = eval_basis_deriv(sp, 0.25)
    assert first == 0
    assert np.allclose(d, [-2.0, 2.0])


@pytest.mark.parametrize("p", [1, 2, 3, 4])
@pytest.mark.parametrize("cont", [CPM1, C0])
def test_partition_of_unity_and_positivity(p, cont):
    sp = make_space(p, 4, cont)
    for x in np.linspace(0, 1, 173):
        _, vals = eval_basis(sp, x)
        assert abs(vals.sum() - 1.0) < 1e-13
        assert np.all(vals >= -1e-15)
        _, ders = eval_basis_deriv(sp, x)
        assert abs(ders.sum()) < 1e-11


@pytest.mark.parametrize("p", [2, 3, 4])
@pytest.mark.parametrize("cont", [CPM1, C0])
def test_local_support(p, cont):
    sp = make_space(p, 4, cont)
    kv = sp.knots.values
    rng = np.random.default_rng(7)
    for x in rng.uniform(0, 1, 50):
        row = basis_row(sp, x)
        for i in np.nonzero(np.abs(row) > 0)[0]:
            assert kv[i] <= x <= kv[i + p + 1]


@pytest.mark.parametrize("p", [2, 3, 4])
@pytest.mark.parametrize("cont", [CPM1, C0])
def test_deriv_matches_finite_differences(p, cont):
    sp = make_space(p, 3, cont)
    eps = 1e-6
    # stay away from breakpoints where C0 derivatives jump
    for x in np.linspace(0.013, 0.987, 41):
        if cont == C0 and min((x * sp.n_spans) % 1, 1 - (x * sp.n_spans) % 1) < 0.02:
            continue
        first, d = eval_basis_deriv(sp, x)
        rp = basis_row(sp, x + eps)
        rm = basis_row(sp, x - eps)
        fd = (rp - rm)[first : first + p + 1] / (2 * eps)
        assert np.allclose(d, fd, atol=1e-5)


def test_explicit_examples():
    # boundary function at half its first span
    for k in (3, 4, 5):
        h = 2.0 ** (1 - k)
        assert eval_explicit(2, CPM1, k, 0, h / 2) == pytest.approx(0.25)
    # level-1 cubic: 3x(1-x)^2 at 0.5
    assert eval_explicit(3, CPM1, 1, 1, 0.5) == pytest.approx(0.375)
    # endpoint interpolation
    assert eval_explicit(4, C0, 2, 0, 0.0) == pytest.approx(1.0)


def test_explicit_unsupported():
    with pytest.raises(UnsupportedCaseError):
        eval_explicit(5, CPM1, 3, 0, 0.5)
    with pytest.raises(UnsupportedCaseError):
        eval_explicit(2, CPM1, 3, 99, 0.5)
    with pytest.raises(ValueError):
        eval_explicit(2, CPM1, 3, 0, 1.5)


@pytest.mark.parametrize("p", [2, 3, 4])
@pytest.mark.parametrize("cont", [CPM1, C0])
@pytest.mark.parametrize("level", [1, 2, 3, 4, 5])
def test_explicit_matches_recursion(p, cont, level):
    sp = make_space(p, level, cont)
    xs = np.linspace(0, 1, 211)
    for x in xs:
        row = basis_row(sp, x)
        for i in range(sp.dim):
            val = eval_explicit(p, cont, level, i, x)
            assert val == pytest.approx(row[i], abs=1e-13)


def test_greville_interlaces_support():
    sp = make_space(3, 3, C0)
    g = greville(sp)
    assert g[0] == 0.0 and g[-1] == 1.0
    assert np.all(np.diff(g) > 0)
