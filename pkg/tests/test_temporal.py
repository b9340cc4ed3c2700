import numpy as np
import pytest

from multirate_st.temporal import (
    NestingError,
    TemporalMesh,
    UnsupportedOrderError,
    build_hierarchy,
    dg_basis,
    restriction_matrix,
    temporal_matrix,
)


def test_hierarchy_one_to_four():
    h = build_hierarchy(4.0, 4, 1, 4)
    assert h.field_meshes[1].n_elements == 16
    np.testing.assert_allclose(np.diff(h.field_meshes[1].breakpoints), 0.25)
    np.testing.assert_array_equal(h.fine.breakpoints, h.field_meshes[1].breakpoints)
    assert list(h.sub_counts) == [(1, 4)] * 4
    assert h.ratio_label == "1:4"


def test_hierarchy_single_rate():
    h = build_hierarchy(1.0, 50, 1, 1)
    for mesh in (h.coarse, h.fine, *h.field_meshes):
        assert mesh.n_elements == 50
        np.testing.assert_array_equal(mesh.breakpoints, h.coarse.breakpoints)


def test_hierarchy_two_and_four():
    h = build_hierarchy(8.0, 2, 2, 4)
    assert h.fine.n_elements == 8
    np.testing.assert_allclose(h.fine.breakpoints, np.arange(9.0))
    for mesh in h.field_meshes:
        assert np.all(np.isin(mesh.breakpoints, h.fine.breakpoints))
    assert h.slab(1) == pytest.approx((4.0, 8.0))


@pytest.mark.parametrize("args", [(1.0, 4, 3, 1), (1.0, 4, 1, 6), (0.0, 4, 1, 1), (1.0, 0, 1, 1)])
def test_hierarchy_rejects_bad_input(args):
    with pytest.raises(ValueError):
        build_hierarchy(*args)


def test_mesh_invariants():
    with pytest.raises(ValueError):
        TemporalMesh(np.array([0.0, 0.5, 0.5, 1.0]))
    with pytest.raises(ValueError):
        TemporalMesh(np.array([0.1, 1.0]))
    m = TemporalMesh(np.array([0.0, 0.25, 1.0]))
    assert m.T == 1.0 and m.elements == [(0.0, 0.25), (0.25, 1.0)]


def test_dg0_single_indicator():
    b = dg_basis((0.0, 3.0), 1, 0)
    assert b.ndofs == 1
    np.testing.assert_allclose(b.evaluate([0.0, 1.3, 3.0]), 1.0)


def test_dg1_two_subelements_is_four_half_hats():
    b = dg_basis((1.0, 3.0), 2, 1)
    assert b.ndofs == 4
    t = np.array([1.0, 1.5, 2.5, 3.0])
    vals = b.evaluate(t)
    np.testing.assert_allclose(vals[:, 1], [0.5, 0.5, 0, 0])
    np.testing.assert_allclose(vals[:, 2], [0, 0, 0.5, 0.5])
    np.testing.assert_allclose(b.start_values(), [1, 0, 0, 0])
    np.testing.assert_allclose(b.end_values(), [0, 0, 0, 1])


def test_unsupported_order():
    with pytest.raises(UnsupportedOrderError):
        dg_basis((0.0, 1.0), 1, 2)


@pytest.mark.parametrize("r", [0, 1])
@pytest.mark.parametrize("n_sub", [1, 2, 8])
def test_partition_of_unity(r, n_sub):
    b = dg_basis((0.2, 1.7), n_sub, r)
    rng = np.random.default_rng(1)
    for e in range(n_sub):
        a, c = b.breakpoints[e], b.breakpoints[e + 1]
        t = rng.uniform(a, c, 10)
        vals = b.evaluate(t, element=np.full(10, e))
        np.testing.assert_allclose(vals.sum(axis=0), 1.0, atol=1e-13)
        # support is exactly the own sub-element
        others = np.setdiff1d(np.arange(b.ndofs), b.element_dofs(e))
        assert np.all(vals[others] == 0.0)


def test_restriction_examples():
    c1, f1 = dg_basis((0.0, 1.0), 1, 1), dg_basis((0.0, 1.0), 2, 1)
    np.testing.assert_allclose(restriction_matrix(c1, f1), [[1, 0.5, 0.5, 0], [0, 0.5, 0.5, 1]])
    c0, f0 = dg_basis((0.0, 1.0), 1, 0), dg_basis((0.0, 1.0), 2, 0)
    np.testing.assert_allclose(restriction_matrix(c0, f0), [[1, 1]])
    np.testing.assert_allclose(restriction_matrix(f1, f1), np.eye(4))


@pytest.mark.parametrize("r", [0, 1])
@pytest.mark.parametrize("n", [(1, 2), (2, 8), (1, 16)])
def test_restriction_reproduces_coarse_functions(r, n):
    slab = (0.5, 2.0)
    coarse, fine = dg_basis(slab, n[0], r), dg_basis(slab, n[1], r)
    R = restriction_matrix(coarse, fine)
    t = np.random.default_rng(2).uniform(*slab, 50)
    assert np.max(np.abs(coarse.evaluate(t) - R @ fine.evaluate(t))) < 1e-13


def test_restriction_rejects_non_nested():
    with pytest.raises(NestingError):
        restriction_matrix(dg_basis((0.0, 1.0), 3, 0), dg_basis((0.0, 1.0), 2, 0))
    with pytest.raises(NestingError):
        restriction_matrix(dg_basis((0.0, 1.0), 1, 0), dg_basis((0.0, 2.0), 2, 0))


def test_temporal_matrix_examples():
    k = 0.8
    b0 = dg_basis((0.0, k), 2, 0)
    np.testing.assert_allclose(temporal_matrix(b0, b0, "mass"), np.diag([k / 2, k / 2]))
    np.testing.assert_allclose(temporal_matrix(b0, b0, "jump_plus_initial"), [[1, 0], [-1, 1]])
    np.testing.assert_allclose(temporal_matrix(b0, b0, "dt_mass"), 0.0)
    b1 = dg_basis((1.0, 1.0 + k), 1, 1)
    np.testing.assert_allclose(temporal_matrix(b1, b1, "mass"), k / 6 * np.array([[2, 1], [1, 2]]))
    np.testing.assert_allclose(temporal_matrix(b1, b1, "dt_mass"), [[-0.5, 0.5], [-0.5, 0.5]])
    np.testing.assert_allclose(temporal_matrix(b1, b1, "jump_plus_initial"), [[1, 0], [0, 0]])


@pytest.mark.parametrize("r", [0, 1])
def test_mass_is_spd_and_restricts(r):
    coarse, fine = dg_basis((0.0, 1.0), 2, r), dg_basis((0.0, 1.0), 8, r)
    Mf = temporal_matrix(fine, fine, "mass")
    np.testing.assert_allclose(Mf, Mf.T)
    assert np.all(np.linalg.eigvalsh(Mf) > 0)
    R = restriction_matrix(coarse, fine)
    np.testing.assert_allclose(temporal_matrix(coarse, coarse, "mass"), R @ Mf @ R.T, atol=1e-15)


def test_temporal_matrix_errors():
    a, b = dg_basis((0.0, 1.0), 1, 0), dg_basis((0.0, 1.0), 2, 0)
    with pytest.raises(ValueError):
        temporal_matrix(a, b, "mass")
    with pytest.raises(ValueError):
        temporal_matrix(a, a, "stiffness")
