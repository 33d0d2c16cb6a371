import math

import numpy as np
import pytest

from sbfem_plate.basis import eval_shape_2d, spectral_basis_2d
from sbfem_plate.errors import ConfigurationError
from sbfem_plate.kernel import (
    b1_matrix,
    b2_b3,
    e0_block_condensed,
    element_coefficient_matrices,
    element_geometric_stiffness,
    element_mass,
    strain_operators,
    thickness_matrix,
)
from sbfem_plate.material import SI3N4, elasticity_matrix_3d, lame
from sbfem_plate.mesh import PlateGeometry, build_mesh, element_jacobian, nodal_jacobians


def _element(p=3, size=(0.5, 0.25), psi=0.0):
    geom = PlateGeometry(size[0], size[1], 0.01, psi)
    mesh = build_mesh(geom, 1, 1, p)
    de, dz = mesh.basis.nodal_derivatives()
    return mesh, nodal_jacobians(mesh, 0), de, dz


def _gauss_oracle(mesh, E, nu, q):
    """E0, E1, E2 of element 0 by dense Gauss-Legendre quadrature with q points."""
    x, w = np.polynomial.legendre.leggauss(q)
    d = elasticity_matrix_3d(E, nu)
    nd = mesh.basis.n_nodes
    e0, e1, e2 = (np.zeros((3 * nd, 3 * nd)) for _ in range(3))
    for i, zeta in enumerate(x):
        for j, eta in enumerate(x):
            n, dne, dnz = eval_shape_2d(mesh.basis, eta, zeta)
            jac = element_jacobian(mesh, 0, eta, zeta)
            ops = strain_operators(jac, n, dne, dnz)
            f = w[i] * w[j] * jac[4]
            e0 += f * ops.B1.T @ d @ ops.B1
            e1 += f * ops.B2.T @ d @ ops.B1
            e2 += f * ops.B2.T @ d @ ops.B2
    return e0, e1, e2


def test_identity_map_b2_pattern():
    b2, b3 = b2_b3(1.0, 0.0, 0.0, 1.0, 1.0)
    expected_b2 = np.zeros((6, 3))
    expected_b2[1, 1] = expected_b2[3, 2] = expected_b2[5, 0] = 1.0
    np.testing.assert_array_equal(b2, expected_b2)
    expected_b3 = np.zeros((6, 3))
    expected_b3[2, 2] = expected_b3[3, 1] = expected_b3[4, 0] = 1.0
    np.testing.assert_array_equal(b3, expected_b3)


def test_b1_selection():
    b1 = b1_matrix()
    assert np.linalg.matrix_rank(b1.T @ b1) == 3
    np.testing.assert_array_equal(b1.T @ b1, np.eye(3))


@pytest.mark.parametrize("psi", [0.0, math.radians(30)])
def test_B2_differentiates_linear_fields(psi):
    mesh, _, _, _ = _element(psi=psi)
    nodes = mesh.connectivity[0]
    x, y = mesh.xy[nodes, 0], mesh.xy[nodes, 1]
    # u_z = 2x - y, u_x = 3x + y, u_y = -x + 4y  (order per node: u_z, u_x, u_y)
    u = np.column_stack([2 * x - y, 3 * x + y, -x + 4 * y]).ravel()
    n, dne, dnz = eval_shape_2d(mesh.basis, 0.37, -0.21)
    ops = strain_operators(element_jacobian(mesh, 0, 0.37, -0.21), n, dne, dnz)
    eps = ops.B2 @ u
    # [ez, ex, ey, gxy, gyz, gxz] from in-plane derivatives only
    np.testing.assert_allclose(eps, [0, 3, 4, 1 - 1, -1, 2], atol=1e-10)


def test_B1_rank_per_node():
    mesh, _, _, _ = _element()
    n, dne, dnz = eval_shape_2d(mesh.basis, 0.1, 0.2)
    ops = strain_operators(element_jacobian(mesh, 0, 0.1, 0.2), n, dne, dnz)
    g = ops.B1.T @ ops.B1
    for i in range(16):
        assert np.linalg.matrix_rank(g[3 * i : 3 * i + 3, 3 * i : 3 * i + 3], tol=1e-12) in (0, 3)


def test_E0_node_block_closed_form():
    mesh, jac, de, dz = _element()
    E = np.full(16, 200e9)
    nu = np.full(16, 0.3)
    e0, _, _ = element_coefficient_matrices(jac, mesh.basis.weights, de, dz, E, nu)
    lam, mu = lame(200e9, 0.3)
    for i in range(16):
        blk = e0[3 * i : 3 * i + 3, 3 * i : 3 * i + 3]
        f = mesh.basis.weights[i] * jac[i, 4]
        np.testing.assert_allclose(blk, f * np.diag([lam + 2 * mu, mu, mu]), rtol=1e-13)
        np.testing.assert_allclose(blk, f * e0_block_condensed(200e9, 0.3), rtol=1e-13)
    off = e0.copy()
    for i in range(16):
        off[3 * i : 3 * i + 3, 3 * i : 3 * i + 3] = 0
    assert not off.any()


def test_E2_symmetric_psd():
    mesh, jac, de, dz = _element(psi=math.radians(20))
    e0, e1, e2 = element_coefficient_matrices(jac, mesh.basis.weights, de, dz,
                                              np.full(16, 1e9), np.full(16, 0.25))
    np.testing.assert_allclose(e2, e2.T, rtol=0, atol=1e-12 * abs(e2).max())
    assert np.linalg.eigvalsh(e2).min() > -1e-9 * abs(e2).max()


def _smooth_fields(mesh):
    x, y = mesh.xy[:, 0], mesh.xy[:, 1]
    u = np.column_stack([np.sin(2 * x + y), np.cos(x - 3 * y), np.exp(x * y)]).ravel()
    v = np.column_stack([np.cos(3 * x) * y, np.sin(x + 2 * y), x**2 - y]).ravel()
    return u, v


@pytest.mark.parametrize("psi", [0.0, 0.3])
def test_E1_against_gauss_legendre(psi):
    """Nodal quadrature vs. dense Gauss-Legendre (p + 2 points) on smooth fields.

    Entry by entry the two differ by the usual lumping gap (tens of percent
    at p = 3); the bilinear forms on interpolated smooth fields must agree.
    """
    errors = []
    for p in (2, 3, 4, 5):
        mesh, jac, de, dz = _element(p=p, psi=psi)
        nd = mesh.basis.n_nodes
        _, e1, e2 = element_coefficient_matrices(jac, mesh.basis.weights, de, dz,
                                                 np.full(nd, SI3N4.E), np.full(nd, SI3N4.nu))
        _, g1, g2 = _gauss_oracle(mesh, SI3N4.E, SI3N4.nu, p + 2)
        u, v = _smooth_fields(mesh)
        err1 = abs(u @ e1 @ v - u @ g1 @ v) / abs(u @ g1 @ v)
        err2 = abs(u @ e2 @ v - u @ g2 @ v) / abs(u @ g2 @ v)
        assert err1 < 0.02 and err2 < 0.02
        errors.append(err1)
    assert all(b < a for a, b in zip(errors, errors[1:]))


def test_E1_entry_gap_shrinks_with_order():
    gaps = []
    for p in (2, 3, 4, 5):
        mesh, jac, de, dz = _element(p=p)
        nd = mesh.basis.n_nodes
        _, e1, _ = element_coefficient_matrices(jac, mesh.basis.weights, de, dz,
                                                np.full(nd, 1e9), np.full(nd, 0.3))
        _, g1, _ = _gauss_oracle(mesh, 1e9, 0.3, p + 2)
        gaps.append(np.linalg.norm(e1 - g1) / np.linalg.norm(g1))
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_E0_matches_gauss_oracle_on_constants():
    """With constant nodal vectors the nodal and exact E0 forms coincide."""
    mesh, jac, de, dz = _element()
    e0, _, _ = element_coefficient_matrices(jac, mesh.basis.weights, de, dz,
                                            np.full(16, 1e9), np.full(16, 0.3))
    g0, _, _ = _gauss_oracle(mesh, 1e9, 0.3, 5)
    one = np.tile([1.0, 2.0, -1.0], 16)
    assert one @ e0 @ one == pytest.approx(one @ g0 @ one, rel=1e-12)


def test_gradation_off_matches_homogeneous():
    from sbfem_plate.material import MaterialPair

    mesh, jac, de, dz = _element()
    E, nu, _ = MaterialPair(gradient_index=0.0).properties_at(mesh.st[:, 0], 0.5)
    a = element_coefficient_matrices(jac, mesh.basis.weights, de, dz, E, nu)
    b = element_coefficient_matrices(jac, mesh.basis.weights, de, dz,
                                     np.full(16, SI3N4.E), np.full(16, SI3N4.nu))
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)


def test_mass_entries():
    mesh, jac, _, _ = _element(size=(1.0, 1.0))
    h = 0.01
    m = element_mass(jac, mesh.basis.weights, np.full(16, SI3N4.rho), h)
    assert m.shape == (16, 3)
    assert np.all(m > 0)
    assert m[:, 2].sum() == pytest.approx(SI3N4.rho * h)  # 23.70 kg
    assert m[:, 2].sum() == pytest.approx(23.70)
    np.testing.assert_allclose(m[:, 0], m[:, 2] * h**2 / 12)
    np.testing.assert_allclose(np.diag(thickness_matrix(h)), [h**3 / 12, h**3 / 12, h])


def test_mass_rejects_bad_thickness():
    mesh, jac, _, _ = _element()
    with pytest.raises(ConfigurationError):
        element_mass(jac, mesh.basis.weights, np.ones(16), 0.0)


def _laplacian_oracle(mesh, q=None):
    """Scalar stiffness int grad(N)^T grad(N) dA, by GLL (q None) or Gauss quadrature."""
    if q is None:
        pts = mesh.basis.nodes
        wts = mesh.basis.weights
    else:
        x, w = np.polynomial.legendre.leggauss(q)
        pts = np.array([(e, z) for z in x for e in x])
        wts = np.outer(w, w).ravel()
    k = np.zeros((mesh.basis.n_nodes,) * 2)
    for (eta, zeta), wq in zip(pts, wts):
        _, dne, dnz = eval_shape_2d(mesh.basis, eta, zeta)
        xe, xz, ye, yz, det = element_jacobian(mesh, 0, eta, zeta)
        dx = (yz * dne - ye * dnz) / det
        dy = (-xz * dne + xe * dnz) / det
        k += wq * det * (np.outer(dx, dx) + np.outer(dy, dy))
    return k


@pytest.mark.parametrize("psi", [0.0, math.radians(25)])
def test_geometric_stiffness_laplacian(psi):
    mesh, jac, de, dz = _element(psi=psi)
    kg = element_geometric_stiffness(jac, mesh.basis.weights, de, dz, np.eye(2))
    lap = _laplacian_oracle(mesh)
    np.testing.assert_allclose(kg[2::3, 2::3], lap, rtol=1e-10, atol=1e-10 * abs(lap).max())
    assert not kg[0::3].any() and not kg[1::3].any()
    exact = _laplacian_oracle(mesh, q=6)
    x, y = mesh.xy[:, 0], mesh.xy[:, 1]
    f = np.sin(2 * x + y) + x * y
    assert f @ lap @ f == pytest.approx(f @ exact @ f, rel=1e-4)


def test_geometric_stiffness_trivial_cases():
    mesh, jac, de, dz = _element()
    w = mesh.basis.weights
    assert not element_geometric_stiffness(jac, w, de, dz, np.zeros((2, 2))).any()
    kg = element_geometric_stiffness(jac, w, de, dz, np.diag([1.0, 0.0]))
    const = np.zeros(48)
    const[2::3] = 1.0
    np.testing.assert_allclose(kg @ const, 0, atol=1e-10 * abs(kg).max())
    with pytest.raises(ConfigurationError):
        element_geometric_stiffness(jac, w, de, dz, np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(ConfigurationError):
        element_geometric_stiffness(jac, w, de, dz, np.eye(2), mode="bogus")


def test_geometric_stiffness_all_dof():
    mesh, jac, de, dz = _element()
    h = 0.05
    w = mesh.basis.weights
    base = element_geometric_stiffness(jac, w, de, dz, np.eye(2), h=h)
    full = element_geometric_stiffness(jac, w, de, dz, np.eye(2), h=h, mode="all-dof")
    np.testing.assert_allclose(full[0::3, 0::3], h**2 / 12 * base[2::3, 2::3])
    np.testing.assert_allclose(full[1::3, 1::3], h**2 / 12 * base[2::3, 2::3])
    np.testing.assert_allclose(full[2::3, 2::3], base[2::3, 2::3])
