"""Element matrices of the scaled-boundary plate formulation.

Displacements inside an element are ordered ``[u_z, u_x, u_y]`` per node
(3D ordering); strains and stresses are ordered
``[e_z, e_x, e_y, g_xy, g_yz, g_xz]``. All integrals use the element's own
GLL rule, so quadrature points coincide with nodes: ``E0`` and the mass
matrix come out block-diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, GeometryError
from .material import elasticity_matrix_3d, lame

# strain rows fed by through-thickness derivatives: e_z <- u_z,z,
# g_yz <- u_y,z, g_xz <- u_x,z
B1_ROWS = (0, 4, 5)

KG_MODES = ("deflection-only", "all-dof")


def thickness_matrix(h: float) -> np.ndarray:
    """Mass transformation ``H = diag(h^3/12, h^3/12, h)`` in plate DOF order."""
    return np.diag([h**3 / 12.0, h**3 / 12.0, h])


def b1_matrix() -> np.ndarray:
    # No 1/|J| factor: z-derivatives are untouched by the in-plane mapping.
    b1 = np.zeros((6, 3))
    b1[0, 0] = 1.0
    b1[4, 2] = 1.0
    b1[5, 1] = 1.0
    return b1


def b2_b3(x_eta, x_zeta, y_eta, y_zeta, det):
    """The two in-plane strain-operator matrices (each 6x3) at one point."""
    b2 = np.zeros((6, 3))
    b2[1, 1] = y_zeta
    b2[2, 2] = -x_zeta
    b2[3, 1] = -x_zeta
    b2[3, 2] = y_zeta
    b2[4, 0] = -x_zeta
    b2[5, 0] = y_zeta
    b3 = np.zeros((6, 3))
    b3[1, 1] = -y_eta
    b3[2, 2] = x_eta
    b3[3, 1] = x_eta
    b3[3, 2] = -y_eta
    b3[4, 0] = x_eta
    b3[5, 0] = -y_eta
    return b2 / det, b3 / det


@dataclass(frozen=True)
class StrainOperators:
    b1: np.ndarray
    b2: np.ndarray
    b3: np.ndarray
    B1: np.ndarray  # 6 x 3n_d
    B2: np.ndarray  # 6 x 3n_d


def strain_operators(jac, N, dN_deta, dN_dzeta) -> StrainOperators:
    """Build ``b1, b2, b3`` and ``B1 = b1 N``, ``B2 = b2 N,eta + b3 N,zeta``.

    ``jac`` is ``(x_eta, x_zeta, y_eta, y_zeta, detJ)``.
    """
    if not jac[4] > 0:
        raise GeometryError(f"non-positive Jacobian {jac[4]}")
    b1 = b1_matrix()
    b2, b3 = b2_b3(*jac)
    B1 = np.kron(np.asarray(N)[None, :], b1)
    B2 = np.kron(np.asarray(dN_deta)[None, :], b2) + np.kron(np.asarray(dN_dzeta)[None, :], b3)
    return StrainOperators(b1, b2, b3, B1, B2)


def _nodal_B2(jac: np.ndarray, de: np.ndarray, dz: np.ndarray) -> np.ndarray:
    """``B2`` at every node of the element, shape (n_d, 6, 3 n_d)."""
    nd = de.shape[0]
    out = np.empty((nd, 6, 3 * nd))
    for q in range(nd):
        b2, b3 = b2_b3(*jac[q])
        out[q] = np.kron(de[q][None, :], b2) + np.kron(dz[q][None, :], b3)
    return out


def element_coefficient_matrices(jac, weights, de, dz, E, nu):
    """``(E0e, E1e, E2e)`` of one element under GLL nodal quadrature.

    Parameters
    ----------
    jac : (n_d, 5) array
        Jacobian partials and determinant at each node.
    weights : (n_d,) array
        Tensor GLL weights.
    de, dz : (n_d, n_d) arrays
        Nodal derivative matrices of the 2D basis.
    E, nu : (n_d,) arrays
        Effective material at each node.
    """
    nd = len(weights)
    b1 = b1_matrix()
    B2 = _nodal_B2(jac, de, dz)
    wj = np.asarray(weights) * jac[:, 4]
    E0 = np.zeros((3 * nd, 3 * nd))
    E1 = np.zeros((3 * nd, 3 * nd))
    E2 = np.zeros((3 * nd, 3 * nd))
    for q in range(nd):
        d = elasticity_matrix_3d(E[q], nu[q])
        sl = slice(3 * q, 3 * q + 3)
        db1 = d @ b1
        E0[sl, sl] = wj[q] * (b1.T @ db1)
        E1[:, sl] = wj[q] * (B2[q].T @ db1)
        E2 += wj[q] * (B2[q].T @ d @ B2[q])
    return E0, E1, E2


def element_mass(jac, weights, rho, h: float) -> np.ndarray:
    """Nodal mass blocks ``w_i H rho_i |J_i|`` as an (n_d, 3) array of diagonals."""
    if not h > 0:
        raise ConfigurationError(f"thickness must be positive, got {h}")
    wj = np.asarray(weights) * jac[:, 4] * np.asarray(rho)
    return wj[:, None] * np.diag(thickness_matrix(h))[None, :]


def physical_gradients(jac, de, dz):
    """``(dN/dx, dN/dy)`` at the element nodes, each (n_d, n_d)."""
    x_eta, x_zeta, y_eta, y_zeta, det = (jac[:, k][:, None] for k in range(5))
    dndx = (y_zeta * de - y_eta * dz) / det
    dndy = (-x_zeta * de + x_eta * dz) / det
    return dndx, dndy


def element_geometric_stiffness(jac, weights, de, dz, n_inplane, h: float = 0.0,
                                mode: str = "deflection-only") -> np.ndarray:
    """Geometric stiffness in plate DOF order ``(theta_x, theta_y, w)``.

    ``n_inplane`` is the 2x2 resultant matrix ``[[Nx, Nxy], [Nxy, Ny]]``,
    positive in compression. ``mode='all-dof'`` adds the rotation gradient
    terms weighted by ``h^2/12``.
    """
    n_in = np.asarray(n_inplane, dtype=float)
    if n_in.shape != (2, 2) or not np.allclose(n_in, n_in.T, rtol=0, atol=1e-14 * (1 + abs(n_in).max())):
        raise ConfigurationError("in-plane resultant matrix must be symmetric 2x2")
    if mode not in KG_MODES:
        raise ConfigurationError(f"unknown geometric stiffness mode {mode!r}", path="analysis.kg_mode")
    dndx, dndy = physical_gradients(jac, de, dz)
    wj = np.asarray(weights) * jac[:, 4]
    g = np.stack([dndx, dndy], axis=1)  # (n_q, 2, n_d)
    scalar = np.einsum("q,qai,ab,qbj->ij", wj, g, n_in, g)
    nd = len(weights)
    kg = np.zeros((3 * nd, 3 * nd))
    kg[2::3, 2::3] = scalar
    if mode == "all-dof":
        kg[0::3, 0::3] = h**2 / 12.0 * scalar
        kg[1::3, 1::3] = h**2 / 12.0 * scalar
    return kg


def e0_block_condensed(E: float, nu: float) -> np.ndarray:
    """Pointwise ``b1^T D b1`` (per unit weight), handy for checks."""
    lam, mu = lame(E, nu)
    return np.diag([lam + 2 * mu, mu, mu])
