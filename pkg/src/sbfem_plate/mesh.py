"""Structured spectral-element meshes of rectangular and skew plates.

The plate occupies the parent rectangle ``(s, t) in [0, a] x [0, b]`` which is
sheared into the physical parallelogram by ``x = s + t sin(psi)``,
``y = t cos(psi)``. Edges are numbered ``1: t=0, 2: s=a, 3: t=b, 4: s=0``.

Each node carries three plate DOFs in the order ``(theta_x, theta_y, w)``,
where ``theta_x = du_x/dz`` and ``theta_y = du_y/dz`` at the mid-surface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .basis import SpectralBasis2D, eval_shape_2d, spectral_basis_2d
from .errors import ConfigurationError, GeometryError

DOFS_PER_NODE = 3
THETA_X, THETA_Y, W = 0, 1, 2

BC_LETTERS = frozenset("SCF")


@dataclass(frozen=True)
class PlateGeometry:
    a: float
    b: float
    h: float
    psi: float = 0.0  # radians

    def __post_init__(self):
        for name in ("a", "b", "h"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ConfigurationError(f"must be positive, got {v}", path=f"geometry.{name}")
        if not abs(self.psi) < math.pi / 2:
            raise ConfigurationError(f"|psi| must be < 90 deg, got {self.psi} rad", path="geometry.psi")

    def to_physical(self, s, t):
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        return s + t * math.sin(self.psi), t * math.cos(self.psi)

    @property
    def area(self) -> float:
        return self.a * self.b * math.cos(self.psi)


@dataclass(frozen=True)
class BoundarySpec:
    """Four edge letters from ``{S, C, F}`` for edges ``t=0, s=a, t=b, s=0``."""

    code: str

    def __post_init__(self):
        code = str(self.code).upper()
        if len(code) != 4 or not set(code) <= BC_LETTERS:
            raise ConfigurationError(
                f"expected four letters from S/C/F, got {self.code!r}", path="bc"
            )
        object.__setattr__(self, "code", code)

    def __str__(self) -> str:
        return self.code

    def swapped(self) -> "BoundarySpec":
        """Rotate the letters one edge along (``SCSC`` -> ``CSCS``)."""
        return BoundarySpec(self.code[1:] + self.code[0])


@dataclass(frozen=True, eq=False)
class SpectralMesh:
    geometry: PlateGeometry
    nex: int
    nez: int
    order: int
    basis: SpectralBasis2D = field(repr=False)
    st: np.ndarray = field(repr=False)  # parent coordinates, (n_nodes, 2)
    xy: np.ndarray = field(repr=False)  # physical coordinates, (n_nodes, 2)
    connectivity: np.ndarray = field(repr=False)  # (n_elements, n_d)
    edges: tuple = field(repr=False)  # four node-id arrays, ordered along the edge

    @property
    def n_nodes(self) -> int:
        return self.xy.shape[0]

    @property
    def n_elements(self) -> int:
        return self.connectivity.shape[0]

    @property
    def n_dofs(self) -> int:
        return DOFS_PER_NODE * self.n_nodes

    def dof(self, node, component):
        """Global plate DOF id of ``component`` (0..2) at ``node``."""
        return DOFS_PER_NODE * np.asarray(node) + component

    def edge_tangent(self, edge: int) -> np.ndarray:
        """Unit tangent of edge 1..4 in physical coordinates."""
        psi = self.geometry.psi
        if edge in (1, 3):
            return np.array([1.0, 0.0])
        return np.array([math.sin(psi), math.cos(psi)])

    def to_csv(self) -> str:
        lines = ["node,x,y"]
        lines += [f"{i},{x:.10g},{y:.10g}" for i, (x, y) in enumerate(self.xy)]
        return "\n".join(lines) + "\n"


def _grid_1d(length: float, n_el: int, nodes: np.ndarray) -> np.ndarray:
    p = nodes.size - 1
    coords = np.empty(n_el * p + 1)
    h = length / n_el
    for e in range(n_el):
        coords[e * p : (e + 1) * p + 1] = e * h + 0.5 * h * (nodes + 1.0)
    coords[-1] = length
    return coords


def build_mesh(geom: PlateGeometry, nex: int, nez: int, p: int) -> SpectralMesh:
    """Structured ``nex x nez`` mesh of order-``p`` spectral elements.

    Global node ``(I, J)`` has id ``J * (nex p + 1) + I`` so the numbering,
    like the local one, ascends along ``s`` first.
    """
    if int(nex) != nex or int(nez) != nez or nex < 1 or nez < 1:
        raise ConfigurationError(f"element counts must be >= 1, got {nex}x{nez}", path="mesh")
    if int(p) != p or p < 2:
        raise ConfigurationError(
            f"order must be >= 2 to represent constant curvature, got {p}", path="mesh.order"
        )
    nex, nez, p = int(nex), int(nez), int(p)
    basis = spectral_basis_2d(p)
    s1 = _grid_1d(geom.a, nex, basis.eta.nodes)
    t1 = _grid_1d(geom.b, nez, basis.zeta.nodes)
    ns, nt = s1.size, t1.size
    ss, tt = np.meshgrid(s1, t1)
    st = np.column_stack([ss.ravel(), tt.ravel()])
    x, y = geom.to_physical(st[:, 0], st[:, 1])
    xy = np.column_stack([x, y])

    local_i = np.tile(np.arange(p + 1), p + 1)
    local_j = np.repeat(np.arange(p + 1), p + 1)
    conn = np.empty((nex * nez, (p + 1) ** 2), dtype=np.int64)
    for je in range(nez):
        for ie in range(nex):
            conn[je * nex + ie] = (je * p + local_j) * ns + ie * p + local_i

    grid = np.arange(ns * nt).reshape(nt, ns)
    edges = (grid[0, :], grid[:, -1], grid[-1, :], grid[:, 0])
    return SpectralMesh(geom, nex, nez, p, basis, st, xy, conn, edges)


def element_jacobian(mesh: SpectralMesh, element: int, eta: float, zeta: float):
    """Return ``(x_eta, x_zeta, y_eta, y_zeta, detJ)`` at a reference point."""
    nodes = mesh.connectivity[element]
    _, dn_deta, dn_dzeta = eval_shape_2d(mesh.basis, eta, zeta)
    x, y = mesh.xy[nodes, 0], mesh.xy[nodes, 1]
    x_eta, x_zeta = dn_deta @ x, dn_dzeta @ x
    y_eta, y_zeta = dn_deta @ y, dn_dzeta @ y
    det = x_eta * y_zeta - x_zeta * y_eta
    if not det > 0:
        raise GeometryError(f"element {element}: non-positive Jacobian {det}")
    return x_eta, x_zeta, y_eta, y_zeta, det


def nodal_jacobians(mesh: SpectralMesh, element: int) -> np.ndarray:
    """Jacobian partials at every node of ``element``, shape (n_d, 5)."""
    nodes = mesh.connectivity[element]
    de, dz = mesh.basis.nodal_derivatives()
    x, y = mesh.xy[nodes, 0], mesh.xy[nodes, 1]
    x_eta, x_zeta, y_eta, y_zeta = de @ x, dz @ x, de @ y, dz @ y
    det = x_eta * y_zeta - x_zeta * y_eta
    if np.any(det <= 0):
        raise GeometryError(f"element {element}: non-positive Jacobian {det.min()}")
    return np.column_stack([x_eta, x_zeta, y_eta, y_zeta, det])


@dataclass(frozen=True, eq=False)
class Constraints:
    """Resolved boundary constraints.

    ``fixed`` holds DOF ids in the nodal frame; for nodes listed in
    ``rotations`` that frame is ``(theta_t, theta_n, w)`` where
    ``theta_local = R @ theta_global``.
    """

    n_dofs: int
    fixed: np.ndarray
    rotations: dict

    @property
    def free(self) -> np.ndarray:
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.fixed] = False
        return np.flatnonzero(mask)

    def transform(self) -> sp.csr_matrix:
        """Sparse ``T`` with ``d_global = T @ d_free``."""
        rot = sp.lil_matrix((self.n_dofs, self.n_dofs))
        rot.setdiag(1.0)
        for node, r in self.rotations.items():
            i = DOFS_PER_NODE * node
            rot[i : i + 2, i : i + 2] = r.T
        return rot.tocsr()[:, self.free]


def constrained_dofs(mesh: SpectralMesh, bc: BoundarySpec | str) -> Constraints:
    """Resolve edge letters into fixed DOFs (and nodal rotations on oblique S edges).

    ``C`` fixes all three DOFs, ``S`` fixes ``w`` and the edge-tangential
    rotation ``theta . t``, ``F`` fixes nothing. Corners take the union.
    """
    bc = bc if isinstance(bc, BoundarySpec) else BoundarySpec(bc)
    w_fixed: set[int] = set()
    theta_rows: dict[int, list[np.ndarray]] = {}
    for k, letter in enumerate(bc.code):
        edge = k + 1
        if letter == "F":
            continue
        t = mesh.edge_tangent(edge)
        for node in mesh.edges[k].tolist():
            w_fixed.add(node)
            rows = theta_rows.setdefault(node, [])
            if letter == "C":
                rows.extend([np.array([1.0, 0.0]), np.array([0.0, 1.0])])
            else:
                rows.append(t)

    fixed = [DOFS_PER_NODE * n + W for n in w_fixed]
    rotations = {}
    for node, rows in theta_rows.items():
        c = np.array(rows)
        base = DOFS_PER_NODE * node
        if np.linalg.matrix_rank(c, tol=1e-10) >= 2:
            fixed += [base + THETA_X, base + THETA_Y]
            continue
        t = c[0] / np.linalg.norm(c[0])
        if abs(t[0]) < 1e-14:
            fixed.append(base + THETA_Y)
        elif abs(t[1]) < 1e-14:
            fixed.append(base + THETA_X)
        else:
            rotations[node] = np.array([[t[0], t[1]], [-t[1], t[0]]])
            fixed.append(base + 0)
    return Constraints(mesh.n_dofs, np.array(sorted(fixed), dtype=np.int64), rotations)
