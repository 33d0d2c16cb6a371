"""Global assembly, plate stiffness, eigen-solves and nondimensional output.

Pipeline for one analysis::

    mesh -> assemble()            global E0, E1, E2 (3D ordering), nodal masses
         -> build_A()             coefficient matrix blocks
         -> build_plate_stiffness reduced plate K in (theta_x, theta_y, w)
         -> reduce()              boundary elimination
         -> solve_vibration / solve_buckling
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernel
from .errors import ConfigurationError, MaterialError, NumericalError
from .material import MaterialPair, PhaseProperties
from .mesh import Constraints, SpectralMesh, constrained_dofs, nodal_jacobians

logger = logging.getLogger(__name__)

STIFFNESS_FORMS = ("consistent", "printed")
GRADATIONS = ("global", "parent")
ASYMMETRY_TOL = 1e-6
SINGULAR_PIVOT = 1e-12  # relative Cholesky pivot below which K counts as singular


@dataclass(frozen=True, eq=False)
class Assembled:
    """Global coefficient matrices (3D ordering ``[u_z, u_x, u_y]`` per node)."""

    E0: sp.csr_matrix
    E1: sp.csr_matrix
    E2: sp.csr_matrix
    mass: np.ndarray  # plate-DOF diagonal, length 3N, order (theta_x, theta_y, w)


@dataclass(frozen=True, eq=False)
class ABlocks:
    A11: sp.csr_matrix
    A12: sp.csr_matrix
    A21: sp.csr_matrix
    A22: sp.csr_matrix
    E0_inv: sp.csr_matrix


@dataclass(frozen=True, eq=False)
class PlateStiffness:
    full: sp.csr_matrix  # 6N x 6N, block order [theta; u]
    reduced: sp.csr_matrix  # 3N x 3N plate DOFs, symmetrised
    asymmetry: float  # ||K - K^T||_F / ||K||_F before symmetrisation
    form: str


@dataclass
class AnalysisResult:
    kind: str  # "vibration" or "buckling"
    values: np.ndarray  # nondimensional frequencies or buckling parameters
    raw: np.ndarray  # omega^2 [rad^2/s^2] or critical load factors [N/m]
    modes: np.ndarray | None = None  # columns are full plate-DOF vectors
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.values)


def _element_data(mesh: SpectralMesh):
    de, dz = mesh.basis.nodal_derivatives()
    jacs = np.stack([nodal_jacobians(mesh, e) for e in range(mesh.n_elements)])
    return de, dz, jacs


def _scatter(mesh: SpectralMesh, blocks: np.ndarray, n: int) -> sp.csr_matrix:
    """Scatter-add (n_el, 3n_d, 3n_d) element blocks into an n x n matrix."""
    conn = mesh.connectivity
    dofs = (3 * conn[:, :, None] + np.arange(3)).reshape(conn.shape[0], -1)
    m = dofs.shape[1]
    if blocks.shape != (conn.shape[0], m, m):
        raise NumericalError("element block shape does not match connectivity")
    rows = np.repeat(dofs, m, axis=1).ravel()
    cols = np.tile(dofs, (1, m)).ravel()
    return sp.csr_matrix((blocks.ravel(), (rows, cols)), shape=(n, n))


def material_at_nodes(mesh: SpectralMesh, pair: MaterialPair, gradation: str = "global"):
    """Effective ``(E, nu, rho)`` at every global node.

    ``gradation='global'`` grades along the Cartesian ``x`` of the physical
    plate, ``V_c = (x/a)^n``; on a skew plate ``x`` runs past ``a`` and the
    modulus is extrapolated (see :meth:`MaterialPair.properties_at`).
    ``gradation='parent'`` grades along the parent coordinate ``s`` so that
    ``V_c`` spans exactly ``[0, 1]``. Both agree on rectangles.
    """
    a = mesh.geometry.a
    if gradation == "global":
        return pair.properties_at(mesh.xy[:, 0], a, extrapolate=True)
    if gradation == "parent":
        return pair.properties_at(mesh.st[:, 0], a)
    raise ConfigurationError(f"unknown gradation {gradation!r}", path="material.gradation")


def assemble(mesh: SpectralMesh, pair: MaterialPair, h: float | None = None,
             gradation: str = "global") -> Assembled:
    """Assemble ``E0, E1, E2`` and the lumped plate mass for the whole mesh."""
    h = mesh.geometry.h if h is None else h
    de, dz, jacs = _element_data(mesh)
    w = mesh.basis.weights
    E, nu, rho = material_at_nodes(mesh, pair, gradation)
    n = 3 * mesh.n_nodes
    e0, e1, e2 = [], [], []
    mass = np.zeros((mesh.n_nodes, 3))
    for e, nodes in enumerate(mesh.connectivity):
        a, b, c = kernel.element_coefficient_matrices(jacs[e], w, de, dz, E[nodes], nu[nodes])
        e0.append(a)
        e1.append(b)
        e2.append(c)
        np.add.at(mass, nodes, kernel.element_mass(jacs[e], w, rho[nodes], h))
    return Assembled(
        E0=_scatter(mesh, np.array(e0), n),
        E1=_scatter(mesh, np.array(e1), n),
        E2=_scatter(mesh, np.array(e2), n),
        mass=mass.ravel(),
    )


def assemble_geometric_stiffness(mesh: SpectralMesh, n_inplane, mode: str = "deflection-only",
                                 h: float | None = None) -> sp.csr_matrix:
    """Global geometric stiffness in plate DOFs for the resultants ``n_inplane``."""
    h = mesh.geometry.h if h is None else h
    de, dz, jacs = _element_data(mesh)
    w = mesh.basis.weights
    blocks = np.array([
        kernel.element_geometric_stiffness(jacs[e], w, de, dz, n_inplane, h=h, mode=mode)
        for e in range(mesh.n_elements)
    ])
    return _scatter(mesh, blocks, mesh.n_dofs)


def unit_load(load: str) -> np.ndarray:
    """Compressive unit resultants for ``uniaxial`` (Nx) or ``biaxial`` (Nx = Ny)."""
    if load == "uniaxial":
        return np.diag([1.0, 0.0])
    if load == "biaxial":
        return np.eye(2)
    raise ConfigurationError(f"unknown load case {load!r}", path="analysis.load")


def block_inverse(E0: sp.spmatrix) -> sp.csr_matrix:
    """Invert a 3x3-block-diagonal matrix block by block."""
    n = E0.shape[0]
    if n % 3:
        raise NumericalError("E0 dimension is not a multiple of 3")
    dense_blocks = np.zeros((n // 3, 3, 3))
    coo = E0.tocoo()
    if np.any(coo.row // 3 != coo.col // 3):
        off = np.abs(coo.data[coo.row // 3 != coo.col // 3]).max()
        if off > 0:
            raise NumericalError("E0 is not block diagonal")
    np.add.at(dense_blocks, (coo.row // 3, coo.row % 3, coo.col % 3), coo.data)
    dets = np.linalg.det(dense_blocks)
    scale = np.abs(dense_blocks).reshape(-1, 9).max(axis=1) ** 3
    bad = np.flatnonzero(~(np.abs(dets) > 1e-13 * scale))
    if bad.size:
        raise MaterialError(f"singular E0 block at node {int(bad[0])}")
    inv = np.linalg.inv(dense_blocks)
    return sp.block_diag(list(inv), format="csr")


def build_A(E0, E1, E2) -> ABlocks:
    """Blocks of the coefficient matrix of the through-thickness ODE."""
    E0i = block_inverse(E0)
    E1 = sp.csr_matrix(E1)
    E1T = E1.T.tocsr()
    return ABlocks(
        A11=(E0i @ E1T).tocsr(),
        A12=(-E0i).tocsr(),
        A21=(-E2 + E1 @ E0i @ E1T).tocsr(),
        A22=(-(E1 @ E0i)).tocsr(),
        E0_inv=E0i,
    )


def plate_dof_selection(n_nodes: int) -> np.ndarray:
    """Rows of the ``[theta; u]`` vector kept by plate kinematics.

    Per node keeps ``theta_x, theta_y`` (drops ``theta_z``) and ``u_z``
    (drops ``u_x, u_y``), interleaved as ``(theta_x, theta_y, w)``.
    """
    n3 = 3 * n_nodes
    nodes = np.arange(n_nodes)
    keep = np.empty(n3, dtype=np.int64)
    keep[0::3] = 3 * nodes + 1
    keep[1::3] = 3 * nodes + 2
    keep[2::3] = n3 + 3 * nodes
    return keep


def build_plate_stiffness(E0, E1, E2, A: ABlocks, h: float, form: str = "consistent",
                          asymmetry_tol: float | None = ASYMMETRY_TOL) -> PlateStiffness:
    """Plate stiffness from the order-(2,2) through-thickness expansion.

    ``form='printed'`` evaluates::

        V11 = (A11^2 + A12 A21) / 12,   V21 = (A21 A11 - A11^T A21) / 12
        K   = h [[E0 (I + h^2 V11),                E1^T],
                 [E1 (I + h^2 V11) - h^2 V21,      E2  ]]

    which is not symmetric once reduced to bending DOFs (the skew part is
    O((h/dx)^2)). ``form='consistent'`` is the symmetric form with the same
    h^3 truncation obtained from the thickness energy; both coincide in the
    thin limit. The reduced matrix is symmetrised in either case and its
    prior relative asymmetry reported.
    """
    if not h > 0:
        raise ConfigurationError(f"thickness must be positive, got {h}")
    if form not in STIFFNESS_FORMS:
        raise ConfigurationError(f"unknown stiffness form {form!r}", path="analysis.stiffness_form")
    n = E0.shape[0]
    E0 = sp.csr_matrix(E0)
    E1 = sp.csr_matrix(E1)
    E2 = sp.csr_matrix(E2)
    E1T = E1.T.tocsr()
    h2 = h * h
    if form == "printed":
        eye = sp.identity(n, format="csr")
        V11 = (A.A11 @ A.A11 + A.A12 @ A.A21) / 12.0
        V21 = (A.A21 @ A.A11 - A.A11.T @ A.A21) / 12.0
        P = eye + h2 * V11
        full = h * sp.bmat([[E0 @ P, E1T], [E1 @ P - h2 * V21, E2]], format="csr")
    else:
        skew = (E1 - E1T).tocsr()
        c_t = A.E0_inv @ skew
        c_u = A.E0_inv @ E2
        k_tt = h * E0 + (h**3 / 12.0) * (E2 - skew.T @ c_t)
        k_tu = h * E1T - (h**3 / 12.0) * (skew.T @ c_u)
        k_uu = h * E2 - (h**3 / 12.0) * (E2 @ c_u)
        full = sp.bmat([[k_tt, k_tu], [k_tu.T, k_uu]], format="csr")

    keep = plate_dof_selection(n // 3)
    kr = full[keep][:, keep].tocsr()
    norm = sp.linalg.norm(kr)
    asym = float(sp.linalg.norm(kr - kr.T) / norm) if norm > 0 else 0.0
    if form == "consistent" and asymmetry_tol is not None and asym > asymmetry_tol:
        raise NumericalError(f"reduced plate stiffness asymmetry {asym:.3e} exceeds {asymmetry_tol:g}")
    if asym > 1e-8:
        logger.debug("reduced stiffness (%s form) asymmetry %.3e", form, asym)
    kr = ((kr + kr.T) * 0.5).tocsr()
    return PlateStiffness(full=full, reduced=kr, asymmetry=asym, form=form)


def reduce(matrix, constraints: Constraints) -> np.ndarray:
    """Eliminate constrained DOFs: dense ``T^T A T``."""
    t = constraints.transform()
    a = matrix if sp.issparse(matrix) else sp.csr_matrix(matrix)
    return (t.T @ a @ t).toarray()


def _fix_sign(vectors: np.ndarray) -> np.ndarray:
    w = vectors[2::3] if vectors.shape[0] % 3 == 0 else vectors
    idx = np.argmax(np.abs(w), axis=0)
    signs = np.sign(w[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def solve_vibration(K_red: np.ndarray, M_red, k: int = 4):
    """Smallest ``k`` solutions of ``K v = omega^2 M v`` with diagonal ``M``.

    Returns ``(omega_squared, modes)`` in the reduced DOF space.
    """
    if k < 1:
        raise ConfigurationError("mode count must be >= 1", path="analysis.modes")
    m = np.diag(M_red) if np.ndim(M_red) == 2 else np.asarray(M_red)
    if np.ndim(M_red) == 2 and np.count_nonzero(M_red - np.diag(m)):
        raise NumericalError("mass matrix is not diagonal")
    if np.any(m <= 0):
        raise NumericalError("mass matrix has non-positive diagonal entries")
    n = K_red.shape[0]
    k = min(k, n)
    s = 1.0 / np.sqrt(m)
    c = K_red * s[:, None] * s[None, :]
    try:
        vals, vecs = sla.eigh(c, subset_by_index=[0, k - 1], driver="evr")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"vibration eigensolver failed: {exc}") from exc
    scale = max(abs(vals).max(), np.finfo(float).tiny)
    if np.any(vals < -1e-9 * scale):
        raise NumericalError(f"negative squared frequency {vals.min():.3e}")
    vals = np.clip(vals, 0.0, None)
    return vals, vecs * s[:, None]


def condense_stiffness(K_red: np.ndarray, keep):
    """Static condensation onto the DOFs flagged in ``keep``.

    Returns ``(K_c, X)`` with ``K_c = K_kk - K_sk^T K_ss^{-1} K_sk`` and
    ``X = K_ss^{-1} K_sk`` so that condensed DOFs follow as ``d_s = -X d_k``.
    """
    keep = np.asarray(keep, dtype=bool)
    drop = ~keep
    kss = K_red[np.ix_(drop, drop)]
    ksk = K_red[np.ix_(drop, keep)]
    try:
        cf = sla.cho_factor(kss)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("stiffness not positive definite; plate is unrestrained") from exc
    x = sla.cho_solve(cf, ksk)
    return K_red[np.ix_(keep, keep)] - ksk.T @ x, x


def solve_buckling(K_red: np.ndarray, KG_red: np.ndarray, k: int = 1, condense=None,
                   condensed=None):
    """Smallest positive load factors of ``K d = lambda K_G d``.

    ``condense`` is an optional boolean mask of DOFs carrying the whole of
    ``K_G``; the others are statically condensed out first (exact when
    ``K_G`` vanishes on them). A precomputed ``condense_stiffness`` result
    may be passed as ``condensed``. Returns ``(load_factors, modes)``.
    """
    n = K_red.shape[0]
    if condense is not None:
        keep = np.asarray(condense, dtype=bool)
        if np.abs(KG_red[~keep]).max(initial=0.0) > 0:
            raise NumericalError("geometric stiffness is not confined to the condensed DOFs")
        kc, x = condense_stiffness(K_red, keep) if condensed is None else condensed
        lam, v = solve_buckling(kc, KG_red[np.ix_(keep, keep)], k=k)
        full = np.zeros((n, v.shape[1]))
        full[keep] = v
        full[~keep] = -x @ v
        return lam, full

    try:
        chol = sla.cholesky(K_red, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("stiffness not positive definite; plate is unrestrained") from exc
    pivots = np.diag(chol) ** 2
    if pivots.min() < SINGULAR_PIVOT * np.abs(np.diag(K_red)).max():
        raise NumericalError("stiffness is singular; the supports leave a rigid-body mechanism")
    # G d = mu K d with mu = 1/lambda; largest mu gives the critical load
    tmp = sla.solve_triangular(chol, KG_red, lower=True)
    c = sla.solve_triangular(chol, tmp.T, lower=True)
    c = 0.5 * (c + c.T)
    k = min(k, n)
    try:
        mu, y = sla.eigh(c, subset_by_index=[n - k, n - 1], driver="evr")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"buckling eigensolver failed: {exc}") from exc
    scale = max(abs(mu).max(), np.finfo(float).tiny)
    pos = mu > 1e-12 * scale
    if not np.any(pos):
        raise NumericalError("no positive buckling load for this load case")
    mu, y = mu[pos][::-1], y[:, pos][:, ::-1]
    modes = sla.solve_triangular(chol.T, y, lower=False)
    return 1.0 / mu, modes


def flexural_rigidity(ceramic: PhaseProperties, h: float) -> float:
    return ceramic.E * h**3 / (12.0 * (1.0 - ceramic.nu**2))


def frequency_parameter(omega, a: float, h: float, ceramic: PhaseProperties):
    """``omega (a/pi)^2 sqrt(rho_c h / D_c)``."""
    d_c = flexural_rigidity(ceramic, h)
    return np.asarray(omega) * (a / math.pi) ** 2 * math.sqrt(ceramic.rho * h / d_c)


def buckling_parameter(n_cr, b: float, h: float, ceramic: PhaseProperties):
    """``N_cr b^2 / (pi^2 D_c)``."""
    return np.asarray(n_cr) * b**2 / (math.pi**2 * flexural_rigidity(ceramic, h))


def nondimensionalize(raw, kind: str, geometry, ceramic: PhaseProperties,
                      length_scale: str = "a"):
    """Scale ``omega^2`` (vibration) or ``N_cr`` (buckling) to the plate parameters.

    ``length_scale`` picks the side used in the frequency parameter: ``"a"``
    (default) or ``"b"``. The two differ by ``(a/b)^2``; aspect-ratio
    sweeps are easier to read on the fixed side ``b``.
    """
    raw = np.asarray(raw, dtype=float)
    if kind == "vibration":
        if length_scale not in ("a", "b"):
            raise ConfigurationError(f"length scale must be 'a' or 'b', got {length_scale!r}",
                                     path="analysis.length_scale")
        length = geometry.a if length_scale == "a" else geometry.b
        return frequency_parameter(np.sqrt(np.clip(raw, 0, None)), length, geometry.h, ceramic)
    if kind == "buckling":
        return buckling_parameter(raw, geometry.b, geometry.h, ceramic)
    raise ConfigurationError(f"unknown analysis kind {kind!r}", path="analysis.kind")


class PlateModel:
    """One plate configuration; caches the assembled and reduced stiffness.

    Vibration and the buckling load cases of the same configuration share
    one stiffness build.
    """

    def __init__(self, mesh: SpectralMesh, material: MaterialPair, bc,
                 stiffness_form: str = "consistent", gradation: str = "global"):
        if gradation not in GRADATIONS:
            raise ConfigurationError(f"unknown gradation {gradation!r}", path="material.gradation")
        self.gradation = gradation
        self.mesh = mesh
        self.material = material
        self.constraints = constrained_dofs(mesh, bc)
        self.bc = bc
        self.stiffness_form = stiffness_form
        self._stiffness: PlateStiffness | None = None
        self._assembled: Assembled | None = None
        self._k_red: np.ndarray | None = None
        self._condensed = None

    @property
    def geometry(self):
        return self.mesh.geometry

    @property
    def assembled(self) -> Assembled:
        if self._assembled is None:
            self._assembled = assemble(self.mesh, self.material, gradation=self.gradation)
        return self._assembled

    @property
    def stiffness(self) -> PlateStiffness:
        if self._stiffness is None:
            asm = self.assembled
            a = build_A(asm.E0, asm.E1, asm.E2)
            self._stiffness = build_plate_stiffness(
                asm.E0, asm.E1, asm.E2, a, self.geometry.h, form=self.stiffness_form
            )
        return self._stiffness

    @property
    def K_red(self) -> np.ndarray:
        if self._k_red is None:
            self._k_red = reduce(self.stiffness.reduced, self.constraints)
        return self._k_red

    @property
    def M_red(self) -> np.ndarray:
        return reduce(sp.diags(self.assembled.mass), self.constraints)

    def _expand(self, vecs: np.ndarray) -> np.ndarray:
        return _fix_sign(self.constraints.transform() @ vecs)

    def _metadata(self) -> dict[str, Any]:
        return {"stiffness_asymmetry": self.stiffness.asymmetry,
                "stiffness_form": self.stiffness_form,
                "gradation": self.gradation,
                "n_free_dofs": int(self.constraints.free.size)}

    def vibration(self, modes: int = 4, length_scale: str = "a") -> AnalysisResult:
        if self.constraints.free.size == 0:
            raise NumericalError("every DOF is constrained")
        vals, vecs = solve_vibration(self.K_red, np.diag(self.M_red), modes)
        values = nondimensionalize(vals, "vibration", self.geometry, self.material.ceramic,
                                   length_scale=length_scale)
        meta = self._metadata() | {"length_scale": length_scale}
        return AnalysisResult("vibration", values, vals, self._expand(vecs), meta)

    def buckling(self, load: str = "uniaxial", kg_mode: str = "deflection-only",
                 modes: int = 1, n_inplane=None) -> AnalysisResult:
        if self.bc is not None and str(self.bc).upper() == "FFFF":
            raise NumericalError("buckling of an unsupported plate is undefined")
        n_in = unit_load(load) if n_inplane is None else np.asarray(n_inplane, dtype=float)
        kg = assemble_geometric_stiffness(self.mesh, n_in, mode=kg_mode)
        kg_red = reduce(kg, self.constraints)
        condense = condensed = None
        if kg_mode == "deflection-only":
            w_mask = np.zeros(self.mesh.n_dofs, dtype=bool)
            w_mask[2::3] = True
            condense = w_mask[self.constraints.free]
            if self._condensed is None:
                self._condensed = condense_stiffness(self.K_red, condense)
            condensed = self._condensed
        lam, vecs = solve_buckling(self.K_red, kg_red, k=modes, condense=condense,
                                   condensed=condensed)
        values = nondimensionalize(lam, "buckling", self.geometry, self.material.ceramic)
        meta = self._metadata() | {"load": load, "kg_mode": kg_mode}
        return AnalysisResult("buckling", values, lam, self._expand(vecs), meta)
