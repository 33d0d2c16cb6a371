"""Gauss-Lobatto-Legendre nodal bases for spectral elements.

The 1D basis is the set of Lagrange cardinal polynomials on the GLL nodes of
order ``p``; the 2D basis is their tensor product with the local node number
ascending first along ``eta`` and then along ``zeta``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError

_NEWTON_TOL = 1e-14
_NEWTON_MAXITER = 100


def legendre(p: int, x):
    """Return ``(L_p(x), L_{p-1}(x))`` via the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    l_prev = np.ones_like(x)
    if p == 0:
        return l_prev, np.zeros_like(x)
    l_cur = x.copy()
    for k in range(2, p + 1):
        l_prev, l_cur = l_cur, ((2 * k - 1) * x * l_cur - (k - 1) * l_prev) / k
    return l_cur, l_prev


def _gll_nodes(p: int) -> np.ndarray:
    # Newton on (1 - x^2) L_p'(x); the Chebyshev-Gauss-Lobatto points are
    # close enough that the iteration converges for every p.
    x = -np.cos(np.pi * np.arange(p + 1) / p)
    for _ in range(_NEWTON_MAXITER):
        lp, lpm1 = legendre(p, x)
        # (1 - x^2) L_p' = p (L_{p-1} - x L_p), whose derivative is
        # -p (p + 1) L_p; this gives the classic update below.
        update = (x * lp - lpm1) / ((p + 1) * lp)
        x = x - update
        if np.max(np.abs(update)) < _NEWTON_TOL:
            break
    x[0], x[-1] = -1.0, 1.0
    # enforce exact symmetry
    x = 0.5 * (x - x[::-1])
    return x


@dataclass(frozen=True)
class SpectralBasis1D:
    """GLL nodes, weights and barycentric data for one polynomial order."""

    order: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    bary: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.order + 1

    def differentiation_matrix(self) -> np.ndarray:
        """``D[i, j] = l_j'(x_i)`` at the GLL nodes."""
        x, w = self.nodes, self.bary
        diff = x[:, None] - x[None, :]
        np.fill_diagonal(diff, 1.0)
        d = (w[None, :] / w[:, None]) / diff
        np.fill_diagonal(d, 0.0)
        np.fill_diagonal(d, -d.sum(axis=1))
        return d


def gll_rule(p: int) -> SpectralBasis1D:
    """Build the Gauss-Lobatto-Legendre rule of order ``p`` (``p + 1`` points).

    Weights follow ``2 / (p (p + 1) L_p(x_i)^2)``.
    """
    if int(p) != p or p < 1:
        raise ConfigurationError(f"GLL order must be an integer >= 1, got {p!r}")
    p = int(p)
    if p == 1:
        nodes = np.array([-1.0, 1.0])
    else:
        nodes = _gll_nodes(p)
    lp, _ = legendre(p, nodes)
    weights = 2.0 / (p * (p + 1) * lp**2)
    weights = 0.5 * (weights + weights[::-1])

    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    bary = 1.0 / np.prod(diff, axis=1)
    return SpectralBasis1D(order=p, nodes=nodes, weights=weights, bary=bary)


def eval_basis_1d(basis: SpectralBasis1D, xi: float):
    """Evaluate the cardinal functions and their derivatives at ``xi``.

    Uses the barycentric form. Returns two arrays of length ``p + 1``.
    """
    xi = float(xi)
    if not -1.0 - 1e-12 <= xi <= 1.0 + 1e-12:
        raise DomainError(f"xi={xi} outside [-1, 1]")
    x, w = basis.nodes, basis.bary
    d = xi - x
    hit = np.flatnonzero(np.abs(d) < 1e-14)
    if hit.size:
        j = hit[0]
        values = np.zeros(basis.n)
        values[j] = 1.0
        derivs = basis.differentiation_matrix()[j].copy()
        return values, derivs

    t = w / d
    values = t / t.sum()
    # l_j' has degree p - 1, so interpolating it through the nodal values
    # D[k, j] is exact; unlike the direct barycentric derivative this does
    # not cancel catastrophically next to a node.
    derivs = values @ basis.differentiation_matrix()
    return values, derivs


def node_index_2d(i_eta: int, i_zeta: int, p_eta: int, p_zeta: int | None = None) -> int:
    """1-based flat node number; ascends first along eta, then zeta."""
    p_zeta = p_eta if p_zeta is None else p_zeta
    if not (1 <= i_eta <= p_eta + 1 and 1 <= i_zeta <= p_zeta + 1):
        raise IndexError(
            f"node ({i_eta}, {i_zeta}) outside element of orders ({p_eta}, {p_zeta})"
        )
    return (i_zeta - 1) * (p_eta + 1) + i_eta


@dataclass(frozen=True)
class SpectralBasis2D:
    """Tensor-product GLL basis on the reference square."""

    eta: SpectralBasis1D
    zeta: SpectralBasis1D

    @property
    def n_nodes(self) -> int:
        return self.eta.n * self.zeta.n

    @property
    def weights(self) -> np.ndarray:
        """Nodal weights ``w_i = w_{i_eta} w_{i_zeta}`` in local node order."""
        return np.outer(self.zeta.weights, self.eta.weights).ravel()

    @property
    def nodes(self) -> np.ndarray:
        """Reference coordinates ``(eta, zeta)`` of each local node, shape (n_d, 2)."""
        ee, zz = np.meshgrid(self.eta.nodes, self.zeta.nodes)
        return np.column_stack([ee.ravel(), zz.ravel()])

    def nodal_derivatives(self):
        """Derivative matrices at the element's own nodes.

        Returns ``(Deta, Dzeta)`` with ``Deta[q, i] = dN_i/deta`` at node ``q``.
        """
        de = self.eta.differentiation_matrix()
        dz = self.zeta.differentiation_matrix()
        ie = np.eye(self.eta.n)
        iz = np.eye(self.zeta.n)
        return np.kron(iz, de), np.kron(dz, ie)


def spectral_basis_2d(p_eta: int, p_zeta: int | None = None) -> SpectralBasis2D:
    p_zeta = p_eta if p_zeta is None else p_zeta
    return SpectralBasis2D(gll_rule(p_eta), gll_rule(p_zeta))


def eval_shape_2d(basis2d: SpectralBasis2D, eta: float, zeta: float):
    """Return ``(N, dN_deta, dN_dzeta)`` at a reference point."""
    ne, de = eval_basis_1d(basis2d.eta, eta)
    nz, dz = eval_basis_1d(basis2d.zeta, zeta)
    n = np.outer(nz, ne).ravel()
    dn_deta = np.outer(nz, de).ravel()
    dn_dzeta = np.outer(dz, ne).ravel()
    return n, dn_deta, dn_dzeta
