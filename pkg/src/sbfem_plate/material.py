"""Two-phase power-law graded material with in-plane variation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError, MaterialError


@dataclass(frozen=True)
class PhaseProperties:
    """Isotropic phase: Young's modulus ``E`` [Pa], Poisson ratio, density [kg/m^3]."""

    E: float
    nu: float
    rho: float

    def __post_init__(self):
        if not self.E > 0:
            raise MaterialError(f"E must be positive, got {self.E}")
        if not self.rho > 0:
            raise MaterialError(f"rho must be positive, got {self.rho}")
        if not -1.0 < self.nu < 0.5:
            raise MaterialError(f"nu must lie in (-1, 0.5), got {self.nu}")

    def scaled(self, factor: float) -> "PhaseProperties":
        return PhaseProperties(self.E * factor, self.nu, self.rho)


# Silicon nitride and SUS304 stainless steel, temperature independent.
SI3N4 = PhaseProperties(E=348.43e9, nu=0.24, rho=2370.0)
SUS304 = PhaseProperties(E=201.04e9, nu=0.3262, rho=8166.0)


@dataclass(frozen=True)
class MaterialPair:
    ceramic: PhaseProperties = SI3N4
    metal: PhaseProperties = SUS304
    gradient_index: float = 0.0

    def __post_init__(self):
        if not self.gradient_index >= 0:
            raise MaterialError(f"gradient index must be >= 0, got {self.gradient_index}")

    def properties_at(self, x, a: float, extrapolate: bool = False):
        """Vectorised ``(E, nu, rho)`` at coordinates ``x`` on a plate of length ``a``.

        With ``extrapolate=True`` coordinates beyond ``a`` are allowed: the
        modulus follows the power law past ``V_c = 1`` while Poisson's ratio
        and density use ``V_c`` clipped to ``[0, 1]``, so they stay physical.
        """
        vc = volume_fraction_ceramic(x, a, self.gradient_index, extrapolate=extrapolate)
        vb = np.clip(vc, 0.0, 1.0)
        c, m = self.ceramic, self.metal
        E = m.E + vc * (c.E - m.E)
        nu = m.nu + vb * (c.nu - m.nu)
        rho = m.rho + vb * (c.rho - m.rho)
        if np.ndim(E) == 0:
            return float(E), float(nu), float(rho)
        return E, nu, rho


def volume_fraction_ceramic(x, a: float, n: float, extrapolate: bool = False):
    """Ceramic volume fraction ``(x / a) ** n``; ``n = 0`` gives 1 everywhere.

    Accepts scalars or arrays; coordinates outside ``[0, a]`` (beyond a
    round-off margin) raise :class:`DomainError`. With ``extrapolate`` the
    upper bound is lifted (values above 1 are returned as is) and negative
    coordinates are treated as 0.
    """
    if not a > 0:
        raise ConfigurationError(f"plate length must be positive, got {a}")
    if n < 0:
        raise MaterialError(f"gradient index must be >= 0, got {n}")
    xs = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(xs)):
        raise DomainError("non-finite coordinate")
    if extrapolate:
        r = np.clip(xs / a, 0.0, None)
    else:
        tol = 1e-12 * a
        if np.any(xs < -tol) or np.any(xs > a + tol):
            raise DomainError(f"coordinate outside [0, {a}]")
        r = np.clip(xs / a, 0.0, 1.0)
    if n == 0:
        out = np.ones_like(r)
    else:
        out = r**n
    return float(out) if out.ndim == 0 else out


def effective_properties(pair: MaterialPair, x: float, a: float) -> PhaseProperties:
    """Rule-of-mixtures properties at a single point."""
    E, nu, rho = pair.properties_at(x, a)
    return PhaseProperties(float(E), float(nu), float(rho))


def lame(E, nu):
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    mu = E / (2.0 * (1.0 + nu))
    return lam, mu


def elasticity_matrix_3d(E: float, nu: float) -> np.ndarray:
    """Isotropic 6x6 Hooke matrix, stress order ``[sz, sx, sy, txy, tyz, txz]``."""
    if not -1.0 < nu < 0.5:
        raise MaterialError(f"nu={nu} makes the elasticity matrix singular")
    if not E > 0:
        raise MaterialError(f"E must be positive, got {E}")
    lam, mu = lame(E, nu)
    d = np.zeros((6, 6))
    d[:3, :3] = lam
    d[[0, 1, 2], [0, 1, 2]] = lam + 2.0 * mu
    d[[3, 4, 5], [3, 4, 5]] = mu
    return d
