"""Nearest-neighbour EAM site energies for a 1D chain.

The chain energy is written in terms of bond strains ``u'``.  Every interior
atom carries the bulk site energy

.. math::
    V(r, s) = \\tfrac12\\phi(1+r) + \\tfrac12\\phi(1+s) + \\psi(\\rho(1+r) + \\rho(1+s))

of its left and right bond strains ``r`` and ``s``; the surface atom has only
one neighbour,

.. math::
    V^{surf}(s) = \\tfrac12\\phi(1+s) + \\psi(\\rho(1+s)),

and the Cauchy-Born density is ``W(F) = V(F, F)``.

``phi`` and ``rho`` are exponentials, ``psi`` is the universal-binding
embedding function.  All derivatives are analytic; the functions broadcast
over numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import DomainError

__all__ = [
    "PotentialParams",
    "SiteEnergyEvaluation",
    "EAMPotential",
    "COPPER",
]


@dataclass(frozen=True)
class PotentialParams:
    """EAM parameter record.  Defaults are the copper set."""

    phi_e: float = 10.6
    f_e: float = 1.0
    E_c: float = 3.54
    alpha: float = 21.0
    beta: float = 6.0
    rho_e: float = 2.0
    r_e: float = 1.0
    gamma: float = 8.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value):
                raise DomainError(f"parameter {f.name} must be finite, got {value!r}")
        if self.beta == 0:
            raise DomainError("beta must be non-zero")
        if self.rho_e <= 0:
            raise DomainError("rho_e must be positive")
        if self.r_e <= 0:
            raise DomainError("r_e must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_mapping(cls, mapping) -> "PotentialParams":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(mapping) - known)
        if unknown:
            raise DomainError(f"unknown potential parameter(s): {', '.join(unknown)}")
        return cls(**{k: float(v) for k, v in mapping.items()})

    @classmethod
    def from_file(cls, path) -> "PotentialParams":
        """Read ``key = value`` lines (``#`` starts a comment).

        Keys not given keep their copper default; unknown keys are errors.
        """
        values = {}
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" in line:
                key, _, value = line.partition("=")
            elif ":" in line:
                key, _, value = line.partition(":")
            else:
                parts = line.split()
                if len(parts) != 2:
                    raise DomainError(f"{path}:{lineno}: cannot parse {raw!r}")
                key, value = parts
            key, value = key.strip(), value.strip()
            if key in values:
                raise DomainError(f"{path}:{lineno}: duplicate key {key!r}")
            try:
                values[key] = float(value)
            except ValueError:
                raise DomainError(f"{path}:{lineno}: bad value for {key!r}: {value!r}") from None
        return cls.from_mapping(values)


COPPER = PotentialParams()


class SiteEnergyEvaluation(NamedTuple):
    """Value, gradient and Hessian of a site energy.

    For the bulk site ``grad = (d1, d2)`` and ``hess`` is the symmetric 2x2
    matrix ``[[d11, d12], [d12, d22]]``.  For the surface site ``grad`` and
    ``hess`` are the scalars ``dV/ds`` and ``d2V/ds2``.
    """

    value: float
    grad: np.ndarray | float
    hess: np.ndarray | float


def _check_order(order):
    if order not in (0, 1, 2):
        raise ValueError(f"derivative order must be 0, 1 or 2, got {order!r}")


class EAMPotential:
    """Exponential pair/density functions with the universal embedding energy.

    Parameters
    ----------
    params : PotentialParams, optional
        Defaults to the copper parameter set.
    """

    def __init__(self, params: PotentialParams | None = None):
        self.params = params if params is not None else COPPER

    def __repr__(self):
        return f"{type(self).__name__}({self.params!r})"

    # -- one-dimensional ingredients -------------------------------------

    def pair_phi(self, r, order=0):
        """Pair potential ``phi(r)`` or its first/second derivative."""
        _check_order(order)
        p = self.params
        k = p.gamma / p.r_e
        val = p.phi_e * np.exp(-k * (np.asarray(r, dtype=float) - p.r_e))
        return val * (-k) ** order

    def elec_rho(self, r, order=0):
        """Electron density ``rho(r)`` or its first/second derivative."""
        _check_order(order)
        p = self.params
        k = p.beta / p.r_e
        val = p.f_e * np.exp(-k * (np.asarray(r, dtype=float) - p.r_e))
        return val * (-k) ** order

    def embed_psi(self, rho, order=0):
        """Embedding energy ``psi(rho)`` or its first/second derivative.

        Raises
        ------
        DomainError
            If any density is non-positive (the logarithm is undefined).
        """
        _check_order(order)
        p = self.params
        rho = np.asarray(rho, dtype=float)
        if np.any(~(rho > 0)):
            raise DomainError("embedding function needs positive electron density")
        a = p.alpha / p.beta
        c = p.gamma / p.beta
        x = rho / p.rho_e
        lx = np.log(x)
        if order == 0:
            return -p.E_c * (1.0 - a * lx) * x**a - p.phi_e * x**c
        if order == 1:
            dx = p.E_c * a * a * lx * x ** (a - 1) - p.phi_e * c * x ** (c - 1)
            return dx / p.rho_e
        dxx = (p.E_c * a * a * (1.0 + (a - 1.0) * lx) * x ** (a - 2)
               - p.phi_e * c * (c - 1.0) * x ** (c - 2))
        return dxx / p.rho_e**2

    # -- site energies -----------------------------------------------------

    def bulk_terms(self, r, s):
        """Vectorised ``(V, d1, d2, d11, d12, d22)`` of the bulk site energy."""
        r = np.asarray(r, dtype=float)
        s = np.asarray(s, dtype=float)
        rr, ss = 1.0 + r, 1.0 + s
        rho_r, rho_s = self.elec_rho(rr), self.elec_rho(ss)
        drho_r, drho_s = self.elec_rho(rr, 1), self.elec_rho(ss, 1)
        total = rho_r + rho_s
        psi0 = self.embed_psi(total)
        psi1 = self.embed_psi(total, 1)
        psi2 = self.embed_psi(total, 2)
        phi_r, phi_s = self.pair_phi(rr), self.pair_phi(ss)
        value = 0.5 * phi_r + 0.5 * phi_s + psi0
        d1 = 0.5 * self.pair_phi(rr, 1) + psi1 * drho_r
        d2 = 0.5 * self.pair_phi(ss, 1) + psi1 * drho_s
        d11 = 0.5 * self.pair_phi(rr, 2) + psi2 * drho_r**2 + psi1 * self.elec_rho(rr, 2)
        d22 = 0.5 * self.pair_phi(ss, 2) + psi2 * drho_s**2 + psi1 * self.elec_rho(ss, 2)
        d12 = psi2 * (drho_r * drho_s)
        return value, d1, d2, d11, d12, d22

    def surf_terms(self, s):
        """Vectorised ``(Vsurf, dVsurf, d2Vsurf)``."""
        ss = 1.0 + np.asarray(s, dtype=float)
        rho = self.elec_rho(ss)
        drho = self.elec_rho(ss, 1)
        psi1 = self.embed_psi(rho, 1)
        value = 0.5 * self.pair_phi(ss) + self.embed_psi(rho)
        d1 = 0.5 * self.pair_phi(ss, 1) + psi1 * drho
        d2 = 0.5 * self.pair_phi(ss, 2) + self.embed_psi(rho, 2) * drho**2 + psi1 * self.elec_rho(ss, 2)
        return value, d1, d2

    def site_bulk(self, r: float, s: float) -> SiteEnergyEvaluation:
        value, d1, d2, d11, d12, d22 = (float(t) for t in self.bulk_terms(r, s))
        return SiteEnergyEvaluation(value, np.array([d1, d2]), np.array([[d11, d12], [d12, d22]]))

    def site_surf(self, s: float) -> SiteEnergyEvaluation:
        value, d1, d2 = (float(t) for t in self.surf_terms(s))
        return SiteEnergyEvaluation(value, d1, d2)

    def cb_density(self, F, order=0):
        """Cauchy-Born density ``W(F) = phi(1+F) + psi(2 rho(1+F))`` and derivatives."""
        _check_order(order)
        FF = 1.0 + np.asarray(F, dtype=float)
        rho = self.elec_rho(FF)
        total = 2.0 * rho
        if order == 0:
            return self.pair_phi(FF) + self.embed_psi(total)
        drho = self.elec_rho(FF, 1)
        psi1 = self.embed_psi(total, 1)
        if order == 1:
            return self.pair_phi(FF, 1) + 2.0 * psi1 * drho
        return (self.pair_phi(FF, 2) + 4.0 * self.embed_psi(total, 2) * drho**2
                + 2.0 * psi1 * self.elec_rho(FF, 2))

    # -- constants at the reference state -------------------------------

    @property
    def bulk_reference_energy(self) -> float:
        """``V(0, 0)``, the energy of one bulk site in the reference lattice."""
        return float(self.bulk_terms(0.0, 0.0)[0])

    def linearised_coefficients(self):
        """``(a, b, a_s)`` of the linearised bond recursion at zero strain.

        ``a = d11 V + d22 V``, ``b = d12 V`` (both at the origin) and
        ``a_s = d2 Vsurf(0) + d11 V(0, 0)``.
        """
        _, _, _, d11, d12, d22 = (float(t) for t in self.bulk_terms(0.0, 0.0))
        surf2 = float(self.surf_terms(0.0)[2])
        return d11 + d22, d12, surf2 + d11
