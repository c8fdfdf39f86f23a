"""Semi-infinite atomistic chain truncated to ``N`` free bonds.

All quantities are expressed in the bond strains ``u'_0 .. u'_{N-1}``; strains
beyond the truncation are exactly zero.  The energy is

    E(u) = Vsurf(u'_0) + sum_{l=1}^{N} V(u'_{l-1}, u'_l)

(sites beyond ``N`` contribute the constant ``V(0, 0)`` and are dropped).
The "renormalised" energy subtracts ``(N + 1) V(0, 0)``, i.e. every site is
measured against a bulk site of the reference lattice, so the reference
configuration has the O(1) energy ``Vsurf(0) - V(0, 0)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import FitError, SolverError, StabilityError
from .forces import ExternalForce
from .optimize import SolverConfig, minimize
from .potentials import EAMPotential

__all__ = [
    "Displacement",
    "Tridiagonal",
    "DecayFit",
    "energy",
    "residual",
    "hessian",
    "objective",
    "solve_atomistic",
    "ground_state",
    "decay_roots",
    "decay_lambda",
    "fit_decay",
    "DEFAULT_N",
]

DEFAULT_N = 1000


@dataclass(frozen=True, eq=False)
class Displacement:
    """Lattice displacement with ``u_0 = 0``, stored through its bond strains."""

    strains: np.ndarray

    def __post_init__(self):
        s = np.array(self.strains, dtype=float).ravel()
        if not np.all(np.isfinite(s)):
            raise ValueError("strains must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "strains", s)

    @property
    def n_bonds(self) -> int:
        return self.strains.size

    def displacements(self) -> np.ndarray:
        """``u_0 .. u_N`` by prefix summation."""
        return np.concatenate([[0.0], np.cumsum(self.strains)])

    def positions(self) -> np.ndarray:
        """Deformed positions ``y_l = l + u_l``."""
        u = self.displacements()
        return np.arange(u.size) + u

    @classmethod
    def from_displacements(cls, u) -> "Displacement":
        u = np.asarray(u, dtype=float)
        if u.size == 0 or u[0] != 0.0:
            raise ValueError("displacements must start with u_0 = 0")
        return cls(np.diff(u))

    @classmethod
    def zeros(cls, n: int) -> "Displacement":
        return cls(np.zeros(n))

    def padded(self, n: int) -> np.ndarray:
        """Strains extended by zeros (or truncated) to ``n`` bonds."""
        out = np.zeros(n)
        m = min(n, self.n_bonds)
        out[:m] = self.strains[:m]
        return out

    def to_csv(self, path) -> None:
        u = self.displacements()
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["site", "u", "strain"])
            for site in range(u.size):
                strain = self.strains[site] if site < self.n_bonds else 0.0
                w.writerow([site, repr(float(u[site])), repr(float(strain))])


@dataclass(frozen=True, eq=False)
class Tridiagonal:
    """Symmetric tridiagonal matrix stored by its diagonals."""

    diag: np.ndarray
    off: np.ndarray

    @property
    def size(self) -> int:
        return self.diag.size

    def matvec(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        out = self.diag * v
        out[:-1] += self.off * v[1:]
        out[1:] += self.off * v[:-1]
        return out

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def smallest_eigenvalue(self) -> float:
        if self.size == 0:
            return math.inf
        if self.size == 1:
            return float(self.diag[0])
        w = eigh_tridiagonal(self.diag, self.off, eigvals_only=True,
                             select="i", select_range=(0, 0))
        return float(w[0])


# -- shared variational kernels -----------------------------------------------
#
# ``ext`` holds the strains of the free bonds followed by one trailing strain
# that is held fixed (0 for the atomistic chain, F0 for the corrector).  Site
# ``j = 1 .. n`` couples ext[j-1] and ext[j]; the surface site sees ext[0].

def _chain_energy(ext, pot: EAMPotential) -> float:
    v = pot.bulk_terms(ext[:-1], ext[1:])[0]
    return float(pot.surf_terms(ext[0])[0] + np.sum(v))


def _chain_energy_excess(ext, pot: EAMPotential, ref: float, ref_surf: float) -> float:
    v = pot.bulk_terms(ext[:-1], ext[1:])[0]
    return float((pot.surf_terms(ext[0])[0] - ref_surf) + np.sum(v - ref))


def _chain_gradient(ext, pot: EAMPotential) -> np.ndarray:
    _, d1, d2, _, _, _ = pot.bulk_terms(ext[:-1], ext[1:])
    grad = d1.copy()
    grad[0] += pot.surf_terms(ext[0])[1]
    grad[1:] += d2[:-1]
    return grad


def _chain_hessian(ext, pot: EAMPotential) -> Tridiagonal:
    _, _, _, d11, d12, d22 = pot.bulk_terms(ext[:-1], ext[1:])
    diag = d11.copy()
    diag[0] += pot.surf_terms(ext[0])[2]
    diag[1:] += d22[:-1]
    return Tridiagonal(diag, d12[:-1].copy())


def _extend(strains, tail=0.0):
    return np.append(np.asarray(getattr(strains, "strains", strains), dtype=float), tail)


# -- public operations --------------------------------------------------------

def energy(strains, pot: EAMPotential | None = None, renormalize: bool = False) -> float:
    """Truncated atomistic energy of a strain vector (no external force)."""
    pot = pot or EAMPotential()
    ext = _extend(strains)
    if renormalize:
        ref = pot.bulk_reference_energy
        return _chain_energy_excess(ext, pot, ref, ref)
    return _chain_energy(ext, pot)


def residual(strains, force: ExternalForce | None = None, pot: EAMPotential | None = None) -> np.ndarray:
    """Per-bond coefficients ``r_l`` of ``<dE(u) - f, v> = sum_l r_l v'_l``."""
    pot = pot or EAMPotential()
    r = _chain_gradient(_extend(strains), pot)
    if force is not None:
        r -= force.tail_sums(r.size)
    return r


def hessian(strains, pot: EAMPotential | None = None) -> Tridiagonal:
    """Second variation as a tridiagonal operator on strain space."""
    return _chain_hessian(_extend(strains), pot or EAMPotential())


def objective(force: ExternalForce | None = None, pot: EAMPotential | None = None, n: int | None = None):
    """``x -> (E(x) - <g, x>, residual)`` with the renormalised energy."""
    pot = pot or EAMPotential()
    ref = pot.bulk_reference_energy
    g_cache = {}

    def fun(x):
        ext = _extend(x)
        e = _chain_energy_excess(ext, pot, ref, ref)
        r = _chain_gradient(ext, pot)
        if force is not None:
            g = g_cache.get(x.size)
            if g is None:
                g = g_cache[x.size] = force.tail_sums(x.size)
            e -= float(g @ x)
            r -= g
        return e, r

    return fun


def solve_atomistic(force: ExternalForce | None = None, n: int = DEFAULT_N,
                    pot: EAMPotential | None = None, config: SolverConfig | None = None,
                    x0=None):
    """Minimise the atomistic energy minus the work of ``force`` on ``n`` bonds.

    Returns ``(Displacement, SolveReport)``; the report carries the smallest
    Hessian eigenvalue at the minimiser.

    Raises
    ------
    SolverError
        If ``max_iter`` is exhausted.
    StabilityError
        If the Hessian at the final state is not positive definite.
    """
    pot = pot or EAMPotential()
    x0 = np.zeros(n) if x0 is None else np.asarray(getattr(x0, "strains", x0), dtype=float)
    if x0.size != n:
        tmp = np.zeros(n)
        m = min(n, x0.size)
        tmp[:m] = x0[:m]
        x0 = tmp
    x, report = minimize(objective(force, pot), x0, config)
    if not report.converged:
        raise SolverError(f"atomistic solve did not converge (|r| = {report.final_grad_norm:.3e})", report)
    report.hessian_min_eig = hessian(x, pot).smallest_eigenvalue()
    if not report.hessian_min_eig > 0:
        raise StabilityError(f"atomistic Hessian not positive definite "
                             f"(min eig {report.hessian_min_eig:.3e})", report)
    return Displacement(x), report


def ground_state(n: int = DEFAULT_N, pot: EAMPotential | None = None, config: SolverConfig | None = None):
    """Force-free ground state started from the reference lattice."""
    return solve_atomistic(None, n, pot, config)


def decay_roots(pot: EAMPotential | None = None):
    """Both roots of ``b x^2 + a x + b = 0`` of the linearised bond recursion."""
    a, b, _ = (pot or EAMPotential()).linearised_coefficients()
    disc = a * a - 4.0 * b * b
    if not disc > 0:
        raise StabilityError(f"linearised recursion is unstable: a^2 - 4b^2 = {disc:.6g}")
    if b == 0:
        return 0.0, math.inf
    root = math.sqrt(disc)
    return (-a + root) / (2.0 * b), (-a - root) / (2.0 * b)


def decay_lambda(pot: EAMPotential | None = None) -> float:
    """The root of the linearised recursion with modulus below one."""
    lp, lm = decay_roots(pot)
    return lp if abs(lp) < abs(lm) else lm


@dataclass(frozen=True)
class DecayFit:
    mu: float
    prefactor: float
    fit_range: tuple
    residual: float
    n_points: int

    def to_dict(self) -> dict:
        return {"mu": self.mu, "prefactor": self.prefactor, "fit_range": list(self.fit_range),
                "residual": self.residual, "n_points": self.n_points}


def fit_decay(strains, start: int = 2, stop: int = 20, floor: float = 1e-14) -> DecayFit:
    """Least-squares fit ``log|u'_l| ~ log C + l log mu`` over ``start <= l <= stop``.

    Entries with ``|u'_l| <= floor`` are skipped.
    """
    s = np.asarray(getattr(strains, "strains", strains), dtype=float)
    ell = np.arange(start, min(stop, s.size - 1) + 1)
    vals = np.abs(s[ell]) if ell.size else np.empty(0)
    keep = vals > floor
    ell, vals = ell[keep], vals[keep]
    if ell.size < 4:
        raise FitError(f"need at least 4 points above {floor:g} in [{start}, {stop}], got {ell.size}")
    slope, intercept = np.polyfit(ell, np.log(vals), 1)
    resid = np.log(vals) - (intercept + slope * ell)
    mu = math.exp(slope)
    if not mu < 1:
        raise FitError(f"fitted ratio {mu:.4g} does not decay")
    return DecayFit(mu, math.exp(intercept), (start, stop), float(np.sqrt(np.mean(resid**2))), int(ell.size))
