"""Cauchy-Born predictor.

Two independent routes to the predictor strain:

* :func:`solve_cb` minimises the lattice-discretised energy
  ``sum_l W(u'_l) - sum_l G_l u'_l`` by steepest descent;
* :func:`solve_cb_semianalytic` inverts the integrated Euler-Lagrange
  equation ``dW(grad u(x)) = gtilde(x)`` pointwise by a safeguarded scalar
  Newton iteration.

The per-bond load ``G_l`` defaults to ``gtilde(l + 1/2)`` (midpoint sampling
of the continuum load), which makes the two routes solve the same discrete
equations.  ``load="lattice"`` uses the atomistic tail sums ``g_l`` instead.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .atomistic import DEFAULT_N, Displacement, Tridiagonal
from .errors import DomainError, SolverError, StabilityError
from .forces import ExternalForce
from .optimize import SolverConfig, minimize
from .potentials import EAMPotential

__all__ = [
    "cb_energy",
    "cb_residual",
    "cb_hessian",
    "cb_load",
    "solve_cb",
    "invertibility_window",
    "inverse_dW",
    "SemiAnalyticCB",
    "solve_cb_semianalytic",
    "surface_strain_F0",
    "project_pi_a",
    "ErrorBudget",
    "error_budget",
    "write_cb_csv",
]

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(12)
_GAUSS_X = 0.5 * (_GAUSS_X + 1.0)
_GAUSS_W = 0.5 * _GAUSS_W


def cb_energy(strains, pot: EAMPotential | None = None, renormalize: bool = False) -> float:
    pot = pot or EAMPotential()
    s = np.asarray(getattr(strains, "strains", strains), dtype=float)
    w = pot.cb_density(s)
    if renormalize:
        return float(np.sum(w - float(pot.cb_density(0.0))))
    return float(np.sum(w))


def cb_load(force: ExternalForce | None, n: int, load: str = "midpoint") -> np.ndarray:
    if force is None:
        return np.zeros(n)
    if load == "midpoint":
        return force.midpoint_gtilde(n)
    if load == "lattice":
        return force.tail_sums(n)
    raise ValueError(f"unknown load sampling {load!r}")


def cb_residual(strains, force: ExternalForce | None = None, pot: EAMPotential | None = None,
                load: str = "midpoint") -> np.ndarray:
    """``dW(u'_l) - G_l`` per bond."""
    pot = pot or EAMPotential()
    s = np.asarray(getattr(strains, "strains", strains), dtype=float)
    return pot.cb_density(s, 1) - cb_load(force, s.size, load)


def cb_hessian(strains, pot: EAMPotential | None = None) -> Tridiagonal:
    pot = pot or EAMPotential()
    s = np.asarray(getattr(strains, "strains", strains), dtype=float)
    return Tridiagonal(np.asarray(pot.cb_density(s, 2), dtype=float), np.zeros(max(s.size - 1, 0)))


@lru_cache(maxsize=32)
def _window(pot_params, step):
    pot = EAMPotential(pot_params)
    w2_0 = float(pot.cb_density(0.0, 2))
    if not w2_0 > 0:
        raise StabilityError(f"d2W(0) = {w2_0:.6g} is not positive")
    G = 0.0
    k = 1
    while k * step <= 1.0:
        F = k * step
        if not (pot.cb_density(F, 2) > 0.5 * w2_0 and pot.cb_density(-F, 2) > 0.5 * w2_0):
            break
        G = F
        k += 1
    if G == 0.0:
        raise StabilityError("no monotonicity window around F = 0")
    return G


def invertibility_window(pot: EAMPotential | None = None, step: float = 1e-3) -> float:
    """Largest ``G`` (on a ``step`` grid, capped at 1) with ``d2W > d2W(0)/2`` on ``[-G, G]``."""
    return _window((pot or EAMPotential()).params, step)


def inverse_dW(values, pot: EAMPotential | None = None, G: float | None = None,
               tol: float = 1e-14, max_iter: int = 200):
    """Solve ``dW(F) = c`` for ``F`` in ``[-G, G]``, elementwise.

    Newton steps from the linearised guess ``c / d2W(0)``; any step leaving
    the current bracket is replaced by bisection.

    Raises
    ------
    DomainError
        If a target lies outside ``dW([-G, G])``.
    """
    pot = pot or EAMPotential()
    G = invertibility_window(pot) if G is None else G
    c = np.atleast_1d(np.asarray(values, dtype=float))
    lo_val, hi_val = float(pot.cb_density(-G, 1)), float(pot.cb_density(G, 1))
    if np.any(c < lo_val) or np.any(c > hi_val):
        bad = c[(c < lo_val) | (c > hi_val)]
        raise DomainError(f"dW^-1 undefined for {bad[0]:.6g}: outside [{lo_val:.6g}, {hi_val:.6g}] "
                          f"(window G = {G:g})")
    lo = np.full(c.shape, -G)
    hi = np.full(c.shape, G)
    F = np.clip(c / float(pot.cb_density(0.0, 2)), -G, G)
    active = np.ones(c.shape, dtype=bool)
    for _ in range(max_iter):
        res = pot.cb_density(F, 1) - c
        # dW increasing: res > 0 means F is too large
        hi = np.where(active & (res > 0), F, hi)
        lo = np.where(active & (res <= 0), F, lo)
        step = res / pot.cb_density(F, 2)
        F_new = F - step
        outside = (F_new <= lo) | (F_new >= hi)
        F_new = np.where(outside, 0.5 * (lo + hi), F_new)
        done = np.abs(F_new - F) <= tol * np.maximum(1.0, np.abs(F))
        F = np.where(active, F_new, F)
        active &= ~done
        if not active.any():
            break
    else:
        raise SolverError("scalar Newton inversion of dW did not converge")
    return F if np.ndim(values) else float(F[0])


def solve_cb(force: ExternalForce | None = None, n: int = DEFAULT_N, pot: EAMPotential | None = None,
             config: SolverConfig | None = None, load: str = "midpoint", x0=None):
    """Minimise the discrete Cauchy-Born energy minus the load work.

    Returns ``(Displacement, SolveReport)``.

    Raises
    ------
    DomainError
        If the load leaves the monotonicity window of ``dW`` (force too large).
    SolverError
        On non-convergence.
    """
    pot = pot or EAMPotential()
    G_load = cb_load(force, n, load)
    G = invertibility_window(pot)
    bound = min(-float(pot.cb_density(-G, 1)), float(pot.cb_density(G, 1)))
    if np.max(np.abs(G_load), initial=0.0) >= bound:
        raise DomainError(f"force too large for the Cauchy-Born predictor: |G| >= {bound:.6g}")
    w0 = float(pot.cb_density(0.0))

    def fun(x):
        e = float(np.sum(pot.cb_density(x) - w0) - G_load @ x)
        return e, pot.cb_density(x, 1) - G_load

    start = np.zeros(n) if x0 is None else np.asarray(getattr(x0, "strains", x0), dtype=float)
    x, report = minimize(fun, start, config)
    if not report.converged:
        raise SolverError(f"Cauchy-Born solve did not converge (|r| = {report.final_grad_norm:.3e})", report)
    report.hessian_min_eig = float(np.min(pot.cb_density(x, 2)))
    if not report.hessian_min_eig > 0:
        raise StabilityError("Cauchy-Born Hessian not positive definite", report)
    return Displacement(x), report


class SemiAnalyticCB:
    """Continuum predictor ``grad u(x) = dW^{-1}(gtilde(x))``."""

    def __init__(self, force: ExternalForce | None, pot: EAMPotential | None = None):
        self.force = force if force is not None else ExternalForce(np.zeros(1))
        self.pot = pot or EAMPotential()
        self.G = invertibility_window(self.pot)

    def gradient(self, x):
        return inverse_dW(self.force.gtilde(x), self.pot, self.G)

    def __call__(self, x):
        return self.gradient(x)

    def bond_strains(self, n: int) -> np.ndarray:
        """Strain at the bond midpoints ``l + 1/2``."""
        return np.asarray(self.gradient(np.arange(n) + 0.5), dtype=float)

    def surface_strain(self) -> float:
        return float(self.gradient(0.0))


def solve_cb_semianalytic(force: ExternalForce | None, n: int = DEFAULT_N,
                          pot: EAMPotential | None = None) -> np.ndarray:
    """Per-bond strains from the pointwise inversion at the bond midpoints."""
    return SemiAnalyticCB(force, pot).bond_strains(n)


def surface_strain_F0(u_cb: Displacement | None = None, force: ExternalForce | None = None,
                      pot: EAMPotential | None = None) -> float:
    """Boundary strain ``F0 = grad u_cb(0)``.

    Uses the continuum inversion at ``x = 0`` when the force is known and
    falls back to the first bond strain of a lattice predictor otherwise.
    """
    if force is not None:
        return SemiAnalyticCB(force, pot).surface_strain()
    if u_cb is None:
        raise ValueError("need a predictor or a force")
    s = np.asarray(getattr(u_cb, "strains", u_cb), dtype=float)
    return float(s[0]) if s.size else 0.0


def project_pi_a(field, n: int | None = None) -> Displacement:
    """Bond averages ``(Pi_a u)'_l = int_l^{l+1} grad u``.

    Lattice inputs (a :class:`Displacement` or an array of bond strains) are
    returned unchanged.  A callable ``grad u`` is integrated cell by cell
    with 12-point Gauss-Legendre quadrature, exact for polynomial gradients
    up to degree 23.
    """
    if isinstance(field, Displacement):
        return field if n is None else Displacement(field.padded(n))
    if not callable(field):
        d = Displacement(np.asarray(field, dtype=float))
        return d if n is None else Displacement(d.padded(n))
    if n is None:
        raise ValueError("number of bonds required for a continuum field")
    nodes = (np.arange(n)[:, None] + _GAUSS_X[None, :]).ravel()
    vals = np.asarray(field(nodes), dtype=float).reshape(n, _GAUSS_X.size)
    return Displacement(vals @ _GAUSS_W)


@dataclass(frozen=True)
class ErrorBudget:
    """Lattice surrogates of the terms in the predictor-corrector error bound."""

    d2u_surface: float     # |u''_0|
    d2u_L4_sq: float       # ||u''||_{l4}^2
    d3u_L2: float          # ||u'''||_{l2}
    df_L2: float           # ||f'||_{l2}
    f_surface: float       # |f_0|
    f_L4_sq: float         # ||f||_{l4}^2

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def total(self) -> float:
        return self.d2u_surface + self.d2u_L4_sq + self.d3u_L2 + self.df_L2

    @property
    def force_only(self) -> float:
        return self.f_surface + self.f_L4_sq + self.df_L2


def error_budget(u_cb, force: ExternalForce | None) -> ErrorBudget:
    s = np.asarray(getattr(u_cb, "strains", u_cb), dtype=float)
    d2 = np.diff(s)
    d3 = s[:-2] - 2.0 * s[1:-1] + s[2:] if s.size >= 3 else np.zeros(0)
    if force is None:
        f = np.zeros(1)
    else:
        f = force.samples
    df = np.diff(np.append(f, 0.0))
    return ErrorBudget(
        d2u_surface=float(abs(d2[0])) if d2.size else 0.0,
        d2u_L4_sq=float(np.sqrt(np.sum(d2**4))),
        d3u_L2=float(np.linalg.norm(d3)),
        df_L2=float(np.linalg.norm(df)),
        f_surface=float(abs(f[0])),
        f_L4_sq=float(np.sqrt(np.sum(f**4))),
    )


def write_cb_csv(u_cb, force: ExternalForce | None, path) -> None:
    """Per-bond rows: strain, ``gtilde(l + 1/2)`` and the local second/third differences."""
    s = np.asarray(getattr(u_cb, "strains", u_cb), dtype=float)
    gt = force.midpoint_gtilde(s.size) if force is not None else np.zeros(s.size)
    d2 = np.append(np.diff(s), 0.0)
    d3 = np.zeros(s.size)
    if s.size >= 3:
        d3[1:-1] = s[:-2] - 2.0 * s[1:-1] + s[2:]
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bond", "strain", "gtilde_mid", "d2u", "d3u"])
        for i in range(s.size):
            w.writerow([i, repr(float(s[i])), repr(float(gt[i])), repr(float(d2[i])), repr(float(d3[i]))])
