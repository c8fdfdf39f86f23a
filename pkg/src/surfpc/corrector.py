"""Surface corrector on a boundary layer of ``L`` bonds.

The corrector ``q`` perturbs the homogeneous strain ``F0`` on bonds
``0 .. L-1`` (``q'_l = 0`` for ``l >= L``) and minimises the surface excess

    E(q; F0) = Vsurf(F0 + q'_0) - W(F0) - q'_0 dW(F0)
             + sum_{j=1}^{L} [V(F0 + q'_{j-1}, F0 + q'_j) - W(F0) - q'_j dW(F0)].

Terms with ``j > L`` vanish identically, so the sum is finite.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .atomistic import DecayFit, Tridiagonal, _chain_gradient, _chain_hessian, fit_decay
from .errors import SolverError, StabilityError
from .optimize import SolverConfig, SolveReport, minimize
from .potentials import EAMPotential

__all__ = [
    "CorrectorState",
    "corrector_energy",
    "corrector_residual",
    "corrector_hessian",
    "corrector_objective",
    "solve_corrector",
    "sweep_layers",
    "truncate_pi_L",
    "fit_mu_q",
    "write_corrector_report",
]


@dataclass(frozen=True, eq=False)
class CorrectorState:
    F0: float
    strains: np.ndarray

    def __post_init__(self):
        q = np.array(self.strains, dtype=float).ravel()
        if not np.all(np.isfinite(q)) or not np.isfinite(self.F0):
            raise ValueError("corrector state must be finite")
        q.setflags(write=False)
        object.__setattr__(self, "strains", q)
        object.__setattr__(self, "F0", float(self.F0))

    @property
    def layer_width(self) -> int:
        return self.strains.size

    @classmethod
    def zeros(cls, L: int, F0: float = 0.0) -> "CorrectorState":
        return cls(F0, np.zeros(L))

    def padded(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        m = min(n, self.layer_width)
        out[:m] = self.strains[:m]
        return out

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bond", "q_strain"])
            for i, v in enumerate(self.strains):
                w.writerow([i, repr(float(v))])


def _ext(q, F0):
    return np.append(F0 + np.asarray(q, dtype=float), F0)


def corrector_energy(state: CorrectorState, pot: EAMPotential | None = None) -> float:
    pot = pot or EAMPotential()
    F0, q = state.F0, state.strains
    ext = _ext(q, F0)
    W = float(pot.cb_density(F0))
    dW = float(pot.cb_density(F0, 1))
    q_ext = np.append(q, 0.0)
    surf = float(pot.surf_terms(ext[0])[0]) - W - q_ext[0] * dW
    bulk = pot.bulk_terms(ext[:-1], ext[1:])[0] - W - q_ext[1:] * dW
    return surf + float(np.sum(bulk))


def corrector_residual(state: CorrectorState, pot: EAMPotential | None = None) -> np.ndarray:
    """Per-bond coefficients of the first variation, restricted to ``Q_L``."""
    pot = pot or EAMPotential()
    if state.layer_width == 0:
        return np.zeros(0)
    return _chain_gradient(_ext(state.strains, state.F0), pot) - float(pot.cb_density(state.F0, 1))


def corrector_hessian(state: CorrectorState, pot: EAMPotential | None = None) -> Tridiagonal:
    pot = pot or EAMPotential()
    if state.layer_width == 0:
        return Tridiagonal(np.zeros(0), np.zeros(0))
    return _chain_hessian(_ext(state.strains, state.F0), pot)


def corrector_objective(F0: float, pot: EAMPotential | None = None):
    pot = pot or EAMPotential()
    W = float(pot.cb_density(F0))
    dW = float(pot.cb_density(F0, 1))

    def fun(x):
        ext = _ext(x, F0)
        v = pot.bulk_terms(ext[:-1], ext[1:])[0]
        e = float(pot.surf_terms(ext[0])[0]) - W + float(np.sum(v - W)) - dW * float(np.sum(x))
        return e, _chain_gradient(ext, pot) - dW

    return fun


def solve_corrector(L: int, F0: float = 0.0, pot: EAMPotential | None = None,
                    config: SolverConfig | None = None, x0=None):
    """Minimise the corrector energy over ``Q_L``.

    ``x0`` may be a previous :class:`CorrectorState` (any width); it is
    truncated or zero-extended to ``L`` bonds.

    Returns ``(CorrectorState, SolveReport)`` with the smallest Hessian
    eigenvalue recorded in the report.

    Raises
    ------
    SolverError
        On non-convergence.
    StabilityError
        If the Hessian at the minimiser is not positive definite.
    """
    if L < 0:
        raise ValueError("layer width must be non-negative")
    pot = pot or EAMPotential()
    start = np.zeros(L)
    if x0 is not None:
        prev = np.asarray(getattr(x0, "strains", x0), dtype=float)
        m = min(L, prev.size)
        start[:m] = prev[:m]
    if L == 0:
        state = CorrectorState(F0, start)
        report = SolveReport(0, 0.0, corrector_energy(state, pot), True, 0, float("inf"))
        return state, report
    x, report = minimize(corrector_objective(F0, pot), start, config)
    if not report.converged:
        raise SolverError(f"corrector solve (L={L}, F0={F0:g}) did not converge "
                          f"(|r| = {report.final_grad_norm:.3e})", report)
    state = CorrectorState(F0, x)
    report.hessian_min_eig = corrector_hessian(state, pot).smallest_eigenvalue()
    if not report.hessian_min_eig > 0:
        raise StabilityError(f"corrector Hessian not positive definite at L={L}, F0={F0:g} "
                             f"(min eig {report.hessian_min_eig:.3e})", report)
    return state, report


def sweep_layers(Ls, F0: float = 0.0, pot: EAMPotential | None = None, config: SolverConfig | None = None):
    """Solve for each width in ``Ls`` (ascending), warm-starting from the previous solution.

    Returns a dict ``L -> (CorrectorState, SolveReport)``.
    """
    out = {}
    prev = None
    for L in sorted(set(int(L) for L in Ls)):
        state, report = solve_corrector(L, F0, pot, config, x0=prev)
        out[L] = (state, report)
        prev = state
    return out


def truncate_pi_L(state: CorrectorState, L_new: int) -> CorrectorState:
    """Keep the first ``L_new`` strains and zero the rest."""
    if not 0 <= L_new <= state.layer_width:
        raise ValueError(f"cannot truncate width {state.layer_width} to {L_new}")
    return CorrectorState(state.F0, state.strains[:L_new])


def fit_mu_q(state: CorrectorState, start: int = 2, stop: int = 20, floor: float = 1e-14) -> DecayFit:
    return fit_decay(state.strains, start, stop, floor)


def write_corrector_report(path, state: CorrectorState, report: SolveReport, fit: DecayFit | None = None) -> None:
    payload = {
        "layer_width": state.layer_width,
        "F0": state.F0,
        "residual_norm": report.final_grad_norm,
        "hessian_min_eig": report.hessian_min_eig,
        "iterations": report.iterations,
        "mu_q_fit": fit.to_dict() if fit is not None else None,
    }
    Path(path).write_text(json.dumps(payload, indent=2))
