"""Steepest descent with backtracking, and a finite-difference gradient check.

Objectives are callables ``x -> (energy, residual)`` where ``residual`` is
the gradient of ``energy`` with respect to the strain vector ``x``.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, StallError

__all__ = ["SolverConfig", "SolveReport", "minimize", "fd_gradient", "fd_check", "fd_hessian_check"]

logger = logging.getLogger(__name__)

# relative size of energy differences treated as floating-point noise
_ENERGY_NOISE = 1e-13


@dataclass(frozen=True)
class SolverConfig:
    grad_tol: float = 1e-10
    max_iter: int = 200_000
    armijo_c: float = 1e-4
    shrink: float = 0.5
    step_init: float = 1.0
    min_step: float = 1e-16
    record_trace: bool = False

    def __post_init__(self):
        if not 0 < self.armijo_c < 1:
            raise DomainError("armijo_c must lie in (0, 1)")
        if not 0 < self.shrink < 1:
            raise DomainError("shrink must lie in (0, 1)")
        if not self.grad_tol > 0:
            raise DomainError("grad_tol must be positive")
        if not self.step_init > 0 or not self.min_step > 0:
            raise DomainError("step sizes must be positive")
        if self.max_iter < 0:
            raise DomainError("max_iter must be non-negative")

    def replace(self, **changes) -> "SolverConfig":
        kw = {k: getattr(self, k) for k in self.__dataclass_fields__}
        kw.update(changes)
        return SolverConfig(**kw)


@dataclass
class SolveReport:
    iterations: int
    final_grad_norm: float
    final_energy: float
    converged: bool
    line_search_failures: int
    hessian_min_eig: float | None = None
    energy_trace: list = field(default_factory=list, repr=False)
    step_trace: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_grad_norm": self.final_grad_norm,
            "final_energy": self.final_energy,
            "converged": self.converged,
            "line_search_failures": self.line_search_failures,
            "hessian_min_eig": self.hessian_min_eig,
        }

    def write_trace(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "energy", "step"])
            steps = [math.nan] + list(self.step_trace)
            for i, (e, t) in enumerate(zip(self.energy_trace, steps)):
                w.writerow([i, repr(e), repr(t)])


def minimize(objective, x0, config: SolverConfig | None = None):
    """Steepest descent ``x <- x - t r`` with Armijo backtracking.

    Each trial step starts at twice the last accepted step (``step_init`` on
    the first iteration) and is multiplied by ``shrink`` until

        E(x - t r) <= E(x) - armijo_c * t * |r|^2.

    Close to a minimiser the energy decrease drops below rounding error of
    the energy itself.  When the observed change is within that noise band the
    step is accepted on the equivalent slope test
    ``r(x - t r) . r >= -(1 - 2 armijo_c) |r|^2`` instead, which is exact for
    quadratics and does not suffer from cancellation.

    Returns
    -------
    x : ndarray
    report : SolveReport
        ``converged`` is False if ``max_iter`` was reached.

    Raises
    ------
    StallError
        If the step falls below ``config.min_step``.
    DomainError
        If the energy at ``x0`` is not finite.
    """
    cfg = config or SolverConfig()
    x = np.array(x0, dtype=float)
    energy, r = objective(x)
    if not np.isfinite(energy) or not np.all(np.isfinite(r)):
        raise DomainError("objective is not finite at the initial point")
    rnorm2 = float(r @ r)
    trace = [energy] if cfg.record_trace else []
    steps = []
    failures = 0
    step = cfg.step_init
    it = 0
    while math.sqrt(rnorm2) > cfg.grad_tol and it < cfg.max_iter:
        t = step
        while True:
            if t < cfg.min_step:
                report = SolveReport(it, math.sqrt(rnorm2), energy, False, failures, None, trace, steps)
                raise StallError(
                    f"line search stalled at iteration {it} (|r| = {math.sqrt(rnorm2):.3e})", report)
            x_new = x - t * r
            try:
                # overlong trials may overflow; non-finite values are rejected below
                with np.errstate(all="ignore"):
                    e_new, r_new = objective(x_new)
            except DomainError:
                e_new, r_new = math.inf, None
            if np.isfinite(e_new) and np.all(np.isfinite(r_new)):
                decrease = energy - e_new
                noise = _ENERGY_NOISE * max(1.0, abs(energy))
                if abs(decrease) > noise:
                    if decrease >= cfg.armijo_c * t * rnorm2:
                        break
                elif float(r_new @ r) >= -(1.0 - 2.0 * cfg.armijo_c) * rnorm2:
                    break
            failures += 1
            t *= cfg.shrink
        x, energy, r = x_new, e_new, r_new
        rnorm2 = float(r @ r)
        it += 1
        step = 2.0 * t
        if cfg.record_trace:
            trace.append(energy)
            steps.append(t)
    converged = math.sqrt(rnorm2) <= cfg.grad_tol
    if not converged:
        logger.warning("steepest descent hit max_iter=%d with |r| = %.3e", cfg.max_iter, math.sqrt(rnorm2))
    return x, SolveReport(it, math.sqrt(rnorm2), energy, converged, failures, None, trace, steps)


def _rel_err(analytic, numeric, floor):
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    diff = np.abs(analytic - numeric)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    return np.where(scale > floor, diff / np.where(scale > floor, scale, 1.0), diff)


def fd_gradient(objective, x, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of the energy returned by ``objective``."""
    if not h > 0:
        raise DomainError("finite-difference step must be positive")
    x = np.array(x, dtype=float)
    numeric = np.empty_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        numeric[i] = (objective(xp)[0] - objective(xm)[0]) / (2.0 * h)
    return numeric


def fd_check(objective, x, h: float = 1e-6, floor: float = 1e-8) -> float:
    """Largest relative error between the analytic gradient and central differences.

    Components whose magnitude is below ``floor`` are compared in absolute terms.
    """
    numeric = fd_gradient(objective, x, h)
    _, grad = objective(np.array(x, dtype=float))
    return float(np.max(_rel_err(grad, numeric, floor), initial=0.0))


def fd_hessian_check(gradient, hessian_matvec, x, h: float = 1e-6, floor: float = 1e-8) -> float:
    """Largest relative error of Hessian columns against central differences of the gradient."""
    x = np.array(x, dtype=float)
    worst = 0.0
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = 1.0
        numeric = (gradient(x + h * e) - gradient(x - h * e)) / (2.0 * h)
        worst = max(worst, float(np.max(_rel_err(hessian_matvec(e), numeric, floor))))
    return worst
