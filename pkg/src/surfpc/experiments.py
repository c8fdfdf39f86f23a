"""Predictor-corrector assembly and the three numerical experiments.

Errors are always ``l2`` norms of strain differences on the truncated chain,
never of displacements.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import atomistic, cauchy_born, corrector
from .atomistic import DEFAULT_N, Displacement
from .corrector import CorrectorState
from .forces import TEST2_SUPPORT, ExternalForce, rescale, test2_profile
from .optimize import SolverConfig, fd_check, fd_hessian_check
from .potentials import EAMPotential

__all__ = [
    "assemble_pc",
    "strain_error",
    "layer_width_rule",
    "loglog_slope",
    "reference_config",
    "run_ground_state",
    "run_converge_L",
    "run_long_wavelength",
    "run_fixed_force",
    "run_potential_check",
    "CheckReport",
]

logger = logging.getLogger(__name__)

REFERENCE_TOL = 1e-12


def reference_config(config: SolverConfig | None = None) -> SolverConfig:
    """Tighter tolerance used for the atomistic reference solutions."""
    cfg = config or SolverConfig()
    return cfg.replace(grad_tol=min(cfg.grad_tol, REFERENCE_TOL))


def assemble_pc(u_cb: Displacement, q: CorrectorState) -> Displacement:
    """``u_pc = Pi_a u_cb + q`` bond by bond (``u_cb`` is already a lattice field)."""
    if q.layer_width > u_cb.n_bonds:
        raise ValueError(f"corrector width {q.layer_width} exceeds chain of {u_cb.n_bonds} bonds")
    return Displacement(u_cb.strains + q.padded(u_cb.n_bonds))


def strain_error(a, b) -> float:
    """``|| a' - b' ||_{l2}``, zero-extending the shorter strain vector."""
    sa = np.asarray(getattr(a, "strains", a), dtype=float)
    sb = np.asarray(getattr(b, "strains", b), dtype=float)
    n = max(sa.size, sb.size)
    return float(np.linalg.norm(np.pad(sa, (0, n - sa.size)) - np.pad(sb, (0, n - sb.size))))


def layer_width_rule(lam: float) -> int:
    """``L = 3 + ceil(log_{10/9}(1/lam))``."""
    return 3 + math.ceil(math.log(1.0 / lam) / math.log(10.0 / 9.0))


def loglog_slope(x, y) -> float:
    slope, _ = np.polyfit(np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float)), 1)
    return float(slope)


# -- Test 1 -------------------------------------------------------------------

def run_ground_state(n: int = DEFAULT_N, L_list=(1, 2, 3, 4, 5, 6, 8, 10, 12, 15, 20),
                     pot: EAMPotential | None = None, config: SolverConfig | None = None) -> dict:
    """Force-free ground state: atomistic, pure Cauchy-Born (zero) and ``u_pc_L = q_L``."""
    pot = pot or EAMPotential()
    u_gr, rep_gr = atomistic.ground_state(n, pot, reference_config(config))
    u_cb = Displacement.zeros(n)
    layers = corrector.sweep_layers(L_list, 0.0, pot, config)
    rows = []
    for L, (q, rep) in layers.items():
        u_pc = assemble_pc(u_cb, q)
        rows.append({"L": L, "error": strain_error(u_gr, u_pc), "q_iterations": rep.iterations,
                     "q_hessian_min_eig": rep.hessian_min_eig})
    lam = atomistic.decay_lambda(pot)
    fit = atomistic.fit_decay(u_gr)
    return {
        "n": n,
        "u_gr": u_gr,
        "u_cb": u_cb,
        "correctors": {L: q for L, (q, _) in layers.items()},
        "rows": rows,
        "error_cb": strain_error(u_gr, u_cb),
        "lambda_plus": lam,
        "mu_a_fit": fit,
        "atomistic_report": rep_gr,
        "alternating": bool(np.all(np.sign(u_gr.strains[:20]) * np.sign(u_gr.strains[1:21]) < 0)),
    }


def run_converge_L(L_list=tuple(range(2, 13)), L_ref: int = 40, F0: float = 0.0,
                   pot: EAMPotential | None = None, config: SolverConfig | None = None) -> dict:
    """``|| q'_ref - q'_L ||`` against the layer width, ``q_ref`` standing in for ``q_inf``."""
    pot = pot or EAMPotential()
    cfg = reference_config(config)
    q_ref, rep_ref = corrector.solve_corrector(L_ref, F0, pot, cfg)
    fit = corrector.fit_mu_q(q_ref)
    rows = []
    for L, (q, rep) in corrector.sweep_layers(L_list, F0, pot, cfg).items():
        rows.append({"L": L, "difference": strain_error(q_ref, q), "hessian_min_eig": rep.hessian_min_eig})
    Ls = np.array([r["L"] for r in rows], dtype=float)
    d = np.array([r["difference"] for r in rows])
    ratio = float(np.exp(np.polyfit(Ls, np.log(d), 1)[0]))
    return {"q_ref": q_ref, "ref_report": rep_ref, "mu_q_fit": fit, "rows": rows, "ratio": ratio}


# -- Tests 2 and 3 ------------------------------------------------------------

def _pc_with_force(force: ExternalForce, L: int, n: int, pot: EAMPotential, config: SolverConfig | None,
                   load: str = "midpoint") -> dict:
    u_cb, rep_cb = cauchy_born.solve_cb(force, n, pot, config, load=load)
    F0 = cauchy_born.surface_strain_F0(u_cb, force, pot)
    q, rep_q = corrector.solve_corrector(L, F0, pot, config)
    u_pc = assemble_pc(cauchy_born.project_pi_a(u_cb), q)
    u_a, rep_a = atomistic.solve_atomistic(force, n, pot, reference_config(config), x0=u_pc)
    return {
        "u_cb": u_cb, "u_pc": u_pc, "u_a": u_a, "q": q, "F0": F0,
        "error_pc": strain_error(u_a, u_pc),
        "error_cb": strain_error(u_a, u_cb),
        "reports": {"cb": rep_cb, "corrector": rep_q, "atomistic": rep_a},
    }


def run_long_wavelength(lambda_list=tuple(2.0**-k for k in range(1, 7)), n: int = DEFAULT_N,
                        pot: EAMPotential | None = None, config: SolverConfig | None = None,
                        load: str = "midpoint", fhat=test2_profile, support: float = TEST2_SUPPORT) -> dict:
    """Long-wavelength sweep ``f_l = lam fhat(lam l)`` with the balanced layer width."""
    pot = pot or EAMPotential()
    rows = []
    runs = {}
    for lam in lambda_list:
        force = rescale(fhat, lam, support)
        L = layer_width_rule(lam)
        res = _pc_with_force(force, L, n, pot, config, load)
        budget = cauchy_born.error_budget(res["u_cb"], force)
        rows.append({"lambda": lam, "L": L, "F0": res["F0"], "error_pc": res["error_pc"],
                     "error_cb": res["error_cb"], "dual_norm": force.dual_norm(), **budget.to_dict()})
        runs[lam] = res
        logger.info("lambda=%g L=%d error_pc=%.4e", lam, L, res["error_pc"])
    slope = loglog_slope([r["lambda"] for r in rows], [r["error_pc"] for r in rows]) if len(rows) > 1 else math.nan
    return {"rows": rows, "slope": slope, "runs": runs}


def run_fixed_force(L_list=(0, 1, 2, 3, 4, 5, 6, 8, 10, 12, 15, 20), n: int = DEFAULT_N,
                    pot: EAMPotential | None = None, config: SolverConfig | None = None,
                    load: str = "midpoint", ratio_L: int = 5, force: ExternalForce | None = None) -> dict:
    """Fixed force (default ``f_l = fhat(l)``) and a sweep of layer widths."""
    pot = pot or EAMPotential()
    force = force if force is not None else rescale(test2_profile, 1.0)
    u_cb, rep_cb = cauchy_born.solve_cb(force, n, pot, config, load=load)
    F0 = cauchy_born.surface_strain_F0(u_cb, force, pot)
    Ls = sorted(set(L_list) | {ratio_L})
    layers = corrector.sweep_layers(Ls, F0, pot, config)
    # reference solution: warm start from the widest predictor-corrector state
    u_start = assemble_pc(u_cb, layers[Ls[-1]][0])
    u_a, rep_a = atomistic.solve_atomistic(force, n, pot, reference_config(config), x0=u_start)
    error_cb = strain_error(u_a, u_cb)
    rows = []
    profiles = {}
    for L in Ls:
        u_pc = assemble_pc(u_cb, layers[L][0])
        profiles[L] = u_pc
        rows.append({"L": L, "error_pc": strain_error(u_a, u_pc)})
    err_at = {r["L"]: r["error_pc"] for r in rows}
    budget = cauchy_born.error_budget(u_cb, force)
    return {
        "force": force, "u_a": u_a, "u_cb": u_cb, "F0": F0, "profiles": profiles,
        "rows": rows, "error_cb": error_cb,
        "ratio": error_cb / err_at[ratio_L], "ratio_L": ratio_L,
        "budget": budget,
        "reports": {"cb": rep_cb, "atomistic": rep_a},
    }


# -- derivative and identity checks -------------------------------------------

@dataclass
class CheckReport:
    results: list = field(default_factory=list)

    def add(self, name: str, value: float, threshold: float, passed: bool | None = None):
        ok = bool(value < threshold) if passed is None else bool(passed)
        self.results.append({"name": name, "value": float(value), "threshold": threshold, "passed": ok})

    @property
    def passed(self) -> bool:
        return all(r["passed"] for r in self.results)

    @property
    def failures(self) -> list:
        return [r["name"] for r in self.results if not r["passed"]]

    def lines(self):
        for r in self.results:
            flag = "PASS" if r["passed"] else "FAIL"
            yield f"{flag}  {r['name']}: {r['value']:.3e} (threshold {r['threshold']:.0e})"


def _scalar_fd(fun, x, h):
    return (fun(x + h) - fun(x - h)) / (2.0 * h)


def _rel(a, b, floor=1e-8):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = np.maximum(np.abs(a), np.abs(b))
    return float(np.max(np.where(scale > floor, np.abs(a - b) / np.where(scale > floor, scale, 1.0),
                                 np.abs(a - b))))


def run_potential_check(pot: EAMPotential | None = None, n_samples: int = 50, h: float = 1e-6,
                        seed: int = 0) -> CheckReport:
    """Derivative, symmetry and identity checks for a potential and the energies built on it."""
    pot = pot or EAMPotential()
    rep = CheckReport()
    grid = np.linspace(-0.3, 0.3, n_samples)
    rng = np.random.default_rng(seed)

    for name, fun in [("phi", lambda x, o=0: pot.pair_phi(1.0 + x, o)),
                      ("rho", lambda x, o=0: pot.elec_rho(1.0 + x, o)),
                      ("W", pot.cb_density)]:
        rep.add(f"{name}' vs FD", _rel(fun(grid, 1), _scalar_fd(lambda x: fun(x, 0), grid, h)), 1e-6)
        rep.add(f"{name}'' vs FD", _rel(fun(grid, 2), _scalar_fd(lambda x: fun(x, 1), grid, h)), 1e-5)
    dens = 2.0 * pot.elec_rho(1.0 + grid)
    rep.add("psi' vs FD", _rel(pot.embed_psi(dens, 1), _scalar_fd(pot.embed_psi, dens, h)), 1e-6)
    rep.add("psi'' vs FD", _rel(pot.embed_psi(dens, 2), _scalar_fd(lambda x: pot.embed_psi(x, 1), dens, h)), 1e-5)

    surf = pot.surf_terms
    rep.add("Vsurf' vs FD", _rel(surf(grid)[1], _scalar_fd(lambda x: surf(x)[0], grid, h)), 1e-6)
    rep.add("Vsurf'' vs FD", _rel(surf(grid)[2], _scalar_fd(lambda x: surf(x)[1], grid, h)), 1e-5)

    r, s = rng.uniform(-0.3, 0.3, (2, n_samples))
    v, d1, d2, d11, d12, d22 = pot.bulk_terms(r, s)
    V = lambda a, b: pot.bulk_terms(a, b)
    rep.add("dV/dr vs FD", _rel(d1, (V(r + h, s)[0] - V(r - h, s)[0]) / (2 * h)), 1e-6)
    rep.add("dV/ds vs FD", _rel(d2, (V(r, s + h)[0] - V(r, s - h)[0]) / (2 * h)), 1e-6)
    rep.add("d2V/dr2 vs FD", _rel(d11, (V(r + h, s)[1] - V(r - h, s)[1]) / (2 * h)), 1e-5)
    rep.add("d2V/drds vs FD", _rel(d12, (V(r, s + h)[1] - V(r, s - h)[1]) / (2 * h)), 1e-5)
    rep.add("d2V/ds2 vs FD", _rel(d22, (V(r, s + h)[2] - V(r, s - h)[2]) / (2 * h)), 1e-5)

    vs = V(s, r)
    rep.add("V(r,s) = V(s,r)", float(np.max(np.abs(v - vs[0]))), 1e-12)
    rep.add("d11(r,s) = d22(s,r)", _rel(d11, vs[5]), 1e-12)
    Fg = grid
    rep.add("W(F) = V(F,F)", float(np.max(np.abs(pot.cb_density(Fg) - V(Fg, Fg)[0]))), 1e-12)
    vf = V(Fg, Fg)
    rep.add("dW = d1V + d2V on diagonal", float(np.max(np.abs(pot.cb_density(Fg, 1) - vf[1] - vf[2]))), 1e-12)
    rep.add("dW(0) = 0 (bulk equilibrium)", abs(float(pot.cb_density(0.0, 1))), 1e-9)
    rep.add("d2W(0) > 0", -float(pot.cb_density(0.0, 2)), 0.0)

    n_chain = 12
    for k in range(3):
        x = rng.uniform(-0.05, 0.05, n_chain)
        at = atomistic.objective(None, pot)
        rep.add(f"atomistic residual vs FD #{k}", fd_check(at, x, h), 1e-6)
        rep.add(f"atomistic Hessian vs FD #{k}",
                fd_hessian_check(lambda y: at(y)[1], atomistic.hessian(x, pot).matvec, x, h), 1e-5)
        F0 = 0.005
        co = corrector.corrector_objective(F0, pot)
        rep.add(f"corrector residual vs FD #{k}", fd_check(co, x, h), 1e-6)
        st = CorrectorState(F0, x)
        rep.add(f"corrector Hessian vs FD #{k}",
                fd_hessian_check(lambda y: co(y)[1], corrector.corrector_hessian(st, pot).matvec, x, h), 1e-5)
    return rep
