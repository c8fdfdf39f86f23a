import math

import numpy as np
import pytest

from surfpc import experiments as ex
from surfpc.atomistic import Displacement
from surfpc.corrector import CorrectorState
from surfpc.potentials import EAMPotential


class BrokenPsi(EAMPotential):
    """Copper with a 1% error in the embedding slope (negative control)."""

    def embed_psi(self, rho, order=0):
        val = super().embed_psi(rho, order)
        return 1.01 * val if order == 1 else val


class TestAssembly:
    def test_zero_corrector(self):
        u = Displacement([0.1, 0.2, 0.3])
        assert ex.assemble_pc(u, CorrectorState.zeros(2)).strains.tolist() == u.strains.tolist()

    def test_zero_predictor(self):
        q = CorrectorState(0.0, [0.1, -0.05])
        np.testing.assert_array_equal(ex.assemble_pc(Displacement.zeros(4), q).strains, [0.1, -0.05, 0, 0])

    def test_additive(self, rng):
        u = Displacement(rng.normal(size=10))
        q = CorrectorState(0.0, rng.normal(size=4))
        pc = ex.assemble_pc(u, q)
        np.testing.assert_array_equal(pc.strains[:4], u.strains[:4] + q.strains)
        np.testing.assert_array_equal(pc.strains[4:], u.strains[4:])

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            ex.assemble_pc(Displacement.zeros(3), CorrectorState.zeros(4))


class TestHelpers:
    @pytest.mark.parametrize("lam,L", [(1.0, 3), (0.5, 10), (0.25, 17), (2.0**-6, 43)])
    def test_layer_rule(self, lam, L):
        # 3 + ceil(log(1/lam) / log(10/9)), evaluated by hand
        assert ex.layer_width_rule(lam) == L

    def test_strain_error_uses_strains(self):
        a = Displacement([0.1, 0.0])
        b = Displacement([0.0, 0.1])
        # the displacements end at the same point, the strains differ
        assert a.displacements()[-1] == b.displacements()[-1]
        assert ex.strain_error(a, b) == pytest.approx(math.sqrt(0.02))

    def test_strain_error_pads(self):
        assert ex.strain_error(np.array([3.0]), np.array([0.0, 4.0])) == 5.0

    def test_loglog_slope(self):
        x = np.array([1.0, 2.0, 4.0])
        assert ex.loglog_slope(x, 3 * x**1.5) == pytest.approx(1.5)


class TestGroundStateRun:
    def test_cb_error_positive(self, ground_state_run):
        assert ground_state_run["error_cb"] > 0
        assert ground_state_run["error_cb"] == pytest.approx(np.linalg.norm(ground_state_run["u_gr"].strains))

    def test_errors_decrease(self, ground_state_run):
        errs = [r["error"] for r in ground_state_run["rows"]]
        assert all(b < a for a, b in zip(errs, errs[1:]))

    def test_ratio_matches_mu_q(self, ground_state_run, converge_run):
        rows = [r for r in ground_state_run["rows"] if r["L"] <= 12]
        L = np.array([r["L"] for r in rows], dtype=float)
        ratio = math.exp(np.polyfit(L, np.log([r["error"] for r in rows]), 1)[0])
        assert ratio == pytest.approx(converge_run["mu_q_fit"].mu, rel=0.1)


class TestFixedForceRun:
    def test_plateau(self, fixed_force_run):
        err = {r["L"]: r["error_pc"] for r in fixed_force_run["rows"]}
        assert err[20] > 0
        assert abs(err[20] - err[10]) / err[10] < 0.05

    def test_zero_layer_is_cb(self, fixed_force_run):
        err = {r["L"]: r["error_pc"] for r in fixed_force_run["rows"]}
        assert err[0] == fixed_force_run["error_cb"]

    def test_plateau_against_budget(self, fixed_force_run):
        plateau = fixed_force_run["rows"][-1]["error_pc"]
        bound = fixed_force_run["budget"].force_only
        # same order of magnitude up to a modest constant
        assert 1e-4 * bound < plateau < 10 * bound


class TestLongWavelengthRun:
    def test_rows(self, long_wavelength_run):
        rows = long_wavelength_run["rows"]
        assert [r["L"] for r in rows] == [ex.layer_width_rule(r["lambda"]) for r in rows]
        assert all(np.isfinite(r["error_pc"]) for r in rows)

    def test_error_below_rate_envelope(self, long_wavelength_run):
        rows = long_wavelength_run["rows"]
        C = max(r["error_pc"] / (r["lambda"] + r["lambda"] ** 1.5) for r in rows)
        smallest = min(r["error_pc"] / (r["lambda"] + r["lambda"] ** 1.5) for r in rows)
        # the constant in err <= C (lam + lam^1.5) stays bounded along the sweep;
        # over six octaves a pre-asymptotic slope of 0.9 alone allows a factor 2^0.6
        assert C / smallest < 3.0

    def test_unit_scale_smoke(self, pot):
        res = ex.run_long_wavelength([1.0], 200, pot)
        assert np.isfinite(res["rows"][0]["error_pc"])
        assert math.isnan(res["slope"])


class TestPotentialCheck:
    def test_copper_passes(self, pot):
        rep = ex.run_potential_check(pot)
        assert rep.passed, rep.failures
        names = [r["name"] for r in rep.results]
        assert "dW(0) = 0 (bulk equilibrium)" in names

    def test_broken_psi_fails_by_name(self):
        rep = ex.run_potential_check(BrokenPsi())
        assert not rep.passed
        assert "psi' vs FD" in rep.failures
        # the pair and density functions are untouched
        assert "phi' vs FD" not in rep.failures
        assert "rho'' vs FD" not in rep.failures

    def test_lines(self, pot):
        lines = list(ex.run_potential_check(pot).lines())
        assert all(line.startswith("PASS") for line in lines)
