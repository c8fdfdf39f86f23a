import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from surfpc import atomistic
from surfpc.atomistic import Displacement, Tridiagonal, decay_lambda, decay_roots, fit_decay
from surfpc.errors import FitError, StabilityError
from surfpc.forces import build_force
from fdcheck import assert_gradient, assert_hessian

small_strains = arrays(np.float64, st.integers(1, 25), elements=st.floats(-0.05, 0.05, allow_nan=False))


class TestDisplacement:
    def test_prefix_sum(self):
        d = Displacement([0.1, -0.2, 0.05])
        np.testing.assert_allclose(d.displacements(), [0.0, 0.1, -0.1, -0.05])
        np.testing.assert_allclose(d.positions(), [0.0, 1.1, 1.9, 2.95])

    @given(s=small_strains)
    def test_roundtrip(self, s):
        d = Displacement(s)
        back = Displacement.from_displacements(d.displacements())
        np.testing.assert_allclose(back.strains, s, atol=1e-15)
        assert atomistic.energy(back) == pytest.approx(atomistic.energy(d), abs=1e-12)

    def test_gauge(self):
        with pytest.raises(ValueError):
            Displacement.from_displacements([1.0, 2.0])

    def test_non_finite(self):
        with pytest.raises(ValueError):
            Displacement([0.0, math.inf])

    def test_csv(self, tmp_path):
        d = Displacement([0.1, -0.2])
        path = tmp_path / "u.csv"
        d.to_csv(path)
        rows = list(csv.DictReader(open(path)))
        assert [r["site"] for r in rows] == ["0", "1", "2"]
        u = np.array([float(r["u"]) for r in rows])
        assert Displacement.from_displacements(u).strains.tolist() == d.strains.tolist()


class TestTridiagonal:
    def test_matvec_and_dense(self, rng):
        T = Tridiagonal(rng.normal(size=6), rng.normal(size=5))
        v = rng.normal(size=6)
        np.testing.assert_allclose(T.matvec(v), T.to_dense() @ v, rtol=1e-14)
        np.testing.assert_array_equal(T.to_dense(), T.to_dense().T)

    def test_smallest_eigenvalue(self, rng):
        T = Tridiagonal(rng.normal(size=30) + 3.0, rng.normal(size=29))
        assert T.smallest_eigenvalue() == pytest.approx(np.linalg.eigvalsh(T.to_dense())[0], rel=1e-12)


class TestEnergy:
    def test_zero_state_renormalized(self, pot):
        expected = pot.site_surf(0.0).value - pot.site_bulk(0.0, 0.0).value
        assert atomistic.energy(np.zeros(50), pot, renormalize=True) == pytest.approx(expected, rel=1e-13)

    @pytest.mark.parametrize("t", [-0.1, 0.02, 0.2])
    def test_single_strain(self, pot, t):
        N = 40
        s = np.zeros(N)
        s[0] = t
        expected = pot.site_surf(t).value + pot.site_bulk(t, 0.0).value + (N - 1) * pot.site_bulk(0, 0).value
        assert atomistic.energy(s, pot) == pytest.approx(expected, rel=1e-13)

    def test_descent_direction(self, pot):
        x = np.zeros(30)
        r = atomistic.residual(x, None, pot)
        e0 = atomistic.energy(x, pot)
        assert atomistic.energy(x - 1e-4 * r, pot) < e0


class TestResidual:
    def test_surface_only_at_reference(self, pot):
        r = atomistic.residual(np.zeros(100), None, pot)
        assert r[0] == pytest.approx(pot.site_surf(0.0).grad, abs=1e-12)
        assert np.all(np.abs(r[1:]) <= 1e-12)
        assert np.linalg.norm(r) == pytest.approx(abs(pot.site_surf(0.0).grad), abs=1e-12)

    def test_force_enters_through_tail_sums(self, pot):
        f = build_force([0.0, 0.3, -0.1, 0.2])
        x = np.full(6, 0.01)
        np.testing.assert_allclose(atomistic.residual(x, f, pot),
                                   atomistic.residual(x, None, pot) - f.tail_sums(6), atol=1e-14)

    @settings(max_examples=20, deadline=None)
    @given(s=small_strains)
    def test_fd_energy(self, s):
        assert_gradient(atomistic.objective(), s)

    def test_fd_energy_with_force(self, rng):
        f = build_force(rng.normal(size=8))
        x = rng.uniform(-0.05, 0.05, 12)
        assert_gradient(atomistic.objective(f), x)


class TestHessian:
    def test_reference_coefficients(self, pot):
        a, b, a_s = pot.linearised_coefficients()
        _, _, _, d11, d12, d22 = pot.bulk_terms(0.0, 0.0)
        H = atomistic.hessian(np.zeros(10), pot)
        assert H.diag[0] == pytest.approx(pot.site_surf(0.0).hess + d11, rel=1e-14)
        assert H.diag[0] == pytest.approx(a_s, rel=1e-14)
        np.testing.assert_allclose(H.diag[1:], a, rtol=1e-14)
        np.testing.assert_allclose(H.off, b, rtol=1e-14)
        assert b == pytest.approx(d12) and a == pytest.approx(d11 + d22)

    @settings(max_examples=20, deadline=None)
    @given(s=small_strains)
    def test_fd_residual(self, s):
        fun = atomistic.objective()
        assert_hessian(lambda y: fun(y)[1], atomistic.hessian(s).matvec, s)


class TestDecay:
    def test_product_of_roots(self, pot):
        lp, lm = decay_roots(pot)
        assert lp * lm == pytest.approx(1.0, rel=1e-12)
        assert abs(decay_lambda(pot)) < 1

    def test_sign_opposite_to_coupling(self, pot):
        a, b, _ = pot.linearised_coefficients()
        assert a > 0
        assert np.sign(decay_lambda(pot)) == -np.sign(b)

    def test_decoupled_toy(self):
        class Decoupled:
            # V = r^2/2 + s^2/2: a = 2, b = 0
            def linearised_coefficients(self):
                return 2.0, 0.0, 1.0

        assert decay_lambda(Decoupled()) == 0.0

    def test_unstable_toy(self):
        class Unstable:
            def linearised_coefficients(self):
                return 1.0, 1.0, 1.0

        with pytest.raises(StabilityError):
            decay_lambda(Unstable())

    @pytest.mark.parametrize("ratio", [0.5, -0.3, 0.9])
    def test_fit_geometric(self, ratio):
        fit = fit_decay(ratio ** np.arange(40))
        assert fit.mu == pytest.approx(abs(ratio), abs=1e-10)
        assert fit.fit_range == (2, 20)

    def test_fit_too_few_points(self):
        s = np.zeros(40)
        s[:5] = 1.0
        with pytest.raises(FitError):
            fit_decay(s)

    def test_fit_growth_rejected(self):
        with pytest.raises(FitError):
            fit_decay(1.1 ** np.arange(40))


class TestGroundState:
    def test_matches_linear_prediction(self, ground_state_run):
        lam = ground_state_run["lambda_plus"]
        assert ground_state_run["mu_a_fit"].mu == pytest.approx(abs(lam), rel=0.05)

    def test_bounded_by_fitted_envelope(self, ground_state_run):
        s = np.abs(ground_state_run["u_gr"].strains[:31])
        lam = abs(ground_state_run["lambda_plus"])
        C = np.max(s / lam ** np.arange(31))
        assert np.all(s <= C * lam ** np.arange(31) * (1 + 1e-12))
        # the envelope constant is set by the boundary, not by a blow-up deep inside
        assert np.argmax(s / lam ** np.arange(31)) < 10

    def test_alternating(self, ground_state_run):
        assert ground_state_run["alternating"]

    def test_stable(self, ground_state_run):
        assert ground_state_run["atomistic_report"].hessian_min_eig > 0

    def test_dense_eigenvalue_n200(self, pot):
        u, rep = atomistic.ground_state(200, pot)
        dense = np.linalg.eigvalsh(atomistic.hessian(u.strains, pot).to_dense())[0]
        assert dense > 0
        assert rep.hessian_min_eig == pytest.approx(dense, rel=1e-10)
