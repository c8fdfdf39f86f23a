"""Finite-difference assertions shared by the property tests.

Central differences with h = 1e-6 of energies of size O(1..100) carry about
1e-9..1e-8 of rounding noise, so components near zero are compared in
absolute terms.
"""

import numpy as np

from surfpc.optimize import fd_gradient

ABS_NOISE = 1e-7


def assert_gradient(objective, x, rtol=1e-6, h=1e-6):
    x = np.asarray(x, dtype=float)
    analytic = objective(x)[1]
    numeric = fd_gradient(objective, x, h)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    bad = np.abs(analytic - numeric) > rtol * scale + ABS_NOISE
    assert not bad.any(), f"gradient mismatch at {np.flatnonzero(bad)}: {analytic[bad]} vs {numeric[bad]}"


def assert_hessian(gradient, matvec, x, rtol=1e-5, h=1e-6):
    x = np.asarray(x, dtype=float)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = 1.0
        numeric = (gradient(x + h * e) - gradient(x - h * e)) / (2 * h)
        analytic = matvec(e)
        scale = np.maximum(np.abs(analytic), np.abs(numeric))
        assert np.all(np.abs(analytic - numeric) <= rtol * scale + ABS_NOISE), f"column {i}"
