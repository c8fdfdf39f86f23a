"""External forces on the chain and their dual (stress-like) fields.

A lattice force ``f`` acts on a displacement through
``<f, u> = sum_l f_l u_l = sum_l g_l u'_l`` where ``g_l = sum_{k>l} f_k``.
The Cauchy-Born model instead sees the continuous piecewise affine
interpolant of ``f``; its tail integral ``gtilde(x) = int_x^inf f`` is
evaluated exactly (the interpolant is linear on each unit cell, so the
antiderivative is piecewise quadratic).

Forces are compactly supported: ``samples`` holds ``f_0 .. f_M`` and all later
values are zero.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError

__all__ = [
    "ExternalForce",
    "build_force",
    "rescale",
    "test2_profile",
    "TEST2_SUPPORT",
    "read_force_csv",
    "write_force_csv",
    "lattice_profile",
]

TEST2_SUPPORT = 4.0


@dataclass(frozen=True, eq=False)
class ExternalForce:
    samples: np.ndarray
    g: np.ndarray = field(init=False, repr=False)
    _trapezoid_tail: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        f = np.array(self.samples, dtype=float).ravel()
        if f.size == 0:
            f = np.zeros(1)
        if not np.all(np.isfinite(f)):
            raise DomainError("force samples must be finite")
        f.setflags(write=False)
        object.__setattr__(self, "samples", f)

        # g_l = sum_{k>l} f_k, accumulated from the far end
        g = np.zeros_like(f)
        g[:-1] = np.cumsum(f[::-1])[::-1][1:]
        g.setflags(write=False)
        object.__setattr__(self, "g", g)

        # T_m = int_m^inf f for the interpolant, m = 0..M+1 (f_{M+1} = 0)
        fe = np.append(f, 0.0)
        cell = 0.5 * (fe[:-1] + fe[1:])
        tail = np.zeros(f.size + 1)
        tail[:-1] = np.cumsum(cell[::-1])[::-1]
        object.__setattr__(self, "_trapezoid_tail", tail)

    @property
    def support_end(self) -> int:
        """Index ``M`` of the last stored sample."""
        return self.samples.size - 1

    def sample(self, n: int) -> np.ndarray:
        """``f_0 .. f_{n-1}``, zero padded or truncated."""
        out = np.zeros(n)
        m = min(n, self.samples.size)
        out[:m] = self.samples[:m]
        return out

    def tail_sums(self, n: int) -> np.ndarray:
        """``g_0 .. g_{n-1}`` (zero padded)."""
        out = np.zeros(n)
        m = min(n, self.g.size)
        out[:m] = self.g[:m]
        return out

    def gtilde(self, x):
        """``int_x^inf f(s) ds`` for the piecewise affine interpolant."""
        x = np.asarray(x, dtype=float)
        if np.any(~(x >= 0)):
            raise DomainError("gtilde is defined for x >= 0 only")
        f = self.samples
        M = f.size - 1
        cell = np.minimum(np.floor(x), M + 1).astype(int)
        inside = cell <= M
        m = np.where(inside, cell, 0)
        t = np.where(inside, x - m, 0.0)
        fm = f[m]
        fnext = np.where(m + 1 <= M, f[np.minimum(m + 1, M)], 0.0)
        partial = fm * (1.0 - t) + 0.5 * (fnext - fm) * (1.0 - t * t)
        val = np.where(inside, partial + self._trapezoid_tail[np.minimum(m + 1, M + 1)], 0.0)
        return val if val.ndim else float(val)

    def midpoint_gtilde(self, n: int) -> np.ndarray:
        """``gtilde(l + 1/2)`` for bonds ``l = 0 .. n-1``."""
        return np.asarray(self.gtilde(np.arange(n) + 0.5), dtype=float)

    def dual_norm(self) -> float:
        """``||f||_{U*} = ||g||_{l2}``."""
        return float(np.linalg.norm(self.g))

    def action(self, displacement) -> float:
        """``<f, u> = sum_l f_l u_l`` for a displacement vector ``u_0, u_1, ...``."""
        u = np.asarray(displacement, dtype=float)
        return float(np.dot(self.sample(u.size), u))

    def __mul__(self, c):
        return ExternalForce(float(c) * self.samples)

    __rmul__ = __mul__


def build_force(samples) -> ExternalForce:
    return ExternalForce(np.asarray(list(samples), dtype=float))


def test2_profile(x):
    """``cos(3 pi x / 8)`` on ``[0, 4)``, zero elsewhere."""
    x = np.asarray(x, dtype=float)
    return np.where((x >= 0) & (x < TEST2_SUPPORT), np.cos(3.0 * np.pi * x / 8.0), 0.0)


# pytest would otherwise try to collect this as a test
test2_profile.__test__ = False


def rescale(fhat, lam: float, support: float = TEST2_SUPPORT) -> ExternalForce:
    """Long-wavelength force ``f_l = lam * fhat(lam * l)``.

    ``fhat`` must vanish outside ``[0, support)``; samples are taken for
    ``l = 0 .. ceil(support / lam)``.
    """
    if not (math.isfinite(lam) and lam > 0):
        raise DomainError(f"scaling factor must be positive, got {lam!r}")
    M = math.ceil(support / lam)
    ell = np.arange(M + 1, dtype=float)
    return ExternalForce(lam * np.asarray(fhat(lam * ell), dtype=float))


def read_force_csv(path) -> ExternalForce:
    """Two-column ``index,value`` CSV; a header row and missing indices are allowed."""
    entries = {}
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            if len(row) != 2:
                raise DomainError(f"{path}: expected two columns, got {row!r}")
            try:
                idx, val = int(row[0]), float(row[1])
            except ValueError:
                if not entries:
                    continue  # header
                raise DomainError(f"{path}: bad row {row!r}") from None
            if idx < 0:
                raise DomainError(f"{path}: negative site index {idx}")
            entries[idx] = val
    if not entries:
        return ExternalForce(np.zeros(1))
    f = np.zeros(max(entries) + 1)
    for idx, val in entries.items():
        f[idx] = val
    return ExternalForce(f)


def write_force_csv(force: ExternalForce, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "value"])
        for i, v in enumerate(force.samples):
            w.writerow([i, repr(float(v))])


def lattice_profile(force: ExternalForce):
    """Piecewise linear profile through ``(l, f_l)`` and its support, for use with :func:`rescale`."""
    f = np.append(force.samples, 0.0)
    nodes = np.arange(f.size, dtype=float)

    def fhat(x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, np.interp(x, nodes, f, right=0.0), 0.0)

    return fhat, float(f.size - 1)
