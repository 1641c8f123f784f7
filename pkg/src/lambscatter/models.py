"""Oscillator force models ``F: R^n -> R^n`` with Jacobians, potentials and zero sets."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError

NAMES = ("linear", "cubic-1d", "double-well-2d", "flat-core", "quadratic-core", "polynomial")


@dataclass(frozen=True, eq=False)
class ForceModel:
    """Force field evaluated on arrays of shape ``(..., n)``."""

    name: str
    params: tuple
    n: int
    zeros: tuple
    has_potential: bool
    _force: Callable = field(repr=False)
    _jacobian: Callable = field(repr=False)
    _potential: Callable | None = field(default=None, repr=False)

    def force(self, y) -> np.ndarray:
        return self._force(np.asarray(y, dtype=float))

    __call__ = force

    def jacobian(self, y) -> np.ndarray:
        return self._jacobian(np.asarray(y, dtype=float))

    def potential(self, y) -> np.ndarray:
        if self._potential is None:
            raise ValueError(f"model {self.name} has no potential")
        return self._potential(np.asarray(y, dtype=float))

    def nearest_zero(self, y) -> tuple[np.ndarray, float]:
        y = np.asarray(y, dtype=float)
        dists = [float(np.linalg.norm(y - z)) for z in self.zeros]
        i = int(np.argmin(dists))
        return self.zeros[i], dists[i]

    def validity_radius(self, s) -> float:
        """Half the distance from ``s`` to the nearest other zero (1.0 if isolated)."""
        s = np.asarray(s, dtype=float)
        others = [float(np.linalg.norm(z - s)) for z in self.zeros]
        others = [d for d in others if d > 1e-8]
        return 0.5 * min(others) if others else 1.0


def _linear(params, n):
    if params:
        m = int(round(np.sqrt(len(params))))
        if m * m != len(params):
            raise ConfigError("linear model needs a square matrix (row-major list)")
        M = np.asarray(params, dtype=float).reshape(m, m)
    else:
        M = -np.eye(n or 1)
    n = M.shape[0]
    sym = np.allclose(M, M.T) and bool(np.all(np.linalg.eigvalsh(0.5 * (M + M.T)) < 0))

    def pot(y):
        return -0.5 * np.einsum("...i,ij,...j->...", y, M, y)

    return ForceModel(
        "linear", tuple(M.ravel()), n, (np.zeros(n),), sym,
        lambda y: y @ M.T,
        lambda y: np.broadcast_to(M, y.shape[:-1] + (n, n)).copy(),
        pot if sym else None,
    )


def _cubic(params, n):
    a, b = (list(params) + [1.0, 1.0][len(params):])[:2] if params else (1.0, 1.0)
    zeros = [np.zeros(1)]
    if a != 0 and -b / a > 0:
        r = np.sqrt(-b / a)
        zeros += [np.array([r]), np.array([-r])]
    return ForceModel(
        "cubic-1d", (a, b), 1, tuple(zeros), a > 0,
        lambda y: -a * y**3 - b * y,
        lambda y: (-3 * a * y**2 - b)[..., None],
        lambda y: (a * y**4 / 4 + b * y**2 / 2)[..., 0],
    )


def _double_well(params, n):
    def force(y):
        out = np.empty_like(y)
        out[..., 0] = y[..., 0] - y[..., 0] ** 3
        out[..., 1] = -y[..., 1]
        return out

    def jac(y):
        J = np.zeros(y.shape[:-1] + (2, 2))
        J[..., 0, 0] = 1 - 3 * y[..., 0] ** 2
        J[..., 1, 1] = -1.0
        return J

    def pot(y):
        return y[..., 0] ** 4 / 4 - y[..., 0] ** 2 / 2 + y[..., 1] ** 2 / 2

    zeros = (np.array([0.0, 0.0]), np.array([1.0, 0.0]), np.array([-1.0, 0.0]))
    return ForceModel("double-well-2d", (), 2, zeros, True, force, jac, pot)


def _flat_core(params, n):
    # zero force on |y| <= 1, linear restoring force outside
    def force(y):
        return np.where(np.abs(y) <= 1, 0.0, -(y - np.sign(y)))

    def jac(y):
        return np.where(np.abs(y) <= 1, 0.0, -1.0)[..., None]

    def pot(y):
        return (0.5 * np.maximum(np.abs(y) - 1, 0.0) ** 2)[..., 0]

    return ForceModel("flat-core", (), 1, (np.zeros(1),), True, force, jac, pot)


def _quadratic_core(params, n):
    # y**2 on |y| <= 1, continued by 1 - (y - sign(y)) outside
    def force(y):
        return np.where(np.abs(y) <= 1, y**2, 1.0 - (y - np.sign(y)))

    def jac(y):
        return np.where(np.abs(y) <= 1, 2 * y, -1.0)[..., None]

    def pot(y):
        inner = -(y**3) / 3
        right = -1.0 / 3 - (y - 1) + 0.5 * (y - 1) ** 2
        left = 1.0 / 3 - (y + 1) + 0.5 * (y + 1) ** 2
        return np.where(y > 1, right, np.where(y < -1, left, inner))[..., 0]

    return ForceModel("quadratic-core", (), 1, (np.zeros(1),), True, force, jac, pot)


def _polynomial(params, n):
    c = np.asarray(params if params else [0.0, -1.0], dtype=float)
    dc = np.polynomial.polynomial.polyder(c)
    vc = -np.polynomial.polynomial.polyint(c)
    roots = np.polynomial.polynomial.polyroots(c) if len(c) > 1 else np.array([])
    zeros = sorted({float(np.round(r.real, 12)) for r in np.atleast_1d(roots) if abs(r.imag) < 1e-10})
    deg = len(np.trim_zeros(c, "b")) - 1
    coercive = deg >= 1 and deg % 2 == 1 and c[deg] < 0
    pv = np.polynomial.polynomial.polyval
    return ForceModel(
        "polynomial", tuple(c), 1, tuple(np.array([z]) for z in zeros), coercive,
        lambda y: pv(y, c),
        lambda y: pv(y, dc)[..., None],
        lambda y: pv(y, vc)[..., 0],
    )


_BUILDERS = {
    "linear": _linear,
    "cubic-1d": _cubic,
    "double-well-2d": _double_well,
    "flat-core": _flat_core,
    "quadratic-core": _quadratic_core,
    "polynomial": _polynomial,
}


def make_model(name: str, params=None, n: int | None = None) -> ForceModel:
    """Build a named force model; ``params`` meaning depends on the model.

    ``linear``: row-major matrix ``M`` with ``F(y) = M y`` (default ``-I``).
    ``cubic-1d``: ``(a, b)`` with ``F(y) = -a y^3 - b y``.
    ``polynomial``: ascending coefficients of ``F`` (one dimension).
    """
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise ConfigError(f"unknown model {name!r}; expected one of {NAMES}") from None
    model = builder(list(params or []), n)
    if n is not None and model.n != n:
        raise ConfigError(f"model {name} has dimension {model.n}, config says {n}")
    return model
