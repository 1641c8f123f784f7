"""Closed-form building blocks for asymptotic states and initial data.

Each primitive knows its one-sided values, derivative and integral, so sampled
data carry exact jumps at box edges and exact derivatives for ``psi0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .grid import AsymptoticState, EnergyState, GridFunction, num_nodes

KINDS = ("constant", "box", "hat", "gaussian")


@dataclass(frozen=True)
class Primitive:
    kind: str
    amplitude: np.ndarray
    center: float = 0.0
    width: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown primitive kind {self.kind!r}; expected one of {KINDS}")
        if self.kind != "constant" and not self.width > 0:
            raise ConfigError("primitive width must be positive")
        object.__setattr__(self, "amplitude", np.atleast_1d(np.asarray(self.amplitude, dtype=float)))

    @classmethod
    def from_dict(cls, d: dict, n: int) -> "Primitive":
        try:
            amp = np.broadcast_to(np.asarray(d["amplitude"], dtype=float), (n,)).copy()
            return cls(d["kind"], amp, float(d.get("center", 0.0)), float(d.get("width", 1.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad primitive {d!r}: {exc}") from exc

    def _profile(self, x, side: str):
        c, w = self.center, self.width
        if self.kind == "constant":
            return np.ones_like(x)
        if self.kind == "box":
            if side == "right":
                return ((x >= c - w) & (x < c + w)).astype(float)
            return ((x > c - w) & (x <= c + w)).astype(float)
        if self.kind == "hat":
            return np.maximum(0.0, 1.0 - np.abs(x - c) / w)
        return np.exp(-(((x - c) / w) ** 2))

    def _dprofile(self, x, side: str):
        c, w = self.center, self.width
        if self.kind == "constant":
            return np.zeros_like(x)
        if self.kind == "box":
            raise ConfigError("a box displacement has infinite energy; use hat or gaussian")
        if self.kind == "hat":
            if side == "right":
                up = (x >= c - w) & (x < c)
                down = (x >= c) & (x < c + w)
            else:
                up = (x > c - w) & (x <= c)
                down = (x > c) & (x <= c + w)
            return (up.astype(float) - down.astype(float)) / w
        return -2.0 * (x - c) / w**2 * np.exp(-(((x - c) / w) ** 2))

    def values(self, x, side: str = "right") -> np.ndarray:
        return self._profile(np.asarray(x, dtype=float), side)[:, None] * self.amplitude

    def derivative(self, x, side: str = "right") -> np.ndarray:
        return self._dprofile(np.asarray(x, dtype=float), side)[:, None] * self.amplitude

    def integral(self) -> np.ndarray:
        if self.kind == "constant":
            return np.full_like(self.amplitude, np.inf)
        factor = {"box": 2.0 * self.width, "hat": self.width, "gaussian": self.width * np.sqrt(np.pi)}
        return factor[self.kind] * self.amplitude

    def limit(self) -> np.ndarray:
        return self.amplitude if self.kind == "constant" else np.zeros_like(self.amplitude)

    def support_radius(self) -> float:
        if self.kind == "constant":
            return 0.0
        reach = 6.0 * self.width if self.kind == "gaussian" else self.width
        return abs(self.center) + reach


def sample(prims, t0: float, t_end: float, h: float, n: int, derivative: bool = False) -> GridFunction:
    """Sum of primitives on the grid, with one-sided limits at jumps."""
    size = num_nodes(t0, t_end, h)
    x = t0 + h * np.arange(size)
    right = np.zeros((size, n))
    left = np.zeros((size, n))
    for p in prims:
        if derivative:
            right += p.derivative(x, "right")
            left += p.derivative(x, "left")
        else:
            right += p.values(x, "right")
            left += p.values(x, "left")
    return GridFunction(t0, h, right, left)


def parse(items, n: int) -> list[Primitive]:
    return [Primitive.from_dict(d, n) for d in (items or [])]


def support_radius(*groups) -> float:
    return max([0.0] + [p.support_radius() for g in groups for p in g])


def asymptotic_state(psi0_prims, psi1_prims, half_width: float, h: float, n: int) -> AsymptoticState:
    psi0 = sample(psi0_prims, -half_width, half_width, h, n)
    dpsi0 = sample(psi0_prims, -half_width, half_width, h, n, derivative=True)
    psi1 = sample(psi1_prims, -half_width, half_width, h, n)
    limit = sum((p.limit() for p in psi0_prims), np.zeros(n))
    return AsymptoticState.create(psi0, psi1, limit, limit, dpsi0)


def energy_state(u0_prims, v0_prims, half_width: float, h: float, n: int) -> EnergyState:
    u0 = sample(u0_prims, -half_width, half_width, h, n)
    du0 = sample(u0_prims, -half_width, half_width, h, n, derivative=True)
    v0 = sample(v0_prims, -half_width, half_width, h, n)
    limit = sum((p.limit() for p in u0_prims), np.zeros(n))
    return EnergyState(u0, v0, limit, limit, v0.integral(), du0)
