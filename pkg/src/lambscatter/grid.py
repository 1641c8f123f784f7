"""Uniformly sampled functions of one variable and the phase-space objects built on them.

A :class:`GridFunction` is cell-wise linear.  Jump discontinuities are allowed at
grid nodes: ``samples`` holds the right limit at every node and the optional
``left`` array the left limit.  Quadrature (trapezoid per cell) uses the
one-sided values, so piecewise-linear data with jumps on nodes integrate exactly.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import GridError, WindowError

_ALIGN_TOL = 1e-6  # fraction of a step


def _as_samples(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise GridError(f"samples must be 1-D or 2-D, got shape {arr.shape}")
    return arr


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GridFunction:
    """R^n-valued function sampled on ``t0 + h * k``, ``k = 0..size-1``."""

    t0: float
    h: float
    samples: np.ndarray
    left: np.ndarray | None = None

    def __post_init__(self):
        samples = _as_samples(self.samples)
        if not (self.h > 0 and math.isfinite(self.h)):
            raise GridError(f"grid step must be positive, got {self.h}")
        if samples.shape[0] < 1 or samples.shape[1] < 1:
            raise GridError("empty grid function")
        if not np.all(np.isfinite(samples)):
            raise GridError("non-finite samples")
        left = None
        if self.left is not None:
            left = _as_samples(self.left)
            if left.shape != samples.shape:
                raise GridError("left limits must match samples in shape")
            if not np.all(np.isfinite(left)):
                raise GridError("non-finite left limits")
            if np.array_equal(left, samples):
                left = None
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "samples", _freeze(samples))
        object.__setattr__(self, "left", None if left is None else _freeze(left))

    # -- construction -------------------------------------------------
    @classmethod
    def from_function(cls, fn, t0: float, t_end: float, h: float) -> "GridFunction":
        """Sample a vectorised callable ``fn(t) -> (N,) or (N, n)`` on ``[t0, t_end]``."""
        size = num_nodes(t0, t_end, h)
        t = t0 + h * np.arange(size)
        return cls(t0, h, fn(t))

    @classmethod
    def zeros(cls, t0: float, h: float, size: int, n: int = 1) -> "GridFunction":
        return cls(t0, h, np.zeros((size, n)))

    def like(self, samples, left=None) -> "GridFunction":
        return GridFunction(self.t0, self.h, samples, left)

    # -- basic geometry ------------------------------------------------
    @property
    def n(self) -> int:
        return self.samples.shape[1]

    @property
    def size(self) -> int:
        return self.samples.shape[0]

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(self.size)

    @property
    def t_end(self) -> float:
        return self.t0 + self.h * (self.size - 1)

    @property
    def lower(self) -> np.ndarray:
        """Left limits at every node (equal to ``samples`` where continuous)."""
        return self.samples if self.left is None else self.left

    @property
    def is_continuous(self) -> bool:
        return self.left is None

    def jump_nodes(self) -> np.ndarray:
        if self.left is None:
            return np.zeros(0, dtype=int)
        return np.nonzero(np.any(self.left != self.samples, axis=1))[0]

    def node_values(self) -> np.ndarray:
        """Average of the one-sided limits; the plain sample where continuous."""
        if self.left is None:
            return self.samples
        return 0.5 * (self.samples + self.left)

    def same_grid(self, other: "GridFunction") -> bool:
        return (
            self.size == other.size
            and self.n == other.n
            and abs(self.h - other.h) <= 1e-12 * self.h
            and abs(self.t0 - other.t0) <= _ALIGN_TOL * self.h
        )

    def check_grid(self, other: "GridFunction") -> None:
        if not self.same_grid(other):
            raise GridError(
                f"grid mismatch: ({self.t0}, {self.h}, {self.size}, n={self.n}) vs "
                f"({other.t0}, {other.h}, {other.size}, n={other.n})"
            )

    def index(self, t: float) -> int:
        """Index of the node at time ``t``; raises unless ``t`` is a node."""
        k = (t - self.t0) / self.h
        i = int(round(k))
        if abs(k - i) > _ALIGN_TOL:
            raise GridError(f"t={t} is not a grid node")
        if not 0 <= i < self.size:
            raise WindowError(f"t={t} outside [{self.t0}, {self.t_end}]")
        return i

    def __call__(self, t: float) -> np.ndarray:
        """Node value (right limit) at a grid node."""
        return self.samples[self.index(t)]

    # -- arithmetic ------------------------------------------------------
    def _binary(self, other, op) -> "GridFunction":
        if isinstance(other, GridFunction):
            self.check_grid(other)
            samples = op(self.samples, other.samples)
            left = None
            if self.left is not None or other.left is not None:
                left = op(self.lower, other.lower)
            return self.like(samples, left)
        other = np.asarray(other, dtype=float)
        left = None if self.left is None else op(self.left, other)
        return self.like(op(self.samples, other), left)

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binary(other, np.divide)

    def __neg__(self):
        return self.like(-self.samples, None if self.left is None else -self.left)

    def map(self, fn) -> "GridFunction":
        """Apply ``fn`` row-wise (vectorised over the sample axis) to both limits."""
        left = None if self.left is None else fn(self.left)
        return self.like(fn(self.samples), left)

    def component(self, i: int) -> "GridFunction":
        left = None if self.left is None else self.left[:, i : i + 1]
        return self.like(self.samples[:, i : i + 1], left)

    # -- quadrature and norms ------------------------------------------
    def _cell_ends(self):
        return self.samples[:-1], self.lower[1:]

    def integral(self) -> np.ndarray:
        a, b = self._cell_ends()
        return 0.5 * self.h * (a + b).sum(axis=0)

    def cumulative(self, initial=0.0) -> "GridFunction":
        """Continuous antiderivative ``initial + int_{t0}^t f``."""
        a, b = self._cell_ends()
        c = np.zeros_like(self.samples)
        c[1:] = np.cumsum(0.5 * self.h * (a + b), axis=0)
        return self.like(c + np.asarray(initial, dtype=float))

    def l2_norm(self) -> float:
        a, b = self._cell_ends()
        sq = 0.5 * self.h * (np.sum(a * a) + np.sum(b * b))
        return math.sqrt(sq)

    def sup_norm(self) -> float:
        m = np.max(np.linalg.norm(self.samples, axis=1))
        if self.left is not None:
            m = max(m, np.max(np.linalg.norm(self.left, axis=1)))
        return float(m)

    def y_norm(self) -> float:
        """Norm of the trajectory space: L2 plus sup."""
        return self.l2_norm() + self.sup_norm()

    def derivative(self) -> "GridFunction":
        """Central differences inside, second-order one-sided stencils at the ends."""
        if self.size < 3:
            raise GridError("need at least 3 nodes to differentiate")
        return self.like(np.gradient(self.samples, self.h, axis=0, edge_order=2))

    # -- re-gridding -------------------------------------------------------
    def reflect(self) -> "GridFunction":
        """``t -> f(-t)``; one-sided limits swap roles."""
        samples = self.lower[::-1].copy()
        left = None if self.left is None else self.samples[::-1].copy()
        return GridFunction(-self.t_end, self.h, samples, left)

    def window(self, a: float, b: float) -> "GridFunction":
        """Restriction to ``[a, b]``; limits from outside the window are dropped."""
        i, j = self.index(a), self.index(b)
        if self.left is None:
            return GridFunction(self.t0 + i * self.h, self.h, self.samples[i : j + 1])
        samples = self.samples[i : j + 1].copy()
        left = self.left[i : j + 1].copy()
        left[0] = samples[0]
        samples[-1] = left[-1]
        return GridFunction(self.t0 + i * self.h, self.h, samples, left)

    def extend(self, t0: float, size: int, below=0.0, above=0.0) -> "GridFunction":
        """Re-grid onto an aligned grid, filling outside the window with constants.

        The fill values meet the stored samples through a jump at the window edge,
        which is exact for zero extension of densities and for limit extension of
        functions that have reached their limits.
        """
        shift = (self.t0 - t0) / self.h
        off = int(round(shift))
        if abs(shift - off) > _ALIGN_TOL:
            raise GridError("extension grid is not aligned with the function grid")
        below = np.broadcast_to(np.asarray(below, dtype=float), (self.n,))
        above = np.broadcast_to(np.asarray(above, dtype=float), (self.n,))
        samples = np.empty((size, self.n))
        left = np.empty((size, self.n))
        lo, hi = off, off + self.size  # target index range of the stored window
        samples[: max(lo, 0)] = below
        left[: max(lo, 0)] = below
        samples[max(hi, 0) :] = above
        left[max(hi, 0) :] = above
        src_lo, src_hi = max(0, -lo), min(self.size, size - lo)
        if src_lo < src_hi:
            samples[lo + src_lo : lo + src_hi] = self.samples[src_lo:src_hi]
            left[lo + src_lo : lo + src_hi] = self.lower[src_lo:src_hi]
            if lo > 0:
                left[lo] = below
            if hi < size:
                samples[hi - 1] = above
        return GridFunction(t0, self.h, samples, left)

    def evaluate(self, x, below=0.0, above=0.0) -> np.ndarray:
        """Cell-wise linear interpolation at arbitrary points (right limits at nodes)."""
        x = np.asarray(x, dtype=float)
        pos = (x - self.t0) / self.h
        k = np.floor(pos + 1e-12).astype(int)
        inside = (k >= 0) & (k < self.size - 1)
        kk = np.clip(k, 0, self.size - 2) if self.size > 1 else np.zeros_like(k)
        theta = (pos - kk)[..., None]
        out = (1.0 - theta) * self.samples[kk] + theta * self.lower[np.minimum(kk + 1, self.size - 1)]
        at_end = np.isclose(pos, self.size - 1, atol=1e-12)
        out = np.where(at_end[..., None], self.samples[-1], out)
        below = np.broadcast_to(np.asarray(below, dtype=float), (self.n,))
        above = np.broadcast_to(np.asarray(above, dtype=float), (self.n,))
        out = np.where(((~inside) & (pos < 0))[..., None], below, out)
        out = np.where(((~inside) & (pos > self.size - 1 + 1e-12))[..., None], above, out)
        return out


def num_nodes(t0: float, t_end: float, h: float) -> int:
    """Number of nodes of the uniform grid ``t0, t0+h, ...`` reaching ``t_end``."""
    steps = (t_end - t0) / h
    m = int(math.floor(steps + _ALIGN_TOL))
    if m < 0:
        raise GridError("t_end precedes t0")
    return m + 1


def concat(first: GridFunction, second: GridFunction) -> GridFunction:
    """Join two functions sharing the node ``first.t_end == second.t0``.

    The joint node takes its left limit from ``first`` and its right limit from
    ``second``.
    """
    if abs(first.h - second.h) > 1e-12 * first.h or first.n != second.n:
        raise GridError("cannot join functions with different steps or dimensions")
    if abs(first.t_end - second.t0) > _ALIGN_TOL * first.h:
        raise GridError("pieces do not share a node")
    samples = np.vstack([first.samples[:-1], second.samples])
    left = np.vstack([first.lower, second.lower[1:]])
    return GridFunction(first.t0, first.h, samples, left)


# ---------------------------------------------------------------------------
# Phase-space objects
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EnergyState:
    """Finite-energy pair ``(u0, v0)`` on ``[-L, L]`` with its spatial limits."""

    u0: GridFunction
    v0: GridFunction
    u0_plus: np.ndarray
    u0_minus: np.ndarray
    v0_mean: np.ndarray
    du0: GridFunction | None = None

    def __post_init__(self):
        self.u0.check_grid(self.v0)
        if self.du0 is not None:
            self.u0.check_grid(self.du0)
        for name in ("u0_plus", "u0_minus", "v0_mean"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(self.u0.n))

    @classmethod
    def from_grids(cls, u0: GridFunction, v0: GridFunction, du0: GridFunction | None = None) -> "EnergyState":
        return cls(u0, v0, u0.samples[-1], u0.samples[0], v0.integral(), du0)

    @property
    def n(self) -> int:
        return self.u0.n

    @property
    def half_width(self) -> float:
        return min(-self.u0.t0, self.u0.t_end)

    def displacement_derivative(self) -> GridFunction:
        return self.du0 if self.du0 is not None else self.u0.derivative()

    def value_at_origin(self) -> np.ndarray:
        try:
            return self.u0(0.0)
        except GridError:
            return self.u0.evaluate(np.array([0.0]))[0]

    def tail_defect(self) -> float:
        return float(
            max(
                np.max(np.abs(self.u0.samples[-1] - self.u0_plus)),
                np.max(np.abs(self.u0.samples[0] - self.u0_minus)),
                np.max(np.abs(self.v0.integral() - self.v0_mean)),
            )
        )


def energy_norm(state: EnergyState) -> float:
    """Global energy norm ``||u0'||_L2 + |u0(0)| + ||v0||_L2``."""
    return (
        state.displacement_derivative().l2_norm()
        + float(np.linalg.norm(state.value_at_origin()))
        + state.v0.l2_norm()
    )


@dataclass(frozen=True, eq=False)
class AsymptoticState:
    """Asymptotic free-wave state ``(psi0, psi1)`` with its limits."""

    psi0: GridFunction
    psi1: GridFunction
    psi0_plus: np.ndarray
    psi0_minus: np.ndarray
    identity_residual: np.ndarray
    dpsi0: GridFunction | None = None

    @classmethod
    def create(
        cls,
        psi0: GridFunction,
        psi1: GridFunction,
        psi0_plus=None,
        psi0_minus=None,
        dpsi0: GridFunction | None = None,
    ) -> "AsymptoticState":
        psi0.check_grid(psi1)
        if dpsi0 is not None:
            psi0.check_grid(dpsi0)
        plus = psi0.samples[-1] if psi0_plus is None else np.asarray(psi0_plus, dtype=float).reshape(psi0.n)
        minus = psi0.samples[0] if psi0_minus is None else np.asarray(psi0_minus, dtype=float).reshape(psi0.n)
        residual = plus + minus + psi1.integral()
        return cls(psi0, psi1, np.array(plus), np.array(minus), residual, dpsi0)

    @classmethod
    def zero(cls, half_width: float, h: float, n: int = 1) -> "AsymptoticState":
        size = num_nodes(-half_width, half_width, h)
        z = GridFunction.zeros(-half_width, h, size, n)
        return cls.create(z, z, dpsi0=z)

    @property
    def n(self) -> int:
        return self.psi0.n

    @property
    def half_width(self) -> float:
        return min(-self.psi0.t0, self.psi0.t_end)

    def derivative(self) -> GridFunction:
        return self.dpsi0 if self.dpsi0 is not None else self.psi0.derivative()

    def as_energy_state(self) -> EnergyState:
        return EnergyState(
            self.psi0, self.psi1, self.psi0_plus, self.psi0_minus, self.psi1.integral(), self.dpsi0
        )


@dataclass(frozen=True)
class Verdict:
    member: bool
    residual: np.ndarray
    residual_norm: float
    energy_norm: float
    tolerance: float


def validate_asymptotic_state(psi: AsymptoticState, tol: float | None = None) -> Verdict:
    """Check the limit identity ``psi0(+inf) + psi0(-inf) + int psi1 = 0``.

    The default tolerance scales with the energy norm: ``1e-6 * (1 + ||psi||)``.
    """
    enorm = energy_norm(psi.as_energy_state())
    residual = psi.psi0_plus + psi.psi0_minus + psi.psi1.integral()
    rnorm = float(np.linalg.norm(residual))
    if tol is None:
        tol = 1e-6 * (1.0 + enorm)
    member = math.isfinite(enorm) and rnorm <= tol
    return Verdict(bool(member), residual, rnorm, enorm, float(tol))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled path ``y`` on ``[0, T_max]`` with its derivative."""

    y: GridFunction
    ydot: GridFunction
    l2_norm_ydot: float

    @classmethod
    def from_samples(cls, y: GridFunction, ydot: GridFunction) -> "Trajectory":
        y.check_grid(ydot)
        return cls(y, ydot, ydot.l2_norm())

    def derivative_consistency(self) -> float:
        """Sup distance between ``ydot`` and central differences of ``y``."""
        return float(np.max(np.abs(self.y.derivative().samples - self.ydot.node_values())))


@dataclass(frozen=True)
class StationaryState:
    s: np.ndarray

    @classmethod
    def checked(cls, s, force, tol: float = 1e-10) -> "StationaryState":
        from .errors import NotStationary

        s = np.atleast_1d(np.asarray(s, dtype=float))
        r = float(np.linalg.norm(force(s)))
        if r > tol:
            raise NotStationary(f"|F(s)| = {r:.3e} exceeds {tol:.1e}")
        return cls(s)


def build_S(psi: AsymptoticState, t_max: float) -> tuple[GridFunction, GridFunction]:
    """Free-wave trace at the origin and its time derivative on ``[0, t_max]``.

    ``S(t) = (psi0(t) + psi0(-t))/2 + 1/2 int_{-t}^{t} psi1``.
    """
    if t_max > psi.half_width + _ALIGN_TOL * psi.psi0.h:
        raise WindowError(f"t_max={t_max} exceeds the asymptotic-state window {psi.half_width}")
    h = psi.psi0.h
    end = h * (num_nodes(0.0, t_max, h) - 1)
    psi0, dpsi0, psi1 = psi.psi0, psi.derivative(), psi.psi1
    cum = psi1.cumulative()

    def sym(g: GridFunction, sign: float) -> GridFunction:
        return g.window(0.0, end) + sign * g.reflect().window(0.0, end)

    S = 0.5 * sym(psi0, 1.0) + 0.5 * sym(cum, -1.0)
    Sdot = 0.5 * sym(dpsi0, -1.0) + 0.5 * sym(psi1, 1.0)
    return S, Sdot


# ---------------------------------------------------------------------------
# CSV / JSON serialisation
# ---------------------------------------------------------------------------


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_table(path, names: Sequence[str], columns: Sequence[GridFunction], label: str = "t") -> None:
    """Write grid functions sharing one grid; a jump node becomes two rows (left, right)."""
    first = columns[0]
    for c in columns[1:]:
        first.check_grid(c)
    header = [label]
    for name, col in zip(names, columns):
        header += [name] if col.n == 1 else [f"{name}_{i + 1}" for i in range(col.n)]
    jumps = set()
    for col in columns:
        jumps.update(col.jump_nodes().tolist())
    t = first.t
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k in range(first.size):
            if k in jumps:
                w.writerow([_fmt(t[k])] + [_fmt(v) for c in columns for v in c.lower[k]])
            w.writerow([_fmt(t[k])] + [_fmt(v) for c in columns for v in c.samples[k]])


def write_grid_csv(path, g: GridFunction, label: str = "x") -> None:
    """Single component file with header ``x,f_1..f_n``."""
    write_table(path, ["f"] if g.n > 1 else ["f_1"], [g], label=label)


def read_grid_csv(path) -> GridFunction:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh)]
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    x = data[:, 0]
    values = data[:, 1:]
    # repeated abscissae encode (left, right) limits
    first_idx = [0]
    for i in range(1, len(x)):
        if x[i] != x[i - 1]:
            first_idx.append(i)
    last_idx = [i - 1 for i in first_idx[1:]] + [len(x) - 1]
    nodes = x[first_idx]
    if len(nodes) < 2:
        raise GridError("need at least two nodes")
    h = (nodes[-1] - nodes[0]) / (len(nodes) - 1)
    if np.max(np.abs(np.diff(nodes) - h)) > 1e-9 * max(1.0, abs(h)):
        raise GridError("CSV abscissae are not uniform")
    return GridFunction(nodes[0], h, values[last_idx], values[first_idx])


def _limits_record(**vectors) -> dict:
    return {k: [float(x) for x in np.atleast_1d(v)] for k, v in vectors.items()}


def save_asymptotic_state(directory, psi: AsymptoticState, stem: str = "psi") -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_grid_csv(d / f"{stem}0.csv", psi.psi0)
    write_grid_csv(d / f"{stem}1.csv", psi.psi1)
    rec = _limits_record(
        psi0_plus=psi.psi0_plus, psi0_minus=psi.psi0_minus, identity_residual=psi.identity_residual
    )
    (d / f"{stem}_limits.json").write_text(json.dumps(rec, indent=2) + "\n")


def load_asymptotic_state(directory, stem: str = "psi") -> AsymptoticState:
    d = Path(directory)
    rec = json.loads((d / f"{stem}_limits.json").read_text())
    return AsymptoticState.create(
        read_grid_csv(d / f"{stem}0.csv"),
        read_grid_csv(d / f"{stem}1.csv"),
        rec["psi0_plus"],
        rec["psi0_minus"],
    )


def save_energy_state(directory, state: EnergyState, stem: str = "initial") -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_grid_csv(d / f"{stem}_u0.csv", state.u0)
    write_grid_csv(d / f"{stem}_v0.csv", state.v0)
    rec = _limits_record(u0_plus=state.u0_plus, u0_minus=state.u0_minus, v0_mean=state.v0_mean)
    (d / f"{stem}_limits.json").write_text(json.dumps(rec, indent=2) + "\n")


def load_energy_state(directory, stem: str = "initial") -> EnergyState:
    d = Path(directory)
    rec = json.loads((d / f"{stem}_limits.json").read_text())
    return EnergyState(
        read_grid_csv(d / f"{stem}_u0.csv"),
        read_grid_csv(d / f"{stem}_v0.csv"),
        rec["u0_plus"],
        rec["u0_minus"],
        rec["v0_mean"],
    )


def stack(parts: Iterable[GridFunction]) -> GridFunction:
    """Concatenate components of functions on a common grid."""
    parts = list(parts)
    for p in parts[1:]:
        if not (abs(p.t0 - parts[0].t0) <= _ALIGN_TOL * p.h and p.size == parts[0].size):
            raise GridError("stack requires a common grid")
    samples = np.hstack([p.samples for p in parts])
    left = np.hstack([p.lower for p in parts]) if any(p.left is not None for p in parts) else None
    return parts[0].like(samples, left)


# node offsets of the four-point stencils, in steps from the cell start
_STENCILS = {
    "centred": (-1, 0, 1, 2),
    "ahead": (0, 1, 2, 3),
    "behind": (-2, -1, 0, 1),
}
_STENCIL_INV = {k: np.linalg.inv(np.vander(np.array(v, float), 4, increasing=True)) for k, v in _STENCILS.items()}


def cell_polynomials(g: GridFunction, breaks=None) -> np.ndarray:
    """Cubic coefficients ``c[k, j]`` with ``g(t_k + tau h) ~ sum_j c[k, j] tau^j``.

    Each cell gets the four-point interpolant through neighbouring nodes, taking
    the one-sided value facing the cell so that no stencil straddles a jump.  A
    centred stencil is used where possible, otherwise a one-sided one inside the
    smooth piece, and the linear interpolant of the cell end values when the
    piece is shorter than four nodes.  ``breaks`` lists further node indices
    that no stencil may straddle, such as kinks of a continuous function.
    """
    R, L = g.samples, g.lower
    m = g.size
    cells = m - 1
    coef = np.zeros((cells, 4, g.n))
    coef[:, 0] = R[:-1]
    coef[:, 1] = L[1:] - R[:-1]
    if m < 4:
        return coef
    jump = np.any(R != L, axis=1)
    if breaks is not None:
        jump[np.asarray(breaks, dtype=int)] = True
    k = np.arange(cells)

    def ok(idx):
        return (idx >= 0) & (idx < m)

    def nojump(*nodes):
        out = np.ones(cells, dtype=bool)
        for j in nodes:
            out &= ~jump[np.clip(j, 0, m - 1)] | ~ok(j)
        return out

    masks = {
        "centred": ok(k - 1) & ok(k + 2) & nojump(k, k + 1),
    }
    masks["ahead"] = ~masks["centred"] & ok(k + 3) & nojump(k + 1, k + 2)
    masks["behind"] = ~masks["centred"] & ~masks["ahead"] & ok(k - 2) & nojump(k - 1, k)
    for name, mask in masks.items():
        idx = np.nonzero(mask)[0]
        if not idx.size:
            continue
        offs = _STENCILS[name]
        # nodes left of the cell end use right limits, nodes from the cell end on use left limits
        vals = np.stack([R[idx + o] if o <= 0 else L[idx + o] for o in offs], axis=1)
        coef[idx] = np.einsum("jm,cmn->cjn", _STENCIL_INV[name], vals)
    return coef
