"""Incoming trajectories of the inverse reduced equation ``y' = -F(y)/2 + S'(t)``.

The construction localises the drive to a tail ``[T, T_max]`` where a Picard
iteration on ``y = R(f1 + Ñ(y))`` contracts, then continues the solution back
to ``t = 0`` with RK4 and glues the two pieces at ``T``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import CannotLocalize, Diverged, InconsistentInput, NotStationary
from .greenop import apply_R
from .grid import AsymptoticState, GridFunction, Trajectory, build_S, concat, validate_asymptotic_state
from .models import ForceModel, make_model
from .ode import hermite_crossing, residual_l2, rk4_driven
from .spectral import HyperbolicSplit, hyperbolic_split


@dataclass(frozen=True, eq=False)
class Decomposition:
    """``F(s + w) = A w + N(w)`` around a zero ``s``."""

    s_plus: np.ndarray
    A: np.ndarray
    N: Callable
    dN: Callable


def decompose_force(model: ForceModel, s_plus, tol: float = 1e-10) -> Decomposition:
    s = np.atleast_1d(np.asarray(s_plus, dtype=float))
    r = float(np.linalg.norm(model.force(s)))
    if r > tol:
        raise NotStationary(f"|F(s_plus)| = {r:.3e}")
    A = np.array(model.jacobian(s), dtype=float).reshape(model.n, model.n)

    def N(w):
        w = np.asarray(w, dtype=float)
        return model.force(s + w) - w @ A.T

    def dN(w):
        return model.jacobian(s + np.asarray(w, dtype=float)) - A

    return Decomposition(s, A, N, dN)


def tail_norms(f: GridFunction) -> np.ndarray:
    """``||f||_{L2(t_k, t_end)}`` for every node ``t_k``."""
    a, b = f.samples[:-1], f.lower[1:]
    cell = 0.5 * f.h * (np.sum(a * a, axis=1) + np.sum(b * b, axis=1))
    tail = np.zeros(f.size)
    tail[:-1] = np.cumsum(cell[::-1])[::-1]
    return np.sqrt(tail)


def choose_T(f: GridFunction, eps: float, limit: float | None = None) -> float:
    """Smallest node ``T`` whose tail L2 norm does not exceed ``eps``.

    ``limit`` defaults to the window midpoint; a tail still above ``eps`` there
    means the drive cannot be localised.
    """
    if limit is None:
        limit = 0.5 * (f.t0 + f.t_end)
    tails = tail_norms(f)
    ok = np.nonzero(tails <= eps * (1.0 + 1e-12))[0]
    if ok.size == 0 or f.t[ok[0]] > limit + 1e-9 * f.h:
        k = min(f.size - 1, max(0, int(round((limit - f.t0) / f.h))))
        raise CannotLocalize(f"tail norm {tails[k]:.3e} at t = {f.t[k]:.4g} is not below {eps:.3e}")
    return float(f.t[ok[0]])


def contraction_threshold(split: HyperbolicSplit, radius: float) -> float:
    """Tail size keeping ``||R f1||_sup`` below a quarter of the validity radius.

    Uses ``|Rf|_sup <= C / sqrt(eps) * ||f||_L2``.
    """
    return radius * math.sqrt(split.eps) / (4.0 * split.C)


@dataclass
class TailSolution:
    w: GridFunction
    iterations: int
    differences: list = field(default_factory=list)
    converged: bool = False

    @property
    def contraction_ratios(self) -> list:
        d = self.differences
        return [d[i + 1] / d[i] for i in range(len(d) - 1) if d[i] > 0]


def solve_tail(
    split: HyperbolicSplit,
    N: Callable,
    f: GridFunction,
    T: float,
    radius: float = 1.0,
    tol: float = 1e-10,
    max_iter: int = 200,
    start: str = "linear",
) -> TailSolution:
    """Picard iteration for ``w = R f1 + R(-N(w)/2)`` on ``[T, T_max]``.

    ``start`` is ``"linear"`` (``w0 = R f1``), ``"zero"``, or ``"offset"``
    (``R f1`` plus a decaying bump of a quarter of the radius, a start that no
    other choice reaches).  Iterates whose sup norm leaves the validity radius
    raise :class:`Diverged`.
    """
    f1 = f.window(T, f.t_end)
    Rf1 = apply_R(split, f1)
    # w' jumps where f1 does, so N(w) has kinks there
    kinks = f1.jump_nodes()

    def ntilde(w):
        return -0.5 * N(w)

    if start == "linear":
        w = Rf1
    elif start == "zero":
        w = f1.like(np.zeros_like(f1.samples))
    elif start == "offset":
        bump = np.exp(-(f1.t - f1.t0))[:, None] * np.ones(f1.n) / math.sqrt(f1.n)
        w = Rf1 + f1.like(0.25 * radius * bump)
    else:
        raise ValueError(f"unknown start {start!r}")
    if w.sup_norm() > radius:
        raise Diverged(f"initial iterate leaves the validity radius {radius:.3g}")
    out = TailSolution(w, 0)
    for it in range(1, max_iter + 1):
        w_new = Rf1 + apply_R(split, w.map(ntilde), tail_tol=None, breaks=kinks)
        if not np.all(np.isfinite(w_new.samples)) or w_new.sup_norm() > radius:
            raise Diverged(f"Picard iterate {it} left the validity radius {radius:.3g}")
        diff = (w_new - w).y_norm()
        out.differences.append(diff)
        w = w_new
        out.w, out.iterations = w, it
        if diff <= tol:
            out.converged = True
            break
    return out


@dataclass(frozen=True, eq=False)
class BackwardResult:
    y: GridFunction
    ydot: GridFunction
    energy_slack: float | None  # max over t of LHS - RHS of the a-priori bound


def energy_estimate_slack(model: ForceModel, y: GridFunction, ydot: GridFunction, drive: GridFunction) -> float:
    """Largest violation of ``V(y(t)) + int_t^T |y'|^2 <= V(y(T)) + int_t^T |f|^2``."""
    V = model.potential(y.samples)
    lhs = V + tail_norms(ydot) ** 2
    rhs = V[-1] + tail_norms(drive) ** 2
    return float(np.max(lhs - rhs))


def backward_continue(model: ForceModel, s_plus, Sdot: GridFunction, y_T, T: float) -> BackwardResult:
    """Integrate ``y' = -F(y)/2 + S'(t)`` from ``t = T`` down to the left end of ``Sdot``."""
    if T <= Sdot.t0:
        raise ValueError("T must exceed the left end of the drive")
    drive = Sdot.window(Sdot.t0, T)

    def g(y):
        return -0.5 * model.force(y)

    y = rk4_driven(g, drive, y_T, reverse=True)
    ydot = y.map(g) + drive
    slack = energy_estimate_slack(model, y, ydot, drive) if model.has_potential else None
    return BackwardResult(y, ydot, slack)


@dataclass(frozen=True, eq=False)
class IncomingSolution:
    trajectory: Trajectory
    T: float
    picard_iterations: int
    residual_l2: float
    terminal_gap: float
    s_plus: np.ndarray
    split: HyperbolicSplit
    S: GridFunction
    Sdot: GridFunction
    threshold: float
    retries: int
    energy_slack: float | None
    uniqueness_gap: float | None
    contraction_ratios: list

    def report(self) -> dict:
        return {
            "T": self.T,
            "eps": self.split.eps,
            "C": self.split.C,
            "iterations": self.picard_iterations,
            "residual_l2": self.residual_l2,
            "terminal_gap": self.terminal_gap,
            "energy_estimate_slack": self.energy_slack,
            "uniqueness_gap": self.uniqueness_gap,
            "max_contraction_ratio": max(self.contraction_ratios) if self.contraction_ratios else None,
            "tail_threshold": self.threshold,
            "retries": self.retries,
            "l2_norm_ydot": self.trajectory.l2_norm_ydot,
            "y0": [float(v) for v in self.trajectory.y.samples[0]],
        }


def construct_incoming(
    model: ForceModel,
    s_plus,
    psi: AsymptoticState,
    T_max: float,
    tol: float = 1e-10,
    max_iter: int = 200,
    max_retries: int = 30,
    check_uniqueness: bool = True,
) -> IncomingSolution:
    """Incoming solution of the inverse reduced equation converging to ``s_plus``."""
    verdict = validate_asymptotic_state(psi)
    if not verdict.member:
        raise InconsistentInput(f"asymptotic state violates the limit identity (residual {verdict.residual_norm:.3e})")
    S, Sdot = build_S(psi, T_max)
    dec = decompose_force(model, s_plus)
    split = hyperbolic_split(-0.5 * dec.A)
    radius = model.validity_radius(dec.s_plus)
    threshold = contraction_threshold(split, radius)
    limit = 0.5 * Sdot.t_end

    T = choose_T(Sdot, threshold, limit)
    retries = 0
    while True:
        try:
            tail = solve_tail(split, dec.N, Sdot, T, radius, tol, max_iter)
            if not tail.converged:
                raise Diverged(f"no convergence in {max_iter} Picard iterations")
            break
        except Diverged:
            current = tail_norms(Sdot)[Sdot.index(T)]
            retries += 1
            if current == 0.0 or retries > max_retries:
                raise
            T = choose_T(Sdot, 0.5 * current, limit)

    uniqueness_gap = None
    if check_uniqueness:
        other = solve_tail(split, dec.N, Sdot, T, radius, tol, max_iter, start="offset")
        uniqueness_gap = (other.w - tail.w).y_norm()

    y1 = tail.w + dec.s_plus
    energy_slack = None
    if T > Sdot.t0:
        back = backward_continue(model, dec.s_plus, Sdot, y1.samples[0], T)
        y = concat(back.y, y1)
        energy_slack = back.energy_slack
    else:
        y = y1

    def g(v):
        return -0.5 * model.force(v)

    ydot = y.map(g) + Sdot
    traj = Trajectory.from_samples(y, ydot)
    return IncomingSolution(
        trajectory=traj,
        T=T,
        picard_iterations=tail.iterations,
        residual_l2=residual_l2(g, y, Sdot),
        terminal_gap=float(np.linalg.norm(y.samples[-1] - dec.s_plus)),
        s_plus=dec.s_plus,
        split=split,
        S=S,
        Sdot=Sdot,
        threshold=threshold,
        retries=retries,
        energy_slack=energy_slack,
        uniqueness_gap=uniqueness_gap,
        contraction_ratios=tail.contraction_ratios,
    )


def gluing_jump(sol: IncomingSolution) -> float:
    """Difference of the second-order one-sided difference quotients of ``y`` at ``T``."""
    y = sol.trajectory.y
    k = y.index(sol.T)
    if k < 2 or k > y.size - 3:
        return 0.0
    Y, h = y.samples, y.h
    left = (3 * Y[k] - 4 * Y[k - 1] + Y[k - 2]) / (2 * h)
    right = (-3 * Y[k] + 4 * Y[k + 1] - Y[k + 2]) / (2 * h)
    return float(np.max(np.abs(left - right)))


# ---------------------------------------------------------------------------
# Nemytskii map


def nemytskii(N: Callable, y: GridFunction) -> GridFunction:
    return y.map(N)


def nemytskii_derivative(dN: Callable, y: GridFunction, v: GridFunction) -> GridFunction:
    """``(N'(y) v)(t) = dN(y(t)) v(t)``."""
    y.check_grid(v)
    J = dN(y.samples)
    return v.like(np.einsum("kij,kj->ki", J, v.samples))


def frechet_remainders(N: Callable, dN: Callable, y: GridFunction, v: GridFunction, deltas) -> np.ndarray:
    """``||N(y + d v) - N(y) - N'(y) d v|| / ||d v||`` in the trajectory norm."""
    base = nemytskii(N, y)
    lin = nemytskii_derivative(dN, y, v)
    out = []
    for d in deltas:
        r = nemytskii(N, y + d * v) - base - d * lin
        out.append(r.y_norm() / (d * v.y_norm()))
    return np.array(out)


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


# ---------------------------------------------------------------------------
# Nonhyperbolic counterexamples


def decaying_drive(t):
    return 1.0 / (1.0 + np.abs(t))


@dataclass(frozen=True, eq=False)
class CounterexampleReport:
    kind: str
    y0: float
    trajectory: GridFunction
    exit_time: float | None
    log_fit_constant: float
    log_fit_spread: float
    lower_bound_margin: float
    final_value: float

    def report(self) -> dict:
        return {
            "kind": self.kind,
            "y0": self.y0,
            "exit_time": self.exit_time,
            "log_fit_constant": self.log_fit_constant,
            "log_fit_deviation": abs(self.log_fit_constant - self.y0),
            "log_fit_spread": self.log_fit_spread,
            "lower_bound_margin": self.lower_bound_margin,
            "final_value": self.final_value,
            "t_end": self.trajectory.t_end,
            "max_abs_y": self.trajectory.sup_norm(),
        }


def _rk4_until_exit(rhs, y0: float, T_max: float, h: float):
    steps = int(math.floor(T_max / h + 1e-9))
    ys = [y0]
    y, t = y0, 0.0
    for k in range(steps):
        t = k * h
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t + h, y + h * k3)
        y_new = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if abs(y_new) >= 1.0:
            level = math.copysign(1.0, y_new)
            t_exit = hermite_crossing(t, t + h, y, y_new, rhs(t, y), rhs(t + h, y_new), level)
            return np.array(ys), t_exit
        ys.append(y_new)
        y = y_new
    return np.array(ys), None


def run_counterexample(kind: str, y0: float = 0.0, T_max: float = 40.0, h: float = 1e-3) -> CounterexampleReport:
    """Integrate the one-dimensional nonhyperbolic examples with drive ``1/(1+t)``.

    ``flat``: ``y' = -F(y)/2 + f`` for the flat-core force (``y' = f`` while ``|y| < 1``).
    ``quadratic``: ``y' = y^2 + f``, integrated as written.
    ``hyperbolic-control``: linear ``F(y) = -y``; reports the unique incoming
    solution ``y = R f`` rather than the forward orbit of ``y0``.
    """
    if kind in ("flat", "quadratic") and not abs(y0) < 0.5:
        raise ValueError("counterexamples start inside |y0| < 1/2")
    if kind == "flat":
        flat = make_model("flat-core")
        ys, t_exit = _rk4_until_exit(lambda t, y: -0.5 * float(flat.force(np.array([y]))[0]) + 1.0 / (1.0 + t), y0, T_max, h)
    elif kind == "quadratic":
        ys, t_exit = _rk4_until_exit(lambda t, y: y * y + 1.0 / (1.0 + t), y0, T_max, h)
    elif kind == "hyperbolic-control":
        split = hyperbolic_split([[0.5]])
        f = GridFunction.from_function(decaying_drive, 0.0, T_max, h)
        ys = apply_R(split, f, tail_tol=None).samples[:, 0]
        t_exit = None
    else:
        raise ValueError(f"unknown counterexample kind {kind!r}")
    traj = GridFunction(0.0, h, ys)
    t = traj.t
    shifted = ys - np.log1p(t)
    const = float(np.mean(shifted))
    return CounterexampleReport(
        kind=kind,
        y0=float(y0),
        trajectory=traj,
        exit_time=t_exit,
        log_fit_constant=const,
        log_fit_spread=float(np.max(np.abs(shifted - const))),
        lower_bound_margin=float(np.min(ys - np.log1p(t) - ys[0])),
        final_value=float(ys[-1]),
    )
