"""Forward Lamb evolution by d'Alembert decomposition and scattering-data extraction.

On ``x > 0`` the string is ``u = f+(t - x) + g+(t + x)``, on ``x < 0`` it is
``u = f-(t + x) + g-(t - x)``.  The incoming parts ``g±`` are fixed by the
initial data; the outgoing parts follow from the trace ``y(t) = u(0, t)``.
All profiles are stored as derivatives.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InconsistentInput, NoConvergence, WindowError
from .grid import (
    AsymptoticState,
    EnergyState,
    GridFunction,
    Trajectory,
    build_S,
    concat,
    num_nodes,
)
from .models import ForceModel
from .ode import residual_l2, rk4_driven

_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ForwardRun:
    model: ForceModel
    trajectory: Trajectory
    w_in: GridFunction          # incoming drive at the origin, [0, T_max]
    f_plus_out: GridFunction    # f+'(s), s in [-L, T_max]
    f_minus_out: GridFunction   # f-'(s), s in [-L, T_max]
    g_plus: GridFunction        # g+'(tau), tau in [0, L]
    g_minus: GridFunction       # g-'(tau), tau in [0, L]
    source: EnergyState

    @property
    def T_max(self) -> float:
        return self.trajectory.y.t_end

    @property
    def y(self) -> GridFunction:
        return self.trajectory.y


@dataclass(frozen=True, eq=False)
class ScatteringData:
    s_plus: np.ndarray
    psi_plus: AsymptoticState
    remainder_curve: GridFunction
    left_limit_defect: np.ndarray

    def report(self) -> dict:
        return {
            "s_plus": [float(v) for v in self.s_plus],
            "identity_residual": [float(v) for v in self.psi_plus.identity_residual],
            "left_limit_defect": [float(v) for v in self.left_limit_defect],
            "remainder_samples": {
                "t": [float(v) for v in self.remainder_curve.t],
                "norm": [float(v) for v in self.remainder_curve.samples[:, 0]],
            },
        }


def _end(h: float, t_max: float) -> float:
    return h * (num_nodes(0.0, t_max, h) - 1)


def _incoming_parts(state: EnergyState):
    du0 = state.displacement_derivative()
    right = 0.5 * (du0 + state.v0)       # g+'(x), x > 0
    left = 0.5 * (state.v0 - du0)        # g-'(-x) for x < 0; f+'(-x) for x > 0
    return du0, right, left


def incoming_wave(state: EnergyState, t_max: float) -> GridFunction:
    """``w_in(t) = (u0' + v0)(t)/2 + (v0 - u0')(-t)/2`` on ``[0, t_max]``."""
    if t_max > state.half_width + _TOL:
        raise WindowError(f"t_max={t_max} exceeds the data window {state.half_width}")
    end = _end(state.u0.h, t_max)
    _, right, left = _incoming_parts(state)
    return right.window(0.0, end) + left.reflect().window(0.0, end)


def forward_solve(model: ForceModel, state: EnergyState, T_max: float) -> ForwardRun:
    """Trace ODE ``y' = F(y)/2 + w_in(t)`` with ``y(0) = u0(0)``, then the outgoing profiles."""
    w_in = incoming_wave(state, T_max)
    L = state.half_width
    h = state.u0.h

    def g(v):
        return 0.5 * model.force(v)

    y = rk4_driven(g, w_in, state.value_at_origin())
    ydot = y.map(g) + w_in
    du0, right, left = _incoming_parts(state)
    g_plus = right.window(0.0, h * (num_nodes(0.0, L, h) - 1))
    g_minus = left.reflect().window(0.0, g_plus.t_end)
    end = w_in.t_end
    f_plus = concat(left.window(0.0, g_plus.t_end).reflect(), ydot - g_plus.window(0.0, end))
    f_minus = concat(
        (0.5 * (state.v0 + du0)).window(-g_plus.t_end, 0.0), ydot - g_minus.window(0.0, end)
    )
    return ForwardRun(model, Trajectory.from_samples(y, ydot), w_in, f_plus, f_minus, g_plus, g_minus, state)


def coupling_defect(run: ForwardRun, ydot: GridFunction | None = None) -> GridFunction:
    """``F(y) + u'(0+, t) - u'(0-, t)`` with the given (default: stored) trace derivative."""
    ydot = run.trajectory.ydot if ydot is None else ydot
    end = run.T_max
    gp, gm = run.g_plus.window(0.0, end), run.g_minus.window(0.0, end)
    fp, fm = ydot - gp, ydot - gm
    du_right = -fp + gp
    du_left = fm - gm
    return run.y.map(run.model.force) + du_right - du_left


def _shifted(g: GridFunction, offset: float) -> GridFunction:
    """``x -> g(x - offset)`` on the shifted grid."""
    return GridFunction(g.t0 + offset, g.h, g.samples, g.left)


def _on(g: GridFunction, offset: float, t0: float, size: int, below, above, exact: bool) -> GridFunction:
    if exact:
        return _shifted(g, offset).extend(t0, size, below, above)
    x = t0 + g.h * np.arange(size)
    return GridFunction(t0, g.h, g.evaluate(x - offset, below, above))


def free_field(psi: AsymptoticState, t: float, t0: float | None = None, size: int | None = None) -> EnergyState:
    """Free wave ``W(t) psi`` sampled on the state grid (or on an aligned target grid).

    Position ``(psi0(x-t) + psi0(x+t))/2 + 1/2 int_{x-t}^{x+t} psi1`` and its
    exact time and space derivatives.
    """
    if abs(t) > psi.half_width + _TOL:
        raise WindowError(f"|t|={abs(t)} exceeds the asymptotic-state window {psi.half_width}")
    h = psi.psi0.h
    if t0 is None:
        t0, size = psi.psi0.t0, psi.psi0.size
    steps = t / h
    exact = abs(steps - round(steps)) <= 1e-9 * max(1.0, abs(steps))
    if exact:
        t = round(steps) * h
    p0, d0, p1 = psi.psi0, psi.derivative(), psi.psi1
    cum = p1.cumulative()
    total = cum.samples[-1]
    zero = np.zeros(psi.n)

    def both(g, below, above):
        return _on(g, t, t0, size, below, above, exact), _on(g, -t, t0, size, below, above, exact)

    p0_r, p0_l = both(p0, psi.psi0_minus, psi.psi0_plus)   # psi0(x - t), psi0(x + t)
    d0_r, d0_l = both(d0, zero, zero)
    p1_r, p1_l = both(p1, zero, zero)
    c_r, c_l = both(cum, zero, total)
    u = 0.5 * (p0_r + p0_l) + 0.5 * (c_l - c_r)
    v = 0.5 * (d0_l - d0_r) + 0.5 * (p1_l + p1_r)
    du = 0.5 * (d0_r + d0_l) + 0.5 * (p1_l - p1_r)
    return EnergyState(u, v, psi.psi0_plus, psi.psi0_minus, v.integral(), du)


def extract_scattering(run: ForwardRun, tol: float = 1e-3, remainder_points: int = 41) -> ScatteringData:
    """Limit zero and asymptotic state from the outgoing profiles.

    ``psi1(x) = f-'(x) + f+'(-x)``, ``psi0'(x) = f-'(x) - f+'(-x)``; ``psi0`` is
    fixed by its right limit ``u0(+inf) - s_plus``.
    """
    y_end = run.y.samples[-1]
    s_plus, dist = run.model.nearest_zero(y_end)
    if dist > tol:
        raise NoConvergence(f"y(T_max) is {dist:.3e} away from every zero")
    h = run.y.h
    Lx = min(run.g_plus.t_end, run.T_max)
    fm = run.f_minus_out.window(-Lx, Lx)
    fp = run.f_plus_out.window(-Lx, Lx).reflect()
    psi1 = fm + fp
    dpsi0 = fm - fp
    plus = run.source.u0_plus - s_plus
    cum = dpsi0.cumulative()
    psi0 = cum + (plus - cum.samples[-1])
    psi = AsymptoticState.create(psi0, psi1, plus, psi0.samples[0], dpsi0)
    left_defect = psi0.samples[0] - (run.source.u0_minus - s_plus)

    data = ScatteringData(np.array(s_plus), psi, GridFunction.zeros(0.0, 1.0, 2), left_defect)
    stride = max(1, int(round(run.T_max / (remainder_points - 1) / h)))
    times = np.arange(0, run.y.size, stride) * h
    curve = np.array([remainder_norm(run, data, t) for t in times])
    return ScatteringData(data.s_plus, psi, GridFunction(0.0, stride * h, curve), left_defect)


def lamb_field(run: ForwardRun, t: float) -> tuple[GridFunction, GridFunction, np.ndarray]:
    """``u'(x, t)`` and ``u_t(x, t)`` on the data grid, plus ``u(0, t)``."""
    if t < -_TOL or t > run.T_max + _TOL:
        raise WindowError(f"t={t} outside [0, {run.T_max}]")
    h = run.y.h
    t = round(t / h) * h
    L = run.g_plus.t_end
    n_half = run.g_plus.size
    zero = np.zeros(run.y.n)

    fp_refl = run.f_plus_out.reflect()           # s -> f+'(-s)
    fp = _shifted(fp_refl, t).extend(0.0, n_half, zero, zero)          # f+'(t - x)
    gp = _shifted(run.g_plus, -t).extend(0.0, n_half, zero, zero)      # g+'(t + x)
    fm = _shifted(run.f_minus_out, -t).extend(-L, n_half, zero, zero)  # f-'(t + x)
    gm = _shifted(run.g_minus.reflect(), t).extend(-L, n_half, zero, zero)  # g-'(t - x)

    du = concat(fm - gm, -fp + gp)
    v = concat(fm + gm, fp + gp)
    return du, v, run.y(t)


def remainder_norm(run: ForwardRun, data: ScatteringData, t: float) -> float:
    """Energy norm of ``Y(t) - S_plus - W(t) psi_plus`` on the data window."""
    du, v, y_t = lamb_field(run, t)
    free = free_field(data.psi_plus, round(t / du.h) * du.h, du.t0, du.size)
    d_du = du - free.displacement_derivative()
    d_v = v - free.v0
    u0_free = free.u0(0.0)
    return d_du.l2_norm() + float(np.linalg.norm(y_t - data.s_plus - u0_free)) + d_v.l2_norm()


def reconstruct_initial(
    traj: Trajectory,
    psi: AsymptoticState,
    s_plus,
    model: ForceModel | None = None,
    residual_tol: float = 1e-4,
) -> EnergyState:
    """Initial data whose forward run has trace ``y`` and outgoing radiation ``psi``.

    With ``f+*(s) = (-psi0'(-s) + psi1(-s))/2`` and ``f-*(s) = (psi0'(s) + psi1(s))/2``
    the outgoing profiles are matched exactly and the incoming ones absorb ``y'``.
    """
    y, ydot = traj.y, traj.ydot
    h = y.h
    L = h * (num_nodes(0.0, psi.half_width, h) - 1)
    if L < y.t_end - _TOL:
        raise WindowError(f"asymptotic-state window {psi.half_width} is shorter than the trajectory")
    if model is not None:
        _, Sdot = build_S(psi, y.t_end)

        def g(v):
            return -0.5 * model.force(v)

        res = residual_l2(g, y, Sdot)
        if res > residual_tol:
            raise InconsistentInput(f"trajectory residual {res:.3e} exceeds {residual_tol:.1e}")
    size = num_nodes(-L, L, h)
    zero = np.zeros(psi.n)
    # the trace has settled at its limit after the trajectory window
    ydot = ydot.extend(0.0, num_nodes(0.0, L, h), zero, zero)
    d0 = psi.derivative().extend(-L, size, zero, zero)
    p1 = psi.psi1.extend(-L, size, zero, zero)
    fp_star = 0.5 * (p1 - d0).reflect()      # f+*(s) = (psi1 - psi0')(-s)/2
    fm_star = 0.5 * (d0 + p1)

    fp_pos, fp_neg = fp_star.window(0.0, L), fp_star.reflect().window(0.0, L)   # f+*(x), f+*(-x)
    fm_neg, fm_pos = fm_star.window(-L, 0.0), fm_star.reflect().window(-L, 0.0)  # f-*(x), f-*(-x)
    yd_neg = ydot.reflect()                                                    # y'(-x) on [-L, 0]

    v_right = fp_neg + ydot - fp_pos
    du_right = -fp_neg + ydot - fp_pos
    v_left = fm_neg + yd_neg - fm_pos
    du_left = fm_neg - yd_neg + fm_pos
    v0 = concat(v_left, v_right)
    du0 = concat(du_left, du_right)
    u0 = du0.cumulative()
    u0 = u0 + (y.samples[0] - u0(0.0))
    return EnergyState.from_grids(u0, v0, du0)


def asymptotic_distance(a: AsymptoticState, b: AsymptoticState) -> float:
    """Energy-norm distance of two asymptotic states on the grid of ``a``."""
    t0, size = a.psi0.t0, a.psi0.size
    zero = np.zeros(a.n)
    b0 = b.psi0.extend(t0, size, b.psi0_minus, b.psi0_plus)
    bd = b.derivative().extend(t0, size, zero, zero)
    b1 = b.psi1.extend(t0, size, zero, zero)
    return (
        (a.derivative() - bd).l2_norm()
        + float(np.linalg.norm(a.psi0(0.0) - b0(0.0)))
        + (a.psi1 - b1).l2_norm()
    )
