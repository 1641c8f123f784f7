import math

import numpy as np
import pytest

from lambscatter.errors import InconsistentInput, NoConvergence, WindowError
from lambscatter.grid import AsymptoticState, Trajectory, build_S, energy_norm
from lambscatter.incoming import construct_incoming
from lambscatter.models import make_model
from lambscatter.primitives import Primitive, asymptotic_state, energy_state
from lambscatter.scattering import (
    asymptotic_distance,
    coupling_defect,
    extract_scattering,
    forward_solve,
    free_field,
    incoming_wave,
    lamb_field,
    reconstruct_initial,
    remainder_norm,
)

H = 1e-3


def state(u0=(), v0=(), L=5.0, h=H, n=1):
    return energy_state(list(u0), list(v0), L, h, n)


def smooth_psi(L=6.0, h=0.01):
    return asymptotic_state(
        [Primitive("gaussian", [0.3, -0.2], 0.5, 0.6)],
        [Primitive("gaussian", [0.4, 0.1], -0.5, 0.5), Primitive("gaussian", [-0.4, -0.1], 1.0, 0.5)],
        L, h, 2,
    )


# -- incoming wave ------------------------------------------------------------


def test_incoming_wave_constant_displacement():
    w = incoming_wave(state([Primitive("constant", [2.0])]), 5.0)
    assert w.sup_norm() == 0.0


def test_incoming_wave_box_velocity():
    w = incoming_wave(state(v0=[Primitive("box", [1.0], 0.0, 1.0)]), 5.0)
    t = w.t
    assert np.allclose(w.samples[t < 1, 0], 1.0) and np.allclose(w.samples[t >= 1, 0], 0.0)
    assert np.allclose(w.lower[1:][t[1:] <= 1, 0], 1.0)


def test_incoming_wave_hat_displacement():
    # even u0: u0'(t) - u0'(-t) = 2 u0'(t), so the drive equals u0'(t) = -1 on (0, 1)
    w = incoming_wave(state([Primitive("hat", [1.0], 0.0, 1.0)]), 5.0)
    t = w.t
    assert np.allclose(w.samples[t < 1, 0], -1.0) and np.allclose(w.samples[t >= 1, 0], 0.0)
    # odd u0 with zero velocity: the two incoming derivatives cancel
    odd = state([Primitive("hat", [1.0], 1.0, 1.0), Primitive("hat", [-1.0], -1.0, 1.0)])
    assert incoming_wave(odd, 5.0).sup_norm() <= 1e-15


def test_incoming_wave_window_error():
    with pytest.raises(WindowError):
        incoming_wave(state(L=2.0), 3.0)


# -- forward solve ------------------------------------------------------------


def test_forward_stationary():
    m = make_model("double-well-2d")
    run = forward_solve(m, state([Primitive("constant", [1.0, 0.0])], n=2), 5.0)
    assert np.max(np.abs(run.y.samples - [1.0, 0.0])) == 0.0
    for g in (run.f_plus_out, run.f_minus_out, run.w_in):
        assert g.sup_norm() == 0.0


def test_forward_linear_relaxation():
    run = forward_solve(make_model("linear"), state([Primitive("constant", [1.0])]), 5.0)
    assert run.y(2.0)[0] == pytest.approx(math.exp(-1.0), abs=1e-12)
    assert run.y(2.0)[0] == pytest.approx(0.36788, abs=1e-5)


def test_forward_dissipates_potential():
    m = make_model("cubic-1d")
    run = forward_solve(m, state([Primitive("constant", [1.5])]), 5.0)
    V = m.potential(run.y.samples)
    assert np.all(np.diff(V) <= 1e-15)


def smooth_run(h, model="double-well-2d"):
    s = energy_state(
        [Primitive("constant", [1.0, 0.0]), Primitive("gaussian", [0.2, 0.3], 0.5, 0.7)],
        [Primitive("gaussian", [-0.3, 0.2], -1.0, 0.5)],
        12.0, h, 2,
    )
    return forward_solve(make_model(model), s, 8.0)


def test_trace_identity():
    run = smooth_run(0.01)
    end = run.T_max
    lhs = run.trajectory.ydot
    rhs = run.f_plus_out.window(0.0, end) + run.g_plus.window(0.0, end)
    assert (lhs - rhs).sup_norm() <= 1e-14


def test_coupling_balance_is_second_order():
    defects = []
    for h in (0.02, 0.01):
        run = smooth_run(h)
        defects.append(coupling_defect(run, run.y.derivative()).l2_norm())
    assert defects[1] < defects[0] / 3.5
    run = smooth_run(0.01)
    assert coupling_defect(run).sup_norm() <= 1e-12


def test_lamb_field_at_time_zero_is_initial_data():
    run = smooth_run(0.01)
    du, v, y0 = lamb_field(run, 0.0)
    src = run.source
    inner = np.abs(du.t) <= 8.0
    assert np.max(np.abs((du.samples - src.displacement_derivative().window(du.t0, du.t_end).samples)[inner])) <= 1e-12
    assert np.max(np.abs((v.samples - src.v0.window(v.t0, v.t_end).samples)[inner])) <= 1e-12
    assert np.allclose(y0, src.value_at_origin())


# -- free field ---------------------------------------------------------------


def test_free_field_identity_at_zero():
    psi = smooth_psi()
    w = free_field(psi, 0.0)
    assert np.max(np.abs(w.u0.samples - psi.psi0.samples)) <= 1e-15
    assert np.max(np.abs(w.v0.samples - psi.psi1.samples)) <= 1e-15


def test_free_field_without_density_is_dalembert():
    psi = asymptotic_state([Primitive("gaussian", [1.0], 0.0, 0.5)], [], 6.0, 0.01, 1)
    t = 1.5
    w = free_field(psi, t)
    x = w.u0.t
    exact = 0.5 * (np.exp(-(((x - t) / 0.5) ** 2)) + np.exp(-(((x + t) / 0.5) ** 2)))
    assert np.max(np.abs(w.u0.samples[:, 0] - exact)) <= 1e-12


def test_free_field_group_property():
    gaps = []
    for h in (0.02, 0.01):
        psi = smooth_psi(8.0, h)
        one = free_field(psi, 2.5)
        inter = free_field(psi, 1.0)
        as_psi = AsymptoticState.create(inter.u0, inter.v0, psi.psi0_plus, psi.psi0_minus, inter.du0)
        two = free_field(as_psi, 1.5)
        inner = np.abs(one.u0.t) <= 4.0
        gaps.append(np.max(np.abs((one.u0.samples - two.u0.samples)[inner])))
        assert np.max(np.abs((one.v0.samples - two.v0.samples)[inner])) <= 1e-12
    assert gaps[1] <= 1e-5 and gaps[1] < gaps[0] / 3.5


def test_free_field_interpolates_between_grid_times():
    psi = smooth_psi(8.0, 0.01)
    a = free_field(psi, 1.0)
    b = free_field(psi, 1.0 + 0.3 * 0.01)
    assert (a.u0 - b.u0).sup_norm() < 0.01


def test_free_field_conserves_energy():
    psi = smooth_psi(10.0)

    def energy(w):
        return w.du0.l2_norm() ** 2 + w.v0.l2_norm() ** 2

    e0 = energy(free_field(psi, 0.0))
    for t in (1.0, 3.0, 5.0):
        assert energy(free_field(psi, t)) == pytest.approx(e0, rel=1e-10)


def test_free_field_window_error():
    with pytest.raises(WindowError):
        free_field(smooth_psi(3.0), 4.0)


@pytest.mark.parametrize("psi", [smooth_psi(6.0), asymptotic_state([Primitive("constant", [1.0])], [Primitive("box", [-1.0], 0.0, 1.0)], 6.0, 0.01, 1)])
def test_S_equals_free_trace(psi):
    S, _ = build_S(psi, 5.0)
    for k in range(0, S.size, 50):
        assert np.allclose(free_field(psi, S.t[k]).u0(0.0), S.samples[k], atol=1e-12)


# -- extraction and remainder -------------------------------------------------


def test_extract_stationary():
    m = make_model("double-well-2d")
    run = forward_solve(m, state([Primitive("constant", [-1.0, 0.0])], L=5.0, h=0.01, n=2), 5.0)
    data = extract_scattering(run)
    assert np.allclose(data.s_plus, [-1.0, 0.0])
    assert data.psi_plus.psi0.sup_norm() == 0.0 and data.psi_plus.psi1.sup_norm() == 0.0
    assert np.all(data.remainder_curve.samples == 0.0)


def test_extract_no_convergence():
    run = forward_solve(make_model("linear"), state([Primitive("constant", [0.5])], L=2.0), 1.0)
    with pytest.raises(NoConvergence):
        extract_scattering(run)


def test_extracted_identity_and_decay():
    s = energy_state(
        [Primitive("hat", [0.5], 0.0, 1.0)], [Primitive("box", [1.0], 2.0, 0.5)], 31.0, H, 1
    )
    run = forward_solve(make_model("linear"), s, 30.0)
    data = extract_scattering(run)
    assert np.max(np.abs(data.psi_plus.identity_residual)) <= 1e-3
    assert remainder_norm(run, data, run.T_max) <= 1e-3
    curve = data.remainder_curve.samples[:, 0]
    assert curve[-1] < curve[len(curve) // 4]


# -- reconstruction -----------------------------------------------------------


def test_reconstruct_zero_state():
    psi = AsymptoticState.zero(6.0, 0.01, 2)
    sol = construct_incoming(make_model("double-well-2d"), [1.0, 0.0], psi, 5.0)
    st = reconstruct_initial(sol.trajectory, psi, [1.0, 0.0])
    assert np.allclose(st.u0.samples, [1.0, 0.0]) and st.v0.sup_norm() == 0.0
    assert energy_norm(st) == pytest.approx(1.0)


def test_reconstruct_linear_and_forward_consistency():
    psi = asymptotic_state([Primitive("constant", [1.0])], [Primitive("box", [-1.0], 0.0, 1.0)], 41.0, H, 1)
    m = make_model("linear")
    sol = construct_incoming(m, [0.0], psi, 40.0)
    st = reconstruct_initial(sol.trajectory, psi, [0.0], m)
    assert st.value_at_origin()[0] == pytest.approx(0.78694, abs=1e-5)
    run = forward_solve(m, st, 40.0)
    assert (run.y - sol.trajectory.y).sup_norm() <= 1e-4
    # algebraic identity: w_in = 2 y' - S'
    w = 2 * sol.trajectory.ydot - sol.Sdot
    assert (run.w_in - w).sup_norm() <= 1e-12


def test_reconstruct_rejects_inconsistent_trajectory():
    psi = smooth_psi(11.0, 0.01)
    m = make_model("double-well-2d")
    sol = construct_incoming(m, [1.0, 0.0], psi, 10.0)
    bad = Trajectory.from_samples(sol.trajectory.y + 0.1 * sol.trajectory.y.map(np.sin), sol.trajectory.ydot)
    with pytest.raises(InconsistentInput):
        reconstruct_initial(bad, psi, [1.0, 0.0], m)


def test_roundtrip_recovers_scattering_data():
    psi = smooth_psi(21.0, 0.01)
    m = make_model("double-well-2d")
    sol = construct_incoming(m, [1.0, 0.0], psi, 20.0)
    st = reconstruct_initial(sol.trajectory, psi, sol.s_plus, m)
    data = extract_scattering(forward_solve(m, st, 20.0))
    assert np.allclose(data.s_plus, [1.0, 0.0])
    assert asymptotic_distance(data.psi_plus, psi) <= 1e-3
    assert asymptotic_distance(psi, psi) == 0.0
