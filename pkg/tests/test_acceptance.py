"""Acceptance suite: one PASS/FAIL line per criterion, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
"""
import math
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from lambscatter.cli import load_config
from lambscatter.grid import GridFunction, build_S, num_nodes
from lambscatter.greenop import apply_R
from lambscatter.incoming import (
    construct_incoming,
    decompose_force,
    frechet_remainders,
    loglog_slope,
    nemytskii_derivative,
    run_counterexample,
)
from lambscatter.models import make_model
from lambscatter.primitives import Primitive, asymptotic_state, sample
from lambscatter.scattering import asymptotic_distance, extract_scattering, forward_solve, free_field, reconstruct_initial
from lambscatter.spectral import hyperbolic_split

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
H = 1e-3
T_MAX = 40.0


def verdict(capsys, label, ok, detail):
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} {label}: {detail}")
    assert ok, detail


def box_psi(amp, width=1.0, L=T_MAX + 2.0, h=H):
    amp = np.asarray(amp, dtype=float)
    return asymptotic_state([Primitive("constant", amp)], [Primitive("box", -amp / width, 0.0, width)], L, h, amp.size)


def roundtrip(model, s_plus, psi):
    start = time.perf_counter()
    sol = construct_incoming(model, s_plus, psi, T_MAX)
    state = reconstruct_initial(sol.trajectory, psi, sol.s_plus, model)
    run = forward_solve(model, state, T_MAX)
    data = extract_scattering(run)
    return sol, data, time.perf_counter() - start


@pytest.fixture(scope="module")
def roundtrips():
    dw = make_model("double-well-2d")
    return {
        "saddle (0,0)": (roundtrip(dw, [0.0, 0.0], box_psi([0.05, 0.05])), [0.0, 0.0], box_psi([0.05, 0.05])),
        "stable (1,0)": (roundtrip(dw, [1.0, 0.0], box_psi([0.05, 0.05])), [1.0, 0.0], box_psi([0.05, 0.05])),
    }


def test_criterion_1_linear_closed_form(capsys):
    start = time.perf_counter()
    sol = construct_incoming(make_model("linear"), [0.0], box_psi([1.0]), T_MAX)
    elapsed = time.perf_counter() - start
    t = sol.trajectory.y.t
    exact = np.where(t <= 1.0, 2.0 * (1.0 - np.exp((t - 1.0) / 2.0)), 0.0)
    err = float(np.max(np.abs(sol.trajectory.y.samples[:, 0] - exact)))
    ok = err <= 1e-6 and elapsed < 5.0
    verdict(capsys, "1 linear closed form", ok, f"sup error {err:.2e} (<= 1e-6), runtime {elapsed:.2f} s (< 5 s)")


def test_criterion_2_nonlinear_roundtrip(capsys, roundtrips):
    parts, ok = [], True
    for name, ((sol, data, elapsed), s_plus, psi) in roundtrips.items():
        s_err = float(np.max(np.abs(data.s_plus - s_plus)))
        psi_err = asymptotic_distance(data.psi_plus, psi)
        ok &= s_err <= 1e-4 and psi_err <= 1e-3 and elapsed < 60.0
        parts.append(f"{name}: |s+ err| {s_err:.1e}, Psi+ err {psi_err:.1e}, {elapsed:.1f} s")
    verdict(capsys, "2 nonlinear roundtrip", ok, "; ".join(parts))


def test_criterion_3_operator_R(capsys):
    split = hyperbolic_split([[0.0, 1.0], [2.0, 1.0]])
    f = sample([Primitive("box", [1.0, -0.5], 2.0, 1.0), Primitive("gaussian", [0.3, 0.7], 5.0, 0.5)], 0.0, T_MAX, H, 2)
    y = apply_R(split, f)
    # residual by Simpson on each cell: y_{k+1} - y_k - int (B y + f), with the cell-midpoint
    # value of y from cubic Hermite interpolation using y' = B y + f at the ends
    Y, R_, L_ = y.samples, f.samples, f.lower
    dl = Y[:-1] @ split.B.T + R_[:-1]
    dr = Y[1:] @ split.B.T + L_[1:]
    ym = 0.5 * (Y[:-1] + Y[1:]) + H / 8 * (dl - dr)
    fm = 0.5 * (R_[:-1] + L_[1:])
    integral = H / 6 * (dl + 4 * (ym @ split.B.T + fm) + dr)
    cell = (Y[1:] - Y[:-1] - integral) / H
    residual = float(math.sqrt(H * np.sum(cell**2)))
    rel = residual / f.l2_norm()
    tail = apply_R(split, sample([Primitive("box", [1.0, 1.0], 0.5, 0.5)], 0.0, T_MAX, H, 2)).window(0.9 * T_MAX, T_MAX).sup_norm()
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(5):
        vals = rng.standard_normal((num_nodes(0.0, 20.0, 0.01), 2))
        vals[-200:] = 0.0
        g = GridFunction(0.0, 0.01, vals)
        bound = split.C * math.sqrt(1.0 / split.eps) * g.l2_norm()
        worst = max(worst, float(np.max(np.linalg.norm(apply_R(split, g).samples, axis=1))) / bound)
    ok = rel <= 1e-6 and tail < 1e-8 and worst <= 1.0
    verdict(capsys, "3 operator R", ok, f"relative residual {rel:.1e} (<= 1e-6), window-end tail {tail:.1e} (< 1e-8), max |Rf(t)|/bound {worst:.2f} (<= 1)")


def test_criterion_4_fixed_point(capsys):
    sols = [
        construct_incoming(make_model("double-well-2d"), [1.0, 0.0], box_psi([0.3, 0.2], width=2.0), T_MAX),
        construct_incoming(make_model("double-well-2d"), [0.0, 0.0], box_psi([0.05, 0.05]), T_MAX),
        construct_incoming(make_model("cubic-1d"), [0.0], box_psi([0.2]), T_MAX),
    ]
    gaps = [s.uniqueness_gap for s in sols]
    ratios = [max(s.contraction_ratios) for s in sols if s.contraction_ratios]
    ok = all(g is not None and g <= 1e-8 for g in gaps) and ratios and max(ratios) < 1.0
    ok &= all("uniqueness_gap" in s.report() for s in sols)
    verdict(capsys, "4 fixed point", ok, f"max uniqueness gap {max(gaps):.1e} (<= 1e-8), max contraction ratio {max(ratios):.3f} (< 1)")


def test_criterion_5_frechet(capsys):
    slopes, zero_norms = [], []
    for s_plus in ([1.0, 0.0], [0.0, 0.0], [-1.0, 0.0]):
        d = decompose_force(make_model("double-well-2d"), s_plus)
        t = np.linspace(0.0, 10.0, 1001)
        y = GridFunction(0.0, 0.01, np.column_stack([0.3 * np.exp(-t), 0.2 * np.sin(t) * np.exp(-t)]))
        v = GridFunction(0.0, 0.01, np.column_stack([np.exp(-0.5 * t), np.cos(t) * np.exp(-t)]))
        deltas = np.array([1e-1, 1e-2, 1e-3, 1e-4])
        slopes.append(loglog_slope(deltas, frechet_remainders(d.N, d.dN, y, v, deltas)))
        zero_norms.append(nemytskii_derivative(d.dN, y.like(np.zeros_like(y.samples)), v).y_norm())
    ok = all(abs(s - 1.0) <= 0.1 for s in slopes) and max(zero_norms) <= 1e-10
    verdict(capsys, "5 Frechet", ok, f"slopes {', '.join(f'{s:.3f}' for s in slopes)} (1 +- 0.1), max ||N'(0) v|| {max(zero_norms):.1e} (<= 1e-10)")


def test_criterion_6_energy_estimate(capsys):
    dw = make_model("double-well-2d")
    cases = [([1.0, 0.0], [0.3, 0.2]), ([0.0, 0.0], [0.3, 0.3]), ([0.0, 0.0], [0.2, 0.5]), ([-1.0, 0.0], [-0.4, 0.3])]
    slacks = []
    for s_plus, amp in cases:
        sol = construct_incoming(dw, s_plus, box_psi(amp, width=2.0), T_MAX)
        if sol.T > 0.0:
            slacks.append(sol.energy_slack)
    ok = len(slacks) == len(cases) and max(slacks) <= 1e-4
    verdict(capsys, "6 energy estimate", ok, f"{len(slacks)} backward continuations, max slack {max(slacks):.1e} (<= 1e-4)")


def test_criterion_7_counterexamples(capsys):
    flat = run_counterexample("flat", -0.4, T_MAX, H)
    flat_ok = flat.log_fit_spread <= 1e-9 and abs(flat.exit_time - (math.exp(1.4) - 1.0)) <= 1e-6
    quad = run_counterexample("quadratic", 0.0, T_MAX, H)
    t = quad.trajectory.t
    margin = float(np.min(quad.trajectory.samples[:, 0] - np.log1p(t) - quad.y0))
    oracle = solve_ivp(lambda s, y: y**2 + 1 / (1 + s), (0, 2), [0.0], rtol=1e-12, atol=1e-14, events=lambda s, y: y[0] - 1.0)
    quad_ok = margin >= -1e-12 and abs(quad.exit_time - oracle.t_events[0][0]) <= 1e-8
    ctrl = run_counterexample("hyperbolic-control", 0.0, T_MAX, H)
    y = ctrl.trajectory
    peak = y.sup_norm()
    late = y.window(0.5 * T_MAX, 0.75 * T_MAX).sup_norm()
    ctrl_ok = peak < 1.0 and late < 0.2 * peak and ctrl.exit_time is None
    ok = flat_ok and quad_ok and ctrl_ok
    verdict(
        capsys,
        "7 counterexamples",
        ok,
        f"flat: log-fit spread {flat.log_fit_spread:.1e}, exit {flat.exit_time:.7f} vs {math.exp(1.4) - 1:.7f}; "
        f"quadratic: min(y - ln(1+t) - y0) {margin:.1e}, exit {quad.exit_time:.6f}; "
        f"control: sup {peak:.3f}, late sup {late:.1e}",
    )


def test_criterion_8_identity(capsys, roundtrips):
    residuals = {name: float(np.max(np.abs(data.psi_plus.identity_residual))) for name, ((_, data, _), _, _) in roundtrips.items()}
    sc = load_config(CONFIGS / "linear-forward.json", {})
    residuals["linear forward"] = float(np.max(np.abs(extract_scattering(forward_solve(sc.model, sc.energy_state(), sc.T_max)).psi_plus.identity_residual)))
    ok = max(residuals.values()) <= 1e-3
    verdict(capsys, "8 identity", ok, ", ".join(f"{k} {v:.1e}" for k, v in residuals.items()) + " (<= 1e-3)")


def test_criterion_9_trace_consistency(capsys):
    worst = {}
    for path in sorted(CONFIGS.glob("*.json")):
        sc = load_config(path, {})
        if not (sc.psi0 or sc.psi1):
            continue
        psi = sc.asymptotic_state()
        S, _ = build_S(psi, sc.T_max)
        idx = np.linspace(0, S.size - 1, 41).astype(int)
        gap = max(float(np.max(np.abs(free_field(psi, S.t[k]).u0(0.0) - S.samples[k]))) for k in idx)
        worst[path.stem] = (gap, sc.h)
    ok = bool(worst) and all(gap <= h**2 for gap, h in worst.values())
    verdict(capsys, "9 trace consistency", ok, ", ".join(f"{k} {g:.1e} (<= {h * h:.0e})" for k, (g, h) in worst.items()))


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
