"""Scenario runner: JSON config in, CSV/JSON reports out.

Subcommands ``forward``, ``construct``, ``roundtrip`` and ``counterexample``.
Exit status 0 on success, 1 on a solver error (the error code is recorded in
``summary.json``), 2 on a configuration error.
"""
from __future__ import annotations

import argparse
import copy
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import primitives
from .errors import ConfigError, LambError
from .grid import (
    AsymptoticState,
    build_S,
    energy_norm,
    save_asymptotic_state,
    save_energy_state,
    write_table,
)
from .incoming import construct_incoming, gluing_jump, run_counterexample
from .models import make_model
from .scattering import (
    asymptotic_distance,
    extract_scattering,
    forward_solve,
    free_field,
    reconstruct_initial,
)

DEFAULT_GRID = {"h": 1e-3, "T_max": 40.0, "L0": None}
DEFAULT_TOLERANCES = {
    "picard": 1e-10,
    "residual": 1e-6,
    "terminal_gap": 1e-6,
    "trajectory": 1e-4,
    "s_plus": 1e-4,
    "psi_energy": 1e-3,
    "identity": 1e-3,
    "convergence": 1e-3,
    "energy_slack": 1e-4,
    "trace": 1e-6,
    "log_fit": 1e-9,
}


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# configuration


class Scenario:
    """Parsed configuration with defaults filled in."""

    def __init__(self, raw: dict):
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        self.raw = raw
        grid = {**DEFAULT_GRID, **raw.get("grid", {})}
        try:
            self.h = float(grid["h"])
            self.T_max = float(grid["T_max"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad grid settings: {exc}") from exc
        if not (self.h > 0 and self.T_max > 0):
            raise ConfigError("grid step and T_max must be positive")
        self.L0_setting = grid.get("L0")
        self.tolerances = {**DEFAULT_TOLERANCES, **raw.get("tolerances", {})}
        m = raw.get("model")
        if not isinstance(m, dict) or "name" not in m:
            raise ConfigError("config needs a model {name, params, n}")
        self.model = make_model(m["name"], m.get("params"), m.get("n"))
        self.n = self.model.n
        self.s_plus = raw.get("s_plus")
        psi = raw.get("psi", {}) or {}
        self.psi0 = primitives.parse(psi.get("psi0"), self.n)
        self.psi1 = primitives.parse(psi.get("psi1"), self.n)
        init = raw.get("initial", {}) or {}
        self.u0 = primitives.parse(init.get("u0"), self.n)
        self.v0 = primitives.parse(init.get("v0"), self.n)
        self.counterexample = raw.get("counterexample", {}) or {}

    def L0(self, *groups) -> float:
        if self.L0_setting is not None:
            return float(self.L0_setting)
        return primitives.support_radius(*groups)

    def window(self, *groups) -> float:
        """Half-width ``T_max + L0`` rounded up to the grid."""
        L = self.T_max + self.L0(*groups) + self.h
        return self.h * math.ceil(L / self.h - 1e-9)

    def asymptotic_state(self) -> AsymptoticState:
        if self.s_plus is None:
            raise ConfigError("construct needs s_plus")
        return primitives.asymptotic_state(self.psi0, self.psi1, self.window(self.psi0, self.psi1), self.h, self.n)

    def energy_state(self):
        if not (self.u0 or self.v0):
            raise ConfigError("forward needs initial data {u0, v0}")
        return primitives.energy_state(self.u0, self.v0, self.window(self.u0, self.v0), self.h, self.n)


def load_config(path, overrides: dict) -> Scenario:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    raw = copy.deepcopy(raw)
    grid = raw.setdefault("grid", {})
    if overrides.get("grid_step") is not None:
        grid["h"] = overrides["grid_step"]
    if overrides.get("t_max") is not None:
        grid["T_max"] = overrides["t_max"]
    if overrides.get("tol") is not None:
        raw.setdefault("tolerances", {})["picard"] = overrides["tol"]
    ce = raw.setdefault("counterexample", {})
    if overrides.get("kind") is not None:
        ce["kind"] = overrides["kind"]
    if overrides.get("y0") is not None:
        ce["y0"] = overrides["y0"]
    return Scenario(raw)


# ---------------------------------------------------------------------------
# pipelines


def _trace_consistency(psi: AsymptoticState, t_max: float, samples: int = 9) -> float:
    """Max gap between ``S(t)`` and the free-field position at ``x = 0``."""
    S, _ = build_S(psi, t_max)
    h = S.h
    stride = max(1, (S.size - 1) // (samples - 1))
    gap = 0.0
    for k in range(0, S.size, stride):
        free = free_field(psi, k * h)
        gap = max(gap, float(np.max(np.abs(free.u0(0.0) - S.samples[k]))))
    return gap


def _construct(sc: Scenario, out: Path, summary: dict):
    psi = sc.asymptotic_state()
    tol = sc.tolerances
    sol = construct_incoming(sc.model, sc.s_plus, psi, sc.T_max, tol=float(tol["picard"]))
    traj = sol.trajectory
    write_table(out / "incoming.csv", ["y", "ydot"], [traj.y, traj.ydot])
    report = sol.report()
    report["gluing_jump"] = gluing_jump(sol)
    write_json(out / "report.json", report)
    state = reconstruct_initial(traj, psi, sol.s_plus, sc.model, residual_tol=float(tol["trajectory"]))
    save_energy_state(out, state)
    trace_gap = _trace_consistency(psi, sc.T_max)

    summary["norms"].update(
        {
            "residual_l2": sol.residual_l2,
            "terminal_gap": sol.terminal_gap,
            "y0": report["y0"],
            "T": sol.T,
            "picard_iterations": sol.picard_iterations,
            "uniqueness_gap": sol.uniqueness_gap,
            "energy_estimate_slack": sol.energy_slack,
            "l2_norm_ydot": traj.l2_norm_ydot,
            "initial_energy_norm": energy_norm(state),
            "psi_identity_residual": psi.identity_residual,
            "trace_consistency": trace_gap,
        }
    )
    checks = summary["checks"]
    checks["residual"] = sol.residual_l2 <= tol["residual"]
    checks["terminal_gap"] = sol.terminal_gap <= tol["terminal_gap"]
    checks["uniqueness"] = sol.uniqueness_gap is None or sol.uniqueness_gap <= 1e-8
    if sol.energy_slack is not None:
        checks["energy_estimate"] = sol.energy_slack <= tol["energy_slack"]
    checks["trace_consistency"] = trace_gap <= tol["trace"]
    return psi, sol, state


def _forward(sc: Scenario, state, out: Path, summary: dict):
    tol = sc.tolerances
    run = forward_solve(sc.model, state, sc.T_max)
    traj = run.trajectory
    w_in = run.w_in
    write_table(out / "forward.csv", ["y", "ydot", "w_in"], [traj.y, traj.ydot, w_in])
    write_table(out / "profiles.csv", ["f_plus_out", "f_minus_out"], [run.f_plus_out, run.f_minus_out], label="s")
    data = extract_scattering(run, tol=float(tol["convergence"]))
    save_asymptotic_state(out, data.psi_plus, stem="psi_plus")
    write_json(out / "scattering.json", data.report())
    identity = float(np.max(np.abs(data.psi_plus.identity_residual)))
    summary["norms"].update(
        {
            "s_plus": data.s_plus,
            "identity_residual": identity,
            "left_limit_defect": data.left_limit_defect,
            "remainder_final": float(data.remainder_curve.samples[-1, 0]),
        }
    )
    summary["checks"]["identity"] = identity <= tol["identity"]
    return run, data


def run_forward(sc: Scenario, out: Path, summary: dict) -> None:
    _forward(sc, sc.energy_state(), out, summary)


def run_construct(sc: Scenario, out: Path, summary: dict) -> None:
    _construct(sc, out, summary)


def run_roundtrip(sc: Scenario, out: Path, summary: dict) -> None:
    psi, sol, state = _construct(sc, out, summary)
    run, data = _forward(sc, state, out, summary)
    tol = sc.tolerances
    trace_err = (run.y - sol.trajectory.y).sup_norm()
    s_err = float(np.linalg.norm(data.s_plus - sol.s_plus))
    psi_err = asymptotic_distance(data.psi_plus, psi)
    summary["norms"].update(
        {"trajectory_error": trace_err, "s_plus_error": s_err, "psi_energy_error": psi_err}
    )
    checks = summary["checks"]
    checks["trajectory"] = trace_err <= tol["trajectory"]
    checks["s_plus"] = s_err <= tol["s_plus"]
    checks["psi_energy"] = psi_err <= tol["psi_energy"]


def run_counterexample_cmd(sc: Scenario, out: Path, summary: dict) -> None:
    ce = sc.counterexample
    kind = ce.get("kind", "flat")
    try:
        y0 = float(ce.get("y0", 0.0))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad counterexample y0: {exc}") from exc
    if kind not in ("flat", "quadratic", "hyperbolic-control"):
        raise ConfigError(f"unknown counterexample kind {kind!r}")
    if kind != "hyperbolic-control" and not abs(y0) < 0.5:
        raise ConfigError("counterexamples start inside |y0| < 1/2")
    rep = run_counterexample(kind, y0, sc.T_max, sc.h)
    write_table(out / "counterexample.csv", ["y"], [rep.trajectory])
    data = rep.report()
    summary["norms"].update(data)
    checks = summary["checks"]
    if kind == "flat":
        checks["log_fit"] = data["log_fit_spread"] <= sc.tolerances["log_fit"]
    elif kind == "quadratic":
        checks["lower_bound"] = data["lower_bound_margin"] >= -1e-12
        # y >= y0 + ln(1 + t) forces |y| = 1 before exp(1 - y0) - 1
        checks["exits"] = rep.exit_time is not None and rep.exit_time < math.exp(1.0 - y0) - 1.0
    else:
        late = rep.trajectory.window(0.5 * rep.trajectory.t_end, rep.trajectory.t_end).sup_norm()
        summary["norms"]["late_max_abs_y"] = late
        checks["bounded"] = data["max_abs_y"] <= 2.0
        checks["decays"] = late <= 0.2 * data["max_abs_y"]


COMMANDS = {
    "forward": run_forward,
    "construct": run_construct,
    "roundtrip": run_roundtrip,
    "counterexample": run_counterexample_cmd,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lambscatter", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("config", help="scenario JSON file")
        s.add_argument("--grid-step", type=float, help="override grid.h")
        s.add_argument("--t-max", type=float, help="override grid.T_max")
        s.add_argument("--tol", type=float, help="override the Picard tolerance")
        s.add_argument("--out-dir", default="out", help="output directory (default: out)")
        if name == "counterexample":
            s.add_argument("--kind", choices=["flat", "quadratic", "hyperbolic-control"])
            s.add_argument("--y0", type=float)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"command": args.command, "status": "ok", "error_code": None, "error": None, "norms": {}, "checks": {}}
    code = 0
    try:
        sc = load_config(args.config, vars(args))
        summary["tolerances"] = sc.tolerances
        summary["grid"] = {"h": sc.h, "T_max": sc.T_max}
        COMMANDS[args.command](sc, out, summary)
    except ConfigError as exc:
        summary.update(status="config-error", error_code=exc.code, error=str(exc))
        code = 2
    except (LambError, FloatingPointError) as exc:
        summary.update(status="solver-error", error_code=getattr(exc, "code", type(exc).__name__), error=str(exc))
        code = 1
    summary["passed"] = code == 0 and all(summary["checks"].values())
    write_json(out / "summary.json", summary)
    if code:
        print(f"{summary['error_code']}: {summary['error']}", file=sys.stderr)
    else:
        print(json.dumps({"passed": summary["passed"], "checks": summary["checks"]}, sort_keys=True))
    return code


if __name__ == "__main__":
    raise SystemExit(main())
