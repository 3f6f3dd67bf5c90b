"""Command-line front end: ``clockgate {design,simulate,budget,sweep}``.

Configs are TOML files with the sections ``encoding``, ``trap``, ``lasers``,
``gate``, ``geometry`` (optional), ``sim`` and ``output``. A frequency key
``name`` may be given in rad/s or as ``name_2pi_hz`` in Hz.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import tomli
import tomli_w

from . import analysis, error_budget
from .dynamics import ConvergenceError, PropagationSettings, run_gate, thermal_weights
from .hamiltonians import ModelTier
from .model import (
    DesignError,
    Encoding,
    GeometryError,
    SingularDetuningError,
    TrapMode,
    design_gate,
    predicted_conditional_phase,
    validity_report,
)
from .qcore import DimensionError, TruncationError
from .sequencer import compose_echo

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

# known keys per section; frequency keys also accept the _2pi_hz form
SCHEMA = {
    "encoding": {"omega0": "freq", "gamma_d": "freq", "label": "str"},
    "trap": {"nu_cm": "freq", "eta": "float", "mode_kind": "str"},
    "lasers": {"g": "freq", "delta_raman": "freq", "phi_a": "float", "phi_b": "float", "dkz": "float"},
    "gate": {"delta": "freq", "n_loops": "int", "echo": "bool", "include_static_stark": "bool"},
    "geometry": {"spacing_phase": "float"},
    "sim": {"tier": "str", "n_max": "int", "steps_per_fastest_period": "int", "initial": "str", "n_bar": "float", "method": "str", "record_stride": "int"},
    "output": {"trajectory_csv": "str", "report": "str"},
}
OBSERVABLES = ("conditional_phase", "fidelity_z", "concurrence", "p_total", "motional_residual")
FULL_SWEEP_CAP = 32
# the qubit/vacuum block of the three-level model loses a little norm to
# residual displacement and to e, so its unitarity check is looser
FULL_UNITARITY_ATOL = 1e-2
TRAJECTORY_HEADER = ["t_s", "branch", "re_alpha", "im_alpha", "phase_rad", "n_mean", "norm_err"]


class ConfigError(ValueError):
    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path


@dataclass(frozen=True)
class RunConfig:
    design: object
    tier: ModelTier
    n_max: int
    settings: PropagationSettings
    n_bar: float
    echo: bool
    trajectory_csv: str | None
    report: str | None
    raw: dict


# ---------------------------------------------------------------- config

def load_toml(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomli.load(fh)
    except FileNotFoundError:
        raise ConfigError(path, "file not found") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(path, f"invalid TOML ({exc})") from None


def _section(cfg: dict, name: str, required: bool = True) -> dict:
    sec = cfg.get(name)
    if sec is None:
        if required:
            raise ConfigError(name, "required section missing")
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(name, "must be a table")
    return sec


def _get(sec: dict, section: str, key: str, default=..., kind: str = "float"):
    """Fetch ``section.key``; frequency keys may carry the ``_2pi_hz`` suffix."""
    path = f"{section}.{key}"
    hz_key = f"{key}_2pi_hz"
    if kind == "freq" and key in sec and hz_key in sec:
        raise ConfigError(path, f"give either {key} or {hz_key}, not both")
    if kind == "freq" and hz_key in sec:
        value, scale, path = sec[hz_key], 2 * math.pi, f"{section}.{hz_key}"
    elif key in sec:
        value, scale = sec[key], 1.0
    elif default is ...:
        raise ConfigError(path, "required")
    else:
        return default
    if isinstance(value, str):
        return value
    try:
        if kind == "int":
            if isinstance(value, bool) or int(value) != value:
                raise ValueError
            return int(value)
        if kind == "bool":
            if not isinstance(value, bool):
                raise ValueError
            return value
        return float(value) * scale
    except (TypeError, ValueError):
        raise ConfigError(path, f"expected {kind if kind != 'freq' else 'a number'}, got {value!r}") from None


def _parse_initial(sim: dict) -> float:
    initial = str(sim.get("initial", "ground")).strip()
    if initial == "ground":
        return 0.0
    if initial == "thermal":
        return _get(sim, "sim", "n_bar")
    if initial.startswith("thermal(") and initial.endswith(")"):
        try:
            return float(initial[8:-1])
        except ValueError:
            pass
    raise ConfigError("sim.initial", f"expected 'ground' or 'thermal(n_bar)', got {initial!r}")


def resolve_config(cfg: dict, tier: str | None = None, echo: bool | None = None) -> RunConfig:
    """Validate a config dictionary and build the gate design and run options."""
    for name, sec in cfg.items():
        if name not in SCHEMA:
            raise ConfigError(name, "unknown section")
        known = SCHEMA[name]
        for key in sec:
            base = key[: -len("_2pi_hz")] if key.endswith("_2pi_hz") else key
            if base not in known or (base != key and known[base] != "freq"):
                raise ConfigError(f"{name}.{key}", "unknown key")

    enc = _section(cfg, "encoding")
    trap = _section(cfg, "trap")
    lasers = _section(cfg, "lasers")
    gate = _section(cfg, "gate")
    geom = _section(cfg, "geometry", required=False)
    sim = _section(cfg, "sim", required=False)
    out = _section(cfg, "output", required=False)

    try:
        encoding = Encoding(
            _get(enc, "encoding", "omega0", kind="freq"),
            _get(enc, "encoding", "gamma_d", 0.0, kind="freq"),
            str(enc.get("label", "")),
        )
    except DesignError as exc:
        raise ConfigError("encoding", str(exc)) from None
    try:
        trap_mode = TrapMode(
            _get(trap, "trap", "nu_cm", kind="freq"),
            _get(trap, "trap", "eta"),
            str(trap.get("mode_kind", "cm")),
        )
    except DesignError as exc:
        raise ConfigError("trap", str(exc)) from None

    delta = _get(gate, "gate", "delta", kind="freq")
    delta_raman = _get(lasers, "lasers", "delta_raman", "optimal", kind="freq")
    if isinstance(delta_raman, str):
        if delta_raman != "optimal":
            raise ConfigError("lasers.delta_raman", f"expected 'optimal' or a number, got {delta_raman!r}")
        delta_raman = None
    g = _get(lasers, "lasers", "g", "auto", kind="freq")
    if isinstance(g, str):
        if g != "auto":
            raise ConfigError("lasers.g", f"expected 'auto' or a number, got {g!r}")
        g = None
    n_loops = _get(gate, "gate", "n_loops", 1, kind="int")
    if n_loops < 1:
        raise ConfigError("gate.n_loops", "must be >= 1")

    try:
        design = design_gate(
            encoding,
            trap_mode,
            delta,
            delta_raman=delta_raman,
            coupling=g,
            n_loops=n_loops,
            include_static_stark=_get(gate, "gate", "include_static_stark", False, kind="bool"),
            phi_a=_get(lasers, "lasers", "phi_a", 0.0),
            phi_b=_get(lasers, "lasers", "phi_b", 0.0),
            dkz=_get(lasers, "lasers", "dkz", 1.0),
            spacing_phase=_get(geom, "geometry", "spacing_phase", math.pi),
        )
    except (DesignError, GeometryError, SingularDetuningError) as exc:
        raise ConfigError("design", str(exc)) from None

    tier_name = tier or sim.get("tier", "effective")
    try:
        tier_value = ModelTier(tier_name)
    except ValueError:
        raise ConfigError("sim.tier", f"expected force, effective or full, got {tier_name!r}") from None
    try:
        settings = PropagationSettings(
            steps_per_fastest_period=_get(sim, "sim", "steps_per_fastest_period", 64, kind="int"),
            record_stride=_get(sim, "sim", "record_stride", 1, kind="int"),
            method=str(sim.get("method", "magnus4")),
        )
    except ValueError as exc:
        raise ConfigError("sim", str(exc)) from None
    n_max = _get(sim, "sim", "n_max", 20, kind="int")
    if n_max < 2:
        raise ConfigError("sim.n_max", "must be >= 2")
    n_bar = _parse_initial(sim)
    try:
        thermal_weights(n_bar)
    except ValueError as exc:
        raise ConfigError("sim.initial", str(exc)) from None

    return RunConfig(
        design=design,
        tier=tier_value,
        n_max=n_max,
        settings=settings,
        n_bar=n_bar,
        echo=_get(gate, "gate", "echo", False, kind="bool") if echo is None else echo,
        trajectory_csv=out.get("trajectory_csv"),
        report=out.get("report"),
        raw=cfg,
    )


# ---------------------------------------------------------------- formatting

def _fmt(x) -> str:
    return f"{x:.12g}"


def _hz(x: float) -> str:
    return f"2pi x {x / (2 * math.pi):.6g} Hz"


def design_block(run: RunConfig) -> dict:
    """Fully resolved config that reproduces this design when fed back to ``simulate``."""
    d = run.design
    raw = run.raw
    return {
        "encoding": {"omega0": d.encoding.omega0, "gamma_d": d.encoding.gamma_d, "label": d.encoding.label},
        "trap": {"nu_cm": d.trap.nu, "eta": d.trap.eta, "mode_kind": d.trap.mode_kind},
        "lasers": {
            "g": abs(d.lasers.g_a[0]),
            "delta_raman": d.lasers.delta_raman,
            "phi_a": d.lasers.phi_a,
            "phi_b": d.lasers.phi_b,
            "dkz": d.lasers.dkz,
        },
        "gate": {
            "delta": d.delta_loop,
            "n_loops": d.n_loops,
            "echo": run.echo,
            "include_static_stark": d.include_static_stark,
        },
        "geometry": {"spacing_phase": d.geometry.spacing_phase(d.lasers.dkz)},
        "sim": {**raw.get("sim", {}), "tier": run.tier.value},
    }


def _ground_budget(design) -> error_budget.ErrorBudgetReport:
    scenario = error_budget.BudgetScenario(
        label=design.encoding.label or "design",
        formula_kind=error_budget.FormulaKind.OFF_RESONANT,
        gate_time=design.gate_time,
        encoding=design.encoding,
        coupling=abs(design.lasers.g_a[0]),
        eta=design.trap.eta,
        n_loops=design.n_loops,
    )
    return error_budget.scenario_report(scenario)


def render_design(run: RunConfig) -> str:
    d = run.design
    rep = validity_report(d)
    budget = _ground_budget(d)
    lines = [
        "# gate design",
        f"coupling |g|        = {_fmt(abs(d.lasers.g_a[0]))} rad/s  ({_hz(abs(d.lasers.g_a[0]))})",
        f"raman detuning      = {_fmt(d.lasers.delta_raman)} rad/s  ({_hz(d.lasers.delta_raman)})",
        f"loop detuning delta = {_fmt(d.delta_loop)} rad/s  ({_hz(d.delta_loop)})",
        f"gate time T         = {_fmt(d.gate_time)} s  ({d.n_loops} loop{'s' if d.n_loops > 1 else ''})",
        f"predicted phase     = {_fmt(predicted_conditional_phase(d))} rad  (pi/2 = {_fmt(math.pi / 2)})",
        "# validity (ratio / bound)",
    ]
    for name, check in rep.items():
        lines.append(f"{name:<13} = {check.value:.6g} / {check.bound:g}  {'ok' if check.passed else 'VIOLATED'}")
    lines.append("# spontaneous emission (ground-state formula)")
    lines.append(f"p_off = {budget.p_off:.4g}  p_T = {budget.p_total:.4g}  threshold ratio = {budget.threshold_ratio:.3g}")
    lines.append("# resolved config (rad/s); paste into a config file to reproduce")
    lines.append(tomli_w.dumps(design_block(run)).rstrip())
    return "\n".join(lines) + "\n"


def render_simulation(run: RunConfig, result, fid) -> str:
    lines = [
        "# gate simulation",
        f"tier                  = {result.tier.value}",
        f"echo                  = {str(run.echo).lower()}",
        f"total_time            = {_fmt(result.total_time)}",
        f"conditional_phase     = {_fmt(result.conditional_phase)}",
        f"phase_error           = {_fmt(fid.conditional_phase_error)}",
        f"single_ion_phases     = {_fmt(result.single_ion_phases[0])}, {_fmt(result.single_ion_phases[1])}",
        f"branch_phases         = {', '.join(_fmt(p) for p in result.branch_phases)}",
        f"fidelity_raw          = {_fmt(fid.process_fidelity_raw)}",
        f"fidelity_z            = {_fmt(fid.process_fidelity_z_compensated)}",
        f"z_angles              = {_fmt(fid.optimal_z_angles[0])}, {_fmt(fid.optimal_z_angles[1])}",
        f"concurrence           = {_fmt(fid.bell_concurrence)}",
        f"motional_residual     = {_fmt(result.max_motional_residual)}",
        f"loop_closed           = {str(result.loop_closed).lower()}",
    ]
    if result.tier is ModelTier.FULL:
        lines.append(f"leakage               = {_fmt(result.leakage)}")
    if fid.flag:
        lines.append(f"flag                  = {fid.flag}")
    return "\n".join(lines) + "\n"


def trajectory_rows(result):
    """Rows of the trajectory CSV, time-major with branches in uu, ud, du, dd order."""
    trajs = result.trajectories
    branches = [b for b in ("uu", "ud", "du", "dd") if b in trajs]
    if not branches:
        return
    n = len(trajs[branches[0]].times)
    for k in range(n):
        for b in branches:
            tr = trajs[b]
            yield [_fmt(tr.times[k]), b, _fmt(tr.alpha[k].real), _fmt(tr.alpha[k].imag),
                   _fmt(tr.phase[k]), _fmt(tr.n_mean[k]), _fmt(tr.norm_err[k])]


def write_csv(path: str | None, header, rows, stream=None):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    text = buf.getvalue()
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        (stream or sys.stdout).write(text)


# ---------------------------------------------------------------- commands

def simulate(run: RunConfig, record_trajectories: bool = False):
    sequence = compose_echo(run.design) if run.echo else None
    result = run_gate(
        run.design,
        run.tier,
        run.settings,
        sequence=sequence,
        n_max=run.n_max,
        n_bar=run.n_bar,
        record_trajectories=record_trajectories,
    )
    atol = FULL_UNITARITY_ATOL if run.tier is ModelTier.FULL else 1e-6
    fid = analysis.fidelity_report(result, atol=atol)
    return result, fid


def cmd_design(args) -> int:
    run = resolve_config(load_toml(args.config), tier=args.tier, echo=args.echo or None)
    text = render_design(run)
    _emit(text, args.out or run.report)
    return EXIT_OK


def cmd_simulate(args) -> int:
    run = resolve_config(load_toml(args.config), tier=args.tier, echo=args.echo or None)
    traj_path = args.out or run.trajectory_csv
    start = time.perf_counter()
    result, fid = simulate(run, record_trajectories=bool(traj_path))
    wall = time.perf_counter() - start
    if traj_path:
        write_csv(traj_path, TRAJECTORY_HEADER, trajectory_rows(result))
    _emit(render_simulation(run, result, fid), run.report)
    print(
        f"conditional_phase={_fmt(result.conditional_phase)} fidelity_z_compensated={_fmt(fid.process_fidelity_z_compensated)} "
        f"concurrence={_fmt(fid.bell_concurrence)} motional_residual={result.max_motional_residual:.3g} wall_time_s={wall:.2f}",
        file=sys.stderr,
    )
    return EXIT_OK


def render_budget(reports) -> str:
    header = ["scenario", "formula", "p_off", "p_total", "quoted", "ratio", "verdict"]
    rows = [header]
    for r in reports:
        s = r.scenario
        rows.append([
            s.label,
            s.formula_kind.value,
            "-" if r.p_off is None else f"{r.p_off:.3g}",
            f"{r.p_total:.3g}",
            "-" if s.quoted is None else f"{s.quoted:.3g}",
            f"{r.threshold_ratio:.3g}",
            "PASS" if r.passed else "FAIL",
        ])
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
    if reports:
        lines.append(f"threshold = {reports[0].threshold:g}")
    for r in reports:
        if len(r.chain) > 1:
            lines.append(f"# {r.scenario.label}")
            lines.extend(f"  {step}" for step in r.chain)
    return "\n".join(lines) + "\n"


def budget_csv_rows(reports):
    for r in reports:
        s = r.scenario
        yield [s.label, s.formula_kind.value, "" if r.p_off is None else _fmt(r.p_off), _fmt(r.p_total),
               "" if s.quoted is None else _fmt(s.quoted), _fmt(r.threshold_ratio), "PASS" if r.passed else "FAIL"]


def cmd_budget(args) -> int:
    threshold = error_budget.FAULT_TOLERANCE_THRESHOLD
    scenarios = error_budget.builtin_scenarios()
    if args.config:
        cfg = load_toml(args.config)
        threshold = float(cfg.get("threshold", threshold))
        if "scenario" in cfg:
            try:
                scenarios = [error_budget.scenario_from_dict(d) for d in cfg["scenario"]]
            except (ValueError, KeyError) as exc:
                raise ConfigError("scenario", str(exc)) from None
    reports = error_budget.budget_report(scenarios, threshold)
    sys.stdout.write(render_budget(reports))
    if args.out:
        write_csv(args.out, ["scenario", "formula", "p_off", "p_total", "quoted", "threshold_ratio", "verdict"], budget_csv_rows(reports))
    return EXIT_OK


# ---------------------------------------------------------------- sweeps

@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple
    observables: tuple
    max_full_points: int = FULL_SWEEP_CAP
    workers: int | None = None


def load_sweep(path: str) -> SweepSpec:
    raw = load_toml(path)
    if "parameter" not in raw:
        raise ConfigError("sweep.parameter", "required")
    if "values" in raw:
        values = raw["values"]
        if not isinstance(values, list):
            raise ConfigError("sweep.values", "must be a list")
    elif "linspace" in raw:
        ls = raw["linspace"]
        try:
            values = np.linspace(float(ls["start"]), float(ls["stop"]), int(ls["count"])).tolist()
        except (KeyError, TypeError, ValueError):
            raise ConfigError("sweep.linspace", "needs start, stop and count") from None
    else:
        raise ConfigError("sweep.values", "give values or linspace")
    if len(values) < 2:
        raise ConfigError("sweep.values", "a sweep needs at least 2 points")
    observables = tuple(raw.get("observables", ["conditional_phase"]))
    for o in observables:
        if o not in OBSERVABLES:
            raise ConfigError("sweep.observables", f"unknown observable {o!r}; choose from {', '.join(OBSERVABLES)}")
    return SweepSpec(
        parameter=str(raw["parameter"]),
        values=tuple(values),
        observables=observables,
        max_full_points=int(raw.get("max_full_points", FULL_SWEEP_CAP)),
        workers=raw.get("workers"),
    )


def set_parameter(cfg: dict, path: str, value) -> dict:
    """Copy of ``cfg`` with the dotted ``path`` set to ``value``.

    If the config stores the key with the ``_2pi_hz`` suffix, the value is
    taken in the same units; otherwise it is taken as given.
    """
    parts = path.split(".")
    if len(parts) != 2:
        raise ConfigError(path, "parameter path must look like section.key")
    section, key = parts
    base = key[: -len("_2pi_hz")] if key.endswith("_2pi_hz") else key
    if section not in SCHEMA or base not in SCHEMA[section]:
        raise ConfigError(path, "does not name a config field")
    out = copy.deepcopy(cfg)
    sec = out.setdefault(section, {})
    hz_key = f"{base}_2pi_hz"
    if key == base and key not in sec and hz_key in sec:
        key = hz_key
    # drop the other spelling so the two never conflict
    for other in (base, hz_key):
        if other != key:
            sec.pop(other, None)
    sec[key] = value
    return out


def _sweep_point(args):
    cfg, tier, echo, observables = args
    run = resolve_config(cfg, tier=tier, echo=echo)
    row = {}
    if "p_total" in observables:
        row["p_total"] = _ground_budget(run.design).p_total
    if set(observables) - {"p_total"}:
        result, fid = simulate(run)
        row["conditional_phase"] = result.conditional_phase
        row["fidelity_z"] = fid.process_fidelity_z_compensated
        row["concurrence"] = fid.bell_concurrence
        row["motional_residual"] = result.max_motional_residual
    return [row[o] for o in observables]


def cmd_sweep(args) -> int:
    if not args.sweep:
        raise ConfigError("--sweep", "required")
    cfg = load_toml(args.config)
    spec = load_sweep(args.sweep)
    configs = [set_parameter(cfg, spec.parameter, v) for v in spec.values]
    # validate every point before spending time on any of them
    runs = [resolve_config(c, tier=args.tier, echo=args.echo or None) for c in configs]
    if runs[0].tier is ModelTier.FULL and len(runs) > spec.max_full_points:
        raise ConfigError("sweep.values", f"{len(runs)} points exceed the FULL-tier cap of {spec.max_full_points}; raise max_full_points to override")
    tasks = [(c, args.tier, args.echo or None, spec.observables) for c in configs]
    workers = spec.workers or min(len(tasks), os.cpu_count() or 1)
    start = time.perf_counter()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, tasks))
    else:
        results = [_sweep_point(t) for t in tasks]
    rows = [[_fmt(float(v))] + [_fmt(x) for x in r] for v, r in zip(spec.values, results)]
    write_csv(args.out, [spec.parameter, *spec.observables], rows)
    print(f"sweep: {len(rows)} points, wall_time_s={time.perf_counter() - start:.2f}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------- entry point

def _emit(text: str, path: str | None):
    sys.stdout.write(text)
    if path:
        with open(path, "w") as fh:
            fh.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clockgate", description="Design, simulate and cost the Stark-shift phase gate.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, metavar="PATH", help="TOML run configuration")
        p.add_argument("--tier", choices=[t.value for t in ModelTier], help="override sim.tier")
        p.add_argument("--echo", action="store_true", help="use the spin-echo schedule")
        p.add_argument("--out", metavar="PATH", help="output file (report, trajectory CSV or sweep CSV)")
        return p

    common(sub.add_parser("design", help="solve the coupling and print the design report")).set_defaults(func=cmd_design)
    common(sub.add_parser("simulate", help="propagate the gate and report figures of merit")).set_defaults(func=cmd_simulate)
    common(sub.add_parser("budget", help="spontaneous-emission budget table"), config_required=False).set_defaults(func=cmd_budget)
    sw = common(sub.add_parser("sweep", help="sweep one config field and write CSV"))
    sw.add_argument("--sweep", metavar="PATH", required=True, help="TOML sweep specification")
    sw.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TruncationError, ConvergenceError, DimensionError, FloatingPointError, np.linalg.LinAlgError,
            analysis.UnclosedLoopError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
