"""Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned.

Run ``pytest tests/test_acceptance.py`` (the lines are printed even when
output capture is on) or ``python tests/test_acceptance.py``.
"""
import contextlib
import io
import math
import re
import time
from pathlib import Path

import numpy as np
import pytest

from clockgate import cli
from clockgate.analysis import bell_test, phase_gate_concurrence, z_compensated_process_fidelity
from clockgate.dynamics import PropagationSettings, forced_oscillator_oracle, run_gate, wrap_phase
from clockgate.error_budget import p_offresonant, p_total_ground, p_total_metastable
from clockgate.hamiltonians import ModelTier
from clockgate.model import CA43_GAMMA_D, CA43_OMEGA0, branch_force, ca43_design, design_gate, scaled_design, two_pi
from clockgate.sequencer import compose_echo, plain_sequence

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
CA43 = CONFIGS / "ca43_clock.toml"


def _report(capsys, number, title, checks, elapsed, limit):
    """Print the verdict line for one criterion, then assert every check."""
    checks = list(checks) + [(f"runtime {elapsed:.2f} s < {limit:g} s", elapsed < limit)]
    ok = all(passed for _, passed in checks)
    failed = [name for name, passed in checks if not passed]
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}"
    detail = "; ".join(name for name, _ in checks)
    with capsys.disabled():
        print(f"\n{line}\n       {detail}", flush=True)
    assert ok, f"criterion {number} failed: {', '.join(failed)}"


def _run_cli(argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = cli.main(argv)
    return code, out.getvalue(), err.getvalue()


def test_criterion_1_design_reproduction(capsys):
    t0 = time.perf_counter()
    code, out, _ = _run_cli(["design", "--config", str(CA43)])
    elapsed = time.perf_counter() - t0
    g_hz = float(re.search(r"coupling \|g\|\s+= (\S+) rad/s", out).group(1)) / (2 * math.pi)
    t_gate = float(re.search(r"gate time T\s+= (\S+) s", out).group(1))
    ratio = {m.group(1): float(m.group(2)) for m in re.finditer(r"^(check_\w+)\s+= (\S+) /", out, re.M)}
    _report(capsys, 1, "design reproduction", [
        (f"exit {code} == 0", code == 0),
        (f"|g| = 2pi x {g_hz:.6g} Hz within 0.5% of 2.008 MHz", abs(g_hz / 2.008e6 - 1) < 5e-3),
        (f"T = {t_gate!r} s == 0.001", t_gate == 1e-3),
        (f"(I) = {ratio['check_I_up']:.4g} -> 1.24e-3", round(ratio["check_I_up"], 5) == 1.24e-3),
        (f"(II) = {ratio['check_II']:.4g} -> 0.0021", round(ratio["check_II"], 4) == 0.0021),
        (f"(III) = {ratio['check_III']:.4g} -> 0.005", math.isclose(ratio["check_III"], 0.005, rel_tol=1e-9)),
    ], elapsed, 1.0)


def test_criterion_2_oracle_equivalence(capsys):
    rng = np.random.default_rng(20240)
    settings = PropagationSettings(steps_per_fastest_period=256)
    worst = 0.0
    t0 = time.perf_counter()
    for _ in range(20):
        base = ca43_design(delta_loop=two_pi(rng.uniform(500, 2000)), eta=rng.uniform(0.05, 0.2))
        g = rng.uniform(0.5, 1.2) * abs(base.lasers.g_a[0])
        for n_loops in (1, 2, 3):
            d = design_gate(base.encoding, base.trap, base.delta_loop, coupling=g, n_loops=n_loops)
            res = run_gate(d, ModelTier.FORCE, settings, n_max=24)
            c = d.coefficients()
            for branch, (m1, m2) in {"ud": ("up", "down"), "du": ("down", "up")}.items():
                traj = res.trajectories[branch]
                f = branch_force(m1, m2, c, d.trap, d.geometry, d.lasers)
                alpha, phase = forced_oscillator_oracle(f, d.delta_loop, traj.times)
                worst = max(worst, np.max(np.abs(traj.alpha - alpha)), np.max(np.abs(traj.phase - phase)))
    elapsed = time.perf_counter() - t0
    _report(capsys, 2, "FORCE tier vs closed-form oracle (20 draws x 3 loop counts)", [
        (f"max |error| = {worst:.2e} < 1e-7", worst < 1e-7),
    ], elapsed, 30.0)


def test_criterion_3_conditional_phase(capsys):
    t0 = time.perf_counter()
    res = run_gate(ca43_design(), ModelTier.EFFECTIVE, n_max=16)
    fid = z_compensated_process_fidelity(res.qubit_propagator)
    conc = bell_test(res)
    elapsed = time.perf_counter() - t0
    err = abs(res.conditional_phase - math.pi / 2)
    _report(capsys, 3, "EFFECTIVE tier conditional phase at the design point", [
        (f"|phase - pi/2| = {err:.2e} < 1e-4", err < 1e-4),
        (f"motional residual {res.max_motional_residual:.2e} < 1e-6", res.max_motional_residual < 1e-6),
        (f"concurrence {conc:.8f} >= 0.9999", conc >= 0.9999),
        (f"Z-compensated fidelity {fid.process_fidelity_z_compensated:.8f} >= 0.9999",
         fid.process_fidelity_z_compensated >= 0.9999),
    ], elapsed, 60.0)


def _cross_tier_fidelity(coupling_scale):
    d = scaled_design(coupling_scale, include_static_stark=True)
    settings = PropagationSettings(steps_per_fastest_period=16)
    full = run_gate(d, ModelTier.FULL, settings, n_max=14, record_trajectories=False)
    eff = run_gate(d, ModelTier.EFFECTIVE, settings, n_max=14, record_trajectories=False)
    rep = z_compensated_process_fidelity(full.qubit_propagator, eff.qubit_propagator, atol=cli.FULL_UNITARITY_ATOL)
    return rep.process_fidelity_z_compensated, wrap_phase(full.conditional_phase - eff.conditional_phase)


@pytest.mark.slow
def test_criterion_4_cross_tier_convergence(capsys):
    t0 = time.perf_counter()
    f1, dphi1 = _cross_tier_fidelity(1.0)
    f_half, dphi_half = _cross_tier_fidelity(0.5)
    elapsed = time.perf_counter() - t0
    _report(capsys, 4, "FULL vs EFFECTIVE on the scaled parameter set", [
        (f"F(g) = {f1:.6f} >= 0.999 (phase offset {dphi1:+.4f} rad)", f1 >= 0.999),
        (f"F(g/2) = {f_half:.6f} > F(g) (phase offset {dphi_half:+.4f} rad)", f_half > f1),
    ], elapsed, 600.0)


def test_criterion_5_spin_echo(capsys):
    t0 = time.perf_counter()
    d = ca43_design()
    ratio = compose_echo(d).drive_time / plain_sequence(d).drive_time
    echo = run_gate(d, ModelTier.EFFECTIVE, sequence=compose_echo(d), n_max=16)
    # eta = 0.13 keeps the uncompensated Stark phase off a whole number of turns
    stark = ca43_design(eta=0.13, include_static_stark=True)
    with_echo = run_gate(stark, ModelTier.EFFECTIVE, sequence=compose_echo(stark), n_max=16)
    without = run_gate(stark, ModelTier.EFFECTIVE, n_max=16)

    def spread(res):
        # deviation of the branch phases from the pure conditional pattern (0, Phi, Phi, 0)
        pattern = res.conditional_phase * np.array([0, 1, 1, 0])
        dev = np.array([wrap_phase(x) for x in res.branch_phases - pattern])
        return float(np.max(np.abs([wrap_phase(x - dev[0]) for x in dev])))

    s_echo, s_plain = spread(with_echo), spread(without)
    elapsed = time.perf_counter() - t0
    _report(capsys, 5, "spin echo", [
        (f"drive time ratio {ratio!r} == sqrt 2", math.isclose(ratio, math.sqrt(2), rel_tol=1e-12)),
        (f"|phase - pi/2| = {abs(echo.conditional_phase - math.pi / 2):.2e} < 1e-4",
         abs(echo.conditional_phase - math.pi / 2) < 1e-4),
        (f"echo single-ion spread {s_echo:.2e} < 1e-6", s_echo < 1e-6),
        (f"no-echo spread {s_plain:.3g} >= 10 x 1e-6", s_plain >= 10 * max(s_echo, 1e-6)),
    ], elapsed, 120.0)


def test_criterion_6_error_budget(capsys):
    t0 = time.perf_counter()
    p_t = p_total_ground(0.1, CA43_GAMMA_D, CA43_OMEGA0)
    p_off = p_offresonant(two_pi(2e6), CA43_OMEGA0)
    p_meta = p_total_metastable(CA43_GAMMA_D, 100e-6)
    worst_chain = 0.0
    for eta in (0.05, 0.1, 0.2):
        for delta in (two_pi(500), two_pi(1e3), two_pi(4e3)):
            g = math.sqrt(delta * CA43_OMEGA0 / (8 * eta))
            chain = 2 * p_offresonant(g, CA43_OMEGA0) * CA43_GAMMA_D * 2 * math.pi / delta
            worst_chain = max(worst_chain, abs(chain / p_total_ground(eta, CA43_GAMMA_D, CA43_OMEGA0) - 1))
    elapsed = time.perf_counter() - t0
    _report(capsys, 6, "error budget", [
        (f"p_total_ground = {p_t:.4g} within 1e-10 of 7.0e-9", abs(p_t - 7.0e-9) <= 1e-10),
        (f"p_off = {p_off:.4g} within 0.5% of 3.08e-6", abs(p_off / 3.08e-6 - 1) < 5e-3),
        (f"metastable p_T = {p_meta:.4g} within 0.5% of 2.26e-4", abs(p_meta / 2.26e-4 - 1) < 5e-3),
        (f"chain identity relative error {worst_chain:.1e} <= 1e-12", worst_chain <= 1e-12),
    ], elapsed, 1.0)


def test_criterion_7_concurrence_closed_form(capsys):
    t0 = time.perf_counter()
    errors = [abs(phase_gate_concurrence(phi) - abs(math.sin(phi))) for phi in (0, math.pi / 8, math.pi / 4, math.pi / 2)]
    elapsed = time.perf_counter() - t0
    _report(capsys, 7, "concurrence of the phase gate on |++> equals |sin Phi|", [
        (f"max error {max(errors):.1e} < 1e-6", max(errors) < 1e-6),
    ], elapsed, 10.0)


def test_criterion_8_determinism(tmp_path, capsys):
    tmp = Path(tmp_path)
    sweep = tmp / "sweep.toml"
    sweep.write_text('parameter = "gate.delta"\nvalues = [800.0, 1000.0]\n'
                     'observables = ["conditional_phase", "fidelity_z", "concurrence", "p_total", "motional_residual"]\n')
    commands = {
        "design": ["design", "--config", str(CA43)],
        "simulate": ["simulate", "--config", str(CA43), "--echo"],
        "budget": ["budget"],
        "sweep": ["sweep", "--config", str(CA43), "--sweep", str(sweep)],
    }
    checks = []
    t0 = time.perf_counter()
    for name, argv in commands.items():
        outputs = []
        for k in range(2):
            path = tmp / f"{name}{k}.csv"
            code, out, _ = _run_cli([*argv, "--out", str(path)])
            files = path.read_bytes() if path.exists() else b""
            outputs.append((code, out.encode(), files))
        same = outputs[0] == outputs[1] and outputs[0][0] == 0
        checks.append((f"{name} byte-identical", same))
    elapsed = time.perf_counter() - t0
    _report(capsys, 8, "determinism of every subcommand", checks, elapsed, 120.0)


class _NoCapture:
    def disabled(self):
        return contextlib.nullcontext()


if __name__ == "__main__":
    import inspect
    import tempfile

    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            kwargs = {"capsys": _NoCapture()}
            if "tmp_path" in inspect.signature(fn).parameters:
                kwargs["tmp_path"] = Path(tempfile.mkdtemp())
            try:
                fn(**kwargs)
            except AssertionError:
                pass
