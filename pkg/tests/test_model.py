import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clockgate.hamiltonians import eliminate_excited_numeric
from clockgate.model import (
    CA43_OMEGA0,
    DesignError,
    Encoding,
    GeometryError,
    IonGeometry,
    LaserPair,
    SingularDetuningError,
    TrapMode,
    branch_force,
    ca43_design,
    design_gate,
    discrimination_residual,
    predicted_conditional_phase,
    required_coupling,
    solve_coupling,
    stark_coefficients,
    two_pi,
    validity_report,
)

ENC = Encoding(CA43_OMEGA0, two_pi(0.18), "clock")
TRAP = TrapMode(two_pi(1.2e6), 0.1)


def lasers(g, delta_raman=CA43_OMEGA0 / 2, **kw):
    return LaserPair(g, g, delta_raman, **kw)


def test_theta_antisymmetric_at_half_splitting():
    g = two_pi(2e6)
    c = stark_coefficients(lasers(g), ENC)
    assert c.theta_up == pytest.approx(-2 * g ** 2 / CA43_OMEGA0, rel=1e-12)
    assert c.theta_down == pytest.approx(2 * g ** 2 / CA43_OMEGA0, rel=1e-12)
    assert c.chi_up == pytest.approx(-4 * g ** 2 / CA43_OMEGA0, rel=1e-12)
    assert c.chi_down == pytest.approx(4 * g ** 2 / CA43_OMEGA0, rel=1e-12)
    assert abs(c.theta_up) == pytest.approx(two_pi(2479.9), rel=1e-4)


def test_zero_coupling_gives_zero_coefficients():
    c = stark_coefficients(lasers(0.0), ENC)
    assert (c.chi_up, c.chi_down, c.theta_up, c.theta_down) == (0, 0, 0, 0)


def test_pole_guard():
    g = two_pi(2e6)
    with pytest.raises(SingularDetuningError):
        stark_coefficients(lasers(g, delta_raman=CA43_OMEGA0 + 5 * g), ENC)
    with pytest.raises(SingularDetuningError):
        stark_coefficients(lasers(g, delta_raman=0.0), ENC)


def test_required_coupling_design_point():
    g = required_coupling(two_pi(1e3), TRAP, ENC)
    assert g / (2 * math.pi) == pytest.approx(2.0081e6, rel=1e-4)
    assert required_coupling(two_pi(4e3), TRAP, ENC) == pytest.approx(2 * g, rel=1e-12)


def test_required_coupling_metastable_manifold():
    enc = Encoding(CA43_OMEGA0 / 500)
    g = required_coupling(two_pi(10e3), TrapMode(two_pi(1.2e6), 0.1), enc)
    assert g / (2 * math.pi) == pytest.approx(284e3, rel=2e-3)


def test_residual_examples():
    delta = two_pi(1e3)
    g = required_coupling(delta, TRAP, ENC)
    target = delta / (2 * TRAP.eta)
    assert abs(discrimination_residual(lasers(g), ENC, TRAP, delta)) < 1e-9 * target
    c = stark_coefficients(lasers(g), ENC)
    assert abs(c.theta_up - c.theta_down) == pytest.approx(4 * g ** 2 / CA43_OMEGA0, rel=1e-12)
    r = discrimination_residual(lasers(1.1 * g), ENC, TRAP, delta)
    assert r == pytest.approx(0.21 * target, rel=1e-6)


@settings(max_examples=100, deadline=None)
@given(
    st.floats(0.1e3, 10e3),
    st.floats(0.02, 0.3),
    st.floats(0.1e9, 10e9),
)
def test_residual_inverts_required_coupling(delta_hz, eta, omega0_hz):
    enc, trap = Encoding(two_pi(omega0_hz)), TrapMode(two_pi(50 * delta_hz), eta)
    delta = two_pi(delta_hz)
    g = required_coupling(delta, trap, enc)
    r = discrimination_residual(lasers(g, enc.omega0 / 2), enc, trap, delta)
    assert abs(r) <= 1e-9 * delta / (2 * eta)


def test_solve_coupling_off_optimum_matches_scan():
    delta = two_pi(1e3)
    dr = CA43_OMEGA0 / 4
    g = solve_coupling(ENC, TRAP, delta, dr)
    assert abs(discrimination_residual(lasers(g, dr), ENC, TRAP, delta)) < 1e-9 * delta / (2 * TRAP.eta)
    # brute force: LHS = g^2 |1/dr - 1/(dr - omega0)|, scanned on a fine grid
    scan = np.linspace(0.5, 2.0, 200001) * g
    lhs = scan ** 2 * abs(1 / dr - 1 / (dr - CA43_OMEGA0))
    best = scan[np.argmin(np.abs(lhs - delta / (2 * TRAP.eta)))]
    assert best == pytest.approx(g, rel=1e-5)
    # closed form at omega0/4: |g|^2 = 3 delta omega0 / (32 eta)
    assert g ** 2 == pytest.approx(3 * delta * CA43_OMEGA0 / (32 * TRAP.eta), rel=1e-12)


def test_validity_report_design_point():
    rep = validity_report(ca43_design())
    assert rep.check_I_up.value == pytest.approx(1.245e-3, rel=2e-3)
    assert rep.check_I_down.value == pytest.approx(1.245e-3, rel=2e-3)
    assert rep.check_II.value == pytest.approx(0.002, rel=0.05)
    assert rep.check_III.value == pytest.approx(0.005, rel=1e-12)
    assert rep.all_passed
    assert validity_report(ca43_design(), n_bar=20).check_III.passed is False


def test_branch_force_examples():
    d = ca43_design()
    c = d.coefficients()
    f = lambda a, b: branch_force(a, b, c, d.trap, d.geometry, d.lasers)  # noqa: E731
    assert f("up", "up") == 0 and f("down", "down") == 0
    g = abs(d.lasers.g_a[0])
    assert abs(f("up", "down")) == pytest.approx(4 * d.trap.eta * g ** 2 / CA43_OMEGA0, rel=1e-12)
    assert abs(f("up", "down")) / d.delta_loop == pytest.approx(0.5, rel=1e-9)
    assert f("up", "down") == -f("down", "up")


def test_branch_force_requires_spacing():
    d = ca43_design()
    geom = IonGeometry.from_spacing_phase(2 * math.pi)
    with pytest.raises(GeometryError):
        branch_force("up", "down", d.coefficients(), d.trap, geom, d.lasers)


def test_design_invariants():
    with pytest.raises(DesignError):
        design_gate(ENC, TRAP, TRAP.nu / 10)
    with pytest.raises(GeometryError):
        replace(ca43_design(), geometry=IonGeometry.from_spacing_phase(0.5))
    with pytest.raises(DesignError):
        TrapMode(1.0, 1.5)
    with pytest.raises(DesignError):
        Encoding(-1.0)


def test_predicted_phase_scales_as_g_to_fourth():
    d = ca43_design()
    assert predicted_conditional_phase(d) == pytest.approx(math.pi / 2, rel=1e-12)
    g = abs(d.lasers.g_a[0])
    d2 = design_gate(d.encoding, d.trap, d.delta_loop, coupling=2 * g)
    assert predicted_conditional_phase(d2) == pytest.approx(16 * math.pi / 2, rel=1e-9)


def test_numeric_elimination_matches_coefficients():
    # scaled units keep g/Delta explicit: corrections are O((g/Delta)^2)
    enc = Encoding(200.0)
    for g in (1.0, 2.0, 4.0):
        las = LaserPair(g, 0.7 * g, 100.0)
        d = replace(design_gate(enc, TrapMode(1.0, 0.1), 0.02, delta_raman=100.0, coupling=g), lasers=las)
        exact = eliminate_excited_numeric(d)
        approx = stark_coefficients(las, enc)
        eps = (g / 100.0) ** 2
        for name in ("chi_up", "chi_down", "theta_up", "theta_down"):
            a, b = getattr(exact, name), getattr(approx, name)
            assert abs(a - b) <= 4 * eps * abs(b)
