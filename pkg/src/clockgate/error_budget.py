"""Spontaneous-emission error budget for the qubit encodings.

Total scattering probability is used as the error figure, which
overestimates the damage done by Rayleigh scattering. Probabilities are
compared against a configurable fault-tolerance reference threshold.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from importlib import resources

import tomli

from .model import Encoding, two_pi

FAULT_TOLERANCE_THRESHOLD = 1e-4
LINEARIZATION_LIMIT = 0.1


class BudgetValidityWarning(UserWarning):
    """A formula was evaluated outside its small-probability regime."""


class FormulaKind(enum.Enum):
    OFF_RESONANT = "off_resonant"
    MEDIATOR_OCCUPIED = "mediator_occupied"
    LITERATURE = "literature"


def p_offresonant(g: float, omega0: float) -> float:
    """Population admixed into the mediator level, ``8 |g|^2 / omega0^2``."""
    if omega0 <= 0:
        raise ValueError("omega0 must be positive")
    if abs(g) >= omega0:
        raise ValueError("p_offresonant requires |g| < omega0")
    p = 8 * abs(g) ** 2 / omega0 ** 2
    if p >= LINEARIZATION_LIMIT:
        warnings.warn(f"p_off = {p:.3g} is outside the perturbative regime", BudgetValidityWarning, stacklevel=2)
    return p


def p_total_ground(eta: float, gamma_d: float, omega0: float) -> float:
    """Scattering probability per gate for a ground-state qubit, ``(4 pi / eta)(gamma_d / omega0)``.

    This is ``2 p_off gamma_d T`` with the design coupling substituted, so it
    depends on neither the coupling nor the loop detuning.
    """
    if eta <= 0 or omega0 <= 0 or gamma_d < 0:
        raise ValueError("eta and omega0 must be positive, gamma_d non-negative")
    return 4 * math.pi / eta * gamma_d / omega0


def p_total_metastable(gamma_d: float, gate_time: float) -> float:
    """``2 gamma_d T``: both ions sit in the decaying manifold for the whole gate."""
    if gamma_d < 0 or gate_time < 0:
        raise ValueError("gamma_d and gate_time must be non-negative")
    if gamma_d * gate_time >= LINEARIZATION_LIMIT:
        raise ValueError(f"gamma_d * T = {gamma_d * gate_time:.3g} >= {LINEARIZATION_LIMIT}; linear estimate invalid")
    return 2 * gamma_d * gate_time


@dataclass(frozen=True)
class BudgetScenario:
    """One encoding and gate timing to be costed.

    ``coupling`` is the Raman coupling magnitude (rad/s); for ground-state
    scenarios ``None`` means the design coupling ``sqrt(delta omega0 / (8 eta))``.
    ``literature_p`` holds a quoted probability for LITERATURE scenarios,
    which are stored rather than derived.
    """

    label: str
    formula_kind: FormulaKind
    gate_time: float | None
    encoding: Encoding | None = None
    coupling: float | None = None
    eta: float | None = None
    n_loops: int = 1
    literature_p: float | None = None
    quoted: float | None = None
    quoted_p_off: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "formula_kind", FormulaKind(self.formula_kind))
        kind = self.formula_kind
        if kind is not FormulaKind.LITERATURE and not (self.gate_time or 0) > 0:
            raise ValueError(f"{self.label}: gate_time must be positive")
        if kind is FormulaKind.OFF_RESONANT and (self.encoding is None or self.eta is None):
            raise ValueError(f"{self.label}: off-resonant scenarios need an encoding and eta")
        if kind is FormulaKind.MEDIATOR_OCCUPIED and self.encoding is None:
            raise ValueError(f"{self.label}: mediator-occupied scenarios need an encoding (for gamma_d)")
        if kind is FormulaKind.LITERATURE and self.literature_p is None:
            raise ValueError(f"{self.label}: literature scenarios need a stored probability")

    @property
    def delta_loop(self) -> float:
        return 2 * math.pi * self.n_loops / self.gate_time

    def resolved_coupling(self) -> float | None:
        if self.coupling is not None or self.formula_kind is not FormulaKind.OFF_RESONANT:
            return self.coupling
        return math.sqrt(self.delta_loop * self.encoding.omega0 / (8 * self.eta))


@dataclass(frozen=True)
class ErrorBudgetReport:
    scenario: BudgetScenario
    p_off: float | None
    p_total: float
    threshold: float
    chain: tuple = field(default=())
    closed_form: float | None = None

    def __post_init__(self):
        for p in (self.p_off, self.p_total):
            if p is not None and not 0 <= p <= 1:
                raise ValueError(f"probability {p} outside [0, 1]")

    @property
    def threshold_ratio(self) -> float:
        return self.p_total / self.threshold

    @property
    def passed(self) -> bool:
        return self.p_total < self.threshold

    @property
    def inputs(self) -> dict:
        s = self.scenario
        out = {"label": s.label, "formula": s.formula_kind.value}
        if s.gate_time is not None:
            out["gate_time_s"] = s.gate_time
        if s.encoding is not None:
            if s.formula_kind is FormulaKind.OFF_RESONANT:
                out["omega0"] = s.encoding.omega0
            out["gamma_d"] = s.encoding.gamma_d
        if s.eta is not None:
            out["eta"] = s.eta
        g = s.resolved_coupling()
        if g is not None:
            out["coupling"] = g
        return out


def scenario_report(s: BudgetScenario, threshold: float = FAULT_TOLERANCE_THRESHOLD) -> ErrorBudgetReport:
    kind = s.formula_kind
    if kind is FormulaKind.LITERATURE:
        return ErrorBudgetReport(s, None, s.literature_p, threshold, ("stored literature value, not derived",))
    gamma = s.encoding.gamma_d
    if kind is FormulaKind.MEDIATOR_OCCUPIED:
        p = p_total_metastable(gamma, s.gate_time)
        return ErrorBudgetReport(s, None, p, threshold, (f"p_T = 2 gamma_d T = 2 x {gamma:.6g} x {s.gate_time:.6g} = {p:.4g}",))

    omega0 = s.encoding.omega0
    g = s.resolved_coupling()
    p_off = p_offresonant(g, omega0)
    p_t = 2 * p_off * gamma * s.gate_time
    chain = [
        f"p_off = 8 |g|^2 / omega0^2 = 8 x {g:.6g}^2 / {omega0:.6g}^2 = {p_off:.4g}",
        f"T = 2 pi n / delta = {s.gate_time:.6g} s",
        f"p_T = 2 p_off gamma_d T = {p_t:.4g}",
    ]
    closed = None
    if s.n_loops == 1:
        closed = p_total_ground(s.eta, gamma, omega0)
        chain.append(f"with |g|^2 = delta omega0 / (8 eta): p_T = (4 pi / eta)(gamma_d / omega0) = {closed:.4g}")
    return ErrorBudgetReport(s, p_off, p_t, threshold, tuple(chain), closed)


def budget_report(scenarios, threshold: float = FAULT_TOLERANCE_THRESHOLD) -> list:
    return [scenario_report(s, threshold) for s in scenarios]


def _freq(table: dict, key: str, default=None):
    """Read ``key`` in rad/s, or ``key_2pi_hz`` in Hz."""
    if f"{key}_2pi_hz" in table:
        return two_pi(float(table[f"{key}_2pi_hz"]))
    if key in table:
        return float(table[key])
    return default


def scenario_from_dict(d: dict) -> BudgetScenario:
    """Build a scenario from a TOML-style table (see ``data/scenarios.toml``)."""
    kind = FormulaKind(d.get("formula", "off_resonant"))
    label = d.get("label", kind.value)
    gamma = _freq(d, "gamma_d", 0.0)
    omega0 = _freq(d, "omega0")
    encoding = Encoding(omega0 if omega0 else 1.0, gamma, label)
    raw = d.get("coupling", d.get("coupling_2pi_hz", "auto"))
    coupling = None if raw == "auto" else _freq(d, "coupling")
    n_loops = int(d.get("n_loops", 1))
    gate_time = d.get("gate_time_s")
    delta = _freq(d, "delta")
    if gate_time is None and delta is not None:
        gate_time = 2 * math.pi * n_loops / delta
    if gate_time is None and kind is not FormulaKind.LITERATURE:
        raise ValueError(f"{label}: gate_time_s or delta is required")
    return BudgetScenario(
        label=label,
        formula_kind=kind,
        gate_time=None if gate_time is None else float(gate_time),
        encoding=encoding if (omega0 or kind is FormulaKind.MEDIATOR_OCCUPIED) else None,
        coupling=coupling,
        eta=d.get("eta"),
        n_loops=n_loops,
        literature_p=d.get("p_total"),
        quoted=d.get("quoted"),
        quoted_p_off=d.get("quoted_p_off"),
    )


def builtin_scenarios() -> list:
    """The three shipped encodings: ground-state clock, metastable D-manifold, optical S-D."""
    text = resources.files("clockgate").joinpath("data/scenarios.toml").read_text()
    return [scenario_from_dict(d) for d in tomli.loads(text)["scenario"]]
