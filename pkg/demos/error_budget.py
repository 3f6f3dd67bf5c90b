"""
Spontaneous emission from the mediator level
============================================

For a ground-state qubit the mediator is only virtually populated, and
with the designed coupling the scattering probability per gate no
longer depends on the coupling or the loop detuning.
"""

from clockgate.error_budget import budget_report, builtin_scenarios

for report in budget_report(builtin_scenarios()):
    s = report.scenario
    verdict = "below" if report.passed else "above"
    quoted = "" if s.quoted is None else f" (literature value {s.quoted:.2g})"
    print(f"{s.label}: p_T = {report.p_total:.3g}{quoted}, {verdict} {report.threshold:g}")
    for step in report.chain[:-1] if len(report.chain) > 1 else ():
        print(f"    {step}")
