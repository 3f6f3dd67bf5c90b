"""
The phase gate in the effective model
=====================================

Propagate the four computational states through one loop of the
adiabatically eliminated Hamiltonian and score the result against
``diag(1, i, i, 1)``.
"""

from clockgate import ModelTier, ca43_design, run_gate
from clockgate.analysis import fidelity_report

design = ca43_design(include_static_stark=True)
result = run_gate(design, ModelTier.EFFECTIVE, n_max=16)
report = fidelity_report(result)

print(f"conditional phase    {result.conditional_phase:.8f}")
print(f"single-ion phases    {result.single_ion_phases[0]:.4f}, {result.single_ion_phases[1]:.4f}")
print(f"raw fidelity         {report.process_fidelity_raw:.6f}")
print(f"Z-compensated        {report.process_fidelity_z_compensated:.10f}")
print(f"best Z angles        {report.optimal_z_angles[0]:+.4f}, {report.optimal_z_angles[1]:+.4f}")
print(f"concurrence on |++>  {report.bell_concurrence:.10f}")

# a closed loop returns every Fock state, so a warm mode does not matter
warm = run_gate(design, ModelTier.EFFECTIVE, n_max=44, n_bar=0.5, record_trajectories=False)
print(f"thermal n_bar=0.5    concurrence {fidelity_report(warm).bell_concurrence:.10f}")
