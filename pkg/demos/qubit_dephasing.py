"""
Watching a qubit dephase under continuous sz monitoring
=======================================================

A qubit starts in |+>. Reading out sz continuously with strength kappa
kills the off-diagonal element at rate 2 kappa. We see this three ways:
one conditioned trajectory, an average of sampled trajectories, and the
master equation.
"""
import numpy as np

from rpimon import MonitoringChannel, build_qubit
from rpimon.nonselective import MasterEquationSpec, integrate, sample_ensemble
from rpimon.selective import sample_readout

sz = build_qubit("sz")
H = np.zeros((2, 2))
plus = np.array([1, 1]) / np.sqrt(2)
kappa, t_final, n_steps = 1.0, 1.0, 100
dt = t_final / n_steps
channel = MonitoringChannel(sz, kappa)

# One run: the readout is noisy, and the state drifts toward an eigenstate.
traj = sample_readout(plus, H, channel, n_steps, dt, seed=1)
p = np.abs(traj.states[-1]) ** 2
print("single trajectory, final populations:", np.round(p / p.sum(), 3))
print("readout mean over the run:", round(float(traj.readout.values.mean()), 3))

# Averaging many runs recovers the non-selective state.
rhos = sample_ensemble(plus, H, channel, n_steps, dt, n_traj=4000, seed=1)
exact = integrate(np.outer(plus, plus), MasterEquationSpec(H, (channel,)), t_final, n_steps)

print("\n   t    sampled |rho01|   master |rho01|   exp(-2 kappa t)/2")
for k in (0, 25, 50, 100):
    t = k * dt
    print(f"{t:5.2f}   {abs(rhos[k, 0, 1]):14.4f}   {abs(exact[k, 0, 1]):14.4f}   {0.5 * np.exp(-2 * kappa * t):14.4f}")
