"""
Momentum monitoring that looks like Brownian friction
=====================================================

Monitor the momentum of an oscillator while the readout also nudges the
position (the non-minimal term lambda a B with B = omega q). The master
equation then damps <p> at rate lambda omega, and the mean motion obeys
damped Ehrenfest equations.
"""
import numpy as np

from rpimon.hilbert import coherent_state, projector
from rpimon.nonselective import build_brownian_oscillator, expectation_table, integrate

d, kappa, lam = 32, 0.1, 0.2
spec = build_brownian_oscillator(d, kappa=kappa, lam=lam)
rho0 = projector(coherent_state(d, 1.0))
t_final, n_steps = 10.0, 2000
rhos = integrate(rho0, spec, t_final, n_steps)
table = expectation_table(rhos, spec.observables)

print("   t      <q>      <p>      <H>   purity")
for k in range(0, n_steps + 1, 200):
    print(f"{k * t_final / n_steps:5.1f} {table['q'][k]:8.4f} {table['p'][k]:8.4f} {table['H'][k]:8.4f} {table['purity'][k]:8.4f}")

# The envelope of the amplitude should fall as exp(-lam omega t / 2).
amp = np.hypot(table["q"], table["p"])
rate = -np.polyfit(np.linspace(0, t_final, n_steps + 1), np.log(amp), 1)[0]
print(f"\nfitted amplitude decay rate {rate:.4f}, expected {lam / 2:.4f}")
print(f"<H> relaxes from {table['H'][0]:.3f} to {table['H'][-1]:.3f}: friction drains energy, momentum diffusion keeps it above hbar omega / 2")
