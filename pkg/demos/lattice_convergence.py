"""
Path integral on a grid versus the effective Hamiltonian
========================================================

The restricted path integral for position monitoring is built slice by
slice as transfer matrices. As the slices shrink, the product approaches
the propagator of the non-Hermitian Hamiltonian H - i kappa hbar (q - a)^2.
"""
import numpy as np

from rpimon.lattice import LatticeSpec, convergence_study, harmonic_potential

q = np.linspace(-5, 5, 101)
dts = [1 / 25, 1 / 50, 1 / 100, 1 / 200]


def readout(t):
    return 0.5 * np.sin(2 * np.pi * t)


for name, V in (("free", None), ("harmonic", harmonic_potential(q))):
    spec = LatticeSpec(101, 5.0, 1, dts[0], potential=V)
    for kappa in (0.0, 0.5):
        rows = convergence_study(spec, 1.0, dts, kappa, readout)
        devs = "  ".join(f"{r.deviation_max:.2e}" for r in rows)
        print(f"{name:8s} kappa={kappa:3.1f}: {devs}")

# The continuum short-time kernel aliases on a fixed grid; refining dt makes it worse.
spec = LatticeSpec(101, 5.0, 1, dts[0])
rows = convergence_study(spec, 1.0, dts[:3], 0.5, readout, free="fresnel")
print("\nsampled continuum kernel:", "  ".join(f"{r.deviation_max:.2e}" for r in rows))
