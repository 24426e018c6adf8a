"""
Integrating a slice over every readout gives back the identity
==============================================================

A single slice of monitored evolution is not unitary for any fixed readout
value a, but the integral of U(a)^dagger U(a) over all a is the identity.
The check is done with the analytic Gaussian kernel and by quadrature.
"""
import numpy as np

from rpimon import MonitoringChannel, build_oscillator, build_qubit
from rpimon.selective import generalized_unitarity_check

q, p, H = build_oscillator(16)
for label, A, Hs in (("qubit, A = sz", build_qubit("sz"), 0.5 * build_qubit("sx")), ("oscillator, A = p", p, H)):
    for kappa_dt in (0.01, 0.1, 1.0):
        dt = 0.05
        rep = generalized_unitarity_check(MonitoringChannel(A, kappa_dt / dt), Hs, dt)
        print(
            f"{label:18s} kappa dt={kappa_dt:<5g} kernel diag {rep.diagonal_deviation:.1e}  "
            f"quadrature {rep.quadrature_deviation:.1e}  full slice {rep.unitarity_deviation:.1e}"
        )

kernel = generalized_unitarity_check(MonitoringChannel(build_qubit("sz"), 10.0), np.zeros((2, 2)), 0.1).kernel
print("\nqubit kernel at kappa dt = 1 (off-diagonal exp(-2)):")
print(np.round(kernel.real, 4))
