"""Invariant suite shared by the ``check`` run mode and the demos."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hilbert import (
    NATURAL,
    Constants,
    build_oscillator,
    build_qubit,
    coherent_state,
    matrix_exponential,
    max_abs,
    projector,
)
from .lattice import LatticeSpec, convergence_study, harmonic_potential
from .monitoring import MonitoringChannel, ReadoutCurve
from .nonselective import (
    MasterEquationSpec,
    build_brownian_oscillator,
    integrate,
    rhs_lindblad_canonical,
    rhs_nonminimal,
    sample_ensemble,
)
from .selective import generalized_unitarity_check, propagate_conditioned


@dataclass(frozen=True)
class CheckResult:
    name: str
    measured: float
    tolerance: float
    passed: bool

    @classmethod
    def below(cls, name, measured, tolerance):
        return cls(name, float(measured), float(tolerance), bool(measured <= tolerance))


def random_hermitian(rng: np.random.Generator, d: int, scale: float = 1.0) -> np.ndarray:
    x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * (x + x.conj().T) / 2


def random_density(rng: np.random.Generator, d: int) -> np.ndarray:
    x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = x @ x.conj().T
    return rho / np.trace(rho).real


def unitarity_deviations(kappa_dts=(0.01, 0.1, 1.0), c: Constants = NATURAL):
    """Worst diagonal and quadrature deviations over ``sz`` and truncated ``p`` (d=16)."""
    ops = {"sz": build_qubit("sz"), "p16": build_oscillator(16, c=c)[1]}
    diag = quad = 0.0
    for A in ops.values():
        for kdt in kappa_dts:
            dt = 0.1
            rep = generalized_unitarity_check(MonitoringChannel(A, kdt / dt), np.zeros_like(A), dt, c)
            diag = max(diag, rep.diagonal_deviation)
            quad = max(quad, rep.quadrature_deviation)
    return diag, quad


def lindblad_form_deviation(n_trials: int = 100, seed: int = 0, c: Constants = NATURAL) -> float:
    """Max entrywise difference of the two non-minimal master-equation forms."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for trial in range(n_trials):
        d = 2 + trial % 5
        H, A, B, C = (random_hermitian(rng, d) for _ in range(4))
        rho = random_density(rng, d)
        ch = MonitoringChannel(A, rng.uniform(0.1, 2), rng.uniform(0.1, 2), B, C)
        diff = rhs_nonminimal(rho, H, [ch], c) - rhs_lindblad_canonical(rho, H, [ch], c)
        worst = max(worst, max_abs(diff))
    return worst


def ehrenfest_deviation(
    d: int = 32, alpha: float = 1.0, kappa: float = 0.1, lam: float = 0.2, t_final: float = 5.0, n_steps: int = 2000
):
    """Finite-difference derivatives of <q>, <p> vs their Ehrenfest right-hand sides.

    Errors are relative to the largest magnitude of the corresponding
    right-hand side over the run. Units ``m = omega = hbar = 1``.
    """
    m = omega = 1.0
    spec = build_brownian_oscillator(d, m, omega, kappa, lam)
    q, p = spec.observables["q"], spec.observables["p"]
    rhos = integrate(projector(coherent_state(d, alpha)), spec, t_final, n_steps)
    h = t_final / n_steps
    eq = np.einsum("ij,tji->t", q, rhos).real
    ep = np.einsum("ij,tji->t", p, rhos).real
    dq = (eq[2:] - eq[:-2]) / (2 * h)
    dp = (ep[2:] - ep[:-2]) / (2 * h)
    rq = ep[1:-1] / m
    rp = -m * omega**2 * eq[1:-1] - lam * omega * ep[1:-1]
    err_q = np.max(np.abs(dq - rq)) / np.max(np.abs(rq))
    err_p = np.max(np.abs(dp - rp)) / np.max(np.abs(rp))
    return float(err_q), float(err_p), rhos


def dephasing_master_error(kappa: float = 1.0, t_final: float = 1.0, n_steps: int = 1000) -> float:
    """Relative error of |rho01| against exp(-2 kappa t) / 2 for qubit dephasing."""
    ch = MonitoringChannel(build_qubit("sz"), kappa)
    spec = MasterEquationSpec(np.zeros((2, 2)), (ch,))
    rhos = integrate(np.full((2, 2), 0.5, dtype=complex), spec, t_final, n_steps)
    t = np.linspace(0, t_final, n_steps + 1)
    exact = 0.5 * np.exp(-2 * kappa * t)
    return float(np.max(np.abs(np.abs(rhos[:, 0, 1]) - exact) / exact))


def unitary_limit_errors(t_final: float = 1.0, n_steps: int = 1000):
    """(state infidelity, density max-entry error) over a qubit and a d=16 oscillator."""
    systems = []
    sx, sz = build_qubit("sx"), build_qubit("sz")
    systems.append((0.5 * sx + 0.3 * sz, sz, np.array([1, 1j]) / np.sqrt(2)))
    q, p, H = build_oscillator(16)
    systems.append((H, q, coherent_state(16, 1.0)))
    infid = dens = 0.0
    dt = t_final / n_steps
    for H, A, psi0 in systems:
        ch = MonitoringChannel(A, 0.0)
        U = matrix_exponential(-1j * H * t_final)
        exact = U @ psi0
        traj = propagate_conditioned(psi0, H, ch, ReadoutCurve.constant(0.0, n_steps, dt))
        infid = max(infid, 1 - abs(np.vdot(exact, traj.states[-1])) ** 2)
        rho0 = projector(psi0)
        rhos = integrate(rho0, MasterEquationSpec(H, (ch,)), t_final, n_steps)
        dens = max(dens, max_abs(rhos[-1] - U @ rho0 @ U.conj().T))
    return float(infid), float(dens)


def ensemble_dephasing_errors(n_traj: int = 10_000, seed: int = 42, n_steps: int = 100, threads: int = 1):
    """|rho01| errors of the sampled ensemble at t = 0.25, 0.5, 1 (kappa = 1)."""
    ch = MonitoringChannel(build_qubit("sz"), 1.0)
    psi0 = np.array([1, 1]) / np.sqrt(2)
    rhos = sample_ensemble(psi0, np.zeros((2, 2)), ch, n_steps, 1.0 / n_steps, n_traj, seed, threads=threads)
    out = {}
    for t in (0.25, 0.5, 1.0):
        k = int(round(t * n_steps))
        out[t] = abs(abs(rhos[k, 0, 1]) - 0.5 * np.exp(-2 * t))
    return out


def lattice_convergence(kappas=(0.0, 0.5), dts=(1 / 25, 1 / 50, 1 / 100, 1 / 200), n_q=101, q_max=5.0):
    """Deviation sequences keyed by ``(potential, kappa)``; readout a = 0."""
    base = LatticeSpec(n_q, q_max, 1, dts[0])
    out = {}
    for name, V in (("free", None), ("harmonic", harmonic_potential(base.grid))):
        spec = LatticeSpec(n_q, q_max, 1, dts[0], potential=V)
        for kappa in kappas:
            out[(name, kappa)] = [r.deviation_max for r in convergence_study(spec, 1.0, dts, kappa)]
    return out


def run_all(threads: int = 1) -> list[CheckResult]:
    res = []
    diag, quad = unitarity_deviations()
    res.append(CheckResult.below("unitarity_diagonal", diag, 0.0))
    res.append(CheckResult.below("unitarity_quadrature", quad, 1e-8))
    res.append(CheckResult.below("a6_equals_a8", lindblad_form_deviation(), 1e-12))
    eq, ep, _ = ehrenfest_deviation()
    res.append(CheckResult.below("ehrenfest_q", eq, 1e-4))
    res.append(CheckResult.below("ehrenfest_p", ep, 1e-4))
    res.append(CheckResult.below("dephasing_master_relerr", dephasing_master_error(), 1e-6))
    infid, dens = unitary_limit_errors()
    res.append(CheckResult.below("unitary_limit_infidelity", infid, 1e-8))
    res.append(CheckResult.below("unitary_limit_density", dens, 1e-8))
    n = 10_000
    for t, err in ensemble_dephasing_errors(n, threads=threads).items():
        res.append(CheckResult.below(f"ensemble_rho01_t{t:g}", err, 5 / np.sqrt(n)))
    for (name, kappa), devs in lattice_convergence().items():
        steps = max(np.diff(devs).max(), 0.0)
        res.append(CheckResult.below(f"lattice_{name}_k{kappa:g}_monotone", steps, 0.0))
        res.append(CheckResult.below(f"lattice_{name}_k{kappa:g}_final", devs[-1], 1e-3))
    return res
