"""Readout-conditioned evolution under the effective Schrödinger equation.

Each time slice of length ``dt`` applies a symmetric split::

    U_half  ->  exp(-kappa dt (A - a_k)**2)  ->  exp(-i lam a_k B dt / hbar)  ->  U_half

with ``U_half = exp(-i (H + C) dt / 2 hbar)``. The measurement factor is
applied exactly in the eigenbasis of ``A``. The readout-dependent phase
comes after the measurement factor: the readout kick acts on the state the
readout was obtained from, which is the ordering whose ensemble average
yields the anticommutator term of the non-minimal master equation.

States are never renormalized. With the readout measure
``prod_k sqrt(2 kappa dt / pi) da_k`` the squared norm of the final state is
the probability density of the readout.
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .hilbert import NATURAL, Constants, as_operator, matrix_exponential, max_abs
from .monitoring import MonitoringChannel, ReadoutCurve

NORM_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class ConditionedTrajectory:
    times: np.ndarray
    states: np.ndarray  # (n_steps + 1, d), unnormalized
    readout: ReadoutCurve

    @property
    def norms2(self) -> np.ndarray:
        return np.sum(np.abs(self.states) ** 2, axis=1)

    @property
    def final_probability_density(self) -> float:
        return float(self.norms2[-1])

    def to_csv(self, header: str | None = None) -> str:
        """Columns ``t, norm2, re_amp_*, im_amp_*, a``; ``a`` is empty on the last row."""
        d = self.states.shape[1]
        out = io.StringIO()
        if header:
            out.write(f"# {header}\n")
        cols = ["t", "norm2"] + [f"re_amp_{i}" for i in range(d)] + [f"im_amp_{i}" for i in range(d)] + ["a"]
        out.write(",".join(cols) + "\n")
        a = self.readout.values
        for k, (t, n2, psi) in enumerate(zip(self.times, self.norms2, self.states)):
            fields = [t, n2, *psi.real, *psi.imag]
            line = ",".join(f"{x:.17g}" for x in fields)
            out.write(line + "," + (f"{a[k]:.17g}" if k < len(a) else "") + "\n")
        return out.getvalue()


class SliceStepper:
    """Precomputed factors of one Strang slice for a fixed ``(H, channel, dt)``."""

    def __init__(self, H, ch: MonitoringChannel, dt: float, c: Constants = NATURAL):
        H = as_operator(H, "H")
        if H.shape != ch.A.shape:
            raise ValueError(f"H has shape {H.shape}, channel has {ch.A.shape}")
        if not dt > 0:
            raise ValueError(f"dt must be > 0, got {dt}")
        self.ch, self.dt, self.hbar = ch, dt, c.hbar
        self.half = matrix_exponential(-0.5j * dt / c.hbar * (H + ch.C_or_zero))
        self.half_T = self.half.T.copy()
        self.eigvals, V = ch.eig_A
        self.V_conj, self.V_T = V.conj(), V.T.copy()
        if ch.lam != 0:
            self.b_vals, W = ch.eig_B
            self.W_conj, self.W_T = W.conj(), W.T.copy()

    def leading(self, psi: np.ndarray) -> np.ndarray:
        return psi @ self.half_T

    def measure(self, psi: np.ndarray, a: np.ndarray) -> np.ndarray:
        """Measurement factor then readout phase, for a batch of rows ``psi``."""
        coef = psi @ self.V_conj
        coef *= np.exp(-self.ch.kappa * self.dt * (self.eigvals[None, :] - a[:, None]) ** 2)
        psi = coef @ self.V_T
        if self.ch.lam != 0:
            phase = np.exp(-1j * self.ch.lam * self.dt / self.hbar * a[:, None] * self.b_vals[None, :])
            psi = ((psi @ self.W_conj) * phase) @ self.W_T
        return psi

    def trailing(self, psi: np.ndarray) -> np.ndarray:
        return psi @ self.half_T

    def step(self, psi: np.ndarray, a: np.ndarray) -> np.ndarray:
        return self.trailing(self.measure(self.leading(psi), a))


def _check_initial(psi0, d: int) -> np.ndarray:
    psi0 = np.asarray(psi0, dtype=complex).ravel()
    if psi0.shape != (d,):
        raise ValueError(f"initial state has dimension {psi0.shape[0]}, operators have {d}")
    if abs(np.vdot(psi0, psi0).real - 1) > NORM_TOL:
        raise ValueError("initial state must be normalized")
    return psi0


def propagate_conditioned(
    psi0, H, ch: MonitoringChannel, readout: ReadoutCurve, c: Constants = NATURAL
) -> ConditionedTrajectory:
    """Evolve ``psi0`` conditioned on a given readout; records every state."""
    stepper = SliceStepper(H, ch, readout.dt, c)
    psi = _check_initial(psi0, ch.dim)[None, :]
    states = np.empty((len(readout) + 1, ch.dim), dtype=complex)
    states[0] = psi[0]
    for k, a in enumerate(readout.values):
        psi = stepper.step(psi, np.array([a]))
        states[k + 1] = psi[0]
    times = readout.t0 + readout.dt * np.arange(len(readout) + 1)
    return ConditionedTrajectory(times, states, readout)


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """PCG64 stream for trajectory ``index``: ``SeedSequence(seed, spawn_key=(index,))``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def _draws(seed: int, indices, n_steps: int):
    u = np.empty((len(indices), n_steps))
    z = np.empty((len(indices), n_steps))
    for row, idx in enumerate(indices):
        rng = trajectory_rng(seed, int(idx))
        u[row] = rng.random(n_steps)
        z[row] = rng.standard_normal(n_steps)
    return u, z


def sample_batch(psi0, stepper: SliceStepper, n_steps: int, seed: int, indices):
    """Sample trajectories ``indices`` in lockstep.

    Per slice, an eigencomponent ``i`` of ``A`` is picked with probability
    ``|c_i|**2 / |psi|**2`` (``c`` taken after the leading half-step) and the
    readout is drawn from ``Normal(lambda_i, 1 / (4 kappa dt))``. This is the
    exact readout density relative to the measure ``sqrt(2 kappa dt / pi) da``.

    Returns ``(states, readouts)`` with shapes ``(n, n_steps + 1, d)`` and
    ``(n, n_steps)``.
    """
    ch, dt = stepper.ch, stepper.dt
    if not ch.kappa > 0:
        raise ValueError("readout sampling needs kappa > 0")
    indices = np.atleast_1d(np.asarray(indices, dtype=np.int64))
    n, d = len(indices), ch.dim
    u, z = _draws(seed, indices, n_steps)
    sigma = 1.0 / np.sqrt(4 * ch.kappa * dt)
    psi = np.broadcast_to(_check_initial(psi0, d), (n, d)).copy()
    states = np.empty((n, n_steps + 1, d), dtype=complex)
    readouts = np.empty((n, n_steps))
    states[:, 0] = psi
    for k in range(n_steps):
        psi = stepper.leading(psi)
        weights = np.abs(psi @ stepper.V_conj) ** 2
        cum = np.cumsum(weights, axis=1)
        comp = np.minimum((cum < u[:, k, None] * cum[:, -1:]).sum(axis=1), d - 1)
        a = stepper.eigvals[comp] + sigma * z[:, k]
        psi = stepper.trailing(stepper.measure(psi, a))
        states[:, k + 1] = psi
        readouts[:, k] = a
    return states, readouts


def sample_readout(
    psi0,
    H,
    ch: MonitoringChannel,
    n_steps: int,
    dt: float,
    seed: int,
    c: Constants = NATURAL,
    index: int = 0,
    t0: float = 0.0,
) -> ConditionedTrajectory:
    """Draw one readout with its physical probability and the conditioned states."""
    if not ch.kappa > 0:
        raise ValueError("readout sampling needs kappa > 0")
    stepper = SliceStepper(H, ch, dt, c)
    states, readouts = sample_batch(psi0, stepper, n_steps, seed, [index])
    readout = ReadoutCurve(t0, dt, readouts[0])
    return ConditionedTrajectory(t0 + dt * np.arange(n_steps + 1), states[0], readout)


@dataclass(frozen=True)
class UnitarityReport:
    """Single-slice generalized-unitarity diagnostics (max-entry norms)."""

    diagonal_deviation: float  # analytic kernel diagonal vs 1
    quadrature_deviation: float  # numerical a-integral vs analytic kernel
    unitarity_deviation: float  # numerical integral of U_a^dag U_a vs identity
    kernel: np.ndarray


def measurement_kernel(eigvals, kappa_dt: float) -> np.ndarray:
    """Closed form of ``int sqrt(2 k/pi) exp(-k[(l_i - a)^2 + (l_j - a)^2]) da`` with ``k = kappa dt``."""
    lam = np.asarray(eigvals, dtype=float)
    return np.exp(-0.5 * kappa_dt * (lam[:, None] - lam[None, :]) ** 2)


def generalized_unitarity_check(
    ch: MonitoringChannel,
    H,
    dt: float,
    c: Constants = NATURAL,
    n_points: int = 2001,
    half_width: float = 10.0,
) -> UnitarityReport:
    if not ch.kappa > 0:
        raise ValueError("generalized unitarity check needs kappa > 0")
    stepper = SliceStepper(H, ch, dt, c)
    k = ch.kappa * dt
    lam = stepper.eigvals
    kernel = measurement_kernel(lam, k)
    diag_dev = max_abs(np.diag(kernel) - 1.0)

    sigma = 1.0 / (2.0 * np.sqrt(k))
    a = np.linspace(lam.min() - half_width * sigma, lam.max() + half_width * sigma, n_points)
    norm = np.sqrt(2 * k / np.pi)
    m = np.exp(-k * (lam[None, :] - a[:, None]) ** 2)  # (n_points, d)
    numeric = norm * trapezoid(m[:, :, None] * m[:, None, :], a, axis=0)
    quad_dev = max_abs(numeric - kernel)

    # full slice operator U_a = step(I); rows of the batch are basis vectors
    d = ch.dim
    total = np.zeros((d, d), dtype=complex)
    weights = np.full(n_points, a[1] - a[0])
    weights[[0, -1]] *= 0.5
    for w, ai in zip(weights, a):
        U = stepper.step(np.eye(d, dtype=complex), np.full(d, ai)).T
        total += w * norm * (U.conj().T @ U)
    unit_dev = max_abs(total - np.eye(d))
    return UnitarityReport(diag_dev, quad_dev, unit_dev, kernel)
