"""Non-selective evolution: master equations, RK4 integration, ensemble averages."""
from __future__ import annotations

import enum
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .hilbert import (
    NATURAL,
    Constants,
    anticommutator,
    as_operator,
    build_oscillator,
    commutator,
)
from .monitoring import MonitoringChannel
from .selective import SliceStepper, sample_batch


class IntegrationError(RuntimeError):
    """Trace drift or loss of positivity during time stepping."""

    def __init__(self, message: str, step: int):
        super().__init__(f"step {step}: {message}")
        self.step = step


class TruncationError(IntegrationError):
    """Population leaked into the top Fock levels."""


class Form(enum.Enum):
    SIMPLE = "simple"
    NONMINIMAL = "nonminimal"
    LINDBLAD_CANONICAL = "lindblad_canonical"


def _double_comm(x, rho):
    return commutator(x, commutator(x, rho))


def _check_dims(rho, H, channels):
    d = H.shape[0]
    if rho.shape != H.shape:
        raise ValueError(f"rho has shape {rho.shape}, H has {H.shape}")
    for ch in channels:
        if ch.dim != d:
            raise ValueError(f"channel dimension {ch.dim} != {d}")


def rhs_simple(rho, H, channels, c: Constants = NATURAL) -> np.ndarray:
    """``-(i/hbar)[H, rho] - sum (kappa/2)[A, [A, rho]]``; channels must have lam = 0."""
    _check_dims(rho, H, channels)
    out = -1j / c.hbar * commutator(H, rho)
    for ch in channels:
        if ch.lam != 0:
            raise ValueError("rhs_simple requires lambda = 0 channels")
        out -= 0.5 * ch.kappa * _double_comm(ch.A, rho)
    return out


def rhs_nonminimal(rho, H, channels, c: Constants = NATURAL) -> np.ndarray:
    """Double-commutator form with the non-minimal ``B`` and ``C`` terms."""
    _check_dims(rho, H, channels)
    hb = c.hbar
    out = -1j / hb * commutator(H, rho)
    for ch in channels:
        if ch.lam != 0 and ch.kappa <= 0:
            raise ValueError("lambda != 0 needs kappa > 0")
        out -= 1j / hb * commutator(ch.C_or_zero, rho)
        out -= 0.5 * ch.kappa * _double_comm(ch.A, rho)
        if ch.lam != 0:
            B = ch.B
            out -= ch.lam**2 / (8 * ch.kappa * hb**2) * _double_comm(B, rho)
            out -= 0.5j * ch.lam / hb * commutator(B, anticommutator(ch.A, rho))
    return out


def lindblad_operator(ch: MonitoringChannel, c: Constants = NATURAL) -> np.ndarray:
    """``l = A - i lam / (2 kappa hbar) B``."""
    if not ch.kappa > 0:
        raise ValueError("Lindblad operator needs kappa > 0")
    return ch.A - 0.5j * ch.lam / (ch.kappa * c.hbar) * ch.B_or_zero


def rhs_lindblad_canonical(rho, H, channels, c: Constants = NATURAL) -> np.ndarray:
    """Lindblad form with one ``l`` per channel and the renormalized Hamiltonian."""
    _check_dims(rho, H, channels)
    hb = c.hbar
    out = -1j / hb * commutator(H, rho)
    for ch in channels:
        l = lindblad_operator(ch, c)
        ld = l.conj().T
        shift = ch.C_or_zero - 0.25j * ch.kappa * hb * (ld @ ld - l @ l)
        ldl = ld @ l
        out -= 1j / hb * commutator(shift, rho)
        out -= 0.5 * ch.kappa * (ldl @ rho - 2 * l @ rho @ ld + rho @ ldl)
    return out


_RHS = {
    Form.SIMPLE: rhs_simple,
    Form.NONMINIMAL: rhs_nonminimal,
    Form.LINDBLAD_CANONICAL: rhs_lindblad_canonical,
}


@dataclass(frozen=True, eq=False)
class MasterEquationSpec:
    H: np.ndarray
    channels: tuple = ()
    form: Form = Form.SIMPLE
    # population bound on the top two basis levels; None disables the check
    truncation_tol: float | None = None
    observables: dict = field(default_factory=dict)

    def __post_init__(self):
        H = as_operator(self.H, "H")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "form", Form(self.form))
        chans = tuple(self.channels)
        object.__setattr__(self, "channels", chans)
        for ch in chans:
            if ch.dim != H.shape[0]:
                raise ValueError(f"channel dimension {ch.dim} != {H.shape[0]}")
            if self.form is Form.LINDBLAD_CANONICAL and not ch.kappa > 0:
                raise ValueError("lindblad_canonical form needs kappa > 0 on every channel")
            if self.form is Form.SIMPLE and ch.lam != 0:
                raise ValueError("simple form needs lambda = 0 on every channel")

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    def rhs(self, rho, c: Constants = NATURAL) -> np.ndarray:
        return _RHS[self.form](rho, self.H, self.channels, c)


def build_brownian_oscillator(
    d: int,
    m: float = 1.0,
    omega: float = 1.0,
    kappa: float = 0.1,
    lam: float = 0.2,
    c: Constants = NATURAL,
    truncation_tol: float | None = 1e-6,
) -> MasterEquationSpec:
    """Oscillator whose momentum is monitored and non-minimally disturbed.

    The channel is ``A = p``, ``B = omega q``, ``C = 0``, which gives the
    ``lam**2 omega**2`` and ``lam omega`` coefficients of the Brownian-motion
    master equation.
    """
    q, p, H = build_oscillator(d, m, omega, c)
    ch = MonitoringChannel(p, kappa, lam, omega * q)
    return MasterEquationSpec(
        H, (ch,), Form.NONMINIMAL, truncation_tol, observables={"q": q, "p": p, "H": H}
    )


def _rk4_step(f, rho, h):
    k1 = f(rho)
    k2 = f(rho + 0.5 * h * k1)
    k3 = f(rho + 0.5 * h * k2)
    k4 = f(rho + h * k3)
    return rho + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate(
    rho0,
    spec: MasterEquationSpec,
    t_final: float,
    n_steps: int,
    c: Constants = NATURAL,
    tol: float = 1e-6,
) -> np.ndarray:
    """Fixed-step RK4; returns ``(n_steps + 1, d, d)`` states including ``rho0``.

    Each step is re-hermitized. Raises :class:`IntegrationError` when the trace
    drifts by more than ``tol`` or an eigenvalue drops below ``-tol``, and
    :class:`TruncationError` when the top two levels exceed
    ``spec.truncation_tol``.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    rho = as_operator(rho0, "rho0")
    if rho.shape != spec.H.shape:
        raise ValueError(f"rho0 has shape {rho.shape}, H has {spec.H.shape}")
    h = t_final / n_steps
    tr0 = np.trace(rho).real
    f = lambda r: spec.rhs(r, c)
    out = np.empty((n_steps + 1, *rho.shape), dtype=complex)
    out[0] = rho
    for k in range(1, n_steps + 1):
        rho = _rk4_step(f, rho, h)
        rho = 0.5 * (rho + rho.conj().T)
        drift = abs(np.trace(rho).real - tr0)
        if drift > tol:
            raise IntegrationError(f"trace drift {drift:.3g}", k)
        lo = np.linalg.eigvalsh(rho)[0]
        if lo < -tol:
            raise IntegrationError(f"negative eigenvalue {lo:.3g}", k)
        if spec.truncation_tol is not None:
            top = np.diagonal(rho)[-2:].real.sum()
            if top > spec.truncation_tol:
                raise TruncationError(f"top-level population {top:.3g}", k)
        out[k] = rho
    return out


def tree_sum(parts):
    """Pairwise sum in index order; the grouping depends only on ``len(parts)``."""
    parts = list(parts)
    if not parts:
        raise ValueError("nothing to sum")
    while len(parts) > 1:
        nxt = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


def weighted_projectors(states: np.ndarray) -> np.ndarray:
    """``sum_n |psi_n><psi_n| / |psi_n|^2`` over the leading axis.

    Sampled readouts arrive with density ``|psi|^2`` relative to the readout
    measure, so dividing by it turns the plain mean into an estimate of the
    integral of the partial density matrices over all readouts.
    """
    n2 = np.sum(np.abs(states) ** 2, axis=-1)
    normed = states / np.sqrt(n2)[..., None]
    return np.einsum("n...i,n...j->...ij", normed, normed.conj())


def ensemble_average(trajectories) -> np.ndarray:
    """Average density-matrix sequence of sampled conditioned trajectories."""
    trajectories = list(trajectories)
    if not trajectories:
        raise ValueError("no trajectories")
    grid = trajectories[0].times
    for tr in trajectories[1:]:
        if tr.times.shape != grid.shape or not np.array_equal(tr.times, grid):
            raise ValueError("trajectories do not share a time grid")
    parts = [weighted_projectors(tr.states[None]) for tr in trajectories]
    return tree_sum(parts) / len(trajectories)


CHUNK = 256


def sample_ensemble(
    psi0,
    H,
    ch: MonitoringChannel,
    n_steps: int,
    dt: float,
    n_traj: int,
    seed: int,
    c: Constants = NATURAL,
    threads: int = 1,
    chunk: int = CHUNK,
) -> np.ndarray:
    """Ensemble-averaged density matrices of ``n_traj`` sampled trajectories.

    Trajectories are processed in fixed chunks of ``chunk`` indices; partial
    sums are combined with :func:`tree_sum`, so the result is bit-identical
    for any ``threads``.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    stepper = SliceStepper(H, ch, dt, c)
    blocks = [np.arange(s, min(s + chunk, n_traj)) for s in range(0, n_traj, chunk)]

    def work(idx):
        states, _ = sample_batch(psi0, stepper, n_steps, seed, idx)
        return weighted_projectors(states)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, blocks))
    else:
        parts = [work(b) for b in blocks]
    return tree_sum(parts) / n_traj


def expectation_table(rhos: np.ndarray, ops: dict) -> dict:
    """Expectation values, purity and trace for a density-matrix sequence."""
    out = {name: np.einsum("ij,tji->t", op, rhos).real for name, op in ops.items()}
    out["purity"] = np.einsum("tij,tji->t", rhos, rhos).real
    out["trace"] = np.einsum("tii->t", rhos).real
    return out


def density_csv(times, rhos, header: str | None = None) -> str:
    """Rows ``t, re_rho_ij.., im_rho_ij..`` in row-major order."""
    d = rhos.shape[1]
    idx = [f"{i}{j}" if d <= 10 else f"{i}_{j}" for i in range(d) for j in range(d)]
    out = io.StringIO()
    if header:
        out.write(f"# {header}\n")
    out.write(",".join(["t"] + [f"re_rho_{s}" for s in idx] + [f"im_rho_{s}" for s in idx]) + "\n")
    for t, r in zip(times, rhos):
        flat = r.ravel()
        out.write(",".join(f"{x:.17g}" for x in [t, *flat.real, *flat.imag]) + "\n")
    return out.getvalue()
