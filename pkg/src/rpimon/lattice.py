"""Restricted path integral for position monitoring on a 1D grid.

The path sum over grid paths is contracted slice by slice (transfer
matrices). Each slice kernel is the free amplitude between two grid points
times ``exp(-(i/hbar) V(qbar) dt - kappa dt (qbar - a)**2)`` with the midpoint
``qbar = (q'' + q')/2``.

Two free amplitudes are available:

``"lattice"`` (default)
    ``exp(-i T dt / hbar)`` for the grid kinetic operator ``T`` (central second
    difference), i.e. the momentum paths integrated over the grid's own
    Brillouin zone.
``"fresnel"``
    The continuum short-time kernel ``sqrt(m / 2 pi i hbar dt) dq
    exp(i m (q'' - q')**2 / 2 hbar dt)`` sampled on the grid. It aliases once
    ``|q'' - q'|`` exceeds ``pi hbar dt / (m dq)``, so products of many slices
    do not converge for short ``dt``; it is kept for comparison.
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .hilbert import NATURAL, Constants, matrix_exponential
from .monitoring import ReadoutCurve

FREE_KERNELS = ("lattice", "fresnel")


@dataclass(frozen=True, eq=False)
class LatticeSpec:
    n_q: int
    q_max: float
    n_t: int
    dt: float
    mass: float = 1.0
    potential: np.ndarray | None = None  # V sampled on the grid; None means free

    def __post_init__(self):
        if self.n_q < 3 or self.n_q % 2 == 0:
            raise ValueError(f"n_q must be odd and >= 3, got {self.n_q}")
        if not self.q_max > 0 or not self.dt > 0 or not self.mass > 0:
            raise ValueError("q_max, dt and mass must be > 0")
        if self.n_t < 0:
            raise ValueError("n_t must be >= 0")
        if self.potential is not None:
            v = np.asarray(self.potential, dtype=float)
            if v.shape != (self.n_q,):
                raise ValueError(f"potential must have {self.n_q} samples")
            object.__setattr__(self, "potential", v)

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(-self.q_max, self.q_max, self.n_q)

    @property
    def dq(self) -> float:
        return 2 * self.q_max / (self.n_q - 1)

    @property
    def V(self) -> np.ndarray:
        return np.zeros(self.n_q) if self.potential is None else self.potential

    def with_dt(self, dt: float, n_t: int) -> "LatticeSpec":
        return LatticeSpec(self.n_q, self.q_max, n_t, dt, self.mass, self.potential)


def harmonic_potential(q, m: float = 1.0, omega: float = 1.0) -> np.ndarray:
    return 0.5 * m * omega**2 * np.asarray(q) ** 2


def kinetic_matrix(spec: LatticeSpec, c: Constants = NATURAL) -> np.ndarray:
    """Central second difference with hard walls at the grid ends."""
    n = spec.n_q
    lap = np.diag(np.full(n, -2.0)) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1)
    return -(c.hbar**2) / (2 * spec.mass * spec.dq**2) * lap.astype(complex)


def grid_hamiltonian(spec: LatticeSpec, c: Constants = NATURAL) -> np.ndarray:
    return kinetic_matrix(spec, c) + np.diag(spec.V).astype(complex)


def _midpoint_potential(spec: LatticeSpec) -> np.ndarray:
    q = spec.grid
    if spec.potential is None:
        return np.zeros((spec.n_q, spec.n_q))
    # V is only known on grid points; midpoints between them use linear interpolation
    qbar = 0.5 * (q[:, None] + q[None, :])
    return np.interp(qbar, q, spec.V)


def _free_factor(spec: LatticeSpec, c: Constants, free: str) -> np.ndarray:
    if free == "lattice":
        return matrix_exponential(-1j * spec.dt / c.hbar * kinetic_matrix(spec, c))
    if free == "fresnel":
        q = spec.grid
        diff = q[:, None] - q[None, :]
        pref = np.sqrt(spec.mass / (2j * np.pi * c.hbar * spec.dt)) * spec.dq
        return pref * np.exp(1j * spec.mass * diff**2 / (2 * c.hbar * spec.dt))
    raise ValueError(f"free kernel must be one of {FREE_KERNELS}, got {free!r}")


def short_time_kernel(
    spec: LatticeSpec, a: float, kappa: float, c: Constants = NATURAL, free: str = "lattice"
) -> np.ndarray:
    """One-slice kernel ``K[i, j] = K(q_i, q_j)`` for readout value ``a``."""
    q = spec.grid
    qbar = 0.5 * (q[:, None] + q[None, :])
    weight = np.exp(-1j / c.hbar * _midpoint_potential(spec) * spec.dt - kappa * spec.dt * (qbar - a) ** 2)
    return _free_factor(spec, c, free) * weight


def _check_readout(spec: LatticeSpec, readout: ReadoutCurve):
    if len(readout) != spec.n_t:
        raise ValueError(f"readout has {len(readout)} slices, lattice has n_t={spec.n_t}")
    if abs(readout.dt - spec.dt) > 1e-12 * spec.dt:
        raise ValueError("readout dt differs from lattice dt")


def rpi_propagator(
    spec: LatticeSpec, readout: ReadoutCurve, kappa: float, c: Constants = NATURAL, free: str = "lattice"
) -> np.ndarray:
    """Ordered product ``K_{a_{n-1}} ... K_{a_0}``; identity for zero slices."""
    _check_readout(spec, readout)
    free_part = _free_factor(spec, c, free)
    q = spec.grid
    qbar = 0.5 * (q[:, None] + q[None, :])
    vphase = np.exp(-1j / c.hbar * _midpoint_potential(spec) * spec.dt)
    U = np.eye(spec.n_q, dtype=complex)
    for a in readout.values:
        K = free_part * vphase * np.exp(-kappa * spec.dt * (qbar - a) ** 2)
        U = K @ U
    return U


def effective_propagator(
    spec: LatticeSpec, readout: ReadoutCurve, kappa: float, c: Constants = NATURAL
) -> np.ndarray:
    """Ordered product of ``exp(-i H_eff(a_k) dt / hbar)`` with ``A = diag(q)``."""
    _check_readout(spec, readout)
    H = grid_hamiltonian(spec, c)
    q = spec.grid
    U = np.eye(spec.n_q, dtype=complex)
    cache = {}
    for a in readout.values:
        if a not in cache:
            heff = H - 1j * kappa * c.hbar * np.diag((q - a) ** 2)
            cache[a] = matrix_exponential(-1j * spec.dt / c.hbar * heff)
        U = cache[a] @ U
    return U


def free_propagator(spec: LatticeSpec, t: float, c: Constants = NATURAL) -> np.ndarray:
    """Exact continuum free propagator times ``dq`` on grid points."""
    q = spec.grid
    diff = q[:, None] - q[None, :]
    pref = np.sqrt(spec.mass / (2j * np.pi * c.hbar * t)) * spec.dq
    return pref * np.exp(1j * spec.mass * diff**2 / (2 * c.hbar * t))


def gaussian_packet(spec: LatticeSpec, center: float, width: float, k0: float = 0.0) -> np.ndarray:
    """Grid samples of a Gaussian wavepacket, normalized to sum |psi|^2 = 1.

    Raises if the 5-sigma support reaches the hard walls.
    """
    if abs(center) + 5 * width > spec.q_max:
        raise ValueError("wavepacket 5-sigma support touches the lattice boundary")
    q = spec.grid
    psi = np.exp(-((q - center) ** 2) / (4 * width**2) + 1j * k0 * q)
    return psi / np.linalg.norm(psi)


@dataclass(frozen=True)
class ConvergenceRow:
    dt: float
    deviation_max: float


def convergence_study(
    spec: LatticeSpec,
    t_final: float,
    dts,
    kappa: float,
    readout_fn=None,
    c: Constants = NATURAL,
    free: str = "lattice",
) -> list[ConvergenceRow]:
    """Max-entry deviation between RPI and effective propagators for each ``dt``.

    ``readout_fn(times) -> values`` defines the readout; a zero readout by default.
    """
    rows = []
    for dt in dts:
        n_t = int(round(t_final / dt))
        if abs(n_t * dt - t_final) > 1e-9 * t_final:
            raise ValueError(f"dt={dt} does not divide t_final={t_final}")
        s = spec.with_dt(dt, n_t)
        times = dt * np.arange(n_t)
        values = np.zeros(n_t) if readout_fn is None else np.asarray(readout_fn(times), dtype=float)
        readout = ReadoutCurve(0.0, dt, values)
        dev = np.max(np.abs(rpi_propagator(s, readout, kappa, c, free) - effective_propagator(s, readout, kappa, c)))
        rows.append(ConvergenceRow(dt, float(dev)))
    return rows


def propagator_csv(U: np.ndarray, header: str | None = None) -> str:
    out = io.StringIO()
    if header:
        out.write(f"# {header}\n")
    out.write("i,j,re,im\n")
    for (i, j), z in np.ndenumerate(U):
        out.write(f"{i},{j},{z.real:.17g},{z.imag:.17g}\n")
    return out.getvalue()


def convergence_csv(rows, header: str | None = None) -> str:
    out = io.StringIO()
    if header:
        out.write(f"# {header}\n")
    out.write("dt,deviation_max\n")
    for r in rows:
        out.write(f"{r.dt:.17g},{r.deviation_max:.17g}\n")
    return out.getvalue()
