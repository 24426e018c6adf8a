"""Measurement description for continuous monitoring of an observable.

A readout is a piecewise-constant curve ``a(t)`` sampled once per time step.
A channel bundles the monitored observable ``A`` with its strength ``kappa``
and the optional non-minimal disturbance ``lam * a * B + C``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .hilbert import NATURAL, Constants, as_operator, require_hermitian


@dataclass(frozen=True)
class ReadoutCurve:
    """Readout ``values[k]`` holds on ``[t0 + k*dt, t0 + (k+1)*dt)``."""

    t0: float
    dt: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if not self.dt > 0:
            raise ValueError(f"readout dt must be > 0, got {self.dt}")
        if not np.all(np.isfinite(v)):
            raise ValueError("readout values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)

    @property
    def times(self) -> np.ndarray:
        """Slice start times."""
        return self.t0 + self.dt * np.arange(len(self.values))

    @classmethod
    def constant(cls, value: float, n_steps: int, dt: float, t0: float = 0.0):
        return cls(t0, dt, np.full(n_steps, float(value)))

    def to_csv(self, header: str | None = None) -> str:
        out = io.StringIO()
        if header:
            out.write(f"# {header}\n")
        out.write("t,a\n")
        for t, a in zip(self.times, self.values):
            out.write(f"{t:.17g},{a:.17g}\n")
        return out.getvalue()

    @classmethod
    def from_csv(cls, source) -> "ReadoutCurve":
        """Parse ``t,a`` CSV text or a path; ``#`` comment lines are skipped."""
        text = Path(source).read_text() if isinstance(source, Path) else str(source)
        rows = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        reader = csv.reader(rows)
        head = [h.strip() for h in next(reader)]
        if head != ["t", "a"]:
            raise ValueError(f"readout CSV header must be 't,a', got {head}")
        data = np.array([[float(x) for x in r] for r in reader], dtype=float)
        if len(data) == 0:
            raise ValueError("readout CSV has no rows")
        if len(data) == 1:
            raise ValueError("cannot infer dt from a single readout row")
        steps = np.diff(data[:, 0])
        dt = float(steps.mean())
        if np.max(np.abs(steps - dt)) > 1e-9 * max(1.0, abs(dt)):
            raise ValueError("readout CSV times are not on a uniform grid")
        return cls(float(data[0, 0]), dt, data[:, 1])


@dataclass(frozen=True)
class CorridorSpec:
    duration: float
    delta_a: float

    def __post_init__(self):
        if not self.duration > 0 or not self.delta_a > 0:
            raise ValueError("corridor duration and width must be > 0")


def kappa_from_corridor(spec: CorridorSpec) -> float:
    """Strength for which ``delta_a`` is the rms deviation over ``duration``."""
    return 1.0 / (spec.duration * spec.delta_a**2)


@dataclass(frozen=True, eq=False)
class MonitoringChannel:
    """One monitored observable.

    ``kappa`` has units 1/(time * A**2); ``lam`` couples the readout to the
    extra phase ``exp(-i lam a B dt / hbar)``. ``B`` is required when
    ``lam != 0``; ``C`` defaults to zero.
    """

    A: np.ndarray
    kappa: float
    lam: float = 0.0
    B: np.ndarray | None = None
    C: np.ndarray | None = None

    def __post_init__(self):
        A = require_hermitian(self.A, "A")
        object.__setattr__(self, "A", A)
        if not np.isfinite(self.kappa) or self.kappa < 0:
            raise ValueError(f"kappa must be >= 0, got {self.kappa}")
        if not np.isfinite(self.lam):
            raise ValueError("lambda must be finite")
        for name in ("B", "C"):
            op = getattr(self, name)
            if op is not None:
                op = require_hermitian(op, name)
                if op.shape != A.shape:
                    raise ValueError(f"{name} has shape {op.shape}, A has {A.shape}")
                object.__setattr__(self, name, op)
        if self.lam != 0 and self.B is None:
            raise ValueError("B is required when lambda != 0")

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def minimal(self) -> bool:
        return self.lam == 0 and self.C is None

    @property
    def B_or_zero(self) -> np.ndarray:
        return self.B if self.B is not None else np.zeros_like(self.A)

    @property
    def C_or_zero(self) -> np.ndarray:
        return self.C if self.C is not None else np.zeros_like(self.A)

    @cached_property
    def eig_A(self):
        """Eigenvalues and eigenvectors of A, computed once."""
        return np.linalg.eigh(self.A)

    @cached_property
    def eig_B(self):
        return np.linalg.eigh(self.B_or_zero)


def _paths(*paths):
    return [np.asarray(p, dtype=float).ravel() for p in paths]


def weight_gaussian(A_path, readout: ReadoutCurve, kappa: float) -> float:
    """Gaussian weight ``exp(-kappa * sum_k (A_k - a_k)**2 * dt)``."""
    (A_path,) = _paths(A_path)
    if len(A_path) != len(readout):
        raise ValueError(f"path has {len(A_path)} slices, readout has {len(readout)}")
    return float(np.exp(-kappa * np.sum((A_path - readout.values) ** 2) * readout.dt))


def weight_nonminimal(
    A_path, B_path, C_path, readout: ReadoutCurve, ch: MonitoringChannel, c: Constants = NATURAL
) -> complex:
    """Weight with the extra phase ``-(i/hbar)(lam a_k B_k + C_k)`` per slice."""
    A_path, B_path, C_path = _paths(A_path, B_path, C_path)
    n = len(readout)
    if not len(A_path) == len(B_path) == len(C_path) == n:
        raise ValueError("path lengths must match the readout length")
    a = readout.values
    real = -ch.kappa * np.sum((A_path - a) ** 2) * readout.dt
    phase = -np.sum(ch.lam * a * B_path + C_path) * readout.dt / c.hbar
    return complex(np.exp(real) * np.exp(1j * phase))


def effective_hamiltonian(
    ch: MonitoringChannel, a: float, H, c: Constants = NATURAL
) -> np.ndarray:
    """``H + C + lam a B - i kappa hbar (A - a)**2`` for readout value ``a``."""
    H = as_operator(H, "H")
    if H.shape != ch.A.shape:
        raise ValueError(f"H has shape {H.shape}, channel has {ch.A.shape}")
    shifted = ch.A - a * np.eye(ch.dim)
    out = H + ch.C_or_zero - 1j * ch.kappa * c.hbar * (shifted @ shifted)
    if ch.lam != 0:
        out = out + ch.lam * a * ch.B
    return out
