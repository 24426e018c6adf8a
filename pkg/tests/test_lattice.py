import numpy as np
import pytest

from rpimon.hilbert import max_abs
from rpimon.lattice import (
    LatticeSpec,
    convergence_csv,
    convergence_study,
    effective_propagator,
    gaussian_packet,
    grid_hamiltonian,
    harmonic_potential,
    propagator_csv,
    rpi_propagator,
    short_time_kernel,
)
from rpimon.monitoring import MonitoringChannel, ReadoutCurve
from rpimon.selective import propagate_conditioned

DTS = (1 / 25, 1 / 50, 1 / 100, 1 / 200)


def _spec(n_q=101, q_max=5.0, dt=0.01, n_t=1, harmonic=False):
    q = np.linspace(-q_max, q_max, n_q)
    return LatticeSpec(n_q, q_max, n_t, dt, potential=harmonic_potential(q) if harmonic else None)


def _free_packet(q, t, width, center=0.0, m=1.0, hbar=1.0):
    # analytic free evolution of psi0 ~ exp(-(q-c)^2 / 4 w^2)
    s = width * (1 + 1j * hbar * t / (2 * m * width**2))
    return np.exp(-((q - center) ** 2) / (4 * width * s)) / np.sqrt(s)


@pytest.mark.parametrize("free", ["lattice", "fresnel"])
@pytest.mark.parametrize("harmonic", [False, True])
def test_kernel_symmetric(free, harmonic):
    K = short_time_kernel(_spec(harmonic=harmonic), 0.4, 0.7, free=free)
    assert max_abs(K - K.T) < 1e-13


def test_kernel_corridor_suppression():
    spec = _spec(dt=0.02)
    a = 1.0
    K = short_time_kernel(spec, a, 1e4)
    q = spec.grid
    i_far, i_near = np.argmin(abs(q + 3)), np.argmin(abs(q - a))
    assert abs(K[i_far, i_far]) < 1e-30
    assert abs(K[i_near, i_near]) == pytest.approx(abs(short_time_kernel(spec, a, 0.0)[i_near, i_near]))


def test_free_completeness_is_reported(capsys):
    # applying the kernel to a constant returns the constant in the interior, up to a reported error
    spec = _spec(dt=0.01)
    interior = slice(30, 71)
    out = {}
    for free in ("lattice", "fresnel"):
        K = short_time_kernel(spec, 0.0, 0.0, free=free)
        out[free] = max_abs((K @ np.ones(spec.n_q))[interior] - 1)
    print(f"free-kernel completeness error: {out}")
    assert np.isfinite(out["lattice"]) and np.isfinite(out["fresnel"])
    assert out["lattice"] < 1e-12


def test_zero_slices_is_identity():
    spec = _spec(n_t=0)
    U = rpi_propagator(spec, ReadoutCurve(0, 0.01, []), 0.5)
    assert np.array_equal(U, np.eye(spec.n_q))


def test_slice_count_mismatch():
    with pytest.raises(ValueError):
        rpi_propagator(_spec(n_t=3), ReadoutCurve.constant(0.0, 2, 0.01), 0.1)
    with pytest.raises(ValueError):
        effective_propagator(_spec(n_t=2, dt=0.01), ReadoutCurve.constant(0.0, 2, 0.02), 0.1)


def test_free_packet_matches_closed_form_and_improves_with_grid():
    t, width = 0.5, 0.6
    errs = []
    for n_q in (61, 121, 241):
        spec = LatticeSpec(n_q, 6.0, 50, t / 50)
        psi0 = gaussian_packet(spec, 0.0, width)
        U = rpi_propagator(spec, ReadoutCurve.constant(0.0, 50, t / 50), 0.0)
        exact = _free_packet(spec.grid, t, width)
        exact *= np.sqrt(1 / np.sum(np.abs(exact) ** 2))
        errs.append(max_abs(U @ psi0 - exact))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 2e-3


def test_probability_ordering_on_and_off_corridor():
    n_t, dt = 50, 0.02
    spec = _spec(n_t=n_t, dt=dt)
    U = rpi_propagator(spec, ReadoutCurve.constant(0.0, n_t, dt), 1.0)
    on = U @ gaussian_packet(spec, 0.0, 0.4)
    off = U @ gaussian_packet(spec, 2.0, 0.4)
    assert np.sum(abs(off) ** 2) < np.sum(abs(on) ** 2) <= 1 + 1e-12


def test_packet_norm_never_grows():
    n_t, dt = 100, 0.01
    spec = _spec(n_t=n_t, dt=dt, harmonic=True)
    vals = 0.5 * np.sin(np.arange(n_t) * dt * 3)
    U = rpi_propagator(spec, ReadoutCurve(0, dt, vals), 0.5)
    psi = gaussian_packet(spec, 0.5, 0.5, k0=1.0)
    assert np.sum(abs(U @ psi) ** 2) <= 1 + 1e-10


def test_single_slice_trotter_order():
    errs = []
    for dt in (0.02, 0.01, 0.005):
        spec = _spec(dt=dt, harmonic=True)
        K = short_time_kernel(spec, 0.0, 0.0)
        E = effective_propagator(spec, ReadoutCurve.constant(0.0, 1, dt), 0.0)
        errs.append(max_abs(K - E))
    # at least second order per slice
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


@pytest.mark.parametrize("harmonic", [False, True])
@pytest.mark.parametrize("kappa", [0.0, 0.5])
def test_rpi_converges_to_effective(harmonic, kappa):
    rows = convergence_study(_spec(harmonic=harmonic), 1.0, DTS, kappa, lambda t: 0.3 * np.cos(2 * np.pi * t))
    devs = [r.deviation_max for r in rows]
    assert all(b <= a for a, b in zip(devs, devs[1:]))
    assert devs[-1] < 1e-3


def test_fresnel_kernel_aliases_on_fixed_grid():
    # the sampled continuum kernel does not converge as dt shrinks at fixed dq
    rows = convergence_study(_spec(), 1.0, DTS[:2], 0.0, free="fresnel")
    assert rows[-1].deviation_max > rows[0].deviation_max
    assert rows[-1].deviation_max > 1.0


@pytest.mark.parametrize("harmonic", [False, True])
def test_effective_matches_selective_unitary(harmonic):
    n_t, dt = 40, 0.025
    spec = _spec(n_t=n_t, dt=dt, harmonic=harmonic)
    readout = ReadoutCurve.constant(0.0, n_t, dt)
    psi0 = gaussian_packet(spec, 0.5, 0.5, k0=0.8)
    via_lattice = effective_propagator(spec, readout, 0.0) @ psi0
    ch = MonitoringChannel(np.diag(spec.grid), 0.0)
    via_selective = propagate_conditioned(psi0, grid_hamiltonian(spec), ch, readout).states[-1]
    assert max_abs(via_lattice - via_selective) < 1e-8


def test_effective_matches_selective_monitored_second_order():
    psi_errs = []
    for n_t in (20, 40, 80):
        dt = 0.5 / n_t
        spec = _spec(n_t=n_t, dt=dt, harmonic=True)
        readout = ReadoutCurve(0, dt, 0.4 * np.ones(n_t))
        psi0 = gaussian_packet(spec, 0.0, 0.5)
        a = effective_propagator(spec, readout, 0.5) @ psi0
        ch = MonitoringChannel(np.diag(spec.grid), 0.5)
        b = propagate_conditioned(psi0, grid_hamiltonian(spec), ch, readout).states[-1]
        psi_errs.append(max_abs(a - b))
    assert psi_errs[0] / psi_errs[1] > 3.5 and psi_errs[1] / psi_errs[2] > 3.5


def test_packet_boundary_guard():
    with pytest.raises(ValueError):
        gaussian_packet(_spec(q_max=2.0), 0.0, 0.5)


def test_lattice_spec_validation():
    with pytest.raises(ValueError):
        LatticeSpec(100, 5.0, 1, 0.1)
    with pytest.raises(ValueError):
        LatticeSpec(101, 5.0, 1, 0.0)
    with pytest.raises(ValueError):
        LatticeSpec(5, 1.0, 1, 0.1, potential=np.zeros(4))
    with pytest.raises(ValueError):
        short_time_kernel(_spec(), 0.0, 0.0, free="other")


def test_csv_dumps():
    lines = propagator_csv(np.array([[1 + 2j, 0], [0, 1]]), header="h").splitlines()
    assert lines[:3] == ["# h", "i,j,re,im", "0,0,1,2"]
    rows = convergence_study(_spec(), 1.0, DTS[:2], 0.5)
    text = convergence_csv(rows).splitlines()
    assert text[0] == "dt,deviation_max" and len(text) == 3
