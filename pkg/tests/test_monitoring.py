import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rpimon.hilbert import Constants, build_qubit, is_hermitian, max_abs
from rpimon.monitoring import (
    CorridorSpec,
    MonitoringChannel,
    ReadoutCurve,
    effective_hamiltonian,
    kappa_from_corridor,
    weight_gaussian,
    weight_nonminimal,
)

SZ, SX = build_qubit("sz"), build_qubit("sx")
finite = st.floats(-5, 5, allow_nan=False)


def test_kappa_from_corridor():
    assert kappa_from_corridor(CorridorSpec(1.0, 1.0)) == 1.0
    assert kappa_from_corridor(CorridorSpec(4.0, 0.5)) == 1.0
    ks = [kappa_from_corridor(CorridorSpec(t, 0.3)) for t in (1, 2, 4)]
    assert ks[0] > ks[1] > ks[2]
    assert ks[0] / ks[2] == pytest.approx(4.0)
    with pytest.raises(ValueError):
        CorridorSpec(0.0, 1.0)


def test_weight_gaussian_values():
    r = ReadoutCurve(0.0, 0.25, [0.2, -1.0, 3.0])
    assert weight_gaussian(r.values, r, 2.0) == 1.0
    assert weight_gaussian([5, 5, 5], r, 0.0) == 1.0
    single = ReadoutCurve(0.0, 0.5, [0.0])
    assert weight_gaussian([1.0], single, 1.0) == pytest.approx(np.exp(-0.5), abs=1e-15)
    assert np.exp(-0.5) == pytest.approx(0.6065, abs=1e-4)
    with pytest.raises(ValueError):
        weight_gaussian([1.0, 2.0], single, 1.0)


def test_weight_nonminimal_reductions():
    r = ReadoutCurve(0.0, 0.1, [0.3, -0.4, 1.1])
    A = [0.1, 0.2, 0.9]
    ch = MonitoringChannel(SZ, 1.7)
    assert weight_nonminimal(A, [0, 0, 0], [0, 0, 0], r, ch) == weight_gaussian(A, r, 1.7)
    hbar, dt = 0.6, 0.2
    ch0 = MonitoringChannel(SZ, 0.0)
    one = ReadoutCurve(0.0, dt, [0.0])
    w = weight_nonminimal([0.0], [0.0], [np.pi * hbar / dt], one, ch0, Constants(hbar))
    assert abs(w - (-1)) < 1e-15


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.tuples(finite, finite, finite, finite), min_size=1, max_size=6),
    st.floats(0, 3),
    st.floats(-3, 3),
)
def test_weight_modulus_is_gaussian(rows, kappa, lam):
    A, B, C, a = (np.array(x) for x in zip(*rows))
    r = ReadoutCurve(0.0, 0.05, a)
    ch = MonitoringChannel(SZ, kappa, lam, SX)
    w = weight_nonminimal(A, B, C, r, ch)
    g = weight_gaussian(A, r, kappa)
    assert 0 < g <= 1
    assert abs(abs(w) - g) <= 1e-12 * max(g, 1e-300)


def test_effective_hamiltonian_cases():
    H = np.array([[0.3, 0.1 - 0.2j], [0.1 + 0.2j, -0.5]])
    assert np.array_equal(effective_hamiltonian(MonitoringChannel(SZ, 0.0), 0.7, H), H)
    heff = effective_hamiltonian(MonitoringChannel(SZ, 0.8), 1.0, np.zeros((2, 2)), Constants(1.5))
    assert max_abs(heff - (-1j * 0.8 * 1.5 * np.diag([0, 4]))) < 1e-15
    with pytest.raises(ValueError):
        effective_hamiltonian(MonitoringChannel(SZ, 1.0), 0.0, np.eye(3))


def test_effective_hamiltonian_nonminimal_terms():
    B, C = SX, 0.3 * SZ
    ch = MonitoringChannel(SZ, 0.5, 1.2, B, C)
    heff = effective_hamiltonian(ch, 0.4, np.zeros((2, 2)))
    herm = 0.5 * (heff + heff.conj().T)
    assert max_abs(herm - (C + 1.2 * 0.4 * B)) < 1e-15


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.floats(0, 5), st.floats(-3, 3))
def test_anti_hermitian_part_negative(seed, kappa, a):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    A = x + x.conj().T
    y = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    H = y + y.conj().T
    heff = effective_hamiltonian(MonitoringChannel(A, kappa), a, H)
    anti = (heff - heff.conj().T) / 2j
    shifted = A - a * np.eye(4)
    assert max_abs(anti + kappa * shifted @ shifted) < 1e-10 * (1 + kappa * max_abs(shifted) ** 2)
    assert np.linalg.eigvalsh(anti).max() <= 1e-10 * (1 + kappa * max_abs(shifted) ** 2)
    if kappa == 0:
        assert is_hermitian(heff)


def test_channel_validation():
    with pytest.raises(ValueError, match="kappa"):
        MonitoringChannel(SZ, -1.0)
    with pytest.raises(ValueError, match="B is required"):
        MonitoringChannel(SZ, 1.0, 0.5)
    with pytest.raises(ValueError, match="hermitian"):
        MonitoringChannel(np.array([[0, 1], [0, 0]]), 1.0)
    with pytest.raises(ValueError):
        MonitoringChannel(SZ, 1.0, C=np.eye(3))


def test_readout_csv_roundtrip():
    r = ReadoutCurve(0.5, 0.1, [0.1, 1 / 3, -2.0, 1e-17])
    text = r.to_csv(header="test")
    assert text.splitlines()[0] == "# test"
    assert text.splitlines()[1] == "t,a"
    back = ReadoutCurve.from_csv(text)
    assert np.array_equal(back.values, r.values)
    assert back.t0 == r.t0 and back.dt == pytest.approx(r.dt, rel=1e-12)


def test_readout_validation():
    with pytest.raises(ValueError):
        ReadoutCurve(0.0, 0.0, [1.0])
    with pytest.raises(ValueError):
        ReadoutCurve(0.0, 0.1, [np.inf])
    with pytest.raises(ValueError):
        ReadoutCurve.from_csv("t,a\n0,1\n0.1,2\n0.3,3\n")
