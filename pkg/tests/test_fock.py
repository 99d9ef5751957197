import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from cavres.errors import DimensionMismatch, TruncationLoss
from cavres.fock import (
    TruncationWarning,
    FockSpace,
    cat_state,
    coherent,
    displacement,
    fock,
    kerr_propagator,
    ket2dm,
    mean_photon,
    partial_trace,
    purity,
    thermal_state,
)

amplitudes = st.complex_numbers(max_magnitude=2.5, allow_nan=False, allow_infinity=False)


def test_ladder_operators():
    sp = FockSpace(6)
    assert np.allclose(sp.adag @ sp.a, sp.number)
    comm = sp.a @ sp.adag - sp.adag @ sp.a
    # canonical commutator except at the truncation edge
    assert np.allclose(np.diag(comm)[:-1], 1)


def test_fock_out_of_range():
    with pytest.raises(DimensionMismatch):
        fock(5, FockSpace(5))


def test_coherent_overlap_matches_series(frozen):
    sp = FockSpace(40)
    ov = abs(np.vdot(coherent(1, sp), coherent(-1, sp))) ** 2
    assert ov == pytest.approx(frozen["overlap_alpha1_minus1"], abs=1e-12)
    assert ov == pytest.approx(np.exp(-4), rel=1e-10)


@given(amplitudes)
def test_coherent_matches_series_oracle(alpha):
    sp = FockSpace(40)
    assert np.allclose(coherent(alpha, sp), oracles.coherent_series(alpha, 40), atol=1e-10)


def test_displacement_of_vacuum():
    sp = FockSpace(40)
    d = displacement(2, sp)
    f = abs(np.vdot(coherent(2, sp), d[:, 0])) ** 2
    assert f > 1 - 1e-8
    assert np.allclose(d[:20, 0], oracles.displaced_vacuum(2, 20), atol=1e-8)


@given(amplitudes)
def test_displacement_unitary(alpha):
    d = displacement(alpha, FockSpace(30))
    assert np.abs(d.conj().T @ d - np.eye(30)).max() < 1e-10


def test_truncation_loss():
    with pytest.raises(TruncationLoss), pytest.warns(TruncationWarning):
        coherent(4, FockSpace(8))


def test_cat_moments(frozen):
    psi = cat_state(2, 0, FockSpace(40))
    par = float(np.real(np.vdot(psi, (-1.0) ** np.arange(40) * psi)))
    assert par == pytest.approx(frozen["cat2_parity"], abs=1e-10)
    assert mean_photon(psi) == pytest.approx(frozen["cat2_mean_n"], abs=1e-9)


def test_thermal_and_purity():
    sp = FockSpace(60)
    rho = thermal_state(0.5, sp)
    assert mean_photon(rho) == pytest.approx(0.5, rel=1e-8)
    assert purity(ket2dm(fock(0, sp))) == pytest.approx(1)


def test_partial_trace_bell_like():
    # (|g,0> + |e,1>)/sqrt2 -> field mixture with purity 1/2
    psi = np.zeros(4, dtype=complex)
    psi[0] = psi[3] = 1 / np.sqrt(2)
    red = partial_trace(ket2dm(psi), [2, 2], keep=1)
    assert np.allclose(red, np.diag([0.5, 0.5]))
    assert purity(red) == pytest.approx(0.5)


def test_partial_trace_shape_check():
    with pytest.raises(DimensionMismatch):
        partial_trace(np.eye(5), [2, 2], keep=0)


@given(st.floats(-2, 2), st.floats(-1, 1))
def test_kerr_propagator_unitary_diagonal(zeta, gamma):
    k = kerr_propagator(zeta, gamma, 0.3, FockSpace(12))
    assert np.allclose(np.abs(np.diag(k)), 1)
    assert np.count_nonzero(k - np.diag(np.diag(k))) == 0


def test_kerr_half_pi_makes_cat():
    # exp(-i pi/2 N^2)|alpha> is a two-component cat
    sp = FockSpace(40)
    out = kerr_propagator(0, 1, np.pi / 2, sp) @ coherent(1.5, sp)
    cat = coherent(1.5, sp) + 1j * coherent(-1.5, sp)
    # e^{-i pi n^2/2} = (1 - i)/2 + (1 + i)/2 (-1)^n
    assert abs(np.vdot(cat / np.linalg.norm(cat), out)) ** 2 == pytest.approx(1, abs=1e-12)
