import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from cavres.errors import DimensionMismatch, NotConverged, TrappingState
from cavres.fock import FockSpace, coherent, fock, ket2dm, mean_photon
from cavres.propagators import CompositeSetup
from cavres.reservoir import (
    ReservoirConfig,
    admissible,
    apply_kraus,
    atom_count_probabilities,
    coherent_fidelity,
    composite_pointer_state,
    convergence_rate,
    iterate_to_steady,
    kraus_from_propagator,
    model_rate,
    pointer_state,
    resonant_kraus,
    resonant_pointer_state,
    sample_atom_count,
    simplified_amplitude_step,
    sweep_pointer_map,
    trapping_check,
    two_atom_kraus,
)
from conftest import random_density, random_unitary

us = st.floats(0.0, 1.5)
thetas = st.floats(0.05, 0.8)


@given(us, thetas)
def test_resonant_kraus_complete(u, th):
    assert resonant_kraus(th, u, FockSpace(20)).completeness_residual() < 1e-12


@given(st.integers(0, 2**31 - 1), us)
def test_kraus_from_random_unitary_is_cptp(seed, u):
    rng = np.random.default_rng(seed)
    k = kraus_from_propagator(random_unitary(rng, 8), u)
    assert k.completeness_residual() < 1e-12
    rho = random_density(rng, 4)
    out = apply_kraus(rho, k)
    assert np.trace(out) == pytest.approx(1, abs=1e-12)
    assert np.allclose(out, out.conj().T, atol=1e-13)
    assert np.linalg.eigvalsh(out).min() > -1e-12


def test_kraus_matches_oracle_slicing():
    rng = np.random.default_rng(3)
    U = random_unitary(rng, 10)
    k = kraus_from_propagator(U, 0.7)
    mg, me = oracles.kraus_pair_from_unitary(U, 0.7)
    assert np.allclose(k.m_g, mg) and np.allclose(k.m_e, me)


def test_kraus_shape_check():
    with pytest.raises(DimensionMismatch):
        kraus_from_propagator(np.eye(5), 0.3)


def test_two_atom_kraus_complete():
    ops = two_atom_kraus(random_unitary(np.random.default_rng(1), 12), 0.4)
    total = sum(m.conj().T @ m for m in ops)
    assert np.allclose(total, np.eye(3))


def test_pointer_state_matches_fixed_point_oracle(frozen):
    psi = resonant_pointer_state(0.4, 0.5, FockSpace(51))
    assert mean_photon(psi) == pytest.approx(frozen["resonant_pointer_mean_n_u05_th04"], abs=1e-6)
    assert mean_photon(psi) == pytest.approx(6.21, abs=0.02)


@given(st.floats(0.05, 1.2), st.floats(0.2, 0.8))
def test_pointer_state_is_invariant(u, th):
    sp = FockSpace(30)
    if trapping_check(th, 29) is not None:
        return
    psi = resonant_pointer_state(th, u, sp)
    k = resonant_kraus(th, u, sp)
    # both Kraus operators map the pointer state onto itself up to a factor
    for m in k.ops:
        out = m @ psi
        nrm = np.linalg.norm(out)
        if nrm > 1e-8 and abs(psi[-1]) < 1e-6:
            assert abs(np.vdot(psi, out)) / nrm == pytest.approx(1, abs=1e-6)


def test_small_angle_coherent():
    psi = resonant_pointer_state(0.4, 0.1, FockSpace(30))
    target = coherent(4 * math.tan(0.05) / 0.4, FockSpace(30))
    assert abs(np.vdot(target, psi)) ** 2 > 0.999


@given(st.floats(1e-3, 0.02), st.floats(0.2, 0.8))
def test_tiny_u_is_coherent(u, th):
    psi = resonant_pointer_state(th, u, FockSpace(20))
    assert coherent_fidelity(psi) > 0.999


def test_vacuum_first_step_adds_photons():
    k = resonant_kraus(0.4, 0.5, FockSpace(20))
    rho = apply_kraus(ket2dm(fock(0, FockSpace(20))), k)
    assert mean_photon(rho) > 0


def test_trapping_detection():
    limit = 2 * math.pi / math.sqrt(50)
    assert trapping_check(limit * 0.999, 49) is None
    assert trapping_check(limit, 50) == 50
    with pytest.raises(TrappingState):
        pointer_state(limit * np.sqrt(np.arange(52)), 0.5, FockSpace(51))


def test_convergence_rate_on_synthetic_series():
    k = np.arange(200)
    f = np.exp(-3.0 * np.exp(-0.05 * k))
    rate, window, r2 = convergence_rate(f)
    assert rate == pytest.approx(0.05, rel=1e-6)
    assert r2 > 0.9999


def test_iterate_to_steady_rate_near_model():
    sp = FockSpace(40)
    out = iterate_to_steady(ket2dm(fock(0, sp)), resonant_kraus(0.4, 0.5, sp), max_iters=800,
                            target=resonant_pointer_state(0.4, 0.5, sp))
    assert out.r2 > 0.995
    assert out.lambda_conv == pytest.approx(model_rate(0.4), rel=0.2)


def test_iterate_not_converged():
    sp = FockSpace(30)
    with pytest.raises(NotConverged):
        iterate_to_steady(ket2dm(fock(0, sp)), resonant_kraus(0.4, 0.5, sp), max_iters=3,
                          target=resonant_pointer_state(0.4, 0.5, sp))


def test_simplified_amplitude_fixed_point():
    a = 2 * 0.5 / 0.4
    assert simplified_amplitude_step(a, 0.5, 0.4) == pytest.approx(a)


def test_atom_count_sampling_statistics():
    p = atom_count_probabilities(0.3)
    draws = sample_atom_count(0.3, np.random.default_rng(7), size=10**6)
    freq = np.bincount(draws, minlength=3) / 1e6
    sigma = np.sqrt(p * (1 - p) / 1e6)
    assert np.all(np.abs(freq - p) < 3 * sigma + 1e-12)


def test_pointer_map_flags_and_admissible_region():
    recs = sweep_pointer_map([0.1, 0.5], [0.3, 0.6], dim=40)
    assert len(recs) == 4
    assert all(0 <= r["coherent_fidelity"] <= 1 for r in recs)
    assert admissible(0.5, 0.4, 30)
    assert not admissible(0.5, 2.0, 30)


def test_composite_pointer_frames_related_by_phase():
    sp = FockSpace(20)
    setup = CompositeSetup.from_ratio(70.0, math.pi / 2, 2.2)
    ptr = composite_pointer_state(setup, 0.45 * math.pi, sp)
    assert np.allclose(np.abs(ptr.frame), np.abs(ptr.lab))
    assert mean_photon(ptr.frame) == pytest.approx(2.96, abs=0.03)


def test_reservoir_config_validation():
    with pytest.raises(ValueError):
        ReservoirConfig(u=2.0)
