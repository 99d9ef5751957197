"""Acceptance criteria, each at its stated tolerance, one PASS/FAIL line per criterion."""
import math
import time

import numpy as np
import pytest

from cavres.fock import FockSpace, coherent, fock, kerr_propagator, ket2dm
from cavres.open_systems import (
    DampedSteadyParams,
    DampingChannel,
    ThermalBath,
    mu_distribution,
    mu_ode_residual,
    reconstruct_rho_h_inf,
)
from cavres.phase_space import fidelity, marginal, optimize_cat_fidelity
from cavres.propagators import (
    CouplingProfile,
    DetuningProfile,
    InteractionParams,
    calibrate_velocity,
    composite_angles,
    exact_propagator,
    factorized_composite,
    resonant_propagator,
    rot_x,
    rot_y,
    rot_z,
)
from cavres.reservoir import (
    apply_kraus,
    completeness_residual,
    iterate_to_steady,
    kraus_from_propagator,
    model_rate,
    resonant_kraus,
    resonant_pointer_state,
)
from cavres.scenarios import _damped_steady, _setup, _two_mode_setup, bell_threshold_tc, default_config, run_scenario
from cavres.two_mode import (
    TwoModeConfig,
    TwoModeSpace,
    analytic_sequence,
    bell_signal,
    entangled_cat,
    kerr_like_unitary,
    optimize_entangled_fidelity,
    two_mode_reservoir_run,
)
from conftest import random_density, random_unitary

pytestmark = pytest.mark.slow
CASES = 100


class Criterion:
    """Collects sub-checks and prints a single verdict line."""

    def __init__(self, number, title):
        self.number, self.title, self.parts, self.ok = number, title, [], True
        self.start = time.perf_counter()

    def check(self, label, value, ok, expected):
        self.ok &= bool(ok)
        self.parts.append(f"{label}={value:.6g} {'ok' if ok else 'FAIL'} (want {expected})")
        return ok

    def within(self, label, value, low, high):
        return self.check(label, value, low <= value <= high, f"[{low:g}, {high:g}]")

    def runtime(self, limit):
        wall = time.perf_counter() - self.start
        return self.check("runtime_s", wall, wall < limit, f"< {limit:g}")

    def report(self, capsys):
        line = f"{'PASS' if self.ok else 'FAIL'} criterion {self.number} {self.title}: " + "; ".join(self.parts)
        with capsys.disabled():
            print("\n" + line)
        assert self.ok, line


def test_criterion_01_resonant_pointer(capsys):
    c = Criterion(1, "resonant pointer state")
    psi = resonant_pointer_state(0.4, 0.5, FockSpace(51))
    n = float(np.sum(np.arange(51) * np.abs(psi) ** 2))
    c.within("mean_n", n, 6.19, 6.23)
    c.runtime(1.0)
    c.report(capsys)


def test_criterion_02_small_angle_coherence(capsys):
    c = Criterion(2, "small-angle coherence")
    sp = FockSpace(51)
    psi = resonant_pointer_state(0.4, 0.1, sp)
    f = fidelity(coherent(4 * math.tan(0.05) / 0.4, sp), psi)
    c.check("fidelity", f, f > 0.999, "> 0.999")
    c.runtime(1.0)
    c.report(capsys)


def test_criterion_03_convergence_rate(capsys):
    c = Criterion(3, "convergence linearity and rate")
    sp = FockSpace(90)
    rates = {}
    for u in (0.1, 0.5, 1.0):
        out = iterate_to_steady(ket2dm(fock(0, sp)), resonant_kraus(0.4, u, sp), max_iters=1500,
                                target=resonant_pointer_state(0.4, u, sp))
        rates[u] = out.lambda_conv
        c.check(f"r2(u={u})", out.r2, out.r2 > 0.995, "> 0.995")
    target = 2 * abs(math.log(1 - 0.4**2 / 8))
    c.check("model_rate", model_rate(0.4), abs(model_rate(0.4) - 0.0404) < 5e-4, "0.0404")
    c.check("lambda(u=0.5)", rates[0.5], abs(rates[0.5] / target - 1) < 0.2, f"{target:.4f} +- 20%")
    spread = abs(rates[1.0] - rates[0.1]) / rates[0.1]
    c.check("u_dependence", spread, spread < 0.2, "< 0.2")
    c.runtime(10.0)
    c.report(capsys)


def test_criterion_04_composite_pointer(capsys):
    c = Criterion(4, "composite pointer state")
    v = calibrate_velocity(2.2, math.pi / 2)
    cfg = default_config("composite-pointer").replace(v=v, theta_r=math.pi / 2, u=0.45 * math.pi)
    res = run_scenario("composite-pointer", cfg)
    k = res.key_numbers
    c.check("v", v, True, "calibrated")
    c.within("mean_n", k["mean_n"], 2.93, 2.99)
    c.within("frame_coherent_fidelity", k["frame_coherent_fidelity"], 0.997, 1.001)
    c.within("cat_fidelity", k["cat_fidelity"], 0.93, 0.97)
    c.within("rate_per_s", k["rate_per_s"], 1400 * 0.85, 1400 * 1.15)
    c.runtime(60.0)
    c.report(capsys)


def test_criterion_05_oracle_equivalence(capsys):
    c = Criterion(5, "analytic vs exact propagators")
    cfg = default_config("decoherence")
    f = {}
    for kind in ("analytic", "exact"):
        rho, _ = _damped_steady(cfg, kind=kind)
        f[kind] = optimize_cat_fidelity(rho)[0]
    diff = abs(f["analytic"] - f["exact"])
    c.check("steady_fidelity_diff", diff, diff < 0.01, "< 0.01")
    setup = _setup(cfg)
    sp = FockSpace(cfg.dim)
    half = setup.t_r / 2
    ua, _ = resonant_propagator(InteractionParams(-half, half, setup.v), setup.profile, sp)
    ue = exact_propagator(DetuningProfile(((-half, half, 0.0),)), setup.profile, sp, setup.v)
    du = float(np.abs(ua - ue).max())
    c.check("resonant_max_abs_dU", du, du < 1e-6, "< 1e-6")
    c.runtime(60.0)
    c.report(capsys)


def test_criterion_06_decoherence(capsys):
    c = Criterion(6, "decoherence competition")
    base = default_config("decoherence")
    variants = [(0.3, "bernoulli", (0.66, 0.74), (2.6, 2.8)), (0.2, "poisson", (0.49, 0.59), (1.8, 2.0)),
                (0.5, "poisson", (0.29, 0.39), None)]
    for p, law, fb, nb in variants:
        cfg = base.replace(p_at=p, atom_law=law)
        k = run_scenario("decoherence", cfg).key_numbers
        c.within(f"F(p={p})", k["cat_fidelity"], *fb)
        if nb:
            c.within(f"N(p={p})", k["mean_n"], *nb)
    c.runtime(600.0)
    c.report(capsys)


def test_criterion_07_jump_recovery(capsys):
    c = Criterion(7, "jump recovery")
    k = run_scenario("jump-recovery", default_config("jump-recovery")).key_numbers
    c.within("sample_of_min_mean_n", k["sample_of_min_mean_n"], 3, 6)
    c.within("samples_to_90pct_plateau", k["samples_to_90pct"], 0, 30)
    c.runtime(60.0)
    c.report(capsys)


def test_criterion_08_mu_steady_state(capsys):
    c = Criterion(8, "mu(z) steady state")
    cfg = default_config("damped-marginals")
    setup = _setup(cfg)
    params = DampedSteadyParams.from_reservoir(cfg.u, setup.theta_r, setup.T, cfg.T_c)
    a = params.alpha_c_inf
    z = np.linspace(-a, a, 401)[5:-5]
    res = float(np.abs(mu_ode_residual(params, z)).max() / np.abs(mu_distribution(params, z)).max())
    c.check("ode_residual", res, res < 1e-6, "< 1e-6")
    edge = float(abs(mu_distribution(params, np.array([-a]))[0]))
    c.check("mu(-alpha)", edge, edge == 0.0, "0")
    k = run_scenario("damped-marginals", cfg).key_numbers
    c.check("model_peak", k["model_peak"], abs(k["model_peak"] - a) < 0.25, f"near {a:.3f}")
    rho = reconstruct_rho_h_inf(params, FockSpace(cfg.dim))
    x = np.array([-a, a])
    dens = marginal(rho, "re", x)[1]
    ratio = float(dens[0] / dens[1])
    c.check("weight(-alpha)/weight(alpha)", ratio, ratio < 0.05, "< 0.05")
    c.runtime(10.0)
    c.report(capsys)


def test_criterion_09_two_mode(capsys):
    c = Criterion(9, "two-mode reservoir")
    cfg = default_config("twomode-bell")
    res = run_scenario("twomode-bell", cfg).key_numbers
    c.within("fidelity_200", res["fidelity"], 0.86, 0.92)
    c.within("bell_max", res["bell_max"], 2.05, 2.15)
    config, space, kraus = _two_mode_setup(cfg.Delta, cfg.v, math.pi / 4, math.pi / 2, cfg.omega0, cfg.w,
                                           cfg.dim_two_mode)
    run = two_mode_reservoir_run(kraus, space, config, ThermalBath(cfg.T_c, cfg.n_t), cfg.iterations, cfg.p_at)
    f200, alpha, _ = optimize_entangled_fidelity(run.states[-1], space)
    fid = run.fidelities(entangled_cat(alpha, space))
    k90 = int(np.argmax(fid >= 0.9 * f200))
    c.within("samples_to_90pct_plateau", k90, 20, 40)
    for f_hz, v in ((300e3, 30.0), (400e3, 22.0), (500e3, 18.0)):
        setting = _two_mode_setup(2 * math.pi * f_hz, v, math.pi / 4, math.pi / 2, cfg.omega0, cfg.w,
                                  cfg.dim_two_mode)
        tc = bell_threshold_tc(*setting, cfg.n_t, cfg.p_at, cfg.iterations)
        c.check(f"crossing_{int(f_hz / 1e3)}kHz_s", tc, 0.40 <= tc <= 0.50, "[0.4, 0.5]")
    c.runtime(900.0)
    c.report(capsys)


def test_criterion_10_invariants(capsys):
    c = Criterion(10, "invariant suite")
    rng = np.random.default_rng(2024)
    worst = dict(completeness=0.0, trace=0.0, hermiticity=0.0, positivity=0.0, unitarity=0.0, bell=0.0,
                 conjugation=0.0, kerr_like=0.0)
    sp = FockSpace(8)
    for _ in range(CASES):
        u = rng.uniform(0, 1.5)
        ops = kraus_from_propagator(random_unitary(rng, 2 * sp.dim), u).ops
        worst["completeness"] = max(worst["completeness"], completeness_residual(ops),
                                    completeness_residual(resonant_kraus(rng.uniform(0.1, 2.0), u, sp).ops))
        rho = random_density(rng, sp.dim, rank=1 + rng.integers(sp.dim))
        chan = DampingChannel(ThermalBath(rng.uniform(1e-3, 1.0), rng.uniform(0, 0.5)), rng.uniform(1e-5, 1e-2),
                              sp.dim)
        out = chan(apply_kraus(rho, ops))
        worst["trace"] = max(worst["trace"], abs(np.trace(out) - 1))
        worst["hermiticity"] = max(worst["hermiticity"], np.abs(out - out.conj().T).max())
        worst["positivity"] = max(worst["positivity"], -np.linalg.eigvalsh(out).min())

        f = np.concatenate([[0.0], rng.uniform(-7, 7, sp.dim)])
        eye = np.eye(2 * sp.dim)
        mats = [rot_x(f, sp), rot_y(f, sp), rot_z(f, sp),
                kerr_propagator(rng.uniform(-1, 1), 1.0, rng.uniform(-1, 1), sp)]
        worst["unitarity"] = max(worst["unitarity"],
                                 *(np.abs(m.conj().T @ m - np.eye(len(m))).max() for m in mats))

        # Z(-phi) X(-xi) Y(theta) X(-xi) Z(phi) = Z(-phi_c) Y(theta_c) Z(phi_c)
        n = np.arange(sp.dim + 1)
        theta = rng.uniform(0.2, 2.0) * np.sqrt(n)
        phi = rng.uniform(-5, 5) * n
        xi = np.concatenate([[0.0], rng.uniform(-1.5, 1.5, sp.dim)])
        lhs = rot_z(-phi, sp) @ rot_x(-xi, sp) @ rot_y(theta, sp) @ rot_x(-xi, sp) @ rot_z(phi, sp)
        rhs = factorized_composite(composite_angles(theta, phi, xi), sp)
        worst["conjugation"] = max(worst["conjugation"], np.abs(lhs - rhs).max())
        assert np.abs(rhs.conj().T @ rhs - eye).max() < 1e-12

        d = 5
        w = rng.dirichlet(np.ones(3))
        prod = sum(p * np.kron(random_density(rng, d, 1 + rng.integers(d)), random_density(rng, d, 1 + rng.integers(d)))
                   for p in w)
        worst["bell"] = max(worst["bell"], bell_signal(prod, tuple(1j * rng.uniform(-1, 1, 4)), (d, d)))

        tsp = TwoModeSpace(4, 4)
        cfg = TwoModeConfig.build(8 * CouplingProfile().omega0, 22.0, theta_r=rng.uniform(0.2, 2.0))
        ut, fac = analytic_sequence(cfg, tsp, phi_bar=math.pi)
        k = np.tile(kerr_like_unitary(math.pi / 2, tsp), 2)
        worst["kerr_like"] = max(worst["kerr_like"],
                                 np.abs(k[:, None] * (fac[2][1] @ fac[1][1]) * k.conj()[None, :] - ut).max(),
                                 np.abs(ut.conj().T @ ut - np.eye(tsp.dim)).max())
    limits = dict(completeness=1e-12, trace=1e-12, hermiticity=1e-12, positivity=1e-12, unitarity=1e-12,
                  conjugation=1e-10, kerr_like=1e-10)
    for key, lim in limits.items():
        c.check(key, worst[key], worst[key] < lim, f"< {lim:g}")
    c.check("bell_separable", worst["bell"], worst["bell"] <= 2 + 1e-9, "<= 2")
    c.runtime(300.0)
    c.report(capsys)


def test_criterion_11_robustness(capsys):
    c = Criterion(11, "robustness sweeps")
    base = default_config("robustness")
    f0 = run_scenario("robustness", base).key_numbers["cat_fidelity"]
    c.check("F_ref", f0, True, "reference")
    fv = [run_scenario("robustness", base.replace(v=v)).key_numbers["cat_fidelity"] for v in np.linspace(66, 74, 5)]
    c.within("F_min(v)", min(fv), 0.62, 0.73)
    c.within("F_max(v)", max(fv), 0.62, 0.73)
    drops = []
    for a1 in (0.9, 1.0, 1.1):
        for a2 in (0.9, 1.0, 1.1):
            if (a1, a2) != (1.0, 1.0):
                drops.append(f0 - run_scenario("robustness", base.replace(a1=a1, a2=a2)).key_numbers["cat_fidelity"])
    c.check("max_drop_detuning_mismatch", max(drops), max(drops) <= 0.10, "<= 0.10")
    ds = max(abs(run_scenario("robustness", base.replace(shift=s)).key_numbers["cat_fidelity"] - f0)
             for s in (-1e-6, 1e-6))
    c.check("shift_1us_change", ds, ds < 0.01, "< 0.01")
    dr = abs(run_scenario("robustness", base.replace(rise_time=2e-7)).key_numbers["cat_fidelity"] - f0)
    c.check("rise_200ns_change", dr, dr < 0.01, "< 0.01")
    c.runtime(1800.0)
    c.report(capsys)
