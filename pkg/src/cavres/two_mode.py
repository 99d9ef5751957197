"""Reservoir for an entangled two-mode cat: one atom addressing two detuned modes a and b.

Joint ordering is atom (x) a (x) b, so the basis index of |s, n_a, n_b> is
s * dim_a * dim_b + n_a * dim_b + n_b with s = 0 for g and 1 for e.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from . import _integrate
from .errors import DimensionMismatch, TimingConstraintViolated, TruncationLoss
from .fock import FockSpace
from .open_systems import DampingChannel, ThermalBath
from .phase_space import displaced_parity_elements
from .propagators import CouplingProfile, DetuningProfile, _pieces, rot_y
from .reservoir import apply_kraus, atom_amplitudes

TWO_PI = 2 * np.pi


def pi_pulse(phase=0.0):
    """Atom flip |g> <-> |e> about an equatorial axis set by ``phase``."""
    return np.array([[0, np.exp(1j * phase)], [np.exp(-1j * phase), 0]], dtype=complex)


@dataclass(frozen=True)
class TwoModeSpace:
    dim_a: int = 10
    dim_b: int = 10

    def __post_init__(self):
        if self.dim_a < 2 or self.dim_b < 2:
            raise ValueError("each mode needs at least two Fock levels")

    @property
    def dims(self):
        return (self.dim_a, self.dim_b)

    @property
    def field_dim(self):
        return self.dim_a * self.dim_b

    @property
    def dim(self):
        return 2 * self.field_dim

    def numbers(self):
        """(N_a, N_b) as flattened diagonals over the two-mode field basis."""
        na, nb = np.meshgrid(np.arange(self.dim_a), np.arange(self.dim_b), indexing="ij")
        return na.ravel().astype(float), nb.ravel().astype(float)

    def field_ops(self):
        """Annihilation operators a and b on the two-mode field."""
        sa, sb = FockSpace(self.dim_a), FockSpace(self.dim_b)
        return np.kron(sa.a, np.eye(self.dim_b)), np.kron(np.eye(self.dim_a), sb.a)


@dataclass(frozen=True)
class TwoModeConfig:
    """Two-mode operating point.

    Parameters
    ----------
    Delta : float
        Half the mode splitting (rad/s).
    T : float
        Sample period; T * Delta must be a multiple of 2 pi.
    """

    Delta: float
    u: float
    theta_r: float
    v: float
    T: float
    profile: CouplingProfile = field(default_factory=CouplingProfile)
    pulse_phase: float = 0.0

    def __post_init__(self):
        turns = self.T * self.Delta / TWO_PI
        if abs(turns - round(turns)) > 1e-9 * max(1.0, turns):
            raise TimingConstraintViolated(f"T * Delta = {turns:.12g} x 2 pi is not a whole number of turns")
        if self.T < self.profile.transit_time(self.v) * (1 - 1e-12):
            raise ValueError("T must cover the transit through the mode")
        self.t_r  # validates theta_r

    @classmethod
    def build(cls, Delta, v, u=np.pi / 4, theta_r=np.pi / 2, profile=None, pulse_phase=0.0):
        """Period rounded up from the transit time to the next whole number of 2 pi / Delta."""
        profile = profile or CouplingProfile()
        turns = np.ceil(profile.transit_time(v) * Delta / TWO_PI - 1e-9)
        return cls(Delta=Delta, u=u, theta_r=theta_r, v=v, T=turns * TWO_PI / Delta, profile=profile,
                   pulse_phase=pulse_phase)

    @property
    def t_r(self):
        """Duration of each one-mode resonant window, [-t_r, 0] and [0, t_r]."""
        return self.profile.t_r_for_theta(2 * self.theta_r, self.v) / 2

    @property
    def phi_bar(self):
        """Dispersive phase per photon, integral of Omega^2 / (2 Delta) over [-T/2, -t_r]."""
        return self.profile.omega_sq_integral(-self.T / 2, -self.t_r, self.v) / (2 * self.Delta)

    def detuning(self, pulse=None):
        pulse = pi_pulse(self.pulse_phase) if pulse is None else pulse
        half, tr = self.T / 2, self.t_r
        return DetuningProfile(
            segments=((-half, -tr, 0.0), (-tr, 0.0, self.Delta), (0.0, tr, -self.Delta), (tr, half, 0.0)),
            events=((tr, pulse),),
        )

    def atom_state(self):
        """Ramsey-compensated preparation: phase Delta (T/2 - t_r) split between g and e."""
        f = self.Delta * (self.T / 2 - self.t_r)
        return atom_amplitudes(self.u) * np.exp(np.array([0.5j, -0.5j]) * f)


# ------------------------------------------------------------ Hamiltonian


def two_mode_terms(space):
    """(mode splitting, detuning, coupling) terms; H = H_split + delta H_d + Omega H_c."""
    na, nb = space.numbers()
    f = space.field_dim
    h_split = np.diag(np.tile(nb - na, 2)).astype(complex)
    h_d = np.diag(np.concatenate([-0.5 * np.ones(f), 0.5 * np.ones(f)])).astype(complex)
    a, b = space.field_ops()
    h_c = np.zeros((2 * f, 2 * f), dtype=complex)
    h_c[:f, f:] = 0.5j * (a + b).conj().T
    h_c[f:, :f] = -0.5j * (a + b)
    return h_split, h_d, h_c


def two_mode_hamiltonian(delta, s, config, space):
    """Joint Hamiltonian at detuning ``delta`` and atom position ``s``."""
    h_split, h_d, h_c = two_mode_terms(space)
    return config.Delta * h_split + delta * h_d + float(config.profile.omega(s)) * h_c


def _split_detuning(detuning):
    """Sub-profiles before and after the single pulse event."""
    (tp, _), = detuning.events
    before = tuple(s for s in detuning.segments if s[1] <= tp)
    after = tuple(s for s in detuning.segments if s[0] >= tp)
    return DetuningProfile(before), DetuningProfile(after)


def _integrate_profile(config, space, detuning, tol):
    pieces = []
    for t1, t2, fn in _pieces(detuning, config.profile, config.v):
        def coeff(t, fn=fn):
            c = fn(t)
            return np.concatenate([np.full(c.shape[:-1] + (1,), config.Delta), c], axis=-1)
        pieces.append((t1, t2, coeff))
    return _integrate.propagate(two_mode_terms(space), pieces, tol=tol)


@dataclass(frozen=True)
class SplitPropagator:
    """Integrated evolution before and after the pi pulse; the pulse itself is applied on demand."""

    before: np.ndarray
    after: np.ndarray

    def with_pulse(self, pulse):
        return self.after @ np.kron(pulse, np.eye(self.before.shape[0] // 2)) @ self.before


def exact_two_mode_split(config, space, tol=1e-9):
    before, after = _split_detuning(config.detuning())
    return SplitPropagator(_integrate_profile(config, space, before, tol),
                           _integrate_profile(config, space, after, tol))


def exact_two_mode_propagator(config, space, detuning=None, tol=1e-9):
    """Integrated propagator over [-T/2, T/2] with the pi pulse as an instantaneous atom flip."""
    if detuning is None:
        return exact_two_mode_split(config, space, tol).with_pulse(pi_pulse(config.pulse_phase))
    pieces = []
    for t1, t2, fn in _pieces(detuning, config.profile, config.v):
        def coeff(t, fn=fn):
            c = fn(t)
            return np.concatenate([np.full(c.shape[:-1] + (1,), config.Delta), c], axis=-1)
        pieces.append((t1, t2, coeff))
    eye = np.eye(space.field_dim)
    events = [(t, np.kron(op, eye)) for t, op in detuning.events]
    return _integrate.propagate(two_mode_terms(space), pieces, events, tol=tol)


# ------------------------------------------------------- analytic sequence


def two_mode_phase(f_values, space):
    """Diagonal |g><g| e^{i f(Na,Nb)/2} + |e><e| e^{-i f(Na+1,Nb+1)/2}.

    ``f_values`` is a callable f(n_a, n_b) evaluated on the field grid.
    """
    na, nb = space.numbers()
    return np.diag(np.concatenate([np.exp(0.5j * f_values(na, nb)), np.exp(-0.5j * f_values(na + 1, nb + 1))]))


def _embed(y, space, mode):
    """Atom-plus-one-mode unitary acting on (atom, mode) with identity on the other mode."""
    da, db = space.dims
    if mode == "a":
        y4 = y.reshape(2, da, 2, da)
        full = np.einsum("sitk,jl->sijtkl", y4, np.eye(db))
    else:
        y4 = y.reshape(2, db, 2, db)
        full = np.einsum("sjtl,ik->sijtkl", y4, np.eye(da))
    return full.reshape(space.dim, space.dim)


def resonant_rotation(theta_r, space, mode):
    dim = space.dim_a if mode == "a" else space.dim_b
    y = rot_y(theta_r * np.sqrt(np.arange(dim + 1)), FockSpace(dim))
    return _embed(y, space, mode)


def analytic_sequence(config, space, phi_bar=None):
    """Effective propagator Z(phi (Nb - Na)) Y_a Y_b Z(phi (Na - Nb)) and its factors.

    Returns
    -------
    U : ndarray
    factors : list of (name, ndarray) in application order
    """
    phi = config.phi_bar if phi_bar is None else phi_bar
    factors = [
        ("phase_in", two_mode_phase(lambda na, nb: phi * (na - nb), space)),
        ("resonant_b", resonant_rotation(config.theta_r, space, "b")),
        ("resonant_a", resonant_rotation(config.theta_r, space, "a")),
        ("phase_out", two_mode_phase(lambda na, nb: phi * (nb - na), space)),
    ]
    u = np.eye(space.dim, dtype=complex)
    for _, op in factors:
        u = op @ u
    return u, factors


def kerr_like_unitary(t_gamma, space):
    """Field diagonal of exp(-i t H_K) with H_K = -gamma((Na + Nb)^2 + 2 Na), t gamma = ``t_gamma``."""
    na, nb = space.numbers()
    return np.exp(1j * t_gamma * ((na + nb) ** 2 + 2 * na))


def two_mode_coherent(alpha_a, alpha_b, space):
    from .fock import coherent

    return np.kron(coherent(alpha_a, FockSpace(space.dim_a)), coherent(alpha_b, FockSpace(space.dim_b)))


def entangled_cat(alpha, space, beta=0.0):
    """(|alpha, alpha> - i e^{i beta} |-alpha, -alpha>) / norm."""
    psi = _coh(alpha, space.dim_a)[:, None] * _coh(alpha, space.dim_b)[None, :]
    psi = psi - 1j * np.exp(1j * beta) * _coh(-alpha, space.dim_a)[:, None] * _coh(-alpha, space.dim_b)[None, :]
    psi = psi.ravel()
    return psi / np.linalg.norm(psi)


def _coh(alpha, dim):
    from scipy.special import gammaln

    n = np.arange(dim)
    alpha = complex(alpha)
    if alpha == 0:
        out = np.zeros(dim, dtype=complex)
        out[0] = 1
        return out
    return np.exp(-abs(alpha) ** 2 / 2 + n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1) + 1j * np.angle(alpha) * n)


def optimize_entangled_fidelity(rho, space, with_beta=False):
    """Maximize <c|rho|c> over the entangled cat family (complex alpha, optionally beta).

    Returns
    -------
    F, alpha, beta
    """
    rho = np.asarray(rho)
    na, nb = space.numbers()
    mean_n = float(np.real(np.sum((na + nb) * np.diag(rho)))) / 2
    r0 = np.sqrt(max(mean_n, 1e-3))

    def neg(p):
        psi = entangled_cat(p[0] + 1j * p[1], space, p[2] if with_beta else 0.0)
        return -float(np.real(np.vdot(psi, rho @ psi)))

    best = None
    for ph in np.linspace(0, 2 * np.pi, 8, endpoint=False):
        a0 = r0 * np.exp(1j * ph)
        res = minimize(neg, [a0.real, a0.imag, 0.0], method="Nelder-Mead",
                       options=dict(xatol=1e-7, fatol=1e-10, maxiter=4000))
        if best is None or res.fun < best.fun:
            best = res
    beta = float(best.x[2]) if with_beta else 0.0
    return -float(best.fun), complex(best.x[0] + 1j * best.x[1]), beta


# ------------------------------------------------------------ Kraus + run


def two_mode_kraus(U, atom_state):
    """Kraus operators (M_g, M_e) on the two-mode field for a given complex atom preparation."""
    U = np.asarray(U)
    if U.shape[0] % 2:
        raise DimensionMismatch("joint unitary needs an even dimension")
    f = U.shape[0] // 2
    c = np.asarray(atom_state, dtype=complex)
    m_g = c[0] * U[:f, :f] + c[1] * U[:f, f:]
    m_e = c[0] * U[f:, :f] + c[1] * U[f:, f:]
    return (m_g, m_e)


@dataclass
class TwoModeRun:
    """Per-sample states of a two-mode reservoir run (index k = state after k samples)."""

    states: list
    switch_off: int | None
    config: TwoModeConfig
    space: TwoModeSpace

    def fidelities(self, target):
        return np.array([float(np.real(np.vdot(target, r @ target))) for r in self.states])


def two_mode_reservoir_run(kraus, space, config, bath, num_samples, p_at=0.3, switch_off=None, rng=None):
    """Iterate the two-mode reservoir from vacuum with per-mode damping after every sample.

    Without ``rng`` the sample-averaged map (1 - p_at) rho + p_at K(rho) is used;
    with ``rng`` atoms are drawn per sample. From sample ``switch_off`` on, no
    atom is sent and only damping acts.
    """
    baths = bath if isinstance(bath, (tuple, list)) else (bath, bath)
    chans = [DampingChannel(b, config.T, d) if b is not None else None for b, d in zip(baths, space.dims)]
    rho = np.zeros((space.field_dim,) * 2, dtype=complex)
    rho[0, 0] = 1
    states = [rho]
    for k in range(num_samples):
        active = switch_off is None or k < switch_off
        if active:
            if rng is None:
                rho = (1 - p_at) * rho + p_at * apply_kraus(rho, kraus)
            elif rng.random() < p_at:
                rho = apply_kraus(rho, kraus)
        for mode, ch in enumerate(chans):
            if ch is not None:
                rho = ch.apply_to_mode(rho, space.dims, mode)
        states.append(rho)
    return TwoModeRun(states, switch_off, config, space)


# ------------------------------------------------------------------ Bell


def _check_amplitudes(gammas, dims):
    g = np.abs(np.asarray(gammas))
    if g.size and g.max() > np.sqrt(min(dims)):
        raise TruncationLoss(f"displacement {g.max():.3g} exceeds the truncation comfort sqrt(dim)")


def two_mode_wigner(rho, gamma_a, gamma_b, dims):
    """W(gamma_a, gamma_b) = (4/pi^2) Tr(rho D_a(2 gamma_a) P_a (x) D_b(2 gamma_b) P_b) on all pairs.

    ``gamma_a`` and ``gamma_b`` are 1-d arrays; returns shape (len(gamma_a), len(gamma_b)).
    """
    da, db = dims
    ga = np.atleast_1d(np.asarray(gamma_a, dtype=complex))
    gb = np.atleast_1d(np.asarray(gamma_b, dtype=complex))
    _check_amplitudes(np.concatenate([ga, gb]), dims)
    A = displaced_parity_elements(2 * ga, da)
    B = displaced_parity_elements(2 * gb, db)
    r = np.asarray(rho).reshape(da, db, da, db)
    # Tr(rho (A x B)) = sum rho[i,j,k,l] A[k,i] B[l,j]
    tmp = np.einsum("ijkl,pki->pjl", r, A)
    return (4 / np.pi**2) * np.real(np.einsum("pjl,qlj->pq", tmp, B))


def bell_signal(rho, gammas, dims):
    """B = (pi^2/4)|W(a', b') + W(a, b') + W(a', b) - W(a, b)| for gammas = (a, b, a', b')."""
    ga, gb, gap, gbp = gammas
    w = two_mode_wigner(rho, [ga, gap], [gb, gbp], dims)
    return (np.pi**2 / 4) * abs(w[1, 1] + w[0, 1] + w[1, 0] - w[0, 0])


def maximize_bell(rho, dims, grid_points=17, span=1.0, restarts=8):
    """Largest Bell signal with all four amplitudes on the imaginary axis.

    A coarse grid of ``grid_points`` values per amplitude in [-span, span]
    seeds ``restarts`` Powell refinements.

    Returns
    -------
    B_max, (gamma_a, gamma_b, gamma_a', gamma_b')
    """
    y = np.linspace(-span, span, grid_points)
    w = two_mode_wigner(rho, 1j * y, 1j * y, dims)
    # B[a, b, a', b'] on the grid
    grid = (np.pi**2 / 4) * np.abs(
        w[None, None, :, :] + w[:, None, None, :] + w.T[None, :, :, None] - w[:, :, None, None]
    )
    flat = np.argsort(grid.ravel())[::-1]
    starts = []
    for idx in flat:
        p = np.array(np.unravel_index(idx, grid.shape))
        if all(np.abs(p - q).max() > 1 for q in starts):
            starts.append(p)
        if len(starts) == restarts:
            break

    def neg(x):
        try:
            return -bell_signal(rho, 1j * x, dims)
        except TruncationLoss:
            return 0.0

    best_val, best_x = -np.inf, None
    for p in starts:
        x0 = y[p]
        res = minimize(neg, x0, method="Powell", options=dict(xtol=1e-6, ftol=1e-10))
        if -res.fun > best_val:
            best_val, best_x = -res.fun, res.x
    return float(best_val), tuple(1j * best_x)


def bell_trace(run, every=1, **kw):
    """B_max after every ``every``-th sample of a run."""
    idx = np.arange(0, len(run.states), every)
    return idx, np.array([maximize_bell(run.states[k], run.space.dims, **kw)[0] for k in idx])


def lossless_fidelity(U, config, space, num_samples=200, p_at=0.3):
    """Fidelity of the undamped state after ``num_samples`` to the best entangled cat."""
    kraus = two_mode_kraus(U, config.atom_state())
    run = two_mode_reservoir_run(kraus, space, config, (None, None), num_samples, p_at)
    return optimize_entangled_fidelity(run.states[-1], space)[0]


def calibrate_pulse_phase(split, config, space, num_samples=200, p_at=0.3, grid=8):
    """Pulse axis maximizing the undamped fidelity; the dependence has period pi.

    Returns
    -------
    phase, fidelity
    """
    def neg(ph):
        return -lossless_fidelity(split.with_pulse(pi_pulse(ph)), config, space, num_samples, p_at)

    phases = np.linspace(-np.pi, 0, grid, endpoint=False)
    vals = [neg(p) for p in phases]
    k = int(np.argmin(vals))
    step = np.pi / grid
    res = minimize_scalar(neg, bounds=(phases[k] - step, phases[k] + step), method="bounded",
                          options=dict(xatol=1e-3))
    return float(res.x), float(-res.fun)
