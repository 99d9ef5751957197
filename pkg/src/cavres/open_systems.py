"""Cavity relaxation competing with the reservoir.

Superoperators act on row-major vectorized matrices, vec(A rho B) = (A kron B^T) vec(rho).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.linalg import expm
from scipy.optimize import brentq
from scipy.special import gammaln, roots_jacobi

from .errors import DivergentNormalization
from .fock import FockSpace, coherent
from .reservoir import apply_kraus


@dataclass(frozen=True)
class ThermalBath:
    """Cavity damping time ``T_c`` (s) and mean thermal photon number ``n_t``."""

    T_c: float
    n_t: float = 0.0

    def __post_init__(self):
        if not self.T_c > 0:
            raise ValueError(f"T_c must be positive, got {self.T_c}")
        if self.n_t < 0:
            raise ValueError(f"n_t must be >= 0, got {self.n_t}")

    @property
    def kappa(self):
        return 1.0 / self.T_c

    @property
    def rate_down(self):
        return self.kappa * (1 + self.n_t)

    @property
    def rate_up(self):
        return self.kappa * self.n_t


def _dissipator(c):
    d = c.shape[0]
    eye = np.eye(d)
    cdc = c.conj().T @ c
    return np.kron(c, c.conj()) - 0.5 * np.kron(cdc, eye) - 0.5 * np.kron(eye, cdc.T)


def hamiltonian_super(h):
    eye = np.eye(h.shape[0])
    return -1j * (np.kron(h, eye) - np.kron(eye, h.T))


def lindblad_generator(bath, space):
    """Dense thermal damping generator (dim^2 x dim^2); intended for small dims."""
    return bath.rate_down * _dissipator(space.a) + bath.rate_up * _dissipator(space.adag)


def apply_super(sup, rho):
    d = rho.shape[0]
    return (sup @ rho.reshape(-1)).reshape(d, d)


class DampingChannel:
    """exp(t L) for thermal damping, exploiting that L only couples rho_{m,n} with equal m - n.

    Each offset k = m - n is an independent tridiagonal block of size dim - |k|,
    exponentiated once at construction.
    """

    def __init__(self, bath, t, dim):
        self.dim = dim
        self.bath = bath
        self.t = t
        n = np.arange(dim, dtype=float)
        # diagonals of a_dag a and a a_dag in the truncated space
        nn = n
        mm = np.where(n < dim - 1, n + 1, 0.0)
        dn, up = bath.rate_down, bath.rate_up
        self.blocks = []
        for k in range(dim):
            j = np.arange(dim - k)
            m_idx = j + k
            gen = np.diag(-0.5 * dn * (nn[m_idx] + nn[j]) - 0.5 * up * (mm[m_idx] + mm[j]))
            # rho_{m,n} <- rho_{m+1,n+1} through a, rho_{m-1,n-1} through a_dag
            off = np.sqrt((m_idx[:-1] + 1) * (j[:-1] + 1))
            gen += np.diag(dn * off, 1) + np.diag(up * off, -1)
            self.blocks.append(expm(gen * t) if t else np.eye(dim - k))

    def __call__(self, rho):
        return self.apply_batched(np.asarray(rho)[..., None])[..., 0]

    def apply_batched(self, x):
        """Apply to x of shape (dim, dim, B) along the first two axes."""
        out = np.empty_like(x, dtype=complex)
        d = self.dim
        for k, e in enumerate(self.blocks):
            j = np.arange(d - k)
            out[j + k, j] = e @ x[j + k, j]
            if k:
                out[j, j + k] = e @ x[j, j + k]
        return out

    def apply_to_mode(self, rho, dims, mode):
        """Damp one mode of a two-mode density matrix with kron order (a, b)."""
        da, db = dims
        r = np.asarray(rho).reshape(da, db, da, db)
        if mode == 0:
            x = r.transpose(0, 2, 1, 3).reshape(da, da, db * db)
            y = self.apply_batched(x).reshape(da, da, db, db).transpose(0, 2, 1, 3)
        else:
            x = r.transpose(1, 3, 0, 2).reshape(db, db, da * da)
            y = self.apply_batched(x).reshape(db, db, da, da).transpose(2, 0, 3, 1)
        return y.reshape(da * db, da * db)

    def superoperator(self):
        """Dense matrix of the channel (for tests)."""
        d = self.dim
        eye = np.eye(d * d)
        return np.stack([self(e.reshape(d, d)).reshape(-1) for e in eye], axis=1)


def damping_channel(bath, t, space):
    return DampingChannel(bath, t, space.dim)


def cat_coherence_decay(alpha, bath, dim=30, points=11, span=0.05):
    """Initial decay rate of a cat's interference term under damping, in units of 1/T_c.

    The coherence c(t) = |<a_t|rho|-a_t>| / sqrt(<a_t|rho|a_t><-a_t|rho|-a_t>),
    with a_t = alpha exp(-t / 2T_c), is tracked over [0, span T_c] and
    -log c is fitted linearly in t. For zero temperature the rate tends to
    2|alpha|^2 as ``span`` goes to 0.
    """
    space = FockSpace(dim)
    plus, minus = coherent(alpha, space), coherent(-alpha, space)
    psi = plus + 1j * minus
    rho = np.outer(psi, psi.conj()) / np.vdot(psi, psi).real
    dt = span * bath.T_c / (points - 1)
    chan = DampingChannel(bath, dt, dim)
    ts, logc = [], []
    for k in range(points):
        t = k * dt
        shrink = np.exp(-t / (2 * bath.T_c))
        p, m = coherent(alpha * shrink, space), coherent(-alpha * shrink, space)
        c = abs(np.vdot(p, rho @ m)) / np.sqrt(np.vdot(p, rho @ p).real * np.vdot(m, rho @ m).real)
        ts.append(t)
        logc.append(np.log(c))
        rho = chan(rho)
    slope = np.polyfit(np.array(ts) / bath.T_c, logc, 1)[0]
    return float(-slope)


# ------------------------------------------------------ reservoir + damping


def check_time_scales(T, bath):
    if T > bath.T_c / 50:
        warnings.warn(f"sample period {T:.3g} s is not small against T_c = {bath.T_c:.3g} s", stacklevel=3)


def interleaved_evolution(rho0, kraus_maps, bath, T, num_samples, p_at, rng, max_atoms=2,
                          model="poisson", observe=None, damping=None):
    """Random-draw reservoir samples interleaved with damping over each period T.

    Parameters
    ----------
    kraus_maps : dict
        Kraus operators (KrausPair or sequence) keyed by atom count >= 1.
    model : {"poisson", "bernoulli"}
        Atom-count law, see :func:`atom_count_law`.
    observe : callable, optional
        Called as ``observe(k, n_atoms, rho)`` after every sample; its return
        values are collected.

    Returns
    -------
    rho, counts, observations
    """
    check_time_scales(T, bath)
    channel = damping or DampingChannel(bath, T, rho0.shape[0])
    probs = atom_count_law(p_at, max_atoms, model)
    counts = rng.choice(len(probs), p=probs, size=num_samples)
    rho = np.asarray(rho0, dtype=complex)
    obs = []
    for k, n_at in enumerate(counts):
        if n_at:
            rho = apply_kraus(rho, kraus_maps[n_at])
        rho = channel(rho)
        if observe is not None:
            obs.append(observe(k, int(n_at), rho))
    return rho, counts, obs


def atom_count_law(p_at, max_atoms=2, model="poisson"):
    """Probabilities of 0..max_atoms atoms per sample.

    "poisson" renormalizes Poisson(p_at) over 0..max_atoms; "bernoulli"
    (max_atoms = 1 only) puts probability p_at on a single atom.
    """
    if model == "bernoulli":
        if max_atoms != 1:
            raise ValueError("the bernoulli law describes single-atom samples only")
        return np.array([1 - p_at, p_at])
    from .reservoir import atom_count_probabilities

    return atom_count_probabilities(p_at, max_atoms)


def averaged_step(kraus_maps, probs, channel):
    """Sample-averaged map rho -> D(sum_n P_n K_n(rho))."""

    def step(rho):
        out = probs[0] * rho
        for n_at, p in enumerate(probs[1:], start=1):
            if p:
                out = out + p * apply_kraus(rho, kraus_maps[n_at])
        return channel(out)

    return step


def averaged_evolution(rho0, step, num_samples, observe=None):
    rho = rho0
    obs = []
    for k in range(num_samples):
        rho = step(rho)
        if observe is not None:
            obs.append(observe(k, rho))
    return rho, obs


def steady_state(step, rho0, tol=1e-11, max_iters=20000, check_every=50):
    """Fixed point of a CPTP step by iteration until the max-element change is below ``tol``.

    Returns the state and the number of steps taken.
    """
    rho = rho0
    for k in range(1, max_iters + 1):
        new = step(rho)
        if k % check_every == 0 and np.abs(new - rho).max() < tol:
            return new, k
        rho = new
    return rho, max_iters


# ------------------------------------------------------------------- MCWF


@dataclass
class JumpRecord:
    sample: int
    time: float
    operator: str


def _no_jump_decay(psi, gammas, t):
    return float(np.sum(np.abs(psi) ** 2 * np.exp(-gammas * t)))


def mcwf_trajectory(psi0, kraus, bath, T, num_samples, rng, p_at=1.0, observe=None):
    """Quantum-jump unraveling of damping between reservoir samples.

    Each sample applies the atom with probability ``p_at``, choosing outcome g
    or e with probability |M psi|^2, then evolves for T under damping. The
    no-jump evolution is diagonal in the Fock basis, so waiting times are drawn
    exactly by inverting the survival probability.

    Returns
    -------
    psi, jumps, observations
    """
    psi = np.asarray(psi0, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    d = psi.shape[0]
    n = np.arange(d, dtype=float)
    down = np.sqrt(n[1:])  # a|n> = sqrt(n)|n-1>
    mm = np.where(n < d - 1, n + 1, 0.0)
    gammas = bath.rate_down * n + bath.rate_up * mm
    ops = kraus.ops if hasattr(kraus, "ops") else kraus
    jumps, obs = [], []
    for k in range(num_samples):
        if rng.random() < p_at:
            outs = [m @ psi for m in ops]
            weights = np.array([np.vdot(o, o).real for o in outs])
            i = rng.choice(len(outs), p=weights / weights.sum())
            psi = outs[i] / np.sqrt(weights[i])
        t_left = T
        while t_left > 0:
            r = rng.random()
            if _no_jump_decay(psi, gammas, t_left) >= r:
                psi = psi * np.exp(-gammas * t_left / 2)
                psi = psi / np.linalg.norm(psi)
                break
            tau = brentq(lambda s: _no_jump_decay(psi, gammas, s) - r, 0.0, t_left, xtol=1e-15 * T + 1e-300)
            psi = psi * np.exp(-gammas * tau / 2)
            lower = np.zeros_like(psi)
            lower[:-1] = down * psi[1:]
            raise_ = np.zeros_like(psi)
            raise_[1:] = down * psi[:-1]
            w_dn = bath.rate_down * np.vdot(lower, lower).real
            w_up = bath.rate_up * np.vdot(raise_, raise_).real
            if rng.random() * (w_dn + w_up) < w_dn:
                psi, name = lower, "a"
            else:
                psi, name = raise_, "a_dag"
            psi = psi / np.linalg.norm(psi)
            jumps.append(JumpRecord(k, T - t_left + tau, name))
            t_left -= tau
        if observe is not None:
            obs.append(observe(k, psi))
    return psi, jumps, obs


# ------------------------------------------------------- simplified model


def kerr_cat_unitary_diag(space):
    """Diagonal of exp(-i pi/2 N^2)."""
    return np.exp(-0.5j * np.pi * space.n**2)


def simplified_model_step(alpha_k, u, theta_r, space):
    """One step of the coherent-amplitude model and the Kerr-rotated state it represents.

    Returns
    -------
    alpha_next : complex
    rho_prime : ndarray
        exp(-i pi/2 N^2) |alpha_k><alpha_k| exp(i pi/2 N^2).
    """
    from .reservoir import simplified_amplitude_step

    psi = kerr_cat_unitary_diag(space) * coherent(alpha_k, space)
    return simplified_amplitude_step(alpha_k, u, theta_r), np.outer(psi, psi.conj())


def recovery_sign_time(alpha_inf, theta_r):
    """Steps until the amplitude, restarted from -alpha_inf, crosses zero: (1 - theta_r^2/8)^k = 1/2."""
    return np.log(0.5) / np.log(1 - theta_r**2 / 8)


def simplified_kerr_generator(beta, kappa, kappa_c, space):
    """Damped-drive generator in the Kerr frame (complex drive ``beta``)."""
    a, n = space.a, space.number
    par = space.parity
    drive = beta * space.adag - np.conj(beta) * a
    sup = hamiltonian_super(1j * drive)
    sup += (kappa + kappa_c) * _dissipator(a)
    pa = par @ a
    # -kappa_c (a rho a_dag - P a rho a_dag P^dag)
    sup += -kappa_c * (np.kron(a, a.conj()) - np.kron(pa, pa.conj()))
    return sup


def simplified_lab_generator(beta, kappa, kappa_c, space):
    """Same dynamics seen through exp(-i pi/2 N^2), with the drive written for a real ``beta``.

    It equals the conjugated Kerr-frame generator whose drive amplitude is ``1j * beta``.
    """
    a = space.a
    par = space.parity
    drive_h = 1j * beta * (space.adag @ par.conj().T - par @ a)  # [X, rho] = -i[iX, rho]
    sup = hamiltonian_super(drive_h)
    pa = par @ a
    sup += kappa * _dissipator(pa)
    sup += kappa_c * _dissipator(a)
    return sup


# ----------------------------------------------------------- mu(z) solution


@dataclass(frozen=True)
class DampedSteadyParams:
    """Parameters of the damped simplified model.

    ``eta`` = kappa_c / kappa, ``alpha_c_inf`` = alpha_inf / (1 + eta) and
    ``r_c`` = 2 kappa_c / (kappa + kappa_c); ``kappa`` and ``beta`` are the
    reservoir rates in s^-1 when built with :meth:`from_reservoir`.
    """

    alpha_inf: float
    eta: float
    r_c: float
    alpha_c_inf: float
    kappa: float = 1.0
    beta: float = 0.0

    @classmethod
    def from_reservoir(cls, u, theta_r, T, T_c):
        kappa = theta_r**2 / (4 * T)
        beta = u * theta_r / (4 * T)
        alpha_inf = 2 * u / theta_r
        eta = 4 * T / (theta_r**2 * T_c)
        return cls(alpha_inf, eta, 2 * eta / (1 + eta), alpha_inf / (1 + eta), kappa, beta)

    @property
    def kappa_c(self):
        return self.eta * self.kappa

    @property
    def exponent(self):
        """p = r_c alpha_c^2: mu ~ (a + z)^p (a - z)^(p - 1) exp(r_c z^2)."""
        return self.r_c * self.alpha_c_inf**2


def _mu_unnormalized(z, params):
    a, p, r = params.alpha_c_inf, params.exponent, params.r_c
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.exp(p * np.log(a + z) + (p - 1) * np.log(a - z) + r * z * z)
    return np.where(z <= -a, 0.0, val)


def mu_normalization(params, tol=1e-10):
    """1 / integral of the unnormalized density, with the endpoint powers as quadrature weights.

    Raises
    ------
    DivergentNormalization
    """
    a, p, r = params.alpha_c_inf, params.exponent, params.r_c
    if not (0 < r < 2 and a > 0):
        raise DivergentNormalization(f"need 0 < r_c < 2 and alpha_c > 0, got {r}, {a}")
    val, err = quad(lambda z: np.exp(r * z * z), -a, a, weight="alg", wvar=(p, p - 1),
                    epsabs=0, epsrel=tol, limit=200)
    if not np.isfinite(val) or val <= 0 or err > 1e-6 * abs(val):
        raise DivergentNormalization(f"normalization integral {val:.6g} +- {err:.2g}")
    return 1.0 / val


def mu_distribution(params, z):
    """Normalized steady-state weight mu(z) of real coherent amplitudes on [-alpha_c, alpha_c]."""
    return mu_normalization(params) * _mu_unnormalized(z, params)


def mu_derivative(params, z):
    a, p, r = params.alpha_c_inf, params.exponent, params.r_c
    z = np.asarray(z, dtype=float)
    return mu_distribution(params, z) * (p / (a + z) - (p - 1) / (a - z) + 2 * r * z)


def mu_ode_residual(params, z):
    """kappa_c z^2 (mu(-z) - mu(z)) - d/dz[mu(z) (beta - (kappa + kappa_c) z / 2)] at interior points."""
    z = np.asarray(z, dtype=float)
    kt = params.kappa + params.kappa_c
    mu = mu_distribution(params, z)
    drift = params.beta - kt * z / 2
    flux_derivative = mu_derivative(params, z) * drift - mu * kt / 2
    return params.kappa_c * z * z * (mu_distribution(params, -z) - mu) - flux_derivative


def reconstruct_rho_h_inf(params, space, nodes=400):
    """Mixture of real coherent states weighted by mu, by Gauss-Jacobi quadrature in z = alpha_c x."""
    a, p, r = params.alpha_c_inf, params.exponent, params.r_c
    x, w = roots_jacobi(nodes, p - 1, p)
    weights = w * np.exp(r * (a * x) ** 2)
    weights = weights / weights.sum()
    n = np.arange(space.dim)
    lgf = gammaln(n + 1)
    z = a * x
    with np.errstate(divide="ignore"):
        logmag = -z[:, None] ** 2 / 2 + n[None, :] * np.log(np.abs(z))[:, None] - 0.5 * lgf[None, :]
    kets = np.exp(logmag) * np.where(z[:, None] < 0, (-1.0) ** n[None, :], 1.0)
    kets[z == 0] = np.eye(space.dim)[0]
    rho = (kets.T * weights) @ kets
    return rho.astype(complex)
