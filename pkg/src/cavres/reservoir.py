"""Kraus maps of the engineered reservoir, pointer states and convergence diagnostics."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import poisson

from .errors import DimensionMismatch, NotConverged, TrappingState
from .fock import FockSpace, coherent, ket2dm, mean_photon
from .propagators import CompositeSetup, CouplingProfile, kerr_frame_generator, rot_y

TRAP_TOL = 1e-10
NEAR_TRAP_TOL = 1e-4


class ConditioningWarning(UserWarning):
    pass


@dataclass(frozen=True)
class KrausPair:
    """Field operators left by one atom, conditioned on its final state g or e."""

    m_g: np.ndarray
    m_e: np.ndarray

    @property
    def ops(self):
        return (self.m_g, self.m_e)

    @property
    def dim(self):
        return self.m_g.shape[0]

    def completeness_residual(self):
        return completeness_residual(self.ops)

    def __call__(self, rho):
        return apply_kraus(rho, self)


def completeness_residual(ops):
    total = sum(m.conj().T @ m for m in ops)
    return float(np.abs(total - np.eye(total.shape[0])).max())


@dataclass(frozen=True)
class ReservoirConfig:
    """Operating point of the single-mode reservoir.

    ``delta0`` is in rad/s; ``p_at`` is the mean number of atoms per sample.
    """

    u: float = 0.45 * np.pi
    theta_r: float = np.pi / 2
    delta0: float = 2.2 * 2 * np.pi * 50e3
    v: float = 70.0
    profile: CouplingProfile = field(default_factory=CouplingProfile)
    p_at: float = 0.3

    def __post_init__(self):
        if not 0 <= self.u < np.pi / 2:
            raise ValueError(f"u must lie in [0, pi/2), got {self.u}")
        if self.p_at < 0:
            raise ValueError(f"p_at must be >= 0, got {self.p_at}")

    @property
    def setup(self):
        return CompositeSetup(v=self.v, theta_r=self.theta_r, delta0=self.delta0, profile=self.profile)


def atom_amplitudes(u):
    return np.array([np.cos(u / 2), np.sin(u / 2)])


def kraus_from_propagator(U, u):
    """Kraus pair of a joint atom (x) field unitary for the atom prepared in cos(u/2)|g> + sin(u/2)|e>.

    Raises
    ------
    DimensionMismatch
        If ``U`` is not square with even size.
    """
    U = np.asarray(U)
    if U.ndim != 2 or U.shape[0] != U.shape[1] or U.shape[0] % 2:
        raise DimensionMismatch(f"atom-field unitary must be square with even size, got {U.shape}")
    d = U.shape[0] // 2
    cg, ce = atom_amplitudes(u)
    m_g = cg * U[:d, :d] + ce * U[:d, d:]
    m_e = cg * U[d:, :d] + ce * U[d:, d:]
    return KrausPair(m_g, m_e)


def two_atom_kraus(U, u):
    """Four Kraus operators (gg, ge, eg, ee) for two atoms in the same initial state."""
    U = np.asarray(U)
    if U.shape[0] % 4:
        raise DimensionMismatch(f"two-atom unitary size {U.shape[0]} is not a multiple of 4")
    d = U.shape[0] // 4
    amp = np.kron(atom_amplitudes(u), atom_amplitudes(u))
    blocks = U.reshape(4, d, 4, d)
    return tuple(np.einsum("c,icj->ij", amp, blocks[a]) for a in range(4))


def apply_kraus(rho, k):
    """rho -> sum_i M_i rho M_i^dag for a KrausPair or a sequence of operators."""
    ops = k.ops if isinstance(k, KrausPair) else k
    return sum(m @ rho @ m.conj().T for m in ops)


# ----------------------------------------------------------- pointer states


def trapping_check(theta_r, n_max, tol=1e-12):
    """Smallest m in 1..n_max with sin(theta_r sqrt(m) / 2) = 0, or None."""
    m = np.arange(1, n_max + 1)
    hit = np.nonzero(np.abs(np.sin(theta_r * np.sqrt(m) / 2)) < tol)[0]
    return int(m[hit[0]]) if hit.size else None


def pointer_state(theta_n, u, space):
    """Joint eigenstate of the Kraus pair of Y(theta_n), built from psi_0 = 1.

    Parameters
    ----------
    theta_n : array
        Rotation angle per photon number; entries 1..dim-1 are used.
    u : float
        Atom preparation angle.

    Raises
    ------
    TrappingState
        If some |sin(theta_m / 2)| < 1e-10, i.e. level m - 1 is decoupled from m.
    """
    theta_n = np.asarray(theta_n, dtype=float)
    if theta_n.shape[0] < space.dim:
        raise DimensionMismatch(f"need {space.dim} angles, got {theta_n.shape[0]}")
    th = theta_n[1 : space.dim]
    s = np.abs(np.sin(th / 2))
    if np.any(s < TRAP_TOL):
        raise TrappingState(int(np.argmax(s < TRAP_TOL)) + 1)
    if np.any(s < NEAR_TRAP_TOL):
        warnings.warn(f"near-trapping level at n = {int(np.argmax(s < NEAR_TRAP_TOL)) + 1}",
                      ConditioningWarning, stacklevel=2)
    ratios = np.tan(u / 2) / np.tan(th / 4)
    psi = np.concatenate([[1.0], np.cumprod(ratios)])
    return (psi / np.linalg.norm(psi)).astype(complex)


def resonant_pointer_state(theta_r, u, space):
    return pointer_state(theta_r * np.sqrt(np.arange(space.dim + 1)), u, space)


def resonant_kraus(theta_r, u, space):
    return kraus_from_propagator(rot_y(theta_r * np.sqrt(np.arange(space.dim + 1)), space), u)


@dataclass(frozen=True)
class CompositePointer:
    """Pointer state of the composite reservoir in the rotation frame and in the lab frame."""

    frame: np.ndarray
    lab: np.ndarray
    h: np.ndarray
    angles: object


def composite_pointer_state(setup, u, space):
    """Pointer state of Z(-phi_c) Y(theta_c) Z(phi_c): exp(-i h) applied to the Y(theta_c) pointer state."""
    angles = setup.angles(space.dim)
    frame = pointer_state(angles.theta_c_n, u, space)
    h = kerr_frame_generator(angles.phi_c_n)
    return CompositePointer(frame=frame, lab=np.exp(-1j * h) * frame, h=h, angles=angles)


# ---------------------------------------------------------------- iteration


@dataclass
class SteadyResult:
    """Outcome of repeated Kraus iteration.

    ``fidelities[k]`` is the overlap with the target after ``k`` maps
    (``fidelities[0]`` belongs to the initial state). ``lambda_conv`` is the
    per-atom decay rate of log|log F| and ``window`` the (first, last) map
    counts used in the fit.
    """

    rho: np.ndarray
    fidelities: np.ndarray
    lambda_conv: float
    window: tuple | None = None
    r2: float = float("nan")
    target: np.ndarray | None = None


def _linfit(k, y):
    slope, icpt = np.polyfit(k, y, 1)
    resid = y - (slope * k + icpt)
    ss = np.sum((y - y.mean()) ** 2)
    return slope, 1 - np.sum(resid**2) / ss if ss > 0 else 1.0


def convergence_rate(fidelities, discard=5, r2_min=0.999, f_stop=1 - 1e-9, k_max=500, min_points=5):
    """Fit -d/dk log|log F_k| over the leading linear stretch.

    The first ``discard`` maps are skipped. The window then grows from
    ``min_points`` samples for as long as its R^2 stays at or above ``r2_min``,
    and never extends past ``k_max`` or the first k with F_k > ``f_stop``.

    Returns
    -------
    rate, (k_first, k_last), r2
    """
    f = np.asarray(fidelities, dtype=float)
    ks = np.arange(len(f))
    last = min(len(f) - 1, k_max)
    above = np.nonzero(f[discard + 1 :] > f_stop)[0]
    if above.size:
        last = min(last, discard + 1 + above[0] - 1)
    first = discard + 1
    if last - first + 1 < min_points:
        # too few clean points: fit whatever is there
        first = max(1, last - min_points + 1)
    if last - first + 1 < 2:
        return float("nan"), None, float("nan")
    y = np.log(np.abs(np.log(np.clip(f, 1e-300, None))))
    end = min(first + min_points - 1, last)
    slope, r2 = _linfit(ks[first : end + 1], y[first : end + 1])
    while end < last:
        s2, q2 = _linfit(ks[first : end + 2], y[first : end + 2])
        if q2 < r2_min:
            break
        end, slope, r2 = end + 1, s2, q2
    return float(-slope), (int(first), int(end)), float(r2)


def _fidelity(target, rho):
    return float(np.real(np.vdot(target, rho @ target)))


def iterate_to_steady(rho0, k, max_iters=500, target=None, tol=1e-12, **fit):
    """Iterate a Kraus map and track fidelity to ``target``.

    Iteration stops early once F > 1 - ``tol``. Without a target, the
    dominant eigenvector of the final state is used (fidelities are then
    computed after the fact).

    Raises
    ------
    NotConverged
        If the final fidelity is still below 1 - 1e-3.
    """
    rho = np.asarray(rho0, dtype=complex)
    if target is not None and _fidelity(target, rho) > 1 - tol:
        return SteadyResult(rho, np.array([_fidelity(target, rho)]), float("nan"), target=target)
    states = [rho]
    fids = [] if target is None else [_fidelity(target, rho)]
    for _ in range(max_iters):
        rho = apply_kraus(rho, k)
        if target is None:
            states.append(rho)
            continue
        fids.append(_fidelity(target, rho))
        if fids[-1] > 1 - tol:
            break
    if target is None:
        w, v = np.linalg.eigh(rho)
        target = v[:, -1]
        fids = [_fidelity(target, s) for s in states]
    fids = np.array(fids)
    if fids[-1] < 1 - 1e-3:
        raise NotConverged(f"fidelity {fids[-1]:.6f} after {len(fids) - 1} maps")
    rate, window, r2 = convergence_rate(fids, **fit)
    return SteadyResult(rho, fids, rate, window, r2, target)


def simplified_amplitude_step(alpha_k, u, theta_r):
    """alpha -> (1 - theta_r^2/8) alpha + u theta_r / 4."""
    return (1 - theta_r**2 / 8) * alpha_k + u * theta_r / 4


def model_rate(theta_r):
    """Per-atom rate 2|log(1 - theta_r^2/8)| of the linearized amplitude model."""
    return 2 * abs(np.log(1 - theta_r**2 / 8))


# -------------------------------------------------------------------- maps


def coherent_fidelity(psi):
    """|<alpha|psi>|^2 for the real coherent state with |alpha|^2 = <N>."""
    space = FockSpace(len(psi))
    return float(abs(np.vdot(coherent(np.sqrt(mean_photon(psi)), space), psi)) ** 2)


def admissible(u, theta_r, n_max):
    """Region of the resonant map: 5 tan(u/2)/sqrt(n_max) < theta_r < 2 pi / sqrt(n_max)."""
    return 5 * np.tan(u / 2) / np.sqrt(n_max) < theta_r < 2 * np.pi / np.sqrt(n_max)


def sweep_pointer_map(us, thetas, dim=51, delta0_over_omega=None, v=None, profile=None, threshold=0.99):
    """Mean photon number and coherent fidelity of the pointer state on a (u, theta_r) grid.

    Resonant reservoir by default. With ``delta0_over_omega`` and ``v`` the
    composite reservoir is used and the fidelity refers to the Y(theta_c)-frame
    state.

    Returns
    -------
    list of dict
        Keys u, theta_r, delta0_over_omega, mean_n, coherent_fidelity, flagged.
    """
    space = FockSpace(dim)
    records = []
    for u in us:
        for th in thetas:
            rec = dict(u=float(u), theta_r=float(th), delta0_over_omega=delta0_over_omega)
            try:
                if delta0_over_omega is None:
                    psi = resonant_pointer_state(th, u, space)
                else:
                    setup = CompositeSetup.from_ratio(v, th, delta0_over_omega, profile)
                    psi = composite_pointer_state(setup, u, space).frame
            except (TrappingState, ValueError):
                rec.update(mean_n=float("nan"), coherent_fidelity=float("nan"), flagged=True)
                records.append(rec)
                continue
            fid = coherent_fidelity(psi)
            rec.update(mean_n=mean_photon(psi), coherent_fidelity=fid, flagged=bool(fid < threshold))
            records.append(rec)
    return records


# --------------------------------------------------------------- sampling


def atom_count_probabilities(p_at, max_atoms=2):
    """Poisson(p_at) probabilities of 0..max_atoms atoms, renormalized."""
    p = poisson.pmf(np.arange(max_atoms + 1), p_at)
    return p / p.sum()


def sample_atom_count(p_at, rng, max_atoms=2, size=None):
    """Atoms in one sample (or ``size`` samples) from the truncated Poisson law."""
    return rng.choice(max_atoms + 1, p=atom_count_probabilities(p_at, max_atoms), size=size)


def steady_state(rho0, k, iters):
    rho = rho0
    for _ in range(iters):
        rho = apply_kraus(rho, k)
    return rho
