"""Single-mode atom-field propagators.

Joint operators act on atom (x) field with atom-major ordering: index ``n`` is
``|g, n>`` and index ``dim + n`` is ``|e, n>``. The Jaynes-Cummings Hamiltonian
used throughout is

    H(t) = delta(t)/2 (|e><e| - |g><g|) + i Omega(v t)/2 (|g><e| a_dag - |e><g| a).

It conserves the excitation number, so every propagator is block diagonal on
``|g, 0>``, the pairs ``B_n = (|g, n+1>, |e, n>)`` and, in the truncated space,
the decoupled top state ``|e, dim-1>``.

Rotation generators take a table ``f`` indexed by photon number ``0..dim``;
block ``B_n`` uses ``f[n+1]``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad_vec
from scipy.optimize import brentq
from scipy.special import erf, erfinv

from . import _integrate
from .errors import DimensionMismatch, NoBracket
from .fock import FockSpace

TWO_PI = 2 * np.pi


class AdiabaticityWarning(UserWarning):
    pass


# ---------------------------------------------------------------- profiles


@dataclass(frozen=True)
class CouplingProfile:
    """Gaussian atom-mode coupling Omega(s) = omega0 exp(-s^2/w^2), zero beyond the cutoff.

    Parameters
    ----------
    omega0 : float
        Peak vacuum Rabi frequency in rad/s.
    w : float
        Mode waist in m.
    cutoff_factor : float
        Coupling is exactly zero for ``|s| > cutoff_factor * w``.
    """

    omega0: float = TWO_PI * 50e3
    w: float = 6e-3
    cutoff_factor: float = 1.5

    @property
    def s_max(self):
        return self.cutoff_factor * self.w

    def omega(self, s):
        s = np.asarray(s, dtype=float)
        return np.where(np.abs(s) <= self.s_max, self.omega0 * np.exp(-(s / self.w) ** 2), 0.0)

    def edge_omega(self):
        """Coupling just inside the cutoff."""
        return self.omega0 * np.exp(-self.cutoff_factor**2)

    def transit_time(self, v):
        """T = 2 cutoff_factor w / v, the time the coupling is nonzero."""
        return 2 * self.s_max / v

    def _clip(self, t1, t2, v):
        tc = self.s_max / v
        return float(np.clip(t1, -tc, tc)), float(np.clip(t2, -tc, tc))

    def theta(self, t1, t2, v):
        """Integral of Omega(v t) over [t1, t2]."""
        a, b = self._clip(t1, t2, v)
        scale = self.omega0 * self.w / v * np.sqrt(np.pi) / 2
        return scale * (erf(v * b / self.w) - erf(v * a / self.w))

    def omega_sq_integral(self, t1, t2, v):
        """Integral of Omega(v t)^2 over [t1, t2]."""
        a, b = self._clip(t1, t2, v)
        r2 = np.sqrt(2.0)
        scale = self.omega0**2 * self.w / v * np.sqrt(np.pi / 2) / 2
        return scale * (erf(r2 * v * b / self.w) - erf(r2 * v * a / self.w))

    def t_r_for_theta(self, theta, v):
        """Duration of the centered window [-t_r/2, t_r/2] with integrated coupling ``theta``."""
        x = theta * v / (self.omega0 * self.w * np.sqrt(np.pi))
        if not 0 <= x < erf(self.cutoff_factor):
            raise ValueError(f"theta = {theta:.4g} is not reachable inside the mode at v = {v:g} m/s")
        return 2 * self.w / v * erfinv(x)


@dataclass(frozen=True)
class InteractionParams:
    """Constant-detuning interaction window (t1, t2) at velocity v and detuning delta0."""

    t1: float
    t2: float
    v: float
    delta0: float = 0.0

    def __post_init__(self):
        if not self.t1 < self.t2:
            raise ValueError(f"need t1 < t2, got ({self.t1}, {self.t2})")


@dataclass(frozen=True)
class DetuningProfile:
    """Piecewise-constant detuning with optional exponential switching.

    Parameters
    ----------
    segments : tuple of (start, end, delta)
        Contiguous, time ordered.
    rise_time : float or None
        If set, entering a segment relaxes delta exponentially from the value
        reached at the end of the previous segment, with this time constant.
    events : tuple of (time, 2x2 atom unitary)
        Instantaneous atom-only pulses.
    """

    segments: tuple
    rise_time: float | None = None
    events: tuple = field(default=())

    def __post_init__(self):
        segs = tuple((float(a), float(b), float(d)) for a, b, d in self.segments)
        object.__setattr__(self, "segments", segs)
        for (a0, b0, _), (a1, _, _) in zip(segs, segs[1:]):
            if not np.isclose(b0, a1, rtol=0, atol=1e-15 + 1e-12 * abs(b0)):
                raise ValueError(f"segments are not contiguous at t = {b0}")
        for a, b, _ in segs:
            if b < a:
                raise ValueError(f"segment [{a}, {b}] is reversed")

    @property
    def start(self):
        return self.segments[0][0]

    @property
    def end(self):
        return self.segments[-1][1]

    def pieces(self):
        """(start, end, delta_fn) per segment, with delta_fn vectorized."""
        out = []
        prev = None
        for a, b, d in self.segments:
            if self.rise_time and prev is not None and prev != d:
                d0, tau = prev, self.rise_time
                fn = (lambda t, a=a, d=d, d0=d0, tau=tau: d + (d0 - d) * np.exp(-(np.asarray(t) - a) / tau))
                prev = float(fn(b))
            else:
                fn = (lambda t, d=d: np.full(np.shape(t), d))
                prev = d
            out.append((a, b, fn))
        return out


def composite_profile(v, t_r, delta0, profile=None, a1=1.0, a2=1.0, shift=0.0, rise_time=None):
    """Dispersive / resonant / dispersive detuning sequence over the full transit.

    delta = a1 delta0 on [-T/2, -t_r/2 + shift], 0 on the resonant window,
    -a2 delta0 on [t_r/2 + shift, T/2].
    """
    profile = profile or CouplingProfile()
    half = profile.transit_time(v) / 2
    lo, hi = -t_r / 2 + shift, t_r / 2 + shift
    return DetuningProfile(
        segments=((-half, lo, a1 * delta0), (lo, hi, 0.0), (hi, half, -a2 * delta0)),
        rise_time=rise_time,
    )


# --------------------------------------------------------------- rotations


def _table(f, space):
    f = np.asarray(f, dtype=float)
    if f.shape != (space.dim + 1,):
        raise DimensionMismatch(f"rotation table needs length dim+1 = {space.dim + 1}, got {f.shape}")
    return f


def _block_indices(dim):
    n = np.arange(dim - 1)
    return n + 1, dim + n  # |g, n+1>, |e, n>


def rot_x(f, space):
    """Rotation by f[n+1] about X on every block B_n.

    ``|g, 0>`` picks up cos(f[0] / 2), so the result is unitary only for
    f[0] a multiple of 2 pi; physical tables have f[0] = 0.
    """
    f = _table(f, space)
    return _rotation(f, space, "x")


def rot_y(f, space):
    """Rotation by f[n+1] about Y on every block B_n (same f[0] caveat as :func:`rot_x`)."""
    f = _table(f, space)
    return _rotation(f, space, "y")


def rot_z(f, space):
    """Diagonal phase rotation: |g,n> -> e^{i f_n/2}, |e,n> -> e^{-i f_{n+1}/2}."""
    f = _table(f, space)
    d = space.dim
    return np.diag(np.concatenate([np.exp(0.5j * f[:d]), np.exp(-0.5j * f[1:])]))


def _rotation(f, space, axis):
    d = space.dim
    u = np.zeros((2 * d, 2 * d), dtype=complex)
    gi, ei = _block_indices(d)
    c, s = np.cos(f[1:d] / 2), np.sin(f[1:d] / 2)
    u[gi, gi] = c
    u[ei, ei] = c
    if axis == "x":
        u[gi, ei] = -1j * s
        u[ei, gi] = -1j * s
    else:
        u[gi, ei] = s
        u[ei, gi] = -s
    u[0, 0] = np.cos(f[0] / 2)
    u[2 * d - 1, 2 * d - 1] = 1.0
    return u


def field_diag(values, space):
    """I_atom (x) diag(values)."""
    return np.diag(np.tile(np.asarray(values, dtype=complex), 2))


# -------------------------------------------------------------- Hamiltonian


def jc_terms(space):
    """Fixed operators (detuning term, coupling term) with H = delta H_d + Omega H_c."""
    d = space.dim
    h_d = np.diag(np.concatenate([-0.5 * np.ones(d), 0.5 * np.ones(d)])).astype(complex)
    h_c = np.zeros((2 * d, 2 * d), dtype=complex)
    h_c[:d, d:] = 0.5j * space.adag
    h_c[d:, :d] = -0.5j * space.a
    return h_d, h_c


def jc_hamiltonian(delta, omega, space):
    h_d, h_c = jc_terms(space)
    return delta * h_d + omega * h_c


def _time_breaks(profile, v, t1, t2):
    tc = profile.s_max / v
    return [t for t in (-tc, tc) if t1 < t < t2]


def _pieces(detuning, profile, v):
    pieces = []
    for a, b, dfn in detuning.pieces():
        cuts = [a] + _time_breaks(profile, v, a, b) + [b]
        for lo, hi in zip(cuts, cuts[1:]):
            pieces.append((lo, hi, lambda t, dfn=dfn: np.stack([dfn(t), profile.omega(v * np.asarray(t))], axis=-1)))
    return pieces


def exact_propagator(detuning, profile, space, v, tol=1e-9):
    """Numerically integrated propagator of the Jaynes-Cummings Hamiltonian.

    Integrates with a fourth-order Magnus scheme, doubling the step count on each
    smooth piece until successive results agree to ``tol`` per element.

    Raises
    ------
    IntegrationFailure
    """
    events = [(t, np.kron(op, np.eye(space.dim))) for t, op in detuning.events]
    return _integrate.propagate(jc_terms(space), _pieces(detuning, profile, v), events, tol=tol)


def two_atom_terms(space):
    """(detuning, coupling) terms on atom1 (x) atom2 (x) field, identical coupling."""
    d = space.dim
    sz = np.diag([-0.5, 0.5]).astype(complex)
    i2, idf = np.eye(2), np.eye(d)
    sm = np.array([[0, 1], [0, 0]], dtype=complex)  # |g><e|
    h_d = np.kron(np.kron(sz, i2), idf) + np.kron(np.kron(i2, sz), idf)
    h_c = np.zeros((4 * d, 4 * d), dtype=complex)
    for s1 in (np.kron(sm, i2), np.kron(i2, sm)):
        h_c += 0.5j * (np.kron(s1, space.adag) - np.kron(s1.conj().T, space.a))
    return h_d, h_c


def two_atom_propagator(detuning, profile, space, v, tol=1e-9):
    """Exact propagator for two atoms crossing the mode together (atom1 (x) atom2 (x) field)."""
    events = [(t, np.kron(np.kron(op, op), np.eye(space.dim))) for t, op in detuning.events]
    return _integrate.propagate(two_atom_terms(space), _pieces(detuning, profile, v), events, tol=tol)


# ---------------------------------------------------------- analytic forms


def resonant_propagator(q, profile, space):
    """Resonant window: rot_y(theta_r sqrt(n)) with theta_r the integrated coupling.

    Returns
    -------
    U : ndarray
    theta_r : float
    """
    if q.delta0 != 0:
        raise ValueError("resonant_propagator needs delta0 = 0")
    theta_r = profile.theta(q.t1, q.t2, q.v)
    return rot_y(theta_r * np.sqrt(np.arange(space.dim + 1)), space), theta_r


def accumulated_phase(q, profile, n):
    """phi_n = delta * integral of sqrt(1 + n Omega^2 / delta^2) over the window, per entry of ``n``."""
    n = np.asarray(n, dtype=float)
    d = q.delta0
    pts = _time_breaks(profile, q.v, q.t1, q.t2)
    val, _ = quad_vec(
        lambda t: np.sqrt(d * d + n * float(profile.omega(q.v * t)) ** 2),
        q.t1, q.t2, epsabs=1e-13, epsrel=1e-13, points=pts or None,
    )
    return np.sign(d) * val


def mixing_angle(omega, delta, n):
    """Dressed-state angle xi_n = arctan(Omega sqrt(n) / delta) in (-pi/2, pi/2)."""
    return np.arctan(omega * np.sqrt(np.asarray(n, dtype=float)) / delta)


def _omega_at(t, v, profile, neglect_edges):
    s = abs(v * t)
    if s >= profile.s_max * (1 - 1e-12):
        return 0.0 if neglect_edges else profile.edge_omega()
    return float(profile.omega(s))


def adiabatic_propagator(q, profile, space, neglect_edges=True):
    """Dressed-state propagator X(-xi(t2)) Z(phi) X(xi(t1)) for a constant detuning.

    With ``neglect_edges`` the mixing angle at the coupling cutoff is taken as 0.
    Warns with :class:`AdiabaticityWarning` when the adiabaticity margin is
    negative for some n below 10.
    """
    if q.delta0 == 0:
        raise ValueError("adiabatic_propagator needs delta0 != 0")
    n = np.arange(space.dim + 1)
    for k in range(min(10, space.dim)):
        if adiabaticity_margin(q, profile, k) < 0:
            warnings.warn(f"adiabatic condition fails at n = {k}", AdiabaticityWarning, stacklevel=2)
            break
    phi = accumulated_phase(q, profile, n)
    xi1 = mixing_angle(_omega_at(q.t1, q.v, profile, neglect_edges), q.delta0, n)
    xi2 = mixing_angle(_omega_at(q.t2, q.v, profile, neglect_edges), q.delta0, n)
    return rot_x(-xi2, space) @ rot_z(phi, space) @ rot_x(xi1, space)


def adiabaticity_margin(q, profile, n, samples=4001):
    """min over the window of (RHS - LHS) of the adiabaticity condition at photon number ``n``.

    Positive means the condition holds. Only the part of the window inside the
    coupling cutoff is scanned.
    """
    c = profile.cutoff_factor
    s1 = max(q.t1 * q.v / profile.w, -c)
    s2 = min(q.t2 * q.v / profile.w, c)
    if s2 <= s1:
        return float("inf")
    s = np.linspace(s1, s2, samples)
    root = np.sqrt(n + 1) * profile.omega0
    lhs = np.abs(2 * q.v / (profile.w * root) * s * np.exp(-s * s))
    rhs = (q.delta0 / root) ** 2 + np.exp(-2 * s * s)
    return float(np.min(rhs - lhs))


@dataclass(frozen=True)
class CompositeAngles:
    """Per-photon-number angle tables (index n = 0..dim) of the composite propagator."""

    theta_r_n: np.ndarray
    theta_c_n: np.ndarray
    phi_n: np.ndarray
    xi_n: np.ndarray
    chi_c_n: np.ndarray
    phi_c_n: np.ndarray

    @property
    def d_phi_c(self):
        """phi_c[n+1] - phi_c[n] with chi unwrapped along n (length dim)."""
        phic = self.phi_n + np.unwrap(self.chi_c_n)
        return np.diff(phic)


def composite_angles(theta_r_n, phi_n, xi_n):
    """Effective rotation angle and phase of the composite sequence."""
    half = np.asarray(theta_r_n) / 2
    theta_c = np.mod(2 * np.arccos(np.clip(np.cos(half) * np.cos(xi_n), -1, 1)), 2 * np.pi)
    chi = np.angle(np.sin(half) - 1j * np.cos(half) * np.sin(xi_n))
    return CompositeAngles(
        theta_r_n=np.asarray(theta_r_n, dtype=float),
        theta_c_n=theta_c,
        phi_n=np.asarray(phi_n, dtype=float),
        xi_n=np.asarray(xi_n, dtype=float),
        chi_c_n=chi,
        phi_c_n=phi_n + chi,
    )


def composite_analytic(q_d1, q_r, q_d2, profile, space, theta_r=None, include_edges=False):
    """Analytic propagator of the dispersive / resonant / dispersive sequence.

    Parameters
    ----------
    q_d1, q_r, q_d2 : InteractionParams
        Entry dispersive window, central resonant window, exit dispersive window.
    theta_r : float, optional
        Overrides the integrated coupling of ``q_r``.
    include_edges : bool
        Keep the weak-coupling X rotations at the transit boundaries.

    Returns
    -------
    U : ndarray
        Product U_d2 Y(theta_r sqrt(n)) U_d1 of the adiabatic pieces.
    angles : CompositeAngles
        Tables for the factorized form Z(-phi_c) Y(theta_c) Z(phi_c), built from
        the entry window (exact when the exit window mirrors it).
    """
    n = np.arange(space.dim + 1)
    if theta_r is None:
        theta_r = profile.theta(q_r.t1, q_r.t2, q_r.v)
    theta_r_n = theta_r * np.sqrt(n)
    u_d1 = adiabatic_propagator(q_d1, profile, space, neglect_edges=not include_edges)
    u_d2 = adiabatic_propagator(q_d2, profile, space, neglect_edges=not include_edges)
    u = u_d2 @ rot_y(theta_r_n, space) @ u_d1
    phi = accumulated_phase(q_d1, profile, n)
    xi = mixing_angle(_omega_at(q_d1.t2, q_d1.v, profile, True), q_d1.delta0, n)
    return u, composite_angles(theta_r_n, phi, xi)


def factorized_composite(angles, space):
    """Z(-phi_c) Y(theta_c) Z(phi_c)."""
    return rot_z(-angles.phi_c_n, space) @ rot_y(angles.theta_c_n, space) @ rot_z(angles.phi_c_n, space)


@dataclass(frozen=True)
class CompositeSetup:
    """Resolved single-mode operating point: velocity, resonant window and detuning."""

    v: float
    theta_r: float
    delta0: float
    profile: CouplingProfile = CouplingProfile()

    @property
    def t_r(self):
        return self.profile.t_r_for_theta(self.theta_r, self.v)

    @property
    def T(self):
        return self.profile.transit_time(self.v)

    @property
    def omega_r(self):
        return float(self.profile.omega(self.v * self.t_r / 2))

    @classmethod
    def from_ratio(cls, v, theta_r, delta0_over_omega_r, profile=None):
        """Detuning given as a multiple of the coupling at the resonant-window edge."""
        profile = profile or CouplingProfile()
        t_r = profile.t_r_for_theta(theta_r, v)
        omega_r = float(profile.omega(v * t_r / 2))
        return cls(v=v, theta_r=theta_r, delta0=delta0_over_omega_r * omega_r, profile=profile)

    def windows(self):
        half, tr = self.T / 2, self.t_r
        return (
            InteractionParams(-half, -tr / 2, self.v, self.delta0),
            InteractionParams(-tr / 2, tr / 2, self.v, 0.0),
            InteractionParams(tr / 2, half, self.v, -self.delta0),
        )

    def angles(self, dim):
        d1, _, _ = self.windows()
        n = np.arange(dim + 1)
        phi = accumulated_phase(d1, self.profile, n)
        xi = mixing_angle(self.omega_r, self.delta0, n)
        return composite_angles(self.theta_r * np.sqrt(n), phi, xi)

    def analytic(self, space, include_edges=False):
        return composite_analytic(*self.windows(), self.profile, space, theta_r=self.theta_r,
                                  include_edges=include_edges)

    def detuning(self, a1=1.0, a2=1.0, shift=0.0, rise_time=None):
        return composite_profile(self.v, self.t_r, self.delta0, self.profile, a1, a2, shift, rise_time)

    def exact(self, space, tol=1e-9, **variations):
        return exact_propagator(self.detuning(**variations), self.profile, space, self.v, tol=tol)


# --------------------------------------------------------------- Kerr frame


def kerr_frame_generator(phi_c):
    """h_0 = 0, h_{n+1} = h_n + phi_c[n+1]; returns a table one shorter than ``phi_c``."""
    phi_c = np.asarray(phi_c, dtype=float)
    return np.concatenate([[0.0], np.cumsum(phi_c[1:-1])])


def interpolate_slope(d_phi, n):
    """Linear interpolation of a per-level table at non-integer ``n``."""
    return float(np.interp(n, np.arange(len(d_phi)), d_phi))


def calibrate_velocity(delta0_over_omega, theta_r, target_n=2.96, target_slope=np.pi, profile=None,
                       dim=20, v_range=(5.0, 2000.0)):
    """Velocity at which phi_c[n+1] - phi_c[n], interpolated at ``target_n``, equals ``target_slope``.

    The detuning tracks the velocity as ``delta0_over_omega`` times the coupling
    at the resonant-window edge.

    Raises
    ------
    NoBracket
        If no sign change of the slope mismatch is found over ``v_range``.
    """
    profile = profile or CouplingProfile()

    def mismatch(v):
        setup = CompositeSetup.from_ratio(v, theta_r, delta0_over_omega, profile)
        return interpolate_slope(setup.angles(dim).d_phi_c, target_n) - target_slope

    grid = np.geomspace(v_range[0], v_range[1], 60)
    vals = []
    for v in grid:
        try:
            vals.append(mismatch(v))
        except ValueError:
            vals.append(np.nan)
    vals = np.array(vals)
    for i in range(len(grid) - 1):
        a, b = vals[i], vals[i + 1]
        if np.isfinite(a) and np.isfinite(b) and a * b <= 0:
            return brentq(mismatch, grid[i], grid[i + 1], xtol=1e-10, rtol=1e-12)
    raise NoBracket(f"slope never crosses {target_slope:.4g} for v in {v_range}")
