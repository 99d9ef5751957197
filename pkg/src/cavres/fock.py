"""Truncated Fock-space linear algebra.

States are plain complex numpy vectors of length ``dim`` (Fock amplitudes
psi_0 ... psi_{dim-1}); density operators are ``dim x dim`` complex arrays.
Joint atom-field operators use atom-major ordering, i.e. index
``atom * dim + n`` with ``g = 0`` and ``e = 1``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import gammaln

from .errors import DimensionMismatch, TruncationLoss

TRUNCATION_TOL = 1e-6

# Basis kets of the two-level atom.
G = np.array([1.0, 0.0], dtype=complex)
E = np.array([0.0, 1.0], dtype=complex)


class TruncationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class FockSpace:
    """Field Hilbert space keeping the Fock states |0>, ..., |dim - 1>."""

    dim: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError(f"FockSpace needs an integer dim >= 2, got {self.dim!r}")

    @property
    def n_max(self):
        return self.dim - 1

    @cached_property
    def n(self):
        """Photon numbers 0..dim-1 as floats."""
        return np.arange(self.dim, dtype=float)

    @cached_property
    def a(self):
        return np.diag(np.sqrt(np.arange(1, self.dim, dtype=float)), 1).astype(complex)

    @cached_property
    def adag(self):
        return self.a.conj().T

    @cached_property
    def number(self):
        return np.diag(self.n).astype(complex)

    @cached_property
    def parity(self):
        return np.diag((-1.0) ** self.n).astype(complex)

    @cached_property
    def identity(self):
        return np.eye(self.dim, dtype=complex)


def ladder_ops(space):
    """Return ``(a, a_dag, N)`` for ``space``."""
    return space.a, space.adag, space.number


def fock(n, space):
    if not 0 <= n < space.dim:
        raise DimensionMismatch(f"Fock state |{n}> outside a space of dim {space.dim}")
    psi = np.zeros(space.dim, dtype=complex)
    psi[n] = 1.0
    return psi


def _check_energy(alpha, space):
    if abs(alpha) ** 2 > space.dim / 3:
        warnings.warn(
            f"|alpha|^2 = {abs(alpha) ** 2:.3g} exceeds dim/3 = {space.dim / 3:.3g}",
            TruncationWarning,
            stacklevel=3,
        )


def coherent(alpha, space):
    """Coherent state from its Fock series, renormalized after truncation.

    Raises
    ------
    TruncationLoss
        If the truncated series carries less than ``1 - 1e-6`` of the norm.
    """
    alpha = complex(alpha)
    _check_energy(alpha, space)
    if alpha == 0:
        return fock(0, space)
    n = space.n
    log_mag = -abs(alpha) ** 2 / 2 + n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    psi = np.exp(log_mag) * np.exp(1j * np.angle(alpha) * n)
    norm2 = float(np.vdot(psi, psi).real)
    if norm2 < 1 - TRUNCATION_TOL:
        raise TruncationLoss(
            f"coherent({alpha:.3g}) keeps norm^2 {norm2:.8f} in dim {space.dim}"
        )
    return psi / np.sqrt(norm2)


def displacement(alpha, space):
    """D_alpha = exp(alpha a_dag - alpha* a) by eigendecomposition of the truncated generator.

    The result is exactly unitary on the truncated space; its agreement with
    the infinite-dimensional operator degrades near the top Fock states.
    """
    alpha = complex(alpha)
    _check_energy(alpha, space)
    if alpha == 0:
        return space.identity.copy()
    # i (alpha a_dag - alpha* a) is Hermitian
    herm = 1j * (alpha * space.adag - np.conj(alpha) * space.a)
    w, v = np.linalg.eigh(herm)
    return (v * np.exp(-1j * w)) @ v.conj().T


def kerr_propagator(zeta_k, gamma_k, t_k, space):
    """Diagonal unitary exp(-i t_K (zeta_K N + gamma_K N^2))."""
    n = space.n
    return np.diag(np.exp(-1j * t_k * (zeta_k * n + gamma_k * n**2)))


def cat_state(alpha, beta, space):
    """Normalized (|alpha> + i e^{i beta} |-alpha>)."""
    psi = coherent(alpha, space) + 1j * np.exp(1j * beta) * coherent(-alpha, space)
    return psi / np.linalg.norm(psi)


def thermal_state(n_mean, space):
    """Truncated thermal density matrix with mean occupation ``n_mean`` (renormalized)."""
    if n_mean == 0:
        return ket2dm(fock(0, space))
    p = (n_mean / (1 + n_mean)) ** space.n
    return np.diag(p / p.sum()).astype(complex)


def ket2dm(psi):
    psi = np.asarray(psi)
    return np.outer(psi, psi.conj())


def normalize(psi):
    psi = np.asarray(psi, dtype=complex)
    return psi / np.linalg.norm(psi)


def expect(op, state):
    """<op> for a ket (1-d) or density matrix (2-d)."""
    state = np.asarray(state)
    if state.ndim == 1:
        return np.vdot(state, op @ state)
    return np.trace(op @ state)


def mean_photon(state, space=None):
    state = np.asarray(state)
    n = np.arange(state.shape[0], dtype=float)
    if state.ndim == 1:
        return float(np.sum(n * np.abs(state) ** 2))
    return float(np.real(np.sum(n * np.diag(state))))


def purity(rho):
    return float(np.real(np.trace(rho @ rho)))


def tensor(*ops):
    out = np.asarray(ops[0])
    for op in ops[1:]:
        out = np.kron(out, op)
    return out


def partial_trace(rho, dims, keep):
    """Trace out every subsystem not listed in ``keep``.

    Parameters
    ----------
    rho : array, shape (prod(dims), prod(dims))
    dims : sequence of int
        Subsystem dimensions in kron order.
    keep : int or sequence of int
        Indices of the subsystems to keep, in the returned order.
    """
    rho = np.asarray(rho)
    dims = [int(d) for d in dims]
    total = int(np.prod(dims))
    if rho.shape != (total, total):
        raise DimensionMismatch(f"operator of shape {rho.shape} does not factor as {dims}")
    keep = [keep] if np.isscalar(keep) else list(keep)
    n = len(dims)
    t = rho.reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    # contract each traced pair; letters 0..n-1 rows, n..2n-1 columns
    row = list(range(n))
    col = [i + n for i in range(n)]
    for i in traced:
        col[i] = row[i]
    out_idx = [row[i] for i in keep] + [col[i] for i in keep]
    out = np.einsum(t, row + col, out_idx)
    d_keep = int(np.prod([dims[i] for i in keep]))
    return out.reshape(d_keep, d_keep)


def atom_state(u):
    """cos(u/2)|g> + sin(u/2)|e>."""
    return np.cos(u / 2) * G + np.sin(u / 2) * E
