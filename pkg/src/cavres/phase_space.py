"""Wigner functions, quadrature marginals and fidelity measures.

Conventions: W(gamma) = (2/pi) Tr(rho D(gamma) P D(gamma)^dag) with P the
photon-number parity, so W(0) = 2/pi for the vacuum and the plane integral is
1. Quadratures are X_theta = (a e^{-i theta} + a_dag e^{i theta}) / 2, so the
vacuum variance is 1/4 and a coherent state |alpha> is centred on Re(alpha).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import sqrtm
from scipy.optimize import minimize
from scipy.special import eval_genlaguerre, gammaln

from .errors import DimensionMismatch
from .fock import ket2dm

_CHUNK = 256


@dataclass(frozen=True)
class WignerGrid:
    """Wigner values on a rectangular grid; ``values[i, j]`` sits at re_axis[j] + 1j * im_axis[i]."""

    re_axis: np.ndarray
    im_axis: np.ndarray
    values: np.ndarray

    def integral(self):
        return float(np.trapezoid(np.trapezoid(self.values, self.re_axis, axis=1), self.im_axis))

    def records(self):
        re, im = np.meshgrid(self.re_axis, self.im_axis)
        return np.column_stack([re.ravel(), im.ravel(), self.values.ravel()])


def displaced_parity_elements(alphas, dim):
    """<m| D(alpha) P |n> for every alpha in ``alphas``; shape (len(alphas), dim, dim).

    Uses the closed Laguerre form of the untruncated displacement, so the
    values are exact for states supported on the first ``dim`` Fock levels.
    """
    alphas = np.atleast_1d(np.asarray(alphas, dtype=complex))
    m = np.arange(dim)[:, None]
    n = np.arange(dim)[None, :]
    lo = np.minimum(m, n)[None]
    k = np.abs(m - n)[None]
    x = (np.abs(alphas) ** 2)[:, None, None]
    mag = np.abs(alphas)[:, None, None]
    ph = np.angle(alphas)[:, None, None]
    lag = eval_genlaguerre(lo, k, x)
    with np.errstate(divide="ignore", invalid="ignore"):
        logm = 0.5 * (gammaln(lo + 1) - gammaln(lo + k + 1)) - x / 2 + k * np.log(mag)
    logm = np.where((mag == 0) & (k == 0), -x / 2, logm)
    # alpha^k above the diagonal, (-alpha*)^k below
    phase = np.where(m >= n, np.exp(1j * k * ph), np.exp(1j * k * (np.pi - ph)))
    return np.exp(logm) * phase * lag * ((-1.0) ** n)


def wigner_points(rho, gammas):
    """W at arbitrary complex points."""
    rho = np.asarray(rho)
    gammas = np.asarray(gammas, dtype=complex).ravel()
    out = np.empty(gammas.shape[0])
    for s in range(0, len(gammas), _CHUNK):
        k = displaced_parity_elements(2 * gammas[s : s + _CHUNK], rho.shape[0])
        out[s : s + _CHUNK] = (2 / np.pi) * np.real(np.einsum("nm,pmn->p", rho, k))
    return out


def wigner(rho, re_axis, im_axis=None):
    """Wigner function of a state (ket or density matrix) on a grid.

    Parameters
    ----------
    rho : array
        Ket of length dim or dim x dim density matrix.
    re_axis, im_axis : 1-d arrays
        Grid of Re(gamma) and Im(gamma); ``im_axis`` defaults to ``re_axis``.
    """
    rho = np.asarray(rho)
    if rho.ndim == 1:
        rho = ket2dm(rho)
    re_axis = np.asarray(re_axis, dtype=float)
    im_axis = re_axis if im_axis is None else np.asarray(im_axis, dtype=float)
    g = re_axis[None, :] + 1j * im_axis[:, None]
    return WignerGrid(re_axis, im_axis, wigner_points(rho, g).reshape(g.shape))


def hermite_functions(dim, q):
    """Normalized oscillator eigenfunctions psi_n(q), n < dim, for q = (a + a_dag)/sqrt(2)."""
    q = np.asarray(q, dtype=float)
    psi = np.zeros((dim,) + q.shape)
    psi[0] = np.pi**-0.25 * np.exp(-q * q / 2)
    if dim > 1:
        psi[1] = np.sqrt(2.0) * q * psi[0]
    for n in range(1, dim - 1):
        psi[n + 1] = np.sqrt(2.0 / (n + 1)) * q * psi[n] - np.sqrt(n / (n + 1)) * psi[n - 1]
    return psi


def quadrature_density(rho, x, theta=0.0):
    """Probability density of X_theta = (a e^{-i theta} + a_dag e^{i theta})/2 at points ``x``."""
    rho = np.asarray(rho)
    if rho.ndim == 1:
        rho = ket2dm(rho)
    dim = rho.shape[0]
    q = np.sqrt(2.0) * np.asarray(x, dtype=float)
    # <n|x_theta> = e^{i n theta} psi_n(x)
    phi = hermite_functions(dim, q) * np.exp(1j * theta * np.arange(dim))[:, None]
    dens = np.real(np.einsum("mx,mn,nx->x", phi.conj(), rho, phi))
    return np.sqrt(2.0) * dens


def marginal(source, axis="re", x=None, theta=None):
    """Quadrature marginal, either integrated from a WignerGrid or computed from a state.

    Parameters
    ----------
    source : WignerGrid or array
    axis : {"re", "im"}
        "re" gives the density of Re(gamma) (X_0), "im" that of Im(gamma) (X_{pi/2}).
    x : array, optional
        Evaluation points for a state input.
    theta : float, optional
        Arbitrary quadrature angle for a state input (overrides ``axis``).

    Returns
    -------
    x, density
    """
    if isinstance(source, WignerGrid):
        if axis == "re":
            return source.re_axis, np.trapezoid(source.values, source.im_axis, axis=0)
        return source.im_axis, np.trapezoid(source.values, source.re_axis, axis=1)
    if x is None:
        raise ValueError("marginal of a state needs evaluation points x")
    if theta is None:
        theta = 0.0 if axis == "re" else np.pi / 2
    return np.asarray(x), quadrature_density(source, x, theta)


def fidelity(a, b):
    """Fidelity between kets and/or density matrices.

    Pure-pure: |<a|b>|^2. Pure-mixed: <a|rho|a>. Mixed-mixed: Uhlmann
    (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
    """
    a, b = np.asarray(a), np.asarray(b)
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatch(f"dimensions {a.shape[0]} and {b.shape[0]} differ")
    if a.ndim == 1 and b.ndim == 1:
        return float(abs(np.vdot(a, b)) ** 2)
    if a.ndim == 1 or b.ndim == 1:
        psi, rho = (a, b) if a.ndim == 1 else (b, a)
        return float(np.real(np.vdot(psi, rho @ psi)))
    root = sqrtm(a)
    val = np.trace(sqrtm(root @ b @ root))
    return float(np.clip(np.real(val) ** 2, 0.0, 1.0))


def _coherent_fast(alpha, n, lgf):
    if alpha == 0:
        out = np.zeros(len(n), dtype=complex)
        out[0] = 1
        return out
    return np.exp(-abs(alpha) ** 2 / 2 + n * np.log(abs(alpha)) - 0.5 * lgf + 1j * np.angle(alpha) * n)


def cat_ket(alpha, beta, dim):
    """(|alpha> + i e^{i beta} |-alpha>) / norm, without truncation checks (optimizer helper)."""
    n = np.arange(dim)
    lgf = gammaln(n + 1)
    c = _coherent_fast(complex(alpha), n, lgf)
    psi = c + 1j * np.exp(1j * beta) * c * (-1.0) ** n
    return psi / np.linalg.norm(psi)


def _canonical_cat(alpha, beta):
    # (alpha, beta) and (-alpha, pi - beta) describe the same state
    beta = (beta + np.pi) % (2 * np.pi) - np.pi
    if abs(beta) > np.pi / 2:
        alpha, beta = -alpha, (np.pi - beta + np.pi) % (2 * np.pi) - np.pi
    return alpha, beta


def optimize_cat_fidelity(rho, starts=None, tol=1e-8):
    """Maximize <c|rho|c> over two-component cats c = (|alpha> + i e^{i beta}|-alpha>)/norm.

    Nelder-Mead over (Re alpha, Im alpha, beta) from four starts at +-alpha0 and
    +-i alpha0, where alpha0 follows the phase of <a^2> with |alpha0|^2 = <N>.

    Returns
    -------
    F_max, alpha, beta
    """
    rho = np.asarray(rho)
    if rho.ndim == 1:
        rho = ket2dm(rho)
    dim = rho.shape[0]
    n = np.arange(dim)
    mean_n = float(np.real(np.sum(n * np.diag(rho))))
    a2 = np.sum(np.sqrt(n[2:] * (n[2:] - 1)) * np.diagonal(rho, -2))  # <a^2>
    alpha0 = np.sqrt(max(mean_n, 1e-3)) * np.exp(0.5j * np.angle(a2))
    if starts is None:
        starts = [alpha0, -alpha0, 1j * alpha0, -1j * alpha0]

    def neg(p):
        psi = cat_ket(p[0] + 1j * p[1], p[2], dim)
        return -float(np.real(np.vdot(psi, rho @ psi)))

    best = None
    for a0 in starts:
        res = minimize(neg, [a0.real, a0.imag, 0.0], method="Nelder-Mead",
                       options=dict(xatol=1e-7, fatol=tol, maxiter=4000))
        if best is None or res.fun < best.fun:
            best = res
    alpha, beta = _canonical_cat(best.x[0] + 1j * best.x[1], best.x[2])
    return float(-best.fun), complex(alpha), float(beta)
