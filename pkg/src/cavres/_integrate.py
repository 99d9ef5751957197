"""Block-diagonal fourth-order Magnus integrator for dU/dt = -i H(t) U.

The Hamiltonian is a linear combination ``H(t) = sum_k c_k(t) H_k`` of fixed
Hermitian terms. Every Jaynes-Cummings variant in the package conserves an
excitation number, so the joint space splits into small invariant blocks that
are found once from the sparsity pattern and then propagated in batches.
"""
from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import IntegrationFailure

_SQRT3 = np.sqrt(3.0)
_GAUSS = (0.5 - _SQRT3 / 6, 0.5 + _SQRT3 / 6)


class BlockHamiltonian:
    """Fixed terms ``H_k`` split into their common invariant blocks.

    Parameters
    ----------
    terms : sequence of (dim, dim) Hermitian arrays
    """

    def __init__(self, terms):
        terms = [np.asarray(t, dtype=complex) for t in terms]
        self.dim = terms[0].shape[0]
        self.n_terms = len(terms)
        pattern = sum(np.abs(t) for t in terms) > 0
        _, labels = connected_components(csr_matrix(pattern), directed=False)
        self.groups = []
        members = {}
        for i, lab in enumerate(labels):
            members.setdefault(lab, []).append(i)
        by_size = {}
        for idx in members.values():
            by_size.setdefault(len(idx), []).append(idx)
        for size, blocks in sorted(by_size.items()):
            idx = np.array(blocks)
            hk = np.stack([t[idx[:, :, None], idx[:, None, :]] for t in terms])
            comm = np.einsum("kbij,lbjm->klbim", hk, hk)
            comm = comm - np.swapaxes(comm, 0, 1)
            self.groups.append((idx, hk, comm))
        self.norms = np.array([np.linalg.norm(t, 2) for t in terms])

    def step_blocks(self, c1, c2, h):
        """Per-group unitaries of one Magnus step for each row of ``c1``, ``c2``.

        ``c1`` and ``c2`` hold the term coefficients at the two Gauss nodes,
        shape (steps, n_terms). Returns a list of (steps, nb, m, m) arrays.
        """
        out = []
        cbar = 0.5 * (c1 + c2)
        for _, hk, comm in self.groups:
            heff = np.einsum("sk,kbij->sbij", cbar, hk)
            # [H2, H1] = sum_kl c2_k c1_l [H_k, H_l]
            heff = heff - 1j * (_SQRT3 / 12) * h * np.einsum("sk,sl,klbij->sbij", c2, c1, comm)
            heff = 0.5 * (heff + np.conj(np.swapaxes(heff, -1, -2)))
            w, v = np.linalg.eigh(heff)
            out.append((v * np.exp(-1j * h * w)[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2)))
        return out

    def identity_blocks(self):
        return [np.broadcast_to(np.eye(idx.shape[1], dtype=complex), (idx.shape[0],) + (idx.shape[1],) * 2).copy()
                for idx, _, _ in self.groups]

    def to_dense(self, blocks):
        u = np.zeros((self.dim, self.dim), dtype=complex)
        for (idx, _, _), b in zip(self.groups, blocks):
            u[idx[:, :, None], idx[:, None, :]] = b
        return u

    def from_dense(self, u):
        return [u[idx[:, :, None], idx[:, None, :]] for idx, _, _ in self.groups]


def _ordered_product(mats):
    """mats[-1] @ ... @ mats[0] along axis 0 by pairwise reduction."""
    while mats.shape[0] > 1:
        if mats.shape[0] % 2:
            tail = mats[-1:]
            mats = np.concatenate([mats[1:-1:2] @ mats[0:-1:2], tail])
        else:
            mats = mats[1::2] @ mats[0::2]
    return mats[0]


def propagate_blocks(ham, coeff_fn, t1, t2, n_steps, chunk=512):
    """Propagate over [t1, t2] with ``n_steps`` uniform Magnus steps."""
    h = (t2 - t1) / n_steps
    total = ham.identity_blocks()
    for start in range(0, n_steps, chunk):
        k = np.arange(start, min(start + chunk, n_steps))
        ta = t1 + h * (k + _GAUSS[0])
        tb = t1 + h * (k + _GAUSS[1])
        steps = ham.step_blocks(coeff_fn(ta), coeff_fn(tb), h)
        total = [_ordered_product(s) @ tot for s, tot in zip(steps, total)]
    return total


def _is_constant(coeff_fn, t1, t2):
    probe = coeff_fn(np.linspace(t1, t2, 17))
    return np.allclose(probe, probe[0], rtol=0, atol=1e-14 * (1 + np.abs(probe).max()))


def propagate_segment(ham, coeff_fn, t1, t2, tol=1e-9, max_steps=2**18, min_steps=4):
    """Block unitaries over a smooth segment, doubling the step count until converged.

    Raises
    ------
    IntegrationFailure
        If successive refinements still differ by more than ``tol`` at ``max_steps``.
    """
    if t2 <= t1:
        return ham.identity_blocks()
    if _is_constant(coeff_fn, t1, t2):
        return propagate_blocks(ham, coeff_fn, t1, t2, 1)
    probe = np.abs(coeff_fn(np.linspace(t1, t2, 33)))
    scale = float((probe @ ham.norms).max())
    n = max(min_steps, int(np.ceil((t2 - t1) * scale / 2.0)))
    prev = propagate_blocks(ham, coeff_fn, t1, t2, n)
    while True:
        n *= 2
        if n > max_steps:
            raise IntegrationFailure(
                f"no convergence to {tol:g} on [{t1:.6g}, {t2:.6g}] within {max_steps} steps"
            )
        cur = propagate_blocks(ham, coeff_fn, t1, t2, n)
        err = max(float(np.abs(a - b).max()) for a, b in zip(cur, prev))
        if err <= tol:
            return cur
        prev = cur


def propagate(terms, pieces, events=(), tol=1e-9):
    """Dense propagator of a piecewise-smooth Hamiltonian.

    Parameters
    ----------
    terms : sequence of Hermitian arrays
        Fixed operators ``H_k``.
    pieces : sequence of (t1, t2, coeff_fn)
        Contiguous smooth intervals in time order; ``coeff_fn(t)`` maps an
        array of times to coefficients of shape (len(t), n_terms).
    events : sequence of (time, unitary)
        Instantaneous unitaries applied at piece boundaries.
    """
    ham = BlockHamiltonian(terms)
    events = sorted(events, key=lambda e: e[0])
    u = np.eye(ham.dim, dtype=complex)
    ev = 0
    for t1, t2, fn in pieces:
        while ev < len(events) and events[ev][0] <= t1:
            u = events[ev][1] @ u
            ev += 1
        u = ham.to_dense(propagate_segment(ham, fn, t1, t2, tol=tol)) @ u
    for _, op in events[ev:]:
        u = op @ u
    return u
