"""Compute the reference values in tests/data/oracle_values.json from the oracles alone.

Run once; the test suite compares the package against the frozen file.
"""
import json
import math
import sys
from pathlib import Path

import numpy as np
from scipy.linalg import expm

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))
import oracles  # noqa: E402

OMEGA0, W = 2 * math.pi * 50e3, 6e-3


def resonant_pointer_mean_n(u, theta_r, dim=36):
    h = oracles.jc_matrix(0.0, 1.0, dim)
    U = expm(-1j * theta_r * h)
    rho = oracles.kraus_fixed_point(oracles.kraus_pair_from_unitary(U, u))
    return float(np.real(np.sum(np.arange(dim) * np.diag(rho))))


def composite_exact(dim=6, v=70.0, delta0=2.2 * OMEGA0, theta_r=math.pi / 2):
    tc = 1.5 * W / v
    x = theta_r * v / (OMEGA0 * W * math.sqrt(math.pi))
    from scipy.special import erfinv

    t_r = 2 * W / v * erfinv(x)

    def delta(t):
        return delta0 if t < -t_r / 2 else (0.0 if t < t_r / 2 else -delta0)

    def hfun(t):
        om = OMEGA0 * math.exp(-(v * t / W) ** 2)
        return oracles.jc_matrix(delta(t), om, dim)

    return oracles.ode_propagator(hfun, -tc, tc, 2 * dim, breaks=(-t_r / 2, t_r / 2))


def ideal_esms_bell(n_mean=0.335, dim=10):
    a = math.sqrt(n_mean)
    ca = oracles.coherent_series(a, dim)
    cm = oracles.coherent_series(-a, dim)
    psi = np.kron(ca, ca) - 1j * np.kron(cm, cm)
    psi /= np.linalg.norm(psi)
    rho = np.outer(psi, psi.conj())
    big = dim + 40
    op = np.diag(np.sqrt(np.arange(1, big)), 1).astype(complex)
    par = np.diag((-1.0) ** np.arange(big))

    def kernel(g):
        d = expm(g * op.conj().T - np.conj(g) * op)
        return (d @ par @ d.conj().T)[:dim, :dim]

    cache = {}

    def wfun(ga, gb):
        ka = cache.setdefault(ga, kernel(ga))
        kb = cache.setdefault(gb, kernel(gb))
        return float(np.real(np.trace(rho @ np.kron(ka, kb)))) * 4 / math.pi**2

    return oracles.bell_grid_oracle(wfun, span=1.0, points=21)


def main():
    c1, cm1 = oracles.coherent_series(1.0, 60), oracles.coherent_series(-1.0, 60)
    parity, mean_n = oracles.cat_series_moments(2.0, 0.0)
    U = composite_exact()
    values = {
        "overlap_alpha1_minus1": float(abs(np.vdot(c1, cm1)) ** 2),
        "cat2_parity": parity,
        "cat2_mean_n": mean_n,
        "theta_closed_form_v70_tr5us": oracles.gaussian_theta_closed_form(OMEGA0, W, 70.0, 5e-6),
        "theta_quad_v70_tr5us": oracles.gaussian_theta_quad(OMEGA0, W, 70.0, 5e-6),
        "resonant_pointer_mean_n_u05_th04": resonant_pointer_mean_n(0.5, 0.4),
        "composite_exact_dim6_re": U.real.tolist(),
        "composite_exact_dim6_im": U.imag.tolist(),
        "ideal_esms_bell_grid_n0335": ideal_esms_bell(),
    }
    out = ROOT / "tests" / "data" / "oracle_values.json"
    out.write_text(json.dumps(values, indent=1))
    for k, v in values.items():
        if not isinstance(v, list):
            print(f"{k}: {v}")


if __name__ == "__main__":
    main()
