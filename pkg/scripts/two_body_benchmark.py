#!/usr/bin/env python3
"""Benchmark the N = 2 cross-validation: second-quantized Krylov propagation
against the position-grid split-step oracle on the matched discretization,
with a dt-refinement table isolating the oracle's splitting error."""

import math
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from dimred import manybody, potentials, projectors, scaling


def main():
    point = scaling.make_point(2, 0.5, 0.5)
    conf = potentials.harmonic_confinement(dimension=1)
    prof = potentials.gaussian_bump(height=3.0, radius=4.0, width=1.5)
    sc = potentials.scale(prof, point, d_perp=1)
    box = 2.0 * math.pi
    n_x, n_y, y_span = 16, 12, 6.0
    t_final = 0.5

    t0 = time.time()
    basis = manybody.build_grid_matched_basis(point, conf, sc, n_x, n_y, box, y_span)
    oracle = manybody.GridOracle(point, conf, sc, box, n_x, n_y, y_span)
    print(f"matched basis: {basis.n_modes} modes, "
          f"pair dimension {basis.n_modes * (basis.n_modes + 1) // 2} "
          f"({time.time() - t0:.2f}s)")

    phi_x = np.exp(-oracle.x**2 / (2.0 * 1.2**2)) * np.exp(0.5j * oracle.x)
    u = manybody.modes_on_grid(basis, oracle)
    orb = phi_x[:, None] * oracle.tau[None, :]
    orb = orb / math.sqrt(float(np.sum(np.abs(orb) ** 2) * oracle.weight()))
    coeffs = u.conj().T @ (orb.ravel() * math.sqrt(oracle.weight()))
    fock = manybody.FockBasis(basis.n_modes, 2, dim_cap=10**5)
    st0 = manybody.product_state(fock, coeffs)

    t0 = time.time()
    mode_final = manybody.evolve(st0, basis, 0.01, t_final, n_outputs=1,
                                 krylov_tol=1e-11).final
    g_modes = manybody.gamma_modes_to_grid(
        basis, manybody.reduced_density(mode_final, 1).matrix, oracle)
    print(f"Krylov side: {time.time() - t0:.1f}s")

    psi0 = oracle.product_state(phi_x)
    print(f"{'dt':>8} {'trace distance':>15} {'time':>7}")
    for dt in (8e-4, 4e-4, 2e-4, 1e-4):
        t0 = time.time()
        psi_t = oracle.evolve(psi0, dt, t_final)
        td = projectors.trace_distance(oracle.gamma1(psi_t), g_modes)
        print(f"{dt:>8.0e} {td:>15.3e} {time.time() - t0:>6.1f}s")


if __name__ == "__main__":
    main()
