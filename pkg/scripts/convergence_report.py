#!/usr/bin/env python3
"""Discretization-order report: transverse eigensolve, split-step NLS, and the
radial Poisson verifier, each with halving tables."""

import math
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from dimred import auxiliary, nls, potentials, scaling, transverse


def transverse_table():
    print("== transverse eigenvalue (harmonic 1d, E0 = 1) ==")
    conf = potentials.harmonic_confinement(dimension=1)
    prev = None
    for n in (501, 1001, 2001, 4001):
        m = transverse.solve_modes(conf, transverse.TransverseGrid(9.0, n), 2)
        err = abs(m.energy0 - 1.0)
        ratio = prev / err if prev else float("nan")
        print(f"  n={n:>5}  err={err:.3e}  ratio={ratio:5.2f}")
        prev = err


def nls_table():
    print("== split-step self-convergence (Gaussian, b = 1) ==")
    grid = nls.Grid1D(16.0 * math.pi, 256)
    state = nls.gaussian_state(grid, width=1.5, momentum=0.4)
    finals = {}
    for dt in (8e-3, 4e-3, 2e-3, 1e-3):
        finals[dt] = nls.evolve(state, None, 1.0, dt, 0.4, n_outputs=1).final.values
    dts = sorted(finals, reverse=True)
    prev = None
    for a, b in zip(dts, dts[1:]):
        err = float(np.linalg.norm(finals[a] - finals[b]))
        ratio = prev / err if prev else float("nan")
        print(f"  dt={a:.0e}  diff-to-half={err:.3e}  ratio={ratio:5.2f}")
        prev = err


def poisson_table():
    print("== radial Poisson residual (Gaussian bump) ==")
    point = scaling.make_point(250, 0.5, 1.0 / 3.0)
    sc = potentials.scale(potentials.gaussian_bump(), point)
    prev = None
    for n in (512, 1024, 2048, 4096):
        h = auxiliary.build_h_epsilon(sc, eps=1.0, n_samples=n, grid="uniform")
        res = auxiliary.verify_poisson(h, sc).max_relative_residual
        ratio = prev / res if prev else float("nan")
        print(f"  n={n:>5}  residual={res:.3e}  ratio={ratio:5.2f}")
        prev = res


if __name__ == "__main__":
    transverse_table()
    nls_table()
    poisson_table()
