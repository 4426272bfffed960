"""Solve the classical obstacle problem with a radial datum and compare with the exact solution.

Run: python3 demos/classical_oracle.py
"""

import numpy as np

from loglab.solver import CLASSICAL, SolveConfig, extract_free_boundary, minimize
from loglab.synthetic import ClassicalRadialSolution


def main():
    exact = ClassicalRadialSolution(0.5)
    prev, errors = None, []
    for n in (129, 257, 513):
        rep = minimize(SolveConfig(n=n, mode=CLASSICAL, boundary_datum={"type": "classical_radial", "a": 0.5}), prev)
        u = prev = rep.field
        err = float(np.max(np.abs(u.values - exact(u.nodes().reshape(-1, 2)).reshape(u.extents))))
        radius = np.linalg.norm(extract_free_boundary(u, rep.threshold), axis=1)
        errors.append(err)
        print(f"n={n:4d}  h={u.h:.5f}  iterations={rep.iterations:3d}  max error={err:.3e}  "
              f"free-boundary radius in [{radius.min():.4f}, {radius.max():.4f}]")
    for a, b in zip(errors, errors[1:]):
        print(f"observed order {np.log2(a / b):.2f}")


if __name__ == "__main__":
    main()
