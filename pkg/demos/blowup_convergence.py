"""Blow-up candidates, labels and convergence rates on synthetic fields.

Run: python3 demos/blowup_convergence.py
"""

import math

import numpy as np

from loglab.blowup import estimate_blowup
from loglab.decay import blowup_modulus
from loglab.energy import theta_constant
from loglab.geometry import ScalarField
from loglab.synthetic import PerturbedQuadraticProfile, halfspace_profile, quadratic_profile


def describe(name, rec):
    c = rec.classification
    print(f"{name:28s} candidate={rec.candidate_kind:9s} label={c.label:9s} "
          f"W/Θ={c.energy / theta_constant(len(rec.center)):.3f} stratum={rec.stratum}")


def main():
    radii = 2.0 ** -np.arange(10, 1, -1)
    describe("quadratic diag(0.7, 0.3)", estimate_blowup(quadratic_profile(np.diag([0.7, 0.3])), (0.0, 0.0), radii))
    describe("quadratic diag(0.5, 0.5, 0)", estimate_blowup(quadratic_profile(np.diag([0.5, 0.5, 0.0])), (0.0,) * 3, radii))
    describe("half-space (0.6, 0.8)", estimate_blowup(halfspace_profile((0.6, 0.8)), (0.0, 0.0), radii))

    u = PerturbedQuadraticProfile(np.eye(2) / 2)
    rec = estimate_blowup(u, (0.0, 0.0), radii)
    print("\nperturbed quadratic profile: L1 distance of u_r to the candidate")
    for r, dist in zip(rec.radii, rec.distances):
        print(f"  r=2^{math.log2(r):+.0f}  distance={dist:.4e}  exact={math.pi * r**3 / (r * r * (1 - 2 * math.log(r))):.4e}")
    fit = blowup_modulus(rec)
    print(f"Hoelder fit: C={fit.params['C']:.3f} beta={fit.params['beta']:.3f} residual={fit.residual:.3f}")

    grid = ScalarField.from_function(u, (-0.6, -0.6), (0.6, 0.6), 513, nonneg=True)
    rec = estimate_blowup(grid, (0.0, 0.0), radii)
    dist = np.asarray(rec.distances)[rec.reliable]
    print(f"same field sampled on a 513^2 grid, reliable radii only: {np.array2string(dist, precision=4)}")


if __name__ == "__main__":
    main()
