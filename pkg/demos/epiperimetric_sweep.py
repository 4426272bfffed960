"""Check the log-epiperimetric inequality on constructed traces near the quadratic cone.

Prints the pass rate and, for a few traces, the excess, the T term and both sides.

Run: python3 demos/epiperimetric_sweep.py
"""

import numpy as np

from loglab.epiperimetric import check_inequality, fourier_identity, fourier_identity_quadrature, sweep
from loglab.spherical import QuadraticForm, SphereTrace


def main():
    phi = SphereTrace.from_modes(2, 8, {(3, 3): 1.0})
    for alpha, s in ((2.1, 1e-2), (2.5, 1e-6)):
        print(f"alpha={alpha} s={s:g}: closed form {fourier_identity(phi, alpha, s):+.8f}, "
              f"quadrature {fourier_identity_quadrature(phi, alpha, s):+.8f}")

    for s in (1e-2, 1e-4, 1e-8):
        rep = check_inequality(QuadraticForm(np.eye(2) / 2).trace(8).with_nonneg(), s)
        print(f"cone trace, s={s:g}: excess={rep.excess:+.5f} T={rep.T:+.5f} lhs={rep.lhs:+.5f} rhs={rep.rhs:+.5f} pass={rep.passed}")

    res = sweep(2, n=20, scales=(1e-2, 1e-3, 1e-4), seed=0)
    summary = res.summary()
    print(f"\nsweep d=2, 20 traces x 3 scales: pass rate {summary['pass_rate']:.2f}, measured C4 {summary['c4_measured']:.1f}")
    for i, rep in res.reports[:3]:
        d = rep.diagnostics
        print(f"  trace {i}: alpha={rep.alpha:.3f} excess={rep.excess:+.5f} lhs-rhs={rep.lhs - rep.rhs:+.2e} "
              f"parts=({d['part1']:+.2e}, {d['part2']:+.2e}, {d['part3']:+.2e})")


if __name__ == "__main__":
    main()
