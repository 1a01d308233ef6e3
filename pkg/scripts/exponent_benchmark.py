"""Window-exponent behavior on the two-time-scale benchmark system.

Prints the numeric finite-time exponent of the fast/slow benchmark
against its closed form across window lengths, the positivity bound,
and the critical oscillation value across grid resolutions.

Usage:
    python scripts/exponent_benchmark.py
"""

import numpy as np

from stvs.indices import imf_threshold
from stvs.synth import TwoTimescaleParams, analytic_ftle, simulate_two_timescale


def main() -> None:
    params = TwoTimescaleParams(a=1.0, omega=10.0, b=5.0, eps=0.01, z0=1.0)
    dt = 0.01
    traj = simulate_two_timescale(params, 32.0, dt)
    norms = traj.norms()
    _, bound = analytic_ftle(params, 1.0)

    print("two-time-scale benchmark: a=1, omega=10, b=5, eps=0.01")
    print(f"{'T [s]':>6} {'numeric':>12} {'closed form':>12} {'rel err':>9}")
    for t_window in (3, 5, 8, 11, 15, 20, 30):
        k = int(round(t_window / dt))
        numeric = float(np.log(norms[k] / norms[0]) / traj.t[k])
        lam, _ = analytic_ftle(params, float(t_window))
        print(
            f"{t_window:>6} {numeric:>12.6f} {lam:>12.6f} "
            f"{abs(numeric - lam) / abs(lam):>8.2%}"
        )
    print(f"positivity bound: T < {bound:.2f} s (sign flips there)\n")

    print("critical oscillation value vs grid (gamma2 = 10, range [0, 1.5])")
    for bins in (10, 20, 40, 80):
        print(f"  {bins:>3} bins -> {imf_threshold(bins, (0.0, 1.5), 10.0):.4f}")


if __name__ == "__main__":
    main()
