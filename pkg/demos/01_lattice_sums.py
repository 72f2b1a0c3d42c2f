#!/usr/bin/env python3
"""Van Vleck second moments on the fluorine simple-cubic lattice.

Builds origin-centered clusters for the three standard field orientations,
prints the angular lattice sums and the calibrated bulk second moments,
and shows how the [100]/[111] ratio converges with the summation radius.
The coupling prefactor is calibrated so the converged [100] sum reproduces
the reference value 2.55e10 s^-2; the other orientations then follow from
the geometry alone.
"""

import numpy as np

from magicecho.lattice import (BULK_SUM_RADIUS, REFERENCE_M2,
                               angular_lattice_sum, build_cluster,
                               bulk_local_field_gauss, bulk_second_moment,
                               local_field, second_moment)


def main():
    print("angular sums S = sum (1 - 3cos^2)^2 / r^6 (lattice units)")
    for radius in (3.0, 6.0, 10.0):
        sums = {o: angular_lattice_sum(o, radius) for o in ("100", "110", "111")}
        ratio = sums["100"] / sums["111"]
        print(f"  radius {radius:4.1f}:  "
              + "  ".join(f"[{o}] {sums[o]:.6f}" for o in sums)
              + f"  ratio 100/111 = {ratio:.4f}")

    print(f"\nbulk second moments at radius {BULK_SUM_RADIUS} "
          "(calibrated, s^-2):")
    for o in ("100", "110", "111"):
        m2 = bulk_second_moment(o)
        ref = REFERENCE_M2[o]
        print(f"  [{o}]  M2 = {m2:.4e}   reference {ref:.2e}   "
              f"off by {100 * (m2 / ref - 1):+.1f}%")

    print("\nlocal fields omega_L/gamma (Gauss):")
    for o in ("100", "110", "111"):
        print(f"  [{o}]  {bulk_local_field_gauss(o):.3f} G")

    print("\nsmall clusters used for exact dynamics:")
    for o in ("100", "110", "111"):
        cluster = build_cluster(o, radius=1.0, max_sites=6)
        print(f"  [{o}]  {cluster.n_sites} spins   "
              f"M2_cluster = {second_moment(cluster):.4e} s^-2   "
              f"omega_L = {local_field(cluster):.4e} rad/s")

    # the cluster moments sit below the bulk ones: a 6-spin ball misses
    # most of the shell-by-shell 1/r^6 tail
    ratio = bulk_second_moment("100") / bulk_second_moment("111")
    print(f"\nconverged ratio M2[100]/M2[111] = {ratio:.6f}")


if __name__ == "__main__":
    main()
