"""Cooling time and equilibrium polarization against cavity occupation."""

import argparse
import os

import numpy as np

from cavitycool import analysis, io
from cavitycool.model import TWO_PI, cavity_temperature


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[10, 100, 1000, 10000])
    ap.add_argument("--nbar", type=float, nargs="+", default=list(np.logspace(-2, 5, 15)))
    ap.add_argument("--cavity-ghz", type=float, default=10.0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    omega_c = TWO_PI * args.cavity_ghz * 1e9
    cells = analysis.thermal_sweep(args.sizes, args.nbar, workers=args.workers)
    rows = []
    for c in cells:
        temp = cavity_temperature(omega_c, c.nbar) if c.nbar > 0 else 0.0
        ref = c.reference
        dev = "" if ref is None or c.t1_eff is None else f"{c.t1_eff / ref - 1:+.1%}"
        print(f"N_s={c.n_spins:>6d} nbar={c.nbar:<10.4g} T={temp:<9.4g}K "
              f"T1*gamma_s={c.t1_eff if c.t1_eff is None else f'{c.t1_eff:.4e}'} "
              f"-<Jx>/J={c.jx_eq_normalized:.4f} {c.regime:<9} {dev}")
        rows.append((c.n_spins, c.nbar, temp, c.t1_eff, c.jx_eq_normalized, c.regime))
    path = os.path.join(args.out, "thermal.csv")
    io.write_csv(path, [io.N_SPINS, io.NBAR, "temperature[K]", io.T1_SCALED,
                        "jx_eq_norm[1]", "regime[-]"], rows)
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
