"""Rate-equation cooling curves of the Dicke subspace for several ensemble sizes."""

import argparse
import os

from cavitycool import analysis, io
from cavitycool.model import derived_rates, esr_example


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[1000, 10000, 100000])
    ap.add_argument("--points", type=int, default=400)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    gamma_s = derived_rates(esr_example()).gamma_s
    rows = []
    for n in args.sizes:
        traj = analysis.cooling_trajectory(n / 2, 0.0, n_points=args.points, gamma_s=gamma_s)
        fit = analysis.fit_t1_eff(traj)
        print(f"N_s={n:>7d}  T1*gamma_s={fit.t1_eff:.6e}  T1*gamma_s*N_s={fit.t1_eff * n:.5f}  "
              f"final={traj.jx_normalized[-1]:.5f}")
        rows.extend(io.trajectory_rows(traj, extra=(n,)))
    path = os.path.join(args.out, "fig1_cooling_curves.csv")
    io.write_csv(path, [io.N_SPINS, *io.TRAJECTORY_HEADER], rows)
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
