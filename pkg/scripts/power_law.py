"""Fit T1 = lam (2J)^gamma / gamma_s over a log-spaced range of ensemble sizes."""

import argparse
import os

from cavitycool import analysis, io


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[1000, 3000, 10000, 30000, 100000])
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    res = analysis.sweep_t1_vs_size(args.sizes, 0.0, workers=args.workers)
    for n, t in zip(res.n_spins, res.t1_eff):
        print(f"N_s={n:>7d}  T1*gamma_s={t:.6e}  T1*gamma_s*N_s={t * n:.5f}")
    print(f"lam={res.lam:.5f} (reference {analysis.REFERENCE_PREFACTOR})  "
          f"gamma={res.gamma:.5f} (reference {analysis.REFERENCE_EXPONENT})  R^2={res.r_squared:.8f}")
    path = os.path.join(args.out, "power_law.csv")
    io.write_csv(path, [io.N_SPINS, io.T1_SCALED, io.RESIDUAL],
                 [(n, f.t1_eff, f.residual_rms) for n, f in zip(res.n_spins, res.fits)])
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
