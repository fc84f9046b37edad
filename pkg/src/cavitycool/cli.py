"""Command-line entry point.

Every subcommand writes ``<out>/<command>.csv`` and ``<out>/<command>.json``.
Exit status: 0 on success, 1 on invalid input or I/O failure, 2 when a
numerical method fails.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import __version__, analysis, config, io, lindblad
from .errors import ConfigError, DomainError, NumericalError, ResourceLimitError, SweepError
from .markov import build_rate_matrix, maximally_mixed, propagate
from .model import check_regime, derived_rates

OUT_ENV = "CAVITYCOOL_OUT"
FULL_MAX_DIM = 1000
COMPARE_SPAN = 24.0

# Acceptance thresholds reported in the summary.
CONSERVATION_TOL = 1e-10
POSITIVITY_TOL = 1e-12
HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-10
EIGENVALUE_TOL = 1e-8
MARKOV_AGREEMENT = 0.05
THERMAL_TOL = 0.10
LAMBDA_TOL = 0.01
GAMMA_TOL = 0.005


class Run:
    """Collects checks, warnings and results for the JSON summary."""

    def __init__(self, command, cfg):
        self.command = command
        self.cfg = cfg
        self.checks = {}
        self.warnings = []
        self.results = {}
        self.tolerances = {}

    def check(self, name, value, threshold, passed):
        self.checks[name] = {"value": value, "threshold": threshold, "pass": bool(passed)}

    def summary(self, csv_name, error=None):
        return {
            "command": self.command,
            "version": __version__,
            "config_sha256": self.cfg.sha256(),
            "config": self.cfg.echo(),
            "tolerances": self.tolerances,
            "checks": self.checks,
            "all_checks_pass": all(c["pass"] for c in self.checks.values()),
            "warnings": self.warnings,
            "results": self.results,
            "files": {"csv": csv_name},
            "error": error,
        }


def _auto_times(cfg, span_guess):
    grid = cfg.times()
    if grid is not None:
        return grid
    return np.linspace(0.0, span_guess, cfg.analysis.t_count)


def _trajectory_checks(run, traj, label=""):
    d = traj.diagnostics
    if "max_probability_error" in d:
        run.check(f"{label}probability_conservation", d["max_probability_error"],
                  CONSERVATION_TOL, d["max_probability_error"] <= CONSERVATION_TOL)
        run.check(f"{label}positivity", d["min_population"], -POSITIVITY_TOL,
                  d["min_population"] >= -POSITIVITY_TOL)
    if "max_hermiticity_error" in d:
        run.check(f"{label}hermiticity", d["max_hermiticity_error"], HERMITICITY_TOL,
                  d["max_hermiticity_error"] <= HERMITICITY_TOL)
        run.check(f"{label}trace", d["max_trace_error"], TRACE_TOL,
                  d["max_trace_error"] <= TRACE_TOL)
        run.check(f"{label}positivity", d["min_eigenvalue"], -EIGENVALUE_TOL,
                  d["min_eigenvalue"] >= -EIGENVALUE_TOL)
    run.warnings.extend(f"{label}{w}" for w in traj.warnings)


def _markov_trajectory(cfg, j, nbar, gamma_s):
    m = cfg.markov_engine
    grid = cfg.times()
    if grid is None:
        return analysis.cooling_trajectory(j, nbar, n_points=cfg.analysis.t_count,
                                           gamma_s=gamma_s, method=m.method,
                                           max_dim=m.max_dim)
    M = build_rate_matrix(j, nbar, max_dim=m.max_dim)
    return propagate(M, maximally_mixed(j), grid, gamma_s, method=m.method,
                     keep_populations=False, tol=m.tol)


def _full_setup(cfg, run):
    p = cfg.params()
    j = p.j_subspace
    n_max = cfg.n_max(int(round(2 * j)))
    dim = int(round(2 * j + 1)) * (n_max + 1)
    if dim > FULL_MAX_DIM:
        raise ResourceLimitError(f"joint dimension {dim} exceeds {FULL_MAX_DIM}; "
                                 "the full model is meant for small ensembles")
    if abs(derived_rates(p).Delta_minus) > 1e-9 * p.rabi:
        run.warnings.append("full model runs at zero sideband detuning; "
                            "the configured detuning is ignored")
    run.tolerances["leakage_threshold"] = cfg.lindblad_engine.leakage_threshold
    return p, j, n_max


def _full_trajectory(cfg, run, times_tau):
    p, j, n_max = _full_setup(cfg, run)
    gamma_s = p.g ** 2 / p.kappa
    H = lindblad.build_exchange_hamiltonian(j, n_max, p.g)
    L = lindblad.build_liouvillian(H, p.kappa, p.nbar, n_max)
    traj = lindblad.evolve(lindblad.initial_state(j, n_max, p.nbar), L, times_tau / gamma_s,
                           method=cfg.lindblad_engine.method,
                           leakage_threshold=cfg.lindblad_engine.leakage_threshold)
    traj.time_seconds = traj.times
    traj.times = np.asarray(times_tau, dtype=float)
    traj.time_unit = "1/gamma_s"
    return traj, gamma_s


def cmd_simulate_markov(cfg, run, args):
    p = cfg.params()
    gamma_s = derived_rates(p).gamma_s
    sizes = cfg.analysis.n_list or (p.n_spins,)
    rows = []
    for n in sizes:
        j = n / 2 if cfg.analysis.n_list else p.j_subspace
        traj = _markov_trajectory(cfg, j, p.nbar, gamma_s)
        _trajectory_checks(run, traj, f"N_s={n}: ")
        y = traj.jx_normalized
        if p.nbar == 0:
            drop = float(np.max(np.maximum.accumulate(y) - y))
            run.check(f"N_s={n}: monotone", drop, POSITIVITY_TOL, drop <= POSITIVITY_TOL)
        run.results[str(n)] = {"j": j, "final_jx_norm": float(y[-1]),
                               "saturation": traj.saturation,
                               "t_stop_scaled": float(traj.times[-1])}
        rows.extend((n, t, ts, yy) for t, ts, yy in zip(traj.times, traj.time_seconds, y))
    run.tolerances.update(conservation=CONSERVATION_TOL, positivity=POSITIVITY_TOL)
    return [io.N_SPINS, io.TIME_SCALED, io.TIME_SECONDS, io.JX_NORM], rows


def cmd_simulate_full(cfg, run, args):
    p = cfg.params()
    j = p.j_subspace
    times = _auto_times(cfg, 8.0 * analysis.cooling_time_guess(j, 0.0))
    traj, gamma_s = _full_trajectory(cfg, run, times)
    _trajectory_checks(run, traj)
    run.check("leakage", float(traj.leakage.max()), cfg.lindblad_engine.leakage_threshold,
              traj.leakage.max() <= cfg.lindblad_engine.leakage_threshold)
    run.tolerances.update(hermiticity=HERMITICITY_TOL, trace=TRACE_TOL,
                          min_eigenvalue=-EIGENVALUE_TOL)
    run.results.update(j=j, n_max=cfg.n_max(int(round(2 * j))), gamma_s_per_s=gamma_s,
                       method=traj.diagnostics["method"],
                       final_jx_norm=float(traj.jx_normalized[-1]))
    rows = [(t, ts, y, n, leak) for t, ts, y, n, leak in
            zip(traj.times, traj.time_seconds, traj.jx_normalized,
                traj.cavity_occupation, traj.leakage)]
    return [io.TIME_SCALED, io.TIME_SECONDS, io.JX_NORM, io.CAVITY_N, io.LEAKAGE], rows


def cmd_compare(cfg, run, args):
    p, j, n_max = _full_setup(cfg, run)
    times = _auto_times(cfg, COMPARE_SPAN * analysis.cooling_time_guess(j, 0.0))
    a = cfg.analysis
    rep = analysis.compare_markov_full(
        j, p.g, a.kappa_ratios, times, n_max=n_max, nbar=p.nbar,
        noise_floor=a.noise_floor, leakage_threshold=cfg.lindblad_engine.leakage_threshold,
        method=cfg.lindblad_engine.method)
    rows = []
    y_m = rep.markov.jx_normalized
    for r in rep.rows:
        _trajectory_checks(run, r.full, f"ratio={r.ratio!r}: ")
        run.results[repr(r.ratio)] = {"kappa_rad_s": r.kappa, "max_abs": r.max_abs,
                                      "rms": r.rms, "oscillates": r.oscillates,
                                      "amplitude": r.amplitude}
        rows.extend((r.ratio, t, ym, yf, leak) for t, ym, yf, leak in
                    zip(times, y_m, r.full.jx_normalized, r.full.leakage))
    ratios = [r.ratio for r in rep.rows]
    for r in rep.rows:
        if math.isclose(r.ratio, 10.0):
            run.check("ratio=10: agreement", r.max_abs, MARKOV_AGREEMENT,
                      r.max_abs <= MARKOV_AGREEMENT)
        if math.isclose(r.ratio, 0.5):
            run.check("ratio=0.5: oscillates", r.amplitude, a.noise_floor, r.oscillates)
    if len(ratios) > 1:
        run.check("deviation decreases with ratio", rep.deviations, None,
                  rep.monotone_decreasing)
    run.results["deviations_by_ratio"] = rep.deviations
    run.tolerances.update(agreement=MARKOV_AGREEMENT, noise_floor=a.noise_floor)
    header = ["kappa_ratio[1]", io.TIME_SCALED, "jx_norm_markov[1]", "jx_norm_full[1]",
              io.LEAKAGE]
    return header, rows


def cmd_fit_t1(cfg, run, args):
    p = cfg.params()
    rates = derived_rates(p)
    j = p.j_subspace
    engines = ("markov", "full") if cfg.analysis.engine == "both" else (cfg.analysis.engine,)
    rows = []
    closed = 1.0 / (rates.gamma_s * j)
    two_j = 2 * j
    run.results["closed_form_t1_seconds"] = closed
    run.results["power_law_t1_seconds"] = (
        analysis.REFERENCE_PREFACTOR * two_j ** analysis.REFERENCE_EXPONENT / rates.gamma_s)
    for engine in engines:
        if engine == "markov" and two_j + 1 > cfg.markov_engine.max_dim:
            run.warnings.append(f"2J+1 = {two_j + 1:.6g} exceeds max_dim; "
                                "reporting the closed form 1/(gamma_s J)")
            rows.append(("closed-form", p.n_spins, p.nbar, closed * rates.gamma_s, closed, None))
            continue
        if engine == "markov":
            traj = _markov_trajectory(cfg, j, p.nbar, rates.gamma_s)
            gamma_s = rates.gamma_s
        else:
            times = _auto_times(cfg, 8.0 * analysis.cooling_time_guess(j, p.nbar))
            traj, gamma_s = _full_trajectory(cfg, run, times)
        _trajectory_checks(run, traj, f"{engine}: ")
        fit = analysis.fit_t1_eff(traj, window_level=cfg.analysis.window_level, gamma_s=gamma_s)
        run.results[engine] = fit
        rows.append((engine, p.n_spins, p.nbar, fit.t1_eff, fit.t1_eff_seconds, fit.residual_rms))
    header = ["engine[-]", io.N_SPINS, io.NBAR, io.T1_SCALED, io.T1_SECONDS, io.RESIDUAL]
    return header, rows


def _require_list(cfg, name):
    values = getattr(cfg.analysis, name)
    if not values:
        raise ConfigError(f"[analysis] {name} must be set for this command")
    return values


def cmd_sweep_size(cfg, run, args):
    p = cfg.params()
    gamma_s = derived_rates(p).gamma_s
    n_list = _require_list(cfg, "n_list")
    res = analysis.sweep_t1_vs_size(n_list, p.nbar, gamma_s, n_points=cfg.analysis.t_count,
                                    method=cfg.markov_engine.method, workers=args.workers)
    rows = [(n, p.nbar, f.t1_eff, f.t1_eff_seconds, f.residual_rms)
            for n, f in zip(res.n_spins, res.fits)]
    run.results.update(lam=res.lam, gamma=res.gamma, r_squared=res.r_squared,
                       reference_lam=analysis.REFERENCE_PREFACTOR,
                       reference_gamma=analysis.REFERENCE_EXPONENT)
    if p.nbar == 0:
        dl = abs(res.lam / analysis.REFERENCE_PREFACTOR - 1.0)
        dg = abs(res.gamma - analysis.REFERENCE_EXPONENT)
        run.check("lambda relative deviation", dl, LAMBDA_TOL, dl <= LAMBDA_TOL)
        run.check("gamma absolute deviation", dg, GAMMA_TOL, dg <= GAMMA_TOL)
    run.tolerances.update(lam_relative=LAMBDA_TOL, gamma_absolute=GAMMA_TOL)
    return [io.N_SPINS, io.NBAR, io.T1_SCALED, io.T1_SECONDS, io.RESIDUAL], rows


def cmd_sweep_thermal(cfg, run, args):
    p = cfg.params()
    gamma_s = derived_rates(p).gamma_s
    n_list = _require_list(cfg, "n_list")
    grid = _require_list(cfg, "nbar_grid")
    cells = analysis.thermal_sweep(n_list, grid, n_points=cfg.analysis.t_count,
                                   method=cfg.markov_engine.method, workers=args.workers)
    from .model import cavity_temperature

    rows, table = [], []
    for c in cells:
        temp = cavity_temperature(p.omega_c, c.nbar) if c.nbar > 0 else 0.0
        seconds = None if c.t1_eff is None else c.t1_eff / gamma_s
        rows.append((c.n_spins, c.nbar, temp, c.t1_eff, seconds, c.residual_rms,
                     c.jx_eq_normalized, c.regime, c.reference_low, c.reference_high))
        entry = {"n_spins": c.n_spins, "nbar": c.nbar, "temperature_k": temp,
                 "t1_eff_scaled": c.t1_eff, "t1_eff_seconds": seconds,
                 "jx_eq": c.jx_eq, "jx_eq_normalized": c.jx_eq_normalized,
                 "regime": c.regime, "reference_low_2_over_n": c.reference_low,
                 "reference_high_1_over_2nbar": c.reference_high, "error": c.error}
        table.append(entry)
        if c.error:
            run.warnings.append(f"N_s={c.n_spins}, nbar={c.nbar!r}: {c.error}")
        elif c.reference is not None:
            dev = abs(c.t1_eff / c.reference - 1.0)
            run.check(f"N_s={c.n_spins}, nbar={c.nbar!r}: {c.regime} law", dev,
                      THERMAL_TOL, dev <= THERMAL_TOL)
    run.results["cells"] = table
    run.tolerances["thermal_relative"] = THERMAL_TOL
    header = [io.N_SPINS, io.NBAR, "temperature[K]", io.T1_SCALED, io.T1_SECONDS,
              io.RESIDUAL, "jx_eq_norm[1]", "regime[-]", "reference_low[1/gamma_s]",
              "reference_high[1/gamma_s]"]
    return header, rows


def cmd_check_regime(cfg, run, args):
    p = cfg.params()
    rep = check_regime(p)
    run.results["regime"] = rep.as_dict()
    run.results["derived_rates"] = derived_rates(p)
    for c in rep.checks():
        run.check(c.name, c.ratio, c.required, c.ok)
    run.check("dominance gamma_plus/gamma_minus", rep.plus_over_minus, 1.0,
              rep.plus_over_minus < 1.0)
    run.check("dominance gamma_0/gamma_minus", rep.zero_over_minus, 1.0,
              rep.zero_over_minus < 1.0)
    for c in rep.checks():
        print(f"{'PASS' if c.ok else 'FAIL'}  {c.name:<22} ratio={c.ratio:.6g} "
              f"required>={c.required:g} margin={c.margin:.6g}")
    print(f"spin-number bound: N_s << kappa^2/g^2 = {rep.spin_number_bound:.6g} "
          f"(N_s = {p.n_spins:.6g})")
    rows = [(c.name, c.ratio, c.required, c.margin, c.ok) for c in rep.checks()]
    return ["check[-]", "ratio[1]", "required[1]", "margin[1]", "ok[-]"], rows


COMMANDS = {
    "simulate-markov": (cmd_simulate_markov, "rate-equation cooling curves"),
    "simulate-full": (cmd_simulate_full, "full spin-cavity master equation"),
    "compare": (cmd_compare, "full model against the rate equation over kappa ratios"),
    "fit-t1": (cmd_fit_t1, "effective cooling time of one subspace"),
    "sweep-size": (cmd_sweep_size, "power law of T1 against ensemble size"),
    "sweep-thermal": (cmd_sweep_thermal, "T1 and equilibrium polarization against nbar"),
    "check-regime": (cmd_check_regime, "approximation-regime inequalities"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="cavitycool", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="INI run configuration")
        sp.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or [cli_io] out_dir)")
        sp.add_argument("--workers", type=int, default=1, help="processes for sweeps")
        sp.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE")
    return parser


def out_dir(args, cfg):
    return args.out or cfg.cli_io.out_dir or os.environ.get(OUT_ENV) or "results"


def main(argv=None):
    args = build_parser().parse_args(argv)
    func = COMMANDS[args.command][0]
    try:
        cfg = config.load(args.config, args.override)
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    base = out_dir(args, cfg)
    csv_name = f"{args.command}.csv"
    run = Run(args.command, cfg)
    status, error = 0, None
    try:
        header, rows = func(cfg, run, args)
        io.write_csv(os.path.join(base, csv_name), header, rows)
    except (ConfigError, DomainError, ResourceLimitError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: cannot write results: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        status, error = 2, {"message": str(exc), "diagnostics": exc.diagnostics}
        if isinstance(exc, SweepError):
            error["partial"] = exc.partial
        csv_name = None
        print(f"numerical failure: {exc}", file=sys.stderr)
    try:
        io.write_json(os.path.join(base, f"{args.command}.json"), run.summary(csv_name, error))
    except OSError as exc:
        print(f"error: cannot write results: {exc}", file=sys.stderr)
        return 1
    for w in run.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if status == 0:
        print(f"wrote {os.path.join(base, csv_name)}")
    return status


if __name__ == "__main__":
    sys.exit(main())
