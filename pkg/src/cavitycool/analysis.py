"""Cooling-time fits, size and temperature sweeps, Markov-vs-full comparison."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from . import lindblad
from .errors import FitWindowError, NumericalError, SweepError
from .markov import MAX_DIM, Trajectory, build_rate_matrix, maximally_mixed, propagate

RISE_LEVEL = 1.0 - math.exp(-1.0)

# Reported constants of T1 = lam (2J)^gamma / gamma_s.
REFERENCE_PREFACTOR = 2.0406
REFERENCE_EXPONENT = -0.9981


@dataclass(frozen=True)
class FitResult:
    t1_eff: float
    residual_rms: float
    fit_window: tuple[float, float]
    unit: str = "1/gamma_s"
    t1_eff_seconds: float | None = None
    n_points: int = 0
    saturation: float = 1.0


@dataclass(frozen=True)
class PowerLawResult:
    lam: float
    gamma: float
    r_squared: float
    n_spins: tuple = ()
    t1_eff: tuple = ()
    fits: tuple = field(default=(), repr=False)

    def predict(self, two_j):
        return self.lam * np.asarray(two_j, dtype=float) ** self.gamma


def saturating_exponential(t, t1):
    return -np.expm1(-np.asarray(t) / t1)


def fit_t1_eff(traj: Trajectory, *, saturation=None, window_level=0.99, gamma_s=None) -> FitResult:
    """Fit ``y / s = 1 - exp(-t / T1)`` to the normalized polarization.

    ``s`` is ``saturation`` if given, else ``traj.saturation``, else the last
    sample.  The fit uses samples from t = 0 up to the first one that
    reaches ``window_level`` of ``s`` (all samples if none does).
    """
    t = np.asarray(traj.times, dtype=float)
    y = np.asarray(traj.jx_normalized, dtype=float)
    s = saturation if saturation is not None else traj.saturation
    if s is None:
        s = float(y[-1])
    if not s > 0:
        raise FitWindowError("trajectory has no positive saturation value", {"saturation": s})
    yn = y / s
    crossed = np.flatnonzero(yn >= RISE_LEVEL)
    if crossed.size == 0:
        raise FitWindowError(
            "trajectory never reaches 1 - 1/e of saturation",
            {"max_fraction": float(yn.max()), "saturation": s},
        )
    guess = max(float(t[crossed[0]]), float(np.min(t[t > 0], initial=np.inf)))
    top = np.flatnonzero(yn >= window_level)
    stop = top[0] + 1 if top.size else t.size
    tw, yw = t[:stop], yn[:stop]

    def resid(p):
        return saturating_exponential(tw, math.exp(p[0])) - yw

    sol = least_squares(resid, [math.log(guess)], xtol=1e-15, ftol=1e-15, gtol=1e-15)
    t1 = math.exp(sol.x[0])
    rms = float(np.sqrt(np.mean(sol.fun ** 2)))
    if gamma_s is None and traj.time_seconds is not None and traj.time_unit != "s":
        pos = t > 0
        if np.any(pos):
            ratio = traj.time_seconds[pos] / t[pos]
            gamma_s = 1.0 / float(np.median(ratio))
    seconds = None
    if traj.time_unit == "s":
        seconds = t1
    elif gamma_s is not None:
        seconds = t1 / gamma_s
    return FitResult(
        t1_eff=t1,
        residual_rms=rms,
        fit_window=(float(tw[0]), float(tw[-1])),
        unit=traj.time_unit,
        t1_eff_seconds=seconds,
        n_points=int(stop),
        saturation=float(s),
    )


def t1_eff_estimate(params):
    """Closed-form ``T1 = 1 / (gamma_s J)`` in seconds."""
    from .model import derived_rates

    return 1.0 / (derived_rates(params).gamma_s * params.j_subspace)


def cooling_time_guess(j, nbar):
    """Rough relaxation time (units of 1/gamma_s) used to size time grids."""
    return 1.0 / (j + 2.0 * nbar + 1.0)


def cooling_trajectory(j, nbar=0.0, *, n_points=400, span=8.0, gamma_s=None,
                       method="auto", reach=0.995, max_doublings=8, keep_populations=False,
                       max_dim=MAX_DIM):
    """Rate-equation run from the maximally mixed state that saturates.

    The linear grid covers ``span`` times a rough relaxation-time guess and is
    doubled until the end point reaches ``reach`` of the equilibrium value.
    """
    M = build_rate_matrix(j, nbar, max_dim=max_dim)
    p0 = maximally_mixed(j)
    t_end = span * cooling_time_guess(j, nbar)
    for _ in range(max_doublings + 1):
        times = np.linspace(0.0, t_end, n_points)
        traj = propagate(M, p0, times, gamma_s, method=method, keep_populations=keep_populations)
        s = traj.saturation
        if j == 0 or s <= 0 or traj.jx_normalized[-1] >= reach * s:
            return traj
        t_end *= 2.0
    raise NumericalError("trajectory did not saturate", {"j": j, "nbar": nbar, "t_end": t_end})


def _size_point(args):
    n_spins, nbar, gamma_s, n_points, method = args
    traj = cooling_trajectory(n_spins / 2, nbar, n_points=n_points, gamma_s=gamma_s, method=method)
    return fit_t1_eff(traj, gamma_s=gamma_s)


def _run_points(func, jobs, workers):
    """Evaluate jobs in order; results come back indexed like ``jobs``."""
    results = []
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(func, job) for job in jobs]
            for i, fut in enumerate(futures):
                try:
                    results.append(fut.result())
                except NumericalError as exc:
                    raise SweepError(f"point {i} failed: {exc}", partial=results,
                                     diagnostics={"index": i, **exc.diagnostics}) from exc
        return results
    for i, job in enumerate(jobs):
        try:
            results.append(func(job))
        except NumericalError as exc:
            raise SweepError(f"point {i} failed: {exc}", partial=results,
                             diagnostics={"index": i, **exc.diagnostics}) from exc
    return results


def power_law_fit(two_j, t1):
    """Least-squares line through ``log t1`` against ``log 2J``."""
    x = np.log(np.asarray(two_j, dtype=float))
    y = np.log(np.asarray(t1, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return math.exp(intercept), float(slope), min(max(r2, 0.0), 1.0)


def sweep_t1_vs_size(n_list, nbar=0.0, gamma_s=None, *, n_points=400, method="auto",
                     workers=1) -> PowerLawResult:
    """Fit T1 for each Dicke subspace ``J = N_s / 2`` and regress on ``2J``."""
    n_list = [int(n) for n in n_list]
    if len(n_list) < 4:
        raise ValueError(f"need at least 4 ensemble sizes, got {len(n_list)}")
    jobs = [(n, nbar, gamma_s, n_points, method) for n in n_list]
    fits = _run_points(_size_point, jobs, workers)
    t1 = [f.t1_eff for f in fits]
    lam, gam, r2 = power_law_fit(n_list, t1)
    return PowerLawResult(lam=lam, gamma=gam, r_squared=r2, n_spins=tuple(n_list),
                          t1_eff=tuple(t1), fits=tuple(fits))


def detect_oscillations(traj, noise_floor=1e-3):
    """Largest drop of ``-<J_x>/J`` after a running maximum.

    Returns ``(flag, amplitude)``; ``flag`` is true iff the drop exceeds
    ``noise_floor``.  Accepts a Trajectory or a plain array.
    """
    y = np.asarray(traj.jx_normalized if isinstance(traj, Trajectory) else traj, dtype=float)
    if y.size < 10:
        raise ValueError(f"need at least 10 samples, got {y.size}")
    drop = float(np.max(np.maximum.accumulate(y) - y))
    return drop > noise_floor, drop


@dataclass
class ComparisonRow:
    ratio: float
    kappa: float
    max_abs: float
    rms: float
    oscillates: bool
    amplitude: float
    full: Trajectory = field(repr=False)
    warnings: list = field(default_factory=list)


@dataclass
class ComparisonReport:
    j: float
    g: float
    times: np.ndarray = field(repr=False)
    markov: Trajectory = field(repr=False)
    rows: list = field(default_factory=list)

    @property
    def deviations(self):
        return [r.max_abs for r in sorted(self.rows, key=lambda r: r.ratio)]

    @property
    def monotone_decreasing(self):
        d = self.deviations
        return all(b < a for a, b in zip(d, d[1:]))

    def row(self, ratio):
        for r in self.rows:
            if math.isclose(r.ratio, ratio):
                return r
        raise KeyError(ratio)


def compare_markov_full(j, g, kappa_ratios, times, *, n_max=None, nbar=0.0,
                        noise_floor=1e-3, leakage_threshold=1e-6,
                        method="auto") -> ComparisonReport:
    """Full spin-cavity dynamics against the rate equation at Delta = 0.

    ``kappa = ratio * g * sqrt(2J)``.  ``times`` are dimensionless
    ``tau = gamma_s t`` with ``gamma_s = g^2 / kappa``, so every ratio is
    compared against the same rate-equation curve.
    """
    times = np.asarray(times, dtype=float)
    n_spins = int(round(2 * j))
    if n_max is None:
        n_max = max(n_spins, 1)
    markov = propagate(build_rate_matrix(j, nbar), maximally_mixed(j), times)
    y_markov = markov.jx_normalized
    H = lindblad.build_exchange_hamiltonian(j, n_max, g)
    rho0 = lindblad.initial_state(j, n_max, nbar)
    report = ComparisonReport(j=j, g=g, times=times, markov=markov)
    for ratio in kappa_ratios:
        kappa = ratio * g * math.sqrt(n_spins)
        gamma_s = g * g / kappa
        L = lindblad.build_liouvillian(H, kappa, nbar, n_max)
        full = lindblad.evolve(rho0, L, times / gamma_s, method=method,
                               leakage_threshold=leakage_threshold)
        full.times = times
        full.time_unit = "1/gamma_s"
        dev = full.jx_normalized - y_markov
        osc, amp = detect_oscillations(full, noise_floor)
        report.rows.append(ComparisonRow(
            ratio=float(ratio), kappa=kappa,
            max_abs=float(np.max(np.abs(dev))),
            rms=float(np.sqrt(np.mean(dev ** 2))),
            oscillates=osc, amplitude=amp, full=full,
            warnings=list(full.warnings),
        ))
    return report


def thermal_reference(n_spins, nbar):
    """Piecewise law for ``gamma_s T1``: ``(regime, 2/N_s, 1/(2 nbar))``.

    ``regime`` is "low" below sqrt(N_s), "high" from N_s upwards and
    "crossover" in between, where no reference curve is stated.
    """
    low = 2.0 / n_spins
    high = 1.0 / (2.0 * nbar) if nbar > 0 else math.inf
    if nbar < math.sqrt(n_spins):
        regime = "low"
    elif nbar >= n_spins:
        regime = "high"
    else:
        regime = "crossover"
    return regime, low, high


@dataclass
class ThermalCell:
    n_spins: int
    nbar: float
    t1_eff: float | None
    residual_rms: float | None
    jx_eq: float
    jx_eq_normalized: float
    regime: str
    reference_low: float
    reference_high: float
    error: str | None = None
    trajectory: Trajectory | None = field(default=None, repr=False)

    @property
    def reference(self):
        return {"low": self.reference_low, "high": self.reference_high}.get(self.regime)


def _thermal_point(args):
    from .markov import equilibrium_jx

    n_spins, nbar, n_points, method = args
    j = n_spins / 2
    regime, low, high = thermal_reference(n_spins, nbar)
    jeq = equilibrium_jx(j, nbar)
    cell = ThermalCell(n_spins, nbar, None, None, jeq, -jeq / j, regime, low, high)
    try:
        traj = cooling_trajectory(j, nbar, n_points=n_points, method=method)
        fit = fit_t1_eff(traj)
    except NumericalError as exc:
        cell.error = str(exc)
        return cell
    cell.t1_eff, cell.residual_rms, cell.trajectory = fit.t1_eff, fit.residual_rms, traj
    return cell


def thermal_sweep(n_list, nbar_grid, *, n_points=400, method="auto", workers=1):
    """Fitted ``gamma_s T1`` over an (N_s, nbar) grid, row-major in ``n_list``.

    Fit failures are stored in the cell's ``error`` and do not stop the sweep.
    """
    if any(nb < 0 for nb in nbar_grid):
        raise ValueError("nbar_grid must be non-negative")
    jobs = [(int(n), float(nb), n_points, method) for n in n_list for nb in nbar_grid]
    return _run_points(_thermal_point, jobs, workers)
