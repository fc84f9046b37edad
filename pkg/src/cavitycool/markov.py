"""Rate equation for the populations of one spin-J subspace.

States are ordered by index ``i <-> m = -J + i``, so index 0 is the ground
state ``|J, -J>``.  Time is dimensionless, ``tau = gamma_s * t``; the rate
matrix ``M_J`` is the generator in those units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import expaction
from .errors import DomainError, NumericalError, ResourceLimitError

MAX_DIM = 2_000_001


def _check_j(j):
    if j < 0 or not float(2 * j).is_integer():
        raise DomainError(f"j must be a non-negative half-integer, got {j!r}")
    return int(round(2 * j)) + 1


def m_values(j):
    return -j + np.arange(_check_j(j), dtype=float)


def coefficients(j, m, nbar):
    """Rate coefficients ``(A, B, C)`` of level ``m``.

    ``A`` is the downward rate out of ``m``, ``C`` the upward one, and
    ``B = -(A + C)`` the diagonal entry.
    """
    _check_j(j)
    if abs(m) > j or not float(m - j).is_integer():
        raise DomainError(f"m={m!r} is not a level of spin j={j!r}")
    x = j * (j + 1)
    a = (1.0 + nbar) * (x - m * (m - 1))
    c = nbar * (x - m * (m + 1))
    return a, -(a + c), c


def coefficient_arrays(j, nbar):
    m = m_values(j)
    x = j * (j + 1)
    a = (1.0 + nbar) * (x - m * (m - 1))
    c = nbar * (x - m * (m + 1))
    return a, -(a + c), c


@dataclass(frozen=True)
class RateMatrix:
    """Tridiagonal generator ``M_J``.

    ``sub[i]`` is entry ``(i+1, i)`` (upward rate ``C`` out of level i),
    ``sup[i]`` is entry ``(i, i+1)`` (downward rate ``A`` out of level i+1).
    """

    j: float
    nbar: float
    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray

    @property
    def dim(self):
        return self.diag.size

    def to_sparse(self):
        return sp.diags([self.sub, self.diag, self.sup], [-1, 0, 1], format="csr")

    def to_dense(self):
        return self.to_sparse().toarray()

    def matvec(self, p):
        p = np.asarray(p, dtype=float)
        out = self.diag * p
        out[:-1] += self.sup * p[1:]
        out[1:] += self.sub * p[:-1]
        return out

    def column_sums(self):
        s = self.diag.copy()
        s[1:] += self.sup
        s[:-1] += self.sub
        return s


def build_rate_matrix(j, nbar, *, max_dim=MAX_DIM) -> RateMatrix:
    d = _check_j(j)
    if nbar < 0:
        raise DomainError(f"nbar must be non-negative, got {nbar!r}")
    if d > max_dim:
        raise ResourceLimitError(f"subspace dimension {d} exceeds max_dim={max_dim}")
    a, b, c = coefficient_arrays(j, nbar)
    # Endpoints vanish analytically; pin them against rounding at large J.
    a[0] = 0.0
    c[-1] = 0.0
    b = -(a + c)
    return RateMatrix(j=j, nbar=float(nbar), sub=c[:-1].copy(), diag=b, sup=a[1:].copy())


@dataclass(frozen=True)
class PopulationVector:
    j: float
    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        object.__setattr__(self, "p", p)
        d = _check_j(self.j)
        if p.shape != (d,):
            raise DomainError(f"expected {d} populations for j={self.j}, got shape {p.shape}")
        if p.min() < -1e-12 or p.max() > 1 + 1e-12:
            raise DomainError("populations must lie in [0, 1]")
        if abs(p.sum() - 1.0) > 1e-10:
            raise DomainError(f"populations sum to {p.sum()!r}, not 1")

    @property
    def m(self):
        return m_values(self.j)


def maximally_mixed(j) -> PopulationVector:
    d = _check_j(j)
    return PopulationVector(j, np.full(d, 1.0 / d))


def ground_state(j) -> PopulationVector:
    p = np.zeros(_check_j(j))
    p[0] = 1.0
    return PopulationVector(j, p)


def _boltzmann_ratio_log(nbar):
    # log(nbar / (1 + nbar)), -inf at nbar = 0
    return -math.inf if nbar == 0 else -math.log1p(1.0 / nbar)


def steady_state(j, nbar) -> PopulationVector:
    """Equilibrium populations, geometric in ``nbar / (1 + nbar)``."""
    d = _check_j(j)
    if nbar < 0:
        raise DomainError(f"nbar must be non-negative, got {nbar!r}")
    if nbar == 0:
        return ground_state(j)
    lr = _boltzmann_ratio_log(nbar)
    k = np.arange(d)
    # (1 - r) / (1 - r^d) with r = nbar / (1 + nbar)
    norm = (1.0 / (1.0 + nbar)) / -math.expm1(d * lr)
    return PopulationVector(j, norm * np.exp(k * lr))


def expectation_jx(p) -> float:
    """``<J_x> = sum_m m P_m``; accepts a PopulationVector."""
    return float(p.m @ p.p)


def normalized_jx(jx, j):
    """``-<J_x> / J`` (zero for the one-state subspace J = 0)."""
    if j == 0:
        return np.zeros_like(np.asarray(jx, dtype=float))
    return -np.asarray(jx, dtype=float) / j


def equilibrium_jx(j, nbar) -> float:
    """Closed-form ``<J_x>`` of the steady state."""
    d = _check_j(j)
    if nbar < 0:
        raise DomainError(f"nbar must be non-negative, got {nbar!r}")
    if nbar == 0:
        return -float(j)
    lr = _boltzmann_ratio_log(nbar)
    x = math.exp(d * lr)
    return -j + nbar - d * x / -math.expm1(d * lr)


@dataclass
class Trajectory:
    """Time series of spin observables.

    ``times`` are in ``time_unit``: ``"1/gamma_s"`` for the rate equation,
    ``"s"`` (or whatever units g and kappa were given in) for the full model.
    ``saturation`` is the late-time value of ``jx_normalized`` when known.
    """

    times: np.ndarray
    jx: np.ndarray
    j: float
    nbar: float = 0.0
    time_unit: str = "1/gamma_s"
    populations: np.ndarray | None = None
    time_seconds: np.ndarray | None = None
    saturation: float | None = None
    cavity_occupation: np.ndarray | None = None
    leakage: np.ndarray | None = None
    warnings: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def jx_normalized(self):
        return normalized_jx(self.jx, self.j)

    def snapshot(self, i) -> PopulationVector:
        if self.populations is None:
            raise ValueError("trajectory was computed without populations")
        return PopulationVector(self.j, self.populations[i])


def _check_times(times):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise DomainError("times must be a non-empty 1-d array")
    if times[0] < 0:
        raise DomainError("times must be non-negative")
    if np.any(np.diff(times) <= 0):
        raise DomainError("times must be strictly increasing")
    return times


def propagate(M: RateMatrix, p0, times, gamma_s=None, *, method="auto",
              keep_populations=True, tol=1e-13) -> Trajectory:
    """Populations ``exp(tau M) p0`` at each dimensionless time ``tau``.

    ``method`` is ``"uniformization"``, ``"krylov"`` or ``"auto"`` (the former
    unless its work estimate is too large).  When ``gamma_s`` is given the
    trajectory also carries ``time_seconds = tau / gamma_s``.
    """
    if not isinstance(p0, PopulationVector):
        p0 = PopulationVector(M.j, p0)
    if p0.j != M.j:
        raise DomainError(f"initial state has j={p0.j}, matrix has j={M.j}")
    times = _check_times(times)
    try:
        pops = expaction.expm_action(M.sub, M.diag, M.sup, p0.p, times,
                                     method=method, tol=tol)
    except NumericalError as exc:
        exc.diagnostics.update({"j": M.j, "nbar": M.nbar, "method": method})
        raise
    m = m_values(M.j)
    jx = pops @ m
    mass = pops.sum(axis=1)
    traj = Trajectory(
        times=times,
        jx=jx,
        j=M.j,
        nbar=M.nbar,
        populations=pops if keep_populations else None,
        time_seconds=None if gamma_s is None else times / gamma_s,
        saturation=float(normalized_jx(equilibrium_jx(M.j, M.nbar), M.j)),
        diagnostics={
            "max_probability_error": float(np.max(np.abs(mass - 1.0))),
            "min_population": float(pops.min()),
        },
    )
    return traj
