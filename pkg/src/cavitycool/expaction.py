"""Action of exp(t M) on a vector for tridiagonal Markov generators.

``M`` is given by its three diagonals and must have nonnegative off-diagonal
entries and zero column sums.  Two methods are provided:

* ``uniformization`` -- Jensen's method.  Every term of the series is a
  nonnegative vector, so results are nonnegative and conserve total
  probability up to the truncated Poisson tail.  Work grows like
  ``q * t * n`` with ``q = max |diag|``.
* ``krylov`` -- shift-and-invert Arnoldi on ``(I - gamma M)^{-1}``.  One basis
  is reused for every output time.  Work is essentially independent of the
  stiffness, which makes large subspaces (2J+1 ~ 1e5) tractable.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numba import njit
from scipy.special import gammaln, pdtrc

from .errors import NumericalError

# Element updates above which ``auto`` switches to Krylov.
UNIFORMIZATION_BUDGET = 2e8


@njit(cache=True)
def _poisson_series(p, d, up, lo, w):
    """sum_k w[k] P^k p with P = I + M/q stored as (lo, d, up)."""
    n = p.size
    out = w[0] * p
    v = p.copy()
    nv = np.empty_like(p)
    for k in range(1, w.size):
        wk = w[k]
        s = d[0] * v[0] + up[0] * v[1]
        nv[0] = s
        out[0] += wk * s
        for i in range(1, n - 1):
            s = lo[i - 1] * v[i - 1] + d[i] * v[i] + up[i] * v[i + 1]
            nv[i] = s
            out[i] += wk * s
        s = lo[n - 2] * v[n - 2] + d[n - 1] * v[n - 1]
        nv[n - 1] = s
        out[n - 1] += wk * s
        v, nv = nv, v
    return out


def poisson_weights(lam, tol):
    """Poisson(lam) weights up to the first k whose upper tail is < tol."""
    if lam == 0:
        return np.ones(1)
    kmax = int(lam + 10.0 * math.sqrt(lam) + 20)
    while pdtrc(kmax, lam) > tol:
        kmax = int(kmax * 1.2) + 10
    # Shrink to the smallest admissible cutoff.
    lo, hi = int(lam), kmax
    while lo < hi:
        mid = (lo + hi) // 2
        if pdtrc(mid, lam) > tol:
            lo = mid + 1
        else:
            hi = mid
    k = np.arange(hi + 1)
    w = np.exp(k * math.log(lam) - lam - gammaln(k + 1))
    # Lump the (< tol) tail back in so every step conserves probability.
    return w / w.sum()


def uniformization_work(diag, times):
    q = float(np.max(-diag)) if diag.size else 0.0
    return q * float(np.max(times, initial=0.0)) * diag.size


def uniformization(lower, diag, upper, p0, times, *, tol=1e-14, max_terms=50_000_000):
    """exp(t M) p0 for each t in ``times`` (increasing, t >= 0).

    Returns an array of shape ``(len(times), n)``.
    """
    p0 = np.asarray(p0, dtype=float)
    times = np.asarray(times, dtype=float)
    n = p0.size
    out = np.empty((times.size, n))
    q = float(np.max(-diag)) if n else 0.0
    if q == 0.0:
        out[:] = p0
        return out
    d = 1.0 + diag / q
    up = upper / q
    lo = lower / q
    # Rounding can leave d[i] at -1e-16 when -diag[i] == q.
    np.maximum(d, 0.0, out=d)
    p = p0.copy()
    t_prev = 0.0
    used = 0
    for i, t in enumerate(times):
        h = t - t_prev
        if h < 0:
            raise NumericalError("times must be non-decreasing", {"index": i})
        if h > 0:
            w = poisson_weights(q * h, tol)
            used += w.size
            if used > max_terms:
                raise NumericalError(
                    "uniformization exceeded its term budget",
                    {"q": q, "t": float(t), "terms": used, "max_terms": max_terms},
                )
            p = _poisson_series(p, d, up, lo, w)
        out[i] = p
        t_prev = t
    return out


def _arnoldi_si(solve, v, kmax):
    n = v.size
    V = np.zeros((n, kmax + 1))
    H = np.zeros((kmax + 1, kmax))
    beta = np.linalg.norm(v)
    V[:, 0] = v / beta
    for k in range(kmax):
        w = solve(V[:, k])
        # Classical Gram-Schmidt, applied twice.
        for _ in range(2):
            c = V[:, : k + 1].T @ w
            H[: k + 1, k] += c
            w -= V[:, : k + 1] @ c
        h = np.linalg.norm(w)
        H[k + 1, k] = h
        if h <= 1e-14 * beta:
            yield k + 1, V, H, beta, True
            return
        V[:, k + 1] = w / h
        yield k + 1, V, H, beta, False


def _si_solution(V, H, beta, k, gamma, times):
    Hk = H[:k, :k]
    Ak = (np.eye(k) - np.linalg.inv(Hk)) / gamma
    out = np.empty((len(times), V.shape[0]))
    for i, t in enumerate(times):
        if t == 0:
            coeff = np.zeros(k)
            coeff[0] = 1.0
        else:
            coeff = sla.expm(t * Ak)[:, 0]
        out[i] = beta * (V[:, :k] @ coeff)
    return out


def krylov(lower, diag, upper, p0, times, *, tol=1e-10, kmax=120, gamma=None):
    """exp(t M) p0 by shift-and-invert Arnoldi with a shared basis.

    Convergence is monitored on a subset of the output times by comparing
    successive basis sizes; failure to reach ``tol`` by ``kmax`` raises
    :class:`NumericalError`.
    """
    p0 = np.asarray(p0, dtype=float)
    times = np.asarray(times, dtype=float)
    n = p0.size
    t_end = float(np.max(times, initial=0.0))
    if n == 1 or t_end == 0.0:
        return np.tile(p0, (times.size, 1))
    if gamma is None:
        gamma = t_end / 10.0
    M = sp.diags([lower, diag, upper], [-1, 0, 1], format="csc")
    lu = spla.splu((sp.identity(n, format="csc") - gamma * M).tocsc())
    probe = times[np.unique(np.linspace(0, times.size - 1, min(times.size, 16)).astype(int))]
    kmax = min(kmax, n)
    prev = None
    err = np.inf
    for k, V, H, beta, exhausted in _arnoldi_si(lu.solve, p0, kmax):
        if not (exhausted or k == kmax or (k >= 10 and k % 5 == 0)):
            continue
        cur = _si_solution(V, H, beta, k, gamma, probe)
        if prev is not None:
            err = float(np.max(np.abs(cur - prev)))
        if exhausted or err <= tol:
            return _si_solution(V, H, beta, k, gamma, times)
        prev = cur
    raise NumericalError(
        "shift-and-invert Krylov did not converge",
        {"kmax": kmax, "last_change": err, "tol": tol, "gamma": gamma, "n": n},
    )


def expm_action(lower, diag, upper, p0, times, *, method="auto", tol=1e-13):
    """Dispatch to ``uniformization`` or ``krylov``."""
    if method == "auto":
        work = uniformization_work(diag, times) + diag.size * len(times) * 50
        method = "uniformization" if work <= UNIFORMIZATION_BUDGET else "krylov"
    if method == "uniformization":
        return uniformization(lower, diag, upper, p0, times, tol=tol)
    if method == "krylov":
        return krylov(lower, diag, upper, p0, times, tol=max(tol, 1e-10))
    raise ValueError(f"unknown exp-action method {method!r}")
