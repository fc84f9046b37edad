"""Full spin-cavity master equation for small ensembles.

The joint space is ``cavity (Fock 0..n_max) x spin-J``, ordered as
``kron(cavity, spin)`` so that basis index ``n * (2J+1) + i`` is
``|n>_c |J, m = -J + i>``.  Spin operators are written in the eigenbasis of
the drive axis: ``jx`` is diagonal and ``jp``/``jm`` raise and lower its
eigenvalue.  Density matrices are vectorized column-major
(``vec(A X B) = (B^T kron A) vec(X)``).
"""

from __future__ import annotations

import warnings as _warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .errors import DomainError, NumericalError
from .markov import Trajectory, _check_j, _check_times, equilibrium_jx, m_values, normalized_jx

SECTOR_MAX_DIM = 4000


def spin_operators(j):
    """Sparse ``(jp, jm, jx)`` for spin ``j``."""
    d = _check_j(j)
    m = m_values(j)
    amp = np.sqrt(np.maximum(j * (j + 1) - m[:-1] * (m[:-1] + 1), 0.0))
    jp = sp.diags(amp, -1, shape=(d, d), format="csr")
    return jp, jp.T.tocsr(), sp.diags(m, 0, format="csr")


def cavity_operators(n_max):
    """Sparse ``(a, a_dag, number)`` truncated to Fock levels 0..n_max."""
    if n_max < 0:
        raise DomainError(f"n_max must be non-negative, got {n_max!r}")
    a = sp.diags(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1,
                 shape=(n_max + 1, n_max + 1), format="csr")
    return a, a.T.tocsr(), sp.diags(np.arange(n_max + 1, dtype=float), 0, format="csr")


def _joint(cav, spin):
    return sp.kron(cav, spin, format="csr")


def joint_operators(j, n_max):
    """Joint-space ``a``, ``jp``, ``jx`` and the cavity number operator."""
    jp, _, jx = spin_operators(j)
    a, _, num = cavity_operators(n_max)
    ic = sp.identity(n_max + 1, format="csr")
    isp = sp.identity(jp.shape[0], format="csr")
    return _joint(a, isp), _joint(ic, jp), _joint(ic, jx), _joint(num, isp)


def excitation_number(j, n_max):
    """``N_ex = a^dag a + (J_x + J)`` as a sparse diagonal operator."""
    d = _check_j(j)
    n = np.repeat(np.arange(n_max + 1), d)
    k = np.tile(np.arange(d), n_max + 1)
    return sp.diags((n + k).astype(float), 0, format="csr")


def build_exchange_hamiltonian(j, n_max, g):
    """Resonant flip-flop coupling ``(i g / 2)(a J_+ - a^dag J_-)``."""
    if n_max < 1:
        raise DomainError(f"n_max must be at least 1, got {n_max!r}")
    a, jp, _, _ = joint_operators(j, n_max)
    x = a @ jp
    return ((0.5j * g) * (x - x.conj().T)).tocsr()


def effective_spin_hamiltonian(j, nbar):
    """Cavity-induced spin Hamiltonian ``(1+nbar) J_+J_- - nbar J_-J_+``.

    It is diagonal in the ``|J, m>`` basis.
    """
    jp, jm, _ = spin_operators(j)
    return ((1.0 + nbar) * (jp @ jm) - nbar * (jm @ jp)).tocsr()


@dataclass
class JointState:
    j: float
    n_max: int
    rho: np.ndarray

    @property
    def spin_dim(self):
        return _check_j(self.j)

    @property
    def dim(self):
        return self.spin_dim * (self.n_max + 1)

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=complex)
        if self.rho.shape != (self.dim, self.dim):
            raise DomainError(f"rho has shape {self.rho.shape}, expected {(self.dim,) * 2}")

    def hermiticity_error(self):
        return float(np.max(np.abs(self.rho - self.rho.conj().T)))

    def trace_error(self):
        return float(abs(np.trace(self.rho) - 1.0))

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T))[0])

    def is_valid(self, herm_tol=1e-12, trace_tol=1e-10, eig_tol=1e-8):
        return (self.hermiticity_error() <= herm_tol and self.trace_error() <= trace_tol
                and self.min_eigenvalue() >= -eig_tol)

    def _diag_grid(self):
        return np.real(np.diag(self.rho)).reshape(self.n_max + 1, self.spin_dim)

    def spin_populations(self):
        return self._diag_grid().sum(axis=0)

    def cavity_populations(self):
        return self._diag_grid().sum(axis=1)

    def spin_marginal(self):
        r = self.rho.reshape(self.n_max + 1, self.spin_dim, self.n_max + 1, self.spin_dim)
        return np.einsum("nanb->ab", r)

    def expect(self, op):
        return complex(np.sum(op.multiply(self.rho.T)) if sp.issparse(op)
                       else np.trace(op @ self.rho))


def thermal_fock_populations(n_max, nbar):
    """Thermal distribution over Fock levels 0..n_max, renormalized."""
    p = np.zeros(n_max + 1)
    if nbar == 0:
        p[0] = 1.0
        return p
    r = nbar / (1.0 + nbar)
    p = r ** np.arange(n_max + 1)
    return p / p.sum()


def initial_state(j, n_max, nbar=0.0) -> JointState:
    """Maximally mixed spin times the (truncated) thermal cavity state."""
    if nbar < 0:
        raise DomainError(f"nbar must be non-negative, got {nbar!r}")
    d = _check_j(j)
    pc = thermal_fock_populations(n_max, nbar)
    diag = np.kron(pc, np.full(d, 1.0 / d))
    return JointState(j, n_max, np.diag(diag).astype(complex))


@dataclass
class Superoperator:
    """Lindblad generator ``-i[H, .] + (kappa/2)[(1+nbar) D[a] + nbar D[a^dag]]``."""

    matrix: sp.csr_matrix
    hamiltonian: sp.csr_matrix
    annihilation: sp.csr_matrix
    kappa: float
    nbar: float
    n_max: int
    spin_dim: int

    @property
    def dim(self):
        return self.hamiltonian.shape[0]

    def apply(self, rho):
        """Matrix-free action on a density matrix."""
        H, a = self.hamiltonian, self.annihilation
        out = -1j * (H @ rho - (H.T @ rho.T).T)
        for c, A in self._channels():
            Ad = A.conj().T
            AdA = Ad @ A
            ArAd = A @ (Ad.T @ rho.T).T
            out += c * (2.0 * ArAd - AdA @ rho - (AdA.T @ rho.T).T)
        return out

    def _channels(self):
        a = self.annihilation
        out = [(0.5 * self.kappa * (1.0 + self.nbar), a)]
        if self.nbar > 0:
            out.append((0.5 * self.kappa * self.nbar, a.conj().T.tocsr()))
        return out


def dissipator_superop(A, coeff, dim):
    """Vectorized ``coeff * (2 A . A^dag - {A^dag A, .})``."""
    eye = sp.identity(dim, format="csr")
    AdA = (A.conj().T @ A).tocsr()
    return coeff * (2.0 * sp.kron(A.conj(), A) - sp.kron(eye, AdA) - sp.kron(AdA.T, eye))


def build_liouvillian(H, kappa, nbar, n_max) -> Superoperator:
    H = sp.csr_matrix(H, dtype=complex)
    dim = H.shape[0]
    if dim % (n_max + 1):
        raise DomainError(f"Hamiltonian dimension {dim} is not a multiple of n_max+1={n_max + 1}")
    spin_dim = dim // (n_max + 1)
    if kappa < 0 or nbar < 0:
        raise DomainError("kappa and nbar must be non-negative")
    a, _, _ = cavity_operators(n_max)
    a = _joint(a, sp.identity(spin_dim, format="csr")).astype(complex)
    eye = sp.identity(dim, format="csr")
    L = -1j * (sp.kron(eye, H) - sp.kron(H.T, eye))
    sup = Superoperator(L.tocsr(), H, a, float(kappa), float(nbar), int(n_max), spin_dim)
    for c, A in sup._channels():
        L = L + dissipator_superop(A, c, dim)
    sup.matrix = L.tocsr()
    return sup


def _vec(rho):
    return np.asarray(rho).reshape(-1, order="F")


def _unvec(v, dim):
    return v.reshape(dim, dim, order="F")


def _sector_indices(nex_diag):
    dim = nex_diag.size
    rows = np.tile(np.arange(dim), dim)
    cols = np.repeat(np.arange(dim), dim)
    return np.flatnonzero(nex_diag[rows] == nex_diag[cols])


def _evolve_sector(L, v0, times, idx):
    Ls = L.matrix[idx][:, idx].toarray()
    v = v0[idx]
    out = np.zeros((times.size, v0.size), dtype=complex)
    t_prev, dt_prev, E = 0.0, None, None
    for i, t in enumerate(times):
        dt = t - t_prev
        if dt > 0:
            if E is None or not np.isclose(dt, dt_prev, rtol=1e-12, atol=0.0):
                E = sla.expm(dt * Ls)
                dt_prev = dt
            v = E @ v
        out[i, idx] = v
        t_prev = t
    return out


def _evolve_expm_multiply(L, v0, times):
    out = np.zeros((times.size, v0.size), dtype=complex)
    steps = np.diff(np.concatenate([[0.0], times]))
    uniform = times[0] == 0.0 and times.size > 2 and np.allclose(steps[1:], steps[1], rtol=1e-12)
    if uniform:
        with _warnings.catch_warnings():
            _warnings.simplefilter("ignore")
            return spla.expm_multiply(L.matrix, v0, start=0.0, stop=times[-1],
                                      num=times.size, endpoint=True)
    v = v0
    for i, dt in enumerate(steps):
        if dt > 0:
            v = spla.expm_multiply(dt * L.matrix, v)
        out[i] = v
    return out


def _evolve_ode(L, rho0, times, rtol=1e-11, atol=1e-13):
    dim = L.dim

    def rhs(_t, y):
        return _vec(L.apply(_unvec(y, dim)))

    sol = solve_ivp(rhs, (0.0, float(times[-1])), _vec(rho0), method="DOP853",
                    t_eval=times, rtol=rtol, atol=atol)
    if not sol.success:
        raise NumericalError("ODE integration failed", {"message": sol.message})
    return sol.y.T


def evolve(state0: JointState, L: Superoperator, times, *, method="auto",
           leakage_threshold=1e-6, check_states=True, keep_states=False) -> Trajectory:
    """Propagate ``state0`` under ``L`` and record spin and cavity observables.

    Methods: ``"sector"`` exponentiates the generator restricted to operators
    that connect equal excitation numbers (exact when both the initial state
    and the generator respect that structure), ``"expm_multiply"`` uses the
    sparse vectorized generator, ``"ode"`` integrates matrix-free.
    """
    times = _check_times(times)
    if state0.dim != L.dim:
        raise DomainError("state and superoperator dimensions differ")
    j, n_max, dim = state0.j, state0.n_max, state0.dim
    v0 = _vec(state0.rho)
    nex = excitation_number(j, n_max).diagonal()
    if method in ("auto", "sector"):
        idx = _sector_indices(nex)
        mask = np.zeros(v0.size, dtype=bool)
        mask[idx] = True
        closed = (np.all(np.abs(v0[~mask]) <= 1e-14)
                  and abs(L.matrix[~mask][:, idx]).sum() == 0.0)
        if method == "sector" and not closed:
            raise DomainError("state or generator mixes excitation-number sectors")
        if method == "auto":
            method = "sector" if closed and idx.size <= SECTOR_MAX_DIM else "expm_multiply"
    if method == "sector":
        vecs = _evolve_sector(L, v0, times, idx)
    elif method == "expm_multiply":
        vecs = _evolve_expm_multiply(L, v0, times)
    elif method == "ode":
        vecs = _evolve_ode(L, state0.rho, times)
    else:
        raise ValueError(f"unknown method {method!r}")

    d = state0.spin_dim
    m = m_values(j)
    diag_idx = np.arange(dim) * (dim + 1)
    diags = np.real(vecs[:, diag_idx]).reshape(times.size, n_max + 1, d)
    spin_pops = diags.sum(axis=1)
    cav_pops = diags.sum(axis=2)
    jx = spin_pops @ m
    occupation = cav_pops @ np.arange(n_max + 1)
    leakage = cav_pops[:, -1]

    diagnostics = {"method": method}
    if check_states:
        herm = trace = 0.0
        min_eig = np.inf
        for v in vecs:
            st = JointState(j, n_max, _unvec(v, dim))
            herm = max(herm, st.hermiticity_error())
            trace = max(trace, st.trace_error())
            min_eig = min(min_eig, st.min_eigenvalue())
        diagnostics.update({"max_hermiticity_error": herm, "max_trace_error": trace,
                            "min_eigenvalue": min_eig})
    # At nbar = 0 nothing raises the excitation number, so a cutoff at or
    # above the largest excitation present initially loses nothing.
    support = np.abs(np.diag(state0.rho)) > 1e-15
    exact = L.nbar == 0 and nex[support].max() <= n_max
    diagnostics["truncation_exact"] = bool(exact)
    warn = []
    if not exact and leakage.max() > leakage_threshold:
        warn.append(f"top Fock level population {leakage.max():.3e} exceeds "
                    f"threshold {leakage_threshold:.1e}; increase n_max")
    if L.nbar > 0:
        warn.append("nbar > 0 in the full model is outside the validated envelope "
                    "(zero-temperature cavity only)")
    traj = Trajectory(
        times=times,
        jx=jx,
        j=j,
        nbar=L.nbar,
        time_unit="s",
        populations=spin_pops,
        time_seconds=times,
        saturation=float(normalized_jx(equilibrium_jx(j, L.nbar), j)),
        cavity_occupation=occupation,
        leakage=leakage,
        warnings=warn,
        diagnostics=diagnostics,
    )
    if keep_states:
        traj.diagnostics["states"] = [_unvec(v, dim) for v in vecs]
    return traj
