"""Independent dense reference solutions."""

import numpy as np
import scipy.linalg as sla


def dense_generator(j, nbar):
    """M_J assembled entry by entry from the rate formulas."""
    d = int(round(2 * j)) + 1
    M = np.zeros((d, d))
    x = j * (j + 1)
    for i in range(d):
        m = -j + i
        down = (1 + nbar) * (x - m * (m - 1))
        up = nbar * (x - m * (m + 1))
        M[i, i] = -(down + up)
        if i > 0:
            M[i - 1, i] = down
        if i < d - 1:
            M[i + 1, i] = up
    return M


def expm_propagate(M, p0, times):
    return np.array([sla.expm(t * M) @ p0 for t in times])


def eigh_propagate(M, p0, times, pi):
    """Symmetrize with the detailed-balance similarity and diagonalize.

    Only valid for nbar > 0, where the equilibrium ``pi`` is strictly positive.
    """
    s = np.sqrt(pi)
    S = M * (1.0 / s)[:, None] * s[None, :]
    S = 0.5 * (S + S.T)
    w, U = np.linalg.eigh(S)
    q0 = U.T @ (p0 / s)
    return np.array([s * (U @ (np.exp(w * t) * q0)) for t in times])


def null_vector(M):
    v = sla.null_space(M)[:, 0]
    return v / v.sum()
