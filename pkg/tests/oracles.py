"""
Reference computations that avoid the package's own code paths.

Everything here works from raw ambient vectors with plain numpy loops,
least squares or matrix exponentials.
"""
import numpy as np
import scipy.linalg as sla


def gram_loops(vecs):
    """Overlap matrix by explicit double loop."""
    n = vecs.shape[1]
    s = np.empty((n, n), dtype=complex)
    for m in range(n):
        for k in range(n):
            s[m, k] = np.sum(np.conj(vecs[:, m]) * vecs[:, k])
    return s


def fd_vectors(family, R, h=1e-5):
    """Central-difference basis derivatives, shape (P, M, N)."""
    R = np.asarray(R, dtype=float)
    out = []
    for i in range(R.size):
        e = np.zeros_like(R)
        e[i] = h
        out.append((family.vectors(R + e) - family.vectors(R - e)) / (2 * h))
    return np.array(out)


def connection_lstsq(vecs, dvecs):
    """Natural connection as least-squares expansion coefficients of d|e> in the basis."""
    return np.array([np.linalg.lstsq(vecs, dv, rcond=None)[0] for dv in dvecs])


def exact_static_step(s, h, psi, dt):
    """``exp(-i dt S^-1 H) psi`` for a fixed frame and constant H."""
    return sla.expm(-1j * dt * np.linalg.solve(s, h)) @ psi


def rotation(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def sphere_berry_curvature(theta):
    """Real Berry curvature ``F_{theta phi}`` of a spin-1/2 state aligned with the field."""
    return 0.5 * np.sin(theta)


def loglog_slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])
