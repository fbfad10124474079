"""
Ambient Hamiltonian models.

A model is a function of the same parameter point ``R`` as the basis family
it is paired with (for trajectories that point is the time).  Models act on
blocks of ambient vectors instead of materializing ``M x M`` matrices, so grid
models stay cheap at ``M = 2048``.
"""
import numpy as np
import scipy.sparse as sp

from .basis import as_param
from .errors import AmbientUnavailable, DimensionMismatch
from .tensor_core import dagger

__all__ = [
    "Hamiltonian", "ZeroHamiltonian", "DenseHamiltonian", "DrivenHamiltonian", "GridHamiltonian",
    "SubspaceHamiltonian", "zero_hamiltonian", "pauli",
]


def pauli(name):
    return {
        "x": np.array([[0, 1], [1, 0]], dtype=complex),
        "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
        "z": np.array([[1, 0], [0, -1]], dtype=complex),
        "i": np.eye(2, dtype=complex),
    }[name]


class Hamiltonian:
    """Interface: subclasses implement ``apply`` and ``apply_derivative``."""

    has_ambient = True
    nparams = 1
    ambient_dim = 0

    def apply(self, R, v):
        raise NotImplementedError

    def apply_derivative(self, R, v):
        """``d_i H(R) v`` stacked over parameters, shape ``(P,) + v.shape``."""
        raise NotImplementedError

    def matrix(self, frame, R=None):
        """``H_{mu nu} = <e_mu|H|e_nu>`` (Hermitian by construction)."""
        R = frame.param if R is None else R
        e = frame.vectors
        hm = e.conj().T @ self.apply(R, e)
        return 0.5 * (hm + hm.conj().T)

    def natural(self, frame, R=None):
        return frame.solve_metric(self.matrix(frame, R))

    def d_matrix(self, frame, derivs, R=None):
        """``d_i H_{mu nu} = <d_i e_mu|H|e_nu> + <e_mu|d_i H|e_nu> + <e_mu|H|d_i e_nu>``."""
        R = frame.param if R is None else R
        e = frame.vectors
        he = self.apply(R, e)
        basis_part = dagger(derivs.d_vectors) @ he
        basis_part = basis_part + dagger(basis_part)
        return basis_part + e.conj().T @ self.apply_derivative(R, e)

    def _check(self, v):
        if v.shape[0] != self.ambient_dim:
            raise DimensionMismatch(f"vector length {v.shape[0]} vs ambient dimension {self.ambient_dim}")


class DenseHamiltonian(Hamiltonian):
    """Hermitian ambient matrix ``H(R)`` given by callables (or a constant)."""

    def __init__(self, h, dh=None, nparams=1):
        if callable(h):
            self._h = h
            probe = np.asarray(h(np.zeros(nparams)))
        else:
            const = np.asarray(h, dtype=complex)
            self._h = lambda R: const
            probe = const
            if dh is None:
                zero = np.zeros((nparams,) + const.shape, dtype=complex)
                dh = lambda R: zero
        if probe.ndim != 2 or probe.shape[0] != probe.shape[1]:
            raise DimensionMismatch(f"Hamiltonian must be square, got {probe.shape}")
        self._dh = dh
        self.nparams = int(nparams)
        self.ambient_dim = probe.shape[0]

    def ambient(self, R):
        return np.asarray(self._h(as_param(R, self.nparams)), dtype=complex)

    def apply(self, R, v):
        v = np.asarray(v, dtype=complex)
        self._check(v)
        return self.ambient(R) @ v

    def apply_derivative(self, R, v):
        if self._dh is None:
            raise NotImplementedError("no derivative supplied for this Hamiltonian")
        v = np.asarray(v, dtype=complex)
        self._check(v)
        return np.asarray(self._dh(as_param(R, self.nparams)), dtype=complex) @ v


class ZeroHamiltonian(Hamiltonian):
    """``H = 0`` on an ambient space of any size (no matrix is stored)."""

    def __init__(self, ambient_dim, nparams=1):
        self.ambient_dim = int(ambient_dim)
        self.nparams = int(nparams)

    def apply(self, R, v):
        v = np.asarray(v, dtype=complex)
        self._check(v)
        return np.zeros_like(v)

    def apply_derivative(self, R, v):
        v = np.asarray(v, dtype=complex)
        self._check(v)
        return np.zeros((self.nparams,) + v.shape, dtype=complex)


def zero_hamiltonian(ambient_dim, nparams=1):
    return ZeroHamiltonian(ambient_dim, nparams)


class DrivenHamiltonian(DenseHamiltonian):
    """``H(t) = H0 + sin(omega t + phase) H1`` with time as the only parameter."""

    def __init__(self, h0, h1, omega=1.0, phase=0.0):
        h0 = np.asarray(h0, dtype=complex)
        h1 = np.asarray(h1, dtype=complex)
        super().__init__(lambda R: h0 + np.sin(omega * R[0] + phase) * h1,
                         lambda R: (omega * np.cos(omega * R[0] + phase) * h1)[None],
                         nparams=1)


class GridHamiltonian(Hamiltonian):
    """One-body grid Hamiltonian following the atoms of a grid family.

    ``H = -(1/2) d^2/dx^2 + V0(x) - sum_a Z_a exp(-(x - X_a(R))^2 / (2 sigma^2))``
    with a three-point Laplacian (zero Dirichlet walls).  Only the wells move,
    so ``d_i H`` is the diagonal ``sum_a dV/dX_a dX_a/dR^i``.

    Parameters
    ----------
    family : grid family exposing ``x``, ``atom_positions`` and
        ``d_atom_positions`` (overlap pairs, Gaussian chains and their
        trajectory or gauged wrappers).
    depth : float or sequence, well depth per atom.
    sigma : float, well width.
    static_potential : callable ``x -> V0(x)``, optional.
    """

    def __init__(self, family, depth=1.0, sigma=1.0, static_potential=None, mass=1.0):
        base = family
        while not hasattr(base, "x"):
            base = base.base
        self.family = family
        self.x = base.x
        self.dx = base.dx
        self.ambient_dim = self.x.size
        self.nparams = family.nparams
        self.sigma = float(sigma)
        self.depth = depth
        n = self.ambient_dim
        lap = sp.diags([np.ones(n - 1), -2.0 * np.ones(n), np.ones(n - 1)], [-1, 0, 1]) / self.dx ** 2
        self.kinetic = (-0.5 / mass) * lap.tocsr()
        self.v0 = np.zeros(n) if static_potential is None else np.asarray(static_potential(self.x), dtype=float)

    def _depths(self, n_atoms):
        d = np.broadcast_to(np.asarray(self.depth, dtype=float), (n_atoms,))
        return d

    def potential(self, R):
        pos = self.family.atom_positions(R)
        z = self._depths(pos.size)
        u = self.x[:, None] - pos[None, :]
        return self.v0 - np.sum(z * np.exp(-u * u / (2.0 * self.sigma ** 2)), axis=1)

    def d_potential(self, R):
        """``(P, M)`` array of ``d_i V``."""
        pos = self.family.atom_positions(R)
        dpos = np.atleast_2d(self.family.d_atom_positions(R))       # (P, A)
        z = self._depths(pos.size)
        u = self.x[:, None] - pos[None, :]
        dv_dx = -z * np.exp(-u * u / (2.0 * self.sigma ** 2)) * u / self.sigma ** 2   # (M, A)
        return dpos @ dv_dx.T

    def apply(self, R, v):
        v = np.asarray(v, dtype=complex)
        self._check(v)
        pot = self.potential(R)
        return self.kinetic @ v + (pot[:, None] * v if v.ndim == 2 else pot * v)

    def apply_derivative(self, R, v):
        v = np.asarray(v, dtype=complex)
        self._check(v)
        dv = self.d_potential(R)
        return dv[:, :, None] * v[None] if v.ndim == 2 else dv * v[None]

    def ground_space(self, R, n_states):
        """Lowest ``n_states`` eigenvectors of the grid Hamiltonian (for enrichment checks)."""
        from scipy.sparse.linalg import eigsh
        h = self.kinetic + sp.diags(self.potential(R))
        _, vecs = eigsh(h, k=n_states, which="SA")
        return vecs.astype(complex)


class SubspaceHamiltonian(Hamiltonian):
    """Model known only through its matrix elements ``H_{mu nu}(R)`` in the basis.

    Propagation works; anything needing the ambient operator raises
    :class:`AmbientUnavailable`.
    """

    has_ambient = False

    def __init__(self, matrix_fn, d_matrix_fn=None, nparams=1):
        self._fn = matrix_fn
        self._dfn = d_matrix_fn
        self.nparams = int(nparams)

    def matrix(self, frame, R=None):
        R = frame.param if R is None else R
        hm = np.asarray(self._fn(as_param(R, self.nparams)), dtype=complex)
        if hm.shape != (frame.dim, frame.dim):
            raise DimensionMismatch(f"matrix elements of shape {hm.shape} vs frame dimension {frame.dim}")
        return 0.5 * (hm + hm.conj().T)

    def d_matrix(self, frame, derivs, R=None):
        if self._dfn is None:
            raise AmbientUnavailable("no derivative of the subspace matrix elements supplied")
        R = frame.param if R is None else R
        return np.asarray(self._dfn(as_param(R, self.nparams)), dtype=complex)

    def apply(self, R, v):
        raise AmbientUnavailable("this model has no ambient operator")

    def apply_derivative(self, R, v):
        raise AmbientUnavailable("this model has no ambient operator")
