"""
Dense complex tensor algebra for oblique (non-orthogonal) bases.

A basis frame is stored as an ``(M, N)`` complex array whose columns are the
basis kets expressed in a fixed orthonormal ambient basis of dimension ``M``.
Kets carry contravariant components ``psi^mu`` (length ``N``), bras carry
covariant components ``psi_mu``.  Second-rank operators are tagged with their
index placement:

``natural``
    ``H^mu_nu = <e^mu|H|e_nu>``
``matrix``
    ``H_{mu nu} = <e_mu|H|e_nu>`` (the quantum-chemistry convention)
``upper_upper``
    ``H^{mu nu} = <e^mu|H|e^nu>``
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import (DimensionMismatch, NotPositiveDefinite, RepMismatch,
                     SingularFrame, SingularOperator)

__all__ = [
    "LIN_INDEP_THRESHOLD", "SQRT_EIG_FLOOR", "REPS",
    "BasisFrame", "Operator", "build_frame", "lower_ket", "raise_bra", "raise_ket", "lower_bra",
    "convert_rep", "natural_hermiticity_residual", "herm_sqrt_pair",
    "invert_second_rank", "dual_vectors", "projector_matrix", "dagger",
]

# relative to the largest metric eigenvalue
LIN_INDEP_THRESHOLD = 1e-8
SQRT_EIG_FLOOR = 1e-12
REPS = ("natural", "matrix", "upper_upper")


def dagger(a):
    """Conjugate transpose over the last two axes."""
    return np.conj(np.swapaxes(a, -1, -2))


def _hermitize(a):
    return 0.5 * (a + dagger(a))


@dataclass(frozen=True, eq=False)
class BasisFrame:
    """Basis kets at one parameter point, with cached metric tensors.

    Build through :func:`build_frame`; the constructor does not validate.
    """
    vectors: np.ndarray
    metric: np.ndarray
    inv_metric: np.ndarray
    param: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def ambient_dim(self):
        return self.vectors.shape[0]

    @property
    def dim(self):
        return self.vectors.shape[1]

    def solve_metric(self, b):
        """Return ``S^{-1} b`` through the cached Cholesky factor."""
        return sla.cho_solve(self._cho, b)

    @property
    def _cho(self):
        cho = self.__dict__.get("_cho_cache")
        if cho is None:
            cho = sla.cho_factor(self.metric)
            object.__setattr__(self, "_cho_cache", cho)
        return cho


def build_frame(vectors, param=()):
    """Assemble a :class:`BasisFrame` from ambient basis kets.

    Parameters
    ----------
    vectors : array_like
        Either an ``(M, N)`` array with kets as columns or a sequence of
        ``N`` ambient vectors of equal length ``M``.
    param : array_like, optional
        The parameter point the frame belongs to.

    Raises
    ------
    DimensionMismatch
        Ragged input, empty basis or ``M < N``.
    SingularFrame
        Smallest metric eigenvalue at or below the linear-independence
        threshold.
    """
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        vecs = np.asarray(vectors, dtype=complex)
    else:
        cols = [np.asarray(v, dtype=complex).ravel() for v in vectors]
        if not cols:
            raise DimensionMismatch("a frame needs at least one vector")
        lengths = {c.shape[0] for c in cols}
        if len(lengths) != 1:
            raise DimensionMismatch(f"ragged basis vectors, lengths {sorted(lengths)}")
        vecs = np.column_stack(cols)
    m, n = vecs.shape
    if n < 1:
        raise DimensionMismatch("a frame needs at least one vector")
    if m < n:
        raise DimensionMismatch(f"ambient dimension {m} smaller than basis size {n}")
    if not np.all(np.isfinite(vecs)):
        raise ValueError("basis vectors contain NaN or Inf")

    metric = _hermitize(vecs.conj().T @ vecs)
    eigs = np.linalg.eigvalsh(metric)
    if eigs[0] <= LIN_INDEP_THRESHOLD * max(eigs[-1], 0.0) or eigs[-1] <= 0.0:
        raise SingularFrame(
            f"metric eigenvalue {eigs[0]:.3e} below threshold "
            f"{LIN_INDEP_THRESHOLD:.0e} x {eigs[-1]:.3e}")
    cho = sla.cho_factor(metric)
    inv_metric = _hermitize(sla.cho_solve(cho, np.eye(n, dtype=complex)))
    frame = BasisFrame(vecs, metric, inv_metric,
                       np.atleast_1d(np.asarray(param, dtype=float)))
    object.__setattr__(frame, "_cho_cache", cho)
    return frame


def _check_len(arr, n, what="state"):
    if arr.shape[0] != n:
        raise DimensionMismatch(f"{what} has length {arr.shape[0]}, frame dimension is {n}")


def lower_ket(ket, frame):
    """Covariant components ``psi_mu = psi^{nu*} S_{nu mu}`` of a ket.

    Works column-wise for an ``(N, K)`` array of kets.
    """
    ket = np.asarray(ket, dtype=complex)
    _check_len(ket, frame.dim)
    return frame.metric.T @ ket.conj()


def raise_bra(bra, frame):
    """Contravariant components ``psi^mu = S^{mu nu} psi_nu^*`` of a bra."""
    bra = np.asarray(bra, dtype=complex)
    _check_len(bra, frame.dim)
    return frame.solve_metric(bra.conj())


# alternative names keyed on the state passed in: a ket goes to its dual bra
# components and back
raise_ket = lower_ket
lower_bra = raise_bra


@dataclass(frozen=True, eq=False)
class Operator:
    """Second-rank operator tensor with its index placement."""
    entries: np.ndarray
    rep: str = "matrix"

    def __post_init__(self):
        if self.rep not in REPS:
            raise ValueError(f"unknown representation {self.rep!r}; expected one of {REPS}")
        a = np.asarray(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"operator must be square, got shape {a.shape}")
        object.__setattr__(self, "entries", a)


def convert_rep(op, frame, target_rep):
    """Change the index placement of ``op`` using the frame metric.

    ``H^mu_nu = S^{mu sigma} H_{sigma nu}`` and
    ``H^{mu nu} = H^mu_sigma S^{sigma nu}``.
    """
    if target_rep not in REPS:
        raise ValueError(f"unknown representation {target_rep!r}")
    a = op.entries
    _check_len(a, frame.dim, "operator")
    if op.rep == target_rep:
        return Operator(a.copy(), target_rep)
    # go through the matrix representation
    if op.rep == "natural":
        lowered = frame.metric @ a
    elif op.rep == "upper_upper":
        lowered = frame.metric @ a @ frame.metric
    else:
        lowered = a
    if target_rep == "matrix":
        out = lowered
    elif target_rep == "natural":
        out = frame.solve_metric(lowered)
    else:
        out = frame.solve_metric(frame.solve_metric(lowered).conj().T).conj().T
    return Operator(out, target_rep)


def natural_hermiticity_residual(op, frame):
    """Max deviation from ``H^mu_nu = (S_{nu lam} H^lam_sig S^{sig mu})^*``."""
    if op.rep != "natural":
        raise RepMismatch(f"expected natural representation, got {op.rep}")
    h = op.entries
    mirrored = (frame.metric @ h @ frame.inv_metric).T.conj()
    return float(np.max(np.abs(h - mirrored)))


def herm_sqrt_pair(s):
    """Return ``(S^{1/2}, S^{-1/2})`` of a Hermitian positive-definite matrix.

    Raises
    ------
    NotPositiveDefinite
        If an eigenvalue is at or below ``SQRT_EIG_FLOOR``.
    """
    s = np.asarray(s, dtype=complex)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got {s.shape}")
    w, v = np.linalg.eigh(_hermitize(s))
    if w[0] <= SQRT_EIG_FLOOR:
        raise NotPositiveDefinite(f"eigenvalue {w[0]:.3e} <= {SQRT_EIG_FLOOR:.0e}")
    root = np.sqrt(w)
    half = (v * root) @ v.conj().T
    inv_half = (v / root) @ v.conj().T
    return _hermitize(half), _hermitize(inv_half)


_INVERSE_REP = {"matrix": "upper_upper", "upper_upper": "matrix", "natural": "natural"}


def invert_second_rank(op, frame=None, rcond=1e-14):
    """Inverse tensor in the sense ``A_{nu sig} B^{sig mu} = delta``.

    The inverse of a lower-lower tensor is upper-upper and vice versa; a
    natural-representation inverse stays natural.  Computed by LU solve.

    Raises
    ------
    SingularOperator
        If the smallest singular value is below ``rcond`` times the largest.
    """
    a = op.entries
    if frame is not None:
        _check_len(a, frame.dim, "operator")
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= rcond * sv[0]:
        raise SingularOperator(f"operator is singular (singular values {sv[-1]:.3e}/{sv[0]:.3e})")
    lu = sla.lu_factor(a)
    b = sla.lu_solve(lu, np.eye(a.shape[0], dtype=complex))
    return Operator(b, _INVERSE_REP[op.rep])


def dual_vectors(frame):
    """Ambient coordinates of the dual kets ``|e^mu> = |e_nu> S^{nu mu}``."""
    return frame.vectors @ frame.inv_metric


def projector_matrix(frame):
    """Dense ``P = sum_mu |e_mu><e^mu|`` in ambient coordinates (small ``M`` only)."""
    return frame.vectors @ dual_vectors(frame).conj().T
