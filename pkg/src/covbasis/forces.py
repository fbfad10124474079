"""
Energy derivatives in a parameter-dependent basis.

Three equivalent Hellmann-Feynman expressions are available through
:func:`hf_derivative`:

``natural``
    ``psi_mu (cov_d H^mu_nu) psi^nu``
``matrix_raw``
    ``psi^+ [d H_{mu nu} - E (D_{mu i nu} + D_{mu nu i})] psi``
``matrix_covariant``
    ``psi^+ (cov_d H_{mu nu}) psi``

:func:`pulay_decomposition` splits the same derivative into the explicit
operator term, the part of the basis-derivative terms inside the basis space,
and the part reaching out of it.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .basis import as_param, complement_project, evaluate_frame, frame_derivatives, DEFAULT_FD_STEP
from .connection import christoffel, covariant_derivative_operator
from .errors import AmbientUnavailable, DegenerateState, DimensionMismatch
from .tensor_core import Operator

__all__ = [
    "DEGENERACY_GAP_TOL", "HF_FORMS", "EigenSolution", "solve_generalized_eigen",
    "hf_derivative", "pulay_decomposition", "eigenvalue_fd",
]

DEGENERACY_GAP_TOL = 1e-8
HF_FORMS = ("natural", "matrix_raw", "matrix_covariant")


@dataclass(frozen=True, eq=False)
class EigenSolution:
    """One generalized eigenpair, ``psi^+ S psi = 1``.

    ``gap`` is the distance to the nearest other eigenvalue (``inf`` if alone).
    """
    energy: float
    ket: np.ndarray
    index: int
    gap: float


def solve_generalized_eigen(H, frame):
    """Solve ``H_{mu nu} psi^nu = E S_{mu nu} psi^nu`` for the full spectrum.

    Parameters
    ----------
    H : Operator in matrix representation, or an ``(N, N)`` array taken as such.

    Returns
    -------
    list of EigenSolution, ascending in energy.
    """
    if isinstance(H, Operator):
        if H.rep != "matrix":
            from .tensor_core import convert_rep
            H = convert_rep(H, frame, "matrix")
        h = H.entries
    else:
        h = np.asarray(H, dtype=complex)
    if h.shape != (frame.dim, frame.dim):
        raise DimensionMismatch(f"operator shape {h.shape} vs frame dimension {frame.dim}")
    h = 0.5 * (h + h.conj().T)
    w, v = sla.eigh(h, frame.metric)
    out = []
    for k in range(w.size):
        others = np.delete(w, k)
        gap = float(np.min(np.abs(others - w[k]))) if others.size else np.inf
        out.append(EigenSolution(float(w[k]), v[:, k].copy(), k, gap))
    return out


def _setup(sol, family, hamiltonian, R, scheme):
    if sol.gap < DEGENERACY_GAP_TOL:
        raise DegenerateState(f"eigenvalue {sol.energy} is within {sol.gap:.2e} of another")
    R = as_param(R, family.nparams)
    frame = evaluate_frame(family, R)
    der = frame_derivatives(family, R, scheme, frame=frame)
    return R, frame, der, christoffel(frame, der)


def hf_derivative(sol, family, hamiltonian, R, rep="natural", scheme="analytic"):
    """``d E / d R^i`` for an isolated eigenpair, shape (P,).

    Parameters
    ----------
    sol : EigenSolution at ``R``
    hamiltonian : model providing ``matrix`` and ``d_matrix``
    rep : one of :data:`HF_FORMS`

    Raises
    ------
    DegenerateState
        If the eigenvalue gap is below :data:`DEGENERACY_GAP_TOL`.
    """
    if rep not in HF_FORMS:
        raise ValueError(f"unknown Hellmann-Feynman form {rep!r}; expected one of {HF_FORMS}")
    R, frame, der, chris = _setup(sol, family, hamiltonian, R, scheme)
    psi = sol.ket
    h_low = hamiltonian.matrix(frame, R)
    dh_low = hamiltonian.d_matrix(frame, der, R)
    if rep == "natural":
        h_nat = frame.solve_metric(h_low)
        dh_nat = der.d_inv_metric @ h_low + frame.inv_metric @ dh_low
        cov = covariant_derivative_operator(dh_nat, Operator(h_nat, "natural"), chris)
        bra = frame.metric.T @ psi.conj()          # psi_mu
        vals = np.einsum("m,imn,n->i", bra, cov, psi)
    elif rep == "matrix_raw":
        shift = chris.variant("down_i_down") + chris.d_down_down
        vals = np.einsum("m,imn,n->i", psi.conj(), dh_low - sol.energy * shift, psi)
    else:
        cov = covariant_derivative_operator(dh_low, Operator(h_low, "matrix"), chris)
        vals = np.einsum("m,imn,n->i", psi.conj(), cov, psi)
    return vals.real


def pulay_decomposition(sol, family, hamiltonian, R, scheme="analytic"):
    """Split ``d E / d R^i`` into explicit, in-space and out-of-space pieces.

    Returns
    -------
    dict of (P,) arrays
        ``hellmann``: ``psi_mu <e^mu|d_i H|e_nu> psi^nu``;
        ``in_space``: ``psi_mu (D^mu_{i s} H^s_nu + H^mu_s D^s_{nu i}) psi^nu``,
        which vanishes for exact eigenstates;
        ``out_of_space``: ``psi_mu [<d_i e^mu|Q H|e_nu> + <e^mu|H Q|d_i e_nu>] psi^nu``;
        ``total``: their sum.

    Raises
    ------
    AmbientUnavailable
        If the model has no ambient operator.
    """
    if not getattr(hamiltonian, "has_ambient", True):
        raise AmbientUnavailable("the Pulay split needs the ambient Hamiltonian")
    R, frame, der, chris = _setup(sol, family, hamiltonian, R, scheme)
    psi = sol.ket
    e = frame.vectors
    bra = frame.metric.T @ psi.conj()                              # psi_mu
    amb_bra = (e @ frame.inv_metric) @ bra.conj()                  # sum_mu psi_mu^* |e^mu>
    amb_ket = e @ psi
    h_ket = hamiltonian.apply(R, amb_ket)
    h_bra = hamiltonian.apply(R, amb_bra)
    dh_ket = hamiltonian.apply_derivative(R, amb_ket)               # (P, M)
    hellmann = np.einsum("a,ia->i", amb_bra.conj(), dh_ket)

    h_nat = hamiltonian.natural(frame, R)
    inner = chris.variant("up_i_down") @ h_nat + h_nat @ chris.natural
    in_space = np.einsum("m,imn,n->i", bra, inner, psi)

    # dual derivatives d|e^mu> = d|e_nu> S^{nu mu} + |e_nu> dS^{nu mu}
    ded = der.d_vectors @ frame.inv_metric + e @ der.d_inv_metric
    d_bra = ded @ bra.conj()                                       # (P, M)
    d_ket = der.d_vectors @ psi                                    # (P, M)
    q_hket = complement_project(frame, h_ket)
    q_hbra = complement_project(frame, h_bra)
    out = np.einsum("ia,a->i", d_bra.conj(), q_hket) + np.einsum("a,ia->i", q_hbra.conj(), d_ket)
    total = hellmann + in_space + out
    return {"hellmann": hellmann.real, "in_space": in_space.real,
            "out_of_space": out.real, "total": total.real,
            "imag_residual": float(np.max(np.abs(total.imag))) if total.size else 0.0}


def eigenvalue_fd(family, hamiltonian, R, index, h=DEFAULT_FD_STEP):
    """Central-difference derivative of the ``index``-th generalized eigenvalue."""
    R = as_param(R, family.nparams)
    out = np.empty(family.nparams)
    for i in range(family.nparams):
        vals = []
        for sign in (1.0, -1.0):
            r = R.copy()
            r[i] += sign * h
            fr = evaluate_frame(family, r)
            vals.append(sla.eigh(hamiltonian.matrix(fr, r), fr.metric, eigvals_only=True)[index])
        out[i] = (vals[0] - vals[1]) / (2.0 * h)
    return out
