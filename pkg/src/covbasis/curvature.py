"""
Curvature of a moving basis: Riemann tensor, its quantum-index (Ricci) trace
and the Berry connection and curvature it generalizes.

Sign convention
---------------
The Ricci trace ``Ric_ij = R^mu_{i mu j}`` is purely imaginary.  The usual
real Berry curvature ``-2 Im <d_i psi|d_j psi>`` equals ``1j * Ric_ij``;
:func:`berry_curvature` returns that real quantity while :func:`ricci_berry`
returns the raw trace.
"""
from dataclasses import dataclass
import math

import numpy as np

from .basis import (TwoLevelSphere, as_param, evaluate_frame, frame_derivatives,
                    DEFAULT_FD_STEP)
from .connection import christoffel, christoffel_at
from .errors import InsufficientParameters
from .tensor_core import dagger

__all__ = [
    "CurvatureTensor", "riemann", "connection_derivative", "commutator_check",
    "trace_cancellation_residual", "berry_connection_trace", "ricci_berry",
    "berry_curvature", "chern_number", "RICCI_FORMS",
]

RICCI_FORMS = ("trace", "dual", "orthonormal", "nonorthogonal")


@dataclass(frozen=True, eq=False)
class CurvatureTensor:
    """``r[mu, i, nu, j] = R^mu_{i nu j}`` at ``point``."""
    r: np.ndarray
    point: np.ndarray

    def pair(self, i, j):
        """The ``N x N`` matrix ``R^mu_{i nu j}`` for fixed parameter slots."""
        return self.r[:, i, :, j]

    def ricci(self):
        return np.einsum("aiaj->ij", self.r)

    def antisymmetry_residual(self):
        return float(np.max(np.abs(self.r + np.transpose(self.r, (0, 3, 2, 1)))))


def _require_two(family):
    if family.nparams < 2:
        raise InsufficientParameters(f"curvature needs at least 2 parameters, {family.kind} has {family.nparams}")


def connection_derivative(family, R, scheme="analytic", h=DEFAULT_FD_STEP):
    """``dD[i, j] = d_i D^mu_{nu j}`` with shape (P, P, N, N).

    The analytic route needs second derivatives of the basis kets; otherwise
    the natural connection is differenced centrally with step ``h``.
    """
    R = as_param(R, family.nparams)
    if scheme == "analytic" and family.has_second:
        frame = evaluate_frame(family, R)
        der = frame_derivatives(family, R, "analytic", frame=frame)
        e, de = frame.vectors, der.d_vectors
        d2 = family.d2_vectors(R)
        first = e.conj().T @ de                                  # (P, N, N) lower
        cross = np.einsum("iam,jan->ijmn", de.conj(), de)        # <d_i e_m|d_j e_n>
        second = np.einsum("am,ijan->ijmn", e.conj(), d2)
        return (np.einsum("imk,jkn->ijmn", der.d_inv_metric, first)
                + frame.inv_metric @ (cross + second))
    inner = "analytic" if family.has_analytic else "central_fd"
    out = np.empty((family.nparams, family.nparams, family.dim, family.dim), dtype=complex)
    for i in range(family.nparams):
        shift = np.zeros_like(R)
        shift[i] = h
        plus = christoffel_at(family, R + shift, inner, h)[2].natural
        minus = christoffel_at(family, R - shift, inner, h)[2].natural
        out[i] = (plus - minus) / (2.0 * h)
    return out


def _assemble(d_nat, dD):
    comm = np.einsum("imk,jkn->ijmn", d_nat, d_nat)
    f = dD - np.swapaxes(dD, 0, 1) + comm - np.swapaxes(comm, 0, 1)
    return np.transpose(f, (2, 0, 3, 1))


def riemann(family, R, scheme="analytic", h=DEFAULT_FD_STEP):
    """Riemann tensor ``d_i D_j - d_j D_i + D_i D_j - D_j D_i`` at ``R``.

    Parameters
    ----------
    scheme : {"analytic", "central_fd"}
        ``analytic`` falls back to differencing the connection when the
        family has no second derivatives.

    Raises
    ------
    InsufficientParameters
        For one-parameter families.
    """
    _require_two(family)
    R = as_param(R, family.nparams)
    inner = "analytic" if family.has_analytic else "central_fd"
    chris = christoffel_at(family, R, inner, h)[2]
    dD = connection_derivative(family, R, scheme, h)
    return CurvatureTensor(_assemble(chris.natural, dD), R)


def commutator_check(family, R, psi, h=1e-3, reference=None):
    """Compare ``R psi`` with the commutator of nested covariant derivatives.

    The components ``psi`` are held fixed over a stencil of frames; the inner
    covariant derivative is evaluated at ``R +- h u_i`` and the outer raw
    derivative by central differences, so the residual is ``O(h^2)``.

    Parameters
    ----------
    reference : CurvatureTensor, optional
        Defaults to the analytic Riemann tensor, or an FD one at step
        ``h / 16`` for families without second derivatives.

    Returns
    -------
    float
        ``max |R^mu_{i nu j} psi^nu - [d_i, d_j] psi^mu|`` over all ``i, j``.
    """
    _require_two(family)
    R = as_param(R, family.nparams)
    psi = np.asarray(psi, dtype=complex)
    inner = "analytic" if family.has_analytic else "central_fd"
    if reference is None:
        if family.has_second:
            reference = riemann(family, R, "analytic")
        else:
            reference = riemann(family, R, "central_fd", h / 16.0)
    d0 = christoffel_at(family, R, inner)[2].natural
    p = family.nparams
    # outer[i, j] = d_i (D_j psi) by central differences
    outer = np.empty((p, p, psi.shape[0]), dtype=complex)
    for i in range(p):
        shift = np.zeros_like(R)
        shift[i] = h
        plus = christoffel_at(family, R + shift, inner)[2].natural @ psi
        minus = christoffel_at(family, R - shift, inner)[2].natural @ psi
        outer[i] = (plus - minus) / (2.0 * h)
    nested = outer + np.einsum("imn,jn->ijm", d0, d0 @ psi)   # d_i d_j psi
    comm = nested - np.swapaxes(nested, 0, 1)
    rpsi = np.einsum("minj,n->ijm", reference.r, psi)
    return float(np.max(np.abs(rpsi - comm)))


def trace_cancellation_residual(chris):
    """``max |D^mu_{lam i} D^lam_{mu j} - D^mu_{lam j} D^lam_{mu i}|`` over ``i, j``."""
    d = chris.natural
    t = np.einsum("iml,jlm->ij", d, d)
    return float(np.max(np.abs(t - t.T)))


def berry_connection_trace(chris):
    """``A_j = 1j * D^mu_{mu j}`` for every parameter ``j``."""
    return 1j * np.trace(chris.natural, axis1=1, axis2=2)


def ricci_berry(family, R, scheme="analytic", form="trace", h=DEFAULT_FD_STEP):
    """Quantum-index trace of the curvature, ``Ric_ij`` with shape (P, P).

    Parameters
    ----------
    form : {"trace", "dual", "orthonormal", "nonorthogonal"}
        ``trace`` contracts the Riemann tensor; ``dual`` evaluates
        ``<d_i e^mu|d_j e_mu> - <d_j e^mu|d_i e_mu>`` from ambient duals;
        ``orthonormal`` is ``2i Im <d_i e_mu|d_j e_mu>`` (valid only for
        frames that stay orthonormal); ``nonorthogonal`` is
        ``2i Im{S^{mu nu}<d_i e_nu|d_j e_mu>} + dS^{mu nu}_i D_{nu mu j}
        - dS^{mu nu}_j D_{nu mu i}``.
    """
    if form not in RICCI_FORMS:
        raise ValueError(f"unknown Ricci form {form!r}; expected one of {RICCI_FORMS}")
    _require_two(family)
    R = as_param(R, family.nparams)
    if form == "trace":
        return riemann(family, R, scheme, h).ricci()
    frame = evaluate_frame(family, R)
    der = frame_derivatives(family, R, "analytic" if scheme == "analytic" and family.has_analytic
                            else "central_fd", h, frame=frame)
    de = der.d_vectors
    gram = np.einsum("iam,jan->ijmn", de.conj(), de)          # <d_i e_m|d_j e_n>
    if form == "orthonormal":
        t = np.einsum("ijmm->ij", gram)
        return 2j * t.imag
    if form == "dual":
        ded = de @ frame.inv_metric + frame.vectors @ der.d_inv_metric
        t = np.einsum("iam,jam->ij", ded.conj(), de)
        return t - t.T
    chris = christoffel(frame, der)
    first = np.einsum("mn,ijnm->ij", frame.inv_metric, gram)
    extra = np.einsum("imn,jnm->ij", der.d_inv_metric, chris.d_down_down)
    return 2j * first.imag + extra - extra.T


def berry_curvature(family, R, scheme="analytic", form="trace", h=DEFAULT_FD_STEP):
    """Real Berry curvature ``1j * Ric_ij`` (equals ``-2 Im <d_i psi|d_j psi>`` for one state)."""
    return (1j * ricci_berry(family, R, scheme, form, h)).real


def chern_number(family=None, n_theta=64, n_phi=128, form="trace", scheme="analytic"):
    """Integrate ``Ric_{theta phi} / (2 pi i)`` over the sphere.

    ``family`` must be parameterized by ``(theta, phi)``.  The midpoint grid is
    offset by half a cell so neither pole is sampled; the integrand is the
    curvature per unit solid angle weighted by ``sin(theta) dtheta dphi``.

    Returns
    -------
    complex
        Should be an integer to quadrature accuracy, with vanishing imaginary
        part.
    """
    if family is None:
        family = TwoLevelSphere()
    _require_two(family)
    dth, dph = math.pi / n_theta, 2.0 * math.pi / n_phi
    total = 0.0 + 0.0j
    for k in range(n_theta):
        th = (k + 0.5) * dth
        sin_w = math.sin(th)
        for l in range(n_phi):
            ph = (l + 0.5) * dph
            ric = ricci_berry(family, [th, ph], scheme, form)[0, 1]
            total += (ric / sin_w) * sin_w * dth * dph
    return total / (2j * math.pi)
