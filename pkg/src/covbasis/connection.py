"""
Affine connection of a moving basis.

Only ``D_{mu nu i} = <e_mu|d_i e_nu>`` is stored (array axes ``[i, mu, nu]``).
The other seven placements are derived from it with the metric; the identity
checker recomputes all eight straight from ambient inner products so that the
derived forms are compared against an independent route.

Variant names spell the slot order of the symbol, with ``i`` marking the
derivative slot:

===============  ==============================
``up_down_i``    ``<e^mu | d_i e_nu>`` (natural)
``up_i_down``    ``<d_i e^mu | e_nu>``
``down_i_up``    ``<d_i e_mu | e^nu>``
``down_up_i``    ``<e_mu | d_i e^nu>``
``down_down_i``  ``<e_mu | d_i e_nu>`` (stored)
``down_i_down``  ``<d_i e_mu | e_nu>``
``up_i_up``      ``<d_i e^mu | e^nu>``
``up_up_i``      ``<e^mu | d_i e^nu>``
===============  ==============================
"""
from dataclasses import dataclass, field

import numpy as np

from .basis import frame_derivatives, evaluate_frame, frame_gauge_overlap, as_param
from .errors import DimensionMismatch, RepMismatch
from .tensor_core import REPS, dagger

__all__ = [
    "VARIANTS", "ChristoffelSet", "ConnectionReport", "christoffel",
    "christoffel_at", "ambient_variants", "verify_connection_identities",
    "covariant_derivative_ket", "covariant_derivative_bra",
    "covariant_derivative_operator", "parallel_transport_step",
    "transport_around_loop", "rotation_deformation_split",
    "transform_christoffel", "propagation_forms",
]

VARIANTS = ("up_down_i", "up_i_down", "down_i_up", "down_up_i",
            "down_down_i", "down_i_down", "up_i_up", "up_up_i")


@dataclass(frozen=True, eq=False)
class ChristoffelSet:
    """Connection coefficients at one parameter point.

    Attributes
    ----------
    d_down_down : ndarray, shape (P, N, N)
        ``D_{mu nu i}`` indexed ``[i, mu, nu]``.
    frame : BasisFrame
    """
    d_down_down: np.ndarray
    frame: object
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def nparams(self):
        return self.d_down_down.shape[0]

    @property
    def natural(self):
        """``D^mu_{nu i}`` with shape (P, N, N)."""
        return self.variant("up_down_i")

    def variant(self, name):
        """Return the named placement, derived from the stored one."""
        if name not in VARIANTS:
            raise KeyError(f"unknown Christoffel variant {name!r}; expected one of {VARIANTS}")
        hit = self._cache.get(name)
        if hit is None:
            hit = self._derive(name)
            self._cache[name] = hit
        return hit

    def _derive(self, name):
        d = self.d_down_down
        sinv = self.frame.inv_metric
        dd = dagger(d)
        return {
            "down_down_i": d,
            "up_down_i": sinv @ d,
            "up_i_down": -(sinv @ d),
            "down_i_down": dd,
            "down_i_up": dd @ sinv,
            "down_up_i": -(dd @ sinv),
            "up_i_up": -(sinv @ d @ sinv),
            "up_up_i": -(sinv @ dd @ sinv),
        }[name]

    def all_variants(self):
        return {k: self.variant(k) for k in VARIANTS}


def christoffel(frame, derivs):
    """``D_{mu nu i} = <e_mu | d_i e_nu>`` from ambient derivative vectors.

    Parameters
    ----------
    frame : BasisFrame
    derivs : FrameDerivatives
    """
    dv = derivs.d_vectors
    if dv.ndim != 3 or dv.shape[1:] != frame.vectors.shape:
        raise DimensionMismatch(
            f"derivative vectors of shape {dv.shape} do not match frame {frame.vectors.shape}")
    return ChristoffelSet(frame.vectors.conj().T @ dv, frame)


def christoffel_at(family, R, scheme="analytic", h=1e-4):
    """Frame, derivatives and connection of ``family`` at ``R`` in one call."""
    frame = evaluate_frame(family, R)
    derivs = frame_derivatives(family, R, scheme, h, frame=frame)
    return frame, derivs, christoffel(frame, derivs)


def ambient_variants(frame, derivs):
    """All eight placements computed directly from ambient kets and duals.

    Dual derivatives use ``d|e^mu> = d|e_nu> S^{nu mu} + |e_nu> d S^{nu mu}``.
    """
    e = frame.vectors
    de = derivs.d_vectors
    ed = e @ frame.inv_metric
    ded = de @ frame.inv_metric + e @ derivs.d_inv_metric
    eh, edh = e.conj().T, ed.conj().T
    return {
        "up_down_i": edh @ de,
        "up_i_down": dagger(ded) @ e,
        "down_i_up": dagger(de) @ ed,
        "down_up_i": eh @ ded,
        "down_down_i": eh @ de,
        "down_i_down": dagger(de) @ e,
        "up_i_up": dagger(ded) @ ed,
        "up_up_i": edh @ ded,
    }


@dataclass
class ConnectionReport:
    """Maximum residuals of the connection identities, grouped by family.

    ``residuals[group][identity]`` is relative to ``max|D| + 1``.
    """
    residuals: dict
    scale: float

    def group_max(self, group):
        vals = self.residuals[group].values()
        return max(vals) if vals else 0.0

    @property
    def worst(self):
        return max(self.group_max(g) for g in self.residuals)

    def passes(self, tol):
        return self.worst < tol

    def flat(self):
        return {f"{g}.{k}": v for g, sub in self.residuals.items() for k, v in sub.items()}


def _res(a, b, scale):
    return float(np.max(np.abs(a - b))) / scale if np.size(a) else 0.0


def verify_connection_identities(chris, frame, derivs):
    """Check the full identity algebra of the connection.

    Every placement entering an identity is the independent ambient one from
    :func:`ambient_variants`; a separate group compares those with the
    placements derived from the stored symbol.

    Returns
    -------
    ConnectionReport
        Groups ``shifting`` (4), ``conjugation`` (4), ``raising_lowering`` (8),
        ``derived_right`` (4), ``derived_left`` (4), ``derived_final`` (6),
        ``metric_constancy`` (2) and ``derived_vs_ambient`` (8).
    """
    v = ambient_variants(frame, derivs)
    s, sinv = frame.metric, frame.inv_metric
    ds, dsinv = derivs.d_metric, derivs.d_inv_metric
    scale = float(np.max(np.abs(chris.d_down_down))) + 1.0 if chris.d_down_down.size else 1.0
    T = lambda a: np.swapaxes(a, -1, -2)
    r = lambda a, b: _res(a, b, scale)

    u_di, u_id = v["up_down_i"], v["up_i_down"]
    d_iu, d_ui = v["down_i_up"], v["down_up_i"]
    dd_i, d_id = v["down_down_i"], v["down_i_down"]
    u_iu, uu_i = v["up_i_up"], v["up_up_i"]

    out = {}
    out["shifting"] = {
        "up_down_i=-up_i_down": r(u_di, -u_id),
        "down_up_i=-down_i_up": r(d_ui, -d_iu),
        "down_down_i=-down_i_down+dS": r(dd_i, -d_id + ds),
        "up_up_i=-up_i_up+dSinv": r(uu_i, -u_iu + dsinv),
    }
    out["conjugation"] = {
        "up_down_i=conj(down_i_up)^T": r(u_di, T(d_iu).conj()),
        "up_i_down=conj(down_up_i)^T": r(u_id, T(d_ui).conj()),
        "down_down_i=conj(down_i_down)^T": r(dd_i, T(d_id).conj()),
        "up_i_up=conj(up_up_i)^T": r(u_iu, T(uu_i).conj()),
    }
    out["raising_lowering"] = {
        "up_down_i=Sinv.down_down_i": r(u_di, sinv @ dd_i),
        "up_i_down=up_i_up.S": r(u_id, u_iu @ s),
        "down_up_i=S.up_up_i": r(d_ui, s @ uu_i),
        "down_i_up=down_i_down.Sinv": r(d_iu, d_id @ sinv),
        "down_down_i=S.up_down_i": r(dd_i, s @ u_di),
        "down_i_down=down_i_up.S": r(d_id, d_iu @ s),
        "up_up_i=Sinv.down_up_i": r(uu_i, sinv @ d_ui),
        "up_i_up=up_i_down.Sinv": r(u_iu, u_id @ sinv),
    }
    out["derived_right"] = {
        "up_up_i.S=up_down_i-Sinv.dS": r(uu_i @ s, u_di - sinv @ ds),
        "down_down_i.Sinv=down_up_i-S.dSinv": r(dd_i @ sinv, d_ui - s @ dsinv),
        "down_up_i.S=down_down_i-dS": r(d_ui @ s, dd_i - ds),
        "up_down_i.Sinv=up_up_i-dSinv": r(u_di @ sinv, uu_i - dsinv),
    }
    out["derived_left"] = {
        "Sinv.down_i_down=up_i_down-dSinv.S": r(sinv @ d_id, u_id - dsinv @ s),
        "S.up_i_up=down_i_up-dS.Sinv": r(s @ u_iu, d_iu - ds @ sinv),
        "S.up_i_down=down_i_down-dS": r(s @ u_id, d_id - ds),
        "Sinv.down_i_up=up_i_up-dSinv": r(sinv @ d_iu, u_iu - dsinv),
    }
    out["derived_final"] = {
        "up_up_i.S=-Sinv.down_i_down": r(uu_i @ s, -(sinv @ d_id)),
        "down_down_i.Sinv=-S.up_i_up": r(dd_i @ sinv, -(s @ u_iu)),
        "down_up_i.S=-down_i_down": r(d_ui @ s, -d_id),
        "up_down_i.Sinv=-up_i_up": r(u_di @ sinv, -u_iu),
        "S.up_i_down=-down_down_i": r(s @ u_id, -dd_i),
        "Sinv.down_i_up=-up_up_i": r(sinv @ d_iu, -uu_i),
    }
    # covariant derivative of the metric in both placements
    out["metric_constancy"] = {
        "cov_d_S_lower": r(ds + d_ui @ s + s @ u_id, 0.0),
        "cov_d_S_upper": r(dsinv + u_di @ sinv + sinv @ d_iu, 0.0),
    }
    out["derived_vs_ambient"] = {k: r(chris.variant(k), v[k]) for k in VARIANTS}
    return ConnectionReport(out, scale)


# --------------------------------------------------------------------------
# covariant derivatives


def _check_p(arr, chris, what):
    if arr.shape[0] != chris.nparams:
        raise DimensionMismatch(f"{what} has {arr.shape[0]} parameter slots, connection has {chris.nparams}")


def covariant_derivative_ket(dpsi, psi, chris):
    """``d_i psi^mu + D^mu_{nu i} psi^nu``.

    ``dpsi`` has shape (P, N) (or (P, N, K) for a block of kets).
    """
    dpsi = np.asarray(dpsi, dtype=complex)
    psi = np.asarray(psi, dtype=complex)
    _check_p(dpsi, chris, "ket derivative")
    if psi.shape[0] != chris.frame.dim or dpsi.shape[1:] != psi.shape:
        raise DimensionMismatch("ket and its derivative do not match the frame dimension")
    return dpsi + chris.natural @ psi


def covariant_derivative_bra(dpsi_bar, psi_bar, chris):
    """``d_i psi_mu - psi_nu D^nu_{mu i}``; shapes (P, N) and (N,)."""
    dpsi_bar = np.asarray(dpsi_bar, dtype=complex)
    psi_bar = np.asarray(psi_bar, dtype=complex)
    _check_p(dpsi_bar, chris, "bra derivative")
    if psi_bar.shape != (chris.frame.dim,) or dpsi_bar.shape[1:] != psi_bar.shape:
        raise DimensionMismatch("bra and its derivative do not match the frame dimension")
    return dpsi_bar - psi_bar @ chris.natural


def covariant_derivative_operator(dH, H, chris, rep=None):
    """Covariant derivative of a second-rank operator tensor.

    Parameters
    ----------
    dH : array_like, shape (P, N, N)
        Raw parameter derivatives of the components.
    H : Operator or array_like
        Components at the point; an :class:`Operator` carries its own tag.
    rep : {"natural", "matrix", "upper_upper"}, optional
        Must agree with ``H.rep`` when both are given.

    Notes
    -----
    natural: ``dH + [D, H]``; matrix: ``dH + D_mu^sigma_i H_{sigma nu} +
    H_{mu sigma} D^sigma_{i nu}``; upper_upper: ``dA + D^mu_{lam i} A^{lam nu}
    + A^{mu lam} D_{lam i}^nu``.
    """
    tag = getattr(H, "rep", None)
    entries = getattr(H, "entries", H)
    if tag is not None and rep is not None and tag != rep:
        raise RepMismatch(f"operator is {tag}, requested {rep}")
    rep = rep or tag or "natural"
    if rep not in REPS:
        raise ValueError(f"unknown representation {rep!r}")
    h = np.asarray(entries, dtype=complex)
    dH = np.asarray(dH, dtype=complex)
    _check_p(dH, chris, "operator derivative")
    n = chris.frame.dim
    if h.shape != (n, n) or dH.shape[1:] != (n, n):
        raise DimensionMismatch(f"operator shape {h.shape} vs frame dimension {n}")
    if rep == "natural":
        d = chris.natural
        return dH + d @ h - h @ d
    if rep == "matrix":
        return dH + chris.variant("down_up_i") @ h + h @ chris.variant("up_i_down")
    return dH + chris.natural @ h + h @ chris.variant("down_i_up")


# --------------------------------------------------------------------------
# transport and splits


def parallel_transport_step(psi, chris, dR):
    """One Euler step of ``d psi = -D^mu_{nu i} psi^nu dR^i`` (zero covariant derivative)."""
    psi = np.asarray(psi, dtype=complex)
    dR = np.atleast_1d(np.asarray(dR, dtype=float))
    if dR.shape[0] != chris.nparams:
        raise DimensionMismatch(f"displacement has {dR.shape[0]} entries, connection has {chris.nparams}")
    if psi.shape[0] != chris.frame.dim:
        raise DimensionMismatch("state length does not match frame dimension")
    gen = np.einsum("i,imn->mn", dR, chris.natural)
    return psi - gen @ psi


def transport_around_loop(family, R0, radius, psi, n_steps=200, axes=(0, 1), scheme="analytic"):
    """Parallel-transport ``psi`` once around a small circle (counter-clockwise in ``axes``).

    Integrates ``dpsi/dtau = -v^i D_i psi`` with classical RK4.  For a small
    loop the change approaches ``-(pi radius^2) R_{ab} psi``.
    """
    R0 = as_param(R0, family.nparams)
    a, b = axes
    psi = np.asarray(psi, dtype=complex).copy()

    def rhs(tau, y):
        r = R0.copy()
        r[a] += radius * np.cos(tau)
        r[b] += radius * np.sin(tau)
        v = np.zeros_like(R0)
        v[a], v[b] = -radius * np.sin(tau), radius * np.cos(tau)
        _, _, ch = christoffel_at(family, r, scheme)
        return -np.einsum("i,imn->mn", v, ch.natural) @ y

    h = 2.0 * np.pi / n_steps
    tau = 0.0
    for _ in range(n_steps):
        k1 = rhs(tau, psi)
        k2 = rhs(tau + 0.5 * h, psi + 0.5 * h * k1)
        k3 = rhs(tau + 0.5 * h, psi + 0.5 * h * k2)
        k4 = rhs(tau + h, psi + h * k3)
        psi = psi + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        tau += h
    return psi


def rotation_deformation_split(chris):
    """Anti-Hermitian (rotation) and Hermitian (deformation) parts of ``D_{mu nu i}``."""
    d = chris.d_down_down
    dd = dagger(d)
    return 0.5 * (d - dd), 0.5 * (d + dd)


def transform_christoffel(natural, T, dT):
    """Natural-placement connection after the basis change ``|e'_n> = |e_m> T^m_n``.

    ``D' = T^{-1} D T + T^{-1} dT``; the second term is the inhomogeneous part.
    """
    tinv = np.linalg.inv(T)
    return tinv @ natural @ T + tinv @ dT


def propagation_forms(family, R, dR, psi, cov_dpsi, scheme="analytic"):
    """Components at ``R + dR`` from three equivalent first-order rules.

    Parameters
    ----------
    psi : (N,) components at ``R``.
    cov_dpsi : (P, N) covariant derivatives at ``R``.

    Returns
    -------
    dict
        ``components``: keep the components and add raw derivatives;
        ``projection``: propagate the ambient ket inside the old space and
        project on the new one; ``gauge_overlap``: apply ``A(R+dR : R)``.
        The last two coincide exactly, the first agrees to second order.
    """
    R = as_param(R, family.nparams)
    dR = as_param(dR, family.nparams)
    frame, _, chris = christoffel_at(family, R, scheme)
    new = evaluate_frame(family, R + dR)
    psi = np.asarray(psi, dtype=complex)
    cov = np.asarray(cov_dpsi, dtype=complex)
    raw = cov - chris.natural @ psi
    inner = psi + np.einsum("i,in->n", dR, cov)
    amb = frame.vectors @ inner
    return {
        "components": psi + np.einsum("i,in->n", dR, raw),
        "projection": new.solve_metric(new.vectors.conj().T @ amb),
        "gauge_overlap": frame_gauge_overlap(new, frame, "natural") @ inner,
    }
