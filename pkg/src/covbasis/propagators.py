"""
Time propagation in a moving non-orthogonal basis.

The basis family must be parameterized by time alone (wrap multi-parameter
families in :class:`~covbasis.basis.TrajectoryFamily`; its derivative vectors
already carry the velocities, so ``D_{mu nu t} = v^i D_{mu nu i}``).

Every kind reduces to a linear map ``K`` on the components, except for the
optional re-orthonormalization of the unitary variants and any state feedback
in the self-consistent kind.

================  ==========================================================
``cn_fixed``      Crank-Nicolson in the frozen initial frame
``cn_moving_naive``  ``H`` replaced by ``H - i D_t`` (first order in ``dt``)
``cn_moving_gauge``  CN at ``t``, then ``S^{-1}(t+dt) A_low(t+dt : t)``
``cn_moving_sc``  ``[S' + i dt/2 H']^{-1} A_low (1 - i dt/2 S^{-1} H)``,
                  iterated to self-consistency
``lowdin``        ``S^{-1/2}(t+dt) S^{1/2}(t)`` after CN at ``t``
``cn_unitary_gauge`` / ``cn_unitary_sc``  the two above followed by
                  ``psi <- psi (psi^+ S psi)^{-1/2}``
================  ==========================================================
"""
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from .basis import evaluate_frame, frame_derivatives, frame_gauge_overlap, as_param, DEFAULT_FD_STEP
from .connection import christoffel
from .curvature import berry_connection_trace
from .errors import DimensionMismatch, ScNotConverged
from .fitting import fit_order
from .tensor_core import herm_sqrt_pair

__all__ = [
    "KINDS", "PropagatorKind", "Dynamics", "StateBundle", "DensityTensor",
    "ObservableLog", "propagator_matrix", "step", "initial_bundle",
    "state_overlap", "orthonormality_deviation", "liouville_step",
    "run_trajectory", "g_tensor", "compare_D_vs_G", "dt_sweep",
]

KINDS = ("cn_fixed", "cn_moving_naive", "cn_moving_gauge", "cn_moving_sc",
         "lowdin", "cn_unitary_gauge", "cn_unitary_sc")


@dataclass(frozen=True)
class PropagatorKind:
    """Integrator choice and its numerical knobs.

    Parameters
    ----------
    tag : one of :data:`KINDS`
    dt : positive time step
    sc_tol, sc_max_iter : self-consistency stopping rule (max component change)
    ortho_every : re-orthonormalize every this many steps (0 disables the cadence)
    ortho_tol : re-orthonormalize whenever ``max|S_states - I|`` exceeds this
    """
    tag: str
    dt: float
    sc_tol: float = 1e-12
    sc_max_iter: int = 50
    ortho_every: int = 1
    ortho_tol: float = 1e-8

    def __post_init__(self):
        if self.tag not in KINDS:
            raise ValueError(f"unknown propagator {self.tag!r}; expected one of {KINDS}")
        if not self.dt > 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.sc_tol > 0.0:
            raise ValueError(f"sc_tol must be positive, got {self.sc_tol}")
        if self.sc_max_iter < 1:
            raise ValueError("sc_max_iter must be at least 1")

    @property
    def base_tag(self):
        return {"cn_unitary_gauge": "cn_moving_gauge", "cn_unitary_sc": "cn_moving_sc"}.get(self.tag, self.tag)

    @property
    def reorthonormalizes(self):
        return self.tag.startswith("cn_unitary")


@dataclass(frozen=True)
class Dynamics:
    """A time-parameterized basis family together with a Hamiltonian model."""
    family: object
    hamiltonian: object

    def __post_init__(self):
        if self.family.nparams != 1:
            raise DimensionMismatch(
                f"propagation needs a time-parameterized family, {self.family.kind} has "
                f"{self.family.nparams} parameters (wrap it in TrajectoryFamily)")

    def frame(self, t):
        return evaluate_frame(self.family, [t])

    def h_matrix(self, frame, t, kets=None):
        if kets is not None and hasattr(self.hamiltonian, "matrix_for_state"):
            return self.hamiltonian.matrix_for_state(frame, [t], kets)
        return self.hamiltonian.matrix(frame, [t])


@dataclass(frozen=True, eq=False)
class StateBundle:
    """Components ``psi^mu_n`` (shape ``(N, K)``) of ``K`` states at ``time``."""
    kets: np.ndarray
    time: float
    frame: object
    step_index: int = 0

    def __post_init__(self):
        k = np.asarray(self.kets, dtype=complex)
        if k.ndim == 1:
            k = k[:, None]
        if k.shape[0] != self.frame.dim:
            raise DimensionMismatch(f"kets have {k.shape[0]} components, frame dimension is {self.frame.dim}")
        object.__setattr__(self, "kets", k)

    @property
    def overlap(self):
        return state_overlap(self.kets, self.frame)


def initial_bundle(dynamics, t0, kets, orthonormalize=False):
    """Bundle at ``t0``; optionally Lowdin-orthonormalize the supplied states."""
    frame = dynamics.frame(t0)
    b = StateBundle(kets, float(t0), frame)
    if orthonormalize:
        b = replace(b, kets=_reorthonormalize(b.kets, frame))
    return b


def state_overlap(kets, frame):
    """``S_nm = psi_{mu n} psi^mu_m`` (Hermitian ``K x K``)."""
    k = np.asarray(kets, dtype=complex)
    if k.ndim == 1:
        k = k[:, None]
    return k.conj().T @ frame.metric @ k


def orthonormality_deviation(kets, frame):
    s = state_overlap(kets, frame)
    return float(np.max(np.abs(s - np.eye(s.shape[0]))))


def _reorthonormalize(kets, frame):
    _, inv_half = herm_sqrt_pair(state_overlap(kets, frame))
    return kets @ inv_half


def _cn(s, h, dt):
    """``[S + i dt/2 H]^{-1} [S - i dt/2 H]`` through an LU factorization."""
    lu = sla.lu_factor(s + 0.5j * dt * h)
    return sla.lu_solve(lu, s - 0.5j * dt * h)


def propagator_matrix(tag, dynamics, t, dt, frame, new_frame=None, kets=None, h_new=None):
    """Linear map ``K`` with ``psi(t + dt) = K psi(t)`` for ``tag``.

    ``dt`` may be negative (backward step).  ``kets`` feed state-dependent
    models; ``h_new`` overrides the end-of-step matrix elements (used by the
    self-consistency loop).
    """
    if tag in ("cn_unitary_gauge", "cn_unitary_sc"):
        tag = {"cn_unitary_gauge": "cn_moving_gauge", "cn_unitary_sc": "cn_moving_sc"}[tag]
    s = frame.metric
    if tag == "cn_fixed":
        return _cn(s, dynamics.h_matrix(frame, t, kets), dt)
    h = dynamics.h_matrix(frame, t, kets)
    if tag == "cn_moving_naive":
        der = frame_derivatives(dynamics.family, [t], _scheme(dynamics.family), frame=frame)
        d_t = christoffel(frame, der).d_down_down[0]
        return _cn(s, h - 1j * d_t, dt)
    if new_frame is None:
        new_frame = dynamics.frame(t + dt)
    a_low = frame_gauge_overlap(new_frame, frame, "lower")
    if tag == "cn_moving_gauge":
        return new_frame.solve_metric(a_low @ _cn(s, h, dt))
    if tag == "lowdin":
        half = herm_sqrt_pair(s)[0]
        inv_half_new = herm_sqrt_pair(new_frame.metric)[1]
        return inv_half_new @ half @ _cn(s, h, dt)
    if tag == "cn_moving_sc":
        if h_new is None:
            h_new = dynamics.h_matrix(new_frame, t + dt, None)
        right = np.eye(frame.dim) - 0.5j * dt * frame.solve_metric(h)
        lu = sla.lu_factor(new_frame.metric + 0.5j * dt * h_new)
        return sla.lu_solve(lu, a_low @ right)
    raise ValueError(f"unknown propagator {tag!r}")


def _scheme(family):
    return "analytic" if family.has_analytic else "central_fd"


def step(kind, bundle, dynamics, backward=False):
    """Advance ``bundle`` by one step of ``kind`` (backward in time if asked).

    Raises
    ------
    SingularFrame, ScNotConverged, NotPositiveDefinite
    """
    dt = -kind.dt if backward else kind.dt
    t = bundle.time
    tag = kind.base_tag
    if tag == "cn_fixed":
        k = propagator_matrix(tag, dynamics, t, dt, bundle.frame, kets=bundle.kets)
        kets = k @ bundle.kets
        new_frame = bundle.frame
    else:
        new_frame = dynamics.frame(t + dt)
        if tag == "cn_moving_sc":
            kets = _self_consistent(kind, bundle, dynamics, dt, new_frame)
        else:
            kets = propagator_matrix(tag, dynamics, t, dt, bundle.frame, new_frame, bundle.kets) @ bundle.kets
    idx = bundle.step_index + 1
    if kind.reorthonormalizes:
        due = kind.ortho_every > 0 and idx % kind.ortho_every == 0
        if due or orthonormality_deviation(kets, new_frame) > kind.ortho_tol:
            kets = _reorthonormalize(kets, new_frame)
    return StateBundle(kets, t + dt, new_frame, idx)


def _self_consistent(kind, bundle, dynamics, dt, new_frame):
    t = bundle.time
    # predictor: gauge-transported CN
    guess = propagator_matrix("cn_moving_gauge", dynamics, t, dt, bundle.frame, new_frame,
                              bundle.kets) @ bundle.kets
    change = np.inf
    for it in range(1, kind.sc_max_iter + 1):
        h_new = dynamics.h_matrix(new_frame, t + dt, guess)
        k = propagator_matrix("cn_moving_sc", dynamics, t, dt, bundle.frame, new_frame,
                              bundle.kets, h_new=h_new)
        new = k @ bundle.kets
        change = float(np.max(np.abs(new - guess)))
        guess = new
        if change < kind.sc_tol:
            return guess
    raise ScNotConverged(kind.sc_max_iter, change)


# --------------------------------------------------------------------------
# density tensors


@dataclass(frozen=True, eq=False)
class DensityTensor:
    """Density tensor ``rho^mu_nu`` (natural) or ``rho^{mu nu}`` (upper_upper)."""
    rho: np.ndarray
    rep: str
    time: float
    frame: object

    def __post_init__(self):
        if self.rep not in ("natural", "upper_upper"):
            raise ValueError(f"density representation must be natural or upper_upper, got {self.rep!r}")
        r = np.asarray(self.rho, dtype=complex)
        if r.shape != (self.frame.dim, self.frame.dim):
            raise DimensionMismatch(f"density of shape {r.shape} vs frame dimension {self.frame.dim}")
        object.__setattr__(self, "rho", r)

    @classmethod
    def from_kets(cls, kets, frame, time, rep="upper_upper", weights=None):
        k = np.asarray(kets, dtype=complex)
        if k.ndim == 1:
            k = k[:, None]
        w = np.ones(k.shape[1]) if weights is None else np.asarray(weights, dtype=float)
        uu = (k * w) @ k.conj().T
        return cls(uu if rep == "upper_upper" else uu @ frame.metric, rep, time, frame)

    def upper_upper(self):
        # rho^{mu nu} = rho^mu_sig S^{sig nu}, with S^{-1} Hermitian
        return self.rho if self.rep == "upper_upper" else self.frame.solve_metric(self.rho.conj().T).conj().T

    def trace(self):
        """``S_{mu nu} rho^{nu mu}`` (equals ``rho^mu_mu``)."""
        return complex(np.trace(self.frame.metric @ self.upper_upper()))

    def idempotency_residual(self):
        nat = self.upper_upper() @ self.frame.metric
        return float(np.max(np.abs(nat @ nat - nat)))


def liouville_step(rho, kind, dynamics, backward=False):
    """One step of the Liouville-von Neumann equation with the same map as :func:`step`.

    ``rho^{mu nu}`` goes to ``K rho^{mu nu} K^+``, the congruence that the
    ket rule implies for ``|psi><psi|``; the natural form is converted
    through the metric.  Re-orthonormalizing kinds have no density analogue
    and are rejected.
    """
    if kind.reorthonormalizes:
        raise ValueError(f"{kind.tag} re-orthonormalizes states and has no density form")
    if kind.tag == "cn_moving_sc" and hasattr(dynamics.hamiltonian, "matrix_for_state"):
        raise ValueError("self-consistent density steps need a state-independent Hamiltonian")
    dt = -kind.dt if backward else kind.dt
    t = rho.time
    if kind.tag == "cn_fixed":
        new_frame = rho.frame
        k = propagator_matrix("cn_fixed", dynamics, t, dt, rho.frame)
    else:
        new_frame = dynamics.frame(t + dt)
        k = propagator_matrix(kind.tag, dynamics, t, dt, rho.frame, new_frame)
    uu = k @ rho.upper_upper() @ k.conj().T
    out = uu if rho.rep == "upper_upper" else uu @ new_frame.metric
    return DensityTensor(out, rho.rep, t + dt, new_frame)


# --------------------------------------------------------------------------
# trajectories


@dataclass
class ObservableLog:
    """Per-step observables of a trajectory (rows for steps ``1..n``).

    Attributes
    ----------
    step, time : (n,) arrays
    norms, energies : (n, K) arrays; norms are ``sqrt(S_nn)``
    ortho_dev : (n,) ``max|S_states - I|``
    berry : (n, P) complex Berry connection trace of the frame at each step
    overlaps : (n, K, K) state-overlap matrices
    extra : dict of observer columns
    meta : dict of run metadata
    """
    step: np.ndarray
    time: np.ndarray
    norms: np.ndarray
    energies: np.ndarray
    ortho_dev: np.ndarray
    berry: np.ndarray
    overlaps: np.ndarray
    extra: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.step.size

    @property
    def n_states(self):
        return self.norms.shape[1]


def run_trajectory(kind, bundle0, dynamics, n_steps, observers=None):
    """Propagate ``n_steps`` and record observables after every step.

    Parameters
    ----------
    observers : dict name -> callable(bundle) -> float, optional
        Extra per-step columns.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    observers = observers or {}
    nk = bundle0.kets.shape[1]
    steps = np.arange(1, n_steps + 1)
    times = np.empty(n_steps)
    norms = np.empty((n_steps, nk))
    energies = np.empty((n_steps, nk))
    dev = np.empty(n_steps)
    berry = np.zeros((n_steps, 1), dtype=complex)
    overlaps = np.empty((n_steps, nk, nk), dtype=complex)
    extra = {name: np.empty(n_steps) for name in observers}
    moving = kind.base_tag != "cn_fixed"
    b = bundle0
    for n in range(n_steps):
        b = step(kind, b, dynamics)
        s = state_overlap(b.kets, b.frame)
        times[n] = b.time
        overlaps[n] = s
        norms[n] = np.sqrt(np.abs(np.diag(s)))
        dev[n] = float(np.max(np.abs(s - np.eye(nk))))
        hm = dynamics.h_matrix(b.frame, b.time)
        energies[n] = np.einsum("mk,mn,nk->k", b.kets.conj(), hm, b.kets).real
        if moving:
            der = frame_derivatives(dynamics.family, [b.time], _scheme(dynamics.family), frame=b.frame)
            berry[n] = berry_connection_trace(christoffel(b.frame, der))
        for name, fn in observers.items():
            extra[name][n] = fn(b)
    meta = {"kind": kind.tag, "dt": kind.dt, "n_steps": int(n_steps), "t0": float(bundle0.time),
            "n_states": int(nk), "family": getattr(dynamics.family, "kind", "?")}
    return ObservableLog(steps, times, norms, energies, dev, berry, overlaps, extra, meta)


# --------------------------------------------------------------------------
# Lowdin adequacy analysis


def g_tensor(family, t, dt_fd=DEFAULT_FD_STEP):
    """``G^mu_{nu t} = -(d_t S^{-1/2}) S^{1/2}`` by central differences of ``S^{-1/2}``.

    This is the connection implied by the Lowdin propagator; it coincides with
    ``D`` only when the basis change is a pure deformation.
    """
    half = herm_sqrt_pair(evaluate_frame(family, [t]).metric)[0]
    plus = herm_sqrt_pair(evaluate_frame(family, [t + dt_fd]).metric)[1]
    minus = herm_sqrt_pair(evaluate_frame(family, [t - dt_fd]).metric)[1]
    return -((plus - minus) / (2.0 * dt_fd)) @ half


def compare_D_vs_G(family, t, dt_fd=DEFAULT_FD_STEP, scheme=None):
    """Quantify how far the Lowdin-implied connection is from the true one.

    Returns
    -------
    dict
        ``max_abs_diff`` (natural placement), ``frobenius``, the
        ``rotation_part_norm`` and ``deformation_part_norm`` of the lowered
        difference ``S (D - G)``, and the tensors ``D``, ``G``, ``diff_lower``.
    """
    as_param([t], 1)
    frame = evaluate_frame(family, [t])
    der = frame_derivatives(family, [t], scheme or _scheme(family), dt_fd, frame=frame)
    chris = christoffel(frame, der)
    d_nat = chris.natural[0]
    g = g_tensor(family, t, dt_fd)
    diff = d_nat - g
    low = frame.metric @ diff
    rot = 0.5 * (low - low.conj().T)
    dfm = 0.5 * (low + low.conj().T)
    return {
        "max_abs_diff": float(np.max(np.abs(diff))),
        "frobenius": float(np.linalg.norm(diff)),
        "rotation_part_norm": float(np.linalg.norm(rot)),
        "deformation_part_norm": float(np.linalg.norm(dfm)),
        "D": d_nat, "G": g, "diff_lower": low,
    }


def dt_sweep(tag, dynamics, kets0, t0, dt0, halvings, metric="ortho", reference=None, **kind_kw):
    """One-step error over ``dt0 * 2**-k`` for ``k = 0..halvings``.

    Parameters
    ----------
    metric : {"ortho", "reference"}
        ``ortho`` measures ``max|S_states - I|`` after one step from
        orthonormalized states; ``reference`` compares with
        ``reference(dt) -> kets`` (max abs difference).

    Returns
    -------
    dict
        ``dt``, ``error`` arrays and ``fitted_order``, ``r_squared`` of the
        log-log fit.
    """
    dts = dt0 * 0.5 ** np.arange(halvings + 1)
    errs = np.empty_like(dts)
    b0 = initial_bundle(dynamics, t0, kets0, orthonormalize=(metric == "ortho"))
    for n, dt in enumerate(dts):
        b1 = step(PropagatorKind(tag, float(dt), **kind_kw), b0, dynamics)
        if metric == "ortho":
            errs[n] = orthonormality_deviation(b1.kets, b1.frame)
        else:
            errs[n] = float(np.max(np.abs(b1.kets - reference(dt))))
    order, r2 = fit_order(dts, errs)
    return {"dt": dts, "error": errs, "fitted_order": order, "r_squared": r2}
