"""
Scenario task runners used by the command-line front end.

Every runner takes a :class:`~covbasis.config.Scenario` and returns a
:class:`TaskResult`; none of them touch the file system.
"""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy.integrate import solve_ivp

from .basis import (TrajectoryFamily, GaugedFamily, TwoLevelSphere, evaluate_frame,
                    family_from_config)
from .connection import christoffel_at, verify_connection_identities
from .curvature import (chern_number, commutator_check, ricci_berry, riemann,
                        trace_cancellation_residual)
from .errors import ConfigParseError, InsufficientParameters
from .forces import (HF_FORMS, eigenvalue_fd, hf_derivative, pulay_decomposition,
                     solve_generalized_eigen)
from .hamiltonians import (DenseHamiltonian, DrivenHamiltonian, GridHamiltonian, ZeroHamiltonian,
                           pauli)
from .propagators import (Dynamics, PropagatorKind, compare_D_vs_G, dt_sweep, initial_bundle,
                          run_trajectory)

__all__ = ["TaskResult", "run_task", "build_family", "build_hamiltonian", "sample_points",
           "DEFAULT_BOXES"]

# parameter boxes for random verification draws, one [lo, hi] row per parameter
DEFAULT_BOXES = {
    "rotating2d": [[0.0, 1.0]],
    "breathing2d": [[0.0, 1.0]],
    "overlap_pair_symmetric": [[0.0, 1.0]],
    "overlap_pair_pinned": [[0.0, 1.0]],
    "gaussian_chain": [[-0.3, 0.3]],
    "two_level_sphere": [[0.3, math.pi - 0.3], [0.0, 2.0 * math.pi]],
    "static": [[0.0, 1.0]],
}


@dataclass
class TaskResult:
    """Outcome of one scenario.

    ``summary`` is JSON-ready; ``table`` is ``(header, rows)`` for CSV output;
    ``log`` is set for trajectories.
    """
    passed: bool
    summary: dict
    table: tuple = None
    log: object = None
    failures: list = field(default_factory=list)


def _field(sc, key):
    return f"scenario[{sc.index}].params.{key}"


def build_family(sc):
    try:
        return family_from_config(sc.family)
    except KeyError as exc:
        raise ConfigParseError(str(exc), field=f"scenario[{sc.index}].family.kind") from exc
    except TypeError as exc:
        raise ConfigParseError(f"bad family keys: {exc}", field=f"scenario[{sc.index}].family") from exc


def _base_of(family):
    while isinstance(family, (TrajectoryFamily, GaugedFamily)):
        family = family.base
    return family


def _cplx(opts, key):
    re = np.asarray(opts.get(key, opts.get(f"{key}_re")), dtype=float)
    im = opts.get(f"{key}_im")
    return re + 1j * np.asarray(im, dtype=float) if im is not None else re.astype(complex)


def build_hamiltonian(sc, family):
    """Ambient Hamiltonian from ``scenario.hamiltonian`` (``kind`` defaults to zero,
    or to a grid model for grid families)."""
    opts = dict(sc.hamiltonian)
    grid = hasattr(_base_of(family), "x")
    kind = opts.pop("kind", "grid" if grid else "zero")
    where = f"scenario[{sc.index}].hamiltonian"
    if kind == "zero":
        return ZeroHamiltonian(family.ambient_dim, family.nparams)
    if kind == "pauli":
        mat = float(opts.get("scale", 1.0)) * pauli(opts.get("axis", "z"))
        if family.ambient_dim != 2:
            raise ConfigParseError("pauli Hamiltonian needs a 2-dimensional ambient space", field=where)
        return DenseHamiltonian(mat, nparams=family.nparams)
    if kind == "dense":
        if "h" not in opts and "h_re" not in opts:
            raise ConfigParseError("dense Hamiltonian needs 'h' (or h_re/h_im)", field=f"{where}.h")
        return DenseHamiltonian(_cplx(opts, "h"), nparams=family.nparams)
    if kind == "driven":
        if family.nparams != 1:
            raise ConfigParseError("driven Hamiltonian needs a time-parameterized family", field=where)
        return DrivenHamiltonian(_cplx(opts, "h0"), _cplx(opts, "h1"),
                                 float(opts.get("omega", 1.0)), float(opts.get("phase", 0.0)))
    if kind == "grid":
        if not grid:
            raise ConfigParseError("grid Hamiltonian needs a grid family", field=f"{where}.kind")
        return GridHamiltonian(family, opts.get("depth", 1.0), float(opts.get("sigma", 0.8)))
    raise ConfigParseError(f"unknown Hamiltonian kind {kind!r}", field=f"{where}.kind")


def _box(sc, family):
    box = sc.params.get("box")
    if box is None:
        if isinstance(family, TrajectoryFamily):
            box = [[0.0, 1.0]]
        else:
            kind = _base_of(family).kind
            kind = "overlap_pair_symmetric" if kind.startswith("overlap_pair") else kind
            row = DEFAULT_BOXES.get(kind, [[0.0, 1.0]])
            box = row if len(row) == family.nparams else [row[0]] * family.nparams
    box = np.asarray(box, dtype=float)
    if box.shape != (family.nparams, 2) or np.any(box[:, 1] < box[:, 0]):
        raise ConfigParseError(f"box must be {family.nparams} rows of [lo, hi]", field=_field(sc, "box"))
    return box


def sample_points(sc, family, n):
    """``n`` reproducible random parameter points (rows) drawn from the scenario box."""
    box = _box(sc, family)
    rng = np.random.default_rng(sc.seed)
    return box[:, 0] + (box[:, 1] - box[:, 0]) * rng.random((n, family.nparams))


def _points(sc, family, default):
    if "point" in sc.params:
        return np.atleast_2d(np.asarray(sc.params["point"], dtype=float))
    return sample_points(sc, family, int(sc.params.get("points", default)))


def _scheme(sc, family):
    scheme = sc.params.get("scheme", "analytic")
    if scheme not in ("analytic", "central_fd"):
        raise ConfigParseError(f"scheme must be analytic or central_fd, got {scheme!r}",
                               field=_field(sc, "scheme"))
    if scheme == "analytic" and not family.has_analytic:
        scheme = "central_fd"
    return scheme


# --------------------------------------------------------------------------
# tasks


def _verify_identities(sc):
    family = build_family(sc)
    scheme = _scheme(sc, family)
    h = float(sc.params.get("h", 1e-4))
    tol = float(sc.params.get("tolerance", 1e-10 if scheme == "analytic" else 1e-6))
    pts = _points(sc, family, 20)
    rows, groups, worst = [], {}, 0.0
    for n, r in enumerate(pts):
        frame, der, chris = christoffel_at(family, r, scheme, h)
        rep = verify_connection_identities(chris, frame, der)
        for g in rep.residuals:
            groups[g] = max(groups.get(g, 0.0), rep.group_max(g))
        worst = max(worst, rep.worst)
        rows.append([n, *r.tolist(), rep.worst, *[rep.group_max(g) for g in rep.residuals]])
    names = list(groups)
    header = ["point", *[f"R{i}" for i in range(family.nparams)], "worst", *names]
    passed = worst < tol
    summary = {"points": pts.tolist(), "scheme": scheme, "h": h, "tolerance": tol,
               "group_max": groups, "worst": worst,
               "per_point_worst": [row[family.nparams + 1] for row in rows]}
    fails = [] if passed else [f"worst identity residual {worst:.3e} >= {tol:.1e}"]
    return TaskResult(passed, summary, (header, rows), failures=fails)


def _dynamics(sc):
    family = build_family(sc)
    if family.nparams != 1:
        raise ConfigParseError("propagation needs a time-parameterized family (add a 'path')",
                               field=f"scenario[{sc.index}].family.path")
    return Dynamics(family, build_hamiltonian(sc, family))


def _initial_kets(sc, dyn, t0):
    n = dyn.family.dim
    k = int(sc.params.get("n_states", n))
    if k > n:
        raise ConfigParseError(f"n_states={k} exceeds the basis dimension {n}", field=_field(sc, "n_states"))
    how = sc.params.get("states", "basis")
    if how == "basis":
        return np.eye(n, k, dtype=complex)
    if how == "eigen":
        frame = dyn.frame(t0)
        sols = solve_generalized_eigen(dyn.h_matrix(frame, t0), frame)
        return np.stack([s.ket for s in sols[:k]], axis=1)
    raise ConfigParseError(f"states must be 'basis' or 'eigen', got {how!r}", field=_field(sc, "states"))


def _kind(sc, dt):
    tag = sc.params.get("kind", "cn_moving_gauge")
    kw = {key: sc.params[key] for key in ("sc_tol", "sc_max_iter", "ortho_every", "ortho_tol") if key in sc.params}
    try:
        return PropagatorKind(tag, float(dt), **kw)
    except ValueError as exc:
        raise ConfigParseError(str(exc), field=_field(sc, "kind")) from exc


def _propagate(sc):
    dyn = _dynamics(sc)
    t0 = float(sc.params.get("t0", 0.0))
    kind = _kind(sc, sc.params.get("dt", 0.01))
    n_steps = int(sc.params.get("n_steps", 100))
    bundle = initial_bundle(dyn, t0, _initial_kets(sc, dyn, t0), orthonormalize=True)
    log = run_trajectory(kind, bundle, dyn, n_steps)
    max_dev = float(np.max(log.ortho_dev))
    gate = sc.params.get("max_ortho_dev")
    passed = gate is None or max_dev < float(gate)
    summary = {"meta": log.meta, "max_ortho_dev": max_dev, "final_time": float(log.time[-1]),
               "final_energies": log.energies[-1].tolist(), "final_norms": log.norms[-1].tolist(),
               "fitted_order": None, "r_squared": None}
    fails = [] if passed else [f"max |S-I| {max_dev:.3e} >= {float(gate):.1e}"]
    return TaskResult(passed, summary, log=log, failures=fails)


def _frozen_reference(dyn, kets0, t0):
    """Exact fixed-frame evolution ``i S psi' = H(t) psi`` by a tight adaptive integrator."""
    frame = dyn.frame(t0)
    n, k = kets0.shape

    def rhs(t, y):
        hm = dyn.h_matrix(frame, t)
        return (-1j * frame.solve_metric(hm @ y.reshape(n, k))).ravel()

    def ref(dt):
        sol = solve_ivp(rhs, (t0, t0 + dt), kets0.ravel().astype(complex), method="DOP853",
                        rtol=1e-13, atol=1e-15)
        return sol.y[:, -1].reshape(n, k)
    return ref


def _dt_sweep(sc):
    dyn = _dynamics(sc)
    t0 = float(sc.params.get("t0", 0.0))
    dt0 = float(sc.params.get("dt0", 0.1))
    halvings = int(sc.params.get("halvings", 5))
    kind = _kind(sc, dt0)
    metric = sc.params.get("metric", "ortho")
    kets0 = _initial_kets(sc, dyn, t0)
    kw = {key: sc.params[key] for key in ("sc_tol", "sc_max_iter", "ortho_every", "ortho_tol") if key in sc.params}
    if metric == "ortho":
        res = dt_sweep(kind.tag, dyn, kets0, t0, dt0, halvings, **kw)
    elif metric == "frozen_reference":
        if kind.tag != "cn_fixed":
            raise ConfigParseError("frozen_reference only applies to cn_fixed", field=_field(sc, "metric"))
        b0 = initial_bundle(dyn, t0, kets0, orthonormalize=True)
        res = dt_sweep(kind.tag, dyn, b0.kets, t0, dt0, halvings, metric="reference",
                       reference=_frozen_reference(dyn, b0.kets, t0), **kw)
    else:
        raise ConfigParseError(f"metric must be 'ortho' or 'frozen_reference', got {metric!r}",
                               field=_field(sc, "metric"))
    order, r2 = res["fitted_order"], res["r_squared"]
    fails = []
    if "min_order" in sc.params and not order >= float(sc.params["min_order"]):
        fails.append(f"fitted order {order:.3f} < {sc.params['min_order']}")
    if "min_r2" in sc.params and not r2 > float(sc.params["min_r2"]):
        fails.append(f"R^2 {r2:.5f} <= {sc.params['min_r2']}")
    summary = {"kind": kind.tag, "metric": metric, "t0": t0, "dt": res["dt"].tolist(),
               "error": res["error"].tolist(), "fitted_order": order,
               "r_squared": None if math.isnan(r2) else r2, "halvings": halvings}
    rows = [[dt, e] for dt, e in zip(res["dt"], res["error"])]
    return TaskResult(not fails, summary, (["dt", "error"], rows), failures=fails)


def _curvature(sc):
    family = build_family(sc)
    if family.nparams < 2:
        raise InsufficientParameters(f"curvature needs at least 2 parameters, {family.kind} has {family.nparams}")
    scheme = _scheme(sc, family)
    tol = float(sc.params.get("tolerance", 1e-6))
    ctol = float(sc.params.get("commutator_tolerance", 1e-4))
    h = float(sc.params.get("h", 1e-3))
    pts = _points(sc, family, 5)
    rng = np.random.default_rng(sc.seed + 1)
    rows, fails = [], []
    for n, r in enumerate(pts):
        curv = riemann(family, r, scheme)
        chris = christoffel_at(family, r, "analytic" if family.has_analytic else "central_fd")[2]
        ric = curv.ricci()
        form_dev = max(float(np.max(np.abs(ricci_berry(family, r, scheme, f) - ric)))
                       for f in ("dual", "nonorthogonal"))
        psi = rng.standard_normal(family.dim) + 1j * rng.standard_normal(family.dim)
        comm = commutator_check(family, r, psi, h)
        anti = curv.antisymmetry_residual()
        trace = trace_cancellation_residual(chris)
        rows.append([n, *r.tolist(), anti, trace, form_dev, comm, ric[0, 1].real, ric[0, 1].imag])
        if max(anti, trace, form_dev) >= tol:
            fails.append(f"point {n}: algebraic residual {max(anti, trace, form_dev):.3e} >= {tol:.1e}")
        if comm >= ctol:
            fails.append(f"point {n}: commutator residual {comm:.3e} >= {ctol:.1e}")
    header = ["point", *[f"R{i}" for i in range(family.nparams)], "antisymmetry", "trace_cancellation",
              "ricci_form_deviation", "commutator_residual", "ricci01_re", "ricci01_im"]
    summary = {"points": pts.tolist(), "scheme": scheme, "tolerance": tol, "commutator_tolerance": ctol,
               "h": h, "rows": rows}
    return TaskResult(not fails, summary, (header, rows), failures=fails)


def _chern(sc):
    family = build_family(sc)
    if not isinstance(_base_of(family), TwoLevelSphere) or family.nparams != 2:
        raise ConfigParseError("chern needs a (theta, phi) family (two_level_sphere)",
                               field=f"scenario[{sc.index}].family.kind")
    nt = int(sc.params.get("n_theta", 64))
    nph = int(sc.params.get("n_phi", 128))
    tol = float(sc.params.get("tolerance", 1e-3))
    form = sc.params.get("form", "trace")
    c = chern_number(family, nt, nph, form, _scheme(sc, family))
    nearest = round(c.real)
    err = max(abs(c.real - nearest), abs(c.imag))
    expected = sc.params.get("expected")
    fails = []
    if err >= tol:
        fails.append(f"Chern number {c.real:.6f}{c.imag:+.2e}i is {err:.2e} from an integer")
    if expected is not None and nearest != int(expected):
        fails.append(f"Chern number rounds to {nearest}, expected {expected}")
    summary = {"chern_re": c.real, "chern_im": c.imag, "nearest_integer": int(nearest),
               "deviation": err, "n_theta": nt, "n_phi": nph, "form": form, "tolerance": tol}
    return TaskResult(not fails, summary, (["chern_re", "chern_im", "deviation"], [[c.real, c.imag, err]]),
                      failures=fails)


def _forces(sc):
    family = build_family(sc)
    ham = build_hamiltonian(sc, family)
    scheme = _scheme(sc, family)
    idx = int(sc.params.get("state", 0))
    h = float(sc.params.get("h", 1e-4))
    tol = float(sc.params.get("tolerance", 1e-8))
    fd_tol = float(sc.params.get("fd_tolerance", 1e-6))
    pts = _points(sc, family, 3)
    rows, fails = [], []
    for n, r in enumerate(pts):
        frame = evaluate_frame(family, r)
        sols = solve_generalized_eigen(ham.matrix(frame, r), frame)
        if idx >= len(sols):
            raise ConfigParseError(f"state {idx} out of range", field=_field(sc, "state"))
        sol = sols[idx]
        forms = {f: hf_derivative(sol, family, ham, r, f, scheme) for f in HF_FORMS}
        spread = max(float(np.max(np.abs(forms[f] - forms["natural"]))) for f in HF_FORMS)
        fd = eigenvalue_fd(family, ham, r, idx, h)
        fd_err = float(np.max(np.abs(forms["natural"] - fd)))
        pul = pulay_decomposition(sol, family, ham, r, scheme) if ham.has_ambient else None
        pul_err = float(np.max(np.abs(pul["total"] - forms["natural"]))) if pul else float("nan")
        rows.append([n, *r.tolist(), sol.energy, *forms["natural"].tolist(), spread, fd_err,
                     *(pul["hellmann"].tolist() if pul else [math.nan] * family.nparams),
                     *(pul["in_space"].tolist() if pul else [math.nan] * family.nparams),
                     *(pul["out_of_space"].tolist() if pul else [math.nan] * family.nparams),
                     pul_err])
        if spread >= tol:
            fails.append(f"point {n}: force forms differ by {spread:.3e}")
        if fd_err >= fd_tol:
            fails.append(f"point {n}: force vs finite difference {fd_err:.3e}")
        if pul and pul_err >= tol:
            fails.append(f"point {n}: Pulay pieces miss the total by {pul_err:.3e}")
    p = family.nparams
    header = ["point", *[f"R{i}" for i in range(p)], "energy", *[f"force{i}" for i in range(p)],
              "form_spread", "fd_error", *[f"hellmann{i}" for i in range(p)],
              *[f"in_space{i}" for i in range(p)], *[f"out_of_space{i}" for i in range(p)], "pulay_error"]
    summary = {"points": pts.tolist(), "state": idx, "scheme": scheme, "tolerance": tol,
               "fd_tolerance": fd_tol, "rows": rows}
    return TaskResult(not fails, summary, (header, rows), failures=fails)


def _compare_dg(sc):
    family = build_family(sc)
    if family.nparams != 1:
        raise ConfigParseError("compare_dg needs a one-parameter (time) family",
                               field=f"scenario[{sc.index}].family")
    t = float(sc.params.get("t", 0.5))
    dt_fd = float(sc.params.get("dt_fd", 1e-4))
    res = compare_D_vs_G(family, t, dt_fd)
    tol = sc.params.get("tolerance")
    fails = []
    if tol is not None and not res["max_abs_diff"] < float(tol):
        fails.append(f"max|D-G| {res['max_abs_diff']:.3e} >= {float(tol):.1e}")
    summary = {key: val for key, val in res.items() if not isinstance(val, np.ndarray)}
    summary.update({"t": t, "dt_fd": dt_fd, "tolerance": tol, "D": res["D"], "G": res["G"]})
    row = [t, res["max_abs_diff"], res["frobenius"], res["rotation_part_norm"], res["deformation_part_norm"]]
    header = ["t", "max_abs_diff", "frobenius", "rotation_part_norm", "deformation_part_norm"]
    return TaskResult(not fails, summary, (header, [row]), failures=fails)


_RUNNERS = {
    "verify_identities": _verify_identities,
    "propagate": _propagate,
    "dt_sweep": _dt_sweep,
    "curvature": _curvature,
    "chern": _chern,
    "forces": _forces,
    "compare_dg": _compare_dg,
}


def run_task(sc):
    """Dispatch a scenario to its runner."""
    return _RUNNERS[sc.task](sc)
