"""
Parameter-dependent basis families.

Every family maps a parameter point ``R`` (length ``P``) to ``N`` ambient
kets (an ``(M, N)`` array) and, where available, to their analytic parameter
derivatives ``(P, M, N)`` and second derivatives ``(P, P, M, N)``.

Model families
--------------
rotating2d
    Orthonormal pair rotated by an angle law ``theta(t)``.
breathing2d
    Orthogonal pair whose norms follow ``alpha_1(t)``, ``alpha_2(t)``.
overlap_pair_symmetric / overlap_pair_pinned
    Two normalized 1D Gaussians on a grid whose mutual overlap follows a law
    ``s(t)``; both centres move (symmetric) or orbital 2 stays put (pinned).
gaussian_chain
    Cartesian Gaussian orbitals riding on moving "atoms" on a 1D grid, with
    optional width breathing; any number of parameters.
two_level_sphere
    Lower eigenvector of ``-B sigma.n(theta, phi)`` with the first component
    kept real and positive (gauge singular at the south pole).

Helpers :class:`StaticFamily`, :class:`GaugedFamily` and
:class:`TrajectoryFamily` build fixed frames, smooth basis changes of an
existing family and time-parameterized paths through a family.
"""
from dataclasses import dataclass
import math

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.optimize import brentq

from .errors import DimensionMismatch, OutOfDomain, SingularFrame
from .tensor_core import build_frame, dagger

__all__ = [
    "DEFAULT_FD_STEP", "BasisFamily", "FrameDerivatives",
    "Rotating2D", "Breathing2D", "OverlapPair", "GaussianChain",
    "TwoLevelSphere", "StaticFamily", "SmoothGauge", "GaugedFamily",
    "TrajectoryFamily", "evaluate_frame", "frame_derivatives",
    "frame_second_derivatives", "frame_gauge_overlap", "project",
    "complement_project", "family_from_config", "FAMILY_KINDS",
]

DEFAULT_FD_STEP = 1e-4


def as_param(R, nparams):
    r = np.atleast_1d(np.asarray(R, dtype=float)).ravel()
    if r.shape[0] != nparams:
        raise DimensionMismatch(f"parameter point has {r.shape[0]} entries, family expects {nparams}")
    return r


class BasisFamily:
    """Base class: subclasses fill in ``vectors`` and usually ``d_vectors``."""

    kind = "abstract"
    nparams = 1
    ambient_dim = 0
    dim = 0

    def check_domain(self, R):
        """Raise :class:`OutOfDomain` if ``R`` is outside the family domain."""

    def vectors(self, R):
        raise NotImplementedError

    def d_vectors(self, R):
        raise NotImplementedError(f"{self.kind} has no analytic derivatives")

    def d2_vectors(self, R):
        raise NotImplementedError(f"{self.kind} has no analytic second derivatives")

    @property
    def has_analytic(self):
        return type(self).d_vectors is not BasisFamily.d_vectors

    @property
    def has_second(self):
        return type(self).d2_vectors is not BasisFamily.d2_vectors

    def __repr__(self):
        return f"<{type(self).__name__} kind={self.kind} N={self.dim} M={self.ambient_dim} P={self.nparams}>"


@dataclass(frozen=True, eq=False)
class FrameDerivatives:
    """First parameter derivatives of the basis kets at one point.

    Attributes
    ----------
    d_vectors : ndarray, shape (P, M, N)
        ``d_i |e_mu>`` in ambient coordinates.
    d_metric, d_inv_metric : ndarray, shape (P, N, N)
        ``d_i S_{mu nu}`` and ``d_i S^{mu nu}`` from the product rule.
    scheme : str
        ``"analytic"`` or ``"central_fd"``.
    h : float or None
        Finite-difference step for ``central_fd``.
    """
    d_vectors: np.ndarray
    d_metric: np.ndarray
    d_inv_metric: np.ndarray
    scheme: str = "analytic"
    h: float = None

    @property
    def nparams(self):
        return self.d_vectors.shape[0]


def _poly(coeffs):
    c = np.atleast_1d(np.asarray(coeffs, dtype=float))
    return c, npoly.polyder(c) if c.size > 1 else np.zeros(1), \
        npoly.polyder(c, 2) if c.size > 2 else np.zeros(1)


# --------------------------------------------------------------------------
# analytic two-dimensional models


class Rotating2D(BasisFamily):
    """``e_1 = cos(theta) u_1 + sin(theta) u_2``, ``e_2 = -sin(theta) u_1 + cos(theta) u_2``."""

    kind = "rotating2d"

    def __init__(self, theta=(0.0, 1.0), ambient_dim=2):
        if ambient_dim < 2:
            raise DimensionMismatch("rotating2d needs ambient_dim >= 2")
        self.theta, self.dtheta, self.d2theta = _poly(theta)
        self.ambient_dim = int(ambient_dim)
        self.dim = 2
        self.nparams = 1

    def angle(self, t):
        return npoly.polyval(t, self.theta), npoly.polyval(t, self.dtheta), npoly.polyval(t, self.d2theta)

    def _pair(self, th):
        out = np.zeros((self.ambient_dim, 2), dtype=complex)
        c, s = math.cos(th), math.sin(th)
        out[0, 0], out[1, 0] = c, s
        out[0, 1], out[1, 1] = -s, c
        return out

    def vectors(self, R):
        t = as_param(R, 1)[0]
        return self._pair(self.angle(t)[0])

    def d_vectors(self, R):
        t = as_param(R, 1)[0]
        th, w, _ = self.angle(t)
        return (w * self._pair(th + 0.5 * math.pi))[None]

    def d2_vectors(self, R):
        t = as_param(R, 1)[0]
        th, w, a = self.angle(t)
        return (a * self._pair(th + 0.5 * math.pi) - w * w * self._pair(th))[None, None]


class Breathing2D(BasisFamily):
    """``e_k = alpha_k(t) u_k`` with polynomial norm laws."""

    kind = "breathing2d"

    def __init__(self, alpha1=(1.0, 0.1), alpha2=(1.0, -0.05), ambient_dim=2):
        if ambient_dim < 2:
            raise DimensionMismatch("breathing2d needs ambient_dim >= 2")
        self.laws = [_poly(alpha1), _poly(alpha2)]
        self.ambient_dim = int(ambient_dim)
        self.dim = 2
        self.nparams = 1

    def alphas(self, t, order=0):
        return np.array([npoly.polyval(t, law[order]) for law in self.laws])

    def check_domain(self, R):
        t = as_param(R, 1)[0]
        if np.any(self.alphas(t) <= 0.0):
            raise OutOfDomain(f"breathing2d norm law non-positive at t={t}")

    def _diag(self, vals):
        out = np.zeros((self.ambient_dim, 2), dtype=complex)
        out[0, 0], out[1, 1] = vals
        return out

    def vectors(self, R):
        return self._diag(self.alphas(as_param(R, 1)[0]))

    def d_vectors(self, R):
        return self._diag(self.alphas(as_param(R, 1)[0], 1))[None]

    def d2_vectors(self, R):
        return self._diag(self.alphas(as_param(R, 1)[0], 2))[None, None]


# --------------------------------------------------------------------------
# Gaussians on a uniform grid


def _double_factorial_odd(l):
    return float(np.prod(np.arange(2 * l - 1, 0, -2))) if l > 0 else 1.0


def cartesian_gaussian(x, centre, width, l=0):
    """Continuum-normalized ``u^l exp(-u^2/(4 w^2))`` and its centre/width derivatives.

    Returns
    -------
    f, df_dc, df_dw : ndarray
    """
    u = x - centre
    norm = (_double_factorial_odd(l) * math.sqrt(2.0 * math.pi) * width ** (2 * l + 1)) ** -0.5
    env = np.exp(-u * u / (4.0 * width * width))
    poly = u ** l if l else np.ones_like(u)
    f = norm * poly * env
    dpoly = l * u ** (l - 1) if l else np.zeros_like(u)
    df_dc = -norm * env * (dpoly - poly * u / (2.0 * width * width))
    df_dw = f * (u * u / (2.0 * width ** 3) - (l + 0.5) / width)
    return f, df_dc, df_dw


class _GridFamily(BasisFamily):
    """Shared grid handling; ambient coordinates are ``sqrt(dx) f(x_k)``."""

    # boundary amplitude below ~1e-13 for s- to d-type functions
    EDGE_WIDTHS = 12.0
    MIN_POINTS_PER_WIDTH = 3.0

    def _setup_grid(self, n_grid, half_length):
        self.ambient_dim = int(n_grid)
        self.half_length = float(half_length)
        self.x = np.linspace(-self.half_length, self.half_length, self.ambient_dim)
        self.dx = self.x[1] - self.x[0]
        self._scale = math.sqrt(self.dx)

    def _check_centre(self, centre, width):
        if width < self.MIN_POINTS_PER_WIDTH * self.dx:
            raise OutOfDomain(f"width {width:.3g} under-resolved by grid spacing {self.dx:.3g}")
        if abs(centre) > self.half_length - self.EDGE_WIDTHS * width:
            raise OutOfDomain(f"orbital centre {centre:.4g} too close to the box edge")


class OverlapPair(_GridFamily):
    """Two normalized s-type Gaussians with prescribed mutual overlap ``s(t)``.

    The separation ``d(t)`` is solved on the grid so that the discrete overlap
    matches the law; its rate follows from ``d'(t) = s'(t) / (ds/dd)``.
    """

    def __init__(self, s=(0.5, 0.1), width=1.0, motion="symmetric", n_grid=2048, half_length=None):
        if motion not in ("symmetric", "pinned"):
            raise ValueError(f"motion must be 'symmetric' or 'pinned', got {motion!r}")
        self.kind = f"overlap_pair_{motion}"
        self.motion = motion
        self.s_law, self.ds_law, _ = _poly(s)
        self.width = float(width)
        self._setup_grid(n_grid, 40.0 * self.width if half_length is None else half_length)
        self.dim = 2
        self.nparams = 1
        self._cache = {}

    def overlap(self, t):
        return npoly.polyval(t, self.s_law), npoly.polyval(t, self.ds_law)

    def check_domain(self, R):
        t = as_param(R, 1)[0]
        s = self.overlap(t)[0]
        if s >= 1.0:
            raise SingularFrame(f"overlap law s={s} >= 1 gives parallel orbitals")
        if s <= 0.0:
            raise OutOfDomain(f"Gaussian overlap must be positive, law gives s={s}")
        self._geometry(t)

    def _centres(self, d):
        if self.motion == "symmetric":
            return np.array([-0.5 * d, 0.5 * d]), np.array([-0.5, 0.5])
        return np.array([-d, 0.0]), np.array([-1.0, 0.0])

    def _grid_overlap(self, d):
        (c1, c2), (k1, k2) = self._centres(d)
        f1, dc1, _ = cartesian_gaussian(self.x, c1, self.width)
        f2, dc2, _ = cartesian_gaussian(self.x, c2, self.width)
        s = self.dx * np.dot(f1, f2)
        ds = self.dx * (k1 * np.dot(dc1, f2) + k2 * np.dot(f1, dc2))
        return s, ds

    def _geometry(self, t):
        """Separation ``d`` and its rate at ``t`` (cached)."""
        hit = self._cache.get(t)
        if hit is not None:
            return hit
        s, ds_dt = self.overlap(t)
        if not 0.0 < s < 1.0:
            raise OutOfDomain(f"overlap law s={s} outside (0, 1)")
        w = self.width
        d_max = 2.0 * (self.half_length - self.EDGE_WIDTHS * w)
        # continuum overlap exp(-d^2/(8 w^2)) as starting point, polished on the grid
        d = math.sqrt(-8.0 * w * w * math.log(s))
        for _ in range(8):
            val, slope = self._grid_overlap(d)
            if abs(val - s) < 1e-14 or slope == 0.0:
                break
            d -= (val - s) / slope
        val, slope = self._grid_overlap(d)
        if not abs(val - s) < 1e-12:
            d = brentq(lambda z: self._grid_overlap(z)[0] - s, 0.0, d_max, xtol=1e-15)
            val, slope = self._grid_overlap(d)
        if abs(val - s) > 1e-8:
            raise OutOfDomain(f"cannot match overlap s={s} on the grid")
        centres, rates = self._centres(d)
        for c in centres:
            self._check_centre(c, w)
        dd_dt = ds_dt / slope
        if len(self._cache) > 4096:
            self._cache.clear()
        self._cache[t] = (d, dd_dt, centres, rates * dd_dt)
        return self._cache[t]

    def atom_positions(self, R):
        return self._geometry(as_param(R, 1)[0])[2].copy()

    def d_atom_positions(self, R):
        return self._geometry(as_param(R, 1)[0])[3][None, :].copy()

    def vectors(self, R):
        t = as_param(R, 1)[0]
        _, _, centres, _ = self._geometry(t)
        cols = [cartesian_gaussian(self.x, c, self.width)[0] for c in centres]
        return self._scale * np.column_stack(cols).astype(complex)

    def d_vectors(self, R):
        t = as_param(R, 1)[0]
        _, _, centres, velocities = self._geometry(t)
        cols = [v * cartesian_gaussian(self.x, c, self.width)[1] for c, v in zip(centres, velocities)]
        return (self._scale * np.column_stack(cols).astype(complex))[None]


class GaussianChain(_GridFamily):
    """Cartesian Gaussian orbitals attached to atoms that move with ``R``.

    Parameters
    ----------
    atoms : sequence of float
        Atom positions at ``R = 0``.
    displacements : array_like, shape (A, P)
        Atom ``a`` sits at ``atoms[a] + displacements[a] @ R``.
    orbitals : sequence of dict
        Each with keys ``atom`` (index), ``l`` (power of ``x - X``, default 0),
        ``width`` (default 1.0) and ``breathing`` (length-``P`` rates; the
        width is ``width * exp(breathing @ R)``).
    n_grid, half_length : grid specification; ``half_length`` defaults to
        ``max|atoms| + 20 * max(width)``.
    """

    kind = "gaussian_chain"

    def __init__(self, atoms=(-0.7, 0.7), displacements=((-0.5,), (0.5,)), orbitals=None,
                 n_grid=1024, half_length=None):
        self.atoms = np.atleast_1d(np.asarray(atoms, dtype=float))
        disp = np.asarray(displacements, dtype=float)
        if disp.ndim == 1:
            disp = disp[:, None]
        if disp.shape[0] != self.atoms.size:
            raise DimensionMismatch("displacements need one row per atom")
        self.displacements = disp
        self.nparams = disp.shape[1]
        if orbitals is None:
            orbitals = [{"atom": a} for a in range(self.atoms.size)]
        self.orbitals = []
        for orb in orbitals:
            a = int(orb["atom"])
            if not 0 <= a < self.atoms.size:
                raise DimensionMismatch(f"orbital refers to missing atom {a}")
            br = np.zeros(self.nparams) if orb.get("breathing") is None else \
                np.asarray(orb["breathing"], dtype=float).ravel()
            if br.size != self.nparams:
                raise DimensionMismatch("breathing rates need one entry per parameter")
            self.orbitals.append((a, int(orb.get("l", 0)), float(orb.get("width", 1.0)), br))
        self.dim = len(self.orbitals)
        w_max = max(o[2] for o in self.orbitals)
        if half_length is None:
            half_length = float(np.max(np.abs(self.atoms))) + 20.0 * w_max
        self._setup_grid(n_grid, half_length)

    def atom_positions(self, R):
        r = as_param(R, self.nparams)
        return self.atoms + self.displacements @ r

    def d_atom_positions(self, R):
        as_param(R, self.nparams)
        return self.displacements.T.copy()

    def _orbital_geometry(self, r):
        pos = self.atoms + self.displacements @ r
        for a, l, w0, br in self.orbitals:
            yield a, l, pos[a], w0 * math.exp(float(br @ r)), br

    def check_domain(self, R):
        r = as_param(R, self.nparams)
        for _, _, c, w, _ in self._orbital_geometry(r):
            self._check_centre(c, w)

    def vectors(self, R):
        r = as_param(R, self.nparams)
        cols = [cartesian_gaussian(self.x, c, w, l)[0] for _, l, c, w, _ in self._orbital_geometry(r)]
        return self._scale * np.column_stack(cols).astype(complex)

    def d_vectors(self, R):
        r = as_param(R, self.nparams)
        out = np.zeros((self.nparams, self.ambient_dim, self.dim), dtype=complex)
        for mu, (a, l, c, w, br) in enumerate(self._orbital_geometry(r)):
            _, fc, fw = cartesian_gaussian(self.x, c, w, l)
            for i in range(self.nparams):
                out[i, :, mu] = self.displacements[a, i] * fc + w * br[i] * fw
        return self._scale * out


# --------------------------------------------------------------------------
# spin-1/2 band on the sphere


class TwoLevelSphere(BasisFamily):
    """Lower eigenvector of ``H = -B sigma.n(theta, phi)``, ``R = (theta, phi)``.

    The phase is fixed by making the first component real and non-negative,
    which gives ``(cos(theta/2), exp(i phi) sin(theta/2))``; the gauge is
    singular at the south pole, so ``|theta| < pi`` is the domain.
    """

    kind = "two_level_sphere"
    POLE_MARGIN = 1e-9

    def __init__(self, B=1.0):
        if B <= 0.0:
            raise ValueError("field magnitude B must be positive")
        self.B = float(B)
        self.ambient_dim, self.dim, self.nparams = 2, 1, 2

    def hamiltonian(self, R):
        th, ph = as_param(R, 2)
        n = np.array([math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)])
        return -self.B * np.array([[n[2], n[0] - 1j * n[1]], [n[0] + 1j * n[1], -n[2]]])

    def check_domain(self, R):
        th = as_param(R, 2)[0]
        if not abs(th) < math.pi - self.POLE_MARGIN:
            raise OutOfDomain(f"theta={th} on the gauge singularity (south pole)")

    def vectors(self, R):
        _, v = np.linalg.eigh(self.hamiltonian(R))
        low = v[:, 0]
        if abs(low[0]) > 0.0:
            low = low * (np.conj(low[0]) / abs(low[0]))
        else:
            low = low * (np.conj(low[1]) / abs(low[1]))
        return low[:, None].astype(complex)

    def d_vectors(self, R):
        th, ph = as_param(R, 2)
        c, s, z = math.cos(0.5 * th), math.sin(0.5 * th), np.exp(1j * ph)
        out = np.zeros((2, 2, 1), dtype=complex)
        out[0, :, 0] = [-0.5 * s, 0.5 * z * c]
        out[1, :, 0] = [0.0, 1j * z * s]
        return out

    def d2_vectors(self, R):
        th, ph = as_param(R, 2)
        c, s, z = math.cos(0.5 * th), math.sin(0.5 * th), np.exp(1j * ph)
        out = np.zeros((2, 2, 2, 1), dtype=complex)
        out[0, 0, :, 0] = [-0.25 * c, -0.25 * z * s]
        out[0, 1, :, 0] = out[1, 0, :, 0] = [0.0, 0.5j * z * c]
        out[1, 1, :, 0] = [0.0, -z * s]
        return out


# --------------------------------------------------------------------------
# helpers: fixed frames, smooth basis changes, trajectories


class StaticFamily(BasisFamily):
    """The same frame at every parameter point."""

    kind = "static"

    def __init__(self, vectors, nparams=1):
        v = np.asarray(vectors, dtype=complex)
        if v.ndim != 2:
            raise DimensionMismatch("static family needs an (M, N) array")
        self._v = v
        self.ambient_dim, self.dim = v.shape
        self.nparams = int(nparams)

    def vectors(self, R):
        as_param(R, self.nparams)
        return self._v.copy()

    def d_vectors(self, R):
        as_param(R, self.nparams)
        return np.zeros((self.nparams,) + self._v.shape, dtype=complex)

    def d2_vectors(self, R):
        as_param(R, self.nparams)
        return np.zeros((self.nparams, self.nparams) + self._v.shape, dtype=complex)


class SmoothGauge:
    """Smooth invertible ``T(R) = T0 + sum_i (A_i sin w_i R^i + B_i cos w_i R^i) + C sin(k.R)``.

    Used as a basis change ``|e'_n> = |e_mu> T^mu_n``.
    """

    def __init__(self, t0, a, b, omega, c, k):
        self.t0 = np.asarray(t0, dtype=complex)
        self.a = np.asarray(a, dtype=complex)
        self.b = np.asarray(b, dtype=complex)
        self.omega = np.asarray(omega, dtype=float)
        self.c = np.asarray(c, dtype=complex)
        self.k = np.asarray(k, dtype=float)
        self.dim = self.t0.shape[0]
        self.nparams = self.omega.size

    @classmethod
    def random(cls, n, nparams, rng, amplitude=None):
        """Random gauge whose perturbations stay below spectral norm 0.6 (always invertible)."""
        if amplitude is None:
            amplitude = 0.6 / (2 + 2 * nparams)

        def unit():
            m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            return m / np.linalg.norm(m, 2)

        t0 = np.eye(n) + amplitude * unit()
        a = np.array([amplitude * unit() for _ in range(nparams)])
        b = np.array([amplitude * unit() for _ in range(nparams)])
        omega = rng.uniform(0.5, 2.0, nparams)
        c = amplitude * unit()
        k = rng.uniform(-1.5, 1.5, nparams)
        return cls(t0, a, b, omega, c, k)

    def matrix(self, R):
        r = as_param(R, self.nparams)
        wr = self.omega * r
        out = self.t0 + np.einsum("i,imn->mn", np.sin(wr), self.a) + np.einsum("i,imn->mn", np.cos(wr), self.b)
        return out + math.sin(float(self.k @ r)) * self.c

    def derivative(self, R):
        r = as_param(R, self.nparams)
        wr = self.omega * r
        out = (self.omega * np.cos(wr))[:, None, None] * self.a - (self.omega * np.sin(wr))[:, None, None] * self.b
        return out + (self.k * math.cos(float(self.k @ r)))[:, None, None] * self.c

    def second_derivative(self, R):
        r = as_param(R, self.nparams)
        wr = self.omega * r
        out = np.zeros((self.nparams, self.nparams, self.dim, self.dim), dtype=complex)
        for i in range(self.nparams):
            out[i, i] = -self.omega[i] ** 2 * (math.sin(wr[i]) * self.a[i] + math.cos(wr[i]) * self.b[i])
        return out - math.sin(float(self.k @ r)) * np.einsum("i,j,mn->ijmn", self.k, self.k, self.c)


class GaugedFamily(BasisFamily):
    """``|e'_n(R)> = |e_mu(R)> T^mu_n(R)``: same spaces, different basis."""

    def __init__(self, base, gauge):
        if gauge.dim != base.dim or gauge.nparams != base.nparams:
            raise DimensionMismatch("gauge shape does not match the base family")
        self.base, self.gauge = base, gauge
        self.kind = f"gauged_{base.kind}"
        self.ambient_dim, self.dim, self.nparams = base.ambient_dim, base.dim, base.nparams

    @property
    def has_analytic(self):
        return self.base.has_analytic

    @property
    def has_second(self):
        return self.base.has_second

    def check_domain(self, R):
        self.base.check_domain(R)

    def vectors(self, R):
        return self.base.vectors(R) @ self.gauge.matrix(R)

    def d_vectors(self, R):
        e, de = self.base.vectors(R), self.base.d_vectors(R)
        return de @ self.gauge.matrix(R) + e @ self.gauge.derivative(R)

    def d2_vectors(self, R):
        e, de, d2e = self.base.vectors(R), self.base.d_vectors(R), self.base.d2_vectors(R)
        t, dt, d2t = self.gauge.matrix(R), self.gauge.derivative(R), self.gauge.second_derivative(R)
        cross = np.einsum("imn,jnk->ijmk", de, dt)
        return d2e @ t + cross + np.swapaxes(cross, 0, 1) + e @ d2t

    def __getattr__(self, name):
        # atom positions etc. come from the base family
        if name in ("atom_positions", "d_atom_positions"):
            return getattr(self.base, name)
        raise AttributeError(name)


class TrajectoryFamily(BasisFamily):
    """A family seen along a polynomial path ``R(t)``; the only parameter is time.

    Derivatives follow the chain rule ``d_t |e> = v^i d_i |e>``.
    """

    def __init__(self, base, path):
        if np.isscalar(path):
            rows = [[path]]
        elif all(np.ndim(c) == 0 for c in path):
            rows = [path]
        else:
            rows = list(path)
        rows = [np.atleast_1d(np.asarray(r, dtype=float)) for r in rows]
        width = max(r.size for r in rows)
        # ragged coefficient rows are padded with zeros (higher orders absent)
        p = np.array([np.pad(r, (0, width - r.size)) for r in rows])
        if p.shape[0] != base.nparams:
            raise DimensionMismatch("path needs one coefficient row per base parameter")
        self.base, self.path = base, p
        self.kind = f"trajectory_{base.kind}"
        self.ambient_dim, self.dim, self.nparams = base.ambient_dim, base.dim, 1

    @property
    def has_analytic(self):
        return self.base.has_analytic

    @property
    def has_second(self):
        return self.base.has_second

    def position(self, t):
        return np.array([npoly.polyval(t, row) for row in self.path])

    def velocity(self, t):
        return np.array([npoly.polyval(t, npoly.polyder(row)) if row.size > 1 else 0.0 for row in self.path])

    def acceleration(self, t):
        return np.array([npoly.polyval(t, npoly.polyder(row, 2)) if row.size > 2 else 0.0 for row in self.path])

    def check_domain(self, R):
        self.base.check_domain(self.position(as_param(R, 1)[0]))

    def vectors(self, R):
        return self.base.vectors(self.position(as_param(R, 1)[0]))

    def d_vectors(self, R):
        t = as_param(R, 1)[0]
        return np.einsum("i,imn->mn", self.velocity(t), self.base.d_vectors(self.position(t)))[None]

    def d2_vectors(self, R):
        t = as_param(R, 1)[0]
        r, v, a = self.position(t), self.velocity(t), self.acceleration(t)
        out = np.einsum("i,j,ijmn->mn", v, v, self.base.d2_vectors(r))
        out = out + np.einsum("i,imn->mn", a, self.base.d_vectors(r))
        return out[None, None]

    def atom_positions(self, R):
        return self.base.atom_positions(self.position(as_param(R, 1)[0]))

    def d_atom_positions(self, R):
        t = as_param(R, 1)[0]
        return (self.velocity(t) @ self.base.d_atom_positions(self.position(t)))[None, :]


# --------------------------------------------------------------------------
# operations


def evaluate_frame(family, R):
    """Frame of ``family`` at ``R``.

    Raises
    ------
    OutOfDomain, SingularFrame
    """
    r = as_param(R, family.nparams)
    family.check_domain(r)
    return build_frame(family.vectors(r), r)


def _metric_derivatives(vecs, inv_metric, dvecs):
    ed = np.conj(vecs.T)
    d_metric = dagger(dvecs) @ vecs + ed @ dvecs
    d_inv = -inv_metric @ d_metric @ inv_metric
    return d_metric, d_inv


def frame_derivatives(family, R, scheme="analytic", h=DEFAULT_FD_STEP, frame=None):
    """Parameter derivatives of the basis kets.

    Parameters
    ----------
    scheme : {"analytic", "central_fd"}
        ``central_fd`` uses ``(e(R + h u_i) - e(R - h u_i)) / 2h``.
    frame : BasisFrame, optional
        Frame at ``R`` if already available.
    """
    r = as_param(R, family.nparams)
    if frame is None:
        frame = evaluate_frame(family, r)
    if scheme == "analytic":
        dvecs = np.asarray(family.d_vectors(r), dtype=complex)
        step = None
    elif scheme == "central_fd":
        dvecs = np.empty((family.nparams,) + frame.vectors.shape, dtype=complex)
        for i in range(family.nparams):
            shift = np.zeros_like(r)
            shift[i] = h
            family.check_domain(r + shift)
            family.check_domain(r - shift)
            dvecs[i] = (family.vectors(r + shift) - family.vectors(r - shift)) / (2.0 * h)
        step = h
    else:
        raise ValueError(f"unknown derivative scheme {scheme!r}")
    d_metric, d_inv = _metric_derivatives(frame.vectors, frame.inv_metric, dvecs)
    return FrameDerivatives(dvecs, d_metric, d_inv, scheme, step)


def frame_second_derivatives(family, R, scheme="analytic", h=DEFAULT_FD_STEP):
    """``d_i d_j |e_mu>`` with shape ``(P, P, M, N)``; FD uses analytic first derivatives when present."""
    r = as_param(R, family.nparams)
    if scheme == "analytic":
        return np.asarray(family.d2_vectors(r), dtype=complex)
    out = None
    for i in range(family.nparams):
        shift = np.zeros_like(r)
        shift[i] = h
        plus = frame_derivatives(family, r + shift, "analytic" if family.has_analytic else "central_fd", h)
        minus = frame_derivatives(family, r - shift, "analytic" if family.has_analytic else "central_fd", h)
        col = (plus.d_vectors - minus.d_vectors) / (2.0 * h)
        if out is None:
            out = np.empty((family.nparams,) + col.shape, dtype=complex)
        out[i] = col
    return out


_PLACEMENTS = ("natural", "lower", "lower_upper", "upper_upper")


def frame_gauge_overlap(frame_to, frame_from, placement="natural"):
    """Cross-frame overlap tensor ``A(to : from)``.

    ``natural`` gives ``A^mu_nu = <e^mu(to)|e_nu(from)>``; ``lower`` the raw
    cross-Gram ``A_{mu nu} = <e_mu(to)|e_nu(from)>``; ``lower_upper`` gives
    ``A_mu^nu = <e_mu(to)|e^nu(from)>``; ``upper_upper`` both indices raised.
    """
    if frame_to.vectors.shape != frame_from.vectors.shape:
        raise DimensionMismatch(
            f"frames differ in shape {frame_to.vectors.shape} vs {frame_from.vectors.shape}")
    lower = frame_to.vectors.conj().T @ frame_from.vectors
    if placement == "lower":
        return lower
    if placement == "natural":
        return frame_to.solve_metric(lower)
    if placement == "lower_upper":
        return lower @ frame_from.inv_metric
    if placement == "upper_upper":
        return frame_to.solve_metric(lower) @ frame_from.inv_metric
    raise ValueError(f"unknown placement {placement!r}; expected one of {_PLACEMENTS}")


def project(frame, v):
    """``P_Omega v`` for an ambient vector (or ``(M, K)`` block)."""
    v = np.asarray(v, dtype=complex)
    if v.shape[0] != frame.ambient_dim:
        raise DimensionMismatch(f"vector length {v.shape[0]} vs ambient dimension {frame.ambient_dim}")
    return frame.vectors @ frame.solve_metric(frame.vectors.conj().T @ v)


def complement_project(frame, v):
    """``Q_Omega v = v - P_Omega v``."""
    return np.asarray(v, dtype=complex) - project(frame, v)


# --------------------------------------------------------------------------
# construction from scenario configuration


def _overlap(motion):
    def build(s=(0.5, 0.1), width=1.0, n_grid=2048, half_length=None):
        return OverlapPair(s, width, motion, n_grid, half_length)
    return build


def _static(vectors_re, vectors_im=None, nparams=1):
    v = np.asarray(vectors_re, dtype=float)
    if vectors_im is not None:
        v = v + 1j * np.asarray(vectors_im, dtype=float)
    return StaticFamily(v, nparams)


FAMILY_KINDS = {
    "rotating2d": Rotating2D,
    "breathing2d": Breathing2D,
    "overlap_pair_symmetric": _overlap("symmetric"),
    "overlap_pair_pinned": _overlap("pinned"),
    "gaussian_chain": GaussianChain,
    "two_level_sphere": TwoLevelSphere,
    "static": _static,
}


def family_from_config(cfg):
    """Build a family from a mapping with a ``kind`` key plus kind-specific keys.

    Optional wrappers: ``gauge_seed`` applies a random smooth basis change and
    ``path`` (one coefficient row per parameter) turns the family into a
    time trajectory.
    """
    cfg = dict(cfg)
    kind = cfg.pop("kind", None)
    if kind not in FAMILY_KINDS:
        raise KeyError(f"unknown family kind {kind!r}; known: {sorted(FAMILY_KINDS)}")
    gauge_seed = cfg.pop("gauge_seed", None)
    path = cfg.pop("path", None)
    fam = FAMILY_KINDS[kind](**cfg)
    if gauge_seed is not None:
        rng = np.random.default_rng(int(gauge_seed))
        fam = GaugedFamily(fam, SmoothGauge.random(fam.dim, fam.nparams, rng))
    if path is not None:
        fam = TrajectoryFamily(fam, path)
    return fam
