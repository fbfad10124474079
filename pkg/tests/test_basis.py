import numpy as np
import pytest

from covbasis import (Breathing2D, DimensionMismatch, GaugedFamily, GaussianChain, OutOfDomain,
                      OverlapPair, Rotating2D, SingularFrame, SmoothGauge, StaticFamily, TrajectoryFamily,
                      TwoLevelSphere, build_frame, complement_project, evaluate_frame, family_from_config,
                      frame_derivatives, frame_gauge_overlap, frame_second_derivatives, project)
from covbasis.basis import cartesian_gaussian
from conftest import FAMILIES, crandn
from oracles import fd_vectors, gram_loops


def test_analytic_first_derivative_matches_fd(family_point):
    fam, r = family_point
    der = frame_derivatives(fam, r, "analytic")
    np.testing.assert_allclose(der.d_vectors, fd_vectors(fam, r), atol=1e-8)


def test_fd_scheme_matches_analytic(family_point):
    fam, r = family_point
    a = frame_derivatives(fam, r, "analytic")
    f = frame_derivatives(fam, r, "central_fd", 1e-4)
    assert f.h == 1e-4 and f.scheme == "central_fd"
    np.testing.assert_allclose(f.d_vectors, a.d_vectors, atol=1e-6)
    np.testing.assert_allclose(f.d_metric, a.d_metric, atol=1e-6)


def test_metric_derivatives_match_fd_of_metric(family_point):
    fam, r = family_point
    der = frame_derivatives(fam, r)
    h = 1e-5
    for i in range(fam.nparams):
        e = np.zeros_like(r)
        e[i] = h
        ds = (gram_loops(fam.vectors(r + e)) - gram_loops(fam.vectors(r - e))) / (2 * h)
        dinv = (np.linalg.inv(gram_loops(fam.vectors(r + e)))
                - np.linalg.inv(gram_loops(fam.vectors(r - e)))) / (2 * h)
        np.testing.assert_allclose(der.d_metric[i], ds, atol=1e-8)
        np.testing.assert_allclose(der.d_inv_metric[i], dinv, atol=1e-7)


@pytest.mark.parametrize("name", [k for k, (f, _) in FAMILIES.items() if f.has_second])
def test_second_derivatives_match_fd(name):
    fam, r = FAMILIES[name]
    r = np.asarray(r, dtype=float)
    a = frame_second_derivatives(fam, r, "analytic")
    f = frame_second_derivatives(fam, r, "central_fd", 1e-5)
    np.testing.assert_allclose(a, f, atol=1e-7)
    np.testing.assert_allclose(a, np.swapaxes(a, 0, 1), atol=1e-12)


def test_unknown_scheme():
    with pytest.raises(ValueError):
        frame_derivatives(Rotating2D(), [0.0], "forward")


def test_rotating_frame_is_orthonormal_with_known_connection():
    fam = Rotating2D(theta=(0.0, 2.0))
    f = evaluate_frame(fam, [0.3])
    np.testing.assert_allclose(f.metric, np.eye(2), atol=1e-14)
    der = frame_derivatives(fam, [0.3])
    np.testing.assert_allclose(f.vectors.conj().T @ der.d_vectors[0], [[0, -2], [2, 0]], atol=1e-14)


def test_breathing_metric():
    fam = Breathing2D(alpha1=(1.0, 0.5), alpha2=(2.0,))
    f = evaluate_frame(fam, [2.0])
    np.testing.assert_allclose(f.metric, np.diag([4.0, 4.0]), atol=1e-14)


def test_breathing_collapse_out_of_domain():
    with pytest.raises(OutOfDomain):
        evaluate_frame(Breathing2D(alpha1=(1.0, -1.0)), [1.5])


class TestOverlapPair:
    @pytest.mark.parametrize("motion", ["symmetric", "pinned"])
    def test_overlap_follows_law(self, motion):
        fam = OverlapPair((0.3, 0.2), motion=motion, n_grid=1024)
        for t in (0.0, 0.7, 1.5):
            f = evaluate_frame(fam, [t])
            np.testing.assert_allclose(np.diag(f.metric).real, 1.0, atol=1e-10)
            assert abs(f.metric[0, 1] - (0.3 + 0.2 * t)) < 1e-8

    def test_symmetric_centres_mirror(self):
        fam = OverlapPair((0.5, 0.1), motion="symmetric", n_grid=1024)
        pos = fam.atom_positions([0.4])
        assert abs(pos[0] + pos[1]) < 1e-12

    def test_pinned_second_atom_fixed(self):
        fam = OverlapPair((0.5, 0.1), motion="pinned", n_grid=1024)
        assert fam.atom_positions([0.0])[1] == fam.atom_positions([1.0])[1] == 0.0
        assert fam.d_atom_positions([0.5])[0, 1] == 0.0
        assert fam.d_atom_positions([0.5])[0, 0] != 0.0

    def test_singular_at_unit_overlap(self):
        with pytest.raises(SingularFrame):
            evaluate_frame(OverlapPair((1.0,), n_grid=256), [0.0])

    def test_nonpositive_overlap_out_of_domain(self):
        with pytest.raises(OutOfDomain):
            evaluate_frame(OverlapPair((0.1, -0.2), n_grid=256), [1.0])


def test_cartesian_gaussians_normalized_and_derivatives():
    x = np.linspace(-20, 20, 8001)
    dx = x[1] - x[0]
    fs = [cartesian_gaussian(x, 0.3, 1.2, l)[0] for l in range(3)]
    gram = np.array([[np.sum(a * b) * dx for b in fs] for a in fs])
    np.testing.assert_allclose(np.diag(gram), 1.0, atol=1e-10)
    # opposite parity about the centre
    assert abs(gram[0, 1]) < 1e-10 and abs(gram[1, 2]) < 1e-10
    # same parity overlaps: <u^0|u^2> = sqrt(1/3) after normalization
    assert abs(gram[0, 2] - np.sqrt(1 / 3)) < 1e-10
    h = 1e-5
    for l in range(3):
        f, dc, dw = cartesian_gaussian(x, 0.3, 1.2, l)
        np.testing.assert_allclose(dc, (cartesian_gaussian(x, 0.3 + h, 1.2, l)[0]
                                        - cartesian_gaussian(x, 0.3 - h, 1.2, l)[0]) / (2 * h), atol=1e-8)
        np.testing.assert_allclose(dw, (cartesian_gaussian(x, 0.3, 1.2 + h, l)[0]
                                        - cartesian_gaussian(x, 0.3, 1.2 - h, l)[0]) / (2 * h), atol=1e-8)


def test_chain_atoms_move_with_displacements():
    fam = GaussianChain(atoms=(-1.0, 1.0), displacements=((1.0,), (-0.5,)), n_grid=256)
    np.testing.assert_allclose(fam.atom_positions([0.2]), [-0.8, 0.9])
    np.testing.assert_allclose(fam.d_atom_positions([0.2]), [[1.0, -0.5]])


def test_sphere_state_is_lower_eigenvector():
    fam = TwoLevelSphere(B=1.3)
    r = np.array([0.8, 2.1])
    v = fam.vectors(r)[:, 0]
    h = fam.hamiltonian(r)
    e = np.linalg.eigvalsh(h)[0]
    np.testing.assert_allclose(h @ v, e * v, atol=1e-12)
    assert abs(np.linalg.norm(v) - 1) < 1e-14
    assert v[0].real >= 0 and abs(v[0].imag) < 1e-14


def test_sphere_domain():
    with pytest.raises(OutOfDomain):
        evaluate_frame(TwoLevelSphere(), [np.pi, 0.0])


def test_static_family_has_zero_derivatives(rng):
    fam = StaticFamily(crandn(rng, 4, 2), nparams=2)
    der = frame_derivatives(fam, [0.1, 0.2])
    assert np.all(der.d_vectors == 0)


def test_smooth_gauge_derivatives(rng):
    g = SmoothGauge.random(3, 2, rng)
    r = np.array([0.4, -0.2])
    h = 1e-5
    fd = np.array([(g.matrix(r + e) - g.matrix(r - e)) / (2 * h) for e in np.eye(2) * h])
    np.testing.assert_allclose(g.derivative(r), fd, atol=1e-8)
    fd2 = np.array([(g.derivative(r + e) - g.derivative(r - e)) / (2 * h) for e in np.eye(2) * h])
    np.testing.assert_allclose(g.second_derivative(r), fd2, atol=1e-8)
    assert np.linalg.svd(g.matrix(r), compute_uv=False)[-1] > 0.1


def test_gauged_family_spans_same_space(rng):
    base, r = FAMILIES["chain"]
    g = GaugedFamily(base, SmoothGauge.random(2, 1, rng))
    a, b = evaluate_frame(base, r), evaluate_frame(g, r)
    v = crandn(rng, base.ambient_dim)
    np.testing.assert_allclose(project(a, v), project(b, v), atol=1e-12)
    with pytest.raises(DimensionMismatch):
        GaugedFamily(base, SmoothGauge.random(3, 1, rng))


def test_trajectory_chain_rule():
    sphere = TwoLevelSphere()
    traj = TrajectoryFamily(sphere, [[0.5, 0.3], [0.1, 1.0, 0.2]])
    t = 0.7
    r, v = traj.position(t), traj.velocity(t)
    np.testing.assert_allclose(r, [0.5 + 0.3 * t, 0.1 + t + 0.2 * t * t])
    expect = np.einsum("i,imn->mn", v, sphere.d_vectors(r))
    np.testing.assert_allclose(traj.d_vectors([t])[0], expect, atol=1e-14)
    np.testing.assert_allclose(traj.d_vectors([t]), fd_vectors(traj, [t]), atol=1e-8)
    np.testing.assert_allclose(frame_second_derivatives(traj, [t]),
                               frame_second_derivatives(traj, [t], "central_fd", 1e-5), atol=1e-7)


class TestGaugeOverlapAndProjection:
    def test_same_frame_gives_identity(self, rng):
        f = build_frame(crandn(rng, 5, 3))
        np.testing.assert_allclose(frame_gauge_overlap(f, f), np.eye(3), atol=1e-12)
        np.testing.assert_allclose(frame_gauge_overlap(f, f, "lower"), f.metric, atol=1e-12)
        np.testing.assert_allclose(frame_gauge_overlap(f, f, "lower_upper"), np.eye(3), atol=1e-12)
        np.testing.assert_allclose(frame_gauge_overlap(f, f, "upper_upper"), f.inv_metric, atol=1e-12)

    def test_gauge_overlap_is_basis_change_inside_space(self, rng):
        f = build_frame(crandn(rng, 5, 3))
        t = crandn(rng, 3, 3) + 3 * np.eye(3)
        g = build_frame(f.vectors @ t)
        np.testing.assert_allclose(frame_gauge_overlap(g, f), np.linalg.inv(t), atol=1e-11)

    def test_mismatched_frames(self, rng):
        with pytest.raises(DimensionMismatch):
            frame_gauge_overlap(build_frame(crandn(rng, 5, 3)), build_frame(crandn(rng, 5, 2)))

    def test_unknown_placement(self, rng):
        f = build_frame(crandn(rng, 5, 3))
        with pytest.raises(ValueError):
            frame_gauge_overlap(f, f, "sideways")

    def test_projection_split(self, rng):
        f = build_frame(crandn(rng, 6, 2))
        v = crandn(rng, 6)
        p, q = project(f, v), complement_project(f, v)
        np.testing.assert_allclose(p + q, v, atol=1e-14)
        np.testing.assert_allclose(f.vectors.conj().T @ q, 0, atol=1e-12)
        np.testing.assert_allclose(project(f, p), p, atol=1e-12)
        with pytest.raises(DimensionMismatch):
            project(f, np.ones(5))


class TestFromConfig:
    def test_each_kind(self):
        for cfg in ({"kind": "rotating2d", "theta": [0, 1]}, {"kind": "breathing2d"},
                    {"kind": "overlap_pair_symmetric", "n_grid": 256},
                    {"kind": "overlap_pair_pinned", "n_grid": 256},
                    {"kind": "gaussian_chain", "n_grid": 256}, {"kind": "two_level_sphere"},
                    {"kind": "static", "vectors_re": [[1, 0], [0, 1]]}):
            fam = family_from_config(cfg)
            assert fam.kind.startswith(cfg["kind"].split("_pair")[0])

    def test_wrappers(self):
        fam = family_from_config({"kind": "two_level_sphere", "gauge_seed": 3, "path": [[1.0, 0.1], [0.0, 1.0]]})
        assert isinstance(fam, TrajectoryFamily) and isinstance(fam.base, GaugedFamily)
        assert fam.nparams == 1

    def test_unknown_kind(self):
        with pytest.raises(KeyError):
            family_from_config({"kind": "torus"})
