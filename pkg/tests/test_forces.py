import numpy as np
import pytest

from covbasis import (Breathing2D, DegenerateState, DenseHamiltonian, GaugedFamily, GaussianChain,
                      GridHamiltonian, Rotating2D, SmoothGauge, StaticFamily, evaluate_frame)
from covbasis.errors import AmbientUnavailable, DimensionMismatch
from covbasis.forces import HF_FORMS, eigenvalue_fd, hf_derivative, pulay_decomposition, solve_generalized_eigen
from covbasis.hamiltonians import SubspaceHamiltonian, pauli
from covbasis.tensor_core import build_frame, Operator
from oracles import loglog_slope


def moving_dense(n, nparams=1, seed=0):
    """Ambient ``H(R) = A + R . B`` with Hermitian random ``A`` and ``B``."""
    rng = np.random.default_rng(seed)
    herm = lambda: (lambda a: a + a.conj().T)(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    a = herm()
    b = np.array([herm() for _ in range(nparams)])
    return DenseHamiltonian(lambda R: a + np.tensordot(R, b, 1), lambda R: b, nparams=nparams)


def chain_model(gauged=False):
    chain = GaussianChain(atoms=(-0.8, 0.8), displacements=((-0.5,), (0.5,)), n_grid=512)
    fam = GaugedFamily(chain, SmoothGauge.random(2, 1, np.random.default_rng(4))) if gauged else chain
    return fam, GridHamiltonian(fam, depth=1.2, sigma=0.9)


def models():
    rot = Rotating2D(theta=(0.2, 0.8), ambient_dim=3)
    full = GaugedFamily(StaticFamily(np.eye(3), 1), SmoothGauge.random(3, 1, np.random.default_rng(8)))
    return {
        "chain": (*chain_model(), [0.2]),
        "gauged_chain": (*chain_model(True), [0.1]),
        "breathing": (Breathing2D(alpha1=(1.0, 0.3), alpha2=(1.4, -0.2)), moving_dense(2, seed=1), [0.4]),
        "rotating": (rot, moving_dense(3, seed=2), [0.3]),
        "full_span": (full, moving_dense(3, seed=3), [0.25]),
    }


MODELS = models()


@pytest.fixture(params=sorted(MODELS), ids=sorted(MODELS))
def model(request):
    fam, ham, r = MODELS[request.param]
    return fam, ham, np.asarray(r, dtype=float)


def ground(fam, ham, r, index=0):
    frame = evaluate_frame(fam, r)
    return solve_generalized_eigen(ham.matrix(frame, r), frame)[index]


class TestEigen:
    def test_orthonormal_diagonal(self):
        sols = solve_generalized_eigen(np.diag([2.0, 1.0]), build_frame(np.eye(2)))
        assert [s.energy for s in sols] == pytest.approx([1.0, 2.0], abs=1e-14)

    def test_two_by_two_pencil(self):
        s = 0.3
        ang = np.arccos(s)
        frame = build_frame(np.array([[1.0, np.cos(ang)], [0.0, np.sin(ang)]]))
        sols = solve_generalized_eigen(pauli("x"), frame)
        # det(H - E S) = 0 with H = [[0,1],[1,0]], S = [[1,s],[s,1]]
        assert sols[0].energy == pytest.approx(-1 / (1 - s), abs=1e-12)
        assert sols[1].energy == pytest.approx(1 / (1 + s), abs=1e-12)

    def test_residual_and_metric_orthonormality(self, model):
        fam, ham, r = model
        frame = evaluate_frame(fam, r)
        h = ham.matrix(frame, r)
        sols = solve_generalized_eigen(h, frame)
        v = np.array([s.ket for s in sols]).T
        np.testing.assert_allclose(v.conj().T @ frame.metric @ v, np.eye(frame.dim), atol=1e-10)
        for s in sols:
            assert np.max(np.abs(h @ s.ket - s.energy * frame.metric @ s.ket)) < 1e-10

    def test_natural_operator_accepted(self):
        frame = build_frame(np.eye(2))
        sols = solve_generalized_eigen(Operator(np.diag([3.0, -1.0]), "natural"), frame)
        assert sols[0].energy == pytest.approx(-1.0)

    def test_shape_checked(self):
        with pytest.raises(DimensionMismatch):
            solve_generalized_eigen(np.eye(3), build_frame(np.eye(2)))


def test_three_forms_agree(model):
    fam, ham, r = model
    sol = ground(fam, ham, r)
    vals = {f: hf_derivative(sol, fam, ham, r, f) for f in HF_FORMS}
    for f in HF_FORMS:
        np.testing.assert_allclose(vals[f], vals["natural"], atol=1e-8, err_msg=f)


def test_finite_difference_second_order(model):
    fam, ham, r = model
    sol = ground(fam, ham, r)
    exact = hf_derivative(sol, fam, ham, r)
    hs = np.array([4e-2, 2e-2, 1e-2])
    errs = [np.max(np.abs(eigenvalue_fd(fam, ham, r, 0, h) - exact)) for h in hs]
    assert 1.8 < loglog_slope(hs, errs) < 2.2
    assert np.max(np.abs(eigenvalue_fd(fam, ham, r, 0, 1e-4) - exact)) < 1e-6


def test_pulay_pieces_sum_to_total(model):
    fam, ham, r = model
    sol = ground(fam, ham, r)
    parts = pulay_decomposition(sol, fam, ham, r)
    np.testing.assert_allclose(parts["hellmann"] + parts["in_space"] + parts["out_of_space"], parts["total"],
                               atol=1e-12)
    np.testing.assert_allclose(parts["total"], hf_derivative(sol, fam, ham, r), atol=1e-8)
    # exact eigenstates leave nothing for the in-space part
    assert np.max(np.abs(parts["in_space"])) < 1e-10
    assert parts["imag_residual"] < 1e-10


@pytest.mark.parametrize("name", ["breathing", "full_span"])
def test_full_span_has_no_out_of_space_term(name):
    fam, ham, r = MODELS[name]
    parts = pulay_decomposition(ground(fam, ham, r), fam, ham, r)
    assert np.max(np.abs(parts["out_of_space"])) < 1e-10


def test_out_of_space_term_tracks_the_span():
    # a frame rotating inside a fixed plane never leaves it
    fam, ham, r = MODELS["rotating"]
    assert np.max(np.abs(pulay_decomposition(ground(fam, ham, r), fam, ham, r)["out_of_space"])) < 1e-12
    fam, ham, r = MODELS["chain"]
    assert np.max(np.abs(pulay_decomposition(ground(fam, ham, r), fam, ham, r)["out_of_space"])) > 1e-3


def test_static_frame_leaves_only_hellmann():
    fam = StaticFamily(np.linalg.qr(np.random.default_rng(0).standard_normal((4, 2)))[0] + 0.1, 1)
    ham = moving_dense(4, seed=5)
    r = np.array([0.3])
    parts = pulay_decomposition(ground(fam, ham, r), fam, ham, r)
    np.testing.assert_allclose(parts["hellmann"], parts["total"], atol=1e-12)


def test_constant_problem_has_zero_force():
    fam = StaticFamily(np.array([[1.0, 0.3], [0.0, 1.0], [0.0, 0.2]]), 1)
    ham = DenseHamiltonian(np.diag([1.0, 2.0, 3.0]))
    r = np.array([0.0])
    sol = ground(fam, ham, r)
    for f in HF_FORMS:
        assert np.max(np.abs(hf_derivative(sol, fam, ham, r, f))) < 1e-10


def test_out_of_space_share_shrinks_with_enrichment():
    """Higher powers on each atom move the basis towards the exact ground state."""
    r = np.array([0.2])
    shares = []
    for lmax in (0, 1, 2):
        orbs = [{"atom": a, "l": l, "width": 0.9} for a in (0, 1) for l in range(lmax + 1)]
        fam = GaussianChain(atoms=(-0.8, 0.8), displacements=((-0.5,), (0.5,)), orbitals=orbs, n_grid=512)
        ham = GridHamiltonian(fam, depth=1.2, sigma=0.9)
        parts = pulay_decomposition(ground(fam, ham, r), fam, ham, r)
        shares.append(abs(parts["out_of_space"][0]) / abs(parts["total"][0]))
    assert shares[0] > 1e-3
    assert shares[0] > shares[1] > shares[2]


def test_degenerate_state_rejected():
    fam = StaticFamily(np.eye(2), 1)
    ham = DenseHamiltonian(np.eye(2))
    r = np.array([0.0])
    with pytest.raises(DegenerateState):
        hf_derivative(ground(fam, ham, r), fam, ham, r)


def test_unknown_form():
    fam, ham, r = MODELS["breathing"]
    with pytest.raises(ValueError):
        hf_derivative(ground(fam, ham, r), fam, ham, r, "lagrangian")


def test_pulay_needs_ambient():
    fam = Breathing2D()
    ham = SubspaceHamiltonian(lambda R: np.diag([0.0, 1.0]), lambda R: np.zeros((1, 2, 2)))
    r = np.array([0.1])
    sol = ground(fam, ham, r)
    with pytest.raises(AmbientUnavailable):
        pulay_decomposition(sol, fam, ham, r)
    # the Hellmann-Feynman forms only need matrix elements
    assert np.all(np.isfinite(hf_derivative(sol, fam, ham, r, "matrix_covariant")))
