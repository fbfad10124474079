import numpy as np
import pytest

from covbasis import DenseHamiltonian, GaussianChain, GridHamiltonian, OverlapPair, ZeroHamiltonian, evaluate_frame
from covbasis.basis import frame_derivatives
from covbasis.errors import AmbientUnavailable, DimensionMismatch
from covbasis.hamiltonians import DrivenHamiltonian, SubspaceHamiltonian, pauli


def test_pauli_algebra():
    x, y, z = pauli("x"), pauli("y"), pauli("z")
    np.testing.assert_allclose(x @ y, 1j * z)
    np.testing.assert_allclose(z @ z, pauli("i"))


def test_dense_rejects_non_square():
    with pytest.raises(DimensionMismatch):
        DenseHamiltonian(np.ones((2, 3)))


def test_dense_checks_vector_length():
    with pytest.raises(DimensionMismatch):
        DenseHamiltonian(np.eye(3)).apply([0.0], np.ones(2))


def test_zero_hamiltonian():
    z = ZeroHamiltonian(5, nparams=2)
    assert not np.any(z.apply([0, 0], np.ones((5, 2))))
    assert z.apply_derivative([0, 0], np.ones(5)).shape == (2, 5)


def test_driven_derivative_matches_difference():
    d = DrivenHamiltonian(pauli("z"), pauli("x"), omega=1.7, phase=0.3)
    t, h = 0.4, 1e-6
    v = np.array([1.0, 2.0j])
    fd = (d.apply([t + h], v) - d.apply([t - h], v)) / (2 * h)
    np.testing.assert_allclose(d.apply_derivative([t], v)[0], fd, atol=1e-8)


@pytest.mark.parametrize("fam", [OverlapPair((0.5, 0.2), n_grid=512), GaussianChain(n_grid=512)],
                         ids=["pair", "chain"])
def test_grid_potential_derivative(fam):
    ham = GridHamiltonian(fam, depth=(1.0, 0.7), sigma=0.8)
    r, h = np.array([0.3]), 1e-6
    fd = (ham.potential(r + h) - ham.potential(r - h)) / (2 * h)
    np.testing.assert_allclose(ham.d_potential(r)[0], fd, atol=1e-7)


def test_grid_kinetic_is_hermitian_and_positive():
    ham = GridHamiltonian(OverlapPair((0.5,), n_grid=256))
    k = ham.kinetic.toarray()
    np.testing.assert_allclose(k, k.T)
    assert np.linalg.eigvalsh(k).min() > 0


def test_matrix_derivative_matches_difference():
    fam = GaussianChain(n_grid=512)
    ham = GridHamiltonian(fam, depth=1.0, sigma=0.8)
    r, h = np.array([0.1]), 1e-5
    frame = evaluate_frame(fam, r)
    dm = ham.d_matrix(frame, frame_derivatives(fam, r), r)[0]
    up, dn = evaluate_frame(fam, r + h), evaluate_frame(fam, r - h)
    fd = (ham.matrix(up, r + h) - ham.matrix(dn, r - h)) / (2 * h)
    np.testing.assert_allclose(dm, fd, atol=1e-8)


def test_natural_is_metric_solve():
    fam = GaussianChain(n_grid=512)
    ham = GridHamiltonian(fam)
    frame = evaluate_frame(fam, [0.0])
    np.testing.assert_allclose(frame.metric @ ham.natural(frame, [0.0]), ham.matrix(frame, [0.0]), atol=1e-12)


def test_ground_space_is_orthonormal():
    ham = GridHamiltonian(OverlapPair((0.5,), n_grid=256), depth=1.5)
    v = ham.ground_space([0.0], 3)
    np.testing.assert_allclose(v.conj().T @ v, np.eye(3), atol=1e-10)


def test_subspace_model():
    frame = evaluate_frame(OverlapPair((0.5,), n_grid=256), [0.0])
    sub = SubspaceHamiltonian(lambda R: np.array([[0.0, 1.0], [1.0, 0.0]]))
    np.testing.assert_allclose(sub.matrix(frame), pauli("x"))
    with pytest.raises(AmbientUnavailable):
        sub.apply([0.0], np.ones(256))
    with pytest.raises(AmbientUnavailable):
        sub.d_matrix(frame, None)
    bad = SubspaceHamiltonian(lambda R: np.eye(3))
    with pytest.raises(DimensionMismatch):
        bad.matrix(frame)
