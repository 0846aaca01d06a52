import numpy as np
import pytest

from trionsim import qcore
from trionsim.qcore import DensityMatrix, Ket, QCoreError, SuperOperator


def _rand_herm(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (a + a.conj().T) / 2


def test_vec_roundtrip_is_column_stacking():
    m = np.arange(6).reshape(2, 3)
    assert list(qcore.vec(m)) == [0, 3, 1, 4, 2, 5]
    assert np.array_equal(qcore.unvec(qcore.vec(np.eye(3)), 3), np.eye(3))


def test_commutator_and_dissipator_supers():
    rng = np.random.default_rng(0)
    h, c = _rand_herm(rng, 3), rng.normal(size=(3, 3))
    rho = qcore.random_density((3,), rng).entries
    lhs = qcore.unvec(qcore.commutator_super(h) @ qcore.vec(rho), 3)
    assert np.allclose(lhs, -1j * (h @ rho - rho @ h))
    d = qcore.unvec(qcore.dissipator_super(c) @ qcore.vec(rho), 3)
    cd = c.conj().T
    assert np.allclose(d, c @ rho @ cd - 0.5 * (cd @ c @ rho + rho @ cd @ c))
    assert abs(np.trace(d)) < 1e-12


def test_propagator_of_hamiltonian_is_unitary_conjugation():
    rng = np.random.default_rng(1)
    h = _rand_herm(rng, 2)
    g = SuperOperator(qcore.commutator_super(h), (2,), ("q",), trace_preserving=True)
    rho = qcore.random_density((2,), rng, labels=("q",))
    out = qcore.propagate(g, 0.7, rho)
    w, v = np.linalg.eigh(h)
    u = v @ np.diag(np.exp(-0.7j * w)) @ v.conj().T
    assert np.allclose(out.entries, u @ rho.entries @ u.conj().T)
    assert qcore.propagator(g, 0.7).trace_defect() < 1e-12


def test_negative_time_rejected():
    g = SuperOperator(np.zeros((4, 4)), (2,), ("q",))
    with pytest.raises(QCoreError):
        qcore.propagator(g, -1.0)


def test_tensor_and_partial_trace():
    rng = np.random.default_rng(2)
    a = qcore.random_density((2,), rng, labels=("a",))
    b = qcore.random_density((3,), rng, labels=("b",))
    ab = qcore.tensor(a, b)
    assert ab.dims == (2, 3) and ab.labels == ("a", "b")
    assert np.allclose(qcore.partial_trace(ab, ["a"]).entries, a.entries)
    assert np.allclose(qcore.partial_trace(ab, ["b"]).entries, b.entries)
    with pytest.raises(QCoreError):
        qcore.tensor(a, a)
    with pytest.raises(QCoreError):
        qcore.partial_trace(ab, ["c"])


def test_density_validation():
    with pytest.raises(QCoreError):
        DensityMatrix(np.diag([1.0, 1.0]), (2,), ("q",)).validate()
    with pytest.raises(QCoreError):
        DensityMatrix(np.diag([1.2, -0.2]), (2,), ("q",)).validate()
    with pytest.raises(QCoreError):
        DensityMatrix(np.eye(2) / 2, (3,), ("q",))
    with pytest.raises(QCoreError):
        DensityMatrix(np.eye(4) / 4, (2, 2), ("q", "q"))


def test_json_roundtrip():
    rho = qcore.random_density((2, 2), np.random.default_rng(3), labels=("x", "y"))
    back = DensityMatrix.from_json(rho.to_json())
    assert np.array_equal(back.entries, rho.entries)
    assert back.labels == rho.labels
    with pytest.raises(QCoreError):
        qcore.density_from_dict({"dim": 2, "labels": ["q"], "re": [1, 0, 0], "im": [0, 0, 0]})


def test_measure_project_branch_probabilities_sum_to_one():
    rho = qcore.random_density((2, 2), np.random.default_rng(4), labels=("x", "y"))
    p0 = qcore.Operator(np.diag([1.0, 0.0]), (2,), ("y",), hermitian=True)
    p1 = qcore.Operator(np.diag([0.0, 1.0]), (2,), ("y",), hermitian=True)
    b0, q0 = qcore.measure_project(rho, p0, "y")
    b1, q1 = qcore.measure_project(rho, p1, "y")
    assert abs(q0 + q1 - 1) < 1e-12
    assert np.allclose(b0.entries + b1.entries, sum(
        qcore.embed(p, (2, 2), 1) @ rho.entries @ qcore.embed(p, (2, 2), 1)
        for p in (np.diag([1, 0]), np.diag([0, 1]))))


def test_choi_of_identity_channel_is_maximally_entangled():
    c = qcore.choi_matrix(np.eye(4), 2)
    assert np.isclose(np.trace(c).real, 2)
    assert np.linalg.matrix_rank(c) == 1


def test_ket_normalized_and_projector():
    k = Ket.normalized([1, 1j], (2,), ("q",))
    assert np.isclose(np.linalg.norm(k.amplitudes), 1)
    k.projector().validate()
    with pytest.raises(QCoreError):
        Ket.normalized([0, 0], (2,), ("q",))
