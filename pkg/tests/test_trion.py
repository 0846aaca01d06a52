import math

import numpy as np
import pytest

from trionsim import qcore, trion
from trionsim.trion import ParameterError, TrionParams


def test_bohr_magneton_units():
    # mu_B / hbar in rad ns^-1 mT^-1
    assert abs(trion.MU_B - 0.0879410) < 1e-6
    p = TrionParams.fitted()
    assert abs(p.larmor_period - 2 * math.pi / (0.6 * trion.MU_B * 60)) < 1e-12


def test_parameter_validation():
    with pytest.raises(ParameterError):
        TrionParams(t1=0.0)
    with pytest.raises(ParameterError):
        TrionParams(lambda_osrp=1.2)
    with pytest.raises(ParameterError):
        TrionParams(b_oh=-1.0)


def test_doc_roundtrip(tmp_path):
    p = TrionParams.fitted()
    path = tmp_path / "p.yaml"
    p.save(path)
    q = TrionParams.load(path)
    for k, v in vars(p).items():
        assert getattr(q, k) == pytest.approx(v, abs=1e-12)
    with pytest.raises(ParameterError):
        TrionParams.from_doc({"bogus": 1})


def test_hamiltonian_hermitian_and_liouvillian_trace_preserving():
    p = TrionParams.fitted()
    s = trion.sample_overhauser(9.0, np.random.default_rng(0))
    trion.hamiltonian(p, s)
    assert trion.liouvillian(p, s).trace_defect() < 1e-12


def test_free_precession_is_exact_larmor():
    p = TrionParams.fitted().with_(b_oh=0.0, g_h=0.0)
    g = trion.liouvillian(p)
    up = qcore.DensityMatrix(np.diag([1, 0, 0, 0]).astype(complex), trion.DIMS, trion.LABELS)
    for t in np.linspace(0, 3, 7):
        r = qcore.propagate(g, t, up).entries
        sz = (r[0, 0] - r[1, 1]).real
        assert abs(sz - math.cos(p.delta_e * t)) < 1e-8


def test_radiative_decay_rate():
    p = TrionParams.ideal(t1=0.2).with_(b=0.0, g_e=0.0)
    g = trion.liouvillian(p)
    tr = qcore.DensityMatrix(np.diag([0, 0, 1, 0]).astype(complex), trion.DIMS, trion.LABELS)
    r = qcore.propagate(g, 0.3, tr).entries
    assert abs(r[2, 2].real - math.exp(-0.3 / 0.2)) < 1e-10
    assert abs(r[0, 0].real - (1 - math.exp(-0.3 / 0.2))) < 1e-10


def test_excitation_pulse_inverts_with_normalized_area():
    u = trion.excitation_unitary(0.0, normalize_pulse_area=True)
    assert abs(abs(u[trion.TRION_UP, trion.UP]) - 1) < 1e-12
    assert np.allclose(u.conj().T @ u, np.eye(4))
    # literal pulse area gives partial inversion
    v = trion.excitation_unitary(0.0)
    assert 0.5 < abs(v[trion.TRION_UP, trion.UP]) ** 2 < 1


def test_channels_trace_preserving():
    p = TrionParams.fitted()
    assert trion.excitation_channel(p).trace_defect() < 1e-12
    assert trion.osrp_channel(p, math.pi).trace_defect() < 1e-12
    s = trion.spin_osrp_channel(p, math.pi)
    rho = np.array([[0.5, 0.5], [0.5, 0.5]], dtype=complex)
    out = qcore.unvec(s @ qcore.vec(rho), 2)
    # pi phase flip with dephasing lambda: coherence -> -lambda/2
    assert np.isclose(np.trace(out), 1)
    assert abs(out[0, 1] + 0.5 * p.lambda_osrp) < 1e-12


def test_spin_free_channel_matches_rotation():
    p = TrionParams.fitted().with_(b_oh=0.0)
    m = trion.spin_free_channel(p, trion.ZERO_FIELD, 0.4)
    out = qcore.unvec(m @ qcore.vec(np.diag([1, 0]).astype(complex)), 2)
    assert abs((out[0, 0] - out[1, 1]).real - math.cos(p.delta_e * 0.4)) < 1e-12
    with pytest.raises(ParameterError):
        trion.spin_free_channel(p, trion.ZERO_FIELD, -1)


def test_dephasing_super_bounds():
    with pytest.raises(ParameterError):
        trion.dephasing_super(trion.SZ_E, 0.0)
    assert np.allclose(trion.dephasing_super(trion.SZ_E, 1.0), np.eye(16))


def test_sample_params_clips_purities():
    rng = np.random.default_rng(0)
    for _ in range(50):
        q = trion.sample_params(TrionParams.fitted(), rng, scale=5.0)
        assert 0 < q.lambda_ex <= 1 and 0 < q.lambda_osrp <= 1 and q.b_oh >= 0


def test_overhauser_sample_validation():
    with pytest.raises(ParameterError):
        trion.OverhauserSample((0.0, math.nan, 0.0))
    assert trion.sample_overhauser(0.0, np.random.default_rng(0)) == trion.ZERO_FIELD
