import math

import numpy as np
import pytest

from trionsim import qcore, trion, zpg
from trionsim.trion import TrionParams


def _excited_states(n, seed=0):
    """Random emitter states carried through the excitation pulse."""
    rng = np.random.default_rng(seed)
    p = TrionParams.fitted()
    ex = trion.excitation_channel(p)
    out = []
    for _ in range(n):
        g = qcore.random_density((2,), rng).entries
        full = np.zeros((4, 4), dtype=complex)
        full[:2, :2] = g
        out.append(ex.apply(qcore.DensityMatrix(full, trion.DIMS, trion.LABELS)))
    return p, out


def test_quartet_sums_to_unconditioned_state():
    p, states = _excited_states(20)
    L = trion.liouvillian(p)
    for rho in states:
        free = qcore.propagate(L, 0.4, rho).entries
        for axis in zpg.AXES.values():
            q = zpg.threshold_quartet(rho, axis, 0.4, L, p.gamma)
            assert np.max(np.abs(q.total() - free)) < 1e-8


def test_no_double_click_from_one_emission():
    p, states = _excited_states(20, seed=1)
    L = trion.liouvillian(p)
    for rho in states:
        for axis in zpg.AXES.values():
            q = zpg.threshold_quartet(rho, axis, 2.0, L, p.gamma)
            assert q.rho_11.trace <= 1e-6


def test_zero_photon_trace_decreases():
    p, states = _excited_states(5, seed=2)
    L = trion.liouvillian(p)
    for rho in states:
        for axis in zpg.AXES.values():
            traces = [zpg.threshold_quartet(rho, axis, t, L, p.gamma).rho_00.trace
                      for t in np.linspace(0, 1, 11)]
            assert np.all(np.diff(traces) <= 1e-12)


def test_emission_map_choi_is_psd():
    p = TrionParams.fitted()
    rng = np.random.default_rng(3)
    for _ in range(3):
        s = trion.sample_overhauser(p.b_oh, rng)
        m = zpg.emission_process_map(p, s)
        c = m.choi()
        assert np.linalg.eigvalsh(c).min() > -1e-6
        assert np.isclose(np.trace(c).real, 2)


def test_ideal_map_is_spin_photon_entangler():
    p = TrionParams.ideal().with_(b=0.0)
    m = zpg.emission_process_map(p, t=20 * p.t1)
    a, b = 0.6, 0.8j
    psi = np.array([a, b])
    out, prob = m.apply(np.outer(psi, psi.conj()))
    # a|up> + b|down> -> a|R up> + b|L down>, photon first
    target = np.array([a, 0, 0, b])
    assert abs(np.vdot(target, out.entries @ target).real - 1) < 1e-6
    assert prob > 0


def test_map_dict_roundtrip():
    m = zpg.emission_process_map(TrionParams.fitted())
    back = zpg.ProcessMap.from_dict(m.to_dict())
    assert np.array_equal(back.transfer, m.transfer)
    with pytest.raises(ValueError):
        zpg.ProcessMap(np.zeros((4, 4)), 0.1)


def test_then_spin_matches_direct_composition():
    p = TrionParams.fitted()
    m = zpg.emission_process_map(p, t=0.3)
    s = trion.spin_osrp_channel(p, math.pi) @ trion.spin_free_channel(p, trion.ZERO_FIELD, 0.2)
    composed = m.then_spin(s)
    rho = qcore.random_density((2,), np.random.default_rng(4)).entries
    direct = m.apply_unnormalized(rho).reshape(2, 2, 2, 2)
    for a in range(2):
        for c in range(2):
            direct[a, :, c, :] = qcore.unvec(s @ qcore.vec(direct[a, :, c, :]), 2)
    assert np.allclose(composed.apply_unnormalized(rho), direct.reshape(4, 4))


def test_map_before_any_emission_fails():
    p = TrionParams.fitted()
    with pytest.raises(zpg.ZPGError):
        zpg.emission_process_map(p, t=0.0)


def test_photon_pauli_state_identity():
    c = np.zeros((4, 4))
    c[0, 0] = 1
    assert np.allclose(zpg.photon_pauli_state(c), np.eye(4) / 4)
