import itertools
import math

import numpy as np
import pytest

from trionsim import ideal, protocol
from trionsim.protocol import Excite, Osrp, EndSequence, ProgramError, PulseProgram
from trionsim.trion import TrionParams


def test_program_validation():
    with pytest.raises(ProgramError):
        PulseProgram((Osrp(0.1), Excite(0.2)))
    with pytest.raises(ProgramError):
        PulseProgram((Excite(0.0), Excite(0.0)))
    with pytest.raises(ProgramError):
        PulseProgram((Excite(0.0), EndSequence(0.5), Excite(0.6)))
    with pytest.raises(ProgramError):
        PulseProgram((Excite(0.0),), herald_basis="H")
    with pytest.raises(ProgramError):
        protocol.preset("nope")


def test_end_sequence_sets_evaluation_time():
    prog = PulseProgram((Excite(0.0), Excite(0.6), EndSequence(1.0)))
    assert prog.evaluation_time == pytest.approx(0.4)


def test_intervals_of_ghz_preset():
    ivs = protocol.preset("ghz4").intervals()
    assert [round(d, 9) for d, _ in ivs] == [0.6] * 4
    assert ivs[1][1] == ((pytest.approx(0.3), math.pi),)
    assert ivs[0][1] == () and ivs[3][1] == ()


def test_yaml_roundtrip(tmp_path):
    import yaml

    prog = protocol.preset("visibility-scan", phi2=0.5 * math.pi)
    path = tmp_path / "prog.yaml"
    path.write_text(yaml.safe_dump(prog.to_doc()))
    back = PulseProgram.load(path)
    assert back.to_doc() == prog.to_doc()
    with pytest.raises(ProgramError):
        PulseProgram.from_doc({"events": [{"type": "laser", "at_ps": 0}]})


@pytest.mark.parametrize("name", ["lc4", "ghz4", "rlc1", "rlc2"])
def test_program_gates_reproduce_protocol_states(name):
    k = protocol.target_state(protocol.preset(name))
    assert abs(ideal.overlap(k, ideal.closed_form_state(name)) - 1) < 1e-12


def test_ideal_limit_sequence_reaches_target():
    p = TrionParams.ideal()
    prog = protocol.preset("lc4")
    js = protocol.run_sequence(p, prog)
    tgt = ideal.evolve_spin(protocol.target_state(prog), p.delta_e * prog.evaluation_time)
    v = tgt.amplitudes
    assert np.vdot(v, js.rho.entries @ v).real > 0.999
    assert js.n_photons == 3
    assert js.probability == pytest.approx(0.5, abs=1e-3)


def test_cache_reuses_maps_and_modes_agree_without_osrp():
    p = TrionParams.fitted()
    cache = protocol.MapCache(p, protocol.trion.ZERO_FIELD)
    m1 = cache.get(0.6, ())
    assert cache.get(0.6 + 1e-12, ()) is m1
    other = protocol.MapCache(p, protocol.trion.ZERO_FIELD, "in-map")
    assert np.allclose(other.get(0.6, ()).transfer, m1.transfer)
    with pytest.raises(ProgramError):
        protocol.MapCache(p, protocol.trion.ZERO_FIELD, "bogus")


def test_sampling_is_seeded():
    p = TrionParams.fitted()
    a = protocol._samples(p, 4, 3)
    assert a == protocol._samples(p, 4, 3)
    assert a != protocol._samples(p, 4, 4)
    assert protocol._samples(p.with_(b_oh=0.0), 10, 0) == [protocol.trion.ZERO_FIELD]
    with pytest.raises(ProgramError):
        protocol._samples(p, 0, 0)


def test_herald_and_readout_gives_normalized_pair():
    p = TrionParams.fitted()
    js = protocol.overhauser_average(p, protocol.preset("lc4"), 3, seed=0)
    pr, pl = 0.0, 0.0
    for ro in "RL":
        pair, prob = protocol.herald_and_readout(js, ro)
        pair.validate()
        pr, pl = (prob, pl) if ro == "R" else (pr, prob)
    assert pr + pl == pytest.approx(1.0)
    with pytest.raises(ProgramError):
        protocol.herald_and_readout(js, "H")


def test_pattern_probabilities_sum_to_one():
    js = protocol.run_sequence(TrionParams.fitted(), protocol.preset("ghz4"))
    pats = ["".join(x) for x in itertools.product("RL", repeat=3)]
    probs = protocol.pattern_probabilities(js, pats)
    assert sum(probs.values()) == pytest.approx(1.0)
    with pytest.raises(ProgramError):
        protocol.pattern_probabilities(js, ["RRRR"])


def test_sz_trace_starts_near_one_and_precesses():
    p = TrionParams.fitted().with_(b_oh=0.0)
    d = np.array([0.02, p.larmor_period / 2])
    sz = protocol.spin_sz_trace(p, d, n_samples=1)
    assert sz[0] > 0.8
    assert sz[1] < -0.5
    with pytest.raises(ProgramError):
        protocol.spin_sz_trace(p, [0.0])


def test_osrp_power_scan_refocuses_precession():
    p = TrionParams.ideal(t1=1e-3)
    # half a Larmor period flips the spin; a pi phase flip at mid-delay undoes the rotation
    sz = protocol.osrp_power_scan(p, p.larmor_period / 2, [0.0, math.pi], n_samples=1)
    assert sz[0] < -0.99
    assert sz[1] > 0.99
