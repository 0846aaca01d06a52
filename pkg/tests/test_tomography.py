import numpy as np
import pytest

from trionsim import qcore, tomography
from trionsim.tomography import CountTable, MeasurementSetting, TomographyError


def test_settings_and_outcomes():
    s = tomography.complete_settings(2)
    assert len(s) == 9
    assert MeasurementSetting.parse("RL,DA").outcomes() == [("R", "D"), ("R", "A"), ("L", "D"), ("L", "A")]
    with pytest.raises(TomographyError):
        MeasurementSetting(("XY",))


def test_noiseless_reconstruction_is_exact():
    rng = np.random.default_rng(0)
    for n in (1, 2, 3):
        rho = qcore.random_density((2,) * n, rng)
        table = tomography.simulate_counts(rho, tomography.complete_settings(n), None)
        rec = tomography.reconstruct(table)
        assert np.max(np.abs(rec.entries - rho.entries)) < 1e-8


def test_shot_noise_reconstruction_is_physical_and_close():
    rng = np.random.default_rng(1)
    rho = qcore.random_density((2, 2), rng)
    table = tomography.simulate_counts(rho, tomography.complete_settings(2), 20000, seed=3)
    rec = tomography.reconstruct(table)
    rec.validate()
    assert tomography.trace_distance(rec, rho) < 0.03


def test_counts_are_seeded():
    rho = qcore.random_density((2,), np.random.default_rng(2))
    a = tomography.simulate_counts(rho, tomography.complete_settings(1), 100, seed=5)
    b = tomography.simulate_counts(rho, reversed(tomography.complete_settings(1)), 100, seed=5)
    assert a.counts == b.counts


def test_csv_roundtrip():
    rho = qcore.random_density((2, 2), np.random.default_rng(4))
    t = tomography.simulate_counts(rho, tomography.complete_settings(2), 500, seed=1)
    back = CountTable.from_csv(t.to_csv())
    assert back.counts == t.counts
    exact = tomography.simulate_counts(rho, tomography.complete_settings(2), None)
    assert CountTable.from_csv(exact.to_csv()).counts == exact.counts


def test_bad_inputs():
    with pytest.raises(TomographyError):
        CountTable.from_csv("a,b\n1,2\n")
    with pytest.raises(TomographyError):
        CountTable.from_csv("setting,outcome,count\nRL,H,3\n")
    with pytest.raises(TomographyError):
        CountTable.from_csv("setting,outcome,count\nRL,R,-3\n")
    partial = CountTable({("RL", ("R",)): 3, ("RL", ("L",)): 1})
    with pytest.raises(TomographyError):
        tomography.reconstruct(partial)
    with pytest.raises(TomographyError):
        tomography.simulate_counts(np.eye(2), tomography.complete_settings(1), 10)


def test_project_psd():
    m = np.diag([0.7, 0.5, -0.2]).astype(complex)
    out = tomography.project_psd(m)
    assert np.trace(out).real == pytest.approx(1.0)
    assert np.linalg.eigvalsh(out).min() >= -1e-12
    assert np.allclose(np.diag(out).real, [0.6, 0.4, 0.0])
    good = qcore.random_density((2,), np.random.default_rng(5)).entries
    assert np.allclose(tomography.project_psd(good), good)
