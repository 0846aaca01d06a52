import numpy as np
import pytest

from trionsim import fit
from trionsim.fit import FitConfig, FitError
from trionsim.trion import TrionParams


@pytest.fixture(scope="module")
def targets():
    return fit.synthetic_targets(TrionParams.fitted(), ("ghz4", "rlc2"), n_samples=3, seed=2)


def test_synthetic_targets_layout(targets):
    assert [t.name for t in targets] == ["ghz4:RR", "ghz4:RL", "rlc2:RR", "rlc2:RL"]
    for t in targets:
        t.state.validate()


def test_config_validation(targets):
    with pytest.raises(FitError):
        FitConfig([])
    with pytest.raises(FitError):
        FitConfig(targets, {"t1": (0.1, 0.3)})
    with pytest.raises(FitError):
        FitConfig(targets, {"g_e": (0.7, 0.8)})
    with pytest.raises(FitError):
        FitConfig(targets, {"g_e": (0.6, 0.5)})
    with pytest.raises(FitError):
        FitConfig(targets, restarts=0)


def test_default_bounds_clip_purities():
    b = fit.default_bounds(TrionParams.fitted(), ("lambda_osrp", "b_oh"))
    assert b["lambda_osrp"][1] == 1.0
    assert b["b_oh"] == pytest.approx((6.5, 11.5))


def test_objective_vanishes_at_truth(targets):
    cfg = FitConfig(targets, n_samples=3, seed=2)
    obj = fit.Objective(cfg)
    truth = [0.6, 9.0, 0.74]
    assert obj(truth) < 1e-10
    assert obj([0.5, 9.0, 0.74]) > 1e-4


def test_one_parameter_recovery(targets):
    cfg = FitConfig(targets, {"g_e": (0.4, 0.8)}, n_samples=3, seed=2, restarts=2,
                    subsets="leave-one-out")
    res = fit.fit_parameters(cfg)
    assert res.best["g_e"] == pytest.approx(0.6, abs=0.01)
    assert len(res.starts) == 2 and len(res.subsets) == len(targets)
    assert all(b <= a for a, b in zip(res.history, res.history[1:]))
    assert "g_e" in res.to_csv()


def test_config_doc_roundtrip(targets, tmp_path):
    import yaml

    cfg = FitConfig(targets, {"g_e": (0.4, 0.8)}, n_samples=3, seed=2, subsets="none")
    path = tmp_path / "fit.yaml"
    path.write_text(yaml.safe_dump(cfg.to_doc()))
    back = FitConfig.load(path)
    assert back.free == cfg.free and back.subsets == "none"
    assert np.allclose(back.targets[0].state.entries, cfg.targets[0].state.entries)
