"""Derivative-free fit of model parameters to target density matrices."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import yaml
from scipy.optimize import minimize

from . import metrics, protocol, trion
from .qcore import DensityMatrix, density_from_dict, density_to_dict

log = logging.getLogger(__name__)

FITTABLE = tuple(trion.FIT_UNCERTAINTY)


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class FitTarget:
    """A target state: photons #2-#3 after ``readout`` when ``readout`` is set, else the full register."""

    program: protocol.PulseProgram
    state: DensityMatrix
    readout: str | None = None
    name: str = ""

    def simulate(self, js: protocol.JointState) -> np.ndarray:
        if self.readout is None:
            return js.rho.entries
        return protocol.herald_and_readout(js, self.readout)[0].entries


@dataclass
class FitConfig:
    targets: list
    free: dict = field(default_factory=dict)  # name -> (low, high)
    base: trion.TrionParams = field(default_factory=trion.TrionParams.fitted)
    n_samples: int = 100
    restarts: int = 3
    seed: int = 0
    max_iter: int = 300
    subsets: str = "leave-one-out"

    def __post_init__(self):
        if not self.targets:
            raise FitError("need at least one target")
        if not self.free:
            self.free = default_bounds(self.base, ("g_e", "b_oh", "lambda_osrp"))
        for name, (lo, hi) in self.free.items():
            if name not in FITTABLE:
                raise FitError(f"{name!r} is not a fittable parameter")
            if not lo < hi:
                raise FitError(f"empty bounds for {name}")
            v = getattr(self.base, name)
            if not lo <= v <= hi:
                raise FitError(f"initial {name}={v} outside its bounds [{lo}, {hi}]")
        if self.restarts < 1:
            raise FitError("restarts must be at least 1")
        if self.subsets not in ("leave-one-out", "none"):
            raise FitError(f"unknown subsets mode {self.subsets!r}")

    def to_doc(self) -> dict:
        return {
            "free": {k: [float(lo), float(hi)] for k, (lo, hi) in self.free.items()},
            "base": self.base.to_doc(),
            "n_samples": self.n_samples,
            "restarts": self.restarts,
            "seed": self.seed,
            "max_iter": self.max_iter,
            "subsets": self.subsets,
            "targets": [{"name": t.name, "program": t.program.to_doc(), "readout": t.readout,
                         "state": density_to_dict(t.state)} for t in self.targets],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "FitConfig":
        targets = [FitTarget(protocol.PulseProgram.from_doc(t["program"]),
                             density_from_dict(t["state"]), t.get("readout"), t.get("name", ""))
                   for t in doc.get("targets", [])]
        base = trion.TrionParams.from_doc(doc["base"]) if "base" in doc else trion.TrionParams.fitted()
        free = {k: tuple(v) for k, v in doc.get("free", {}).items()}
        return cls(targets, free, base, int(doc.get("n_samples", 100)), int(doc.get("restarts", 3)),
                   int(doc.get("seed", 0)), int(doc.get("max_iter", 300)),
                   doc.get("subsets", "leave-one-out"))

    @classmethod
    def load(cls, path) -> "FitConfig":
        with open(path) as fh:
            return cls.from_doc(yaml.safe_load(fh))


@dataclass
class FitResult:
    mean: dict
    std: dict
    objective: float
    fidelities: list
    subsets: list
    best: dict
    history: list = field(default_factory=list)
    converged: bool = True
    starts: list = field(default_factory=list)  # per start: initial point, end point, objective

    def to_doc(self) -> dict:
        return {
            "mean": self.mean, "std": self.std, "best": self.best,
            "objective": self.objective, "fidelities": self.fidelities,
            "subsets": self.subsets, "history": self.history, "converged": self.converged,
            "starts": self.starts,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["parameter", "fitted", "std", "best"])
        for k in self.mean:
            w.writerow([k, f"{self.mean[k]:.6g}", f"{self.std[k]:.3g}", f"{self.best[k]:.6g}"])
        return buf.getvalue()


def default_bounds(base: trion.TrionParams, names: Sequence[str], width: float = 5.0) -> dict:
    """``value +- width`` standard deviations, clipped to the physical range."""
    out = {}
    for n in names:
        v, sd = getattr(base, n), trion.FIT_UNCERTAINTY[n]
        lo, hi = v - width * sd, v + width * sd
        if n.startswith("lambda"):
            lo, hi = max(lo, 1e-3), min(hi, 1.0)
        elif n in ("b_oh", "g_e", "g_h"):
            lo = max(lo, 0.0)
        out[n] = (lo, hi)
    return out


def synthetic_targets(p: trion.TrionParams, names: Sequence[str] = ("lc4", "ghz4", "rlc1", "rlc2"),
                      n_samples: int = 300, seed=0) -> list[FitTarget]:
    """Heralded photon-pair states of the presets for every table condition."""
    progs, keys = [], []
    for name in names:
        for h in sorted({h for h, _ in metrics.TABLE_CONDITIONS[name]}):
            progs.append(protocol.preset(name, p.tau_ex, p.tau_osrp).with_herald(h))
            keys.append((name, h))
    states = protocol.average_programs(p, progs, n_samples, seed)
    out = []
    for (name, h), prog, js in zip(keys, progs, states):
        for hh, ro in metrics.TABLE_CONDITIONS[name]:
            if hh == h:
                pair, _ = protocol.herald_and_readout(js, ro)
                out.append(FitTarget(prog, pair, ro, f"{name}:{h}{ro}"))
    return out


class Objective:
    """``1 - mean fidelity`` over targets, with fixed Overhauser draws (common random numbers)."""

    def __init__(self, cfg: FitConfig, targets: Sequence[FitTarget] | None = None):
        self.cfg = cfg
        self.targets = list(cfg.targets if targets is None else targets)
        self.names = list(cfg.free)
        self.calls = 0
        # unique programs, simulated once per call
        self.programs: list = []
        for t in self.targets:
            if t.program not in self.programs:
                self.programs.append(t.program)

    def params(self, x: Sequence[float]) -> trion.TrionParams:
        return self.cfg.base.with_(**dict(zip(self.names, (float(v) for v in x))))

    def fidelities(self, x: Sequence[float]) -> list[float]:
        p = self.params(x)
        states = protocol.average_programs(p, self.programs, self.cfg.n_samples, self.cfg.seed)
        by_prog = dict(zip(range(len(self.programs)), states))
        out = []
        for t in self.targets:
            js = by_prog[self.programs.index(t.program)]
            out.append(metrics.uhlmann_fidelity(t.simulate(js), t.state))
        return out

    def __call__(self, x: Sequence[float]) -> float:
        self.calls += 1
        try:
            return 1.0 - float(np.mean(self.fidelities(x)))
        except trion.ParameterError:
            return 1.0


def _scaled(cfg: FitConfig):
    """Map between parameters and unit-uncertainty coordinates."""
    names = list(cfg.free)
    scale = np.array([trion.FIT_UNCERTAINTY[n] for n in names])
    lo = np.array([cfg.free[n][0] for n in names]) / scale
    hi = np.array([cfg.free[n][1] for n in names]) / scale
    return names, scale, list(zip(lo, hi))


def _local_fit(obj: Objective, x0: np.ndarray, scale: np.ndarray, bounds, max_iter: int,
               rounds: int = 3):
    """Nelder-Mead in unit-uncertainty coordinates, restarted from its own result.

    A fresh simplex around the previous optimum lets the search leave a
    collapsed simplex, which happens when a start sits against a bound.
    """
    z, f, ok = x0 / scale, math.inf, False
    for _ in range(rounds):
        res = minimize(lambda v: obj(v * scale), z, method="Nelder-Mead", bounds=bounds,
                       options={"maxiter": max_iter, "xatol": 0.02, "fatol": 1e-6})
        improved = f - float(res.fun)
        z, f, ok = res.x, float(res.fun), bool(res.success)
        if improved < 1e-6:
            break
    return z * scale, f, ok


def _initial_points(cfg: FitConfig, rng: np.random.Generator, names, n: int) -> list[np.ndarray]:
    """Uniform draws within the bounds."""
    return [np.array([rng.uniform(*cfg.free[k]) for k in names]) for _ in range(n)]


def _best_of(obj: Objective, starts, scale, bounds, max_iter):
    best_x, best_f, ok = None, math.inf, False
    history, runs = [], []
    for x0 in starts:
        x, f, success = _local_fit(obj, x0, scale, bounds, max_iter)
        runs.append((x0, x, f))
        if f < best_f:
            best_x, best_f, ok = x, f, success
        # best-so-far objective, nonincreasing by construction
        history.append(best_f)
    return best_x, best_f, ok, history, runs


def fit_parameters(cfg: FitConfig, initial_points: Sequence[Sequence[float]] | None = None) -> FitResult:
    """Best parameters over restarts, and their spread over leave-one-target-out refits."""
    names, scale, bounds = _scaled(cfg)
    rng = np.random.default_rng(cfg.seed)
    obj = Objective(cfg)
    starts = ([np.asarray(s, dtype=float) for s in initial_points] if initial_points is not None
              else _initial_points(cfg, rng, names, cfg.restarts))
    best_x, best_f, ok, history, runs = _best_of(obj, starts, scale, bounds, cfg.max_iter)
    if not ok:
        log.warning("simplex search hit its iteration limit; reporting the best point found")
    fids = obj.fidelities(best_x)

    subsets = []
    refits = []
    if cfg.subsets == "leave-one-out" and len(cfg.targets) > 1:
        for k in range(len(cfg.targets)):
            keep = [t for i, t in enumerate(cfg.targets) if i != k]
            sub = Objective(cfg, keep)
            x, _, _ = _local_fit(sub, best_x, scale, bounds, cfg.max_iter)
            subsets.append([t.name for t in keep])
            refits.append(x)
    if refits:
        arr = np.array(refits)
        mean = arr.mean(axis=0)
        std = arr.std(axis=0, ddof=1) if len(arr) > 1 else np.zeros(len(names))
    else:
        mean, std = best_x, np.zeros(len(names))
    return FitResult(
        mean={n: float(v) for n, v in zip(names, mean)},
        std={n: float(v) for n, v in zip(names, std)},
        objective=best_f,
        fidelities=[float(f) for f in fids],
        subsets=subsets,
        best={n: float(v) for n, v in zip(names, best_x)},
        history=history,
        converged=ok,
        starts=[{"initial": {n: float(v) for n, v in zip(names, a)},
                 "final": {n: float(v) for n, v in zip(names, b)}, "objective": f}
                for a, b, f in runs],
    )
