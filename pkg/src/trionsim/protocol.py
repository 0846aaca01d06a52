"""Pulse programs compiled into multipartite spin-photon density matrices.

A program is a time-ordered list of excitation pulses and OSRPs.  Each
excitation opens an interval that ends at the next excitation (or at the
evaluation time after the last one); the interval is simulated as a single
emission process map with any OSRPs inside it applied at their timestamps.
Photon #1 heralds the spin and is consumed; later photons are kept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from . import ideal, trion, zpg
from .qcore import DensityMatrix, partial_trace

MAX_PHOTONS = 14
_T_DIGITS = 9


class ProgramError(ValueError):
    pass


@dataclass(frozen=True)
class Excite:
    at: float


@dataclass(frozen=True)
class Osrp:
    """Spin rotation pulse; ``angle`` is nominal, ``pi`` meaning a calibrated Z gate."""

    at: float
    angle: float = math.pi


@dataclass(frozen=True)
class EndSequence:
    at: float


@dataclass(frozen=True)
class PulseProgram:
    events: tuple
    herald_basis: str = "R"
    readout_basis: str = "RL"
    evaluation_time: float = 0.6
    name: str = ""

    def __post_init__(self):
        events = tuple(self.events)
        object.__setattr__(self, "events", events)
        if not events or not isinstance(events[0], Excite):
            raise ProgramError("a program must start with an excitation pulse")
        times = [e.at for e in events]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ProgramError(f"event times must strictly increase: {times}")
        ends = [i for i, e in enumerate(events) if isinstance(e, EndSequence)]
        if ends and ends != [len(events) - 1]:
            raise ProgramError("EndSequence must be the final event")
        if self.herald_basis not in ("R", "L"):
            raise ProgramError(f"herald basis must be R or L, got {self.herald_basis!r}")
        if self.evaluation_time < 0:
            raise ProgramError("evaluation time must be non-negative")
        if ends:
            last = max(e.at for e in events if isinstance(e, Excite))
            object.__setattr__(self, "evaluation_time", events[-1].at - last)

    @property
    def n_excitations(self) -> int:
        return sum(isinstance(e, Excite) for e in self.events)

    def intervals(self) -> list[tuple[float, tuple[tuple[float, float], ...]]]:
        """``(duration, ((offset, nominal angle), ...))`` for each excitation."""
        excites = [e.at for e in self.events if isinstance(e, Excite)]
        bounds = excites[1:] + [excites[-1] + self.evaluation_time]
        out = []
        for start, stop in zip(excites, bounds):
            pulses = tuple((o.at - start, o.angle) for o in self.events
                           if isinstance(o, Osrp) and start < o.at < stop)
            out.append((stop - start, pulses))
        stray = [o.at for o in self.events if isinstance(o, Osrp) and o.at >= bounds[-1]]
        if stray:
            raise ProgramError(f"OSRPs at {stray} fall after the evaluation time")
        return out

    def with_herald(self, basis: str) -> "PulseProgram":
        return replace(self, herald_basis=basis)

    def to_doc(self) -> dict:
        ev = []
        for e in self.events:
            if isinstance(e, Excite):
                ev.append({"type": "excite", "at_ps": round(e.at * 1e3, 6)})
            elif isinstance(e, Osrp):
                ev.append({"type": "osrp", "at_ps": round(e.at * 1e3, 6),
                           "angle_pi": round(e.angle / math.pi, 12)})
            else:
                ev.append({"type": "end", "at_ps": round(e.at * 1e3, 6)})
        return {"name": self.name, "events": ev, "herald": self.herald_basis,
                "readout": self.readout_basis,
                "evaluation_ps": round(self.evaluation_time * 1e3, 6)}

    @classmethod
    def from_doc(cls, doc: dict) -> "PulseProgram":
        if not isinstance(doc, dict) or "events" not in doc:
            raise ProgramError("program document needs an 'events' list")
        events = []
        for e in doc["events"]:
            kind = e.get("type")
            at = float(e["at_ps"]) * 1e-3
            if kind == "excite":
                events.append(Excite(at))
            elif kind == "osrp":
                events.append(Osrp(at, float(e.get("angle_pi", 1.0)) * math.pi))
            elif kind == "end":
                events.append(EndSequence(at))
            else:
                raise ProgramError(f"unknown event type {kind!r}")
        return cls(tuple(events), doc.get("herald", "R"), doc.get("readout", "RL"),
                   float(doc.get("evaluation_ps", 600)) * 1e-3, doc.get("name", ""))

    @classmethod
    def load(cls, path) -> "PulseProgram":
        return cls.from_doc(yaml.safe_load(Path(path).read_text()))


def _four_photon(name: str, osrp_after: Sequence[int], tau: float, tau_osrp: float) -> PulseProgram:
    events = [Excite(k * tau) for k in range(4)]
    events += [Osrp(k * tau + tau_osrp) for k in osrp_after]
    events.sort(key=lambda e: e.at)
    return PulseProgram(tuple(events), evaluation_time=tau, name=name)


def visibility_program(phi2: float, tau: float = 0.6, tau_osrp: float = 0.3,
                       tau_pi: float | None = None) -> PulseProgram:
    """theta_1 = pi/2 with a pi OSRP, then theta_2 = pi with an OSRP of angle ``phi2`` at its middle.

    ``tau_pi`` is the delay giving a pi precession (default ``2 tau``).
    """
    tau_pi = 2 * tau if tau_pi is None else tau_pi
    events = (Excite(0.0), Excite(tau), Osrp(tau + tau_osrp, math.pi), Excite(2 * tau),
              Osrp(2 * tau + tau_pi / 2, phi2), Excite(2 * tau + tau_pi))
    return PulseProgram(events, evaluation_time=tau, name="visibility-scan")


def calibrated_pi_delay(p: trion.TrionParams) -> float:
    """Pulse delay for a pi precession, given that ``tau_ex`` is calibrated as pi/2.

    Emission delays shift the effective rotation by a fixed offset per
    interval, so a pi rotation needs one more quarter Larmor period.
    """
    return p.tau_ex + math.pi / (2 * p.delta_e)


def preset(name: str, tau: float = 0.6, tau_osrp: float = 0.3, phi2: float = 0.0,
           tau_pi: float | None = None) -> PulseProgram:
    """Named programs: lc4, ghz4, rlc1, rlc2 and visibility-scan."""
    # OSRPs follow the excitation of photon #2 (index 1) and/or #3 (index 2)
    table = {"lc4": (), "ghz4": (1, 2), "rlc1": (1,), "rlc2": (2,)}
    if name in table:
        return _four_photon(name, table[name], tau, tau_osrp)
    if name == "visibility-scan":
        return visibility_program(phi2, tau, tau_osrp, tau_pi)
    raise ProgramError(f"unknown preset {name!r}")


PRESETS = ("lc4", "ghz4", "rlc1", "rlc2", "visibility-scan")


def program_to_gates(prog: PulseProgram, tau_quarter: float = 0.6) -> tuple[str, list[ideal.Gate]]:
    """Ideal initial spin and gate list for a program.

    Free precession over ``tau_quarter`` counts as ``R_y(pi/2)``; an OSRP of
    nominal angle pi becomes ``Z``, other angles become ``R_z``.
    """
    init = "up" if prog.herald_basis == "R" else "down"
    gates: list[ideal.Gate] = []
    ivs = prog.intervals()
    for k, (duration, pulses) in enumerate(ivs[:-1]):
        if k > 0:
            gates.append(ideal.Es())
        now = 0.0
        for offset, angle in pulses:
            gates.append(ideal.Ry(math.pi / 2 * (offset - now) / tau_quarter))
            gates.append(ideal.Z() if abs(angle - math.pi) < 1e-12 else ideal.Rz(angle))
            now = offset
        gates.append(ideal.Ry(math.pi / 2 * (duration - now) / tau_quarter))
    if len(ivs) > 1:
        gates.append(ideal.Es())
    # merge consecutive rotations and drop identities
    merged: list[ideal.Gate] = []
    for g in gates:
        if g.kind == "Ry" and merged and merged[-1].kind == "Ry":
            merged[-1] = ideal.Ry(merged[-1].angle + g.angle)
        else:
            merged.append(g)
    return init, [g for g in merged if not (g.kind == "Ry" and abs(g.angle) < 1e-12)]


def target_state(prog: PulseProgram, tau_quarter: float = 0.6):
    init, gates = program_to_gates(prog, tau_quarter)
    return ideal.ideal_protocol_state(gates, init)


@dataclass(frozen=True)
class JointState:
    """Heralded register over ``(photon_2, ..., photon_n, spin)``."""

    rho: DensityMatrix
    probability: float = 1.0
    heralded: bool = True

    @property
    def n_photons(self) -> int:
        return len(self.rho.labels) - 1


OSRP_MODES = ("post-selected", "in-map")


class MapCache:
    """Process maps keyed by interval structure, for one parameter set and field sample.

    In the default ``"post-selected"`` mode an interval with OSRPs is built
    from the emission map evaluated at the first OSRP, followed by spin-qubit
    rotations and free precession; the photon is thus required to have been
    detected before the first rotation.  ``"in-map"`` instead fires the OSRPs
    inside the emitter evolution, where they miss any population still in the
    trion.
    """

    def __init__(self, params: trion.TrionParams, sample: trion.OverhauserSample,
                 osrp_mode: str = "post-selected"):
        if osrp_mode not in OSRP_MODES:
            raise ProgramError(f"osrp_mode must be one of {OSRP_MODES}")
        self.params = params
        self.sample = sample
        self.osrp_mode = osrp_mode
        self._maps: dict = {}

    def get(self, duration: float, pulses) -> zpg.ProcessMap:
        p = self.params
        actual = tuple((round(o, _T_DIGITS), round(a * p.theta_osrp / math.pi, 12)) for o, a in pulses)
        key = (round(duration, _T_DIGITS), actual)
        if key not in self._maps:
            self._maps[key] = self._build(key[0], actual)
        return self._maps[key]

    def _build(self, duration, actual) -> zpg.ProcessMap:
        p, s = self.params, self.sample
        if not actual or self.osrp_mode == "in-map":
            return zpg.emission_process_map(p, s, duration, actual)
        now = actual[0][0]
        pm = zpg.emission_process_map(p, s, now)
        for at, theta in actual:
            if at > now:
                pm = pm.then_spin(trion.spin_free_channel(p, s, at - now))
            pm = pm.then_spin(trion.spin_osrp_channel(p, theta))
            now = at
        pm = pm.then_spin(trion.spin_free_channel(p, s, duration - now))
        return zpg.ProcessMap(pm.transfer, duration)


def run_sequence(p: trion.TrionParams, prog: PulseProgram,
                 s: trion.OverhauserSample = trion.ZERO_FIELD, cache: MapCache | None = None,
                 osrp_mode: str = "post-selected") -> JointState:
    """Simulate one program for one Overhauser sample, starting from a fully mixed spin."""
    if prog.n_excitations < 1:
        raise ProgramError("program has no excitation pulse")
    if prog.n_excitations - 1 > MAX_PHOTONS:
        raise ProgramError(f"register limited to {MAX_PHOTONS} photons")
    cache = cache or MapCache(p, s, osrp_mode)
    ivs = prog.intervals()
    first = cache.get(*ivs[0]).apply_unnormalized(np.eye(2) / 2)
    k = 0 if prog.herald_basis == "R" else 1
    spin = first.reshape(2, 2, 2, 2)[k, :, k, :]
    herald_prob = float(np.trace(spin).real / np.trace(first).real)
    rho = spin / np.trace(spin).real
    d = 1
    for duration, pulses in ivs[1:]:
        rho = cache.get(duration, pulses).extend(rho, d)
        rho = rho / np.trace(rho).real
        d *= 2
    n = int(round(math.log2(d)))
    labels = ideal.photon_labels(n) + ("spin",)
    return JointState(DensityMatrix((rho + rho.conj().T) / 2, (2,) * (n + 1), labels), herald_prob)


def _samples(p: trion.TrionParams, n_samples: int, seed) -> list[trion.OverhauserSample]:
    if n_samples < 1:
        raise ProgramError("n_samples must be at least 1")
    if p.b_oh == 0:
        return [trion.ZERO_FIELD]
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = ss.spawn(n_samples)
    return [trion.sample_overhauser(p.b_oh, np.random.default_rng(c)) for c in children]


def average_programs(p: trion.TrionParams, programs: Sequence[PulseProgram], n_samples: int,
                     seed=0, osrp_mode: str = "post-selected") -> list[JointState]:
    """Overhauser-averaged states for several programs sharing the same field samples."""
    acc = [None] * len(programs)
    probs = np.zeros(len(programs))
    samples = _samples(p, n_samples, seed)
    for s in samples:
        cache = MapCache(p, s, osrp_mode)
        for i, prog in enumerate(programs):
            js = run_sequence(p, prog, s, cache)
            acc[i] = js.rho.entries if acc[i] is None else acc[i] + js.rho.entries
            probs[i] += js.probability
    out = []
    for i, js_sum in enumerate(acc):
        m = js_sum / len(samples)
        labels = ideal.photon_labels(programs[i].n_excitations - 1) + ("spin",)
        out.append(JointState(DensityMatrix(m, (2,) * len(labels), labels), probs[i] / len(samples)))
    return out


def overhauser_average(p: trion.TrionParams, prog: PulseProgram, n_samples: int, seed=0,
                       osrp_mode: str = "post-selected") -> JointState:
    return average_programs(p, [prog], n_samples, seed, osrp_mode)[0]


def herald_and_readout(js: JointState, readout: str) -> tuple[DensityMatrix, float]:
    """Measure the last photon in R/L, trace out it and the spin; return the normalized pair state."""
    if readout not in ("R", "L"):
        raise ProgramError("readout must be R or L")
    if js.n_photons < 3:
        raise ProgramError("readout needs at least three photons in the register")
    rho = js.rho
    n = rho.dim // 4
    k = 0 if readout == "R" else 1
    r = rho.entries.reshape(n, 2, 2, n, 2, 2)
    branch = np.einsum("asbs->ab", r[:, k, :, :, k, :])
    prob = float(np.trace(branch).real)
    labels = rho.labels[:-2]
    out = DensityMatrix(branch / prob, rho.dims[:-2], labels)
    return out, prob


def photon_marginal(js: JointState) -> DensityMatrix:
    return partial_trace(js.rho, js.rho.labels[:-1])


def pattern_probabilities(js: JointState, patterns: Sequence[str]) -> dict:
    """Probability of each R/L string on the register photons (spin traced)."""
    diag = photon_marginal(js).entries.diagonal().real
    out = {}
    for pat in patterns:
        if len(pat) != js.n_photons or set(pat) - {"R", "L"}:
            raise ProgramError(f"pattern {pat!r} must be {js.n_photons} letters from R/L")
        idx = int("".join("0" if c == "R" else "1" for c in pat), 2)
        out[pat] = float(diag[idx])
    return out


def spin_sz_trace(p: trion.TrionParams, delays: Sequence[float], osrp_theta: float | None = None,
                  n_samples: int = 100, seed=0, window: float | None = None) -> np.ndarray:
    """Conditional ``S_z = (I_R - I_L)/(I_R + I_L)`` of photon #2 after heralding R on photon #1.

    Two excitations separated by each delay; if ``osrp_theta`` is given an
    OSRP of that nominal angle sits at the middle of the delay.  Photon #2 is
    collected for ``window`` (default ten lifetimes).
    """
    window = 10 * p.t1 if window is None else window
    progs = []
    for d in delays:
        if d <= 0:
            raise ProgramError("delays must be positive")
        ev = [Excite(0.0), Excite(d)]
        if osrp_theta is not None:
            ev.insert(1, Osrp(d / 2, osrp_theta))
        progs.append(PulseProgram(tuple(ev), evaluation_time=window))
    return _photon2_sz(p, progs, n_samples, seed)


def osrp_power_scan(p: trion.TrionParams, delay: float, thetas: Sequence[float],
                    n_samples: int = 100, seed=0, window: float | None = None) -> np.ndarray:
    """Conditional ``S_z`` of photon #2 for the 3-pulse sequence with an OSRP of each nominal angle."""
    window = 10 * p.t1 if window is None else window
    if delay <= 0:
        raise ProgramError("delay must be positive")
    progs = [PulseProgram((Excite(0.0), Osrp(delay / 2, float(th)), Excite(delay)),
                          evaluation_time=window) for th in thetas]
    return _photon2_sz(p, progs, n_samples, seed)


def _photon2_sz(p, progs, n_samples, seed) -> np.ndarray:
    states = average_programs(p, progs, n_samples, seed)
    out = []
    for js in states:
        ph = partial_trace(js.rho, [js.rho.labels[0]]).entries.real
        out.append((ph[0, 0] - ph[1, 1]) / (ph[0, 0] + ph[1, 1]))
    return np.array(out)
