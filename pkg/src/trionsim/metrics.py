"""Figures of merit: fidelity, concurrence, visibility and the fidelity summary table."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from . import ideal, protocol, trion
from .qcore import DensityMatrix, Ket, QCoreError, PSD_TOL

SY2 = np.array([[0, 0, 0, -1], [0, 0, 1, 0], [0, 1, 0, 0], [-1, 0, 0, 0]], dtype=complex)
TIME_STEP = 1e-3  # 1 ps grid for the target time shift

VISIBILITY_KEYS = ("RRRR", "RLLL", "RRRL", "RLLR")


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class FidelityReport:
    value: float
    target: str
    t: float
    shift: float = 0.0
    uncertainty: float | None = None

    def __post_init__(self):
        if not -1e-10 <= self.value <= 1 + 1e-10:
            raise MetricError(f"fidelity {self.value} outside [0, 1]")


def _entries(rho) -> np.ndarray:
    return rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)


def _amplitudes(psi) -> np.ndarray:
    return psi.amplitudes if isinstance(psi, Ket) else np.asarray(psi, dtype=complex).ravel()


def fidelity(rho, target) -> float:
    """``<psi|rho|psi>`` for a pure target."""
    m, v = _entries(rho), _amplitudes(target)
    if m.shape != (v.size, v.size):
        raise MetricError(f"dimension mismatch: state {m.shape}, target {v.size}")
    return float(np.clip(np.vdot(v, m @ v).real, 0.0, 1.0))


def uhlmann_fidelity(rho, sigma) -> float:
    """``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`` for two mixed states."""
    a, b = _entries(rho), _entries(sigma)
    if a.shape != b.shape:
        raise MetricError("dimension mismatch")
    ev, vecs = np.linalg.eigh((a + a.conj().T) / 2)
    sa = (vecs * np.sqrt(np.clip(ev, 0, None))) @ vecs.conj().T
    inner = np.linalg.eigvalsh(sa @ b @ sa)
    return float(min(np.sum(np.sqrt(np.clip(inner, 0, None))) ** 2, 1.0))


def concurrence(rho) -> float:
    """Wootters concurrence of a two-qubit state."""
    m = _entries(rho)
    if m.shape != (4, 4):
        raise MetricError("concurrence needs a 4x4 density matrix")
    if np.linalg.eigvalsh((m + m.conj().T) / 2).min() < -PSD_TOL:
        raise QCoreError("state is not positive semidefinite")
    r = m @ SY2 @ m.conj() @ SY2
    lam = np.sort(np.sqrt(np.clip(np.linalg.eigvals(r).real, 0, None)))[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def visibility(counts: Mapping[str, float]) -> float:
    """Signed contrast (C_RRRR + C_RLLL - C_RRRL - C_RLLR) / sum."""
    c = [float(counts[k]) for k in VISIBILITY_KEYS]
    if min(c) < 0:
        raise MetricError("counts must be non-negative")
    total = sum(c)
    if total <= 0:
        raise MetricError("visibility undefined for zero counts")
    return (c[0] + c[1] - c[2] - c[3]) / total


def visibility_from_joint(js: protocol.JointState) -> float:
    """Visibility of a heralded 3-photon register; the leading R is the herald."""
    if js.n_photons != 3:
        raise MetricError("visibility needs photons #2-#4")
    probs = protocol.pattern_probabilities(js, [k[1:] for k in VISIBILITY_KEYS])
    return visibility({k: probs[k[1:]] for k in VISIBILITY_KEYS})


def max_fidelity_timeshift(rho_of_t, target_of_t: Callable[[float], Ket], t: float,
                           window: float, step: float = TIME_STEP,
                           target: str = "") -> FidelityReport:
    """Best fidelity of the state at ``t`` against targets evolved to ``t + s``, ``|s| <= window``."""
    if window < 0:
        raise MetricError("window must be non-negative")
    rho = rho_of_t(t) if callable(rho_of_t) else rho_of_t
    n = int(round(window / step))
    shifts = np.arange(-n, n + 1) * step
    if shifts.size == 0:
        raise MetricError("empty shift grid")
    values = [fidelity(rho, target_of_t(t + s)) for s in shifts]
    k = int(np.argmax(values))
    return FidelityReport(values[k], target, t, float(shifts[k]))


def two_photon_target(prog: protocol.PulseProgram, readout: str) -> np.ndarray:
    """Ideal photons #2-#3 state after reading photon #4 in ``readout`` and tracing the spin."""
    psi = protocol.target_state(prog).amplitudes.reshape(-1, 2, 2)[:, "RL".index(readout), :]
    rho = psi @ psi.conj().T
    return rho / np.trace(rho).real


def two_photon_fidelity(js: protocol.JointState, prog: protocol.PulseProgram, readout: str):
    """(fidelity, concurrence, branch probability) of the heralded photon pair.

    The ideal pair state is pure for every preset, so the fidelity is
    ``<psi|rho|psi>`` with ``psi`` its leading eigenvector.
    """
    pair, prob = protocol.herald_and_readout(js, readout)
    ev, vecs = np.linalg.eigh(two_photon_target(prog, readout))
    if ev[-1] < 1 - 1e-9:
        return uhlmann_fidelity(pair, two_photon_target(prog, readout)), concurrence(pair), prob
    return fidelity(pair, vecs[:, -1]), concurrence(pair), prob


def four_partite_fidelity(js: protocol.JointState, prog: protocol.PulseProgram,
                          p: trion.TrionParams, window: float | None = None) -> FidelityReport:
    """Fidelity to the ideal spin-photon state, with the spin precession shifted by up to ``window``."""
    window = p.t1 if window is None else window
    base = protocol.target_state(prog)
    t = prog.evaluation_time
    return max_fidelity_timeshift(js.rho, lambda tt: ideal.evolve_spin(base, p.delta_e * tt),
                                  t, window, target=prog.name)


TABLE_COLUMNS = ("protocol", "herald", "readout", "F2", "C", "F4", "sigma", "sigma_F4")
TABLE_CONDITIONS = {
    "lc4": (("R", "R"), ("R", "L"), ("L", "R"), ("L", "L")),
    "ghz4": (("R", "R"), ("R", "L")),
    "rlc1": (("R", "R"), ("R", "L")),
    "rlc2": (("R", "R"), ("R", "L")),
}


def _table_values(p: trion.TrionParams, names: Sequence[str], n_samples: int, seed) -> dict:
    progs = []
    for name in names:
        for h in sorted({h for h, _ in TABLE_CONDITIONS[name]}):
            progs.append((name, h, protocol.preset(name, p.tau_ex, p.tau_osrp).with_herald(h)))
    states = protocol.average_programs(p, [g for _, _, g in progs], n_samples, seed)
    out = {}
    for (name, h, prog), js in zip(progs, states):
        for hh, ro in TABLE_CONDITIONS[name]:
            if hh == h:
                f2, c, _ = two_photon_fidelity(js, prog, ro)
                out[(name, h, ro)] = (f2, c)
        if h == "R":
            out[(name, "F4")] = four_partite_fidelity(js, prog, p).value
    return out


def fidelity_table(p: trion.TrionParams, names: Sequence[str] = ("lc4", "ghz4", "rlc1", "rlc2"),
                   n_samples: int = 300, seed=0, param_samples: int = 0,
                   param_overhauser: int = 100) -> list[dict]:
    """Two-photon fidelity, concurrence and 4-partite fidelity per herald/readout condition.

    Means use ``p`` with ``n_samples`` Overhauser draws.  When
    ``param_samples > 0`` the spreads are standard deviations over parameter
    sets drawn from the fit uncertainties, each averaged over
    ``param_overhauser`` draws.
    """
    for name in names:
        if name not in TABLE_CONDITIONS:
            raise MetricError(f"no table layout for {name!r}")
    ss = np.random.SeedSequence(seed)
    main_seed, spread_seed = ss.spawn(2)
    mean = _table_values(p, names, n_samples, main_seed)
    spread: dict = {}
    if param_samples > 0:
        draws = []
        for child in spread_seed.spawn(param_samples):
            rng = np.random.default_rng(child)
            q = trion.sample_params(p, rng)
            draws.append(_table_values(q, names, param_overhauser, child))
        for key in mean:
            vals = [d[key][0] if isinstance(d[key], tuple) else d[key] for d in draws]
            spread[key] = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
    rows = []
    for name in names:
        for h, ro in TABLE_CONDITIONS[name]:
            f2, c = mean[(name, h, ro)]
            rows.append({
                "protocol": name, "herald": h, "readout": ro,
                "F2": f2, "C": c, "F4": mean[(name, "F4")],
                "sigma": spread.get((name, h, ro), float("nan")),
                "sigma_F4": spread.get((name, "F4"), float("nan")),
            })
    return rows


def table_to_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for r in rows:
        # spreads are blank when no parameter sampling was requested
        w.writerow([r[k] if isinstance(r[k], str) else "" if math.isnan(r[k]) else f"{r[k]:.6f}"
                    for k in TABLE_COLUMNS])
    return buf.getvalue()


def visibility_scan(p: trion.TrionParams, phis: Sequence[float], n_samples: int = 100,
                    seed=0, tau_pi: float | None = None) -> np.ndarray:
    """Visibility for each OSRP angle ``phi2`` of the visibility program.

    The pi-precession delay defaults to the calibrated value for ``p``.
    """
    tau_pi = protocol.calibrated_pi_delay(p) if tau_pi is None else tau_pi
    progs = [protocol.visibility_program(phi, p.tau_ex, p.tau_osrp, tau_pi) for phi in phis]
    states = protocol.average_programs(p, progs, n_samples, seed)
    return np.array([visibility_from_joint(js) for js in states])


def fit_sinusoid(phis: Sequence[float], values: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares ``offset + a cos(phi) + b sin(phi)``; returns (offset, amplitude, phase)."""
    phis = np.asarray(phis, dtype=float)
    a = np.column_stack([np.ones_like(phis), np.cos(phis), np.sin(phis)])
    (c0, c1, c2), *_ = np.linalg.lstsq(a, np.asarray(values, dtype=float), rcond=None)
    return float(c0), float(math.hypot(c1, c2)), float(math.atan2(c2, c1))
