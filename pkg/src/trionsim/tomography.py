"""Synthetic polarization tomography: coincidence counts and density-matrix reconstruction."""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import zpg
from .qcore import DensityMatrix

BASIS_NAMES = ("RL", "HV", "DA")
# each basis: (first outcome, second outcome, Pauli label)
_BASIS = {pos + neg: (pos, neg, pauli) for pos, neg, pauli in zpg.BASES}


class TomographyError(ValueError):
    pass


@dataclass(frozen=True)
class MeasurementSetting:
    bases: tuple[str, ...]

    def __post_init__(self):
        bases = tuple(self.bases)
        for b in bases:
            if b not in _BASIS:
                raise TomographyError(f"unknown basis {b!r}, expected one of {BASIS_NAMES}")
        object.__setattr__(self, "bases", bases)

    @property
    def label(self) -> str:
        return ",".join(self.bases)

    @classmethod
    def parse(cls, label: str) -> "MeasurementSetting":
        return cls(tuple(s.strip() for s in label.split(",")))

    def outcomes(self) -> list[tuple[str, ...]]:
        return list(itertools.product(*[_BASIS[b][:2] for b in self.bases]))


def complete_settings(n: int) -> list[MeasurementSetting]:
    """All 3^n basis combinations."""
    return [MeasurementSetting(c) for c in itertools.product(BASIS_NAMES, repeat=n)]


def _projector(outcome: Sequence[str]) -> np.ndarray:
    v = np.ones(1, dtype=complex)
    for o in outcome:
        v = np.kron(v, zpg.PHOTON_KETS[o])
    return np.outer(v, v.conj())


def born_probabilities(rho, setting: MeasurementSetting) -> dict:
    m = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)
    if m.shape[0] != 2 ** len(setting.bases):
        raise TomographyError("setting does not match the register size")
    out = {}
    for o in setting.outcomes():
        out[o] = float(max(np.trace(_projector(o) @ m).real, 0.0))
    return out


@dataclass
class CountTable:
    """Counts per (setting label, outcome tuple); floats are allowed for the noiseless mode."""

    counts: dict = field(default_factory=dict)
    seed: int | None = None

    @property
    def n_qubits(self) -> int:
        return len(next(iter(self.counts))[1]) if self.counts else 0

    def settings(self) -> list[str]:
        return sorted({s for s, _ in self.counts})

    def shots(self, setting: str) -> float:
        return sum(v for (s, _), v in self.counts.items() if s == setting)

    @property
    def total(self) -> float:
        return sum(self.counts.values())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["setting", "outcome", "count"])
        for (s, o), v in sorted(self.counts.items()):
            w.writerow([s, ",".join(o), v if isinstance(v, (int, np.integer)) else repr(float(v))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "CountTable":
        counts = {}
        rows = csv.DictReader(io.StringIO(text))
        if rows.fieldnames is None or not {"setting", "outcome", "count"} <= set(rows.fieldnames):
            raise TomographyError("CSV needs columns setting, outcome, count")
        for row in rows:
            setting = MeasurementSetting.parse(row["setting"])
            outcome = tuple(x.strip() for x in row["outcome"].split(","))
            if outcome not in setting.outcomes():
                raise TomographyError(f"outcome {row['outcome']} not valid for {setting.label}")
            raw = row["count"]
            v = float(raw)
            if v < 0:
                raise TomographyError("counts must be non-negative")
            key = (setting.label, outcome)
            counts[key] = counts.get(key, 0) + (int(v) if v.is_integer() and "." not in raw else v)
        return cls(counts)


def simulate_counts(rho, settings: Iterable[MeasurementSetting], shots: int | None,
                    seed=0) -> CountTable:
    """Multinomial counts per setting; ``shots=None`` gives exact expected frequencies."""
    settings = list(settings)
    m = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)
    if abs(np.trace(m).real - 1) > 1e-8:
        raise TomographyError("state must be normalized")
    if shots is not None and shots < 0:
        raise TomographyError("shots must be non-negative")
    counts = {}
    # one child stream per setting, keyed by its position in sorted order
    ordered = sorted(settings, key=lambda s: s.label)
    children = np.random.SeedSequence(seed).spawn(len(ordered))
    for setting, child in zip(ordered, children):
        probs = born_probabilities(m, setting)
        keys = list(probs)
        p = np.array([probs[k] for k in keys])
        p = p / p.sum()
        if shots is None:
            draw = p
        else:
            draw = np.random.default_rng(child).multinomial(shots, p)
        for k, v in zip(keys, draw):
            counts[(setting.label, k)] = float(v) if shots is None else int(v)
    return CountTable(counts, seed if isinstance(seed, int) else None)


def _pauli_expectations(table: CountTable) -> dict:
    """Estimate ``<P_1 ... P_n>`` for every Pauli string from the settings that measure it."""
    n = table.n_qubits
    sums: dict = {}
    weights: dict = {}
    for label in table.settings():
        setting = MeasurementSetting.parse(label)
        total = table.shots(label)
        if total <= 0:
            continue
        freq = {o: table.counts.get((label, o), 0) / total for o in setting.outcomes()}
        paulis = [_BASIS[b][2] for b in setting.bases]
        # every subset of positions gives a Pauli string (identity elsewhere)
        for mask in itertools.product((0, 1), repeat=n):
            key = tuple(p if keep else "I" for p, keep in zip(paulis, mask))
            val = 0.0
            for o, f in freq.items():
                sign = 1
                for b, oo, keep in zip(setting.bases, o, mask):
                    if keep and oo == _BASIS[b][1]:
                        sign = -sign
                val += sign * f
            sums[key] = sums.get(key, 0.0) + val
            weights[key] = weights.get(key, 0) + 1
    return {k: sums[k] / weights[k] for k in sums}


def missing_settings(table: CountTable) -> list[str]:
    n = table.n_qubits
    have = set(table.settings())
    return [s.label for s in complete_settings(n) if s.label not in have or table.shots(s.label) <= 0]


def project_psd(m: np.ndarray) -> np.ndarray:
    """Nearest unit-trace PSD matrix in Frobenius norm (eigenvalue clipping with redistribution)."""
    h = (m + m.conj().T) / 2
    ev, vecs = np.linalg.eigh(h)
    # Euclidean projection of the spectrum onto the probability simplex
    u = np.sort(ev)[::-1]
    css = np.cumsum(u)
    k = np.nonzero(u - (css - 1) / np.arange(1, len(u) + 1) > 0)[0][-1]
    theta = (css[k] - 1) / (k + 1)
    lam = np.clip(ev - theta, 0, None)
    return (vecs * lam) @ vecs.conj().T


def linear_inversion(table: CountTable) -> np.ndarray:
    missing = missing_settings(table)
    if missing:
        raise TomographyError(f"incomplete settings, missing {missing}")
    n = table.n_qubits
    exps = _pauli_expectations(table)
    rho = np.zeros((2 ** n, 2 ** n), dtype=complex)
    for key, val in sorted(exps.items()):
        op = np.ones((1, 1), dtype=complex)
        for k in key:
            op = np.kron(op, zpg.PAULI[k])
        rho += val * op
    return rho / 2 ** n


def reconstruct(table: CountTable, labels: Sequence[str] | None = None) -> DensityMatrix:
    """Linear inversion followed by projection onto physical states."""
    n = table.n_qubits
    rho = project_psd(linear_inversion(table))
    labels = tuple(labels) if labels else tuple(f"photon_{k}" for k in range(2, 2 + n))
    return DensityMatrix(rho, (2,) * n, labels)


def trace_distance(a, b) -> float:
    ma = a.entries if isinstance(a, DensityMatrix) else np.asarray(a)
    mb = b.entries if isinstance(b, DensityMatrix) else np.asarray(b)
    return float(0.5 * np.abs(np.linalg.eigvalsh((ma - mb + (ma - mb).conj().T) / 2)).sum())
