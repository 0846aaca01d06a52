"""Exact pure-state evolution of an ideal spin-photon emitter.

Registers are ordered ``(photon_a, photon_b, ..., spin)``; photons use the
basis ``|0> = R``, ``|1> = L`` and the spin ``|0> = up``, ``|1> = down``.
The emission ``E_s`` maps ``a|up> + b|down>`` to ``a|R, up> + b|L, down>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .qcore import Ket

SQ2 = math.sqrt(2)
PHOTON_KETS = {
    "R": np.array([1, 0], dtype=complex),
    "L": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / SQ2,
    "-": np.array([1, -1], dtype=complex) / SQ2,
    "H": np.array([1, 1], dtype=complex) / SQ2,
    "V": np.array([1, -1], dtype=complex) / SQ2,
    "D": np.array([1, 1j], dtype=complex) / SQ2,
    "A": np.array([1, -1j], dtype=complex) / SQ2,
}
SPIN_KETS = {
    "up": np.array([1, 0], dtype=complex),
    "down": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / SQ2,
    "-": np.array([1, -1], dtype=complex) / SQ2,
}


class SequenceError(ValueError):
    """Malformed gate list, graph or register."""


@dataclass(frozen=True)
class Gate:
    kind: str
    angle: float | None = None
    index: int | None = None
    outcome: str | None = None

    def __repr__(self):
        args = [str(x) for x in (self.angle, self.index, self.outcome) if x is not None]
        return f"{self.kind}({', '.join(args)})"


def Es() -> Gate:
    return Gate("Es")


def Ry(theta: float) -> Gate:
    return Gate("Ry", angle=float(theta))


def Rz(phi: float) -> Gate:
    return Gate("Rz", angle=float(phi))


def Z() -> Gate:
    return Gate("Z")


def H() -> Gate:
    return Gate("H")


def Zp(index: int) -> Gate:
    """Phase flip ``|R><R| - |L><L|`` on a photon; negative indices count from the newest."""
    return Gate("Zp", index=int(index))


def MeasureSpin(outcome: str) -> Gate:
    return Gate("MeasureSpin", outcome=outcome)


def MeasurePhoton(index: int, outcome: str) -> Gate:
    return Gate("MeasurePhoton", index=int(index), outcome=outcome)


def ry(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(phi: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * phi), np.exp(0.5j * phi)])


Z_MAT = np.diag([1.0, -1.0]).astype(complex)
H_MAT = np.array([[1, 1], [1, -1]], dtype=complex) / SQ2


def _apply_1q(psi: np.ndarray, u: np.ndarray, axis: int) -> np.ndarray:
    return np.moveaxis(np.tensordot(u, psi, axes=([1], [axis])), 0, axis)


def _emit(psi: np.ndarray) -> np.ndarray:
    """Insert a new photon axis before the spin, copying the spin value into it."""
    out = np.zeros(psi.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0] = psi[..., 0]
    out[..., 1, 1] = psi[..., 1]
    return out


def run_gates(psi: np.ndarray, gates: Iterable[Gate]) -> np.ndarray:
    """Apply gates to a register tensor of shape ``(2,) * (photons + 1)``."""
    for g in gates:
        n_ph = psi.ndim - 1
        if g.kind == "Es":
            psi = _emit(psi)
        elif g.kind == "Ry":
            psi = _apply_1q(psi, ry(g.angle), n_ph)
        elif g.kind == "Rz":
            psi = _apply_1q(psi, rz(g.angle), n_ph)
        elif g.kind == "Z":
            psi = _apply_1q(psi, Z_MAT, n_ph)
        elif g.kind == "H":
            psi = _apply_1q(psi, H_MAT, n_ph)
        elif g.kind == "Zp":
            idx = g.index if g.index >= 0 else n_ph + g.index
            if not 0 <= idx < n_ph:
                raise SequenceError(f"{g!r} addresses a photon outside 0..{n_ph - 1}")
            psi = _apply_1q(psi, Z_MAT, idx)
        elif g.kind == "MeasureSpin":
            if g.outcome not in SPIN_KETS:
                raise SequenceError(f"unknown spin outcome {g.outcome!r}")
            v = SPIN_KETS[g.outcome]
            proj = np.outer(v, v.conj())
            psi = _apply_1q(psi, proj, n_ph)
            psi = _renormalize(psi, g)
        elif g.kind == "MeasurePhoton":
            idx = g.index if g.index >= 0 else n_ph + g.index
            if not 0 <= idx < n_ph:
                raise SequenceError(f"{g!r} addresses a photon outside 0..{n_ph - 1}")
            if g.outcome not in PHOTON_KETS:
                raise SequenceError(f"unknown photon outcome {g.outcome!r}")
            psi = np.tensordot(PHOTON_KETS[g.outcome].conj(), psi, axes=([0], [idx]))
            psi = _renormalize(psi, g)
        else:
            raise SequenceError(f"unknown gate {g.kind!r}")
    return psi


def _renormalize(psi: np.ndarray, g: Gate) -> np.ndarray:
    n = np.linalg.norm(psi)
    if n < 1e-12:
        raise SequenceError(f"{g!r} has zero probability")
    return psi / n


def photon_labels(n: int, first: int = 2) -> tuple[str, ...]:
    return tuple(f"photon_{k}" for k in range(first, first + n))


def ideal_protocol_state(gates: Sequence[Gate], init="up", first_photon: int = 2) -> Ket:
    """Statevector over ``(photon_first, ..., spin)`` after the gate list."""
    spin = SPIN_KETS[init] if isinstance(init, str) else np.asarray(init, dtype=complex)
    if spin.shape != (2,):
        raise SequenceError("initial spin must be a 2-vector")
    psi = run_gates(spin / np.linalg.norm(spin), gates)
    n_ph = psi.ndim - 1
    return Ket(psi.reshape(-1), (2,) * (n_ph + 1), photon_labels(n_ph, first_photon) + ("spin",))


def evolve_spin(ket: Ket, theta: float) -> Ket:
    """Apply a Larmor rotation ``R_y(theta)`` to the trailing spin of a register."""
    psi = ket.amplitudes.reshape(ket.dims)
    return Ket(_apply_1q(psi, ry(theta), len(ket.dims) - 1).reshape(-1), ket.dims, ket.labels)


def overlap(a, b) -> float:
    """``|<a|b>|`` for kets or raw vectors; global phase is ignored."""
    va = a.amplitudes if isinstance(a, Ket) else np.ravel(a)
    vb = b.amplitudes if isinstance(b, Ket) else np.ravel(b)
    return float(abs(np.vdot(va, vb)))


# -- graph states -------------------------------------------------------------------


def _connected(n: int, edges: Sequence[tuple[int, int]]) -> bool:
    if n == 0:
        return False
    adj = {i: set() for i in range(n)}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    seen, stack = {0}, [0]
    while stack:
        for nb in adj[stack.pop()] - seen:
            seen.add(nb)
            stack.append(nb)
    return len(seen) == n


def graph_state_vector(n: int, edges: Sequence[tuple[int, int]]) -> np.ndarray:
    """``prod CZ |+>^n`` as a tensor of shape ``(2,) * n``."""
    bits = (np.arange(2 ** n)[:, None] >> np.arange(n - 1, -1, -1)) & 1
    sign = np.zeros(2 ** n, dtype=int)
    for a, b in edges:
        if a == b or not (0 <= a < n and 0 <= b < n):
            raise SequenceError(f"bad edge {(a, b)}")
        sign += bits[:, a] & bits[:, b]
    v = ((-1.0) ** sign) / 2 ** (n / 2)
    return v.astype(complex).reshape((2,) * n)


def graph_state(labels: Sequence[str], edges: Sequence[tuple[int, int]], require_connected: bool = True) -> Ket:
    n = len(labels)
    if require_connected and not _connected(n, edges):
        raise SequenceError("graph is not connected")
    return Ket(graph_state_vector(n, edges).reshape(-1), (2,) * n, tuple(labels))


@dataclass(frozen=True)
class CaterpillarGraph:
    """A path of spine nodes, each carrying ``pendants[i]`` leaf qubits."""

    spine: tuple[str, ...]
    pendants: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "spine", tuple(self.spine))
        object.__setattr__(self, "pendants", tuple(int(k) for k in self.pendants))
        if not self.spine:
            raise SequenceError("caterpillar needs at least one spine node")
        if len(self.pendants) != len(self.spine):
            raise SequenceError("one pendant count per spine node required")
        if any(k < 0 for k in self.pendants):
            raise SequenceError("pendant counts must be non-negative")

    def nodes_and_edges(self) -> tuple[list[str], list[tuple[int, int]]]:
        """Node order is each spine node followed by its leaves."""
        labels, edges, prev = [], [], None
        for name, k in zip(self.spine, self.pendants):
            me = len(labels)
            labels.append(name)
            if prev is not None:
                edges.append((prev, me))
            for j in range(k):
                labels.append(f"{name}.{j + 1}")
                edges.append((me, len(labels) - 1))
            prev = me
        return labels, edges


def caterpillar_state(g: CaterpillarGraph) -> Ket:
    labels, edges = g.nodes_and_edges()
    return graph_state(labels, edges)


def random_graph_register(n_photons: int, rng: np.random.Generator, p_edge: float = 0.5) -> np.ndarray:
    """Random graph state on ``n_photons`` photons plus the spin (last qubit)."""
    n = n_photons + 1
    edges = [(a, b) for a in range(n) for b in range(a + 1, n) if rng.random() < p_edge]
    return graph_state_vector(n, edges)


def verify_equivalence(lhs: Sequence[Gate], corrections: Sequence[Gate], rhs: Sequence[Gate],
                       trials: int = 50, n_photons: int = 2, seed: int = 0, tol: float = 1e-10) -> bool:
    """True iff ``corrections . lhs`` equals ``rhs`` up to a global phase on random graph states."""
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        psi = random_graph_register(n_photons, rng)
        a = run_gates(run_gates(psi, lhs), corrections)
        b = run_gates(psi, rhs)
        if a.shape != b.shape:
            raise SequenceError(f"register mismatch: {a.ndim - 1} vs {b.ndim - 1} photons")
        if abs(abs(np.vdot(a.ravel(), b.ravel())) - 1) > tol:
            return False
    return True


# -- named protocols ------------------------------------------------------------------

HALF_PI = math.pi / 2

PROTOCOL_GATES = {
    "lc4": [Ry(HALF_PI), Es(), Ry(HALF_PI), Es(), Ry(HALF_PI), Es()],
    "ghz4": [Ry(HALF_PI), Es(), Z(), Es(), Z(), Es()],
    "rlc1": [Ry(HALF_PI), Es(), Z(), Es(), Ry(HALF_PI), Es()],
    "rlc2": [Ry(HALF_PI), Es(), Ry(HALF_PI), Es(), Z(), Es()],
}


def closed_form_state(name: str, herald: str = "up") -> Ket:
    """Closed-form 4-partite targets written out explicitly in the R/L and up/down bases."""
    R, L = PHOTON_KETS["R"], PHOTON_KETS["L"]
    plus, minus = PHOTON_KETS["+"], PHOTON_KETS["-"]
    up, dn = SPIN_KETS["up"], SPIN_KETS["down"]

    def k(*vs):
        out = np.ones(1, dtype=complex)
        for v in vs:
            out = np.kron(out, v)
        return out

    if name == "lc4" and herald == "up":
        v = (k(minus, R, R, up) - k(plus, L, R, up) + k(minus, R, L, dn) + k(plus, L, L, dn)) / 2
    elif name == "lc4" and herald == "down":
        v = -(k(plus, R, R, up) - k(minus, L, R, up) + k(plus, R, L, dn) + k(minus, L, L, dn)) / 2
    elif name == "ghz4":
        v = (k(R, R, R, up) + k(L, L, L, dn)) / SQ2
    elif name == "rlc1":
        v = -(k(R, R, R, up) + k(L, L, R, up) + k(R, R, L, dn) - k(L, L, L, dn)) / 2
    elif name == "rlc2":
        v = (-k(minus, R, R, up) + k(plus, L, L, dn)) / SQ2
    else:
        raise SequenceError(f"no closed form for {name!r} with herald {herald!r}")
    return Ket(v, (2,) * 4, photon_labels(3) + ("spin",))
