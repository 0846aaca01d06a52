"""Zero-photon-generator conditioning and the spin-photon emission map.

The emitted photon is a polarization qubit in the basis ``|0> = R``,
``|1> = L``.  With the dipole conventions of :mod:`trionsim.trion` this puts
``H = (R + L)/sqrt2``, ``V ~ (R - L)/sqrt2``, ``D ~ (R + iL)/sqrt2`` and
``A ~ (R - iL)/sqrt2``, so the photonic Pauli operators are ``X = H - V``,
``Y = D - A`` and ``Z = R - L``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.linalg

from . import trion
from .qcore import (
    DensityMatrix,
    QCoreError,
    SuperOperator,
    choi_matrix,
    jump_super,
    unvec,
    vec,
)

log = logging.getLogger(__name__)

COND_LIMIT = 1e8
MIN_PROBABILITY = 1e-9


class ZPGError(ArithmeticError):
    """Numerical failure in conditioning or map reconstruction."""


@dataclass(frozen=True)
class PolarizationAxis:
    """Detector polarization ``p = (cos theta, sin theta e^{i phi})`` in the H/V basis."""

    theta: float
    phi: float
    name: str = ""

    @property
    def dipole(self) -> np.ndarray:
        return math.cos(self.theta) * trion.SIGMA_H + math.sin(self.theta) * np.exp(1j * self.phi) * trion.SIGMA_V

    @property
    def orthogonal_dipole(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return -s * np.exp(-1j * self.phi) * trion.SIGMA_H + c * trion.SIGMA_V

    def photon_ket(self) -> np.ndarray:
        """Polarization state (R/L basis) whose detection applies :attr:`dipole`."""
        d = self.dipole
        return np.array([d[trion.UP, trion.TRION_UP], d[trion.DOWN, trion.TRION_DOWN]]).conj()


AXES = {
    "H": PolarizationAxis(0.0, 0.0, "H"),
    "V": PolarizationAxis(math.pi / 2, 0.0, "V"),
    "D": PolarizationAxis(math.pi / 4, 0.0, "D"),
    "A": PolarizationAxis(math.pi / 4, math.pi, "A"),
    "R": PolarizationAxis(math.pi / 4, -math.pi / 2, "R"),
    "L": PolarizationAxis(math.pi / 4, math.pi / 2, "L"),
}
# detector pairs (p, p_bar) and the photonic Pauli they measure as P(p) - P(p_bar)
BASES = (("R", "L", "z"), ("H", "V", "x"), ("D", "A", "y"))

PHOTON_KETS = {
    "R": np.array([1, 0], dtype=complex),
    "L": np.array([0, 1], dtype=complex),
    "H": np.array([1, 1], dtype=complex) / math.sqrt(2),
    "V": np.array([1, -1], dtype=complex) / math.sqrt(2),
    "D": np.array([1, 1j], dtype=complex) / math.sqrt(2),
    "A": np.array([1, -1j], dtype=complex) / math.sqrt(2),
}

PAULI = {
    "I": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
PAULI_ORDER = ("I", "x", "y", "z")


def _ground_embed(m: np.ndarray) -> np.ndarray:
    out = np.zeros((4, 4), dtype=complex)
    out[:2, :2] = m
    return out


# ground-manifold Pauli operators on the 4-level emitter
SPIN_PAULI_4 = {k: _ground_embed(v) for k, v in PAULI.items()}

# the four spin inputs used for reconstruction: |0>, |1>, |+>, |+i>
RECONSTRUCTION_INPUTS = tuple(
    np.outer(v, v.conj())
    for v in (
        np.array([1, 0], dtype=complex),
        np.array([0, 1], dtype=complex),
        np.array([1, 1], dtype=complex) / math.sqrt(2),
        np.array([1, 1j], dtype=complex) / math.sqrt(2),
    )
)


def zpg_generator(L: SuperOperator, p: PolarizationAxis, eta: int, eta_bar: int,
                  gamma: float) -> SuperOperator:
    """``L - eta J_p - eta_bar J_pbar``; evolves the no-click conditioned state.

    ``gamma`` is the radiative rate carried by the dipole jump operators in ``L``.
    """
    if eta not in (0, 1) or eta_bar not in (0, 1):
        raise ValueError("detector efficiencies must be 0 or 1")
    if eta == 0 and eta_bar == 0:
        return L
    g = np.array(L.matrix)
    if eta:
        g = g - gamma * jump_super(p.dipole)
    if eta_bar:
        g = g - gamma * jump_super(p.orthogonal_dipole)
    return SuperOperator(g, L.dims, L.labels, "generator", trace_preserving=False)


def _segmented_propagator(g: np.ndarray, t: float, kicks: Sequence[tuple[float, np.ndarray]]) -> np.ndarray:
    """``exp(g (t - t_n)) K_n ... K_1 exp(g t_1)`` for kicks at ``0 <= t_k <= t``."""
    out = np.eye(g.shape[0], dtype=complex)
    now = 0.0
    for at, k in kicks:
        if not now <= at <= t:
            raise ValueError(f"kick at {at} outside [{now}, {t}]")
        out = k @ scipy.linalg.expm(g * (at - now)) @ out
        now = at
    return scipy.linalg.expm(g * (t - now)) @ out


def zero_photon_propagators(L: SuperOperator, p: PolarizationAxis, t: float, gamma: float,
                            kicks: Sequence[tuple[float, np.ndarray]] = ()) -> dict:
    """Propagators of the four ZPG equations keyed by ``(eta, eta_bar)``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    kicks = sorted(kicks, key=lambda k: k[0])
    return {
        (e, eb): _segmented_propagator(zpg_generator(L, p, e, eb, gamma).matrix, t, kicks)
        for e in (0, 1) for eb in (0, 1)
    }


@dataclass(frozen=True)
class ThresholdQuartet:
    rho_00: DensityMatrix
    rho_10: DensityMatrix
    rho_01: DensityMatrix
    rho_11: DensityMatrix
    p: PolarizationAxis
    t: float

    @property
    def probability(self) -> float:
        """Probability of a click on the ``p`` detector only."""
        return self.rho_10.trace

    def total(self) -> np.ndarray:
        return self.rho_00.entries + self.rho_10.entries + self.rho_01.entries + self.rho_11.entries


def threshold_quartet(rho0: DensityMatrix, p: PolarizationAxis, t: float, L: SuperOperator,
                      gamma: float, kicks: Sequence[tuple[float, np.ndarray]] = ()) -> ThresholdQuartet:
    """States conditioned on the four threshold-detector outcomes at time ``t``.

    ``rho_10`` means at least one click on the ``p`` detector and none on the
    orthogonal one.  ``kicks`` are instantaneous channels inserted during the
    evolution as ``(time, superoperator matrix)`` pairs.
    """
    if rho0.dims != L.dims:
        raise QCoreError("state and generator dimensions differ")
    props = zero_photon_propagators(L, p, t, gamma, kicks)
    v = vec(rho0.entries)
    z = {k: props[k] @ v for k in props}
    parts = {
        "rho_00": z[1, 1],
        "rho_10": z[0, 1] - z[1, 1],
        "rho_01": z[1, 0] - z[1, 1],
        "rho_11": z[0, 0] - z[1, 0] - z[0, 1] + z[1, 1],
    }
    out = {}
    for name, w in parts.items():
        m = unvec(w, rho0.dim)
        m = (m + m.conj().T) / 2
        tr = np.trace(m).real
        if tr < -1e-8:
            raise ZPGError(f"{name} has negative trace {tr:.3g} at t={t}")
        out[name] = DensityMatrix(m, rho0.dims, rho0.labels, normalized=False)
    return ThresholdQuartet(p=p, t=t, **out)


@lru_cache(maxsize=1)
def _design_pinv() -> tuple[np.ndarray, float]:
    """Pseudo-inverse of the 64x64 design matrix and its condition number.

    Unknowns are the entries of the 16x4 transfer matrix (row-major).  Row
    ``(k, i, j)`` evaluates ``Tr[(P_j^photon kron P_i^spin) C(rho_k)]``.
    """
    rows = []
    for rho_k in RECONSTRUCTION_INPUTS:
        vk = vec(rho_k)
        for i in PAULI_ORDER:
            for j in PAULI_ORDER:
                obs = np.kron(PAULI[j], PAULI[i])
                rows.append(np.outer(vec(obs.T), vk).ravel())
    design = np.array(rows)
    cond = float(np.linalg.cond(design))
    log.debug("process-map design matrix condition number %.3g", cond)
    return np.linalg.pinv(design), cond


@dataclass(frozen=True)
class ProcessMap:
    """Linear map from a spin density matrix to a (photon, spin) density matrix.

    ``transfer`` is 16x4 acting on column-stacked matrices.  Its output is not
    normalized: the trace of an output is the probability of the post-selected
    single-detector click; :meth:`apply` normalizes and returns it separately.
    """

    transfer: np.ndarray
    t: float
    post_selected: bool = True

    def __post_init__(self):
        m = np.array(self.transfer, dtype=complex)
        if m.shape != (16, 4):
            raise ValueError(f"transfer matrix must be 16x4, got {m.shape}")
        m.flags.writeable = False
        object.__setattr__(self, "transfer", m)

    def apply_unnormalized(self, rho_spin: np.ndarray) -> np.ndarray:
        return unvec(self.transfer @ vec(rho_spin), 4)

    def apply(self, rho_spin) -> tuple[DensityMatrix, float]:
        m = rho_spin.entries if isinstance(rho_spin, DensityMatrix) else np.asarray(rho_spin)
        out = self.apply_unnormalized(m)
        prob = float(np.trace(out).real)
        if prob <= 0:
            raise ZPGError("map output has zero probability")
        return DensityMatrix(out / prob, (2, 2), ("photon", "spin")), prob

    def choi(self, normalize: bool = True) -> np.ndarray:
        c = choi_matrix(self.transfer, 2, 4)
        if normalize:
            # trace of the Choi matrix is twice the mean click probability
            c = c * 2 / np.trace(c).real
        return c

    def extend(self, rho: np.ndarray, dims_before: int) -> np.ndarray:
        """Apply to the last (spin) factor of a register ``(rest, spin)``.

        Returns the unnormalized register ``(rest, photon, spin)``.
        """
        r = np.asarray(rho).reshape(dims_before, 2, dims_before, 2)
        # tensor M[out_row(photon a, spin b), out_col(photon c, spin d), in_row e, in_col f]
        m = self.transfer.reshape(2, 2, 2, 2, 2, 2, order="F")
        # column-stacked indices: out (b a) row-major becomes (a=photon,b=spin) after F reshape
        # vec index of out[r, c] = r + 4c with r = 2*a + b -> F-order dims (b, a, d, c)
        m = m.transpose(1, 0, 3, 2, 4, 5)  # -> (a, b, c, d, e, f)
        new = np.einsum("abcdef,xeyf->xabycd", m, r)
        n = dims_before * 4
        return new.reshape(n, n)

    def then_spin(self, s: np.ndarray) -> "ProcessMap":
        """Compose with a 4x4 spin superoperator acting on the output spin."""
        m = self.transfer.reshape(2, 2, 2, 2, 4, order="F")  # (b, a, d, c, in)
        blocks = m.transpose(1, 3, 0, 2, 4).reshape(2, 2, 4, 4, order="F")
        new = np.einsum("ij,acjk->acik", s, blocks)
        out = new.reshape(2, 2, 2, 2, 4, order="F").transpose(2, 0, 3, 1, 4)
        return ProcessMap(out.reshape(16, 4, order="F"), self.t, self.post_selected)

    def to_dict(self) -> dict:
        m = self.transfer
        return {
            "rows": 16,
            "cols": 4,
            "t_ns": self.t,
            "post_selected": self.post_selected,
            "re": m.real.ravel().tolist(),
            "im": m.imag.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ProcessMap":
        re = np.asarray(doc["re"], dtype=float).reshape(16, 4)
        im = np.asarray(doc["im"], dtype=float).reshape(16, 4)
        return cls(re + 1j * im, float(doc["t_ns"]), bool(doc.get("post_selected", True)))


def conditioned_spin_states(p: trion.TrionParams, s: trion.OverhauserSample, t: float,
                            osrps: Sequence[tuple[float, float]] = ()) -> dict:
    """Superoperators from an input spin (2x2) to the spin conditioned on each polarization.

    The excitation pulse fires at time 0; each ``(time, angle)`` in ``osrps``
    applies an OSRP.  Returns ``{axis name: 4x4 matrix}`` mapping ``vec`` of a
    2x2 spin input to ``vec`` of the 2x2 ground-manifold block of
    ``rho^(1,0)(t | axis)``.
    """
    L = trion.liouvillian(p, s)
    ex = trion.excitation_channel(p).matrix
    kicks = [(at, trion.osrp_channel(p, theta).matrix) for at, theta in osrps]
    # embed 2x2 spin input in the 4-level space; restrict output to the ground block
    emb = np.zeros((16, 4), dtype=complex)
    res = np.zeros((4, 16), dtype=complex)
    for a in range(2):
        for b in range(2):
            emb[a + 4 * b, a + 2 * b] = 1
            res[a + 2 * b, a + 4 * b] = 1
    kicks.sort(key=lambda k: k[0])
    # both detectors blind: independent of the axis pair
    none = _segmented_propagator(zpg_generator(L, AXES["R"], 1, 1, p.gamma).matrix, t, kicks)
    head = ex @ emb
    out = {}
    for pos, neg, _ in BASES:
        axis = AXES[pos]
        only_pos = _segmented_propagator(zpg_generator(L, axis, 0, 1, p.gamma).matrix, t, kicks)
        only_neg = _segmented_propagator(zpg_generator(L, axis, 1, 0, p.gamma).matrix, t, kicks)
        out[pos] = res @ (only_pos - none) @ head
        out[neg] = res @ (only_neg - none) @ head
    return out


def correlators(cond: dict, rho_spin: np.ndarray) -> np.ndarray:
    """Unnormalized correlators ``<sigma_i^spin sigma_j^photon>`` as a 4x4 array [i, j]."""
    states = {k: unvec(m @ vec(rho_spin), 2) for k, m in cond.items()}
    c = np.zeros((4, 4), dtype=complex)
    for a, i in enumerate(PAULI_ORDER):
        s = PAULI[i]
        tr = {k: np.trace(s @ v) for k, v in states.items()}
        c[a, 0] = tr["R"] + tr["L"]
        c[a, 1] = tr["H"] - tr["V"]
        c[a, 2] = tr["D"] - tr["A"]
        c[a, 3] = tr["R"] - tr["L"]
    return c.real


def click_probabilities(cond: dict, rho_spin: np.ndarray) -> dict:
    return {k: float(np.trace(unvec(m @ vec(rho_spin), 2)).real) for k, m in cond.items()}


def reconstruct_map(cond: dict, t: float) -> ProcessMap:
    """Invert the 64 correlators of the four reconstruction inputs into a transfer matrix."""
    pinv, cond_number = _design_pinv()
    if cond_number > COND_LIMIT:
        raise ZPGError(f"ill-conditioned reconstruction (cond={cond_number:.3g}) "
                       f"with bases {[b[:2] for b in BASES]}")
    rhs = []
    for rho_k in RECONSTRUCTION_INPUTS:
        probs = click_probabilities(cond, rho_k)
        for pos, neg, _ in BASES:
            if probs[pos] + probs[neg] <= MIN_PROBABILITY:
                raise ZPGError(f"no emission yet at t={t} in basis {pos}/{neg}")
        rhs.append(correlators(cond, rho_k).ravel())
    x = pinv @ np.concatenate(rhs)
    return ProcessMap(x.reshape(16, 4), t)


def emission_process_map(p: trion.TrionParams, s: trion.OverhauserSample = trion.ZERO_FIELD,
                         t: float | None = None,
                         osrps: Sequence[tuple[float, float]] = ()) -> ProcessMap:
    """Post-selected spin -> (photon, spin) map for one excitation pulse.

    ``t`` defaults to the excitation period.  ``osrps`` lists ``(time after
    the excitation, rotation angle)`` of spin rotation pulses fired before ``t``.
    """
    t = p.tau_ex if t is None else t
    return reconstruct_map(conditioned_spin_states(p, s, t, osrps), t)


def photon_pauli_state(c: np.ndarray) -> np.ndarray:
    """Build ``(1/4) sum_ij c[i, j] P_j^photon kron P_i^spin`` from a correlator table."""
    out = np.zeros((4, 4), dtype=complex)
    for a, i in enumerate(PAULI_ORDER):
        for b, j in enumerate(PAULI_ORDER):
            out += c[a, b] * np.kron(PAULI[j], PAULI[i])
    return out / 4
