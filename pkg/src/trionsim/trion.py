"""Four-level negatively charged trion: Hamiltonian, Liouvillian and pulses.

Level order is ``(up, down, trion_up, trion_down)`` where the trion states
carry a hole spin ``+3/2`` / ``-3/2``.  Right-circular light couples
``up <-> trion_up`` and left-circular light couples ``down <-> trion_down``.

Units: time in ns, angular frequencies in rad/ns (hbar = 1), fields in mT.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
import scipy.constants as const
import scipy.linalg
import yaml

from .qcore import (
    Operator,
    SuperOperator,
    commutator_super,
    dissipator_super,
    unitary_super,
)

# mu_B / hbar converted from J/T and J s to rad ns^-1 mT^-1
MU_B = const.physical_constants["Bohr magneton"][0] / const.hbar * 1e-9 * 1e-3

UP, DOWN, TRION_UP, TRION_DOWN = range(4)
LEVELS = ("up", "down", "trion_up", "trion_down")
DIMS = (4,)
LABELS = ("emitter",)


def _ket(i: int) -> np.ndarray:
    v = np.zeros(4, dtype=complex)
    v[i] = 1
    return v


def _outer(i: int, j: int) -> np.ndarray:
    return np.outer(_ket(i), _ket(j).conj())


# electron (ground manifold) Pauli operators; zero on the trion block
SX_E = _outer(UP, DOWN) + _outer(DOWN, UP)
SY_E = 1j * (_outer(DOWN, UP) - _outer(UP, DOWN))
SZ_E = _outer(UP, UP) - _outer(DOWN, DOWN)
# hole (trion manifold) Pauli operators
SY_H = 1j * (_outer(TRION_DOWN, TRION_UP) - _outer(TRION_UP, TRION_DOWN))
SZ_H = _outer(TRION_UP, TRION_UP) - _outer(TRION_DOWN, TRION_DOWN)
# optical lowering operators
SIGMA_R = _outer(UP, TRION_UP)
SIGMA_L = _outer(DOWN, TRION_DOWN)
SIGMA_H = (SIGMA_L + SIGMA_R) / math.sqrt(2)
SIGMA_V = -1j * (SIGMA_L - SIGMA_R) / math.sqrt(2)
GROUND_PROJECTOR = _outer(UP, UP) + _outer(DOWN, DOWN)


class ParameterError(ValueError):
    pass


# keys of the on-disk parameter document -> (attribute, scale to internal units)
_DOC_KEYS = {
    "t1_ps": ("t1", 1e-3),
    "b_mt": ("b", 1.0),
    "tau_ex_ps": ("tau_ex", 1e-3),
    "tau_osrp_ps": ("tau_osrp", 1e-3),
    "b_oh_mt": ("b_oh", 1.0),
    "g_e": ("g_e", 1.0),
    "g_h": ("g_h", 1.0),
    "lambda_ex": ("lambda_ex", 1.0),
    "phi_ex_pi": ("phi_ex", math.pi),
    "lambda_osrp": ("lambda_osrp", 1.0),
    "theta_osrp_pi": ("theta_osrp", math.pi),
}


@dataclass(frozen=True)
class TrionParams:
    """Physical parameters of the emitter and the pulse sequence.

    Times are in ns, fields in mT and angles in rad.  ``theta_osrp`` is the
    rotation actually produced by an OSRP calibrated as a nominal pi pulse.
    """

    t1: float = 0.2
    b: float = 60.0
    tau_ex: float = 0.6
    tau_osrp: float = 0.3
    b_oh: float = 9.0
    g_e: float = 0.60
    g_h: float = 0.30
    lambda_ex: float = 0.94
    phi_ex: float = 0.02 * math.pi
    lambda_osrp: float = 0.74
    theta_osrp: float = 1.03 * math.pi
    # literal R_ex under-rotates each circular transition by 1/sqrt(2)
    normalize_pulse_area: bool = False

    def __post_init__(self):
        if not self.t1 > 0:
            raise ParameterError(f"t1 must be positive, got {self.t1}")
        for name in ("lambda_ex", "lambda_osrp"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ParameterError(f"{name} must lie in (0, 1], got {v}")
        if self.b_oh < 0:
            raise ParameterError(f"b_oh must be non-negative, got {self.b_oh}")
        if self.tau_ex <= 0:
            raise ParameterError("tau_ex must be positive")

    @property
    def gamma(self) -> float:
        return 1.0 / self.t1

    @property
    def delta_e(self) -> float:
        return MU_B * self.g_e * self.b

    @property
    def delta_h(self) -> float:
        return MU_B * self.g_h * self.b

    @property
    def larmor_period(self) -> float:
        return 2 * math.pi / self.delta_e

    def with_(self, **changes) -> "TrionParams":
        return replace(self, **changes)

    @classmethod
    def fitted(cls) -> "TrionParams":
        """Operating point of the experiment (fixed plus fitted values)."""
        return cls()

    @classmethod
    def ideal(cls, t1: float = 1e-3, tau_ex: float = 0.6, b: float = 60.0) -> "TrionParams":
        """Vanishing-imperfection limit; g_e set so tau_ex is a quarter Larmor period."""
        g_e = (math.pi / 2) / (MU_B * b * tau_ex)
        return cls(t1=t1, b=b, tau_ex=tau_ex, tau_osrp=tau_ex / 2, b_oh=0.0, g_e=g_e,
                   g_h=0.0, lambda_ex=1.0, phi_ex=0.0, lambda_osrp=1.0, theta_osrp=math.pi)

    def to_doc(self) -> dict:
        doc = {}
        values = asdict(self)
        for key, (attr, scale) in _DOC_KEYS.items():
            doc[key] = round(values[attr] / scale, 12)
        if self.normalize_pulse_area:
            doc["normalize_pulse_area"] = True
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "TrionParams":
        unknown = set(doc) - set(_DOC_KEYS) - {"normalize_pulse_area"}
        if unknown:
            raise ParameterError(f"unknown parameter keys {sorted(unknown)}")
        kwargs = {}
        for key, value in doc.items():
            if key == "normalize_pulse_area":
                kwargs[key] = bool(value)
                continue
            attr, scale = _DOC_KEYS[key]
            kwargs[attr] = float(value) * scale
        return cls(**kwargs)

    def save(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_doc(), sort_keys=False))

    @classmethod
    def load(cls, path) -> "TrionParams":
        doc = yaml.safe_load(Path(path).read_text())
        if not isinstance(doc, dict):
            raise ParameterError(f"{path}: expected a key-value document")
        return cls.from_doc(doc)


# one standard deviation of each fitted parameter, internal units
FIT_UNCERTAINTY = {
    "b_oh": 0.5,
    "g_e": 0.04,
    "g_h": 0.06,
    "lambda_ex": 0.06,
    "phi_ex": 0.02 * math.pi,
    "lambda_osrp": 0.09,
    "theta_osrp": 0.05 * math.pi,
}


def sample_params(base: TrionParams, rng: np.random.Generator, scale: float = 1.0) -> TrionParams:
    """Draw fitted parameters from independent normals; purities are clipped to (0, 1]."""
    changes = {}
    for name, sd in FIT_UNCERTAINTY.items():
        v = getattr(base, name) + scale * sd * rng.normal()
        if name.startswith("lambda"):
            v = min(max(v, 1e-3), 1.0)
        elif name == "b_oh":
            v = abs(v)
        changes[name] = v
    return replace(base, **changes)


@dataclass(frozen=True)
class OverhauserSample:
    b: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        b = tuple(float(x) for x in self.b)
        if len(b) != 3 or not all(math.isfinite(x) for x in b):
            raise ParameterError(f"Overhauser field must be a finite 3-vector, got {self.b}")
        object.__setattr__(self, "b", b)


ZERO_FIELD = OverhauserSample()


def sample_overhauser(sigma: float, rng: np.random.Generator) -> OverhauserSample:
    if sigma < 0:
        raise ParameterError("sigma must be non-negative")
    if sigma == 0:
        return ZERO_FIELD
    return OverhauserSample(tuple(rng.normal(0.0, sigma, size=3)))


def hamiltonian(p: TrionParams, s: OverhauserSample = ZERO_FIELD) -> Operator:
    """Static-field Zeeman terms along y plus the electron Overhauser term."""
    h = 0.5 * p.delta_e * SY_E + 0.5 * p.delta_h * SY_H
    bx, by, bz = s.b
    h = h + 0.5 * p.g_e * MU_B * (bx * SX_E + by * SY_E + bz * SZ_E)
    return Operator(h, DIMS, LABELS, hermitian=True)


def liouvillian(p: TrionParams, s: OverhauserSample = ZERO_FIELD) -> SuperOperator:
    h = hamiltonian(p, s).entries
    g = commutator_super(h) + p.gamma * (dissipator_super(SIGMA_R) + dissipator_super(SIGMA_L))
    return SuperOperator(g, DIMS, LABELS, "generator", trace_preserving=True)


def dephasing_super(op: np.ndarray, purity: float) -> np.ndarray:
    """``exp[-log(purity)/2 * D_op]``: coherences across ``op`` shrink by ``purity``."""
    if not 0 < purity <= 1:
        raise ParameterError(f"purity must lie in (0, 1], got {purity}")
    if purity == 1:
        return np.eye(op.shape[0] ** 2, dtype=complex)
    return scipy.linalg.expm(-0.5 * math.log(purity) * dissipator_super(op))


def excitation_unitary(phi: float, normalize_pulse_area: bool = False) -> np.ndarray:
    sy_h = -1j * (SIGMA_H - SIGMA_H.conj().T)
    sy_v = -1j * (SIGMA_V - SIGMA_V.conj().T)
    gen = math.cos(phi) * sy_h + math.sin(phi) * sy_v
    if normalize_pulse_area:
        gen = gen * math.sqrt(2)
    return scipy.linalg.expm(-1j * math.pi * gen / 2)


def excitation_channel(p: TrionParams) -> SuperOperator:
    """Instantaneous linearly polarized pulse followed by hole-spin dephasing."""
    u = unitary_super(excitation_unitary(p.phi_ex, p.normalize_pulse_area))
    m = dephasing_super(SZ_H, p.lambda_ex) @ u
    return SuperOperator(m, DIMS, LABELS, "channel", trace_preserving=True)


def osrp_unitary(theta: float) -> np.ndarray:
    return scipy.linalg.expm(-1j * theta * SZ_E / 2)


def osrp_channel(p: TrionParams, theta: float) -> SuperOperator:
    """Phase rotation of the electron spin followed by electron dephasing."""
    m = dephasing_super(SZ_E, p.lambda_osrp) @ unitary_super(osrp_unitary(theta))
    return SuperOperator(m, DIMS, LABELS, "channel", trace_preserving=True)


def _ground_maps() -> tuple[np.ndarray, np.ndarray]:
    emb = np.zeros((16, 4))
    for a in range(2):
        for b in range(2):
            emb[a + 4 * b, a + 2 * b] = 1
    return emb, emb.T


def ground_block(m: np.ndarray) -> np.ndarray:
    """Restrict a 16x16 superoperator to 2x2 ground-manifold inputs and outputs."""
    emb, res = _ground_maps()
    return res @ np.asarray(m) @ emb


def spin_free_channel(p: TrionParams, s: OverhauserSample, t: float) -> np.ndarray:
    """4x4 spin-qubit propagator over ``t``; exact because nothing drives the optical transition."""
    if t < 0:
        raise ParameterError("duration must be non-negative")
    return ground_block(scipy.linalg.expm(liouvillian(p, s).matrix * t))


def spin_osrp_channel(p: TrionParams, theta: float) -> np.ndarray:
    return ground_block(osrp_channel(p, theta).matrix)
