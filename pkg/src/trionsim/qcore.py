"""Dense linear algebra for small multi-qubit (and multi-level) registers.

Every object carries an ordered tuple of subsystem ``labels`` and matching
``dims``.  Density matrices are vectorized by column stacking, so that
``vec(A X B) = (B^T kron A) vec(X)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-8


class QCoreError(ValueError):
    """Raised when an operation receives incompatible quantum objects."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.flags.writeable = False
    return a


def _check_labels(labels: tuple[str, ...], dims: tuple[int, ...], dim: int) -> None:
    if len(labels) != len(dims):
        raise QCoreError(f"{len(labels)} labels for {len(dims)} subsystems")
    if len(set(labels)) != len(labels):
        raise QCoreError(f"duplicate labels {labels}")
    if int(np.prod(dims, dtype=int)) != dim:
        raise QCoreError(f"dims {dims} do not multiply to {dim}")


@dataclass(frozen=True)
class Ket:
    amplitudes: np.ndarray
    dims: tuple[int, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "amplitudes", _freeze(np.ravel(self.amplitudes)))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "labels", tuple(self.labels))
        _check_labels(self.labels, self.dims, self.dim)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    @classmethod
    def normalized(cls, amplitudes, dims, labels) -> "Ket":
        v = np.asarray(amplitudes, dtype=complex).ravel()
        n = np.linalg.norm(v)
        if n == 0:
            raise QCoreError("cannot normalize the zero vector")
        return cls(v / n, dims, labels)

    def projector(self) -> "DensityMatrix":
        v = self.amplitudes
        return DensityMatrix(np.outer(v, v.conj()), self.dims, self.labels)


@dataclass(frozen=True)
class Operator:
    entries: np.ndarray
    dims: tuple[int, ...]
    labels: tuple[str, ...]
    hermitian: bool = False

    def __post_init__(self):
        object.__setattr__(self, "entries", _freeze(self.entries))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "labels", tuple(self.labels))
        m = self.entries
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise QCoreError(f"operator must be square, got {m.shape}")
        _check_labels(self.labels, self.dims, self.dim)
        if self.hermitian and not np.allclose(m, m.conj().T, atol=1e-12, rtol=0):
            raise QCoreError("operator flagged Hermitian is not")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class DensityMatrix:
    entries: np.ndarray
    dims: tuple[int, ...]
    labels: tuple[str, ...]
    normalized: bool = True

    def __post_init__(self):
        object.__setattr__(self, "entries", _freeze(self.entries))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "labels", tuple(self.labels))
        m = self.entries
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise QCoreError(f"density matrix must be square, got {m.shape}")
        _check_labels(self.labels, self.dims, self.dim)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    def validate(self, psd_tol: float = PSD_TOL) -> "DensityMatrix":
        """Check Hermiticity, trace and positivity; return self for chaining."""
        m = self.entries
        if not np.allclose(m, m.conj().T, atol=HERMITIAN_TOL, rtol=0):
            raise QCoreError("density matrix is not Hermitian")
        tr = self.trace
        if self.normalized and abs(tr - 1) > TRACE_TOL:
            raise QCoreError(f"normalized density matrix has trace {tr}")
        if not self.normalized and not (-TRACE_TOL <= tr <= 1 + TRACE_TOL):
            raise QCoreError(f"branch trace {tr} outside [0, 1]")
        lo = np.linalg.eigvalsh((m + m.conj().T) / 2).min()
        if lo < -psd_tol:
            raise QCoreError(f"density matrix has eigenvalue {lo}")
        return self

    def normalize(self) -> "DensityMatrix":
        tr = self.trace
        if tr <= 0:
            raise QCoreError("cannot normalize a branch with zero probability")
        return DensityMatrix(self.entries / tr, self.dims, self.labels)

    def to_json(self) -> str:
        return json.dumps(density_to_dict(self))

    @classmethod
    def from_json(cls, text: str) -> "DensityMatrix":
        return density_from_dict(json.loads(text))


@dataclass(frozen=True)
class SuperOperator:
    """Matrix acting on column-stacked density matrices.

    ``kind`` is ``"generator"`` for Liouvillian-like objects (trace
    preservation means ``vec(I)^T G = 0``) or ``"channel"`` for maps
    (trace preservation means ``vec(I)^T C = vec(I)^T``).
    """

    matrix: np.ndarray
    dims: tuple[int, ...]
    labels: tuple[str, ...]
    kind: str = "generator"
    trace_preserving: bool = False

    def __post_init__(self):
        object.__setattr__(self, "matrix", _freeze(self.matrix))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "labels", tuple(self.labels))
        if self.kind not in ("generator", "channel"):
            raise QCoreError(f"unknown superoperator kind {self.kind!r}")
        d = int(np.prod(self.dims, dtype=int))
        if self.matrix.shape != (d * d, d * d):
            raise QCoreError(f"superoperator shape {self.matrix.shape} != {(d * d, d * d)}")
        _check_labels(self.labels, self.dims, d)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims, dtype=int))

    def trace_defect(self) -> float:
        """Largest deviation from the trace-preservation condition."""
        row = vec(np.eye(self.dim)).conj() @ self.matrix
        target = 0 if self.kind == "generator" else vec(np.eye(self.dim))
        return float(np.max(np.abs(row - target)))

    def __matmul__(self, other: "SuperOperator") -> "SuperOperator":
        if self.kind != "channel" or other.kind != "channel":
            raise QCoreError("only channels compose")
        if self.dims != other.dims:
            raise QCoreError("dimension mismatch")
        return SuperOperator(self.matrix @ other.matrix, self.dims, self.labels, "channel",
                             self.trace_preserving and other.trace_preserving)

    def apply(self, rho: DensityMatrix) -> DensityMatrix:
        if self.kind != "channel":
            raise QCoreError("apply() needs a channel; use propagate() for generators")
        _match(self, rho)
        out = unvec(self.matrix @ vec(rho.entries), rho.dim)
        return DensityMatrix(out, rho.dims, rho.labels, rho.normalized and self.trace_preserving)


def vec(m: np.ndarray) -> np.ndarray:
    return np.asarray(m).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape(dim, dim, order="F")


def commutator_super(h: np.ndarray) -> np.ndarray:
    """Superoperator of ``rho -> -i [h, rho]`` (hbar = 1)."""
    i = np.eye(h.shape[0])
    return -1j * (np.kron(i, h) - np.kron(h.T, i))


def dissipator_super(c: np.ndarray) -> np.ndarray:
    """Superoperator of ``rho -> c rho c^+ - {c^+ c, rho}/2``."""
    i = np.eye(c.shape[0])
    cdc = c.conj().T @ c
    return np.kron(c.conj(), c) - 0.5 * np.kron(i, cdc) - 0.5 * np.kron(cdc.T, i)


def jump_super(c: np.ndarray) -> np.ndarray:
    """Superoperator of ``rho -> c rho c^+``."""
    return np.kron(c.conj(), c)


def unitary_super(u: np.ndarray) -> np.ndarray:
    return np.kron(u.conj(), u)


def choi_matrix(superop: np.ndarray, dim_in: int, dim_out: int | None = None) -> np.ndarray:
    """Choi matrix ``sum_ij |i><j| kron S(|i><j|)`` (input factor first)."""
    dim_out = dim_in if dim_out is None else dim_out
    choi = np.zeros((dim_in * dim_out, dim_in * dim_out), dtype=complex)
    for i in range(dim_in):
        for j in range(dim_in):
            e = np.zeros((dim_in, dim_in))
            e[i, j] = 1
            out = unvec(superop @ vec(e), dim_out)
            choi[i * dim_out:(i + 1) * dim_out, j * dim_out:(j + 1) * dim_out] = out
    return choi


def _match(a, b) -> None:
    if a.dims != b.dims:
        raise QCoreError(f"dimension mismatch {a.dims} vs {b.dims}")


def tensor(a, b):
    """Kronecker product of two objects of the same kind, labels concatenated."""
    if type(a) is not type(b):
        raise QCoreError(f"cannot tensor {type(a).__name__} with {type(b).__name__}")
    if set(a.labels) & set(b.labels):
        raise QCoreError(f"label collision {set(a.labels) & set(b.labels)}")
    dims = a.dims + b.dims
    labels = a.labels + b.labels
    if isinstance(a, Ket):
        return Ket(np.kron(a.amplitudes, b.amplitudes), dims, labels)
    if isinstance(a, Operator):
        return Operator(np.kron(a.entries, b.entries), dims, labels, a.hermitian and b.hermitian)
    if isinstance(a, DensityMatrix):
        return DensityMatrix(np.kron(a.entries, b.entries), dims, labels,
                             a.normalized and b.normalized)
    raise QCoreError(f"tensor not defined for {type(a).__name__}")


def partial_trace(rho: DensityMatrix, keep: Sequence[str]) -> DensityMatrix:
    keep = list(keep)
    unknown = [k for k in keep if k not in rho.labels]
    if unknown:
        raise QCoreError(f"unknown subsystem labels {unknown}")
    keep_idx = sorted(rho.labels.index(k) for k in keep)
    n = len(rho.dims)
    t = rho.entries.reshape(rho.dims + rho.dims)
    # einsum letters: row indices a.., column indices shared for traced factors
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    if 2 * n > len(letters):
        raise QCoreError("too many subsystems for partial_trace")
    rows = list(letters[:n])
    cols = [rows[i] if i not in keep_idx else letters[n + i] for i in range(n)]
    out = "".join(rows[i] for i in keep_idx) + "".join(cols[i] for i in keep_idx)
    reduced = np.einsum("".join(rows) + "".join(cols) + "->" + out, t)
    dims = tuple(rho.dims[i] for i in keep_idx)
    d = int(np.prod(dims, dtype=int))
    return DensityMatrix(reduced.reshape(d, d), dims, tuple(rho.labels[i] for i in keep_idx),
                         rho.normalized)


def propagator(g: SuperOperator, t: float) -> SuperOperator:
    if t < 0:
        raise QCoreError("propagation time must be non-negative")
    if g.kind != "generator":
        raise QCoreError("propagator() needs a generator")
    return SuperOperator(scipy.linalg.expm(g.matrix * t), g.dims, g.labels, "channel",
                         g.trace_preserving)


def propagate(g: SuperOperator, t: float, rho: DensityMatrix) -> DensityMatrix:
    _match(g, rho)
    return propagator(g, t).apply(rho)


def embed(op: np.ndarray, dims: Sequence[int], index: int) -> np.ndarray:
    """Lift a single-subsystem matrix to the full register."""
    out = np.eye(1)
    for k, d in enumerate(dims):
        out = np.kron(out, op if k == index else np.eye(d))
    return out


def measure_project(rho: DensityMatrix, projector: Operator, subsystem: str):
    """Apply ``P`` on one subsystem; return the unnormalized branch and its probability."""
    if subsystem not in rho.labels:
        raise QCoreError(f"unknown subsystem {subsystem!r}")
    k = rho.labels.index(subsystem)
    p = projector.entries
    if p.shape[0] != rho.dims[k]:
        raise QCoreError("projector dimension does not match subsystem")
    if not (np.allclose(p @ p, p, atol=1e-12) and np.allclose(p, p.conj().T, atol=1e-12)):
        raise QCoreError("projector is not idempotent and Hermitian")
    full = embed(p, rho.dims, k)
    branch = full @ rho.entries @ full
    prob = float(np.trace(branch).real)
    return DensityMatrix(branch, rho.dims, rho.labels, normalized=False), prob


def density_to_dict(rho: DensityMatrix) -> dict:
    m = rho.entries
    return {
        "dim": rho.dim,
        "dims": list(rho.dims),
        "labels": list(rho.labels),
        "re": m.real.ravel().tolist(),
        "im": m.imag.ravel().tolist(),
    }


def density_from_dict(doc: dict) -> DensityMatrix:
    try:
        dim = int(doc["dim"])
        labels = tuple(doc["labels"])
        re = np.asarray(doc["re"], dtype=float)
        im = np.asarray(doc["im"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise QCoreError(f"malformed density-matrix document: {exc}") from exc
    if re.size != dim * dim or im.size != dim * dim:
        raise QCoreError("matrix payload does not match dim")
    dims = tuple(doc.get("dims", [2] * len(labels)))
    rho = DensityMatrix((re + 1j * im).reshape(dim, dim), dims, labels,
                        bool(doc.get("normalized", True)))
    return rho.validate()


def random_density(dims: Sequence[int], rng: np.random.Generator, labels=None, rank=None) -> DensityMatrix:
    """Random state from the induced (Ginibre) measure."""
    d = int(np.prod(dims, dtype=int))
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    m = g @ g.conj().T
    labels = labels or tuple(f"q{i}" for i in range(len(dims)))
    return DensityMatrix(m / np.trace(m).real, tuple(dims), tuple(labels))


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))
