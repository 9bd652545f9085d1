"""Dense operators over labeled tensor-product spaces.

The basis of a :class:`LabeledOperator` is the row-major product basis of its
subsystems, in label order: the first label is the slowest-varying index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

DEFAULT_TOL = 1e-9


class LabelError(ValueError):
    """Raised for unknown, duplicated or mismatched subsystem labels."""


class NotHermitianError(ValueError):
    """Raised when a Hermitian operator is required but not supplied."""


@dataclass(frozen=True)
class Subsystem:
    name: str
    dim: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"subsystem {self.name!r} needs a positive integer dim, got {self.dim}")


def _as_subsystems(labels) -> tuple[Subsystem, ...]:
    out = []
    for lab in labels:
        if isinstance(lab, Subsystem):
            out.append(lab)
        else:
            name, dim = lab
            out.append(Subsystem(str(name), int(dim)))
    names = [s.name for s in out]
    if len(set(names)) != len(names):
        raise LabelError(f"duplicate subsystem labels in {names}")
    return tuple(out)


class LabeledOperator:
    """A square complex matrix acting on an ordered product of named subsystems."""

    __slots__ = ("labels", "data")

    def __init__(self, labels, data):
        labels = _as_subsystems(labels)
        data = np.array(data, dtype=complex)
        total = int(np.prod([s.dim for s in labels], dtype=np.int64))
        if data.shape != (total, total):
            raise ValueError(f"matrix shape {data.shape} does not match subsystem dims {self_dims(labels)}")
        data.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "data", data)

    def __setattr__(self, key, value):
        raise AttributeError("LabeledOperator is immutable")

    def __repr__(self):
        inner = ", ".join(f"{s.name}:{s.dim}" for s in self.labels)
        return f"LabeledOperator([{inner}])"

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.labels)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.dim for s in self.labels)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def dim_of(self, name: str) -> int:
        return self.labels[self.index(name)].dim

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise LabelError(f"unknown subsystem label {name!r}; have {self.names}") from None

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def dag(self) -> "LabeledOperator":
        return LabeledOperator(self.labels, self.data.conj().T)

    def transpose(self) -> "LabeledOperator":
        return LabeledOperator(self.labels, self.data.T)

    def is_hermitian(self, tol: float = DEFAULT_TOL) -> bool:
        return bool(np.max(np.abs(self.data - self.data.conj().T), initial=0.0) <= tol)

    def __add__(self, other):
        other = other.reorder(self.names)
        return LabeledOperator(self.labels, self.data + other.data)

    def __sub__(self, other):
        other = other.reorder(self.names)
        return LabeledOperator(self.labels, self.data - other.data)

    def __mul__(self, scalar):
        return LabeledOperator(self.labels, self.data * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return LabeledOperator(self.labels, self.data / scalar)

    def __matmul__(self, other):
        other = other.reorder(self.names)
        return LabeledOperator(self.labels, self.data @ other.data)

    def tensor_view(self) -> np.ndarray:
        """Data reshaped to ``dims + dims`` (row indices first)."""
        return self.data.reshape(self.dims + self.dims)

    def reorder(self, names: Sequence[str]) -> "LabeledOperator":
        """Permute the tensor factors into the order given by ``names``."""
        names = tuple(names)
        if names == self.names:
            return self
        if sorted(names) != sorted(self.names):
            raise LabelError(f"cannot reorder {self.names} into {names}")
        perm = [self.index(n) for n in names]
        k = len(perm)
        t = self.tensor_view().transpose(perm + [p + k for p in perm])
        labels = [self.labels[p] for p in perm]
        return LabeledOperator(labels, t.reshape(self.dim, self.dim))


def self_dims(labels) -> tuple[int, ...]:
    return tuple(s.dim for s in labels)


def identity(labels) -> LabeledOperator:
    labels = _as_subsystems(labels)
    d = int(np.prod([s.dim for s in labels], dtype=np.int64))
    return LabeledOperator(labels, np.eye(d))


def ket_to_operator(labels, ket) -> LabeledOperator:
    """Projector ``|ket><ket|`` (no normalization is applied)."""
    ket = np.asarray(ket, dtype=complex).ravel()
    return LabeledOperator(labels, np.outer(ket, ket.conj()))


def tensor(a: LabeledOperator, b: LabeledOperator, *more: LabeledOperator) -> LabeledOperator:
    """Kronecker product with concatenated labels."""
    out = LabeledOperator(a.labels + b.labels, np.kron(a.data, b.data))
    for c in more:
        out = tensor(out, c)
    return out


def _names_set(op: LabeledOperator, over) -> list[str]:
    if isinstance(over, str):
        over = [over]
    over = list(dict.fromkeys(over))
    for n in over:
        op.index(n)
    return over


def partial_trace(op: LabeledOperator, over: Iterable[str]) -> LabeledOperator:
    """Trace out the named subsystems; the remaining labels keep their order."""
    over = _names_set(op, over)
    keep = [i for i, n in enumerate(op.names) if n not in over]
    drop = [op.index(n) for n in over]
    k = len(op.labels)
    t = op.tensor_view()
    # Move the traced axes to the end (row block, then column block) and contract.
    t = t.transpose(keep + [k + i for i in keep] + drop + [k + i for i in drop])
    kdims = [op.labels[i].dim for i in keep]
    dkeep = int(np.prod(kdims, dtype=np.int64))
    ddrop = int(np.prod([op.labels[i].dim for i in drop], dtype=np.int64))
    t = t.reshape(dkeep, dkeep, ddrop, ddrop)
    data = np.trace(t, axis1=2, axis2=3)
    return LabeledOperator([op.labels[i] for i in keep], data)


def embed(op: LabeledOperator, labels: Sequence) -> LabeledOperator:
    """Tensor ``op`` with identities on the missing ``labels`` and order as ``labels``."""
    labels = _as_subsystems(labels)
    missing = [s for s in labels if s.name not in op.names]
    out = tensor(op, identity(missing)) if missing else op
    return out.reorder([s.name for s in labels])


def depolarize_to_identity(op: LabeledOperator, over: Iterable[str]) -> LabeledOperator:
    """Replace the named factors by the normalized identity: ``(1/d) ⊗ Tr_X op``.

    The result keeps the original label order.
    """
    over = _names_set(op, over)
    if not over:
        return op
    reduced = partial_trace(op, over)
    traced = [op.labels[op.index(n)] for n in over]
    d = int(np.prod([s.dim for s in traced], dtype=np.int64))
    return embed(reduced, op.labels) / d


def min_eigenvalue(op: LabeledOperator, tol: float = DEFAULT_TOL) -> float:
    if not op.is_hermitian(tol):
        raise NotHermitianError("operator is not Hermitian within tolerance")
    herm = 0.5 * (op.data + op.data.conj().T)
    return float(np.linalg.eigvalsh(herm)[0])


def is_positive_semidefinite(op: LabeledOperator, tol: float = DEFAULT_TOL) -> bool:
    """True iff the smallest eigenvalue is at least ``-tol``.

    Raises :class:`NotHermitianError` for non-Hermitian input.
    """
    return min_eigenvalue(op, tol) >= -tol


def operator_norm(op) -> float:
    """Spectral norm (largest singular value)."""
    data = op.data if isinstance(op, LabeledOperator) else np.asarray(op)
    if data.size == 0:
        return 0.0
    return float(np.linalg.norm(data, 2))


def inner(a: LabeledOperator, b: LabeledOperator) -> complex:
    """Hilbert-Schmidt inner product ``Tr(a^dag b)``."""
    b = b.reorder(a.names)
    return complex(np.vdot(a.data, b.data))
