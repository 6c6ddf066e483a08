"""Dense labeled-tensor algebra used to evaluate process diagrams.

A :class:`LabeledTensor` stores one array axis per wire ("leg").  Every leg
carries a label, a dimension and a polarity (``"in"`` or ``"out"``).  A leg is
identified by its ``(label, polarity)`` key, so a process ``A -> A`` may use the
label ``"a"`` on both sides.

Contraction glues the out-leg of one tensor to the equally labelled in-leg of
another, i.e. the matrix view (in-legs as rows, out-legs as columns) composes
as ``T1.matrix @ T2.matrix``.  The same engine is used for Hilbert-space
operators, for completely positive maps in superoperator form (leg dimension
``d**2``) and for nonnegative matrices.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

IN = "in"
OUT = "out"

# Frobenius tolerance for Choi-scale objects and eigenvalue slack for PSD tests.
ATOL = 1e-8
PSD_TOL = 1e-9
MAX_TOTAL_DIM = 64


class TensorError(ValueError):
    """Raised on malformed legs, polarity clashes or dimension mismatches."""


@dataclass(frozen=True)
class Leg:
    label: str
    dim: int
    polarity: str

    def __post_init__(self):
        if self.polarity not in (IN, OUT):
            raise TensorError(f"bad polarity {self.polarity!r}")
        if int(self.dim) < 1:
            raise TensorError(f"leg {self.label!r} has dimension {self.dim}")

    @property
    def key(self) -> tuple[str, str]:
        return (self.label, self.polarity)

    def flipped(self, label: str | None = None) -> "Leg":
        return Leg(self.label if label is None else label, self.dim, OUT if self.polarity == IN else IN)


def _as_legs(legs: Iterable) -> tuple[Leg, ...]:
    out = []
    for leg in legs:
        if isinstance(leg, Leg):
            out.append(leg)
        elif isinstance(leg, Mapping):
            out.append(Leg(str(leg["label"]), int(leg["dim"]), str(leg["polarity"])))
        else:
            label, dim, pol = leg
            out.append(Leg(str(label), int(dim), str(pol)))
    return tuple(out)


class LabeledTensor:
    """Immutable dense complex tensor with named, polarized legs."""

    __slots__ = ("legs", "data")

    def __init__(self, legs: Iterable, data):
        legs = _as_legs(legs)
        keys = [leg.key for leg in legs]
        if len(set(keys)) != len(keys):
            raise TensorError(f"duplicate legs in {keys}")
        arr = np.array(data, dtype=complex)
        shape = tuple(leg.dim for leg in legs)
        if arr.size != int(np.prod(shape, dtype=int)):
            raise TensorError(f"data of size {arr.size} does not fit legs {shape}")
        arr = arr.reshape(shape)
        arr.flags.writeable = False
        object.__setattr__(self, "legs", legs)
        object.__setattr__(self, "data", arr)

    def __setattr__(self, name, value):
        raise AttributeError("LabeledTensor is immutable")

    def __repr__(self):
        legs = ", ".join(f"{l.label}:{l.dim}:{l.polarity}" for l in self.legs)
        return f"LabeledTensor([{legs}])"

    # -- leg bookkeeping -------------------------------------------------
    @property
    def keys(self) -> list[tuple[str, str]]:
        return [leg.key for leg in self.legs]

    @property
    def in_legs(self) -> list[Leg]:
        return [leg for leg in self.legs if leg.polarity == IN]

    @property
    def out_legs(self) -> list[Leg]:
        return [leg for leg in self.legs if leg.polarity == OUT]

    def leg(self, label: str, polarity: str) -> Leg:
        for leg in self.legs:
            if leg.key == (label, polarity):
                return leg
        raise TensorError(f"no {polarity}-leg labelled {label!r} in {self!r}")

    def has_leg(self, label: str, polarity: str) -> bool:
        return (label, polarity) in self.keys

    def axis(self, label: str, polarity: str) -> int:
        try:
            return self.keys.index((label, polarity))
        except ValueError:
            raise TensorError(f"no {polarity}-leg labelled {label!r} in {self!r}") from None

    @property
    def matrix(self) -> np.ndarray:
        """Matrix view: in-legs (in leg order) as rows, out-legs as columns."""
        ins = [i for i, leg in enumerate(self.legs) if leg.polarity == IN]
        outs = [i for i, leg in enumerate(self.legs) if leg.polarity == OUT]
        rows = int(np.prod([self.legs[i].dim for i in ins], dtype=int))
        cols = int(np.prod([self.legs[i].dim for i in outs], dtype=int))
        return self.data.transpose(ins + outs).reshape(rows, cols)

    @classmethod
    def from_matrix(cls, matrix, legs: Iterable) -> "LabeledTensor":
        """Inverse of :attr:`matrix`; ``legs`` are listed in-legs first."""
        legs = _as_legs(legs)
        ins = [leg for leg in legs if leg.polarity == IN]
        outs = [leg for leg in legs if leg.polarity == OUT]
        m = np.asarray(matrix, dtype=complex)
        shape = tuple(leg.dim for leg in ins + outs)
        if m.size != int(np.prod(shape, dtype=int)):
            raise TensorError("matrix does not fit the given legs")
        return cls(ins + outs, m.reshape(shape))

    def permute(self, keys: Sequence[tuple[str, str]]) -> "LabeledTensor":
        """Reorder legs to ``keys`` (a permutation of :attr:`keys`)."""
        keys = list(keys)
        if sorted(keys) != sorted(self.keys):
            raise TensorError(f"{keys} is not a permutation of {self.keys}")
        order = [self.keys.index(k) for k in keys]
        return LabeledTensor([self.legs[i] for i in order], self.data.transpose(order))

    def relabel(self, mapping: Mapping[str, str], polarity: str | None = None) -> "LabeledTensor":
        """Rename legs; restrict to one polarity if given."""
        legs = []
        for leg in self.legs:
            if leg.label in mapping and (polarity is None or leg.polarity == polarity):
                legs.append(Leg(mapping[leg.label], leg.dim, leg.polarity))
            else:
                legs.append(leg)
        return LabeledTensor(legs, self.data)

    def flip(self, label: str, polarity: str, new_label: str | None = None) -> "LabeledTensor":
        """Turn one leg around without touching the data.

        With the unnormalised cup/cap this is exactly contraction with
        :func:`bell_cup` (in -> out) or :func:`bell_cap` (out -> in).
        """
        idx = self.axis(label, polarity)
        legs = list(self.legs)
        legs[idx] = legs[idx].flipped(new_label)
        return LabeledTensor(legs, self.data)

    # -- arithmetic ------------------------------------------------------
    def aligned(self, other: "LabeledTensor") -> np.ndarray:
        """``other.data`` permuted to this tensor's leg order."""
        if sorted(other.keys) != sorted(self.keys):
            raise TensorError(f"leg mismatch: {self.keys} vs {other.keys}")
        for leg in self.legs:
            if other.leg(*leg.key).dim != leg.dim:
                raise TensorError(f"dim mismatch on leg {leg.key}")
        return other.permute(self.keys).data

    def __add__(self, other: "LabeledTensor") -> "LabeledTensor":
        return LabeledTensor(self.legs, self.data + self.aligned(other))

    def __sub__(self, other: "LabeledTensor") -> "LabeledTensor":
        return LabeledTensor(self.legs, self.data - self.aligned(other))

    def __mul__(self, scalar) -> "LabeledTensor":
        return LabeledTensor(self.legs, self.data * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    def norm(self) -> float:
        return float(np.linalg.norm(self.data.ravel()))

    def distance(self, other: "LabeledTensor") -> float:
        """Frobenius distance after aligning legs."""
        return float(np.linalg.norm((self.data - self.aligned(other)).ravel()))

    def allclose(self, other: "LabeledTensor", atol: float = ATOL) -> bool:
        return self.distance(other) <= atol


@dataclass(frozen=True)
class SystemType:
    """Ordered list of ``(label, dim)`` factors; concatenation is ``+``."""

    factors: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        facs = tuple((str(l), int(d)) for l, d in self.factors)
        labels = [l for l, _ in facs]
        if len(set(labels)) != len(labels):
            raise TensorError(f"duplicate labels in system type {labels}")
        for label, dim in facs:
            if dim < 1:
                raise TensorError(f"factor {label!r} has dimension {dim}")
        object.__setattr__(self, "factors", facs)

    @classmethod
    def of(cls, *pairs) -> "SystemType":
        """``SystemType.of("a", 2, "b", 3)`` or ``SystemType.of(("a", 2))``."""
        if pairs and isinstance(pairs[0], str):
            pairs = tuple(zip(pairs[::2], pairs[1::2]))
        return cls(tuple(pairs))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(l for l, _ in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.factors)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=int))

    def dim(self, label: str) -> int:
        return dict(self.factors)[label]

    def __add__(self, other: "SystemType") -> "SystemType":
        return SystemType(self.factors + other.factors)

    def __len__(self):
        return len(self.factors)

    def __contains__(self, label) -> bool:
        return label in self.labels

    def relabel(self, mapping: Mapping[str, str]) -> "SystemType":
        return SystemType(tuple((mapping.get(l, l), d) for l, d in self.factors))

    def select(self, labels: Iterable[str]) -> "SystemType":
        labels = set(labels)
        return SystemType(tuple(f for f in self.factors if f[0] in labels))

    def without(self, labels: Iterable[str]) -> "SystemType":
        labels = set(labels)
        return SystemType(tuple(f for f in self.factors if f[0] not in labels))

    def same_as(self, other: "SystemType") -> bool:
        """Equal as sets of factors (order ignored)."""
        return sorted(self.factors) == sorted(other.factors)


# -- plain matrices --------------------------------------------------------


def kron(a, b, *more) -> np.ndarray:
    """Kronecker product (parallel composition of matrices)."""
    out = np.kron(np.asarray(a), np.asarray(b))
    for m in more:
        out = np.kron(out, np.asarray(m))
    return out


def dagger(m) -> np.ndarray:
    return np.asarray(m).conj().T


def _square(m) -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise TensorError(f"expected a square matrix, got shape {m.shape}")
    return m


def hermitian_check(m, tol: float = PSD_TOL) -> bool:
    m = _square(m)
    return bool(np.linalg.norm(m - m.conj().T) <= tol)


def min_eigenvalue(m) -> float:
    m = _square(m)
    h = (m + m.conj().T) / 2
    return float(np.linalg.eigvalsh(h).min()) if h.size else 0.0


def psd_check(m, tol: float = PSD_TOL) -> bool:
    """Hermitian within ``tol`` (Frobenius) and no eigenvalue below ``-tol``."""
    m = _square(m)
    return hermitian_check(m, tol) and min_eigenvalue(m) >= -tol


# -- tensor operations ---------------------------------------------------------


def contract(t1: LabeledTensor, t2: LabeledTensor, shared: Iterable[str] | None = None) -> LabeledTensor:
    """Glue ``t1``'s out-legs to ``t2``'s in-legs with the labels in ``shared``.

    ``shared=None`` links every label that is an out-leg of ``t1`` and an
    in-leg of ``t2``.  An empty set gives the tensor (parallel) product.
    The result keeps ``t1``'s free legs followed by ``t2``'s.
    """
    if shared is None:
        outs1 = {leg.label for leg in t1.out_legs}
        shared = [leg.label for leg in t2.in_legs if leg.label in outs1]
    shared = list(dict.fromkeys(shared))
    counter = itertools.count()
    ids1 = [next(counter) for _ in t1.legs]
    ids2 = [None] * len(t2.legs)
    for label in shared:
        i1 = t1.axis(label, OUT)
        try:
            i2 = t2.axis(label, IN)
        except TensorError:
            if t2.has_leg(label, OUT):
                raise TensorError(f"polarity clash on {label!r}: out-leg on both sides") from None
            raise
        if t1.legs[i1].dim != t2.legs[i2].dim:
            raise TensorError(f"dim mismatch on {label!r}: {t1.legs[i1].dim} vs {t2.legs[i2].dim}")
        ids2[i2] = ids1[i1]
    ids2 = [i if i is not None else next(counter) for i in ids2]
    shared_keys1 = {(label, OUT) for label in shared}
    shared_keys2 = {(label, IN) for label in shared}
    free1 = [(i, leg) for i, leg in zip(ids1, t1.legs) if leg.key not in shared_keys1]
    free2 = [(i, leg) for i, leg in zip(ids2, t2.legs) if leg.key not in shared_keys2]
    legs = [leg for _, leg in free1 + free2]
    if len({leg.key for leg in legs}) != len(legs):
        raise TensorError(f"contraction would duplicate legs: {[leg.key for leg in legs]}")
    out_ids = [i for i, _ in free1 + free2]
    if next(counter) > 52:
        data = _einsum_letters(t1.data, ids1, t2.data, ids2, out_ids)
    else:
        data = np.einsum(t1.data, ids1, t2.data, ids2, out_ids, optimize=True)
    return LabeledTensor(legs, data)


def _einsum_letters(a, ia, b, ib, iout):
    # fallback for networks with more than 52 distinct indices
    import string

    letters = string.ascii_letters
    if max(ia + ib + iout) >= len(letters):
        raise TensorError("too many legs for a single contraction")
    spec = "".join(letters[i] for i in ia) + "," + "".join(letters[i] for i in ib) + "->" + "".join(
        letters[i] for i in iout
    )
    return np.einsum(spec, a, b, optimize=True)


def tensor_product(*tensors: LabeledTensor) -> LabeledTensor:
    out = tensors[0]
    for t in tensors[1:]:
        out = contract(out, t, shared=())
    return out


def partial_trace(t: LabeledTensor, labels: Iterable[str]) -> LabeledTensor:
    """Join the in- and out-leg of each label and sum over the diagonal."""
    labels = list(dict.fromkeys(labels))
    ids = list(range(len(t.legs)))
    drop = set()
    for label in labels:
        i_in = t.axis(label, IN)
        i_out = t.axis(label, OUT)
        if t.legs[i_in].dim != t.legs[i_out].dim:
            raise TensorError(f"cannot trace {label!r}: dims {t.legs[i_in].dim} and {t.legs[i_out].dim}")
        ids[i_out] = ids[i_in]
        drop.update((i_in, i_out))
    keep = [i for i in range(len(t.legs)) if i not in drop]
    data = np.einsum(t.data, ids, [ids[i] for i in keep])
    return LabeledTensor([t.legs[i] for i in keep], data)


def identity_tensor(label: str, dim: int, out_label: str | None = None) -> LabeledTensor:
    """The identity wire: in-leg ``label`` to out-leg ``out_label``."""
    return LabeledTensor([Leg(label, dim, IN), Leg(out_label or label, dim, OUT)], np.eye(dim))


def bell_cup(d: int, labels: tuple[str, str] = ("cup*", "cup")) -> LabeledTensor:
    """Unnormalised cup ``sum_i |ii>``: a state with two out-legs."""
    if int(d) < 1:
        raise TensorError("bell_cup needs d >= 1")
    return LabeledTensor([Leg(labels[0], d, OUT), Leg(labels[1], d, OUT)], np.eye(d))


def bell_cap(d: int, labels: tuple[str, str] = ("cap", "cap*")) -> LabeledTensor:
    """Unnormalised cap ``sum_i <ii|``: an effect with two in-legs."""
    if int(d) < 1:
        raise TensorError("bell_cap needs d >= 1")
    return LabeledTensor([Leg(labels[0], d, IN), Leg(labels[1], d, IN)], np.eye(d))


def scalar(t: LabeledTensor) -> complex:
    if t.legs:
        raise TensorError(f"{t!r} is not a scalar")
    return complex(t.data)


# -- operator <-> leg-pair reshuffles ------------------------------------------------


def operator_to_pairs(op, dims: Sequence[int]) -> np.ndarray:
    """Reshuffle an operator on ``prod(dims)`` into one ``d*d`` axis per factor.

    Axis ``m`` carries the combined index ``ket_m * d_m + bra_m``.
    """
    dims = [int(d) for d in dims]
    n = len(dims)
    op = np.asarray(op, dtype=complex).reshape(dims + dims)
    order = [k for m in range(n) for k in (m, n + m)]
    return op.transpose(order).reshape([d * d for d in dims])


def pairs_to_operator(arr, dims: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`operator_to_pairs`."""
    dims = [int(d) for d in dims]
    n = len(dims)
    a = np.asarray(arr, dtype=complex).reshape([x for d in dims for x in (d, d)])
    order = [2 * m for m in range(n)] + [2 * m + 1 for m in range(n)]
    total = int(np.prod(dims, dtype=int))
    return a.transpose(order).reshape(total, total)


# -- interchange format ------------------------------------------------------------------


def matrix_to_dict(m, legs: Iterable[Leg] | None = None) -> dict:
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    doc = {
        "rows": int(m.shape[0]),
        "cols": int(m.shape[1]),
        "entries": [[float(z.real), float(z.imag)] for z in m.ravel()],
    }
    if legs is not None:
        doc["legs"] = [{"label": l.label, "dim": l.dim, "polarity": l.polarity} for l in legs]
    return doc


def matrix_from_dict(doc: Mapping) -> np.ndarray:
    try:
        rows, cols = int(doc["rows"]), int(doc["cols"])
        entries = doc["entries"]
        vals = [complex(float(re), float(im)) for re, im in entries]
    except (KeyError, TypeError, ValueError) as exc:
        raise TensorError(f"malformed matrix document: {exc}") from exc
    if len(vals) != rows * cols:
        raise TensorError(f"expected {rows * cols} entries, got {len(vals)}")
    return np.array(vals, dtype=complex).reshape(rows, cols)


def tensor_to_dict(t: LabeledTensor) -> dict:
    return matrix_to_dict(t.matrix, t.in_legs + t.out_legs)


def tensor_from_dict(doc: Mapping) -> LabeledTensor:
    m = matrix_from_dict(doc)
    if "legs" not in doc:
        raise TensorError("document has no legs")
    return LabeledTensor.from_matrix(m, doc["legs"])
