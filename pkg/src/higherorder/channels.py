"""Channels, constrained channel sets, dilation extensions and control.

Processes are stored in superoperator form: one tensor leg per system
factor, in-legs for inputs and out-legs for outputs.  For quantum systems a
factor of dimension ``d`` becomes a leg of dimension ``d**2`` carrying the
combined index ``ket * d + bra``; the tensor entry at
``(i, j), (k, l)`` is ``Phi(|i><j|)[k, l]``.  Sequential composition is then a
plain leg contraction.  Classical systems (stochastic maps) use one leg of
dimension ``n`` per factor and share every routine here through
:data:`CLASSICAL`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .tensor_core import (
    ATOL,
    IN,
    OUT,
    PSD_TOL,
    LabeledTensor,
    Leg,
    SystemType,
    TensorError,
    contract,
    min_eigenvalue,
    operator_to_pairs,
    pairs_to_operator,
    psd_check,
    tensor_product,
)


class ChannelError(ValueError):
    pass


# ---------------------------------------------------------------------------
# theories


class Theory:
    """Quantum (density operators, CP maps) or classical (distributions)."""

    def __init__(self, name: str):
        self.name = name

    def __repr__(self):
        return f"Theory({self.name!r})"

    @property
    def quantum(self) -> bool:
        return self.name == "quantum"

    def leg_dim(self, d: int) -> int:
        return d * d if self.quantum else d

    def hilbert_dim(self, leg_dim: int) -> int:
        if not self.quantum:
            return leg_dim
        d = int(round(np.sqrt(leg_dim)))
        if d * d != leg_dim:
            raise ChannelError(f"leg dimension {leg_dim} is not a square")
        return d

    def state_data(self, state, dims: Sequence[int]) -> np.ndarray:
        """A state (density operator or probability vector) as leg data."""
        if self.quantum:
            return operator_to_pairs(state, dims)
        return np.asarray(state, dtype=complex).reshape(dims)

    def state_from_data(self, data, dims: Sequence[int]) -> np.ndarray:
        if self.quantum:
            return pairs_to_operator(data, dims)
        return np.asarray(data).reshape(-1)

    def effect_data(self, effect, dims: Sequence[int]) -> np.ndarray:
        """An effect as leg data; quantum effects are operators ``E`` acting as ``tr(E rho)``."""
        if self.quantum:
            return operator_to_pairs(np.asarray(effect).T, dims)
        return np.asarray(effect, dtype=complex).reshape(dims)

    def unit_effect(self, dims: Sequence[int]):
        total = int(np.prod(dims, dtype=int))
        return np.eye(total) if self.quantum else np.ones(total)

    def discard(self, d: int) -> np.ndarray:
        return self.effect_data(self.unit_effect([d]), [d])

    def maximally_mixed(self, dims: Sequence[int]):
        total = int(np.prod(dims, dtype=int))
        return self.unit_effect(dims) / total

    def random_state(self, dims: Sequence[int], rng: np.random.Generator, rank: int | None = None):
        total = int(np.prod(dims, dtype=int))
        if self.quantum:
            rank = rank or total
            g = rng.normal(size=(total, rank)) + 1j * rng.normal(size=(total, rank))
            rho = g @ g.conj().T
            return rho / np.trace(rho).real
        p = rng.dirichlet(np.ones(total))
        return p

    def positivity(self, channel: "Channel") -> float:
        """Smallest eigenvalue of the Choi operator (quantum) or smallest entry."""
        if self.quantum:
            return min_eigenvalue(channel.choi)
        data = channel.tensor.data
        return float(min(data.real.min(), 0.0) - np.abs(data.imag).max())


QUANTUM = Theory("quantum")
CLASSICAL = Theory("classical")


def trial_rng(seed, trial: int) -> np.random.Generator:
    """Independent generator for one trial; ``seed`` may be an int or a sequence."""
    base = [int(v) for v in np.atleast_1d(seed)]
    return np.random.default_rng(base + [int(trial)])


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# channels


@dataclass(frozen=True, eq=False)
class Channel:
    """A process ``in_type -> out_type`` in superoperator form."""

    in_type: SystemType
    out_type: SystemType
    tensor: LabeledTensor
    theory: Theory = field(default=QUANTUM)

    def __post_init__(self):
        th = self.theory
        keys = [(l, IN) for l in self.in_type.labels] + [(l, OUT) for l in self.out_type.labels]
        try:
            t = self.tensor.permute(keys)
        except TensorError as exc:
            raise ChannelError(f"tensor legs do not match {self.in_type} -> {self.out_type}: {exc}") from None
        for leg, d in zip(t.legs, self.in_type.dims + self.out_type.dims):
            if leg.dim != th.leg_dim(d):
                raise ChannelError(f"leg {leg.key} has dim {leg.dim}, expected {th.leg_dim(d)}")
        object.__setattr__(self, "tensor", t)

    @classmethod
    def from_tensor(cls, t: LabeledTensor, theory: Theory = QUANTUM) -> "Channel":
        in_type = SystemType(tuple((l.label, theory.hilbert_dim(l.dim)) for l in t.in_legs))
        out_type = SystemType(tuple((l.label, theory.hilbert_dim(l.dim)) for l in t.out_legs))
        return cls(in_type, out_type, t, theory)

    def __repr__(self):
        return f"Channel({list(self.in_type.factors)} -> {list(self.out_type.factors)}, {self.theory.name})"

    @property
    def dims(self) -> tuple[int, ...]:
        return self.in_type.dims + self.out_type.dims

    @property
    def choi(self) -> np.ndarray:
        """Choi operator ``sum |i><j| (x) Phi(|i><j|)``, inputs first.

        For classical maps this is the nonnegative ``in x out`` matrix.
        """
        if self.theory.quantum:
            return pairs_to_operator(self.tensor.data, self.dims)
        return self.tensor.matrix

    @property
    def matrix(self) -> np.ndarray:
        """Transfer matrix acting on column vectors (``out x in``)."""
        return self.tensor.matrix.T

    @property
    def deterministic(self) -> bool:
        return trace_deviation(self) <= ATOL

    def distance(self, other: "Channel") -> float:
        if not (self.in_type.same_as(other.in_type) and self.out_type.same_as(other.out_type)):
            raise ChannelError(f"type mismatch: {self!r} vs {other!r}")
        return self.tensor.distance(other.tensor)

    def allclose(self, other: "Channel", atol: float = ATOL) -> bool:
        return self.distance(other) <= atol

    def __add__(self, other: "Channel") -> "Channel":
        return Channel(self.in_type, self.out_type, self.tensor + other.tensor, self.theory)

    def __mul__(self, scalar) -> "Channel":
        return Channel(self.in_type, self.out_type, self.tensor * scalar, self.theory)

    __rmul__ = __mul__

    def relabel(self, in_map: Mapping[str, str] | None = None, out_map: Mapping[str, str] | None = None) -> "Channel":
        t = self.tensor
        if in_map:
            t = t.relabel(in_map, IN)
        if out_map:
            t = t.relabel(out_map, OUT)
        return Channel(self.in_type.relabel(in_map or {}), self.out_type.relabel(out_map or {}), t, self.theory)


def from_choi(choi, in_type: SystemType, out_type: SystemType, theory: Theory = QUANTUM) -> Channel:
    """Build a channel from its Choi operator (inputs first)."""
    dims = list(in_type.dims + out_type.dims)
    legs = [Leg(l, theory.leg_dim(d), IN) for l, d in in_type.factors]
    legs += [Leg(l, theory.leg_dim(d), OUT) for l, d in out_type.factors]
    if theory.quantum:
        data = operator_to_pairs(choi, dims)
    else:
        data = np.asarray(choi).reshape([d for d in dims])
    return Channel(in_type, out_type, LabeledTensor(legs, data), theory)


def _default_type(d: int, label: str = "a") -> SystemType:
    return SystemType.of(label, d)


def choi_from_kraus(kraus: Iterable, in_type: SystemType | None = None, out_type: SystemType | None = None) -> Channel:
    """Quantum channel ``rho -> sum_k K rho K^dag`` from Kraus operators."""
    ks = [np.asarray(k, dtype=complex) for k in kraus]
    if not ks:
        raise ChannelError("need at least one Kraus operator")
    shape = ks[0].shape
    if any(k.shape != shape for k in ks) or len(shape) != 2:
        raise ChannelError(f"Kraus operators have mismatched shapes {[k.shape for k in ks]}")
    d_out, d_in = shape
    in_type = _default_type(d_in) if in_type is None else in_type
    out_type = _default_type(d_out) if out_type is None else out_type
    if in_type.total_dim != d_in or out_type.total_dim != d_out:
        raise ChannelError("Kraus shape does not match the given system types")
    vecs = np.stack([k.T.reshape(-1) for k in ks])
    choi = vecs.T @ vecs.conj()
    return from_choi(choi, in_type, out_type, QUANTUM)


def unitary_channel(u, system: SystemType | None = None, out_type: SystemType | None = None) -> Channel:
    u = np.asarray(u)
    return choi_from_kraus([u], system, system if out_type is None else out_type)


def kraus_operators(c: Channel, tol: float = 1e-12) -> list[np.ndarray]:
    """Canonical Kraus decomposition from the Choi eigendecomposition."""
    if not c.theory.quantum:
        raise ChannelError("Kraus operators only exist for quantum channels")
    w, v = np.linalg.eigh((c.choi + c.choi.conj().T) / 2)
    d_in, d_out = c.in_type.total_dim, c.out_type.total_dim
    out = []
    for val, vec in zip(w, v.T):
        if val > tol:
            out.append(np.sqrt(val) * vec.reshape(d_in, d_out).T)
    return out


def stochastic_channel(m, in_type: SystemType | None = None, out_type: SystemType | None = None) -> Channel:
    """Classical channel from an ``out x in`` column-stochastic (or nonnegative) matrix."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ChannelError("expected a matrix")
    d_out, d_in = m.shape
    in_type = _default_type(d_in) if in_type is None else in_type
    out_type = _default_type(d_out) if out_type is None else out_type
    if in_type.total_dim != d_in or out_type.total_dim != d_out:
        raise ChannelError("matrix shape does not match the given system types")
    legs = [Leg(l, d, IN) for l, d in in_type.factors] + [Leg(l, d, OUT) for l, d in out_type.factors]
    return Channel(in_type, out_type, LabeledTensor(legs, m.T.reshape(in_type.dims + out_type.dims)), CLASSICAL)


def identity_channel(system: SystemType, theory: Theory = QUANTUM, out_labels: Mapping[str, str] | None = None) -> Channel:
    out_labels = dict(out_labels or {})
    return wire_channel(system, system.relabel(out_labels), {l: out_labels.get(l, l) for l in system.labels}, theory)


def wire_channel(in_type: SystemType, out_type: SystemType, wiring: Mapping[str, str], theory: Theory = QUANTUM) -> Channel:
    """Pure rewiring: input factor ``k`` goes straight to output factor ``wiring[k]``."""
    if sorted(wiring) != sorted(in_type.labels) or sorted(wiring.values()) != sorted(out_type.labels):
        raise ChannelError("wiring must be a bijection between input and output labels")
    parts = []
    for src, dst in wiring.items():
        d = in_type.dim(src)
        if out_type.dim(dst) != d:
            raise ChannelError(f"cannot wire {src!r} (dim {d}) to {dst!r} (dim {out_type.dim(dst)})")
        ld = theory.leg_dim(d)
        parts.append(LabeledTensor([Leg(src, ld, IN), Leg(dst, ld, OUT)], np.eye(ld)))
    t = tensor_product(*parts) if parts else LabeledTensor([], 1.0)
    return Channel(in_type, out_type, t, theory)


def swap_channel(a: SystemType, a_out: SystemType, theory: Theory = QUANTUM, x_labels=None, xp_labels=None) -> Channel:
    """``SWAP_{A,A'}`` typed ``A (x) X -> A' (x) X'`` with ``X ~ A'`` and ``X' ~ A``.

    The input on ``A`` leaves on ``X'``; the input on ``X`` leaves on ``A'``.
    """
    x_labels = list(x_labels or [f"_sx{i}" for i in range(len(a_out))])
    xp_labels = list(xp_labels or [f"_sxp{i}" for i in range(len(a))])
    x = SystemType(tuple(zip(x_labels, a_out.dims)))
    xp = SystemType(tuple(zip(xp_labels, a.dims)))
    wiring = dict(zip(a.labels, xp_labels))
    wiring.update(zip(x_labels, a_out.labels))
    return wire_channel(a + x, a_out + xp, wiring, theory)


def compose(second: Channel, first: Channel) -> Channel:
    """Wire ``first`` into ``second`` along every label that ``first`` outputs
    and ``second`` consumes; all other wires pass by in parallel."""
    if first.theory is not second.theory:
        raise ChannelError("cannot compose channels of different theories")
    shared = [l for l in second.in_type.labels if l in first.out_type]
    for l in shared:
        if first.out_type.dim(l) != second.in_type.dim(l):
            raise ChannelError(f"dimension mismatch on wire {l!r}")
    t = contract(first.tensor, second.tensor, shared)
    in_type = first.in_type + second.in_type.without(shared)
    out_type = first.out_type.without(shared) + second.out_type
    return Channel(in_type, out_type, t, first.theory)


def sequence(*channels: Channel) -> Channel:
    """``sequence(f, g, h) == compose(h, compose(g, f))``."""
    out = channels[0]
    for c in channels[1:]:
        out = compose(c, out)
    return out


def tensor(*channels: Channel) -> Channel:
    """Parallel composition; labels must be disjoint on each side."""
    t = tensor_product(*(c.tensor for c in channels))
    in_type = SystemType(tuple(f for c in channels for f in c.in_type.factors))
    out_type = SystemType(tuple(f for c in channels for f in c.out_type.factors))
    return Channel(in_type, out_type, t, channels[0].theory)


def mix(channels: Sequence[Channel], weights: Sequence[float]) -> Channel:
    """Linear combination ``sum_i w_i channels[i]`` (convex when weights are)."""
    if len(channels) != len(weights) or not channels:
        raise ChannelError("need one weight per channel")
    out = channels[0] * weights[0]
    for c, w in zip(channels[1:], weights[1:]):
        out = out + c * w
    return out


def state_tensor(state, system: SystemType, theory: Theory = QUANTUM) -> LabeledTensor:
    legs = [Leg(l, theory.leg_dim(d), OUT) for l, d in system.factors]
    return LabeledTensor(legs, theory.state_data(state, system.dims))


def effect_tensor(effect, system: SystemType, theory: Theory = QUANTUM) -> LabeledTensor:
    legs = [Leg(l, theory.leg_dim(d), IN) for l, d in system.factors]
    return LabeledTensor(legs, theory.effect_data(effect, system.dims))


def feed(c: Channel, state, on: SystemType | Sequence[str]) -> Channel:
    """Insert a (possibly unnormalised) state into the inputs ``on``."""
    on = on if isinstance(on, SystemType) else c.in_type.select(on)
    on = SystemType(tuple((l, c.in_type.dim(l)) for l in on.labels))
    t = contract(state_tensor(state, on, c.theory), c.tensor, on.labels)
    return Channel(c.in_type.without(on.labels), c.out_type, t, c.theory)


def apply_effect(c: Channel, effect, on: SystemType | Sequence[str]) -> Channel:
    """Apply an effect to the outputs ``on``."""
    on = on if isinstance(on, SystemType) else c.out_type.select(on)
    on = SystemType(tuple((l, c.out_type.dim(l)) for l in on.labels))
    t = contract(c.tensor, effect_tensor(effect, on, c.theory), on.labels)
    return Channel(c.in_type, c.out_type.without(on.labels), t, c.theory)


def discard(c: Channel, labels: Iterable[str]) -> Channel:
    labels = [l for l in c.out_type.labels if l in set(labels)]
    if not labels:
        return c
    on = c.out_type.select(labels)
    return apply_effect(c, c.theory.unit_effect(on.dims), on)


def apply(c: Channel, rho) -> np.ndarray:
    """Action on a state of the full input system; returns the output state."""
    rho = np.asarray(rho)
    d = c.in_type.total_dim
    if c.theory.quantum and rho.shape != (d, d):
        raise ChannelError(f"state of shape {rho.shape} does not fit input dimension {d}")
    if not c.theory.quantum and rho.size != d:
        raise ChannelError(f"distribution of size {rho.size} does not fit input dimension {d}")
    out = feed(c, rho, c.in_type)
    return c.theory.state_from_data(out.tensor.data, c.out_type.dims)


def discard_prepare(in_type: SystemType, out_type: SystemType, state, theory: Theory = QUANTUM) -> Channel:
    """Discard the input and prepare ``state`` on the output."""
    eff = effect_tensor(theory.unit_effect(in_type.dims), in_type, theory)
    st = state_tensor(state, out_type, theory)
    return Channel(in_type, out_type, tensor_product(eff, st), theory)


@dataclass(frozen=True)
class ChannelReport:
    cp: bool
    tp: bool
    min_eigenvalue: float
    tp_deviation: float

    def __bool__(self):
        return self.cp and self.tp


def trace_deviation(c: Channel) -> float:
    """Frobenius distance of ``discard o c`` from ``discard`` (``||Tr_out C - I||``)."""
    out = discard(c, c.out_type.labels).tensor
    ref = effect_tensor(c.theory.unit_effect(c.in_type.dims), c.in_type, c.theory)
    return out.distance(ref)


def is_channel(c: Channel, tol: float = ATOL) -> ChannelReport:
    pos = c.theory.positivity(c)
    if c.theory.quantum:
        cp = psd_check(c.choi, max(tol, PSD_TOL))
    else:
        cp = pos >= -tol
    dev = trace_deviation(c)
    return ChannelReport(cp=bool(cp), tp=bool(dev <= tol), min_eigenvalue=pos, tp_deviation=dev)


def _isometry(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(rows, cols)) + 1j * rng.normal(size=(rows, cols))
    q, r = np.linalg.qr(g)
    # fix column phases so the distribution does not depend on the QR routine
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_unitary(d: int, seed=None) -> np.ndarray:
    return _isometry(d, d, _rng(seed))


def random_channel(
    in_type: SystemType,
    out_type: SystemType,
    env_dim: int = 2,
    seed=None,
    theory: Theory = QUANTUM,
) -> Channel:
    """Seeded random deterministic channel.

    Quantum: Stinespring form ``Tr_env(V rho V^dag)`` with ``V`` an isometry from
    the QR factorisation of a complex Gaussian matrix.  ``env_dim`` is raised
    to the smallest value that admits an isometry.  Classical: columns drawn
    from a flat Dirichlet distribution.
    """
    if env_dim < 1:
        raise ChannelError("env_dim must be >= 1")
    rng = _rng(seed)
    d_in, d_out = in_type.total_dim, out_type.total_dim
    if not theory.quantum:
        m = rng.dirichlet(np.ones(d_out), size=d_in).T
        return stochastic_channel(m, in_type, out_type)
    env = max(env_dim, -(-d_in // d_out))
    v = _isometry(d_out * env, d_in, rng)
    kraus = [v.reshape(d_out, env, d_in)[:, e, :] for e in range(env)]
    return choi_from_kraus(kraus, in_type, out_type)


# ---------------------------------------------------------------------------
# signaling constraints


@dataclass(frozen=True)
class SignalingRelation:
    """Forbidden influences ``in_party -> out_party`` between system factors."""

    in_parties: tuple[str, ...]
    out_parties: tuple[str, ...]
    forbidden: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "in_parties", tuple(self.in_parties))
        object.__setattr__(self, "out_parties", tuple(self.out_parties))
        pairs = frozenset(tuple(p) for p in self.forbidden)
        for src, dst in pairs:
            if src not in self.in_parties or dst not in self.out_parties:
                raise ChannelError(f"forbidden pair {src!r}->{dst!r} names an undeclared party")
        object.__setattr__(self, "forbidden", pairs)

    @classmethod
    def no_signaling(cls, in_parties: Sequence[str], out_parties: Sequence[str]) -> "SignalingRelation":
        """Party ``i`` may only influence output ``i`` (positional pairing)."""
        if len(in_parties) != len(out_parties):
            raise ChannelError("no-signaling pairing needs as many inputs as outputs")
        forbidden = {(a, b) for i, a in enumerate(in_parties) for j, b in enumerate(out_parties) if i != j}
        return cls(tuple(in_parties), tuple(out_parties), frozenset(forbidden))

    @classmethod
    def one_way(cls, in_parties: Sequence[str], out_parties: Sequence[str], edge: tuple[str, str]) -> "SignalingRelation":
        return cls(tuple(in_parties), tuple(out_parties), frozenset({tuple(edge)}))

    def to_dict(self) -> dict:
        return {
            "in_parties": list(self.in_parties),
            "out_parties": list(self.out_parties),
            "forbidden": sorted([list(p) for p in self.forbidden]),
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "SignalingRelation":
        return cls(tuple(doc["in_parties"]), tuple(doc["out_parties"]), frozenset(tuple(p) for p in doc["forbidden"]))


def signaling_report(c: Channel, rel: SignalingRelation) -> dict[tuple[str, str], float]:
    """Deviation from the no-influence condition for every forbidden edge.

    For the edge ``b -> a'`` the marginal on ``a'`` (all other outputs
    discarded) is compared with the same marginal after replacing the input on
    ``b`` by the maximally mixed state and discarding it.
    """
    if sorted(rel.in_parties) != sorted(c.in_type.labels) or sorted(rel.out_parties) != sorted(c.out_type.labels):
        raise ChannelError(
            f"channel {c!r} does not partition into parties {rel.in_parties} -> {rel.out_parties}"
        )
    th = c.theory
    out = {}
    for src, dst in sorted(rel.forbidden):
        marginal = discard(c, [l for l in c.out_type.labels if l != dst])
        d = c.in_type.dim(src)
        fed = feed(marginal, th.maximally_mixed([d]), [src])
        eff = effect_tensor(th.unit_effect([d]), SystemType.of(src, d), th)
        candidate = tensor_product(fed.tensor, eff)
        out[(src, dst)] = marginal.tensor.distance(candidate)
    return out


def check_signaling(c: Channel, rel: SignalingRelation, tol: float = ATOL) -> bool:
    return all(v <= tol for v in signaling_report(c, rel).values())


# ---------------------------------------------------------------------------
# channel sets

ALL = "all"
NON_SIGNALING = "non_signaling"
ONE_WAY = "one_way"
CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class ChannelSetSpec:
    """A subset ``K`` of channels ``base_in -> base_out``.

    ``sampler(rng, x_type, xp_type)`` must return members of the dilation
    extension ``dExt_{X,X'}(K)``; it is only needed for custom sets.
    """

    base_in: SystemType
    base_out: SystemType
    kind: str = ALL
    relation: SignalingRelation | None = None
    predicate: Callable[[Channel], bool] | None = None
    sampler: Callable | None = None
    convex: bool = True
    normal: bool = True
    theory: Theory = QUANTUM

    def __post_init__(self):
        if self.kind not in (ALL, NON_SIGNALING, ONE_WAY, CUSTOM):
            raise ChannelError(f"unknown channel set kind {self.kind!r}")
        if self.kind != CUSTOM and not (self.convex and self.normal):
            raise ChannelError(f"{self.kind} sets are always convex and normal")
        if self.kind in (NON_SIGNALING, ONE_WAY) and self.relation is None:
            raise ChannelError("signaling sets need a relation")
        if self.kind == CUSTOM and self.predicate is None:
            raise ChannelError("custom sets need a predicate")

    # constructors
    @classmethod
    def all(cls, base_in: SystemType, base_out: SystemType, theory: Theory = QUANTUM) -> "ChannelSetSpec":
        return cls(base_in, base_out, ALL, theory=theory)

    @classmethod
    def non_signaling(cls, base_in, base_out, relation=None, theory: Theory = QUANTUM) -> "ChannelSetSpec":
        relation = relation or SignalingRelation.no_signaling(base_in.labels, base_out.labels)
        return cls(base_in, base_out, NON_SIGNALING, relation=relation, theory=theory)

    @classmethod
    def one_way(cls, base_in, base_out, edge: tuple[str, str], theory: Theory = QUANTUM) -> "ChannelSetSpec":
        rel = SignalingRelation.one_way(base_in.labels, base_out.labels, edge)
        return cls(base_in, base_out, ONE_WAY, relation=rel, theory=theory)

    @classmethod
    def custom(cls, base_in, base_out, predicate, *, convex: bool, normal: bool, sampler=None, theory=QUANTUM):
        return cls(base_in, base_out, CUSTOM, predicate=predicate, sampler=sampler, convex=convex, normal=normal, theory=theory)

    def describe(self) -> dict:
        doc = {
            "kind": self.kind,
            "base_in": [list(f) for f in self.base_in.factors],
            "base_out": [list(f) for f in self.base_out.factors],
            "convex": self.convex,
            "normal": self.normal,
            "theory": self.theory.name,
        }
        if self.relation is not None:
            doc["relation"] = self.relation.to_dict()
        return doc

    @classmethod
    def from_description(cls, doc: Mapping) -> "ChannelSetSpec":
        theory = CLASSICAL if doc.get("theory") == "classical" else QUANTUM
        base_in = SystemType(tuple(tuple(f) for f in doc["base_in"]))
        base_out = SystemType(tuple(tuple(f) for f in doc["base_out"]))
        kind = doc.get("kind", ALL)
        if kind == CUSTOM:
            raise ChannelError("custom channel sets cannot be deserialised")
        rel = SignalingRelation.from_dict(doc["relation"]) if "relation" in doc else None
        return cls(base_in, base_out, kind, relation=rel, theory=theory)

    def contains(self, c: Channel, tol: float = ATOL) -> bool:
        if not (c.in_type.same_as(self.base_in) and c.out_type.same_as(self.base_out)):
            raise ChannelError(f"{c!r} is not of type {self.base_in} -> {self.base_out}")
        if not is_channel(c, tol):
            return False
        if self.kind in (NON_SIGNALING, ONE_WAY):
            return check_signaling(c, self.relation, tol)
        if self.kind == CUSTOM:
            return bool(self.predicate(c))
        return True

    def sample(self, seed, x_type: SystemType = SystemType(), xp_type: SystemType = SystemType()) -> Channel:
        """A member of ``dExt_{X,X'}(K)`` drawn from ``seed``."""
        rng = _rng(seed)
        if self.kind == ALL:
            return random_channel(self.base_in + x_type, self.base_out + xp_type, int(rng.integers(1, 3)), rng, self.theory)
        if self.kind == CUSTOM:
            if self.sampler is None:
                raise ChannelError("this custom channel set has no sampler")
            return self.sampler(rng, x_type, xp_type)
        first = _sample_local(self, rng, x_type, xp_type)
        if rng.random() < 0.5:
            return first
        second = _sample_local(self, rng, x_type, xp_type)
        p = rng.random()
        return mix([first, second], [p, 1 - p])


def _sample_local(spec: ChannelSetSpec, rng, x_type: SystemType, xp_type: SystemType) -> Channel:
    """A local-operations member of a signaling-constrained set, with aux
    pre/post-processing so the auxiliary systems end up correlated."""
    th = spec.theory
    rel = spec.relation
    ins, outs = list(rel.in_parties), list(rel.out_parties)
    if (
        len(ins) == 2
        and len(outs) == 2
        and len(rel.forbidden) == 1
        and (ins[0], outs[0]) not in rel.forbidden
        and (ins[1], outs[1]) not in rel.forbidden
    ):
        return _sample_one_way(spec, rng, x_type, xp_type)
    pieces = []
    priv_in, priv_out = [], []
    paired_in, paired_out = set(), set()
    for k, (a, b) in enumerate(zip(ins, outs)):
        if (a, b) in rel.forbidden:
            continue
        xi, xo = (f"_li{k}", 2), (f"_lo{k}", 2)
        priv_in.append(xi)
        priv_out.append(xo)
        pieces.append(
            random_channel(
                SystemType(((a, spec.base_in.dim(a)), xi)),
                SystemType(((b, spec.base_out.dim(b)), xo)),
                int(rng.integers(1, 3)),
                rng,
                th,
            )
        )
        paired_in.add(a)
        paired_out.add(b)
    rest_in = spec.base_in.without(paired_in)
    rest_out = spec.base_out.without(paired_out)
    if len(rest_in) or len(rest_out):
        pieces.append(discard_prepare(rest_in, rest_out, th.random_state(rest_out.dims, rng), th))
    body = tensor(*pieces)
    pin, pout = SystemType(tuple(priv_in)), SystemType(tuple(priv_out))
    f = random_channel(x_type, pin, int(rng.integers(1, 3)), rng, th)
    g = random_channel(pout, xp_type, int(rng.integers(1, 3)), rng, th)
    return sequence(f, body, g)


def _sample_one_way(spec: ChannelSetSpec, rng, x_type, xp_type) -> Channel:
    # a -> a' (x) memory, then memory (x) b -> b'; nothing reaches a' from b
    th = spec.theory
    rel = spec.relation
    ins, outs = list(rel.in_parties), list(rel.out_parties)
    (src, dst), = rel.forbidden
    # the forbidden edge runs from `late` input to `early` output
    late_in = src
    early_out = dst
    early_in = [l for l in ins if l != late_in][0]
    late_out = [l for l in outs if l != early_out][0]
    mem = ("_mem", 2)
    x1, x2 = ("_li0", 2), ("_li1", 2)
    y1, y2 = ("_lo0", 2), ("_lo1", 2)
    first = random_channel(
        SystemType(((early_in, spec.base_in.dim(early_in)), x1)),
        SystemType(((early_out, spec.base_out.dim(early_out)), y1, mem)),
        2,
        rng,
        th,
    )
    second = random_channel(
        SystemType((mem, (late_in, spec.base_in.dim(late_in)), x2)),
        SystemType(((late_out, spec.base_out.dim(late_out)), y2)),
        2,
        rng,
        th,
    )
    body = compose(second, first)
    f = random_channel(x_type, SystemType((x1, x2)), int(rng.integers(1, 3)), rng, th)
    g = random_channel(SystemType((y1, y2)), xp_type, int(rng.integers(1, 3)), rng, th)
    return sequence(f, body, g)


# ---------------------------------------------------------------------------
# dilation extensions


def reduce_aux(phi: Channel, base_in: SystemType, base_out: SystemType, state) -> Channel:
    """Feed ``state`` into the auxiliary inputs and discard the auxiliary outputs."""
    x = phi.in_type.without(base_in.labels)
    xp = phi.out_type.without(base_out.labels)
    out = feed(phi, state, x) if len(x) else phi
    return discard(out, xp.labels)


def in_dilation_extension(phi: Channel, K: ChannelSetSpec, trials: int = 50, seed=0, tol: float = ATOL) -> bool:
    """Randomised membership test for ``dExt_{X,X'}(K)``.

    Every auxiliary reduction of ``phi`` by a causal state on ``X`` and the
    discard on ``X'`` must lie in ``K``.  A ``False`` is a certificate; a
    ``True`` only means no counterexample was drawn.
    """
    return dilation_counterexample(phi, K, trials, seed, tol) is None


def dilation_counterexample(phi: Channel, K: ChannelSetSpec, trials: int = 50, seed=0, tol: float = ATOL):
    """First trial index whose reduction falls outside ``K`` (``-1`` if ``phi``
    itself is not a channel), or ``None``."""
    if not all(l in phi.in_type for l in K.base_in.labels) or not all(l in phi.out_type for l in K.base_out.labels):
        raise ChannelError(f"{phi!r} does not extend {K.base_in} -> {K.base_out}")
    if not is_channel(phi, tol):
        return -1
    th = phi.theory
    x = phi.in_type.without(K.base_in.labels)
    for trial in range(trials):
        rng = trial_rng(seed, trial)
        if trial == 0:
            state = th.maximally_mixed(x.dims)
        elif th.quantum and trial % 2:
            state = th.random_state(x.dims, rng, rank=1)
        else:
            state = th.random_state(x.dims, rng)
        reduced = reduce_aux(phi, K.base_in, K.base_out, state)
        if not K.contains(reduced, tol):
            return trial
    return None


# ---------------------------------------------------------------------------
# control


@dataclass(frozen=True, eq=False)
class ControlPair:
    """Perfectly distinguishable states with a complete set of effects."""

    control_dim: int
    states: tuple
    effects: tuple
    theory: Theory = QUANTUM

    def __post_init__(self):
        if self.control_dim < 2:
            raise ChannelError("control needs at least two distinguishable states")
        if len(self.states) != len(self.effects) or len(self.states) < 2:
            raise ChannelError("need matching states and effects, at least two of each")
        th = self.theory
        sys = SystemType.of("_c", self.control_dim)
        for i, e in enumerate(self.effects):
            for j, s in enumerate(self.states):
                val = contract(state_tensor(s, sys, th), effect_tensor(e, sys, th)).data
                if abs(complex(val) - (1.0 if i == j else 0.0)) > ATOL:
                    raise ChannelError(f"effect {i} on state {j} gives {complex(val):.3g}, not distinguishable")
        total = sum(np.asarray(e, dtype=complex) for e in self.effects)
        if np.linalg.norm(total - th.unit_effect([self.control_dim])) > ATOL:
            raise ChannelError("control effects must sum to the discard")

    @classmethod
    def computational(cls, control_dim: int = 2, theory: Theory = QUANTUM) -> "ControlPair":
        if control_dim < 2:
            raise ChannelError("control needs at least two distinguishable states")
        basis = np.eye(control_dim)
        if theory.quantum:
            states = [np.outer(basis[i], basis[i]) for i in range(control_dim)]
        else:
            states = [basis[i] for i in range(control_dim)]
        return cls(control_dim, tuple(states), tuple(states), theory)


def control_channel(phi0: Channel, phi1: Channel, pair: ControlPair | None = None, label: str = "ctl") -> Channel:
    """``phi0 (x) (rho0 . e0) + phi1 (x) (rho1 . e1)`` with a measure-and-reprepare
    control wire ``label``.  Feeding ``rho_i`` and discarding the control output
    returns ``phi_i``.  With more than two control levels the extra outcomes
    route to ``phi0``."""
    if not (phi0.in_type.same_as(phi1.in_type) and phi0.out_type.same_as(phi1.out_type)):
        raise ChannelError("controlled channels must have the same type")
    th = phi0.theory
    pair = pair or ControlPair.computational(2, th)
    if pair.theory is not th:
        raise ChannelError("control pair belongs to a different theory")
    for phi in (phi0, phi1):
        if not phi.deterministic:
            raise ChannelError("controlled channels must be deterministic")
    sys = SystemType.of(label, pair.control_dim)
    ld = th.leg_dim(pair.control_dim)
    phis = [phi0, phi1] + [phi0] * (len(pair.states) - 2)
    total = None
    for phi, rho, e in zip(phis, pair.states, pair.effects):
        leg_data = np.multiply.outer(th.effect_data(e, sys.dims), th.state_data(rho, sys.dims))
        branch = LabeledTensor([Leg(label, ld, IN), Leg(label, ld, OUT)], leg_data)
        term = tensor_product(phi.tensor, branch)
        total = term if total is None else total + term
    return Channel(phi0.in_type + sys, phi0.out_type + sys, total, th)


def insert_control(big: Channel, state, label: str = "ctl") -> Channel:
    """Feed a control state and discard the control output."""
    out = feed(big, state, [label])
    return discard(out, [label]) if label in out.out_type else out


# ---------------------------------------------------------------------------
# serialisation


def channel_to_dict(c: Channel) -> dict:
    """Choi operator in the matrix interchange format plus a ``system`` header."""
    from .tensor_core import matrix_to_dict

    doc = matrix_to_dict(c.choi)
    doc["system"] = {
        "in_factors": [list(f) for f in c.in_type.factors],
        "out_factors": [list(f) for f in c.out_type.factors],
        "deterministic": bool(c.deterministic),
        "theory": c.theory.name,
    }
    return doc


def channel_from_dict(doc: Mapping) -> Channel:
    from .tensor_core import matrix_from_dict

    try:
        header = doc["system"]
        in_type = SystemType(tuple((str(l), int(d)) for l, d in header["in_factors"]))
        out_type = SystemType(tuple((str(l), int(d)) for l, d in header["out_factors"]))
        theory = CLASSICAL if header.get("theory") == "classical" else QUANTUM
    except (KeyError, TypeError, ValueError) as exc:
        raise ChannelError(f"malformed channel header: {exc}") from exc
    m = matrix_from_dict(doc)
    if theory.quantum:
        n = in_type.total_dim * out_type.total_dim
        if m.shape != (n, n):
            raise ChannelError(f"Choi matrix shape {m.shape} does not match {n}x{n}")
    elif m.shape != (in_type.total_dim, out_type.total_dim):
        raise ChannelError(f"matrix shape {m.shape} does not match the classical system header")
    return from_choi(m, in_type, out_type, theory)
