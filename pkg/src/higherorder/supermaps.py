"""Supermaps in Choi form, combs, the quantum switch and multi-slot composition.

A supermap ``S`` on channels ``A -> A'`` with output channels ``B -> B'`` is a
CP map ``A* (x) A' -> B* (x) B'``.  It is stored in the same superoperator
form as :class:`~higherorder.channels.Channel`, with in-legs ``a*`` (one per
factor of ``A``) and ``a'`` labels, and out-legs ``b*`` and ``b'`` labels.
A channel's tensor read as a state on ``A* (x) A'`` is its Choi state, so
application is a leg flip followed by a contraction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .channels import (
    QUANTUM,
    Channel,
    ChannelError,
    ChannelSetSpec,
    SignalingRelation,
    Theory,
    _rng,
    dilation_counterexample,
    random_channel,
    trace_deviation,
    trial_rng,
)
from .tensor_core import (
    ATOL,
    IN,
    OUT,
    PSD_TOL,
    LabeledTensor,
    Leg,
    SystemType,
    bell_cap,
    contract,
    matrix_to_dict,
    min_eigenvalue,
    pairs_to_operator,
    tensor_product,
)

AUX_DIMS = (1, 2, 3)


def dual(label: str) -> str:
    return label + "*"


def _state_of(phi: Channel, a: SystemType) -> LabeledTensor:
    """Choi state of ``phi``: its ``A`` in-legs turned into ``a*`` out-legs."""
    t = phi.tensor
    for l in a.labels:
        t = t.flip(l, IN, dual(l))
    return t


def _unbend_output(t: LabeledTensor, b: SystemType) -> LabeledTensor:
    for l in b.labels:
        t = t.flip(dual(l), OUT, l)
    return t


def _slot_legs(a: SystemType, ap: SystemType, theory: Theory) -> list[Leg]:
    legs = [Leg(dual(l), theory.leg_dim(d), IN) for l, d in a.factors]
    return legs + [Leg(l, theory.leg_dim(d), IN) for l, d in ap.factors]


def _target_legs(b: SystemType, bp: SystemType, theory: Theory) -> list[Leg]:
    legs = [Leg(dual(l), theory.leg_dim(d), OUT) for l, d in b.factors]
    return legs + [Leg(l, theory.leg_dim(d), OUT) for l, d in bp.factors]


def _check_tensor(t: LabeledTensor, legs: list[Leg]) -> LabeledTensor:
    keys = [l.key for l in legs]
    if sorted(keys) != sorted(t.keys):
        raise ChannelError(f"supermap legs {t.keys} do not match {keys}")
    t = t.permute(keys)
    for have, want in zip(t.legs, legs):
        if have.dim != want.dim:
            raise ChannelError(f"leg {have.key} has dim {have.dim}, expected {want.dim}")
    return t


# ---------------------------------------------------------------------------
# single-slot supermaps


@dataclass(frozen=True, eq=False)
class Supermap:
    """CP map ``A* (x) A' -> B* (x) B'`` typed ``source -> target``."""

    source: ChannelSetSpec
    target: ChannelSetSpec
    tensor: LabeledTensor

    def __post_init__(self):
        if self.source.theory is not self.target.theory:
            raise ChannelError("source and target belong to different theories")
        object.__setattr__(self, "tensor", _check_tensor(self.tensor, self.legs))

    @property
    def theory(self) -> Theory:
        return self.source.theory

    @property
    def a(self) -> SystemType:
        return self.source.base_in

    @property
    def a_out(self) -> SystemType:
        return self.source.base_out

    @property
    def b(self) -> SystemType:
        return self.target.base_in

    @property
    def b_out(self) -> SystemType:
        return self.target.base_out

    @property
    def legs(self) -> list[Leg]:
        th = self.theory
        return _slot_legs(self.a, self.a_out, th) + _target_legs(self.b, self.b_out, th)

    @property
    def choi(self) -> np.ndarray:
        """Choi operator of the CP map ``A* A' -> B* B'`` (inputs first).

        Classical supermaps return their nonnegative transfer matrix
        (inputs as rows)."""
        if self.theory.quantum:
            dims = self.a.dims + self.a_out.dims + self.b.dims + self.b_out.dims
            return pairs_to_operator(self.tensor.data, dims)
        return self.tensor.matrix

    def distance(self, other: "Supermap") -> float:
        return self.tensor.distance(other.tensor)

    def __repr__(self):
        return (
            f"Supermap([{list(self.a.factors)} -> {list(self.a_out.factors)}] => "
            f"[{list(self.b.factors)} -> {list(self.b_out.factors)}], {self.theory.name})"
        )

    def __call__(self, phi: Channel) -> Channel:
        return apply_supermap(self, phi)


def apply_supermap(s: Supermap, phi: Channel) -> Channel:
    """``S`` applied to the ``A -> A'`` part of ``phi: A X -> A' X'``."""
    for l in s.a.labels:
        if l not in phi.in_type or phi.in_type.dim(l) != s.a.dim(l):
            raise ChannelError(f"{phi!r} has no input {l!r} of dim {s.a.dim(l)}")
    for l in s.a_out.labels:
        if l not in phi.out_type or phi.out_type.dim(l) != s.a_out.dim(l):
            raise ChannelError(f"{phi!r} has no output {l!r} of dim {s.a_out.dim(l)}")
    x = phi.in_type.without(s.a.labels)
    xp = phi.out_type.without(s.a_out.labels)
    shared = [dual(l) for l in s.a.labels] + list(s.a_out.labels)
    t = contract(_state_of(phi, s.a), s.tensor, shared)
    return Channel(s.b + x, s.b_out + xp, _unbend_output(t, s.b), s.theory)


def identity_supermap(a: SystemType, a_out: SystemType, theory: Theory = QUANTUM) -> Supermap:
    spec = ChannelSetSpec.all(a, a_out, theory)
    parts = [LabeledTensor([leg, leg.flipped()], np.eye(leg.dim)) for leg in _slot_legs(a, a_out, theory)]
    return Supermap(spec, spec, tensor_product(*parts))


def compose_seq(s2: Supermap, s1: Supermap) -> Supermap:
    """``s2 o s1``: the target of ``s1`` feeds the source of ``s2``."""
    if not (s1.b.same_as(s2.a) and s1.b_out.same_as(s2.a_out)):
        raise ChannelError(f"cannot compose {s2!r} after {s1!r}")
    shared = [dual(l) for l in s2.a.labels] + list(s2.a_out.labels)
    return Supermap(s1.source, s2.target, contract(s1.tensor, s2.tensor, shared))


def from_superoperator(
    choi, source: ChannelSetSpec, target: ChannelSetSpec
) -> Supermap:
    """Supermap from its Choi operator on ``A* A' B* B'`` (quantum only)."""
    from .tensor_core import operator_to_pairs

    th = source.theory
    legs = _slot_legs(source.base_in, source.base_out, th) + _target_legs(target.base_in, target.base_out, th)
    dims = source.base_in.dims + source.base_out.dims + target.base_in.dims + target.base_out.dims
    if th.quantum:
        data = operator_to_pairs(choi, dims)
    else:
        data = np.asarray(choi).reshape(dims)
    return Supermap(source, target, LabeledTensor(legs, data))


def transpose_supermap(a: SystemType, theory: Theory = QUANTUM) -> Supermap:
    """The map ``phi -> phi o T`` with ``T`` the transpose on ``A``.

    Linear but not CP: its Choi operator has a negative eigenvalue."""
    if not theory.quantum:
        raise ChannelError("the transpose is positive for classical systems")
    spec = ChannelSetSpec.all(a, a, theory)
    parts = []
    for l, d in a.factors:
        swap = np.eye(d * d).reshape(d, d, d, d).transpose(1, 0, 2, 3).reshape(d * d, d * d)
        parts.append(LabeledTensor([Leg(dual(l), d * d, IN), Leg(dual(l), d * d, OUT)], swap))
        parts.append(LabeledTensor([Leg(l, d * d, IN), Leg(l, d * d, OUT)], np.eye(d * d)))
    return Supermap(spec, spec, tensor_product(*parts))


# ---------------------------------------------------------------------------
# typing check


@dataclass(frozen=True)
class SupermapReport:
    cp: bool
    min_eigenvalue: float
    typed: bool
    trials: int
    max_tp_deviation: float
    first_failing_trial: int | None = None

    def __bool__(self):
        return self.cp and self.typed

    def to_dict(self) -> dict:
        return {
            "check": "is_supermap",
            "cp": self.cp,
            "min_eigenvalue": self.min_eigenvalue,
            "typed": self.typed,
            "trials": self.trials,
            "max_tp_deviation": self.max_tp_deviation,
            "first_failing_trial": self.first_failing_trial,
        }


def _aux_type(prefix: str, total: int) -> SystemType:
    return SystemType() if total == 1 else SystemType.of(prefix, total)


def is_supermap(s: Supermap, trials: int = 50, seed=0, tol: float = ATOL, membership_trials: int = 5) -> SupermapReport:
    """CP check plus sampled typing check.

    Each trial draws aux dimensions from ``{1, 2, 3}``, samples ``phi`` from
    ``dExt(source)`` and requires ``S(phi)`` to be a deterministic member of
    ``dExt(target)``.  A failure is a counterexample; a pass is not a proof.
    """
    th = s.theory
    if th.quantum:
        mine = min_eigenvalue(s.choi)
        cp = mine >= -max(tol, PSD_TOL)
    else:
        mine = float(s.tensor.data.real.min())
        cp = mine >= -tol
    worst = 0.0
    failing = None
    for trial in range(trials):
        rng = trial_rng(seed, trial)
        x = _aux_type("_x", int(rng.choice(AUX_DIMS)))
        xp = _aux_type("_xp", int(rng.choice(AUX_DIMS)))
        phi = s.source.sample(rng, x, xp)
        out = apply_supermap(s, phi)
        dev = trace_deviation(out)
        worst = max(worst, dev)
        if dev > tol or dilation_counterexample(out, s.target, membership_trials, [*np.atleast_1d(seed), trial], tol) is not None:
            failing = trial
            break
    return SupermapReport(
        cp=bool(cp),
        min_eigenvalue=float(mine),
        typed=failing is None,
        trials=trials,
        max_tp_deviation=worst,
        first_failing_trial=failing,
    )


# ---------------------------------------------------------------------------
# combs


@dataclass(frozen=True, eq=False)
class Comb:
    """``pre: B -> E (x) A`` and ``post: E (x) A' -> B'`` sharing the memory ``E``."""

    pre: Channel
    post: Channel
    env: SystemType

    def __post_init__(self):
        for l in self.env.labels:
            if l not in self.pre.out_type or l not in self.post.in_type:
                raise ChannelError(f"memory wire {l!r} must leave pre and enter post")
            if self.pre.out_type.dim(l) != self.env.dim(l) or self.post.in_type.dim(l) != self.env.dim(l):
                raise ChannelError(f"memory wire {l!r} has inconsistent dimensions")
        if self.pre.theory is not self.post.theory:
            raise ChannelError("pre and post belong to different theories")

    @property
    def theory(self) -> Theory:
        return self.pre.theory

    @property
    def a(self) -> SystemType:
        return self.pre.out_type.without(self.env.labels)

    @property
    def a_out(self) -> SystemType:
        return self.post.in_type.without(self.env.labels)

    @property
    def b(self) -> SystemType:
        return self.pre.in_type

    @property
    def b_out(self) -> SystemType:
        return self.post.out_type


def apply_comb(c: Comb, phi: Channel) -> Channel:
    """``post o (id_E (x) phi) o pre`` with the aux wires of ``phi`` passed by."""
    for l in c.a.labels:
        if l not in phi.in_type:
            raise ChannelError(f"{phi!r} has no input {l!r}")
    for l in c.a_out.labels:
        if l not in phi.out_type:
            raise ChannelError(f"{phi!r} has no output {l!r}")
    x = phi.in_type.without(c.a.labels)
    xp = phi.out_type.without(c.a_out.labels)
    t = contract(c.pre.tensor, phi.tensor, c.a.labels)
    t = contract(t, c.post.tensor, list(c.env.labels) + list(c.a_out.labels))
    return Channel(c.b + x, xp + c.b_out, t, c.theory)


def comb_to_supermap(c: Comb, source: ChannelSetSpec | None = None, target: ChannelSetSpec | None = None) -> Supermap:
    th = c.theory
    source = source or ChannelSetSpec.all(c.a, c.a_out, th)
    target = target or ChannelSetSpec.all(c.b, c.b_out, th)
    t = contract(c.pre.tensor, c.post.tensor, c.env.labels)
    for l in c.a.labels:
        t = t.flip(l, OUT, dual(l))
    for l in c.b.labels:
        t = t.flip(l, IN, dual(l))
    return Supermap(source, target, t)


def supermap_to_comb(s: Supermap, env_prefix: str = "_e") -> Comb:
    """The bent comb: ``pre`` is a cup on ``A`` beside a wire ``B -> E_B``;
    ``post`` is ``S`` with its ``B*`` output capped against ``E_B``.

    ``pre`` and ``post`` are CP but in general not trace preserving."""
    th = s.theory
    env_a = {l: f"{env_prefix}a_{l}" for l in s.a.labels}
    env_b = {l: f"{env_prefix}b_{l}" for l in s.b.labels}
    parts = []
    for l, d in s.a.factors:
        ld = th.leg_dim(d)
        parts.append(LabeledTensor([Leg(env_a[l], ld, OUT), Leg(l, ld, OUT)], np.eye(ld)))
    for l, d in s.b.factors:
        ld = th.leg_dim(d)
        parts.append(LabeledTensor([Leg(l, ld, IN), Leg(env_b[l], ld, OUT)], np.eye(ld)))
    pre_t = tensor_product(*parts)
    env = SystemType(tuple((env_a[l], d) for l, d in s.a.factors) + tuple((env_b[l], d) for l, d in s.b.factors))
    post_t = s.tensor.relabel({dual(l): env_a[l] for l in s.a.labels}, IN)
    for l, d in s.b.factors:
        post_t = contract(post_t, bell_cap(th.leg_dim(d), (dual(l), env_b[l])), [dual(l)])
    pre = Channel(s.b, env + s.a, pre_t, th)
    post = Channel(env + s.a_out, s.b_out, post_t, th)
    return Comb(pre, post, env)


def random_comb(
    a: SystemType,
    a_out: SystemType,
    b: SystemType,
    b_out: SystemType,
    env_dim: int = 2,
    seed=None,
    theory: Theory = QUANTUM,
    env_label: str = "_env",
) -> Comb:
    rng = _rng(seed)
    env = SystemType.of(env_label, env_dim)
    pre = random_channel(b, env + a, int(rng.integers(1, 3)), rng, theory)
    post = random_channel(env + a_out, b_out, int(rng.integers(1, 3)), rng, theory)
    return Comb(pre, post, env)


def identity_comb(a: SystemType, a_out: SystemType, theory: Theory = QUANTUM) -> Comb:
    from .channels import identity_channel

    return Comb(identity_channel(a, theory), identity_channel(a_out, theory), SystemType())


# ---------------------------------------------------------------------------
# multi-slot supermaps


@dataclass(frozen=True, eq=False)
class MultiSupermap:
    """Supermap with several slots ``A_i -> A_i'`` and one target ``B -> B'``."""

    slots: tuple[ChannelSetSpec, ...]
    target: ChannelSetSpec
    tensor: LabeledTensor

    def __post_init__(self):
        object.__setattr__(self, "slots", tuple(self.slots))
        th = self.target.theory
        if any(s.theory is not th for s in self.slots):
            raise ChannelError("slots and target belong to different theories")
        object.__setattr__(self, "tensor", _check_tensor(self.tensor, self.legs))

    @property
    def theory(self) -> Theory:
        return self.target.theory

    @property
    def n_slots(self) -> int:
        return len(self.slots)

    @property
    def legs(self) -> list[Leg]:
        th = self.theory
        legs = []
        for s in self.slots:
            legs += _slot_legs(s.base_in, s.base_out, th)
        return legs + _target_legs(self.target.base_in, self.target.base_out, th)

    @property
    def choi(self) -> np.ndarray:
        if not self.theory.quantum:
            return self.tensor.matrix
        dims = [s.base_in.dims + s.base_out.dims for s in self.slots]
        flat = tuple(d for ds in dims for d in ds) + self.target.base_in.dims + self.target.base_out.dims
        return pairs_to_operator(self.tensor.data, flat)

    @classmethod
    def from_supermap(cls, s: Supermap) -> "MultiSupermap":
        return cls((s.source,), s.target, s.tensor)

    def apply(self, channels: Sequence[Channel]) -> Channel:
        """Fill every slot; aux wires of the inputs are passed by."""
        if len(channels) != self.n_slots:
            raise ChannelError(f"expected {self.n_slots} channels, got {len(channels)}")
        t = self.tensor
        x, xp = SystemType(), SystemType()
        for spec, phi in zip(self.slots, channels):
            _check_slot(spec, phi)
            shared = [dual(l) for l in spec.base_in.labels] + list(spec.base_out.labels)
            t = contract(_state_of(phi, spec.base_in), t, shared)
            x = x + phi.in_type.without(spec.base_in.labels)
            xp = xp + phi.out_type.without(spec.base_out.labels)
        b, bp = self.target.base_in, self.target.base_out
        return Channel(b + x, bp + xp, _unbend_output(t, b), self.theory)

    def partial_apply(self, fixed: Mapping[int, Channel]) -> "MultiSupermap":
        """Fill the slots in ``fixed`` (by index) with channels without aux wires."""
        t = self.tensor
        for i, phi in fixed.items():
            spec = self.slots[i]
            _check_slot(spec, phi)
            if len(phi.in_type) != len(spec.base_in) or len(phi.out_type) != len(spec.base_out):
                raise ChannelError("partially applied channels must not carry aux wires")
            shared = [dual(l) for l in spec.base_in.labels] + list(spec.base_out.labels)
            t = contract(_state_of(phi, spec.base_in), t, shared)
        rest = tuple(s for i, s in enumerate(self.slots) if i not in fixed)
        return MultiSupermap(rest, self.target, t)

    def as_supermap(self, source: ChannelSetSpec | None = None) -> Supermap:
        """The joint-slot supermap; the default source is the set of channels
        non-signaling between slots."""
        a = SystemType(tuple(f for s in self.slots for f in s.base_in.factors))
        ap = SystemType(tuple(f for s in self.slots for f in s.base_out.factors))
        if source is None:
            if self.n_slots == 1:
                source = self.slots[0]
            else:
                source = ChannelSetSpec.non_signaling(a, ap, slot_relation(self.slots), self.theory)
        return Supermap(source, self.target, self.tensor)


def slot_relation(slots: Sequence[ChannelSetSpec]) -> SignalingRelation:
    """No influence from any slot's inputs to another slot's outputs."""
    ins = [l for s in slots for l in s.base_in.labels]
    outs = [l for s in slots for l in s.base_out.labels]
    forbidden = {
        (a, b)
        for i, si in enumerate(slots)
        for j, sj in enumerate(slots)
        if i != j
        for a in si.base_in.labels
        for b in sj.base_out.labels
    }
    return SignalingRelation(tuple(ins), tuple(outs), frozenset(forbidden))


def _check_slot(spec: ChannelSetSpec, phi: Channel):
    for l, d in spec.base_in.factors:
        if l not in phi.in_type or phi.in_type.dim(l) != d:
            raise ChannelError(f"{phi!r} does not fit slot input {l!r}")
    for l, d in spec.base_out.factors:
        if l not in phi.out_type or phi.out_type.dim(l) != d:
            raise ChannelError(f"{phi!r} does not fit slot output {l!r}")


def nest(s: MultiSupermap, inner: Sequence["MultiSupermap | Supermap | None"]) -> MultiSupermap:
    """Plug ``inner[i]`` into slot ``i`` (``None`` leaves the slot open)."""
    if len(inner) != s.n_slots:
        raise ChannelError(f"expected {s.n_slots} entries, got {len(inner)}")
    t = s.tensor
    slots: list[ChannelSetSpec] = []
    for spec, m in zip(s.slots, inner):
        if m is None:
            slots.append(spec)
            continue
        if isinstance(m, Supermap):
            m = MultiSupermap.from_supermap(m)
        tgt = m.target
        if not (tgt.base_in.same_as(spec.base_in) and tgt.base_out.same_as(spec.base_out)):
            raise ChannelError("inner supermap target does not match the slot")
        shared = [dual(l) for l in spec.base_in.labels] + list(spec.base_out.labels)
        t = contract(m.tensor, t, shared)
        slots.extend(m.slots)
    return MultiSupermap(tuple(slots), s.target, t)


def seq_enrichment(a: SystemType, b: SystemType, c: SystemType, theory: Theory = QUANTUM) -> MultiSupermap:
    """Two slots ``A -> B`` and ``B -> C`` composed in sequence."""
    parts = []
    for l, d in a.factors:
        ld = theory.leg_dim(d)
        parts.append(LabeledTensor([Leg(dual(l), ld, IN), Leg(dual(l), ld, OUT)], np.eye(ld)))
    for l, d in b.factors:
        ld = theory.leg_dim(d)
        parts.append(LabeledTensor([Leg(l, ld, IN), Leg(dual(l), ld, IN)], np.eye(ld)))
    for l, d in c.factors:
        ld = theory.leg_dim(d)
        parts.append(LabeledTensor([Leg(l, ld, IN), Leg(l, ld, OUT)], np.eye(ld)))
    slots = (ChannelSetSpec.all(a, b, theory), ChannelSetSpec.all(b, c, theory))
    return MultiSupermap(slots, ChannelSetSpec.all(a, c, theory), tensor_product(*parts))


def par_enrichment(
    a: SystemType, a_out: SystemType, b: SystemType, b_out: SystemType, theory: Theory = QUANTUM
) -> MultiSupermap:
    """Two slots ``A -> A'`` and ``B -> B'`` placed side by side."""
    legs = _slot_legs(a, a_out, theory) + _slot_legs(b, b_out, theory)
    parts = [LabeledTensor([leg, leg.flipped()], np.eye(leg.dim)) for leg in legs]
    slots = (ChannelSetSpec.all(a, a_out, theory), ChannelSetSpec.all(b, b_out, theory))
    return MultiSupermap(slots, ChannelSetSpec.all(a + b, a_out + b_out, theory), tensor_product(*parts))


# ---------------------------------------------------------------------------
# the switch

SWITCH_LABELS = {"slots": (("a1", "a1'"), ("a2", "a2'")), "control": "q", "system": "s"}


def _switch_branches(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Operator-level links ``w_q`` with axes (a1*, a1', a2*, a2', q*, s*, q, s).

    Branch 0 runs slot 1 then slot 2, branch 1 the reverse."""
    eye = np.eye(d)
    w0 = np.zeros((d, d, d, d, 2, d, 2, d))
    w1 = np.zeros_like(w0)
    # letters: p=a1*, r=a1', u=a2*, v=a2', w=s*, z=s
    w0[:, :, :, :, 0, :, 0, :] = np.einsum("pw,ru,vz->pruvwz", eye, eye, eye)
    w1[:, :, :, :, 1, :, 1, :] = np.einsum("uw,vp,rz->pruvwz", eye, eye, eye)
    return w0, w1


def switch_supermap(d: int = 2, classical_control: bool = False) -> MultiSupermap:
    """Two-slot switch on a ``d``-level system with a control qubit ``q``.

    For Kraus operators ``A_i`` (slot 1) and ``B_j`` (slot 2) the output has
    Kraus operators ``|0><0| (x) B_j A_i + |1><1| (x) A_i B_j``.  With
    ``classical_control`` the interference terms are dropped, leaving the
    mixture of the two orders selected by the control's diagonal.
    """
    if d < 2:
        raise ChannelError("the switch needs d >= 2")
    w0, w1 = _switch_branches(d)
    dims = [d, d, d, d, 2, d, 2, d]
    n = len(dims)

    def lift(wk, wb):
        t = np.einsum(wk, list(range(n)), wb.conj(), list(range(n, 2 * n)), list(range(2 * n)))
        order = [k for m in range(n) for k in (m, n + m)]
        return t.transpose(order).reshape([x * x for x in dims])

    w = w0 + w1
    data = lift(w0, w0) + lift(w1, w1) if classical_control else lift(w, w)
    (a1, a1p), (a2, a2p) = SWITCH_LABELS["slots"]
    q, s = SWITCH_LABELS["control"], SWITCH_LABELS["system"]
    dd = d * d
    legs = [
        Leg(dual(a1), dd, IN),
        Leg(a1p, dd, IN),
        Leg(dual(a2), dd, IN),
        Leg(a2p, dd, IN),
        Leg(dual(q), 4, OUT),
        Leg(dual(s), dd, OUT),
        Leg(q, 4, OUT),
        Leg(s, dd, OUT),
    ]
    slots = (
        ChannelSetSpec.all(SystemType.of(a1, d), SystemType.of(a1p, d)),
        ChannelSetSpec.all(SystemType.of(a2, d), SystemType.of(a2p, d)),
    )
    target = ChannelSetSpec.all(SystemType.of(q, 2, s, d), SystemType.of(q, 2, s, d))
    return MultiSupermap(slots, target, LabeledTensor(legs, data))


def switch_slots(d: int = 2) -> tuple[SystemType, SystemType, SystemType, SystemType]:
    (a1, a1p), (a2, a2p) = SWITCH_LABELS["slots"]
    return SystemType.of(a1, d), SystemType.of(a1p, d), SystemType.of(a2, d), SystemType.of(a2p, d)


# ---------------------------------------------------------------------------
# serialisation


def supermap_to_dict(s: Supermap) -> dict:
    doc = matrix_to_dict(s.choi)
    doc["supermap"] = {
        "legs": [{"label": l.label, "dim": l.dim, "polarity": l.polarity} for l in s.legs],
        "source": s.source.describe(),
        "target": s.target.describe(),
    }
    return doc


def supermap_from_dict(doc: Mapping) -> Supermap:
    from .tensor_core import matrix_from_dict

    try:
        header = doc["supermap"]
        source = ChannelSetSpec.from_description(header["source"])
        target = ChannelSetSpec.from_description(header["target"])
    except (KeyError, TypeError) as exc:
        raise ChannelError(f"malformed supermap header: {exc}") from exc
    return from_superoperator(matrix_from_dict(doc), source, target)
