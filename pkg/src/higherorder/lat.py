"""Locally-applicable transformations as black-box oracles.

An oracle maps every extended channel ``phi: A X -> A' X'`` (for any aux
systems ``X, X'``) to a channel ``B X -> B' X'``.  :func:`embed` turns a
supermap into such an oracle and :func:`extract` recovers the supermap by
feeding the oracle the swap channel and bending the resulting wires.  The
``check_*`` functions are seeded refuters: a failure is a counterexample, a
pass only says none was found.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .channels import (
    QUANTUM,
    Channel,
    ChannelError,
    ChannelSetSpec,
    ControlPair,
    Theory,
    apply_effect,
    control_channel,
    discard,
    discard_prepare,
    feed,
    mix,
    random_channel,
    random_unitary,
    sequence,
    swap_channel,
    tensor,
    trace_deviation,
    trial_rng,
    unitary_channel,
)
from .supermaps import (
    MultiSupermap,
    Supermap,
    apply_comb,
    apply_supermap,
    dual,
)
from .tensor_core import ATOL, IN, OUT, PSD_TOL, LabeledTensor, SystemType, bell_cap, bell_cup, contract, psd_check

DEFAULT_TRIALS = 200
AUX_DIMS = (1, 2, 3)


class OracleError(ValueError):
    pass


# ---------------------------------------------------------------------------
# oracles


@dataclass(frozen=True, eq=False)
class LatOracle:
    """A family ``S_{X,X'}`` given as one callable on extended channels."""

    source: ChannelSetSpec
    target: ChannelSetSpec
    fn: Callable[[Channel], Channel]
    name: str = "oracle"

    @property
    def theory(self) -> Theory:
        return self.source.theory

    def eval(self, phi: Channel) -> Channel:
        a, ap = self.source.base_in, self.source.base_out
        if not all(l in phi.in_type and phi.in_type.dim(l) == d for l, d in a.factors):
            raise OracleError(f"{phi!r} does not extend the input {a}")
        if not all(l in phi.out_type and phi.out_type.dim(l) == d for l, d in ap.factors):
            raise OracleError(f"{phi!r} does not extend the output {ap}")
        x = phi.in_type.without(a.labels)
        xp = phi.out_type.without(ap.labels)
        out = self.fn(phi)
        want_in = self.target.base_in + x
        want_out = self.target.base_out + xp
        if not (out.in_type.same_as(want_in) and out.out_type.same_as(want_out)):
            raise OracleError(f"oracle {self.name!r} returned {out!r}, expected {want_in} -> {want_out}")
        return out

    __call__ = eval


def embed(s: Supermap) -> LatOracle:
    """The oracle ``phi -> S(phi)``."""
    return LatOracle(s.source, s.target, lambda phi: apply_supermap(s, phi), "embed")


def comb_oracle(c, source: ChannelSetSpec | None = None, target: ChannelSetSpec | None = None) -> LatOracle:
    """The comb action as an oracle, without going through its Choi form."""
    th = c.theory
    source = source or ChannelSetSpec.all(c.a, c.a_out, th)
    target = target or ChannelSetSpec.all(c.b, c.b_out, th)
    return LatOracle(source, target, lambda phi: apply_comb(c, phi), "comb")


def compose_oracles(o2: LatOracle, o1: LatOracle) -> LatOracle:
    """Pointwise composition ``phi -> o2(o1(phi))``."""
    if not (o1.target.base_in.same_as(o2.source.base_in) and o1.target.base_out.same_as(o2.source.base_out)):
        raise OracleError("oracle types do not compose")
    return LatOracle(o1.source, o2.target, lambda phi: o2.eval(o1.eval(phi)), f"{o2.name}.{o1.name}")


def identity_oracle(a: SystemType, a_out: SystemType, theory: Theory = QUANTUM) -> LatOracle:
    spec = ChannelSetSpec.all(a, a_out, theory)
    return LatOracle(spec, spec, lambda phi: phi, "identity")


# ---------------------------------------------------------------------------
# extraction


def _fresh(prefix: str, n: int) -> list[str]:
    return [f"{prefix}{i}" for i in range(n)]


def _bend(t: LabeledTensor, b: SystemType, x_map: Mapping[str, str], xp_map: Mapping[str, str], theory: Theory) -> LabeledTensor:
    """Cup the ``B`` inputs into ``B*`` outputs, cap the ``X'`` outputs into
    ``A*`` inputs and rename the ``X`` inputs to ``A'``."""
    for l, d in b.factors:
        t = contract(bell_cup(theory.leg_dim(d), (dual(l), l)), t, [l])
    for xp, a in xp_map.items():
        ld = t.leg(xp, OUT).dim
        t = contract(t, bell_cap(ld, (xp, dual(a))), [xp])
    return t.relabel(dict(x_map), IN)


def extract(o: LatOracle, tol: float = ATOL) -> Supermap:
    """Apply the oracle to ``SWAP_{A,A'}`` and bend the wires into ``S_Q``."""
    src = o.source
    if not (src.convex and src.normal):
        raise OracleError("extraction needs a convex and normal source set")
    a, ap = src.base_in, src.base_out
    x_labels = _fresh("_sx", len(ap))
    xp_labels = _fresh("_sxp", len(a))
    swap = swap_channel(a, ap, o.theory, x_labels, xp_labels)
    t = o.eval(swap)
    if trace_deviation(t) > tol:
        raise OracleError(f"oracle {o.name!r} returned a non-deterministic channel on the swap")
    body = _bend(t.tensor, o.target.base_in, dict(zip(x_labels, ap.labels)), dict(zip(xp_labels, a.labels)), o.theory)
    return Supermap(src, o.target, body)


# ---------------------------------------------------------------------------
# verifiers


@dataclass
class CheckReport:
    check: str
    trials: int
    tol: float
    max_deviation: float = 0.0
    first_failing_seed: int | None = None

    @property
    def passed(self) -> bool:
        return self.first_failing_seed is None

    def __bool__(self):
        return self.passed

    def record(self, trial: int, dev: float):
        self.max_deviation = max(self.max_deviation, float(dev))
        if dev > self.tol and self.first_failing_seed is None:
            self.first_failing_seed = trial

    def to_dict(self) -> dict:
        doc = {"check": self.check, "trials": self.trials, "max_deviation": self.max_deviation}
        if self.first_failing_seed is not None:
            doc["first_failing_seed"] = self.first_failing_seed
        return doc


@dataclass
class LocalApplicabilityReport:
    naturality: CheckReport
    dragging: CheckReport
    combined: CheckReport

    @property
    def checks(self) -> list[CheckReport]:
        return [self.naturality, self.dragging, self.combined]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def max_deviation(self) -> float:
        return max(c.max_deviation for c in self.checks)

    @property
    def first_failing_seed(self) -> int | None:
        seeds = [c.first_failing_seed for c in self.checks if c.first_failing_seed is not None]
        return min(seeds) if seeds else None

    def __bool__(self):
        return self.passed

    def to_dict(self) -> list[dict]:
        return [c.to_dict() for c in self.checks]


def _aux(prefix: str, rng, dims=AUX_DIMS) -> SystemType:
    d = int(rng.choice(dims))
    return SystemType() if d == 1 else SystemType.of(prefix, d)


def check_local_applicability(
    o: LatOracle, trials: int = DEFAULT_TRIALS, seed=0, tol: float = 1e-9, stop_on_failure: bool = False
) -> LocalApplicabilityReport:
    """Naturality, dragging and the combined equation on seeded random data.

    (i)   ``S((g) o phi o (f)) == (g) o S(phi) o (f)`` with ``f: Y -> X``, ``g: X' -> Y'``
    (ii)  ``S(phi (x) psi) == S(phi) (x) psi``
    (iii) as (i) with ``f: Y -> X Z`` and ``g: X' Z -> Y'``
    """
    th = o.theory
    rep = LocalApplicabilityReport(
        CheckReport("naturality", trials, tol), CheckReport("dragging", trials, tol), CheckReport("combined", trials, tol)
    )
    for trial in range(trials):
        rng = trial_rng(seed, trial)
        x, xp = _aux("_x", rng), _aux("_xp", rng)
        y, yp = _aux("_y", rng), _aux("_yp", rng)
        z, zp = SystemType.of("_z", int(rng.choice((2, 3)))), SystemType.of("_zp", int(rng.choice((2, 3))))
        phi = o.source.sample(rng, x, xp)
        s_phi = o.eval(phi)

        f = random_channel(y, x, int(rng.integers(1, 3)), rng, th)
        g = random_channel(xp, yp, int(rng.integers(1, 3)), rng, th)
        lhs = o.eval(sequence(f, phi, g))
        rep.naturality.record(trial, lhs.distance(sequence(f, s_phi, g)))

        psi = random_channel(z, zp, int(rng.integers(1, 3)), rng, th)
        rep.dragging.record(trial, o.eval(tensor(phi, psi)).distance(tensor(s_phi, psi)))

        zc = SystemType.of("_zc", int(rng.choice((2, 3))))
        f2 = random_channel(y, x + zc, int(rng.integers(1, 3)), rng, th)
        g2 = random_channel(xp + zc, yp, int(rng.integers(1, 3)), rng, th)
        lhs = o.eval(sequence(f2, phi, g2))
        rep.combined.record(trial, lhs.distance(sequence(f2, s_phi, g2)))
        if stop_on_failure and not rep.passed:
            break
    return rep


CONVEX_WEIGHTS = (0.25, 0.5, 0.9)


def check_convex_linearity(
    o: LatOracle, trials: int = 100, seed=0, tol: float = 1e-9, weights: Sequence[float] = CONVEX_WEIGHTS
) -> CheckReport:
    """``S(p phi0 + (1-p) phi1) == p S(phi0) + (1-p) S(phi1)`` on sampled pairs."""
    if not o.source.convex:
        raise OracleError("convex linearity needs a convex source set")
    rep = CheckReport("convex_linearity", trials, tol)
    for trial in range(trials):
        rng = trial_rng(seed, trial)
        x, xp = _aux("_x", rng), _aux("_xp", rng)
        phi0 = o.source.sample(rng, x, xp)
        phi1 = o.source.sample(rng, x, xp)
        s0, s1 = o.eval(phi0), o.eval(phi1)
        for p in weights:
            lhs = o.eval(mix([phi0, phi1], [p, 1 - p]))
            rep.record(trial, lhs.distance(mix([s0, s1], [p, 1 - p])))
    return rep


# ---------------------------------------------------------------------------
# operational closure


@dataclass(frozen=True, eq=False)
class CpPresentation:
    """A CP map ``A -> A'`` written as ``sigma o phi o rho`` with ``phi`` in
    ``dExt_{X,X'}(K)``, ``rho`` a CP state on ``X`` and ``sigma`` a CP effect on ``X'``."""

    phi: Channel
    rho: np.ndarray
    sigma: np.ndarray
    x: SystemType
    xp: SystemType

    def __post_init__(self):
        th = self.phi.theory
        for name, m in (("rho", self.rho), ("sigma", self.sigma)):
            m = np.asarray(m)
            ok = psd_check(np.atleast_2d(m), PSD_TOL) if th.quantum else bool(np.all(m.real >= -PSD_TOL))
            if not ok:
                raise ChannelError(f"{name} is not positive")

    def reduced(self) -> Channel:
        """The presented CP map ``A -> A'``."""
        return _sandwich(self.phi, self)


def _sandwich(c: Channel, pres: CpPresentation) -> Channel:
    out = feed(c, pres.rho, pres.x) if len(pres.x) else c * complex(np.sum(pres.rho))
    if len(pres.xp):
        return apply_effect(out, pres.sigma, pres.xp)
    return out * complex(np.sum(pres.sigma))


def extend_to_cp(o: LatOracle, pres: CpPresentation) -> np.ndarray:
    """Choi matrix of ``sigma o S(phi) o rho``: the extension of the oracle to
    the operational closure of its source."""
    a, ap = o.source.base_in, o.source.base_out
    if not (pres.phi.in_type.same_as(a + pres.x) and pres.phi.out_type.same_as(ap + pres.xp)):
        raise OracleError("presentation does not match the oracle's source type")
    return _sandwich(o.eval(pres.phi), pres).choi


def presentation_pair(o: LatOracle, seed=0) -> tuple[CpPresentation, CpPresentation]:
    """Two different presentations of one CP map ``alpha phi0 + beta phi1``.

    The first controls ``(phi0, phi1)`` with an unnormalised diagonal control
    state; the second controls ``(phi1, phi0)`` with the diagonal swapped and
    pads with an extra aux channel ``psi`` whose state and effect are rescaled
    so the padding contributes a factor of one.
    """
    rng = np.random.default_rng(seed)
    th = o.theory
    phi0 = o.source.sample(rng)
    phi1 = o.source.sample(rng)
    alpha, beta = rng.uniform(0.1, 2.0, size=2)
    pair = ControlPair.computational(2, th)
    ctl = SystemType.of("_ctl", 2)
    unit = th.unit_effect([2])

    def weights(p0, p1):
        return p0 * pair.states[0] + p1 * pair.states[1]

    first = CpPresentation(control_channel(phi0, phi1, pair, "_ctl"), weights(alpha, beta), unit, ctl, ctl)

    w = SystemType.of("_w", int(rng.integers(2, 4)))
    wp = SystemType.of("_wp", int(rng.integers(2, 4)))
    psi = random_channel(w, wp, 2, rng, th)
    tau = th.random_state(w.dims, rng)
    if th.quantum:
        eff = th.random_state(wp.dims, rng) * wp.total_dim * rng.uniform(0.2, 0.9)
        scale = np.trace(eff @ _apply_state(psi, tau)).real
    else:
        eff = rng.uniform(0.1, 1.0, size=wp.total_dim)
        scale = float(eff @ _apply_state(psi, tau).real)
    padded = tensor(control_channel(phi1, phi0, pair, "_ctl"), psi)
    rho2 = _joint(weights(beta, alpha), tau / scale, th)
    sigma2 = _joint(unit, eff, th)
    second = CpPresentation(padded, rho2, sigma2, ctl + w, ctl + wp)
    return first, second


def _apply_state(c: Channel, state) -> np.ndarray:
    from .channels import apply

    return apply(c, state)


def _joint(m0, m1, th: Theory):
    return np.kron(m0, m1) if th.quantum else np.kron(np.asarray(m0), np.asarray(m1))


# ---------------------------------------------------------------------------
# adversarial oracles


def marginal_oracle(s: Supermap) -> LatOracle:
    """Ignores how ``phi`` correlates with its aux wires: applies ``S`` to the
    reduced channel and replaces the aux part by discard-and-prepare."""
    th = s.theory
    a, ap = s.a, s.a_out

    def fn(phi: Channel) -> Channel:
        x = phi.in_type.without(a.labels)
        xp = phi.out_type.without(ap.labels)
        red = phi
        if len(x):
            red = feed(red, th.maximally_mixed(x.dims), x)
        red = discard(red, xp.labels)
        core = apply_supermap(s, red)
        if not len(x) and not len(xp):
            return core
        return tensor(core, discard_prepare(x, xp, th.maximally_mixed(xp.dims), th))

    return LatOracle(s.source, s.target, fn, "adversarial-marginal")


def twist_oracle(s: Supermap, seed: int = 11) -> LatOracle:
    """``S`` followed by a fixed unitary (or permutation) on the whole aux output."""
    th = s.theory

    def fn(phi: Channel) -> Channel:
        out = apply_supermap(s, phi)
        xp = phi.out_type.without(s.a_out.labels)
        if xp.total_dim == 1:
            return out
        d = xp.total_dim
        if th.quantum:
            u = unitary_channel(random_unitary(d, seed), xp, xp)
        else:
            from .channels import stochastic_channel

            perm = np.roll(np.eye(d), 1, axis=0)
            u = stochastic_channel(perm, xp, xp)
        return sequence(out, u)

    return LatOracle(s.source, s.target, fn, "adversarial-twist")


def nonlinear_oracle(s1: Supermap, s2: Supermap) -> LatOracle:
    """Mixes ``S1(phi)`` and ``S2(phi)`` with a weight set by the purity of
    ``phi``; always deterministic, never linear."""
    if not (s1.source.base_in.same_as(s2.source.base_in) and s1.target.base_in.same_as(s2.target.base_in)):
        raise OracleError("mixed supermaps must share their types")

    def fn(phi: Channel) -> Channel:
        # purity-like weight tr(C^2) / d_in^2, in (0, 1] for channels
        w = min(1.0, phi.tensor.norm() ** 2 / phi.in_type.total_dim**2)
        return mix([apply_supermap(s1, phi), apply_supermap(s2, phi)], [w, 1 - w])

    return LatOracle(s1.source, s1.target, fn, "adversarial-nonlinear")


# ---------------------------------------------------------------------------
# multi-input oracles


@dataclass(frozen=True, eq=False)
class MultiLatOracle:
    """One callable on a list of extended channels, one per slot."""

    slots: tuple[ChannelSetSpec, ...]
    target: ChannelSetSpec
    fn: Callable[[Sequence[Channel]], Channel]
    name: str = "multi-oracle"

    @property
    def theory(self) -> Theory:
        return self.target.theory

    def eval(self, channels: Sequence[Channel]) -> Channel:
        if len(channels) != len(self.slots):
            raise OracleError(f"expected {len(self.slots)} channels")
        return self.fn(list(channels))

    def curry(self, fixed: Mapping[int, Channel]) -> "MultiLatOracle | LatOracle":
        """Fix some slots; a single remaining slot gives a plain :class:`LatOracle`."""
        open_slots = [i for i in range(len(self.slots)) if i not in fixed]

        def fn(channels):
            full = []
            it = iter(channels)
            for i in range(len(self.slots)):
                full.append(fixed[i] if i in fixed else next(it))
            return self.fn(full)

        slots = tuple(self.slots[i] for i in open_slots)
        if len(slots) == 1:
            return LatOracle(slots[0], self.target, lambda phi: fn([phi]), f"{self.name}|curried")
        return MultiLatOracle(slots, self.target, fn, f"{self.name}|curried")


def multi_embed(m: MultiSupermap) -> MultiLatOracle:
    return MultiLatOracle(m.slots, m.target, m.apply, "multi-embed")


def multi_extract(o: MultiLatOracle, tol: float = ATOL) -> MultiSupermap:
    """Feed a swap into every slot at once and bend all wires."""
    th = o.theory
    swaps, x_map, xp_map = [], {}, {}
    for k, spec in enumerate(o.slots):
        if not (spec.convex and spec.normal):
            raise OracleError("extraction needs convex and normal slot sets")
        a, ap = spec.base_in, spec.base_out
        xl = _fresh(f"_sx{k}_", len(ap))
        xpl = _fresh(f"_sxp{k}_", len(a))
        swaps.append(swap_channel(a, ap, th, xl, xpl))
        x_map.update(zip(xl, ap.labels))
        xp_map.update(zip(xpl, a.labels))
    t = o.eval(swaps)
    if trace_deviation(t) > tol:
        raise OracleError(f"oracle {o.name!r} returned a non-deterministic channel on the swaps")
    return MultiSupermap(o.slots, o.target, _bend(t.tensor, o.target.base_in, x_map, xp_map, th))
