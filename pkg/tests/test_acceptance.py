"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected and repeated in the pytest terminal summary.
Run ``python3 tests/test_acceptance.py`` to print them without pytest.
"""

import time

import numpy as np

from higherorder.channels import (
    ChannelSetSpec,
    SignalingRelation,
    check_signaling,
    choi_from_kraus,
    control_channel,
    in_dilation_extension,
    insert_control,
    is_channel,
    mix,
    random_channel,
    random_unitary,
    tensor,
    trial_rng,
    wire_channel,
)
from higherorder.classical import classical_roundtrip, effect_completion
from higherorder.cli import MINUS, PAULI_X, PAULI_Z, PLUS, control_output
from higherorder.lat import (
    check_convex_linearity,
    check_local_applicability,
    comb_oracle,
    embed,
    extend_to_cp,
    extract,
    identity_oracle,
    marginal_oracle,
    nonlinear_oracle,
    presentation_pair,
    twist_oracle,
)
from higherorder.supermaps import (
    apply_comb,
    apply_supermap,
    comb_to_supermap,
    is_supermap,
    random_comb,
    supermap_to_comb,
    switch_slots,
    switch_supermap,
)
from higherorder.tensor_core import SystemType

RESULTS = []

A, AP = SystemType.of("a", 2), SystemType.of("a'", 2)
B, BP = SystemType.of("b", 2), SystemType.of("b'", 2)
AB = SystemType.of("a", 2, "b", 2)
ABP = SystemType.of("a'", 2, "b'", 2)


def record(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    print(line)
    RESULTS.append(line)
    assert ok, line


def qubit_comb(seed, env_dim=2):
    return random_comb(A, AP, B, BP, env_dim, seed)


def aux(rng, prefix):
    d = int(rng.integers(1, 4))
    return SystemType() if d == 1 else SystemType.of(prefix, d)


def switch_fixed_oracle(seed):
    _, _, a2, a2p = switch_slots(2)
    s = switch_supermap(2).partial_apply({1: random_channel(a2, a2p, 2, seed)}).as_supermap()
    return embed(s)


def test_criterion_1_bijection_roundtrip():
    start = time.perf_counter()
    worst = 0.0
    for k in range(25):
        c = qubit_comb([1, k], env_dim=1 + k % 2)
        s = comb_to_supermap(c)
        # the comb-action oracle never touches the Choi form
        worst = max(worst, extract(embed(s)).distance(s), extract(comb_oracle(c)).distance(s))
    elapsed = time.perf_counter() - start
    record(1, worst <= 1e-8 and elapsed < 10, f"25 qubit combs, max distance {worst:.2e} (<= 1e-8), {elapsed:.2f}s (< 10s)")


def test_criterion_2_reverse_composite():
    oracles = [comb_oracle(qubit_comb(3)), identity_oracle(A, AP), switch_fixed_oracle(4)]
    worst = 0.0
    for o in oracles:
        back = embed(extract(o))
        for trial in range(50):
            rng = trial_rng(2, trial)
            phi = o.source.sample(rng, aux(rng, "_x"), aux(rng, "_xp"))
            worst = max(worst, back(phi).distance(o(phi)))
    record(2, worst <= 1e-8, f"{len(oracles)} oracles x 50 extended channels, max deviation {worst:.2e} (<= 1e-8)")


def test_criterion_3_local_applicability():
    honest = [embed(comb_to_supermap(qubit_comb(5))), embed(switch_supermap(2).as_supermap()), switch_fixed_oracle(6)]
    worst = max(check_local_applicability(o, 200, 0, 1e-9).max_deviation for o in honest)
    s = comb_to_supermap(qubit_comb(7))
    adv = {o.name: check_local_applicability(o, 200, 0, 1e-9) for o in (marginal_oracle(s), twist_oracle(s))}
    refuted = all(not r.passed and r.max_deviation >= 1e-3 for r in adv.values())
    detail = ", ".join(f"{k} refuted at {r.max_deviation:.2f} (seed {r.first_failing_seed})" for k, r in adv.items())
    record(3, worst <= 1e-9 and refuted, f"embed oracles 200 trials max {worst:.2e} (<= 1e-9); {detail}")


def test_criterion_4_convex_linearity():
    honest = [embed(comb_to_supermap(qubit_comb(8))), embed(switch_supermap(2).as_supermap())]
    worst = max(check_convex_linearity(o, 100, 0, 1e-9, (0.25, 0.5, 0.9)).max_deviation for o in honest)
    bad = check_convex_linearity(nonlinear_oracle(comb_to_supermap(qubit_comb(1)), comb_to_supermap(qubit_comb(2))), 100, 0)
    record(4, worst <= 1e-9 and not bad.passed, f"100 trials max {worst:.2e} (<= 1e-9); nonlinear oracle refuted at {bad.max_deviation:.2f}")


def test_criterion_5_control():
    recover, mixed = 0.0, 0.0
    for seed in range(20):
        phi0 = tensor(random_channel(A, AP, 2, [seed, 0]), random_channel(B, BP, 2, [seed, 1]))
        phi1 = tensor(random_channel(A, AP, 2, [seed, 2]), random_channel(B, BP, 2, [seed, 3]))
        big = control_channel(phi0, phi1)
        recover = max(recover, insert_control(big, np.diag([1.0, 0.0])).distance(phi0))
        recover = max(recover, insert_control(big, np.diag([0.0, 1.0])).distance(phi1))
        p = (seed + 1) / 21
        mixed = max(mixed, insert_control(big, np.diag([p, 1 - p])).distance(mix([phi0, phi1], [p, 1 - p])))
    k = ChannelSetSpec.non_signaling(AB, ABP)
    a, b = k.sample(11), k.sample(12)
    in_ext = in_dilation_extension(control_channel(a, b), k, 200, 0)
    ok = recover <= 1e-10 and mixed <= 1e-10 and in_ext
    record(5, ok, f"recovery {recover:.2e}, mixtures {mixed:.2e} (<= 1e-10), in dExt(NS) over 200 trials: {in_ext}")


def test_criterion_6_operational_closure():
    o = embed(comb_to_supermap(qubit_comb(9)))
    worst = 0.0
    for seed in range(50):
        p1, p2 = presentation_pair(o, seed)
        worst = max(worst, float(np.linalg.norm(extend_to_cp(o, p1) - extend_to_cp(o, p2))))
    record(6, worst <= 1e-8, f"50 presentation pairs, max disagreement {worst:.2e} (<= 1e-8)")


def test_criterion_7_switch():
    quantum, classical = switch_supermap(2), switch_supermap(2, classical_control=True)
    xz = np.linalg.norm(control_output(quantum, PAULI_X, PAULI_Z) - MINUS)
    u = random_unitary(2, 13)
    uu = np.linalg.norm(control_output(quantum, u, u) - PLUS)
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    cl = np.linalg.norm(h @ control_output(classical, PAULI_X, PAULI_Z) @ h - np.eye(2) / 2)
    rep = is_supermap(quantum.as_supermap(), 200, 0)
    ok = max(xz, uu, cl) <= 1e-10 and bool(rep)
    record(7, ok, f"(X,Z) |-><-| {xz:.1e}, (U,U) {uu:.1e}, classical dephased {cl:.1e}; is_supermap over 200 trials: {bool(rep)}")


def classical_copy():
    kraus = []
    for i in range(2):
        for j in range(2):
            out = np.kron(np.eye(2)[i], np.eye(2)[i])
            kraus.append(np.outer(out, np.kron(np.eye(2)[i], np.eye(2)[j])))
    return choi_from_kraus(kraus, AB, ABP)


def test_criterion_8_signaling():
    ns = SignalingRelation.no_signaling(["a", "b"], ["a'", "b'"])
    b_to_ap = SignalingRelation.one_way(["a", "b"], ["a'", "b'"], ("b", "a'"))
    a_to_bp = SignalingRelation.one_way(["a", "b"], ["a'", "b'"], ("a", "b'"))
    products = all(
        check_signaling(tensor(random_channel(A, AP, 2, s), random_channel(B, BP, 2, s + 50)), rel)
        for s in range(10)
        for rel in (ns, b_to_ap, a_to_bp)
    )
    swap = wire_channel(AB, ABP, {"a": "b'", "b": "a'"})
    swap_fails = not check_signaling(swap, b_to_ap) and not check_signaling(swap, a_to_bp)
    copy = classical_copy()
    copy_ok = is_channel(copy) and check_signaling(copy, b_to_ap) and not check_signaling(copy, a_to_bp)
    record(8, products and swap_fails and copy_ok, f"products pass: {products}, SWAP fails both edges: {swap_fails}, copy one-way: {copy_ok}")


def test_criterion_9_classical_mirror():
    worst = classical_roundtrip(25, 0, (2, 2, 2, 2))
    rng = np.random.default_rng(9)
    completion = 0.0
    for _ in range(100):
        sigma = rng.uniform(0, 1, size=int(rng.integers(2, 7)))
        lam, rest = effect_completion(sigma)
        completion = max(completion, float(np.max(np.abs(lam * sigma + rest - 1))))
        if lam <= 0 or np.any(rest < 0):
            completion = np.inf
    record(9, worst <= 1e-10 and completion <= 1e-12, f"classical round trip {worst:.2e} (<= 1e-10), effect completion {completion:.1e} on 100 effects")


def test_criterion_10_comb_correspondence():
    pointwise, behaviour = 0.0, 0.0
    c = qubit_comb(10)
    s = comb_to_supermap(c)
    c2 = supermap_to_comb(s)
    for seed in range(50):
        rng = trial_rng(10, seed)
        x, xp = aux(rng, "_x"), aux(rng, "_xp")
        phi = random_channel(A + x, AP + xp, 2, rng)
        pointwise = max(pointwise, apply_comb(c, phi).distance(apply_supermap(s, phi)))
        behaviour = max(behaviour, apply_comb(c2, phi).distance(apply_comb(c, phi)))
    record(10, pointwise <= 1e-9 and behaviour <= 1e-9, f"50 random phi: comb vs supermap {pointwise:.2e}, re-bent comb {behaviour:.2e} (<= 1e-9)")


if __name__ == "__main__":
    criteria = [(int(k.split("_")[2]), fn) for k, fn in globals().items() if k.startswith("test_criterion_")]
    for _, fn in sorted(criteria, key=lambda t: t[0]):
        try:
            fn()
        except AssertionError:
            pass
