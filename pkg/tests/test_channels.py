import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import A, AP, I2, X
from higherorder.channels import (
    ChannelError,
    ChannelSetSpec,
    ControlPair,
    SignalingRelation,
    apply,
    channel_from_dict,
    channel_to_dict,
    check_signaling,
    choi_from_kraus,
    compose,
    control_channel,
    discard_prepare,
    from_choi,
    identity_channel,
    in_dilation_extension,
    insert_control,
    is_channel,
    kraus_operators,
    mix,
    random_channel,
    random_unitary,
    signaling_report,
    swap_channel,
    tensor,
    unitary_channel,
    wire_channel,
)
from higherorder.tensor_core import SystemType

AB = SystemType.of("a", 2, "b", 2)
ABP = SystemType.of("a'", 2, "b'", 2)
NS = SignalingRelation.no_signaling(["a", "b"], ["a'", "b'"])
ONE_WAY = SignalingRelation.one_way(["a", "b"], ["a'", "b'"], ("b", "a'"))
REVERSE = SignalingRelation.one_way(["a", "b"], ["a'", "b'"], ("a", "b'"))
seeds = st.integers(min_value=0, max_value=2**32 - 1)


def rand_kraus(rng, d_out, d_in, n):
    g = rng.normal(size=(n * d_out, d_in)) + 1j * rng.normal(size=(n * d_out, d_in))
    q, _ = np.linalg.qr(g)
    return [q[k * d_out : (k + 1) * d_out] for k in range(n)]


def product(seed):
    return tensor(random_channel(A, AP, 2, seed), random_channel(SystemType.of("b", 2), SystemType.of("b'", 2), 2, seed + 1))


def ab_swap():
    return wire_channel(AB, ABP, {"a": "b'", "b": "a'"})


def classical_copy():
    # measure A, copy the outcome to A' and B', ignore B
    kraus = []
    for i in range(2):
        for j in range(2):
            out = np.kron(oracles.ket(i, 2), oracles.ket(i, 2))
            inp = np.kron(oracles.ket(i, 2), oracles.ket(j, 2))
            kraus.append(np.outer(out, inp))
    return choi_from_kraus(kraus, AB, ABP)


# -- choi_from_kraus -----------------------------------------------------------------


def test_identity_kraus_choi():
    c = choi_from_kraus([I2])
    cup = np.eye(2).reshape(-1)
    assert np.allclose(c.choi, np.outer(cup, cup))
    assert np.isclose(np.trace(c.choi), 2)


def test_pauli_kraus_is_deterministic():
    assert choi_from_kraus([X]).deterministic


def test_discard_prepare_kraus():
    c = choi_from_kraus([np.array([[1, 0], [0, 0]]), np.array([[0, 1], [0, 0]])])
    assert c.deterministic
    ref = discard_prepare(SystemType.of("a", 2), SystemType.of("a", 2), np.diag([1.0, 0.0]))
    assert c.distance(ref) < 1e-12


def test_kraus_choi_matches_direct_sum(rng):
    ks = rand_kraus(rng, 3, 2, 2)
    c = choi_from_kraus(ks, SystemType.of("i", 2), SystemType.of("o", 3))
    assert np.allclose(c.choi, oracles.choi_np(ks), atol=1e-12)
    assert c.deterministic


def test_non_tp_kraus_not_deterministic():
    assert not choi_from_kraus([0.5 * I2]).deterministic


def test_kraus_shape_mismatch():
    with pytest.raises(ChannelError):
        choi_from_kraus([np.eye(2), np.eye(3)])
    with pytest.raises(ChannelError):
        choi_from_kraus([])


def test_kraus_operators_roundtrip(rng):
    ks = rand_kraus(rng, 2, 2, 3)
    c = choi_from_kraus(ks)
    assert choi_from_kraus(kraus_operators(c)).distance(c) < 1e-10


# -- apply ---------------------------------------------------------------------------


def test_apply_identity(rng):
    rho = oracles.ic_states(3, rng)[0]
    assert np.allclose(apply(identity_channel(SystemType.of("a", 3)), rho), rho)


def test_apply_depolarizing(rng):
    dep = discard_prepare(SystemType.of("a", 2), SystemType.of("a", 2), I2 / 2)
    g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    rho = g @ g.conj().T
    assert np.allclose(apply(dep, rho), I2 / 2 * np.trace(rho))


def test_apply_pauli_x():
    assert np.allclose(apply(choi_from_kraus([X]), np.diag([1, 0])), np.diag([0, 1]))


def test_apply_matches_partial_trace_formula(rng):
    ks = rand_kraus(rng, 3, 2, 2)
    c = choi_from_kraus(ks, SystemType.of("i", 2), SystemType.of("o", 3))
    rho = oracles.ic_states(2, rng)[1]
    assert np.allclose(apply(c, rho), oracles.apply_choi_np(c.choi, rho, 2, 3))
    assert np.isclose(np.trace(apply(c, rho)), 1)


def test_apply_dim_mismatch():
    with pytest.raises(ChannelError):
        apply(choi_from_kraus([X]), np.eye(3))


def test_compose_matches_kraus_product(rng):
    k1, k2 = rand_kraus(rng, 2, 2, 2), rand_kraus(rng, 2, 2, 2)
    c = compose(choi_from_kraus(k2), choi_from_kraus(k1))
    ref = oracles.choi_np([b @ a for a in k1 for b in k2])
    assert np.allclose(c.choi, ref, atol=1e-12)


# -- is_channel ------------------------------------------------------------------------


def test_is_channel_identity():
    rep = is_channel(identity_channel(SystemType.of("a", 2)))
    assert rep.cp and rep.tp


def test_is_channel_negative_choi():
    rep = is_channel(from_choi(-np.eye(4), A, AP))
    assert not rep.cp


def test_is_channel_transpose_map():
    swap = np.eye(4)[[0, 2, 1, 3]]
    rep = is_channel(from_choi(swap, A, AP))
    assert not rep.cp and rep.tp
    assert np.isclose(rep.min_eigenvalue, -1)


# -- random_channel -------------------------------------------------------------------------


def test_random_channel_env_one_is_unitary():
    c = random_channel(A, AP, 1, 5)
    assert len(kraus_operators(c)) == 1
    assert is_channel(c)


def test_random_channel_reproducible():
    assert np.array_equal(random_channel(A, AP, 2, 9).choi, random_channel(A, AP, 2, 9).choi)


def test_random_channel_is_channel_100_seeds():
    for seed in range(100):
        assert is_channel(random_channel(SystemType.of("i", 2), SystemType.of("o", 3), 2, seed))


def test_random_channel_env_too_small_is_raised():
    c = random_channel(SystemType.of("i", 4), SystemType.of("o", 2), 1, 0)
    assert is_channel(c)


def test_random_channel_rejects_zero_env():
    with pytest.raises(ChannelError):
        random_channel(A, AP, 0, 0)


# -- signaling -------------------------------------------------------------------------------


@pytest.mark.parametrize("rel", [NS, ONE_WAY, REVERSE])
def test_product_passes_every_relation(rel):
    for seed in range(10):
        assert check_signaling(product(seed), rel)


def test_swap_signals_both_ways():
    rep = signaling_report(ab_swap(), NS)
    assert all(v > 1 for v in rep.values())
    assert not check_signaling(ab_swap(), ONE_WAY)
    assert not check_signaling(ab_swap(), REVERSE)


def test_classical_copy_is_one_way():
    c = classical_copy()
    assert is_channel(c)
    assert check_signaling(c, ONE_WAY)
    assert not check_signaling(c, REVERSE)


def test_signaling_partition_mismatch():
    with pytest.raises(ChannelError):
        check_signaling(random_channel(A, AP, 1, 0), NS)


def test_relation_validates_parties():
    with pytest.raises(ChannelError):
        SignalingRelation(("a",), ("a'",), frozenset({("b", "a'")}))


def test_signaling_invariant_under_local_unitaries():
    c = classical_copy()
    u_b = unitary_channel(random_unitary(2, 3), SystemType.of("b", 2))
    u_bp = unitary_channel(random_unitary(2, 4), SystemType.of("b'", 2))
    dressed = compose(u_bp, compose(c, u_b))
    for rel in (ONE_WAY, REVERSE):
        assert check_signaling(dressed, rel) == check_signaling(c, rel)


@pytest.mark.parametrize("p", [0.0, 0.3, 1.0])
def test_non_signaling_convex_closure(p):
    for seed in range(5):
        m = mix([product(seed), product(seed + 100)], [p, 1 - p])
        assert check_signaling(m, NS)


# -- channel sets and dilation extensions ---------------------------------------------------------


def test_kind_all_and_ns_force_flags():
    with pytest.raises(ChannelError):
        ChannelSetSpec(A, AP, "all", convex=False)
    with pytest.raises(ChannelError):
        ChannelSetSpec(AB, ABP, "non_signaling", relation=NS, normal=False)


def test_sampled_members_are_in_set():
    k = ChannelSetSpec.non_signaling(AB, ABP)
    xt, xpt = SystemType.of("x", 2), SystemType.of("y", 3)
    for seed in range(10):
        phi = k.sample(seed, xt, xpt)
        assert in_dilation_extension(phi, k, 10, seed)


def test_one_way_sampler_stays_in_set_and_signals():
    k = ChannelSetSpec.one_way(AB, ABP, ("b", "a'"))
    signals = False
    for seed in range(10):
        phi = k.sample(seed)
        assert k.contains(phi)
        signals |= not check_signaling(phi, REVERSE)
    assert signals


def test_extension_of_member_by_identity():
    k = ChannelSetSpec.non_signaling(AB, ABP)
    phi = tensor(product(3), identity_channel(SystemType.of("x", 2), out_labels={"x": "y"}))
    assert in_dilation_extension(phi, k, 50, 0)


def test_all_accepts_any_bipartite():
    k = ChannelSetSpec.all(A, AP)
    phi = random_channel(A + SystemType.of("x", 3), AP + SystemType.of("y", 2), 2, 1)
    assert in_dilation_extension(phi, k, 50, 0)


@pytest.mark.parametrize("kind", ["all", "ns"])
def test_swap_in_dilation_extension_of_normal_set(kind):
    if kind == "all":
        k, a, ap = ChannelSetSpec.all(A, AP), A, AP
    else:
        k, a, ap = ChannelSetSpec.non_signaling(AB, ABP), AB, ABP
    sw = swap_channel(a, ap)
    assert in_dilation_extension(sw, k, 200, 0)


def test_signaling_dilation_refuted():
    k = ChannelSetSpec.non_signaling(AB, ABP)
    phi = tensor(ab_swap(), identity_channel(SystemType.of("x", 2), out_labels={"x": "y"}))
    assert not in_dilation_extension(phi, k, 5, 0)


def test_dilation_rejects_non_channel():
    k = ChannelSetSpec.all(A, AP)
    assert not in_dilation_extension(from_choi(0.25 * np.eye(4), A, AP), k, 3, 0)


# -- control ----------------------------------------------------------------------------------------


def test_control_recovers_branches():
    phi0, phi1 = random_channel(A, AP, 2, 1), random_channel(A, AP, 2, 2)
    big = control_channel(phi0, phi1)
    assert is_channel(big)
    assert insert_control(big, np.diag([1.0, 0.0])).distance(phi0) <= 1e-10
    assert insert_control(big, np.diag([0.0, 1.0])).distance(phi1) <= 1e-10


@given(st.floats(0, 1), seeds)
@settings(max_examples=25, deadline=None)
def test_control_mixture(p, seed):
    phi0, phi1 = random_channel(A, AP, 2, seed), random_channel(A, AP, 2, seed + 1)
    big = control_channel(phi0, phi1)
    out = insert_control(big, np.diag([p, 1 - p]))
    assert out.distance(mix([phi0, phi1], [p, 1 - p])) <= 1e-10


def test_control_equal_branches_ignore_control(rng):
    phi = random_channel(A, AP, 2, 4)
    big = control_channel(phi, phi)
    for rho in oracles.ic_states(2, rng)[:3]:
        assert insert_control(big, rho).distance(phi) <= 1e-10


def test_control_pair_validation():
    with pytest.raises(ChannelError):
        ControlPair.computational(1)
    plus = np.full((2, 2), 0.5)
    with pytest.raises(ChannelError):
        ControlPair(2, (np.diag([1.0, 0.0]), plus), (np.diag([1.0, 0.0]), np.diag([0.0, 1.0])))


def test_control_rejects_mismatched_types():
    with pytest.raises(ChannelError):
        control_channel(random_channel(A, AP, 1, 0), random_channel(A, SystemType.of("a'", 3), 1, 0))


def test_control_passes_dilation_against_ns_set():
    k = ChannelSetSpec.non_signaling(AB, ABP)
    big = control_channel(product(1), product(2))
    assert in_dilation_extension(big, k, 200, 0)


def test_control_three_levels():
    phi0, phi1 = random_channel(A, AP, 2, 1), random_channel(A, AP, 2, 2)
    pair = ControlPair.computational(3)
    big = control_channel(phi0, phi1, pair)
    assert is_channel(big)
    assert insert_control(big, np.diag([0.0, 1.0, 0.0])).distance(phi1) <= 1e-10


# -- serialisation ------------------------------------------------------------------------------------


def test_channel_dict_roundtrip():
    c = random_channel(AB, SystemType.of("o", 3), 2, 0)
    doc = channel_to_dict(c)
    assert doc["system"]["deterministic"]
    assert channel_from_dict(doc).distance(c) == 0
