import dataclasses
import random
import warnings

import pytest

from helpers import G, H, exact_round, plaintext_oracle
from vfefl import dvfe
from vfefl.algebra import P, multi_exp
from vfefl.classgroup import QuadForm, cl_solve, compose, in_f
from vfefl.dvfe import (
    EXACT,
    ROUNDED,
    KeyShare,
    LabeledCiphertext,
    PublicParams,
    VerificationKeys,
    Weight,
    decrypt,
    dkey_comb,
    encrypt,
    keygen,
    keygen_finalize,
    keygen_local,
    round_key,
    verify_ct,
    verify_dk,
)
from vfefl.errors import DimensionError, MessageTooLarge, NotInF, NotInGroup, OutOfRange, PreconditionError


@pytest.fixture(scope="module")
def three(make_pp):
    pp = make_pp(3, 4)
    keys, vk = keygen(pp, random.Random(1))
    return pp, keys, vk


def product_d(pp, vk, b):
    acc = pp.cg.identity
    for d in vk.d:
        acc = compose(acc, d[b])
    return acc


# -- setup ---------------------------------------------------------------------

def test_setup_subgroup_order(three):
    pp = three[0]
    from vfefl.classgroup import form_exp

    assert form_exp(pp.cg.f, pp.p) == pp.cg.identity
    assert pp.p == P


def test_setup_deterministic():
    a = dvfe.setup(3, 4, seed=5, profile="test")
    b = dvfe.setup(3, 4, seed=5, profile="test")
    assert a.to_bytes() == b.to_bytes()
    assert PublicParams.from_bytes(a.to_bytes()).to_bytes() == a.to_bytes()


def test_setup_rejects_one_client(cg):
    with pytest.raises(PreconditionError):
        dvfe.setup(1, 4, cg=cg)


def test_setup_warns_for_two_clients(cg):
    with pytest.warns(UserWarning):
        dvfe.setup(2, 4, cg=cg)


# -- keygen --------------------------------------------------------------------

def test_keygen_local_bounds_and_membership(three):
    pp = three[0]
    draft = keygen_local(pp, 1, random.Random(3))
    assert all(0 <= t <= pp.cg.S for t in draft.t)
    for T in draft.T:
        assert pp.cg.check(T) == T
    again = keygen_local(pp, 1, random.Random(3))
    assert again == draft


def test_two_party_telescoping(make_pp):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pp = make_pp(2, 1)
    keys, vk = keygen(pp, random.Random(4))
    from vfefl import zkp
    from vfefl.classgroup import inverse

    assert zkp.k_sigma(pp.cg, vk.T, 0)[0] == inverse(vk.T[1][0])
    assert zkp.k_sigma(pp.cg, vk.T, 1)[0] == vk.T[0][0]
    for b in range(2):
        assert in_f(pp.cg, product_d(pp, vk, b))


def test_five_party_solve_recovers_sum(make_pp):
    pp = make_pp(5, 1)
    keys, vk = keygen(pp, random.Random(5))
    for b in range(2):
        assert cl_solve(pp.cg, product_d(pp, vk, b)) == sum(k.k_hat[b] for k in keys) % P


def test_malformed_broadcast_share(three):
    pp, keys, vk = three
    draft = keygen_local(pp, 1, random.Random(6))
    T = list(vk.T)
    T[0] = draft.T
    bad = T[1][0]
    T[1] = (QuadForm(bad.a, bad.b + 2, bad.c), T[1][1])
    with pytest.raises(NotInGroup):
        keygen_finalize(draft, T, pp)


def test_mismatched_own_share(three):
    pp, keys, vk = three
    draft = keygen_local(pp, 1, random.Random(7))
    with pytest.raises(PreconditionError):
        keygen_finalize(draft, list(vk.T), pp)


def test_verification_keys_round_trip(three):
    vk = three[2]
    assert VerificationKeys.from_bytes(vk.to_bytes()) == vk


# -- encrypt / verify_ct ----------------------------------------------------------

def test_zero_key_ciphertext():
    key = "zk"
    x = [3, -1, 0, 7]
    entries = dvfe.encrypt_entries((0, 0), x, key)
    _, w = dvfe.round_bases(key, 4)
    assert list(entries) == [wj ** (xj % P) for wj, xj in zip(w, x)]


def test_encrypt_deterministic_entries(three):
    pp, keys, _ = three
    x = [1, 2, 3, 4]
    a = encrypt(keys[0], x, x, "d", pp, mode=EXACT, weight=1, rng=random.Random(1))
    b = encrypt(keys[0], x, x, "d", pp, mode=EXACT, weight=1, rng=random.Random(1))
    assert a.entries == b.entries
    assert a.to_bytes() == b.to_bytes()


def test_encrypt_rejects_large_message(three):
    pp, keys, _ = three
    with pytest.raises(MessageTooLarge):
        encrypt(keys[0], [1 << 32, 0, 0, 0], [1, 0, 0, 0], "big", pp)
    with pytest.raises(DimensionError):
        encrypt(keys[0], [1, 2], [1, 2], "dim", pp)


def test_rounded_zero_model_is_degenerate(three):
    from vfefl.errors import DegenerateModel

    pp, keys, _ = three
    with pytest.raises(DegenerateModel):
        encrypt(keys[0], [0, 0, 0, 0], [1, 2, 3, 4], "zero", pp, mode=ROUNDED)


def test_ciphertext_round_trip(three):
    pp, keys, vk = three
    ct = encrypt(keys[1], [5, -2, 0, 1], [10, -1, 3, 0], "rt", pp, rng=random.Random(2))
    again = LabeledCiphertext.from_bytes(ct.to_bytes())
    assert again == ct


def test_full_pipeline_n3_m4(three):
    pp, keys, vk = three
    rng = random.Random(8)
    xs = [[rng.randint(-100, 100) for _ in range(4)] for _ in range(3)]
    ys = [rng.randint(0, 100) for _ in range(3)]
    cts, shares = exact_round(pp, keys, vk, xs, ys, "full", rng)
    assert verify_ct(cts, vk.vk_ct, pp, key="full")
    assert verify_dk(shares, vk, pp, key="full", expected_weights=ys)
    fk = dkey_comb(shares, vk, pp)
    assert decrypt(cts, fk, ys, pp) == plaintext_oracle(xs, ys)


def test_rounded_pipeline_matches_trust_scores(three):
    from vfefl.aggregation import aggregate_plain, trust_score

    pp, keys, vk = three
    rng = random.Random(9)
    x0 = [rng.randint(-100, 100) for _ in range(4)]
    xs = [[v + rng.randint(-20, 20) for v in x0] for _ in range(3)]
    cts = [encrypt(k, x, x0, "rnd", pp, rng=rng) for k, x in zip(keys, xs)]
    assert verify_ct(cts, vk.vk_ct, pp, x0=x0, key="rnd", rounded=True)
    scores = [trust_score(x, x0) for x in xs]
    assert [ct.weight.value for ct in cts] == [s.y_hat for s in scores]
    assert [ct.weight.residual for ct in cts] == [s.residual for s in scores]
    shares = [dvfe.dkeygen_share(k, vk, ct.weight, "rnd", pp, rng) for k, ct in zip(keys, cts)]
    assert verify_dk(shares, vk, pp)
    fk = dkey_comb(shares, vk, pp)
    assert decrypt(cts, fk, [ct.weight for ct in cts], pp) == aggregate_plain(xs, scores)


def test_tampered_entry_flags_client(three):
    pp, keys, vk = three
    rng = random.Random(10)
    xs = [[1, 2, 3, 4]] * 3
    cts, _ = exact_round(pp, keys, vk, xs, [1, 2, 3], "tam", rng)
    bad = dataclasses.replace(cts[1], entries=(cts[1].entries[0] * G,) + cts[1].entries[1:])
    res = verify_ct([cts[0], bad, cts[2]], vk.vk_ct, pp)
    assert res.flagged == {2}
    both = dataclasses.replace(cts[2], entries=cts[2].entries[:3] + (cts[2].entries[3] * G,))
    res = verify_ct([bad, cts[1], both], vk.vk_ct, pp)
    assert res.flagged == {1, 3} and res.reasons[1] == "index"
    bad1 = dataclasses.replace(cts[0], entries=(cts[0].entries[0] * G,) + cts[0].entries[1:])
    res = verify_ct([bad1, cts[1], both], vk.vk_ct, pp)
    assert res.flagged == {1, 3}


def test_wrong_round_key_flagged(three):
    pp, keys, vk = three
    cts, _ = exact_round(pp, keys, vk, [[1, 0, 0, 0]] * 3, [1, 1, 1], "k1", random.Random(11))
    assert verify_ct(cts, vk.vk_ct, pp, key="k2").reasons == {1: "label", 2: "label", 3: "label"}


def test_wrong_baseline_flagged(three):
    pp, keys, vk = three
    x0 = [5, 5, 5, 5]
    cts = [encrypt(k, [1, 2, 3, 4], x0, "bl", pp, rng=random.Random(12)) for k in keys]
    assert verify_ct(cts, vk.vk_ct, pp, x0=x0)
    res = verify_ct(cts, vk.vk_ct, pp, x0=[5, 5, 5, 6])
    assert res.reasons == {1: "baseline", 2: "baseline", 3: "baseline"}


# -- key shares --------------------------------------------------------------------

def test_zero_weight_share(three):
    pp, keys, vk = three
    dk = dvfe.share_key(keys[0], 0, "zw")
    v_hat = dvfe._v_hat("zw")
    assert dk == tuple(multi_exp(v_hat[b], keys[0].k_hat) for b in range(2))


def test_share_round_trip(three):
    pp, keys, vk = three
    sh = dvfe.dkeygen_share(keys[0], vk, 7, "sr", pp, random.Random(13))
    assert KeyShare.from_bytes(sh.to_bytes()) == sh


def test_share_under_wrong_label_rejects(three):
    pp, keys, vk = three
    rng = random.Random(14)
    shares = [dvfe.dkeygen_share(k, vk, 3, "right", pp, rng) for k in keys]
    wrong = dvfe.dkeygen_share(keys[0], vk, 3, "wrong", pp, rng)
    relabeled = dataclasses.replace(wrong, key="right")
    assert verify_dk([relabeled] + shares[1:], vk, pp).flagged == {1}


def test_dk_times_h_flagged(three):
    pp, keys, vk = three
    rng = random.Random(15)
    shares = [dvfe.dkeygen_share(k, vk, 5, "dkh", pp, rng) for k in keys]
    bad = dataclasses.replace(shares[2], dk=(shares[2].dk[0] * H, shares[2].dk[1]))
    res = verify_dk(shares[:2] + [bad], vk, pp)
    assert res.flagged == {3}


def test_malformed_T_in_statement_flags_not_in_group(three):
    pp, keys, vk = three
    rng = random.Random(16)
    shares = [dvfe.dkeygen_share(k, vk, 5, "mt", pp, rng) for k in keys]
    f = vk.T[0][0]
    T = (((QuadForm(f.a, f.b + 2, f.c)), vk.T[0][1]),) + vk.T[1:]
    res = verify_dk(shares, dataclasses.replace(vk, T=T), pp)
    assert res.reasons[1] == "not-in-group"


def test_weight_mismatch_flagged(three):
    pp, keys, vk = three
    rng = random.Random(17)
    shares = [dvfe.dkeygen_share(k, vk, y, "wm", pp, rng) for k, y in zip(keys, [1, 2, 3])]
    assert verify_dk(shares, vk, pp, expected_weights=[1, 2, 4]).reasons == {3: "weight-mismatch"}


# -- combine / decrypt -----------------------------------------------------------------

def test_two_party_functional_key(make_pp):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pp = make_pp(2, 2)
    keys, vk = keygen(pp, random.Random(18))
    ys = [4, 9]
    shares = [dvfe.dkeygen_share(k, vk, y, "two", pp, random.Random(0)) for k, y in zip(keys, ys)]
    fk = dkey_comb(shares, vk, pp)
    for b in range(2):
        assert fk.fk[b] == H ** ((keys[0].s[b] * ys[0] + keys[1].s[b] * ys[1]) % P)


def test_zero_weights_give_identity_key(three):
    pp, keys, vk = three
    shares = [dvfe.dkeygen_share(k, vk, 0, "zero", pp, random.Random(0)) for k in keys]
    fk = dkey_comb(shares, vk, pp)
    assert all(x.is_neutral_element() for x in fk.fk)


def test_tampered_d_is_not_in_f(three):
    pp, keys, vk = three
    shares = [dvfe.dkeygen_share(k, vk, 1, "td", pp, random.Random(0)) for k in keys]
    d = list(vk.d)
    d[0] = (compose(d[0][0], vk.T[0][0]), d[0][1])
    with pytest.raises(NotInF):
        dkey_comb(shares, dataclasses.replace(vk, d=tuple(d)), pp)


def test_decrypt_zero_vectors(three):
    pp, keys, vk = three
    cts, shares = exact_round(pp, keys, vk, [[0] * 4] * 3, [3, 1, 4], "zv", random.Random(0))
    assert decrypt(cts, dkey_comb(shares, vk, pp), [3, 1, 4], pp) == [0, 0, 0, 0]


def test_decrypt_selector(three):
    pp, keys, vk = three
    xs = [[9, -8, 7, -6], [1, 1, 1, 1], [50, 50, -50, 0]]
    cts, shares = exact_round(pp, keys, vk, xs, [1, 0, 0], "sel", random.Random(0))
    assert decrypt(cts, dkey_comb(shares, vk, pp), [1, 0, 0], pp) == xs[0]


def test_decrypt_n4_m8(make_pp):
    pp = make_pp(4, 8)
    rng = random.Random(19)
    keys, vk = keygen(pp, rng)
    xs = [[rng.randint(-50, 50) for _ in range(8)] for _ in range(4)]
    ys = [rng.randint(0, 100) for _ in range(4)]
    cts, shares = exact_round(pp, keys, vk, xs, ys, round_key(3), rng)
    assert decrypt(cts, dkey_comb(shares, vk, pp), ys, pp) == plaintext_oracle(xs, ys)


def test_decrypt_out_of_range_reports_dimension(three):
    pp, keys, vk = three
    xs = [[0, 0, 100, 0]] * 3
    cts, shares = exact_round(pp, keys, vk, xs, [10, 10, 10], "oor", random.Random(0))
    with pytest.raises(OutOfRange) as info:
        decrypt(cts, dkey_comb(shares, vk, pp), [10, 10, 10], pp, bound=1000)
    assert info.value.dimension == 2


def test_round_keys_distinct():
    assert round_key(3) == "3"
    assert round_key(3, 1) != round_key(3) != round_key(4)


def test_weight_round_trip():
    from vfefl import encoding

    w = Weight(37, 100, 12)
    assert Weight.read(encoding.Reader(w.to_bytes())) == w
