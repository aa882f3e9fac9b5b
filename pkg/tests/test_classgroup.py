import math
import random

import gmpy2
import pytest

from vfefl.algebra import P
from vfefl.classgroup import (
    ClassGroupParams,
    QuadForm,
    cl_gen,
    cl_solve,
    compose,
    form_exp,
    in_f,
    inverse,
    pow_f,
    principal_form,
    read_form,
    reduce_form,
    sample_d,
    sample_dp,
    square,
)
from vfefl.errors import NotInF, NotInGroup, SetupError


def _random_form(cg, rng):
    return cg.pow_h_p(rng.randrange(1 << 80))


def test_f_has_order_p(cg):
    assert cg.f != cg.identity
    assert form_exp(cg.f, cg.p) == cg.identity
    assert pow_f(cg, cg.p) == cg.identity


def test_profile_sizes(cg):
    assert cg.disc_k.bit_length() >= 519
    assert cg.lam == 64
    assert cg.disc == cg.p ** 2 * cg.disc_k
    assert cg.S == (1 << 62) * cg.s_tilde


def test_seeded_generation_is_deterministic():
    a = cl_gen(P, rng=random.Random(11))
    b = cl_gen(P, rng=random.Random(11))
    assert a.to_bytes() == b.to_bytes()
    assert cl_gen(P, rng=random.Random(12)) != a


def test_params_round_trip(cg):
    assert ClassGroupParams.from_bytes(cg.to_bytes()) == cg


def test_rejects_composite_p():
    with pytest.raises(SetupError):
        cl_gen(P + 2)


def test_retry_cap_surfaces_as_error():
    with pytest.raises(SetupError):
        cl_gen(P, rng=random.Random(0), max_tries=1)


def test_solve_round_trip(cg):
    rng = random.Random(6)
    for _ in range(100):
        m = rng.randrange(1, P)
        assert cl_solve(cg, pow_f(cg, m)) == m


def test_closed_form_agrees_with_generic_exponentiation(cg):
    rng = random.Random(7)
    for _ in range(5):
        m = rng.randrange(1, P)
        assert form_exp(cg.f, m) == pow_f(cg, m)


def test_solve_identity_and_wrong_subgroup(cg):
    assert cl_solve(cg, cg.identity) == 0
    with pytest.raises(NotInF):
        cl_solve(cg, cg.h_p)
    assert in_f(cg, cg.f) and not in_f(cg, cg.h_p)


def test_solve_homomorphism(cg):
    rng = random.Random(8)
    for _ in range(20):
        a, b = rng.randrange(P), rng.randrange(P)
        prod = compose(pow_f(cg, a), pow_f(cg, b))
        assert cl_solve(cg, prod) == (a + b) % P


def test_form_exp_laws(cg):
    rng = random.Random(9)
    x = _random_form(cg, rng)
    assert form_exp(x, 0) == principal_form(cg.disc)
    assert form_exp(x, 1) == x
    for _ in range(10):
        a, b = rng.randrange(1 << 300), rng.randrange(1 << 300)
        assert form_exp(x, a + b) == compose(form_exp(x, a), form_exp(x, b))
    assert form_exp(x, -5) == inverse(form_exp(x, 5))
    assert compose(x, inverse(x)) == cg.identity


def test_square_matches_compose(cg):
    rng = random.Random(10)
    for _ in range(20):
        x = _random_form(cg, rng)
        assert square(x) == compose(x, x)
    assert square(cg.f) == compose(cg.f, cg.f)


def test_results_are_reduced(cg):
    rng = random.Random(11)
    for _ in range(50):
        x = compose(_random_form(cg, rng), pow_f(cg, rng.randrange(P)))
        assert x.is_reduced()
        assert abs(x.b) <= x.a <= x.c
        assert x.discriminant == cg.disc


def test_fixed_base_table_matches_generic(cg):
    rng = random.Random(12)
    for _ in range(5):
        e = sample_dp(cg, rng)
        assert cg.pow_h_p(e) == form_exp(cg.h_p, e)
    assert cg.pow_h_p(0) == cg.identity
    assert cg.pow_h_p(-3) == inverse(form_exp(cg.h_p, 3))


def test_membership_checks(cg):
    x = cg.h_p
    assert cg.check(x) is x
    with pytest.raises(NotInGroup):
        cg.check(QuadForm(x.a, x.b + 2, x.c))
    with pytest.raises(NotInGroup):
        cg.check(QuadForm(x.c, x.b, x.a) if x.c != x.a else QuadForm(x.a, -x.a - 2, x.c))
    with pytest.raises(NotInGroup):
        read_form(cg, b"\x01\x02")
    assert read_form(cg, x.to_bytes()) == x


def test_dp_samples_bounded_and_centred(cg):
    rng = random.Random(13)
    xs = [sample_dp(cg, rng) for _ in range(10_000)]
    assert all(0 <= v <= cg.S for v in xs)
    mean = sum(xs) / len(xs)
    assert abs(mean - cg.S / 2) <= 0.05 * cg.S / 2


def test_d_samples_bounded(cg):
    rng = random.Random(14)
    assert all(0 <= sample_d(cg, rng) <= cg.p * cg.S for _ in range(1000))


def test_samples_reproducible(cg):
    a = [sample_dp(cg, random.Random(3)) for _ in range(3)]
    b = [sample_dp(cg, random.Random(3)) for _ in range(3)]
    assert a == b


def _class_number(disc: int) -> int:
    """Count reduced primitive forms by enumeration (tiny discriminants only)."""
    d = -disc
    count = 0
    a = 1
    while 3 * a * a <= d:
        for b in range(-a + 1, a + 1):
            if (b * b + d) % (4 * a):
                continue
            c = (b * b + d) // (4 * a)
            if c < a or (b < 0 and (a == c)):
                continue
            if math.gcd(math.gcd(a, abs(b)), c) != 1:
                continue
            count += 1
        a += 1
    return count


def test_hsm_structure_small_parameters():
    """With a brute-forced class number, ``x^N`` projects ``f^a h_p^b`` onto ``F``."""
    p = 13
    small = cl_gen(p, lam=8, disc_bits=12, rng=random.Random(1))
    h_k = _class_number(small.disc_k)
    h_full = _class_number(small.disc)
    assert h_full == p * h_k
    assert h_k % p != 0
    # the p-th powers have order dividing h(disc_k)
    assert form_exp(small.h_p, h_k) == small.identity
    assert form_exp(small.f, p) == small.identity
    rng = random.Random(2)
    for _ in range(20):
        a, b = rng.randrange(p), rng.randrange(1000)
        x = compose(pow_f(small, a), form_exp(small.h_p, b))
        got = cl_solve(small, form_exp(x, h_k))
        assert got * pow(h_k, -1, p) % p == a


def test_reduce_form_normalizes():
    disc = -23
    f = reduce_form(gmpy2.mpz(6), gmpy2.mpz(5), gmpy2.mpz(2))
    assert f.is_reduced() and f.discriminant == disc
