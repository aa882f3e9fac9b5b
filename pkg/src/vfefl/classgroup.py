"""Class group of an imaginary quadratic order with an easy-DL subgroup.

Elements are reduced positive-definite binary quadratic forms ``(a, b, c)`` of
the non-fundamental discriminant ``disc = -p**3 * q`` (``p**2`` times the
fundamental ``disc_k = -p*q``).  The subgroup ``F`` generated by
``f = (p**2, p, (1 - disc_k)/4)`` has order ``p`` and its discrete logarithm
is read off the middle coefficient, so ``f**m`` never needs a square-and-multiply.
"""

from __future__ import annotations

import math
import random
import secrets
from dataclasses import dataclass, field
from functools import cached_property

import gmpy2
from gmpy2 import mpz

from . import encoding
from .errors import InvalidEncoding, NotInF, NotInGroup, SetupError


@dataclass(frozen=True, slots=True)
class QuadForm:
    a: mpz
    b: mpz
    c: mpz

    def __iter__(self):
        yield self.a
        yield self.b
        yield self.c

    @property
    def discriminant(self) -> mpz:
        return self.b * self.b - 4 * self.a * self.c

    def is_reduced(self) -> bool:
        a, b, c = self.a, self.b, self.c
        if not (-a < b <= a <= c):
            return False
        return not (a == c and b < 0)

    def to_bytes(self) -> bytes:
        return b"".join(encoding.put_int(v) for v in self)

    @classmethod
    def read(cls, reader: encoding.Reader) -> "QuadForm":
        return cls(mpz(reader.int()), mpz(reader.int()), mpz(reader.int()))

    def __repr__(self):
        return f"QuadForm(a={int(self.a)}, b={int(self.b)}, c={int(self.c)})"


def _normalize(a, b, c):
    if -a < b <= a:
        return a, b, c
    r = (a - b) // (2 * a)
    return a, b + 2 * r * a, a * r * r + b * r + c


def reduce_form(a, b, c) -> QuadForm:
    a, b, c = _normalize(mpz(a), mpz(b), mpz(c))
    while a > c:
        s = (c + b) // (2 * c)
        a, b, c = c, -b + 2 * s * c, c * s * s - b * s + a
    if a == c and b < 0:
        b = -b
    return QuadForm(a, b, c)


def principal_form(disc) -> QuadForm:
    disc = mpz(disc)
    k = disc % 2
    return QuadForm(mpz(1), k, (k - disc) // 4)


def compose(f1: QuadForm, f2: QuadForm) -> QuadForm:
    """Gauss composition followed by reduction (Cohen, Alg. 5.4.7)."""
    if f1.a > f2.a:
        f1, f2 = f2, f1
    a1, b1, _ = f1
    a2, b2, c2 = f2
    s = (b1 + b2) // 2
    n = b2 - s
    if a2 % a1 == 0:
        y1 = mpz(0)
        d = a1
    else:
        d, y1, _ = gmpy2.gcdext(a2, a1)
    if s % d == 0:
        y2, x2, d1 = mpz(-1), mpz(0), d
    else:
        d1, x2, y2 = gmpy2.gcdext(s, d)
        y2 = -y2
    v1 = a1 // d1
    v2 = a2 // d1
    r = (y1 * y2 * n - x2 * c2) % v1
    b3 = b2 + 2 * v2 * r
    a3 = v1 * v2
    c3 = (c2 * d1 + r * (b2 + v2 * r)) // v1
    return reduce_form(a3, b3, c3)


def square(f: QuadForm) -> QuadForm:
    a, b, c = f
    d1, u, _ = gmpy2.gcdext(b, a)
    if d1 != 1:
        return compose(f, f)
    A = a
    C = (-c * u) % A
    if A - C < C:
        C = C - A
    a3 = A * A
    b3 = b + 2 * A * C
    c3 = (b3 * b3 - (b * b - 4 * a * c)) // (4 * a3)
    return reduce_form(a3, b3, c3)


def inverse(f: QuadForm) -> QuadForm:
    return reduce_form(f.a, -f.b, f.c)


def form_exp(base: QuadForm, e: int) -> QuadForm:
    """``base**e`` for any integer ``e`` (negative exponents use the inverse)."""
    e = int(e)
    if e < 0:
        base, e = inverse(base), -e
    result = principal_form(base.discriminant)
    if e == 0:
        return result
    # left-to-right fixed window
    w = 4 if e.bit_length() > 64 else 1
    table = [result, base]
    for _ in range(2, 1 << w):
        table.append(compose(table[-1], base))
    digits = []
    while e:
        digits.append(e & ((1 << w) - 1))
        e >>= w
    acc = table[digits[-1]]
    for dgt in reversed(digits[:-1]):
        for _ in range(w):
            acc = square(acc)
        if dgt:
            acc = compose(acc, table[dgt])
    return acc


def is_valid_form(f: QuadForm, disc) -> bool:
    a, b, c = f
    if a <= 0 or f.discriminant != disc:
        return False
    if not f.is_reduced():
        return False
    return gmpy2.gcd(gmpy2.gcd(a, b), c) == 1


class FixedBase:
    """Precomputed comb table for repeated powers of one base."""

    def __init__(self, base: QuadForm, max_bits: int, window: int = 4):
        self.base = base
        self.window = window
        self.identity = principal_form(base.discriminant)
        self.rows = []
        g = base
        for _ in range(-(-max_bits // window)):
            row = [self.identity, g]
            for _ in range(2, 1 << window):
                row.append(compose(row[-1], g))
            self.rows.append(row)
            g = compose(row[-1], g)
        self.max_bits = len(self.rows) * window

    def pow(self, e: int) -> QuadForm:
        e = int(e)
        neg = e < 0
        e = abs(e)
        if e.bit_length() > self.max_bits:
            r = form_exp(self.base, e)
            return inverse(r) if neg else r
        mask = (1 << self.window) - 1
        acc = None
        i = 0
        while e:
            d = e & mask
            if d:
                acc = self.rows[i][d] if acc is None else compose(acc, self.rows[i][d])
            e >>= self.window
            i += 1
        if acc is None:
            return self.identity
        return inverse(acc) if neg else acc


# parameter profiles: bit length of the fundamental discriminant and the
# statistical parameter used for exponent distributions
PROFILES = {
    "test": {"disc_bits": 520, "lam": 64},
    "benchmark": {"disc_bits": 1827, "lam": 128},
}


@dataclass(frozen=True)
class ClassGroupParams:
    p: int
    q: int
    lam: int
    s_tilde: int
    h_hat_p: QuadForm
    h_p: QuadForm
    disc_k: int = field(init=False)
    disc: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "disc_k", -self.p * self.q)
        object.__setattr__(self, "disc", -self.p * self.p * self.p * self.q)

    @property
    def S(self) -> int:
        """Upper end of the D_p exponent range."""
        return (1 << (self.lam - 2)) * self.s_tilde

    @property
    def f(self) -> QuadForm:
        return pow_f(self, 1)

    @property
    def identity(self) -> QuadForm:
        return principal_form(self.disc)

    @cached_property
    def h_p_table(self) -> FixedBase:
        bits = self.lam + self.p.bit_length() + self.S.bit_length() + 2
        return FixedBase(self.h_p, bits)

    def pow_h_p(self, e: int) -> QuadForm:
        return self.h_p_table.pow(e)

    def check(self, form: QuadForm) -> QuadForm:
        """Membership check for elements of the full class group."""
        if not isinstance(form, QuadForm) or not is_valid_form(form, self.disc):
            raise NotInGroup(f"not a reduced form of discriminant {self.disc.bit_length()} bits")
        return form

    def to_bytes(self) -> bytes:
        out = bytes([encoding.FORMAT_VERSION])
        out += encoding.put_int(self.p) + encoding.put_int(self.q)
        out += encoding.put_int(self.lam) + encoding.put_int(self.s_tilde)
        return out + self.h_hat_p.to_bytes() + self.h_p.to_bytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "ClassGroupParams":
        r = encoding.Reader(data)
        r.version()
        p, q, lam, s_tilde = r.int(), r.int(), r.int(), r.int()
        hh, hp = QuadForm.read(r), QuadForm.read(r)
        r.done()
        params = cls(p, q, lam, s_tilde, hh, hp)
        params.check(hh)
        params.check(hp)
        return params

    def __eq__(self, other):
        return isinstance(other, ClassGroupParams) and self.to_bytes() == other.to_bytes()

    def __hash__(self):
        return hash(self.to_bytes())


def _class_number_bound(disc_k: int) -> int:
    d = abs(disc_k)
    # h(disc_k) < log|d| * sqrt|d| / pi
    return int(math.log(d) * int(gmpy2.isqrt(d)) / math.pi) + 1


def prime_form(disc, r: int) -> QuadForm:
    """Reduced form of norm ``r`` (odd prime, ``disc`` a nonzero QR mod r)."""
    disc = mpz(disc)
    b = _sqrt_mod_prime(int(disc % r), r)
    if (b - disc) % 2:
        b = r - b
    b = mpz(b)
    return reduce_form(mpz(r), b, (b * b - disc) // (4 * r))


def _sqrt_mod_prime(n: int, r: int) -> int:
    n %= r
    if n == 0:
        return 0
    if r % 4 == 3:
        return pow(n, (r + 1) // 4, r)
    # Tonelli-Shanks
    q, s = r - 1, 0
    while q % 2 == 0:
        q //= 2
        s += 1
    z = 2
    while pow(z, (r - 1) // 2, r) != r - 1:
        z += 1
    m, c, t, x = s, pow(z, q, r), pow(n, q, r), pow(n, (q + 1) // 2, r)
    while t != 1:
        i, t2 = 0, t
        while t2 != 1:
            t2 = t2 * t2 % r
            i += 1
        b = pow(c, 1 << (m - i - 1), r)
        m, c, t, x = i, b * b % r, t * b * b % r, x * b % r
    return x


def cl_gen(
    p: int,
    lam: int | None = None,
    *,
    profile: str = "test",
    disc_bits: int | None = None,
    rng: random.Random | None = None,
    max_tries: int = 20000,
) -> ClassGroupParams:
    """Generate class-group parameters whose easy-DL subgroup has order ``p``."""
    if not gmpy2.is_prime(p) or p < 3:
        raise SetupError("p must be an odd prime")
    prof = PROFILES[profile]
    lam = prof["lam"] if lam is None else lam
    disc_bits = prof["disc_bits"] if disc_bits is None else disc_bits
    rng = rng or secrets.SystemRandom()
    q_bits = max(disc_bits - p.bit_length(), p.bit_length() + 3)

    q = None
    for _ in range(max_tries):
        cand = rng.getrandbits(q_bits) | (1 << (q_bits - 1)) | 1
        # need -p*q = 1 mod 4, (p/q) = -1 and q > 4p so that F elements are reduced
        if (p * cand) % 4 != 3 or cand <= 4 * p:
            continue
        if gmpy2.is_prime(cand, 30) and gmpy2.jacobi(p, cand) == -1:
            q = cand
            break
    if q is None:
        raise SetupError(f"no suitable q found after {max_tries} candidates")

    disc_k = -p * q
    disc = p * p * disc_k
    r = 3
    for _ in range(max_tries):
        if r != p and r != q and gmpy2.kronecker(disc_k, r) == 1:
            break
        r = int(gmpy2.next_prime(r))
    else:
        raise SetupError("no split prime found for the generator")
    base = prime_form(disc, r)
    h_hat_p = form_exp(square(base), p)
    s_tilde = _class_number_bound(disc_k)
    t_hat = rng.randrange(((1 << (lam - 2)) * s_tilde) + 1)
    h_p = form_exp(h_hat_p, t_hat)
    return ClassGroupParams(p, q, lam, s_tilde, h_hat_p, h_p)


def pow_f(params: ClassGroupParams, m: int) -> QuadForm:
    """``f**m`` in closed form: ``(p^2, L p, *)`` with ``L = m^-1 mod p`` odd."""
    p = params.p
    m %= p
    if m == 0:
        return params.identity
    L = pow(m, -1, p)
    if L % 2 == 0:
        L -= p
    a = mpz(p) * p
    b = mpz(L) * p
    return QuadForm(a, b, (b * b - params.disc) // (4 * a))


def cl_solve(params: ClassGroupParams, elem: QuadForm) -> int:
    """Discrete log to base ``f`` of an element of ``F``."""
    p = params.p
    if elem == params.identity:
        return 0
    if elem.a != p * p or elem.b % p != 0:
        raise NotInF("element is not in the order-p subgroup")
    L = int(elem.b // p)
    if L % p == 0:
        raise NotInF("element is not in the order-p subgroup")
    return pow(L, -1, p)


def in_f(params: ClassGroupParams, elem: QuadForm) -> bool:
    try:
        cl_solve(params, elem)
    except NotInF:
        return False
    return True


def sample_dp(params: ClassGroupParams, rng=None) -> int:
    rng = rng or secrets.SystemRandom()
    return rng.randrange(params.S + 1)


def sample_d(params: ClassGroupParams, rng=None) -> int:
    rng = rng or secrets.SystemRandom()
    return rng.randrange(params.p * params.S + 1)


def read_form(params: ClassGroupParams, data: bytes) -> QuadForm:
    r = encoding.Reader(data)
    try:
        form = QuadForm.read(r)
        r.done()
    except InvalidEncoding as exc:
        raise NotInGroup(str(exc)) from exc
    return params.check(form)
