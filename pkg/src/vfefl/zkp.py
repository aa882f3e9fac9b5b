"""Sigma protocols for ciphertext well-formedness and key-share correctness.

``prove_encrypt`` / ``verify_encrypt`` show that a client's aggregated
ciphertext ``V = (u^m)^s * w^x`` and commitment ``com = v^s`` use the same key
``s`` and that the public weight satisfies the trust-score relation

    scale * <x, x0> == weight * <x, x> + residual   (mod p)

``scale = 1, residual = 0`` is the plain field-ratio relation; the rounded mode
(``scale = 100``) publishes the floor-quantized weight and its residual.

``prove_dkeyshare`` / ``verify_dkeyshare`` show that a functional key share is
consistent with the client's class-group public key and commitment.

Both are made non-interactive with Fiat-Shamir over a length-prefixed
transcript; passing ``challenge=`` runs the interactive variant.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

from petrelic.multiplicative.pairing import G1Element, G2Element

from . import encoding
from .algebra import (
    BLS12_381,
    P,
    g1_from_bytes,
    g2_from_bytes,
    hash_to_scalar,
    inner,
    multi_exp,
    put_g1,
    put_g2,
)
from .classgroup import ClassGroupParams, QuadForm, compose, form_exp, inverse, pow_f
from .errors import PreconditionError

G = BLS12_381.g
H = BLS12_381.h


@dataclass(frozen=True)
class Verdict:
    ok: bool
    reason: str | None = None

    def __bool__(self):
        return self.ok


ACCEPT = Verdict(True)


def reject(reason: str) -> Verdict:
    return Verdict(False, reason)


class Transcript:
    """Append-only, domain-tagged byte log feeding the Fiat-Shamir hash."""

    def __init__(self, domain: str):
        self._buf = bytearray(encoding.put_str(domain))

    def append(self, tag: str, data: bytes) -> "Transcript":
        self._buf += encoding.put_str(tag) + encoding.put(data)
        return self

    def append_g1(self, tag: str, *xs: G1Element) -> "Transcript":
        return self.append(tag, b"".join(put_g1(x) for x in xs))

    def append_g2(self, tag: str, *xs: G2Element) -> "Transcript":
        return self.append(tag, b"".join(put_g2(x) for x in xs))

    def append_ints(self, tag: str, xs: Sequence[int]) -> "Transcript":
        return self.append(tag, b"".join(encoding.put_int(x) for x in xs))

    def append_forms(self, tag: str, *fs: QuadForm) -> "Transcript":
        return self.append(tag, b"".join(f.to_bytes() for f in fs))

    def to_bytes(self) -> bytes:
        return bytes(self._buf)


def fiat_shamir_challenge(transcript: Transcript, nonzero: bool = False) -> int:
    data = transcript.to_bytes()
    c = hash_to_scalar(data)
    counter = 0
    while nonzero and c == 0:
        counter += 1
        c = hash_to_scalar(data + encoding.put_int(counter))
    return c


def _rand(rng, n: int = 1):
    return [rng.randrange(P) for _ in range(n)]


def _pow2(bases, exps) -> G1Element:
    return multi_exp(bases, exps)


# ---------------------------------------------------------------------------
# ciphertext proof
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EncStatement:
    V: G1Element
    com: G1Element
    u: tuple[G1Element, G1Element]
    w: tuple[G1Element, ...]
    v: tuple[G1Element, G1Element]
    x0: tuple[int, ...]
    weight: int
    round_label: str = ""
    enc_labels: tuple[str, ...] = ()
    scale: int = 1
    residual: int = 0
    norm_cap: int | None = None

    @property
    def m(self) -> int:
        return len(self.w)

    @cached_property
    def u_m(self) -> tuple[G1Element, G1Element]:
        return (self.u[0] ** self.m, self.u[1] ** self.m)

    def relation_holds(self, x: Sequence[int]) -> bool:
        lhs = self.scale * inner(x, self.x0)
        rhs = self.weight * inner(x, x) + self.residual
        return (lhs - rhs) % P == 0

    def residual_in_range(self) -> bool:
        if self.norm_cap is None:
            return self.residual == 0
        if self.weight < 0 or self.weight >= P // 2:
            return False
        if self.weight > 0:
            return 0 <= self.residual < self.norm_cap
        # zero weight covers the clamped case where the inner product is <= 0
        return -self.scale * self.norm_cap < self.residual < self.norm_cap

    def transcript(self) -> Transcript:
        tr = Transcript("vfefl/encrypt/v1")
        tr.append_g1("V", self.V).append_g1("com", self.com)
        tr.append("round", self.round_label.encode())
        tr.append("enc", b"".join(encoding.put_str(s) for s in self.enc_labels))
        tr.append_g1("u", *self.u).append_g1("w", *self.w).append_g1("v", *self.v)
        tr.append_ints("x0", self.x0)
        tr.append_ints("y", [self.weight, self.scale, self.residual, self.norm_cap or 0])
        return tr


@dataclass(frozen=True)
class EncCommitment:
    K: G1Element
    T0: G1Element
    T1: G1Element
    T2: G1Element
    T1p: G1Element
    com_star: G1Element

    def absorb(self, tr: Transcript) -> Transcript:
        return tr.append_g1("commit", self.K, self.T0, self.T1, self.T2, self.T1p, self.com_star)


@dataclass(frozen=True)
class EncResponse:
    tau: tuple[int, int]
    tau_p: tuple[int, int]
    omega: tuple[int, int]
    L: tuple[int, ...]
    t: int


@dataclass(frozen=True)
class EncProof:
    commitment: EncCommitment
    alpha: int
    response: EncResponse

    def to_bytes(self) -> bytes:
        c, r = self.commitment, self.response
        out = bytes([encoding.FORMAT_VERSION])
        for x in (c.K, c.T0, c.T1, c.T2, c.T1p, c.com_star):
            out += put_g1(x)
        out += encoding.put_scalar(self.alpha)
        for vec in (r.tau, r.tau_p, r.omega):
            out += b"".join(encoding.put_scalar(v) for v in vec)
        out += encoding.put_int(len(r.L)) + b"".join(encoding.put_scalar(v) for v in r.L)
        return out + encoding.put_scalar(r.t)

    @classmethod
    def from_bytes(cls, data: bytes) -> "EncProof":
        rd = encoding.Reader(data)
        rd.version()
        pts = [g1_from_bytes(rd.take()) for _ in range(6)]
        alpha = rd.scalar()
        tau = (rd.scalar(), rd.scalar())
        tau_p = (rd.scalar(), rd.scalar())
        omega = (rd.scalar(), rd.scalar())
        m = rd.int()
        L = tuple(rd.scalar() for _ in range(m))
        t = rd.scalar()
        rd.done()
        return cls(EncCommitment(*pts), alpha, EncResponse(tau, tau_p, omega, L, t))


class EncProver:
    """Two-move prover; ``commit`` once, then ``respond`` to a challenge.

    ``respond`` may be called repeatedly on the same commitment, which is what
    the rewinding extractor in the tests relies on.
    """

    def __init__(self, stmt: EncStatement, s: Sequence[int], x: Sequence[int], rng=None, check=True):
        if len(x) != stmt.m:
            raise PreconditionError(f"witness has {len(x)} entries, statement {stmt.m}")
        self.stmt = stmt
        self.s = [v % P for v in s]
        self.x = [v % P for v in x]
        self.rng = rng or secrets.SystemRandom()
        if check:
            self._check(x)

    def _check(self, x_signed):
        st = self.stmt
        if st.scale % P == 0:
            raise PreconditionError("scale must be invertible mod p")
        if not st.relation_holds(x_signed):
            raise PreconditionError("weight relation does not hold for this witness")
        if not st.residual_in_range():
            raise PreconditionError("residual outside the public range")
        if _pow2(st.v, self.s) != st.com:
            raise PreconditionError("commitment does not open to the key")
        if _pow2(st.u_m, self.s) * multi_exp(st.w, self.x) != st.V:
            raise PreconditionError("aggregated ciphertext does not match the witness")

    def commit(self) -> EncCommitment:
        st, rng = self.stmt, self.rng
        m = st.m
        self.blind = _rand(rng, 2)
        self.k = _rand(rng, m)
        self.tau0, self.tau1, self.tau2, self.tau1p = (_rand(rng, 2) for _ in range(4))
        x, k = self.x, self.k
        t0 = inner(x, x) % P
        t1 = 2 * inner(k, x) % P
        t2 = inner(k, k) % P
        self._t = (t0, t1, t2)
        t1p = inner(k, [v % P for v in st.x0]) % P
        um = st.u_m
        K = _pow2(um, self.blind) * multi_exp(st.w, k)
        T0 = G ** t0 * _pow2(um, self.tau0)
        T1 = G ** t1 * _pow2(um, self.tau1)
        T2 = G ** t2 * _pow2(um, self.tau2)
        T1p = G ** t1p * _pow2(um, self.tau1p)
        com_star = _pow2(st.v, self.blind)
        self.commitment = EncCommitment(K, T0, T1, T2, T1p, com_star)
        return self.commitment

    def respond(self, alpha: int) -> EncResponse:
        st = self.stmt
        a = alpha % P
        a2 = a * a % P
        y_over_s = st.weight * pow(st.scale, -1, P) % P
        tau = tuple((self.tau0[b] + self.tau1[b] * a + self.tau2[b] * a2) % P for b in range(2))
        tau_p = tuple((self.tau0[b] * y_over_s + self.tau1p[b] * a) % P for b in range(2))
        omega = tuple((self.s[b] + a * self.blind[b]) % P for b in range(2))
        L = tuple((xj + kj * a) % P for xj, kj in zip(self.x, self.k))
        t0, t1, t2 = self._t
        t = (t0 + t1 * a + t2 * a2) % P
        return EncResponse(tau, tau_p, omega, L, t)


def prove_encrypt(
    stmt: EncStatement,
    s: Sequence[int],
    x: Sequence[int],
    rng=None,
    *,
    challenge: int | None = None,
    check: bool = True,
) -> EncProof:
    prover = EncProver(stmt, s, x, rng, check=check)
    commitment = prover.commit()
    if challenge is None:
        challenge = fiat_shamir_challenge(commitment.absorb(stmt.transcript()), nonzero=True)
    elif challenge % P == 0:
        raise ValueError("challenge must be nonzero")
    return EncProof(commitment, challenge % P, prover.respond(challenge))


def verify_encrypt(stmt: EncStatement, proof: EncProof, *, interactive: bool = False) -> Verdict:
    c, r, a = proof.commitment, proof.response, proof.alpha % P
    if len(r.L) != stmt.m:
        return reject("dimension")
    if a == 0:
        return reject("challenge-zero")
    if not interactive:
        expect = fiat_shamir_challenge(c.absorb(stmt.transcript()), nonzero=True)
        if expect != a:
            return reject("challenge")
    if not stmt.residual_in_range():
        return reject("residual-range")
    if stmt.scale % P == 0:
        return reject("scale")
    if r.t % P != inner(r.L, r.L) % P:
        return reject("eq-inner-product")
    um = stmt.u_m
    a2 = a * a % P
    if G ** r.t * _pow2(um, r.tau) != c.T0 * c.T1 ** a * c.T2 ** a2:
        return reject("eq-t")
    S = stmt.scale % P
    lx0 = inner(r.L, [v % P for v in stmt.x0]) % P
    lhs = G ** (S * lx0 % P) * _pow2(um, [S * v % P for v in r.tau_p])
    rhs = c.T0 ** (stmt.weight % P) * G ** (stmt.residual % P) * c.T1p ** (S * a % P)
    if lhs != rhs:
        return reject("eq-weight")
    if multi_exp(stmt.w, r.L) * _pow2(um, r.omega) != stmt.V * c.K ** a:
        return reject("eq-ciphertext")
    if _pow2(stmt.v, r.omega) != stmt.com * c.com_star ** a:
        return reject("eq-commitment")
    return ACCEPT


def simulate_encrypt(stmt: EncStatement, alpha: int, rng=None) -> EncProof:
    """Honest-verifier simulator: a transcript for challenge ``alpha`` without a witness.

    ``T0, T2, tau, tau_p, omega, L`` are uniform; everything else is solved from
    the verification equations.
    """
    rng = rng or secrets.SystemRandom()
    a = alpha % P
    if a == 0:
        raise ValueError("challenge must be nonzero")
    a_inv = pow(a, -1, P)
    a2 = a * a % P
    S = stmt.scale % P
    um = stmt.u_m
    T0 = G ** rng.randrange(P)
    T2 = G ** rng.randrange(P)
    tau = tuple(_rand(rng, 2))
    tau_p = tuple(_rand(rng, 2))
    omega = tuple(_rand(rng, 2))
    L = tuple(_rand(rng, stmt.m))
    t = inner(L, L) % P

    T1 = (G ** t * _pow2(um, tau) * T0.inverse() * (T2 ** a2).inverse()) ** a_inv
    lx0 = inner(L, [v % P for v in stmt.x0]) % P
    base = (
        G ** (S * lx0 % P)
        * _pow2(um, [S * v % P for v in tau_p])
        * (T0 ** (stmt.weight % P)).inverse()
        * (G ** (stmt.residual % P)).inverse()
    )
    T1p = base ** pow(S * a % P, -1, P)
    K = (multi_exp(stmt.w, L) * _pow2(um, omega) * stmt.V.inverse()) ** a_inv
    com_star = (_pow2(stmt.v, omega) * stmt.com.inverse()) ** a_inv
    commitment = EncCommitment(K, T0, T1, T2, T1p, com_star)
    return EncProof(commitment, a, EncResponse(tau, tau_p, omega, L, t))


# ---------------------------------------------------------------------------
# key-share proof
# ---------------------------------------------------------------------------


def k_sigma(cg: ClassGroupParams, T_all: Sequence[tuple[QuadForm, QuadForm]], i: int) -> tuple[QuadForm, QuadForm]:
    """``prod_{j<i} T_j * (prod_{j>i} T_j)^-1`` per component; indices are 0-based."""
    out = []
    for b in range(2):
        acc = cg.identity
        for j, T in enumerate(T_all):
            if j < i:
                acc = compose(acc, T[b])
            elif j > i:
                acc = compose(acc, inverse(T[b]))
        out.append(acc)
    return tuple(out)


@dataclass(frozen=True)
class DkStatement:
    cg: ClassGroupParams
    index: int
    T_all: tuple[tuple[QuadForm, QuadForm], ...]
    d: tuple[QuadForm, QuadForm]
    dk: tuple[G2Element, G2Element]
    com: G1Element
    weight: int
    fn_label: str
    v_hat: tuple[tuple[G2Element, G2Element], tuple[G2Element, G2Element]]
    v: tuple[G1Element, G1Element]

    @property
    def T(self) -> tuple[QuadForm, QuadForm]:
        return self.T_all[self.index]

    @cached_property
    def K(self) -> tuple[QuadForm, QuadForm]:
        return k_sigma(self.cg, self.T_all, self.index)

    def check_membership(self) -> None:
        for T in self.T_all:
            for x in T:
                self.cg.check(x)
        for x in self.d:
            self.cg.check(x)

    def transcript(self) -> Transcript:
        tr = Transcript("vfefl/dkeyshare/v1")
        tr.append_ints("index", [self.index, len(self.T_all)])
        tr.append_forms("T", *(x for T in self.T_all for x in T))
        tr.append_forms("d", *self.d)
        tr.append_g2("dk", *self.dk)
        tr.append_g1("com", self.com)
        tr.append_ints("y", [self.weight])
        tr.append("fn", self.fn_label.encode())
        return tr


@dataclass(frozen=True)
class DkCommitment:
    R_T: tuple[QuadForm, QuadForm]
    R_d: tuple[QuadForm, QuadForm]
    R_dk: tuple[G2Element, G2Element]
    R_com: G1Element

    def absorb(self, tr: Transcript) -> Transcript:
        tr.append_forms("R_T", *self.R_T).append_forms("R_d", *self.R_d)
        return tr.append_g2("R_dk", *self.R_dk).append_g1("R_com", self.R_com)


@dataclass(frozen=True)
class DkProof:
    commitment: DkCommitment
    beta: int
    z_k: tuple[int, int]
    z_s: tuple[int, int]
    z_t: tuple[int, int]

    def to_bytes(self) -> bytes:
        c = self.commitment
        out = bytes([encoding.FORMAT_VERSION])
        out += b"".join(f.to_bytes() for f in c.R_T + c.R_d)
        out += b"".join(put_g2(x) for x in c.R_dk) + put_g1(c.R_com)
        out += encoding.put_scalar(self.beta)
        out += b"".join(encoding.put_scalar(v) for v in self.z_k + self.z_s)
        return out + b"".join(encoding.put_int(v) for v in self.z_t)

    @classmethod
    def from_bytes(cls, data: bytes) -> "DkProof":
        rd = encoding.Reader(data)
        rd.version()
        forms = [QuadForm.read(rd) for _ in range(4)]
        R_dk = (g2_from_bytes(rd.take()), g2_from_bytes(rd.take()))
        R_com = g1_from_bytes(rd.take())
        beta = rd.scalar()
        z = [rd.scalar() for _ in range(4)]
        z_t = (rd.int(), rd.int())
        rd.done()
        c = DkCommitment(tuple(forms[:2]), tuple(forms[2:]), R_dk, R_com)
        return cls(c, beta, (z[0], z[1]), (z[2], z[3]), z_t)


def _dk_component(v_hat_b, k_hat, s_b, weight):
    return multi_exp(v_hat_b, k_hat) * H ** (s_b * weight % P)


def response_bound(cg: ClassGroupParams) -> int:
    return (1 << cg.lam) * cg.p * cg.S


def prove_dkeyshare(
    stmt: DkStatement,
    s: Sequence[int],
    t: Sequence[int],
    k_hat: Sequence[int],
    rng=None,
    *,
    challenge: int | None = None,
    check: bool = True,
) -> DkProof:
    rng = rng or secrets.SystemRandom()
    cg = stmt.cg
    s = [v % P for v in s]
    k_hat = [v % P for v in k_hat]
    t = [int(v) for v in t]
    K = stmt.K
    if check:
        for b in range(2):
            if cg.pow_h_p(t[b]) != stmt.T[b]:
                raise PreconditionError("T does not match t")
            if compose(pow_f(cg, k_hat[b]), form_exp(K[b], t[b])) != stmt.d[b]:
                raise PreconditionError("d does not match (k_hat, t)")
            if _dk_component(stmt.v_hat[b], k_hat, s[b], stmt.weight) != stmt.dk[b]:
                raise PreconditionError("dk does not match (k_hat, s, y)")
        if _pow2(stmt.v, s) != stmt.com:
            raise PreconditionError("commitment does not open to s")

    r_k = _rand(rng, 2)
    r_s = _rand(rng, 2)
    top = response_bound(cg)
    r_t = [rng.randrange(top + 1) for _ in range(2)]
    R_T = tuple(cg.pow_h_p(r_t[b]) for b in range(2))
    R_d = tuple(compose(pow_f(cg, r_k[b]), form_exp(K[b], r_t[b])) for b in range(2))
    R_dk = tuple(_dk_component(stmt.v_hat[b], r_k, r_s[b], stmt.weight) for b in range(2))
    R_com = _pow2(stmt.v, r_s)
    commitment = DkCommitment(R_T, R_d, R_dk, R_com)
    if challenge is None:
        challenge = fiat_shamir_challenge(commitment.absorb(stmt.transcript()))
    beta = challenge % P
    z_k = tuple((r_k[b] - beta * k_hat[b]) % P for b in range(2))
    z_s = tuple((r_s[b] - beta * s[b]) % P for b in range(2))
    z_t = tuple(r_t[b] - beta * t[b] for b in range(2))
    return DkProof(commitment, beta, z_k, z_s, z_t)


def verify_dkeyshare(stmt: DkStatement, proof: DkProof, *, interactive: bool = False) -> Verdict:
    """Check a key-share proof; raises ``NotInGroup`` for malformed class-group inputs."""
    cg = stmt.cg
    stmt.check_membership()
    c = proof.commitment
    for x in c.R_T + c.R_d:
        cg.check(x)
    beta = proof.beta % P
    if not interactive:
        if fiat_shamir_challenge(c.absorb(stmt.transcript())) != beta:
            return reject("challenge")
    top = response_bound(cg)
    if not all(-cg.p * cg.S <= z <= top for z in proof.z_t):
        return reject("z_t-range")
    K = stmt.K
    for b in range(2):
        if compose(form_exp(stmt.T[b], beta), cg.pow_h_p(proof.z_t[b])) != c.R_T[b]:
            return reject("eq-T")
    for b in range(2):
        rhs = compose(form_exp(stmt.d[b], beta), pow_f(cg, proof.z_k[b]))
        if compose(rhs, form_exp(K[b], proof.z_t[b])) != c.R_d[b]:
            return reject("eq-d")
    for b in range(2):
        rhs = stmt.dk[b] ** beta * _dk_component(stmt.v_hat[b], proof.z_k, proof.z_s[b], stmt.weight)
        if rhs != c.R_dk[b]:
            return reject("eq-dk")
    if stmt.com ** beta * _pow2(stmt.v, proof.z_s) != c.R_com:
        return reject("eq-com")
    return ACCEPT
