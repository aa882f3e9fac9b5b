"""Decentralized verifiable functional encryption for weighted inner products.

Each client ``i`` holds ``s_i`` in ``Z_p^2`` and encrypts its vector ``x_i``
coordinate by coordinate as ``C_ij = u^{s_i} * w_j^{x_ij}`` under round label
bases ``u = H1(round)`` and ``w_j = H1'(enc_j)``. With one functional key share
per client the server learns ``sum_i y_i * x_ij`` for every ``j`` and nothing
else about the individual vectors.

Client indices are 1-based everywhere in this module.
"""

from __future__ import annotations

import random
import secrets
import warnings
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Mapping, Sequence

from petrelic.multiplicative.pairing import G1Element, G2Element

from . import encoding, zkp
from .aggregation import quantize
from .algebra import (
    BLS12_381,
    P,
    PairingGroup,
    bsgs_dlog,
    decode_signed,
    g1_from_bytes,
    g2_from_bytes,
    hash_to_g1,
    hash_to_g1_pair,
    hash_to_g2_pair,
    inner,
    multi_exp,
    pairing,
    put_g1,
    put_g2,
)
from .classgroup import (
    ClassGroupParams,
    QuadForm,
    cl_gen,
    cl_solve,
    compose,
    form_exp,
    pow_f,
    sample_dp,
)
from .errors import (
    DegenerateModel,
    DimensionError,
    MessageTooLarge,
    NotInGroup,
    OutOfRange,
    PreconditionError,
)

H = BLS12_381.h

EXACT = "exact"
ROUNDED = "rounded"
MODES = (EXACT, ROUNDED)

DEFAULT_DECRYPT_TABLE = 1 << 9


# -- labels ------------------------------------------------------------------

def round_key(t: int, attempt: int = 0) -> str:
    """Identifier for round ``t``; later attempts after an exclusion get a fresh suffix."""
    return f"{t}" if attempt == 0 else f"{t}|a{attempt}"


def round_label(key: str) -> str:
    return f"round|{key}"


def enc_label(key: str, j: int) -> str:
    return f"enc|{key}|{j}"


def fn_label(key: str) -> str:
    return f"fn|{key}"


@lru_cache(maxsize=64)
def _u(key: str) -> tuple[G1Element, G1Element]:
    return hash_to_g1_pair(round_label(key).encode())


@lru_cache(maxsize=1 << 16)
def _w(key: str, j: int) -> G1Element:
    return hash_to_g1(enc_label(key, j).encode())


def _ws(key: str, m: int) -> tuple[G1Element, ...]:
    return tuple(_w(key, j) for j in range(1, m + 1))


def round_bases(key: str, m: int) -> tuple[tuple[G1Element, G1Element], tuple[G1Element, ...]]:
    """``u = H1(round label)`` and ``w_j = H1'(enc label j)`` (memoized per label)."""
    return _u(key), _ws(key, m)


@lru_cache(maxsize=64)
def _v_hat(key: str):
    lab = fn_label(key)
    return tuple(hash_to_g2_pair(f"{lab}|{b}".encode()) for b in (1, 2))


# -- parameters ----------------------------------------------------------------

@dataclass(frozen=True)
class PublicParams:
    group: PairingGroup
    cg: ClassGroupParams
    n: int
    m: int
    session: str
    msg_bits: int = 32
    bsgs_bound: int = 1 << 32

    @property
    def p(self) -> int:
        return self.group.p

    @property
    def init_label(self) -> str:
        return f"init|{self.session}"

    @cached_property
    def v(self) -> tuple[G1Element, G1Element]:
        return hash_to_g1_pair(self.init_label.encode())

    @property
    def norm_cap(self) -> int:
        """Public bound on ``<x, x>`` for ``|x_j| < 2**msg_bits``; caps the residual."""
        return self.m * (1 << self.msg_bits) ** 2

    def to_bytes(self) -> bytes:
        out = bytes([encoding.FORMAT_VERSION])
        out += encoding.put_str(self.group.name)
        out += encoding.put(self.cg.to_bytes())
        out += b"".join(encoding.put_int(v) for v in (self.n, self.m, self.msg_bits, self.bsgs_bound))
        return out + encoding.put_str(self.session)

    @classmethod
    def from_bytes(cls, data: bytes) -> "PublicParams":
        rd = encoding.Reader(data)
        rd.version()
        name = rd.str()
        if name != BLS12_381.name:
            raise PreconditionError(f"unsupported pairing group {name!r}")
        cg = ClassGroupParams.from_bytes(rd.take())
        n, m, bits, bound = (rd.int() for _ in range(4))
        session = rd.str()
        rd.done()
        return cls(BLS12_381, cg, n, m, session, bits, bound)


def setup(
    n: int,
    m: int,
    *,
    lam: int | None = None,
    profile: str = "test",
    seed: int | None = None,
    session: str | None = None,
    msg_bits: int = 32,
    bsgs_bound: int = 1 << 32,
    cg: ClassGroupParams | None = None,
) -> PublicParams:
    """Generate public parameters for ``n`` clients and ``m``-dimensional vectors.

    ``cg`` lets callers reuse an existing class group (class-group generation
    dominates setup time).
    """
    if n < 2:
        raise PreconditionError("the scheme needs at least two clients")
    if n == 2:
        warnings.warn("with n=2 a single corrupted client learns the other's vector", stacklevel=2)
    if m < 1:
        raise PreconditionError("dimension must be positive")
    rng = random.Random(seed) if seed is not None else secrets.SystemRandom()
    if cg is None:
        cg = cl_gen(P, lam, profile=profile, rng=rng)
    if session is None:
        session = f"{rng.getrandbits(64):016x}"
    return PublicParams(BLS12_381, cg, n, m, session, msg_bits, bsgs_bound)


# -- key generation ------------------------------------------------------------

@dataclass(frozen=True)
class KeyDraft:
    index: int
    s: tuple[int, int]
    k_hat: tuple[int, int]
    t: tuple[int, int]
    T: tuple[QuadForm, QuadForm]


@dataclass(frozen=True)
class ClientKeyMaterial:
    index: int
    s: tuple[int, int]
    k_hat: tuple[int, int]
    t: tuple[int, int]
    T: tuple[QuadForm, QuadForm]
    d: tuple[QuadForm, QuadForm]
    com: G1Element

    @property
    def ek(self) -> tuple[int, int]:
        return self.s


@dataclass(frozen=True)
class VerificationKeys:
    """``pk = (T, d)``, ``vk_CT = com`` and ``vk_DK = (T, d, com)`` for all clients."""

    T: tuple[tuple[QuadForm, QuadForm], ...]
    d: tuple[tuple[QuadForm, QuadForm], ...]
    com: tuple[G1Element, ...]

    @property
    def n(self) -> int:
        return len(self.T)

    @property
    def vk_ct(self) -> tuple[G1Element, ...]:
        return self.com

    def to_bytes(self) -> bytes:
        out = bytes([encoding.FORMAT_VERSION]) + encoding.put_int(self.n)
        for T, d, c in zip(self.T, self.d, self.com):
            out += b"".join(f.to_bytes() for f in T + d) + put_g1(c)
        return out

    @classmethod
    def from_bytes(cls, data: bytes) -> "VerificationKeys":
        rd = encoding.Reader(data)
        rd.version()
        n = rd.int()
        Ts, ds, cs = [], [], []
        for _ in range(n):
            f = [QuadForm.read(rd) for _ in range(4)]
            Ts.append((f[0], f[1]))
            ds.append((f[2], f[3]))
            cs.append(g1_from_bytes(rd.take()))
        rd.done()
        return cls(tuple(Ts), tuple(ds), tuple(cs))


def keygen_local(pp: PublicParams, index: int, rng=None) -> KeyDraft:
    rng = rng or secrets.SystemRandom()
    if not 1 <= index <= pp.n:
        raise PreconditionError(f"client index {index} outside 1..{pp.n}")
    s = (rng.randrange(P), rng.randrange(P))
    k_hat = (rng.randrange(P), rng.randrange(P))
    t = (sample_dp(pp.cg, rng), sample_dp(pp.cg, rng))
    T = (pp.cg.pow_h_p(t[0]), pp.cg.pow_h_p(t[1]))
    return KeyDraft(index, s, k_hat, t, T)


def keygen_finalize(draft: KeyDraft, all_T: Sequence[tuple[QuadForm, QuadForm]], pp: PublicParams) -> ClientKeyMaterial:
    if len(all_T) != pp.n:
        raise DimensionError(f"expected {pp.n} broadcast shares, got {len(all_T)}")
    for T in all_T:
        if len(T) != 2:
            raise DimensionError("broadcast share must have two components")
        for x in T:
            pp.cg.check(x)
    if tuple(all_T[draft.index - 1]) != draft.T:
        raise PreconditionError("own broadcast share does not match the draft")
    K = zkp.k_sigma(pp.cg, all_T, draft.index - 1)
    d = tuple(compose(pow_f(pp.cg, draft.k_hat[b]), form_exp(K[b], draft.t[b])) for b in range(2))
    com = multi_exp(pp.v, draft.s)
    return ClientKeyMaterial(draft.index, draft.s, draft.k_hat, draft.t, draft.T, d, com)


def assemble_keys(keys: Sequence[ClientKeyMaterial]) -> VerificationKeys:
    keys = sorted(keys, key=lambda k: k.index)
    return VerificationKeys(tuple(k.T for k in keys), tuple(k.d for k in keys), tuple(k.com for k in keys))


def keygen(pp: PublicParams, rng=None) -> tuple[list[ClientKeyMaterial], VerificationKeys]:
    """Run the broadcast round and local finalization for all clients in-process."""
    drafts = [keygen_local(pp, i, rng) for i in range(1, pp.n + 1)]
    all_T = [dr.T for dr in drafts]
    keys = [keygen_finalize(dr, all_T, pp) for dr in drafts]
    return keys, assemble_keys(keys)


# -- encryption ----------------------------------------------------------------

@dataclass(frozen=True)
class Weight:
    """Public aggregation weight of one client.

    Exact mode: ``value`` is the field element ``y`` with ``<x, x0> = y <x, x>``.
    Rounded mode: ``value`` is the quantized ``y_hat`` and ``scale * <x, x0> =
    y_hat <x, x> + residual``.
    """

    value: int
    scale: int = 1
    residual: int = 0

    @property
    def mode(self) -> str:
        return EXACT if self.scale == 1 and self.residual == 0 else ROUNDED

    def to_bytes(self) -> bytes:
        return b"".join(encoding.put_int(v) for v in (self.value, self.scale, self.residual))

    @classmethod
    def read(cls, rd: encoding.Reader) -> "Weight":
        return cls(rd.int(), rd.int(), rd.int())


def compute_weight(x: Sequence[int], x0: Sequence[int], mode: str, scale: int = 100) -> Weight:
    num, den = inner(x, x0), inner(x, x)
    if den == 0:
        raise DegenerateModel("zero vector has no weight")
    if mode == EXACT:
        return Weight(num * pow(den, -1, P) % P)
    if mode == ROUNDED:
        y_hat, rho = quantize(num, den, scale)
        return Weight(y_hat, scale, rho)
    raise ValueError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class LabeledCiphertext:
    index: int
    key: str
    entries: tuple[G1Element, ...]
    x0: tuple[int, ...]
    weight: Weight
    rounded: bool
    proof: zkp.EncProof

    @property
    def m(self) -> int:
        return len(self.entries)

    @property
    def label(self) -> str:
        return round_label(self.key)

    @property
    def enc_labels(self) -> tuple[str, ...]:
        return tuple(enc_label(self.key, j) for j in range(1, self.m + 1))

    def aggregated(self) -> G1Element:
        acc = self.entries[0]
        for c in self.entries[1:]:
            acc = acc * c
        return acc

    def to_bytes(self) -> bytes:
        out = bytes([encoding.FORMAT_VERSION])
        out += encoding.put_int(self.index) + encoding.put_str(self.key)
        out += encoding.put_int(self.m) + b"".join(put_g1(c) for c in self.entries)
        out += b"".join(encoding.put_int(v) for v in self.x0)
        out += self.weight.to_bytes() + encoding.put_int(int(self.rounded))
        return out + encoding.put(self.proof.to_bytes())

    @classmethod
    def from_bytes(cls, data: bytes) -> "LabeledCiphertext":
        rd = encoding.Reader(data)
        rd.version()
        index, key = rd.int(), rd.str()
        m = rd.int()
        entries = tuple(g1_from_bytes(rd.take()) for _ in range(m))
        x0 = tuple(rd.int() for _ in range(m))
        weight = Weight.read(rd)
        rounded = bool(rd.int())
        proof = zkp.EncProof.from_bytes(rd.take())
        rd.done()
        return cls(index, key, entries, x0, weight, rounded, proof)


def ct_statement(pp, index, key, entries_agg, com, x0, weight: Weight, rounded: bool) -> zkp.EncStatement:
    m = len(x0)
    return zkp.EncStatement(
        V=entries_agg,
        com=com,
        u=_u(key),
        w=_ws(key, m),
        v=pp.v,
        x0=tuple(int(v) for v in x0),
        weight=weight.value,
        round_label=round_label(key),
        enc_labels=tuple(enc_label(key, j) for j in range(1, m + 1)),
        scale=weight.scale,
        residual=weight.residual,
        norm_cap=pp.norm_cap if rounded else None,
    )


def encrypt_entries(s: Sequence[int], x: Sequence[int], key: str) -> tuple[G1Element, ...]:
    """The bare ciphertext ``(u^s * w_j^{x_j})_j`` without a proof."""
    us = multi_exp(_u(key), s)
    return tuple(us * wj ** (xj % P) if xj else us for wj, xj in zip(_ws(key, len(x)), x))


def encrypt(
    key_material: ClientKeyMaterial,
    x: Sequence[int],
    x0: Sequence[int],
    key: str,
    pp: PublicParams,
    *,
    mode: str = ROUNDED,
    weight: Weight | int | None = None,
    rng=None,
) -> LabeledCiphertext:
    """Encrypt ``x`` for round ``key`` and attach the well-formedness proof.

    In exact mode an explicit integer ``weight`` may be supplied; otherwise the
    weight is derived from ``x`` and ``x0``.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    x = [int(v) for v in x]
    x0 = [int(v) for v in x0]
    if len(x) != pp.m or len(x0) != pp.m:
        raise DimensionError(f"vectors must have length {pp.m}")
    limit = 1 << pp.msg_bits
    if any(abs(v) >= limit for v in x):
        raise MessageTooLarge(f"entry magnitude reaches 2**{pp.msg_bits}")
    if weight is None:
        weight = compute_weight(x, x0, mode)
    elif isinstance(weight, int):
        if mode != EXACT:
            raise PreconditionError("explicit integer weights are only meaningful in exact mode")
        weight = Weight(weight % P)
    s = key_material.s
    entries = encrypt_entries(s, x, key)
    agg = entries[0]
    for c in entries[1:]:
        agg = agg * c
    stmt = ct_statement(pp, key_material.index, key, agg, key_material.com, x0, weight, mode == ROUNDED)
    proof = zkp.prove_encrypt(stmt, s, x, rng)
    return LabeledCiphertext(key_material.index, key, entries, tuple(x0), weight, mode == ROUNDED, proof)


@dataclass(frozen=True)
class VerifyResult:
    """``ok`` is true iff ``flagged`` is empty; ``reasons`` maps client index to a tag."""

    flagged: frozenset[int] = frozenset()
    reasons: Mapping[int, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.flagged

    def __bool__(self):
        return self.ok


def _flag(reasons: dict, index: int, why: str):
    reasons.setdefault(index, why)


def verify_ct(
    cts: Sequence[LabeledCiphertext],
    vk_ct: Sequence[G1Element],
    pp: PublicParams,
    *,
    x0: Sequence[int] | None = None,
    key: str | None = None,
    rounded: bool | None = None,
) -> VerifyResult:
    """Verify every client's proof against its recomputed statement.

    ``x0``, ``key`` and ``rounded`` pin what the server expects; when omitted
    the values carried by each ciphertext are used.
    """
    reasons: dict[int, str] = {}
    if len(cts) != pp.n:
        raise DimensionError(f"expected {pp.n} ciphertexts, got {len(cts)}")
    for pos, ct in enumerate(cts, start=1):
        if ct.index != pos:
            _flag(reasons, pos, "index")
            continue
        if ct.m != pp.m or len(ct.x0) != pp.m:
            _flag(reasons, pos, "dimension")
            continue
        if key is not None and ct.key != key:
            _flag(reasons, pos, "label")
            continue
        want_rounded = ct.rounded if rounded is None else rounded
        ref = tuple(int(v) for v in x0) if x0 is not None else ct.x0
        if ct.x0 != ref:
            _flag(reasons, pos, "baseline")
            continue
        stmt = ct_statement(pp, pos, ct.key, ct.aggregated(), vk_ct[pos - 1], ref, ct.weight, want_rounded)
        verdict = zkp.verify_encrypt(stmt, ct.proof)
        if not verdict:
            _flag(reasons, pos, verdict.reason)
    return VerifyResult(frozenset(reasons), reasons)


# -- functional keys -----------------------------------------------------------

@dataclass(frozen=True)
class KeyShare:
    index: int
    key: str
    dk: tuple[G2Element, G2Element]
    weight: Weight
    proof: zkp.DkProof

    @property
    def fn_label(self) -> str:
        return fn_label(self.key)

    def to_bytes(self) -> bytes:
        out = bytes([encoding.FORMAT_VERSION])
        out += encoding.put_int(self.index) + encoding.put_str(self.key)
        out += put_g2(self.dk[0]) + put_g2(self.dk[1]) + self.weight.to_bytes()
        return out + encoding.put(self.proof.to_bytes())

    @classmethod
    def from_bytes(cls, data: bytes) -> "KeyShare":
        rd = encoding.Reader(data)
        rd.version()
        index, key = rd.int(), rd.str()
        dk = (g2_from_bytes(rd.take()), g2_from_bytes(rd.take()))
        weight = Weight.read(rd)
        proof = zkp.DkProof.from_bytes(rd.take())
        rd.done()
        return cls(index, key, dk, weight, proof)


def dk_statement(pp, vk: VerificationKeys, index, key, dk, weight: Weight) -> zkp.DkStatement:
    return zkp.DkStatement(
        cg=pp.cg,
        index=index - 1,
        T_all=vk.T,
        d=vk.d[index - 1],
        dk=dk,
        com=vk.com[index - 1],
        weight=weight.value,
        fn_label=fn_label(key),
        v_hat=_v_hat(key),
        v=pp.v,
    )


def _as_weight(weight) -> Weight:
    return weight if isinstance(weight, Weight) else Weight(int(weight) % P)


def share_key(key_material: ClientKeyMaterial, weight: Weight | int, key: str) -> tuple[G2Element, G2Element]:
    """``dk_b = v_hat_b^{k_hat} * h^{s_b * y}`` without a proof."""
    y = _as_weight(weight).value % P
    v_hat = _v_hat(key)
    s, k_hat = key_material.s, key_material.k_hat
    return tuple(multi_exp(v_hat[b], k_hat) * H ** (s[b] * y % P) for b in range(2))


def dkeygen_share(
    key_material: ClientKeyMaterial,
    vk: VerificationKeys,
    weight: Weight | int,
    key: str,
    pp: PublicParams,
    rng=None,
) -> KeyShare:
    weight = _as_weight(weight)
    dk = share_key(key_material, weight, key)
    s, k_hat = key_material.s, key_material.k_hat
    stmt = dk_statement(pp, vk, key_material.index, key, dk, weight)
    proof = zkp.prove_dkeyshare(stmt, s, key_material.t, k_hat, rng)
    return KeyShare(key_material.index, key, dk, weight, proof)


def verify_dk(
    shares: Sequence[KeyShare],
    vk: VerificationKeys,
    pp: PublicParams,
    *,
    key: str | None = None,
    expected_weights: Sequence[Weight | int] | None = None,
) -> VerifyResult:
    """Verify every key-share proof; a class-group membership failure flags the client."""
    if len(shares) != pp.n:
        raise DimensionError(f"expected {pp.n} shares, got {len(shares)}")
    reasons: dict[int, str] = {}
    for pos, sh in enumerate(shares, start=1):
        if sh.index != pos:
            _flag(reasons, pos, "index")
            continue
        if key is not None and sh.key != key:
            _flag(reasons, pos, "label")
            continue
        if expected_weights is not None and _as_weight(expected_weights[pos - 1]) != sh.weight:
            _flag(reasons, pos, "weight-mismatch")
            continue
        stmt = dk_statement(pp, vk, pos, sh.key, sh.dk, sh.weight)
        try:
            verdict = zkp.verify_dkeyshare(stmt, sh.proof)
        except NotInGroup:
            _flag(reasons, pos, "not-in-group")
            continue
        if not verdict:
            _flag(reasons, pos, verdict.reason)
    return VerifyResult(frozenset(reasons), reasons)


@dataclass(frozen=True)
class FunctionalKey:
    key: str
    fk: tuple[G2Element, G2Element]
    d: tuple[int, int]


def dkey_comb(shares: Sequence[KeyShare], vk: VerificationKeys, pp: PublicParams, key: str | None = None) -> FunctionalKey:
    if len(shares) != pp.n:
        raise DimensionError(f"all {pp.n} shares are required, got {len(shares)}")
    key = key if key is not None else shares[0].key
    if any(sh.key != key for sh in shares):
        raise PreconditionError("shares belong to different function labels")
    d = []
    for b in range(2):
        acc = pp.cg.identity
        for di in vk.d:
            acc = compose(acc, di[b])
        d.append(cl_solve(pp.cg, acc))
    v_hat = _v_hat(key)
    fk = []
    for b in range(2):
        prod = shares[0].dk[b]
        for sh in shares[1:]:
            prod = prod * sh.dk[b]
        fk.append(prod * multi_exp(v_hat[b], d).inverse())
    return FunctionalKey(key, tuple(fk), tuple(d))


def decrypt(
    cts: Sequence[LabeledCiphertext],
    fk: FunctionalKey,
    y: Sequence[Weight | int],
    pp: PublicParams,
    *,
    bound: int | None = None,
    table_size: int = DEFAULT_DECRYPT_TABLE,
) -> list[int]:
    """Recover ``sum_i y_i * x_ij`` for every coordinate ``j`` (signed).

    ``prod_i e(C_ij, h^{y_i})`` is evaluated as ``e(prod_i C_ij^{y_i}, h)``,
    which is the same element at one pairing per coordinate.
    """
    if len(cts) != pp.n or len(y) != pp.n:
        raise DimensionError("need one ciphertext and one weight per client")
    ys = [_as_weight(v).value % P for v in y]
    key = cts[0].key
    if any(ct.key != key for ct in cts) or fk.key != key:
        raise PreconditionError("ciphertexts and functional key belong to different rounds")
    bound = bound or pp.bsgs_bound
    u = _u(key)
    mask = pairing(u[0], fk.fk[0]) * pairing(u[1], fk.fk[1])
    mask_inv = mask.inverse()
    out = []
    for j in range(pp.m):
        agg = None
        for ct, yi in zip(cts, ys):
            if yi == 0:
                continue
            term = ct.entries[j] ** yi
            agg = term if agg is None else agg * term
        if agg is None:
            agg = BLS12_381.g1_identity()
        ratio = pairing(agg, H) * mask_inv
        base = pairing(_w(key, j + 1), H)
        try:
            out.append(bsgs_dlog(base, ratio, bound, signed=True, table_size=table_size, cache=False))
        except OutOfRange as exc:
            raise OutOfRange(f"coordinate {j} outside the decryption window", dimension=j) from exc
    return out


__all__ = [
    "EXACT",
    "ROUNDED",
    "ClientKeyMaterial",
    "FunctionalKey",
    "KeyDraft",
    "KeyShare",
    "LabeledCiphertext",
    "PublicParams",
    "VerificationKeys",
    "VerifyResult",
    "Weight",
    "assemble_keys",
    "compute_weight",
    "decode_signed",
    "decrypt",
    "dkey_comb",
    "dkeygen_share",
    "ct_statement",
    "dk_statement",
    "encrypt",
    "encrypt_entries",
    "share_key",
    "keygen",
    "keygen_finalize",
    "keygen_local",
    "round_bases",
    "round_key",
    "setup",
    "verify_ct",
    "verify_dk",
]
