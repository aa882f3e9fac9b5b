"""Pairing-group arithmetic over BLS12-381, hash oracles and bounded discrete logs.

Groups are written multiplicatively. The scalar field order of the curve is the
protocol-wide prime ``p``; it is shared with the class-group subgroup ``F``.
"""

from __future__ import annotations

import hashlib
import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import Sequence

from petrelic.multiplicative.pairing import G1, G2, GT, G1Element, G2Element, GTElement

from . import encoding
from .errors import DimensionError, InvalidEncoding, NotInGroup, OutOfRange

P = int(G1.order())

TAG_H1 = b"H1|"
TAG_H2 = b"H2|"
TAG_H1P = b"H1p|"
TAG_HS = b"Hs|"


@dataclass(frozen=True)
class PairingGroup:
    """Descriptor of ``(G1, G2, GT, p, g, h, e)``."""

    name: str
    p: int
    g: G1Element
    h: G2Element

    @property
    def gt_generator(self) -> GTElement:
        return self.g.pair(self.h)

    def g1_identity(self) -> G1Element:
        return G1.neutral_element()

    def g2_identity(self) -> G2Element:
        return G2.neutral_element()

    def gt_identity(self) -> GTElement:
        return GT.neutral_element()

    def random_scalar(self, rng) -> int:
        return rng.randrange(self.p)


BLS12_381 = PairingGroup("BLS12-381", P, G1.generator(), G2.generator())


def hash_to_g1_pair(label: bytes) -> tuple[G1Element, G1Element]:
    """The two-component oracle ``H1: bytes -> G1^2``."""
    if not label:
        raise ValueError("label must be non-empty")
    return (
        G1.hash_to_point(TAG_H1 + label + b"|1"),
        G1.hash_to_point(TAG_H1 + label + b"|2"),
    )


def hash_to_g1(label: bytes) -> G1Element:
    if not label:
        raise ValueError("label must be non-empty")
    return G1.hash_to_point(TAG_H1P + label)


def hash_to_g2_pair(label: bytes) -> tuple[G2Element, G2Element]:
    if not label:
        raise ValueError("label must be non-empty")
    return (
        G2.hash_to_point(TAG_H2 + label + b"|1"),
        G2.hash_to_point(TAG_H2 + label + b"|2"),
    )


def hash_to_scalar(data: bytes) -> int:
    # 512-bit digest reduced mod p; bias is below 2**-256
    return int.from_bytes(hashlib.sha512(TAG_HS + data).digest(), "big") % P


def pairing(a: G1Element, b: G2Element) -> GTElement:
    return a.pair(b)


def multi_exp(bases: Sequence, exps: Sequence[int]):
    """``prod(bases[i] ** exps[i])``; exponents are reduced mod p."""
    if len(bases) != len(exps):
        raise DimensionError(f"{len(bases)} bases but {len(exps)} exponents")
    if not bases:
        raise DimensionError("multi_exp of an empty sequence")
    acc = None
    for base, e in zip(bases, exps):
        e %= P
        if e == 0:
            continue
        term = base ** e
        acc = term if acc is None else acc * term
    if acc is None:
        return bases[0].group.neutral_element()
    return acc


def inner(a: Sequence[int], b: Sequence[int]) -> int:
    if len(a) != len(b):
        raise DimensionError(f"length {len(a)} vs {len(b)}")
    return sum(int(x) * int(y) for x, y in zip(a, b))


# -- serialization -----------------------------------------------------------

def g1_bytes(x: G1Element) -> bytes:
    return x.to_binary()


def g2_bytes(x: G2Element) -> bytes:
    return x.to_binary()


def gt_bytes(x: GTElement) -> bytes:
    return x.to_binary()


def _checked(cls, name: str, raw: bytes):
    try:
        x = cls.from_binary(raw)
    except Exception as exc:  # RELIC raises assorted errors on junk input
        raise InvalidEncoding(f"cannot decode {name} element") from exc
    # RELIC accepts some malformed strings (e.g. decoding junk to the identity)
    if x.to_binary() != raw:
        raise InvalidEncoding(f"non-canonical {name} encoding")
    if not (x.is_neutral_element() or x.is_valid()):
        raise NotInGroup(f"{name} element fails subgroup check")
    return x


def g1_from_bytes(raw: bytes) -> G1Element:
    return _checked(G1Element, "G1", raw)


def g2_from_bytes(raw: bytes) -> G2Element:
    return _checked(G2Element, "G2", raw)


def gt_from_bytes(raw: bytes) -> GTElement:
    return _checked(GTElement, "GT", raw)


def put_g1(x: G1Element) -> bytes:
    return encoding.put(g1_bytes(x))


def put_g2(x: G2Element) -> bytes:
    return encoding.put(g2_bytes(x))


# -- bounded discrete log ----------------------------------------------------

def _gt_key(x: GTElement) -> bytes:
    # uncompressed Fp12 coordinates are canonical and ~10x cheaper to emit
    return x.to_binary(False)


class BabyStepTable:
    """``{base**k : k}`` for ``k`` in ``[0, size)``."""

    def __init__(self, base: GTElement, size: int):
        self.base = base
        self.size = size
        self.index: dict[bytes, int] = {}
        cur = GT.neutral_element()
        for k in range(size):
            self.index.setdefault(_gt_key(cur), k)
            cur = cur * base
        # cur == base ** size
        self.giant = cur

    def lookup(self, y: GTElement):
        return self.index.get(_gt_key(y))


_TABLE_CACHE: OrderedDict[tuple[bytes, int], BabyStepTable] = OrderedDict()
_TABLE_LOCK = threading.Lock()
_TABLE_CACHE_MAX = 16


def baby_table(base: GTElement, size: int, cache: bool = True) -> BabyStepTable:
    if not cache:
        return BabyStepTable(base, size)
    key = (_gt_key(base), size)
    with _TABLE_LOCK:
        table = _TABLE_CACHE.get(key)
        if table is not None:
            _TABLE_CACHE.move_to_end(key)
            return table
    table = BabyStepTable(base, size)
    with _TABLE_LOCK:
        _TABLE_CACHE[key] = table
        while len(_TABLE_CACHE) > _TABLE_CACHE_MAX:
            _TABLE_CACHE.popitem(last=False)
    return table


def _default_size(bound: int, signed: bool) -> int:
    span = 2 * bound if signed else bound
    size = 1
    while size * size < span:
        size <<= 1
    return min(size, 1 << 16)


def bsgs_dlog(
    base: GTElement,
    target: GTElement,
    bound: int,
    *,
    signed: bool = False,
    table_size: int | None = None,
    cache: bool = True,
) -> int:
    """Return ``x`` with ``base**x == target``.

    Unsigned searches ``[0, bound)``; signed searches ``[-bound, bound)``.
    Giant steps walk outwards from zero, so the cost scales with ``|x|`` rather
    than with the window when the table is smaller than ``sqrt(bound)``.
    """
    if bound < 1:
        raise ValueError("bound must be positive")
    size = table_size or _default_size(bound, signed)
    table = baby_table(base, size, cache=cache)
    giant = table.giant
    giant_inv = giant.inverse()
    down = target  # target * base**(-lo): candidates lo + k
    up = target  # target * base**(+lo): candidates -lo + k
    i = 0
    while True:
        lo = i * size
        pos_live = lo < bound
        neg_live = signed and i > 0 and lo - bound <= size - 1
        if not (pos_live or neg_live):
            break
        if pos_live:
            k = table.lookup(down)
            if k is not None and lo + k < bound:
                return lo + k
        if neg_live:
            k = table.lookup(up)
            if k is not None and k - lo >= -bound:
                return k - lo
        down = down * giant_inv
        up = up * giant
        i += 1
    window = "[-bound, bound)" if signed else "[0, bound)"
    raise OutOfRange(f"no discrete log in {window} for bound={bound}")


def encode_signed(v: int, p: int = P) -> int:
    """Represent a signed integer as an exponent in ``Z_p``."""
    return int(v) % p


def decode_signed(v: int, p: int = P) -> int:
    v %= p
    return v - p if v > p // 2 else v
