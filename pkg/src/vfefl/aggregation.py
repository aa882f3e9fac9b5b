"""Fixed-point codec and the plaintext trust-score aggregation rule.

Every client model ``W_i`` is weighted by ``ReLU(<W_i, W_0> / <W_i, W_i>)``
against the server baseline ``W_0``; the weighted sum is rescaled to the norm
of ``W_0``. Scores are exact rationals, quantized to ``S_Y`` steps with an
integer residual so that the quantization can be proven in zero knowledge.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import DegenerateModel, DimensionError, Overflow

S_FP = 100
S_Y = 100
DEFAULT_BITS = 32


@dataclass(frozen=True)
class FixedPointCodec:
    scale: int = S_FP
    bits: int = DEFAULT_BITS

    @property
    def limit(self) -> int:
        return 1 << self.bits

    def encode(self, values, saturate: bool = False) -> np.ndarray:
        """Round half away from zero; ``saturate`` clips to the largest encodable value."""
        v = np.asarray(values, dtype=np.float64)
        if not np.all(np.isfinite(v)):
            if not saturate:
                raise Overflow("non-finite value cannot be encoded")
            v = np.nan_to_num(v, nan=0.0, posinf=self.limit, neginf=-self.limit)
        # np.round would round half to even
        q = np.sign(v) * np.floor(np.abs(v) * self.scale + 0.5)
        if q.size and np.max(np.abs(q)) >= self.limit:
            if not saturate:
                raise Overflow(f"encoded magnitude reaches 2**{self.bits}")
            q = np.clip(q, -(self.limit - 1), self.limit - 1)
        return q.astype(np.int64)

    def decode(self, mv) -> np.ndarray:
        return np.asarray([int(x) for x in np.ravel(mv)], dtype=np.float64) / self.scale


DEFAULT_CODEC = FixedPointCodec()


def fp_encode(values, codec: FixedPointCodec = DEFAULT_CODEC) -> np.ndarray:
    return codec.encode(values)


def fp_decode(mv, codec: FixedPointCodec = DEFAULT_CODEC) -> np.ndarray:
    return codec.decode(mv)


def int_dot(a, b) -> int:
    # exact over Python ints; int64 dot products overflow at realistic sizes
    if len(a) != len(b):
        raise DimensionError(f"length {len(a)} vs {len(b)}")
    return sum(int(x) * int(y) for x, y in zip(a, b))


def relu(x):
    return x if x > 0 else x * 0


@dataclass(frozen=True)
class TrustScore:
    """``num / den`` is the unclamped ratio; ``y_hat`` and ``residual`` satisfy
    ``scale * num == y_hat * den + residual``."""

    num: int
    den: int
    y_hat: int
    residual: int
    scale: int = S_Y

    @property
    def ratio(self) -> Fraction:
        return relu(Fraction(self.num, self.den))

    @property
    def value(self) -> float:
        return float(self.ratio)


def quantize(num: int, den: int, scale: int = S_Y) -> tuple[int, int]:
    if den <= 0:
        raise DegenerateModel("squared norm must be positive")
    y_hat = (scale * num) // den if num > 0 else 0
    return y_hat, scale * num - y_hat * den


def trust_score(W_i, W_0, scale: int = S_Y) -> TrustScore:
    den = int_dot(W_i, W_i)
    if den == 0:
        raise DegenerateModel("zero model vector has no trust score")
    num = int_dot(W_i, W_0)
    y_hat, residual = quantize(num, den, scale)
    return TrustScore(num, den, y_hat, residual, scale)


def aggregate_plain(models: Sequence, scores: Sequence) -> list[int]:
    """``W*_j = sum_i y_hat_i * W_i,j`` in exact integers.

    ``scores`` may be ``TrustScore`` objects or plain integer weights.
    """
    if len(models) != len(scores):
        raise DimensionError(f"{len(models)} models but {len(scores)} scores")
    if not models:
        raise DimensionError("no models to aggregate")
    m = len(models[0])
    out = [0] * m
    for W, sc in zip(models, scores):
        if len(W) != m:
            raise DimensionError("models differ in length")
        y = sc.y_hat if isinstance(sc, TrustScore) else int(sc)
        if y:
            for j, x in enumerate(W):
                out[j] += y * int(x)
    return out


def normalize_float(W_star, W_0, codec: FixedPointCodec = DEFAULT_CODEC) -> tuple[np.ndarray, bool]:
    """Rescale ``W_star`` to the Euclidean norm of ``W_0`` (float view).

    The scale of ``W_star`` itself cancels, so the aggregation weights' extra
    factor ``S_Y`` does not need to be divided out.
    """
    w0 = codec.decode(W_0)
    ws = np.asarray([float(int(x)) for x in W_star], dtype=np.float64)
    norm_s = float(np.linalg.norm(ws))
    if norm_s == 0.0:
        return w0, True
    return ws * (float(np.linalg.norm(w0)) / norm_s), False


def normalize(W_star, W_0, codec: FixedPointCodec = DEFAULT_CODEC) -> tuple[np.ndarray, bool]:
    """Return the re-encoded normalized model and a degenerate-round flag."""
    if len(W_star) != len(W_0):
        raise DimensionError("aggregate and baseline differ in length")
    w, degenerate = normalize_float(W_star, W_0, codec)
    if degenerate:
        return np.asarray(W_0, dtype=np.int64).copy(), True
    return codec.encode(w), False
