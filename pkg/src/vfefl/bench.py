"""Per-operation DVFE timings over a grid of dimensions."""

from __future__ import annotations

import random
import statistics
import time
from dataclasses import dataclass

from . import dvfe, zkp

OPERATIONS = (
    "Setup",
    "KeyGen",
    "HashToPoint",
    "Encryption",
    "CiphertextProof",
    "VerifyCiphertext",
    "KeyGenShare",
    "KeyProof",
    "VerifyFunctionalKey",
    "KeyCombination",
    "Decryption",
)
BENCH_COLUMNS = ("operation", "m", "mean_s", "median_s")
DEFAULT_DIMS = (10, 50, 100, 500, 1000)


@dataclass(frozen=True)
class BenchSpec:
    dims: tuple[int, ...] = DEFAULT_DIMS
    clients: int = 3
    reps: int = 3
    profile: str = "test"
    seed: int = 0

    def __post_init__(self):
        if not self.dims or any(m < 1 for m in self.dims):
            raise ValueError("dimensions must be positive")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.clients < 2:
            raise ValueError("at least two clients are required")


def _clock():
    return time.perf_counter()


def _one_rep(m: int, spec: BenchSpec, rep: int) -> dict[str, float]:
    n = spec.clients
    rng = random.Random(f"bench/{spec.seed}/{m}/{rep}")
    out = {}

    t0 = _clock()
    pp = dvfe.setup(n, m, profile=spec.profile, seed=rng.getrandbits(32))
    out["Setup"] = _clock() - t0

    t0 = _clock()
    keys, vk = dvfe.keygen(pp, rng)
    out["KeyGen"] = (_clock() - t0) / n

    key = f"bench|{spec.seed}|{m}|{rep}"
    t0 = _clock()
    dvfe.round_bases(key, m)
    out["HashToPoint"] = _clock() - t0

    xs = [[rng.randint(-100, 100) for _ in range(m)] for _ in range(n)]
    x0 = [rng.randint(-100, 100) for _ in range(m)]
    for x in xs:
        if not any(x):
            x[0] = 1
    weights = [dvfe.compute_weight(x, x0, dvfe.ROUNDED) for x in xs]

    enc = prove = verify = 0.0
    cts = []
    for k, x, w in zip(keys, xs, weights):
        t0 = _clock()
        entries = dvfe.encrypt_entries(k.s, x, key)
        enc += _clock() - t0
        agg = entries[0]
        for c in entries[1:]:
            agg = agg * c
        stmt = dvfe.ct_statement(pp, k.index, key, agg, k.com, x0, w, True)
        t0 = _clock()
        proof = zkp.prove_encrypt(stmt, k.s, x, rng, check=False)
        prove += _clock() - t0
        t0 = _clock()
        ok = zkp.verify_encrypt(stmt, proof)
        verify += _clock() - t0
        if not ok:
            raise RuntimeError("benchmark ciphertext failed to verify")
        cts.append(dvfe.LabeledCiphertext(k.index, key, entries, tuple(x0), w, True, proof))
    out["Encryption"], out["CiphertextProof"], out["VerifyCiphertext"] = enc / n, prove / n, verify / n

    share = kprove = kverify = 0.0
    shares = []
    for k, w in zip(keys, weights):
        t0 = _clock()
        dk = dvfe.share_key(k, w, key)
        share += _clock() - t0
        stmt = dvfe.dk_statement(pp, vk, k.index, key, dk, w)
        t0 = _clock()
        proof = zkp.prove_dkeyshare(stmt, k.s, k.t, k.k_hat, rng, check=False)
        kprove += _clock() - t0
        t0 = _clock()
        ok = zkp.verify_dkeyshare(stmt, proof)
        kverify += _clock() - t0
        if not ok:
            raise RuntimeError("benchmark key share failed to verify")
        shares.append(dvfe.KeyShare(k.index, key, dk, w, proof))
    out["KeyGenShare"], out["KeyProof"], out["VerifyFunctionalKey"] = share / n, kprove / n, kverify / n

    t0 = _clock()
    fk = dvfe.dkey_comb(shares, vk, pp, key)
    out["KeyCombination"] = _clock() - t0

    t0 = _clock()
    got = dvfe.decrypt(cts, fk, weights, pp)
    out["Decryption"] = _clock() - t0
    want = [sum(w.value * x[j] for w, x in zip(weights, xs)) for j in range(m)]
    if got != want:
        raise RuntimeError("benchmark decryption mismatch")
    return out


def run_bench(spec: BenchSpec, progress=None) -> list[dict]:
    """Rows ``{operation, m, mean_s, median_s}``, ordered by ``m`` then operation."""
    rows = []
    for m in spec.dims:
        samples = {op: [] for op in OPERATIONS}
        for rep in range(spec.reps):
            for op, v in _one_rep(m, spec, rep).items():
                samples[op].append(v)
            if progress:
                progress(m, rep)
        for op in OPERATIONS:
            vals = samples[op]
            rows.append({"operation": op, "m": m, "mean_s": statistics.fmean(vals), "median_s": statistics.median(vals)})
    return rows
