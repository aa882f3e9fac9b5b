"""Readable transcript of one honest DVFE round, optionally with a cheating client."""

from __future__ import annotations

import dataclasses
import random

import yaml

from . import dvfe
from .algebra import BLS12_381, g1_bytes, g2_bytes


def _hex(b: bytes, keep: int = 24) -> str:
    h = b.hex()
    return h if len(h) <= 2 * keep else f"{h[:keep]}...{h[-keep:]} ({len(b)} bytes)"


def _num(v) -> str:
    d = str(int(v))
    return d if len(d) <= 40 else f"{d[:18]}...{d[-18:]} ({len(d)} digits)"


def _form(f) -> dict:
    return {"a": _num(f.a), "b": _num(f.b)}


def transcript(seed: int = 0, n: int = 3, m: int = 4, corrupt_client: int | None = None) -> dict:
    rng = random.Random(f"demo/{seed}")
    pp = dvfe.setup(n, m, seed=seed)
    keys, vk = dvfe.keygen(pp, rng)
    key = dvfe.round_key(1)
    xs = [[rng.randint(-100, 100) for _ in range(m)] for _ in range(n)]
    x0 = [rng.randint(-100, 100) for _ in range(m)]
    for x in xs:
        if sum(a * b for a, b in zip(x, x0)) <= 0:
            x[:] = [-a for a in x]
    cts = [dvfe.encrypt(k, x, x0, key, pp, rng=rng) for k, x in zip(keys, xs)]
    sent = list(cts)
    if corrupt_client is not None:
        bad = sent[corrupt_client - 1]
        sent[corrupt_client - 1] = dataclasses.replace(bad, entries=(bad.entries[0] * BLS12_381.g,) + bad.entries[1:])
    first = dvfe.verify_ct(sent, vk.vk_ct, pp, x0=x0, key=key, rounded=True)
    retry = None
    if first.flagged:
        retry = dvfe.verify_ct(cts, vk.vk_ct, pp, x0=x0, key=key, rounded=True)
    weights = [ct.weight for ct in cts]
    shares = [dvfe.dkeygen_share(k, vk, w, key, pp, rng) for k, w in zip(keys, weights)]
    dk_res = dvfe.verify_dk(shares, vk, pp, key=key, expected_weights=weights)
    fk = dvfe.dkey_comb(shares, vk, pp, key)
    got = dvfe.decrypt(cts, fk, weights, pp)
    want = [sum(w.value * x[j] for w, x in zip(weights, xs)) for j in range(m)]

    doc = {
        "params": {
            "n": n,
            "m": m,
            "session": pp.session,
            "p_bits": pp.p.bit_length(),
            "class_group_discriminant_bits": int(pp.cg.disc).bit_length(),
            "lambda": pp.cg.lam,
        },
        "baseline_x0": x0,
        "clients": [],
        "verify_ct": {"flagged": sorted(first.flagged), "reasons": {int(k): v for k, v in first.reasons.items()}},
        "verify_ct_after_retransmission": None if retry is None else {"flagged": sorted(retry.flagged)},
        "verify_dk": {"flagged": sorted(dk_res.flagged)},
        "functional_key": {"fk": [_hex(g2_bytes(e)) for e in fk.fk], "d": [str(v) for v in fk.d]},
        "decrypted": got,
        "plaintext_oracle": want,
        "match": got == want,
    }
    for k, x, ct, sh in zip(keys, xs, cts, shares):
        doc["clients"].append({
            "id": k.index,
            "secret_s": [str(v) for v in k.s],
            "secret_k_hat": [str(v) for v in k.k_hat],
            "x": x,
            "weight": {"y_hat": ct.weight.value, "residual": ct.weight.residual},
            "broadcast_T": [_form(f) for f in k.T],
            "commitment": _hex(g1_bytes(k.com)),
            "ciphertext": [_hex(g1_bytes(c)) for c in ct.entries],
            "ciphertext_proof": _hex(ct.proof.to_bytes()),
            "key_share": [_hex(g2_bytes(e)) for e in sh.dk],
            "key_share_proof": _hex(sh.proof.to_bytes()),
        })
    return doc


def render(doc: dict) -> str:
    return yaml.safe_dump(doc, sort_keys=False, width=120)
