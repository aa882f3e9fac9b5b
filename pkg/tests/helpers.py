"""Instance builders, mutation helpers and the rewinding extractor used by the tests."""

from __future__ import annotations

import dataclasses
import random

from vfefl import zkp
from vfefl.algebra import BLS12_381, P, hash_to_g1, hash_to_g1_pair, hash_to_g2_pair, inner, multi_exp
from vfefl.classgroup import compose, form_exp, pow_f, sample_dp

G, H = BLS12_381.g, BLS12_381.h


def enc_instance(rng: random.Random, m: int, *, rounded: bool = False, tag: str = "t"):
    """Random honest ``(statement, s, x)`` for the ciphertext proof."""
    key = f"{tag}|{rng.getrandbits(48)}"
    u = hash_to_g1_pair(f"round|{key}".encode())
    w = tuple(hash_to_g1(f"enc|{key}|{j}".encode()) for j in range(1, m + 1))
    v = hash_to_g1_pair(b"init|tests")
    x = [rng.randint(-100, 100) for _ in range(m)]
    if not any(x):
        x[0] = 1
    s = [rng.randrange(P), rng.randrange(P)]
    um = (u[0] ** m, u[1] ** m)
    V = multi_exp(um, s) * multi_exp(w, x)
    com = multi_exp(v, s)
    if rounded:
        x0 = [rng.randint(-100, 100) for _ in range(m)]
        num, den = inner(x, x0), inner(x, x)
        y = (100 * num) // den if num > 0 else 0
        extra = dict(scale=100, residual=100 * num - y * den, norm_cap=m * (1 << 64))
    else:
        y = rng.randint(0, 100)
        x0 = [y * a for a in x]
        extra = {}
    stmt = zkp.EncStatement(V, com, u, w, v, tuple(x0), y, f"round|{key}",
                            tuple(f"enc|{key}|{j}" for j in range(1, m + 1)), **extra)
    return stmt, s, x


def dk_instance(cg, rng: random.Random, n: int, i: int | None = None, y: int | None = None):
    """Random honest ``(statement, s, t, k_hat)`` for the key-share proof (0-based ``i``)."""
    i = rng.randrange(n) if i is None else i
    ts = [[sample_dp(cg, rng) for _ in range(2)] for _ in range(n)]
    T = tuple(tuple(cg.pow_h_p(t) for t in tt) for tt in ts)
    s = [rng.randrange(P) for _ in range(2)]
    k_hat = [rng.randrange(P) for _ in range(2)]
    y = rng.randint(0, 100) if y is None else y
    K = zkp.k_sigma(cg, T, i)
    d = tuple(compose(pow_f(cg, k_hat[b]), form_exp(K[b], ts[i][b])) for b in range(2))
    label = f"fn|{rng.getrandbits(32)}"
    v_hat = tuple(hash_to_g2_pair(f"{label}|{b}".encode()) for b in (1, 2))
    v = hash_to_g1_pair(b"init|tests")
    dk = tuple(multi_exp(v_hat[b], k_hat) * H ** (s[b] * y % P) for b in range(2))
    stmt = zkp.DkStatement(cg, i, T, d, dk, multi_exp(v, s), y, label, v_hat, v)
    return stmt, s, ts[i], k_hat


def mutate_enc_proof(proof: zkp.EncProof, rng: random.Random) -> zkp.EncProof:
    """Replace one randomly chosen field with a random value of the same type."""
    c, r = proof.commitment, proof.response
    pick = rng.randrange(12)
    rand_g1 = G ** rng.randrange(1, P)
    if pick < 6:
        name = ("K", "T0", "T1", "T2", "T1p", "com_star")[pick]
        return dataclasses.replace(proof, commitment=dataclasses.replace(c, **{name: rand_g1}))
    if pick == 6:
        return dataclasses.replace(proof, alpha=(proof.alpha + rng.randrange(1, P)) % P or 1)
    if pick == 7:
        return dataclasses.replace(proof, response=dataclasses.replace(r, t=(r.t + rng.randrange(1, P)) % P))
    if pick == 8:
        j = rng.randrange(len(r.L))
        L = list(r.L)
        L[j] = (L[j] + rng.randrange(1, P)) % P
        return dataclasses.replace(proof, response=dataclasses.replace(r, L=tuple(L)))
    name = ("tau", "tau_p", "omega")[pick - 9]
    vec = list(getattr(r, name))
    vec[rng.randrange(2)] = (vec[0] + rng.randrange(1, P)) % P
    return dataclasses.replace(proof, response=dataclasses.replace(r, **{name: tuple(vec)}))


def mutate_dk_proof(proof: zkp.DkProof, cg, rng: random.Random) -> zkp.DkProof:
    c = proof.commitment
    pick = rng.randrange(9)
    b = rng.randrange(2)

    def swap(pair, val):
        out = list(pair)
        out[b] = val
        return tuple(out)

    if pick == 0:
        return dataclasses.replace(proof, commitment=dataclasses.replace(c, R_T=swap(c.R_T, cg.pow_h_p(rng.randrange(1, 1 << 64)))))
    if pick == 1:
        return dataclasses.replace(proof, commitment=dataclasses.replace(c, R_d=swap(c.R_d, compose(c.R_d[b], cg.f))))
    if pick == 2:
        return dataclasses.replace(proof, commitment=dataclasses.replace(c, R_dk=swap(c.R_dk, H ** rng.randrange(1, P))))
    if pick == 3:
        return dataclasses.replace(proof, commitment=dataclasses.replace(c, R_com=G ** rng.randrange(1, P)))
    if pick == 4:
        return dataclasses.replace(proof, beta=(proof.beta + rng.randrange(1, P)) % P)
    if pick == 5:
        return dataclasses.replace(proof, z_k=swap(proof.z_k, (proof.z_k[b] + rng.randrange(1, P)) % P))
    if pick == 6:
        return dataclasses.replace(proof, z_s=swap(proof.z_s, (proof.z_s[b] + rng.randrange(1, P)) % P))
    if pick == 7:
        return dataclasses.replace(proof, z_t=swap(proof.z_t, proof.z_t[b] + rng.randrange(1, 1 << 64)))
    return dataclasses.replace(proof, z_t=swap(proof.z_t, proof.z_t[b] - rng.randrange(1, 1 << 64)))


def extract_encrypt(stmt: zkp.EncStatement, first: zkp.EncProof, second: zkp.EncProof):
    """Special-soundness extractor: two accepting transcripts, same commitment, distinct challenges."""
    assert first.commitment == second.commitment and first.alpha != second.alpha
    a1, a2 = first.alpha, second.alpha
    inv = pow((a1 - a2) % P, -1, P)
    r1, r2 = first.response, second.response
    k = [(l1 - l2) * inv % P for l1, l2 in zip(r1.L, r2.L)]
    x = [(l1 - a1 * kj) % P for l1, kj in zip(r1.L, k)]
    blind = [(o1 - o2) * inv % P for o1, o2 in zip(r1.omega, r2.omega)]
    s = [(o1 - a1 * bj) % P for o1, bj in zip(r1.omega, blind)]
    return s, x


def exact_round(pp, keys, vk, xs, ys, key, rng):
    """Honest ciphertexts and key shares in exact mode with explicit weights (``x0_i = y_i * x_i``)."""
    from vfefl import dvfe

    cts = [
        dvfe.encrypt(k, x, [y * v for v in x], key, pp, mode=dvfe.EXACT, weight=y, rng=rng)
        for k, x, y in zip(keys, xs, ys)
    ]
    shares = [dvfe.dkeygen_share(k, vk, y, key, pp, rng) for k, y in zip(keys, ys)]
    return cts, shares


def plaintext_oracle(xs, ys):
    return [sum(y * x[j] for x, y in zip(xs, ys)) for j in range(len(xs[0]))]
