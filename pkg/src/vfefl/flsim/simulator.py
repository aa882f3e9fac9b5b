"""Round-based federated learning with the encrypted trust-score aggregation.

Each round the server trains a baseline ``W_0`` on its root set and broadcasts
it, clients train locally (or attack), and the server recovers
``sum_i y_hat_i * W_i`` either in the clear (``plaintext-oracle``) or through
the full encrypt / prove / verify / share / combine / decrypt pipeline
(``full-crypto``). Both modes share every other step, so their global models
must agree bit for bit.
"""

from __future__ import annotations

import dataclasses
import logging
import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from .. import aggregation as agg
from .. import dvfe
from ..algebra import BLS12_381
from ..classgroup import PROFILES
from ..errors import ConfigError, VfeflError
from . import attacks
from .data import Dataset, FederatedData, avg_pool, flip_labels, load_mnist, make_blobs, partition
from .models import MLP, LogisticRegression, Quadratic, evaluate, local_train

log = logging.getLogger(__name__)

PLAINTEXT = "plaintext-oracle"
FULL_CRYPTO = "full-crypto"
AGGREGATORS = ("vfefl", "fedavg", "fltrust")

CSV_COLUMNS = (
    "round",
    "accuracy",
    "asr",
    "flagged_ids",
    "retransmissions",
    "degenerate",
    "aborted",
    "time_baseline",
    "time_local",
    "time_encrypt",
    "time_verify_ct",
    "time_keyshare",
    "time_verify_dk",
    "time_combine",
    "time_decrypt",
    "time_aggregate",
    "message_bytes",
)
PHASES = tuple(c[len("time_"):] for c in CSV_COLUMNS if c.startswith("time_"))


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    n: int = 10
    malicious_fraction: float = 0.0
    attack: str = "none"
    sigma_scale: float = 1.0
    scale_factor: float | None = None
    adaptive_iters: int = 100
    crypto_attack: str = "none"
    crypto_clients: tuple[int, ...] = ()
    dataset: Mapping[str, Any] = field(default_factory=lambda: {"kind": "blobs"})
    model: str = "logreg"
    hidden: int = 32
    rounds: int = 10
    local_iters: int = 10
    lr: float = 0.1
    batch_size: int | None = 32
    aggregator: str = "vfefl"
    mode: str = PLAINTEXT
    profile: str = "test"
    bsgs_bound: int = 1 << 32
    bsgs_table: int = 1 << 9
    max_restarts: int = 1

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError("n must be at least 2")
        if not 0.0 <= self.malicious_fraction < 1.0:
            raise ConfigError("malicious_fraction must lie in [0, 1)")
        attacks.check_kind(self.attack)
        attacks.check_kind(self.crypto_attack, attacks.CRYPTO_ATTACKS)
        if self.mode not in (PLAINTEXT, FULL_CRYPTO):
            raise ConfigError(f"mode must be {PLAINTEXT!r} or {FULL_CRYPTO!r}")
        if self.aggregator not in AGGREGATORS:
            raise ConfigError(f"aggregator must be one of {', '.join(AGGREGATORS)}")
        if self.mode == FULL_CRYPTO and self.aggregator != "vfefl":
            raise ConfigError("full-crypto mode only supports the vfefl aggregator")
        if self.model not in ("logreg", "mlp", "quadratic"):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.profile not in PROFILES:
            raise ConfigError(f"unknown profile {self.profile!r}")
        if self.rounds < 0 or self.local_iters < 1:
            raise ConfigError("rounds must be >= 0 and local_iters >= 1")
        if any(not 1 <= c <= self.n for c in self.crypto_clients):
            raise ConfigError("crypto_clients must be ids in 1..n")

    @property
    def malicious_ids(self) -> tuple[int, ...]:
        k = int(round(self.n * self.malicious_fraction))
        return tuple(range(self.n - k + 1, self.n + 1))

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Any]) -> "ExperimentConfig":
        if not isinstance(raw, Mapping):
            raise ConfigError("config must be a mapping")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        kw = dict(raw)
        if "crypto_clients" in kw:
            kw["crypto_clients"] = tuple(int(c) for c in kw["crypto_clients"])
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_yaml(cls, path) -> "ExperimentConfig":
        try:
            raw = yaml.safe_load(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
        return cls.from_mapping(raw or {})

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)


@dataclass
class RoundRecord:
    round: int
    baseline: np.ndarray
    baseline_encoded: np.ndarray
    scores: list[int]
    flagged_ct: frozenset[int]
    flagged_dk: frozenset[int]
    retransmissions: int
    global_model: np.ndarray
    degenerate: bool = False
    aborted: bool = False
    accuracy: float = float("nan")
    asr: float = float("nan")
    timings: dict[str, float] = field(default_factory=dict)
    message_bytes: int = 0

    @property
    def flagged(self) -> frozenset[int]:
        return self.flagged_ct | self.flagged_dk

    def csv_row(self) -> dict[str, Any]:
        row = {
            "round": self.round,
            "accuracy": f"{self.accuracy:.6f}",
            "asr": f"{self.asr:.6f}",
            "flagged_ids": ";".join(str(i) for i in sorted(self.flagged)),
            "retransmissions": self.retransmissions,
            "degenerate": int(self.degenerate),
            "aborted": int(self.aborted),
            "message_bytes": self.message_bytes,
        }
        for ph in PHASES:
            row[f"time_{ph}"] = f"{self.timings.get(ph, 0.0):.6f}"
        return row


@dataclass
class Message:
    round: int
    sender: int
    kind: str
    nbytes: int


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list[RoundRecord]
    messages: list[Message]
    initial_model: np.ndarray

    @property
    def accuracy(self) -> list[float]:
        return [r.accuracy for r in self.records]

    @property
    def asr(self) -> list[float]:
        return [r.asr for r in self.records]

    @property
    def final_accuracy(self) -> float:
        return self.records[-1].accuracy if self.records else float("nan")

    @property
    def final_asr(self) -> float:
        return self.records[-1].asr if self.records else float("nan")


# -- task construction -----------------------------------------------------------

def quadratic_task(spec: Mapping[str, Any], seed: int) -> Quadratic:
    dim = int(spec.get("dim", 10))
    mu, L = float(spec.get("mu", 0.5)), float(spec.get("L", 2.0))
    rng = np.random.default_rng([seed, 0xA11])
    a = np.linspace(mu, L, dim)
    w_opt = rng.normal(size=dim)
    w_opt *= float(spec.get("opt_norm", 1.0)) / np.linalg.norm(w_opt)
    direction = rng.normal(size=dim)
    start = w_opt + float(spec.get("distance", 20.0)) * direction / np.linalg.norm(direction)
    return Quadratic(tuple(a), tuple(w_opt), tuple(start))


def build_task(cfg: ExperimentConfig):
    spec = dict(cfg.dataset)
    kind = spec.get("kind", "blobs")
    if kind == "quadratic" or cfg.model == "quadratic":
        if cfg.model != "quadratic" or kind != "quadratic":
            raise ConfigError("the quadratic dataset and model go together")
        model = quadratic_task(spec, cfg.seed)
        dummy = Dataset(np.zeros((1, 1)), np.zeros(1, dtype=np.int64), 2)
        return model, FederatedData(tuple(dummy for _ in range(cfg.n)), dummy, dummy, 2)
    if kind == "blobs":
        n_train = int(spec.get("n_train", 1000))
        n_root = int(spec.get("n_root", 100))
        n_test = int(spec.get("n_test", 500))
        pool = make_blobs(n_train + n_root + n_test, int(spec.get("features", 20)), int(spec.get("classes", 5)),
                          seed=int(spec.get("data_seed", cfg.seed)), spread=float(spec.get("spread", 1.5)))
        fed = partition(pool, cfg.n, n_train, n_root, n_test=n_test, seed=cfg.seed)
    elif kind == "mnist":
        train, test = load_mnist(spec.get("path"))
        pool_k = int(spec.get("pool", 1))
        if pool_k > 1:
            train = Dataset(avg_pool(train.X, pool_k), train.y, train.classes)
            if test is not None:
                test = Dataset(avg_pool(test.X, pool_k), test.y, test.classes)
        fed = partition(train, cfg.n, int(spec.get("n_train", 2000)), int(spec.get("n_root", 100)),
                        test=test, n_test=int(spec.get("n_test", 1000)), seed=cfg.seed)
    else:
        raise ConfigError(f"unknown dataset kind {kind!r}")
    features = fed.root.X.shape[1]
    if cfg.model == "logreg":
        model = LogisticRegression(features, fed.classes)
    elif cfg.model == "mlp":
        model = MLP(features, cfg.hidden, fed.classes)
    else:
        raise ConfigError("the quadratic model needs the quadratic dataset")
    return model, fed


# -- server-side rules -------------------------------------------------------------

def client_weight(W: np.ndarray, W0: np.ndarray) -> dvfe.Weight:
    den = agg.int_dot(W, W)
    if den == 0:
        return dvfe.Weight(0, agg.S_Y, 0)
    sc = agg.trust_score(W, W0)
    return dvfe.Weight(sc.y_hat, sc.scale, sc.residual)


def fedavg(models: list[np.ndarray]) -> np.ndarray:
    return np.mean([agg.fp_decode(W) for W in models], axis=0)


def fltrust(models: list[np.ndarray], W0: np.ndarray, prev: np.ndarray) -> np.ndarray:
    g0 = agg.fp_decode(W0) - prev
    n0 = np.linalg.norm(g0)
    total, acc = 0.0, np.zeros_like(prev)
    for W in models:
        g = agg.fp_decode(W) - prev
        ng = np.linalg.norm(g)
        if ng == 0.0 or n0 == 0.0:
            continue
        ts = max(0.0, float(g @ g0) / (ng * n0))
        total += ts
        acc += ts * (n0 / ng) * g
    return prev + (acc / total if total > 0 else 0.0)


# -- simulator ---------------------------------------------------------------------

class _Timer:
    def __init__(self, sink: dict, name: str):
        self.sink, self.name = sink, name

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        self.sink[self.name] = self.sink.get(self.name, 0.0) + time.perf_counter() - self.t0


class RoundAborted(VfeflError):
    pass


class Simulator:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.model, self.data = build_task(cfg)
        self.codec = agg.DEFAULT_CODEC
        ss = np.random.SeedSequence(cfg.seed)
        streams = ss.spawn(cfg.n + 2)
        self.server_rng = np.random.default_rng(streams[0])
        self.attack_rng = np.random.default_rng(streams[1])
        self.client_rngs = [np.random.default_rng(s) for s in streams[2:]]
        self.crypto_rngs = [random.Random(f"{cfg.seed}/crypto/{i}") for i in range(1, cfg.n + 1)]
        self.malicious = set(cfg.malicious_ids)
        self.shards = list(self.data.shards)
        if cfg.attack == "labelflip":
            for i in self.malicious:
                self.shards[i - 1] = flip_labels(self.shards[i - 1])
        init_rng = np.random.default_rng([cfg.seed, 0x1A17])
        self.initial = self.codec.encode(self.model.init(init_rng))
        self.global_model = self.initial.copy()
        self.messages: list[Message] = []
        self.pp = self.keys = self.vk = None

    # setup phase
    def setup_crypto(self):
        cfg = self.cfg
        self.pp = dvfe.setup(cfg.n, self.model.num_params, profile=cfg.profile, seed=cfg.seed,
                             bsgs_bound=cfg.bsgs_bound)
        rng = random.Random(f"{cfg.seed}/keygen")
        self.keys, self.vk = dvfe.keygen(self.pp, rng)

    def _train_clients(self, prev: np.ndarray, W0f: np.ndarray) -> list[np.ndarray]:
        cfg = self.cfg
        honest_float = {}
        for i in range(1, cfg.n + 1):
            if i in self.malicious and cfg.attack not in ("none", "labelflip"):
                continue
            honest_float[i] = local_train(self.model, prev, self.shards[i - 1], cfg.lr, cfg.local_iters,
                                          self.client_rngs[i - 1], cfg.batch_size)
        honest_mat = np.array([honest_float[i] for i in sorted(honest_float)])
        out = []
        adaptive_model = None
        for i in range(1, cfg.n + 1):
            if i in honest_float:
                w = honest_float[i]
            elif cfg.attack == "gaussian":
                w = attacks.gaussian(honest_mat, cfg.sigma_scale, self.attack_rng)
            elif cfg.attack == "scaling":
                factor = cfg.scale_factor if cfg.scale_factor is not None else cfg.n
                w = attacks.scaling(honest_mat, cfg.sigma_scale, factor, self.attack_rng)
            else:  # adaptive: colluding clients share one model
                if adaptive_model is None:
                    adaptive_model = attacks.adaptive(honest_mat, W0f, len(self.malicious), self.attack_rng,
                                                      iterations=cfg.adaptive_iters)
                w = adaptive_model
            # attackers still have to fit the public message bound to be accepted
            out.append(self.codec.encode(w, saturate=i not in honest_float))
        return out

    def run_round(self, t: int) -> RoundRecord:
        cfg = self.cfg
        timings: dict[str, float] = {}
        prev = self.codec.decode(self.global_model)
        with _Timer(timings, "baseline"):
            baseline = local_train(self.model, prev, self.data.root, cfg.lr, cfg.local_iters,
                                   self.server_rng, cfg.batch_size)
            W0 = self.codec.encode(baseline)
        with _Timer(timings, "local"):
            models = self._train_clients(prev, self.codec.decode(W0))
        rec = RoundRecord(t, baseline, W0, [], frozenset(), frozenset(), 0, self.global_model, timings=timings)

        if cfg.aggregator == "fedavg":
            with _Timer(timings, "aggregate"):
                new = self.codec.encode(fedavg(models), saturate=True)
        elif cfg.aggregator == "fltrust":
            with _Timer(timings, "aggregate"):
                new = self.codec.encode(fltrust(models, W0, prev), saturate=True)
        else:
            weights = [client_weight(W, W0) for W in models]
            rec.scores = [w.value for w in weights]
            if cfg.mode == FULL_CRYPTO:
                try:
                    W_star = self._secure_aggregate(t, models, W0, weights, rec)
                except RoundAborted as exc:
                    log.warning("round %d aborted: %s", t, exc)
                    rec.aborted = True
                    W_star = None
            else:
                with _Timer(timings, "aggregate"):
                    W_star = agg.aggregate_plain(models, [w.value for w in weights])
            if W_star is None:
                new = self.global_model
            else:
                with _Timer(timings, "aggregate"):
                    new, rec.degenerate = agg.normalize(W_star, W0, self.codec)
        self.global_model = np.asarray(new, dtype=np.int64)
        rec.global_model = self.global_model
        if cfg.model != "quadratic":
            rec.accuracy, rec.asr = evaluate(self.model, self.codec.decode(self.global_model), self.data.test)
        return rec

    # secure aggregation phase
    def _send(self, t, sender, kind, payload: bytes):
        self.messages.append(Message(t, sender, kind, len(payload)))
        return len(payload)

    def _tamper_ct(self, ct: dvfe.LabeledCiphertext) -> dvfe.LabeledCiphertext:
        bad = (ct.entries[0] * BLS12_381.g,) + ct.entries[1:]
        return dataclasses.replace(ct, entries=bad)

    def _tamper_share(self, sh: dvfe.KeyShare) -> dvfe.KeyShare:
        return dataclasses.replace(sh, dk=(sh.dk[0] * BLS12_381.h, sh.dk[1]))

    def _misbehaves(self, i: int, stage: str, attempt_send: int) -> bool:
        cfg = self.cfg
        if i not in cfg.crypto_clients:
            return False
        if cfg.crypto_attack == "persistent_bad_ciphertext":
            return stage == "ct"
        if cfg.crypto_attack == "bad_ciphertext":
            return stage == "ct" and attempt_send == 0
        if cfg.crypto_attack == "bad_share":
            return stage == "dk" and attempt_send == 0
        return False

    def _secure_aggregate(self, t, models, W0, weights, rec: RoundRecord):
        cfg, pp, tm = self.cfg, self.pp, rec.timings
        if pp is None:
            self.setup_crypto()
            pp = self.pp
        x0 = [int(v) for v in W0]
        for attempt in range(cfg.max_restarts + 1):
            key = dvfe.round_key(t, attempt)

            def make_ct(i, send):
                ct = dvfe.encrypt(self.keys[i - 1], models[i - 1], x0, key, pp, mode=dvfe.ROUNDED,
                                  weight=weights[i - 1], rng=self.crypto_rngs[i - 1])
                return self._tamper_ct(ct) if self._misbehaves(i, "ct", send) else ct

            with _Timer(tm, "encrypt"):
                cts = [make_ct(i, 0) for i in range(1, cfg.n + 1)]
            rec.message_bytes += sum(self._send(t, ct.index, "ciphertext", ct.to_bytes()) for ct in cts)
            with _Timer(tm, "verify_ct"):
                res = dvfe.verify_ct(cts, self.vk.vk_ct, pp, x0=x0, key=key, rounded=True)
            rec.flagged_ct |= res.flagged
            if res.flagged:
                rec.retransmissions += 1
                with _Timer(tm, "encrypt"):
                    for i in res.flagged:
                        cts[i - 1] = make_ct(i, 1)
                        rec.message_bytes += self._send(t, i, "ciphertext", cts[i - 1].to_bytes())
                with _Timer(tm, "verify_ct"):
                    res = dvfe.verify_ct(cts, self.vk.vk_ct, pp, x0=x0, key=key, rounded=True)
                if res.flagged:
                    log.info("round %d: excluding %s, restarting with a fresh label", t, sorted(res.flagged))
                    continue

            def make_share(i, send):
                sh = dvfe.dkeygen_share(self.keys[i - 1], self.vk, cts[i - 1].weight, key, pp,
                                        rng=self.crypto_rngs[i - 1])
                return self._tamper_share(sh) if self._misbehaves(i, "dk", send) else sh

            with _Timer(tm, "keyshare"):
                shares = [make_share(i, 0) for i in range(1, cfg.n + 1)]
            rec.message_bytes += sum(self._send(t, sh.index, "keyshare", sh.to_bytes()) for sh in shares)
            expected = [ct.weight for ct in cts]
            with _Timer(tm, "verify_dk"):
                res = dvfe.verify_dk(shares, self.vk, pp, key=key, expected_weights=expected)
            rec.flagged_dk |= res.flagged
            if res.flagged:
                rec.retransmissions += 1
                with _Timer(tm, "keyshare"):
                    for i in res.flagged:
                        shares[i - 1] = make_share(i, 1)
                        rec.message_bytes += self._send(t, i, "keyshare", shares[i - 1].to_bytes())
                with _Timer(tm, "verify_dk"):
                    res = dvfe.verify_dk(shares, self.vk, pp, key=key, expected_weights=expected)
                if res.flagged:
                    continue
            with _Timer(tm, "combine"):
                fk = dvfe.dkey_comb(shares, self.vk, pp, key)
            with _Timer(tm, "decrypt"):
                return dvfe.decrypt(cts, fk, expected, pp, table_size=cfg.bsgs_table)
        raise RoundAborted(f"retry budget exhausted after {cfg.max_restarts + 1} attempts")


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    sim = Simulator(cfg)
    if cfg.mode == FULL_CRYPTO and cfg.rounds > 0:
        sim.setup_crypto()
    records = [sim.run_round(t) for t in range(1, cfg.rounds + 1)]
    return ExperimentResult(cfg, records, sim.messages, sim.initial)
