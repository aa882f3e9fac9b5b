"""Model-poisoning attacks and scripted protocol-level misbehaviour.

Model attacks act on float models. ``labelflip`` is a data attack: the
simulator trains the client honestly on flipped labels.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError

MODEL_ATTACKS = ("none", "gaussian", "scaling", "adaptive", "labelflip")
CRYPTO_ATTACKS = ("none", "bad_ciphertext", "bad_share", "persistent_bad_ciphertext")


def gaussian(honest: np.ndarray, sigma_scale: float, rng, m: int | None = None) -> np.ndarray:
    """Componentwise ``N(0, sigma^2)`` with ``sigma = sigma_scale * std(honest entries)``."""
    honest = np.atleast_2d(honest)
    sigma = sigma_scale * float(np.std(honest))
    return rng.normal(0.0, 1.0, size=m or honest.shape[1]) * sigma


def scaling(honest: np.ndarray, sigma_scale: float, factor: float, rng) -> np.ndarray:
    return factor * gaussian(honest, sigma_scale, rng)


def _vfefl_rule(models: np.ndarray, w0: np.ndarray) -> np.ndarray:
    """Float version of the trust-score rule, used as the attacker's objective model."""
    num = models @ w0
    den = np.einsum("ij,ij->i", models, models)
    y = np.where((num > 0) & (den > 0), num / np.where(den > 0, den, 1.0), 0.0)
    agg = y @ models
    norm = np.linalg.norm(agg)
    if norm == 0.0:
        return w0.copy()
    return agg * (np.linalg.norm(w0) / norm)


def adaptive(
    honest: np.ndarray,
    w0: np.ndarray,
    n_malicious: int,
    rng,
    iterations: int = 100,
    step: float = 0.5,
    decay: float = 0.97,
) -> np.ndarray:
    """Zeroth-order hill climbing on one shared malicious model.

    Maximizes the distance between the attacked and the honest-only aggregate,
    starting from the negated mean of the honest models.
    """
    honest = np.atleast_2d(honest)
    reference = _vfefl_rule(honest, w0)
    scale = float(np.linalg.norm(honest.mean(axis=0))) or 1.0

    def objective(z):
        stacked = np.vstack([honest, np.repeat(z[None, :], n_malicious, axis=0)])
        return float(np.linalg.norm(_vfefl_rule(stacked, w0) - reference))

    best = -honest.mean(axis=0)
    best_val = objective(best)
    for _ in range(iterations):
        direction = rng.normal(size=best.shape)
        direction *= scale / (np.linalg.norm(direction) or 1.0)
        cand = best + step * direction
        val = objective(cand)
        if val > best_val:
            best, best_val = cand, val
        step *= decay
    return best


def check_kind(kind: str, allowed=MODEL_ATTACKS) -> str:
    if kind not in allowed:
        raise ConfigError(f"unknown attack kind {kind!r}; expected one of {', '.join(allowed)}")
    return kind
