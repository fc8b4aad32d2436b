"""Loss, learning-rate schedule, and Adam.

The update is the standard bias-corrected Adam step applied in place
to a parameter dict keyed by name.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from fairdep.errors import ConfigError

BCE_CLAMP = 1e-7


def bce(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Elementwise binary cross entropy with probabilities clamped to
    [BCE_CLAMP, 1 - BCE_CLAMP]."""
    p = np.clip(np.asarray(probs, dtype=np.float64), BCE_CLAMP, 1.0 - BCE_CLAMP)
    y = np.asarray(labels, dtype=np.float64)
    return -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))


def mean_bce(probs: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(bce(probs, labels)))


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters.

    lam is the decay interval in epochs: lr(e) = lr0 * decay^floor(e/lam).
    """

    lam: int = 2
    lr0: float = 0.001
    decay: float = 0.9
    epochs: int = 100
    batch_size: int = 20
    patience: int = 20
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.lam < 1:
            raise ConfigError("lam must be a positive epoch count")
        if self.epochs < 1:
            raise ConfigError("epochs must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be positive")
        if self.patience < 1:
            raise ConfigError("patience must be positive")
        if not 0.0 < self.lr0:
            raise ConfigError("lr0 must be positive")
        if not 0.0 < self.decay <= 1.0:
            raise ConfigError("decay must lie in (0, 1]")


def lr_schedule(config: TrainConfig, epoch: int) -> float:
    """Step-decayed learning rate for a zero-based epoch index."""
    if epoch < 0:
        raise ConfigError("epoch index must be >= 0")
    return config.lr0 * config.decay ** (epoch // config.lam)


@dataclass
class AdamState:
    """First/second moment accumulators plus the shared step counter."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
            t=0,
        )


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    config: TrainConfig,
) -> None:
    """One in-place Adam update over every named parameter."""
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    corr1 = 1.0 - b1 ** state.t
    corr2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / corr1
        v_hat = v / corr2
        p -= lr * m_hat / (np.sqrt(v_hat) + config.eps)
