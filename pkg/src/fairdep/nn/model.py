"""Model specifications and the two architectures.

Both models share the same tail: conv front end -> ReLU -> max pool
(3, 3) -> two stacked LSTM layers (hidden 128) -> dense -> sigmoid on
the last time step.

* "depaudionet": log-mel input (40 x 120) treated as 40 channels over
  120 steps, one conv {K=3, S=1, P=1, D=128}.
* "rawaudio": raw segment (1 x 61440), front conv {K=1024, S=512,
  P=276, D=40} whose output grid matches the mel front end (40 x 120);
  with conv_filters=2 an extra conv {K=3, S=1, P=1, D=40} follows.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

from fairdep.errors import ConfigError, ContractError
from fairdep.nn.layers import LSTM, Conv1d, Dense, MaxPool1d, ReLU, _sigmoid

MODEL_DEPAUDIONET = "depaudionet"
MODEL_RAWAUDIO = "rawaudio"

N_MELS = 40
N_SEG = 120
RAW_SEGMENT_LEN = 61440  # N_SEG * hop(512)


def conv_out_len(l_in: int, kernel: int, stride: int, pad: int) -> int:
    """Convolution output length: floor((L_in + 2P - K)/S) + 1."""
    if kernel < 1 or stride < 1 or pad < 0:
        raise ConfigError("need kernel >= 1, stride >= 1, pad >= 0")
    if l_in + 2 * pad < kernel:
        raise ConfigError(
            f"input length {l_in} with pad {pad} shorter than kernel {kernel}"
        )
    return (l_in + 2 * pad - kernel) // stride + 1


@dataclass(frozen=True)
class ConvSpec:
    in_channels: int
    out_channels: int
    kernel: int
    stride: int = 1
    pad: int = 0


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description sufficient to rebuild a network."""

    kind: str
    conv_filters: int
    convs: tuple[ConvSpec, ...]
    pool_kernel: int = 3
    pool_stride: int = 3
    lstm_layers: int = 2
    lstm_hidden: int = 128
    input_channels: int = N_MELS
    input_length: int = N_SEG

    @property
    def input_shape(self) -> tuple[int, int]:
        return (self.input_channels, self.input_length)


def make_model_spec(
    kind: str,
    conv_filters: int = 1,
    lstm_hidden: int = 128,
    conv_channels: int = 128,
) -> ModelSpec:
    """Build the pinned architecture for a model kind.

    conv_filters selects C in {1, 2} for the raw-audio model; the mel
    model always has exactly one conv. lstm_hidden and conv_channels
    exist for reduced-size test models and default to the full widths.
    """
    if kind == MODEL_DEPAUDIONET:
        if conv_filters != 1:
            raise ConfigError("the mel model has exactly one conv filter")
        convs = (ConvSpec(N_MELS, conv_channels, 3, 1, 1),)
        return ModelSpec(
            kind=kind,
            conv_filters=1,
            convs=convs,
            lstm_hidden=lstm_hidden,
            input_channels=N_MELS,
            input_length=N_SEG,
        )
    if kind == MODEL_RAWAUDIO:
        if conv_filters not in (1, 2):
            raise ConfigError("raw-audio conv_filters must be 1 or 2")
        convs = [ConvSpec(1, N_MELS, 1024, 512, 276)]
        if conv_filters == 2:
            convs.append(ConvSpec(N_MELS, N_MELS, 3, 1, 1))
        return ModelSpec(
            kind=kind,
            conv_filters=conv_filters,
            convs=tuple(convs),
            lstm_hidden=lstm_hidden,
            input_channels=1,
            input_length=RAW_SEGMENT_LEN,
        )
    raise ConfigError(f"unknown model kind {kind!r}")


def spec_hash(spec: ModelSpec) -> str:
    """Stable content hash of a model spec (hex sha256)."""
    payload = json.dumps(asdict(spec), sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()


class Network:
    """A built model: ordered layers plus the sigmoid head.

    forward() maps a batch (n, channels, length) to probabilities (n,);
    backward(labels) fills parameter gradients with the analytic
    gradient of the mean binary cross entropy.
    """

    def __init__(self, spec: ModelSpec, rng: np.random.Generator | None = None):
        self.spec = spec
        self.layers: list = []
        length = spec.input_length
        for i, c in enumerate(spec.convs, start=1):
            self.layers.append(
                Conv1d(c.in_channels, c.out_channels, c.kernel, c.stride, c.pad, name=f"conv{i}")
            )
            self.layers.append(ReLU(name=f"relu{i}"))
            length = conv_out_len(length, c.kernel, c.stride, c.pad)
        self.layers.append(MaxPool1d(spec.pool_kernel, spec.pool_stride, name="pool"))
        length = (length - spec.pool_kernel) // spec.pool_stride + 1
        if length < 1:
            raise ConfigError("pooled sequence is empty; input too short")
        lstm_in = spec.convs[-1].out_channels
        for i in range(1, spec.lstm_layers + 1):
            self.layers.append(LSTM(lstm_in, spec.lstm_hidden, name=f"lstm{i}"))
            lstm_in = spec.lstm_hidden
        self.head = Dense(spec.lstm_hidden, 1, name="head")
        if rng is not None:
            self.init_params(rng)

    def init_params(self, rng: np.random.Generator) -> None:
        for layer in self.layers:
            if hasattr(layer, "init_params"):
                layer.init_params(rng)
        self.head.init_params(rng)

    @property
    def params(self) -> dict[str, np.ndarray]:
        out = {}
        for layer in self.layers:
            for key, value in layer.params.items():
                out[f"{layer.name}.{key}"] = value
        for key, value in self.head.params.items():
            out[f"{self.head.name}.{key}"] = value
        return out

    @property
    def grads(self) -> dict[str, np.ndarray]:
        out = {}
        for layer in self.layers:
            for key, value in layer.grads.items():
                out[f"{layer.name}.{key}"] = value
        for key, value in self.head.grads.items():
            out[f"{self.head.name}.{key}"] = value
        return out

    def load_params(self, params: dict[str, np.ndarray]) -> None:
        own = self.params
        missing = set(own) - set(params)
        extra = set(params) - set(own)
        if missing or extra:
            raise ContractError(
                f"parameter names do not match: missing {sorted(missing)}, "
                f"unexpected {sorted(extra)}"
            )
        for name, value in params.items():
            if own[name].shape != value.shape:
                raise ContractError(
                    f"parameter {name}: expected shape {own[name].shape}, "
                    f"got {value.shape}"
                )
            own[name][...] = value

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[1:] != self.spec.input_shape:
            raise ContractError(
                f"input: expected (n, {self.spec.input_channels}, "
                f"{self.spec.input_length}), got {x.shape}"
            )
        for layer in self.layers:
            x = layer.forward(x)
        h_last = x[:, :, -1]
        self._t_len = x.shape[2]
        z = self.head.forward(h_last)[:, 0]
        self._probs = _sigmoid(z)
        return self._probs

    def backward(self, labels: np.ndarray) -> None:
        """Gradient of mean BCE w.r.t. every parameter; call after forward."""
        labels = np.asarray(labels, dtype=np.float64)
        n = labels.shape[0]
        dz = ((self._probs - labels) / n)[:, None]
        dh_last = self.head.backward(dz)
        dx = np.zeros((n, self.spec.lstm_hidden, self._t_len))
        dx[:, :, -1] = dh_last
        for layer in reversed(self.layers):
            dx = layer.backward(dx)
