"""Network layers with hand-derived backward passes.

Every layer works on float64 arrays. Data layout is (batch, channels,
length) for temporal layers and (batch, features) for the dense head.
forward() caches whatever backward() needs; backward(dy) returns the
gradient w.r.t. the layer input and fills self.grads keyed like
self.params.
"""

from __future__ import annotations

import numpy as np

from fairdep.errors import ContractError


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # Numerically stable in both tails.
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class Layer:
    """Base: parameterless layers inherit empty params/grads."""

    name = "layer"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Conv1d(Layer):
    """1-D convolution (cross-correlation) with zero padding.

    weight: (out_channels, in_channels, kernel), bias: (out_channels,).
    Output length is floor((L_in + 2P - K)/S) + 1.
    """

    def __init__(self, in_channels, out_channels, kernel, stride=1, pad=0, name="conv"):
        super().__init__()
        self.name = name
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        self.pad = pad
        self.params = {
            "weight": np.zeros((out_channels, in_channels, kernel)),
            "bias": np.zeros(out_channels),
        }

    def init_params(self, rng: np.random.Generator) -> None:
        fan_in = self.in_channels * self.kernel
        fan_out = self.out_channels * self.kernel
        a = np.sqrt(6.0 / (fan_in + fan_out))
        self.params["weight"][...] = rng.uniform(-a, a, self.params["weight"].shape)
        self.params["bias"][...] = 0.0

    def forward(self, x: np.ndarray) -> np.ndarray:
        n, c, length = x.shape
        if c != self.in_channels:
            raise ContractError(
                f"{self.name}: expected {self.in_channels} input channels, got {c}"
            )
        if length + 2 * self.pad < self.kernel:
            raise ContractError(
                f"{self.name}: input length {length} too short for kernel "
                f"{self.kernel} with pad {self.pad}"
            )
        xp = np.pad(x, ((0, 0), (0, 0), (self.pad, self.pad)))
        l_out = (xp.shape[2] - self.kernel) // self.stride + 1
        offsets = np.arange(l_out) * self.stride
        # (n, C_in, K, L_out) patch matrix
        cols = xp[:, :, offsets[None, :] + np.arange(self.kernel)[:, None]]
        y = np.einsum("ock,nckl->nol", self.params["weight"], cols)
        y += self.params["bias"][None, :, None]
        self._cache = (cols, x.shape, offsets)
        return y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        cols, x_shape, offsets = self._cache
        w = self.params["weight"]
        self.grads["bias"] = dy.sum(axis=(0, 2))
        self.grads["weight"] = np.einsum("nol,nckl->ock", dy, cols)
        dcols = np.einsum("nol,ock->nckl", dy, w)
        n, c, length = x_shape
        dxp = np.zeros((n, c, length + 2 * self.pad))
        for k in range(self.kernel):
            dxp[:, :, offsets + k] += dcols[:, :, k, :]
        if self.pad:
            return dxp[:, :, self.pad : self.pad + length]
        return dxp


class ReLU(Layer):
    def __init__(self, name="relu"):
        super().__init__()
        self.name = name

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return x * self._mask

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return dy * self._mask


class MaxPool1d(Layer):
    """Max pooling over time; backward routes gradient to the argmax
    position of each window (first position on ties)."""

    def __init__(self, kernel, stride, name="pool"):
        super().__init__()
        self.name = name
        self.kernel = kernel
        self.stride = stride

    def forward(self, x: np.ndarray) -> np.ndarray:
        n, c, length = x.shape
        if length < self.kernel:
            raise ContractError(
                f"{self.name}: input length {length} shorter than kernel {self.kernel}"
            )
        l_out = (length - self.kernel) // self.stride + 1
        offsets = np.arange(l_out) * self.stride
        windows = x[:, :, offsets[:, None] + np.arange(self.kernel)[None, :]]
        self._argmax = windows.argmax(axis=3)
        self._offsets = offsets
        self._x_shape = x.shape
        return windows.max(axis=3)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        n, c, length = self._x_shape
        dx = np.zeros((n, c, length))
        pos = self._offsets[None, None, :] + self._argmax
        ni = np.arange(n)[:, None, None]
        ci = np.arange(c)[None, :, None]
        np.add.at(dx, (ni, ci, pos), dy)
        return dx


class LSTM(Layer):
    """Single LSTM layer over a (batch, features, time) sequence.

    Gate order is (input, forget, cell, output). weight_ih: (4H, I),
    weight_hh: (4H, H), biases: (4H,). Initial hidden and cell states
    are zero. Returns the full hidden sequence (batch, H, time).
    """

    def __init__(self, input_size, hidden_size, name="lstm"):
        super().__init__()
        self.name = name
        self.input_size = input_size
        self.hidden_size = hidden_size
        h = hidden_size
        self.params = {
            "weight_ih": np.zeros((4 * h, input_size)),
            "weight_hh": np.zeros((4 * h, h)),
            "bias_ih": np.zeros(4 * h),
            "bias_hh": np.zeros(4 * h),
        }

    def init_params(self, rng: np.random.Generator) -> None:
        h, i = self.hidden_size, self.input_size
        a_ih = np.sqrt(6.0 / (i + 4 * h))
        a_hh = np.sqrt(6.0 / (h + 4 * h))
        self.params["weight_ih"][...] = rng.uniform(-a_ih, a_ih, (4 * h, i))
        self.params["weight_hh"][...] = rng.uniform(-a_hh, a_hh, (4 * h, h))
        self.params["bias_ih"][...] = 0.0
        self.params["bias_hh"][...] = 0.0
        # Forget-gate bias starts at +1 for stable memory early in training.
        self.params["bias_ih"][h : 2 * h] = 1.0

    def forward(self, x: np.ndarray) -> np.ndarray:
        n, features, t_len = x.shape
        if features != self.input_size:
            raise ContractError(
                f"{self.name}: expected {self.input_size} input features, got {features}"
            )
        h = self.hidden_size
        w_ih, w_hh = self.params["weight_ih"], self.params["weight_hh"]
        bias = self.params["bias_ih"] + self.params["bias_hh"]

        gates = np.zeros((n, 4 * h, t_len))
        cells = np.zeros((n, h, t_len))
        hidden = np.zeros((n, h, t_len))
        h_t = np.zeros((n, h))
        c_t = np.zeros((n, h))
        for t in range(t_len):
            z = x[:, :, t] @ w_ih.T + h_t @ w_hh.T + bias
            i_g = _sigmoid(z[:, :h])
            f_g = _sigmoid(z[:, h : 2 * h])
            g_g = np.tanh(z[:, 2 * h : 3 * h])
            o_g = _sigmoid(z[:, 3 * h :])
            c_t = f_g * c_t + i_g * g_g
            h_t = o_g * np.tanh(c_t)
            gates[:, :h, t] = i_g
            gates[:, h : 2 * h, t] = f_g
            gates[:, 2 * h : 3 * h, t] = g_g
            gates[:, 3 * h :, t] = o_g
            cells[:, :, t] = c_t
            hidden[:, :, t] = h_t
        self._cache = (x, gates, cells, hidden)
        return hidden

    def backward(self, dy: np.ndarray) -> np.ndarray:
        """dy is the gradient w.r.t. the full hidden sequence."""
        x, gates, cells, hidden = self._cache
        n, _, t_len = x.shape
        h = self.hidden_size
        w_ih, w_hh = self.params["weight_ih"], self.params["weight_hh"]

        d_wih = np.zeros_like(w_ih)
        d_whh = np.zeros_like(w_hh)
        d_bias = np.zeros(4 * h)
        dx = np.zeros_like(x)
        dh_next = np.zeros((n, h))
        dc_next = np.zeros((n, h))
        for t in range(t_len - 1, -1, -1):
            i_g = gates[:, :h, t]
            f_g = gates[:, h : 2 * h, t]
            g_g = gates[:, 2 * h : 3 * h, t]
            o_g = gates[:, 3 * h :, t]
            c_t = cells[:, :, t]
            c_prev = cells[:, :, t - 1] if t > 0 else np.zeros((n, h))
            h_prev = hidden[:, :, t - 1] if t > 0 else np.zeros((n, h))
            tc = np.tanh(c_t)

            dh = dy[:, :, t] + dh_next
            dc = dc_next + dh * o_g * (1.0 - tc**2)
            dz = np.concatenate(
                [
                    dc * g_g * i_g * (1.0 - i_g),
                    dc * c_prev * f_g * (1.0 - f_g),
                    dc * i_g * (1.0 - g_g**2),
                    dh * tc * o_g * (1.0 - o_g),
                ],
                axis=1,
            )
            d_wih += dz.T @ x[:, :, t]
            d_whh += dz.T @ h_prev
            d_bias += dz.sum(axis=0)
            dx[:, :, t] = dz @ w_ih
            dh_next = dz @ w_hh
            dc_next = dc * f_g
        self.grads = {
            "weight_ih": d_wih,
            "weight_hh": d_whh,
            "bias_ih": d_bias,
            "bias_hh": d_bias.copy(),
        }
        return dx


class Dense(Layer):
    """Affine map on (batch, features). weight: (out, in), bias: (out,)."""

    def __init__(self, in_features, out_features, name="dense"):
        super().__init__()
        self.name = name
        self.in_features = in_features
        self.out_features = out_features
        self.params = {
            "weight": np.zeros((out_features, in_features)),
            "bias": np.zeros(out_features),
        }

    def init_params(self, rng: np.random.Generator) -> None:
        a = np.sqrt(6.0 / (self.in_features + self.out_features))
        self.params["weight"][...] = rng.uniform(-a, a, self.params["weight"].shape)
        self.params["bias"][...] = 0.0

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[1] != self.in_features:
            raise ContractError(
                f"{self.name}: expected {self.in_features} features, got {x.shape[1]}"
            )
        self._x = x
        return x @ self.params["weight"].T + self.params["bias"]

    def backward(self, dy: np.ndarray) -> np.ndarray:
        self.grads["weight"] = dy.T @ self._x
        self.grads["bias"] = dy.sum(axis=0)
        return dy @ self.params["weight"]
