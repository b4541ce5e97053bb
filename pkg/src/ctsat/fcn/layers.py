"""Length-preserving 1-D convolution and activations, with exact gradients.

Array convention: (batch, length, channels), float64 throughout. Forward
passes cache whatever backward needs; gradients are plain numpy and are
checked against central finite differences in the test suite.
"""

from __future__ import annotations

import numpy as np

ACTIVATIONS = ("tanh", "sigmoid", "identity")


def apply_activation(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "tanh":
        return np.tanh(z)
    if kind == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    if kind == "identity":
        return z
    raise ValueError(f"unknown activation {kind!r}")


def activation_grad(kind: str, out: np.ndarray) -> np.ndarray:
    """d(act)/dz expressed through the activation output."""
    if kind == "tanh":
        return 1.0 - out * out
    if kind == "sigmoid":
        return out * (1.0 - out)
    if kind == "identity":
        return np.ones_like(out)
    raise ValueError(f"unknown activation {kind!r}")


def _window_columns(x: np.ndarray, kernel: int, pad_left: int,
                    pad_right: int) -> np.ndarray:
    """(B, L, C) -> (B, L, kernel, C) sliding windows over the padded length."""
    xp = np.pad(x, ((0, 0), (pad_left, pad_right), (0, 0)))
    win = np.lib.stride_tricks.sliding_window_view(xp, kernel, axis=1)
    return np.ascontiguousarray(np.swapaxes(win, 2, 3))


class Conv1d:
    """Same-padding 1-D convolution (correlation convention) plus activation.

    weights: (kernel, in_channels, out_channels); bias: (out_channels,).
    """

    def __init__(self, kernel: int, in_channels: int, out_channels: int,
                 activation: str = "identity"):
        if kernel < 1 or kernel % 2 == 0 and kernel != 1:
            # even kernels would make "same" padding asymmetric in a way the
            # architecture never uses; keep them out.
            if kernel % 2 == 0:
                raise ValueError(f"kernel must be odd, got {kernel}")
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.kernel = kernel
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.activation = activation
        self.pad_left = (kernel - 1) // 2
        self.pad_right = kernel - 1 - self.pad_left
        self.weights = np.zeros((kernel, in_channels, out_channels))
        self.bias = np.zeros(out_channels)
        self._cols: np.ndarray | None = None
        self._out: np.ndarray | None = None

    def init_weights(self, rng: np.random.Generator) -> None:
        """Uniform init scaled by fan-in (kernel * in_channels), zero bias."""
        bound = (self.kernel * self.in_channels) ** -0.5
        self.weights = rng.uniform(-bound, bound, size=self.weights.shape)
        self.bias = np.zeros(self.out_channels)

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        cols = _window_columns(x, self.kernel, self.pad_left, self.pad_right)
        z = np.tensordot(cols, self.weights, axes=([2, 3], [0, 1])) + self.bias
        out = apply_activation(self.activation, z)
        if train:
            self._cols, self._out = cols, out
        return out

    def backward(self, grad_out: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Given dL/d(out), return (dL/d(in), dL/d(weights), dL/d(bias))."""
        if self._cols is None or self._out is None:
            raise RuntimeError("backward called before a training-mode forward")
        dz = grad_out * activation_grad(self.activation, self._out)
        grad_w = np.tensordot(self._cols, dz, axes=([0, 1], [0, 1]))
        grad_b = dz.sum(axis=(0, 1))
        # dL/d(in) is the correlation of dz with the kernel flipped along
        # the tap axis; padding swaps sides relative to the forward pass.
        w_t = np.swapaxes(self.weights[::-1], 1, 2)
        dz_cols = _window_columns(dz, self.kernel, self.pad_right, self.pad_left)
        grad_in = np.tensordot(dz_cols, w_t, axes=([2, 3], [0, 1]))
        return grad_in, grad_w, grad_b

    def parameter_count(self) -> int:
        return self.weights.size + self.bias.size
