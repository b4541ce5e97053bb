"""Layer graph of the 1-D fully convolutional saturation detector.

The graph is a list of nodes executed in order; convolution nodes feed from
one earlier node, concat nodes merge several along the channel axis. Output
length always equals input length, so the detector accepts any record at
least as long as its receptive field.
"""

from __future__ import annotations

import numpy as np

from .layers import Conv1d


class InputTooShortError(ValueError):
    """Record shorter than the detector's receptive field."""


def default_architecture() -> list[dict]:
    """Stem + two branched blocks merged by unit convolutions + sigmoid head."""
    def conv(name, inputs, kernel, cin, cout, act):
        return {"name": name, "type": "conv", "inputs": inputs, "kernel": kernel,
                "in_channels": cin, "out_channels": cout, "activation": act}

    nodes = [conv("stem", ["input"], 5, 1, 8, "tanh")]
    cin = 8
    for b in (1, 2):
        branches = []
        for kernel in (1, 5, 9):
            name = f"block{b}_k{kernel}"
            nodes.append(conv(name, [f"merge{b-1}" if b > 1 else "stem"],
                              kernel, cin, 8, "tanh"))
            branches.append(name)
        nodes.append({"name": f"cat{b}", "type": "concat", "inputs": branches})
        nodes.append(conv(f"merge{b}", [f"cat{b}"], 1, 24, 16, "tanh"))
        cin = 16
    nodes.append(conv("head", ["merge2"], 1, 16, 1, "sigmoid"))
    return nodes


class FcnModel:
    """Executable layer graph with seeded weights."""

    def __init__(self, architecture: list[dict], seed: int = 0):
        self.architecture = [dict(node) for node in architecture]
        self.seed = seed
        self.layers: dict[str, Conv1d] = {}
        self.training_manifest: dict = {}
        seen = {"input"}
        for node in self.architecture:
            name = node["name"]
            if name in seen:
                raise ValueError(f"duplicate node name {name!r}")
            for src in node["inputs"]:
                if src not in seen:
                    raise ValueError(f"node {name!r} feeds from undefined {src!r}")
            if node["type"] == "conv":
                if len(node["inputs"]) != 1:
                    raise ValueError(f"conv node {name!r} must have one input")
                self.layers[name] = Conv1d(node["kernel"], node["in_channels"],
                                           node["out_channels"], node["activation"])
            elif node["type"] != "concat":
                raise ValueError(f"unknown node type {node['type']!r}")
            seen.add(name)
        self.output_node = self.architecture[-1]["name"]
        rng = np.random.default_rng(seed)
        for node in self.architecture:
            if node["type"] == "conv":
                self.layers[node["name"]].init_weights(rng)

    @property
    def receptive_field(self) -> int:
        rf = {"input": 1}
        for node in self.architecture:
            if node["type"] == "conv":
                rf[node["name"]] = rf[node["inputs"][0]] + node["kernel"] - 1
            else:
                rf[node["name"]] = max(rf[src] for src in node["inputs"])
        return rf[self.output_node]

    def parameter_count(self) -> int:
        return sum(layer.parameter_count() for layer in self.layers.values())

    def _as_batch(self, x) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.ndim != 2:
            raise ValueError(f"input must be 1-D or (batch, length), got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("input contains non-finite values")
        rf = self.receptive_field
        if x.shape[1] < rf:
            raise InputTooShortError(
                f"input length {x.shape[1]} is below the receptive field {rf}")
        return x[:, :, None], single

    def forward(self, x, train: bool = False):
        """Per-sample saturation probabilities, same length as the input."""
        batch, single = self._as_batch(x)
        outputs: dict[str, np.ndarray] = {"input": batch}
        for node in self.architecture:
            name = node["name"]
            if node["type"] == "conv":
                outputs[name] = self.layers[name].forward(outputs[node["inputs"][0]],
                                                          train=train)
            else:
                outputs[name] = np.concatenate(
                    [outputs[src] for src in node["inputs"]], axis=2)
        self._node_outputs = outputs if train else None
        probs = outputs[self.output_node][:, :, 0]
        return probs[0] if single else probs

    def loss_and_gradients(self, x, targets) -> tuple[float, dict, np.ndarray]:
        """Mean-squared-error loss, per-layer gradients, and the probabilities.

        Gradients are exact: backpropagation through every conv, activation
        and concat, with concat routing gradients additively to its branches.
        """
        probs = self.forward(x, train=True)
        targets = np.asarray(targets, dtype=float)
        if targets.shape != probs.shape:
            raise ValueError(
                f"target shape {targets.shape} does not match output {probs.shape}")
        diff = probs - targets
        loss = float(np.mean(diff * diff))
        grad_top = (2.0 * diff / diff.size)
        if grad_top.ndim == 1:
            grad_top = grad_top[None, :]

        grads: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        pending: dict[str, np.ndarray] = {self.output_node: grad_top[:, :, None]}
        for node in reversed(self.architecture):
            name = node["name"]
            grad_out = pending.pop(name, None)
            if grad_out is None:
                continue
            if node["type"] == "conv":
                grad_in, grad_w, grad_b = self.layers[name].backward(grad_out)
                grads[name] = (grad_w, grad_b)
                src = node["inputs"][0]
                if src != "input":
                    pending[src] = pending.get(src, 0) + grad_in
            else:
                start = 0
                for src in node["inputs"]:
                    width = self._node_outputs[src].shape[2]
                    chunk = grad_out[:, :, start:start + width]
                    pending[src] = pending.get(src, 0) + chunk
                    start += width
        return loss, grads, probs

    # -- persistence ---------------------------------------------------

    def to_state(self) -> dict:
        return {
            "schema_version": 1,
            "architecture": self.architecture,
            "seed": self.seed,
            "weights": {
                name: {"w": layer.weights.ravel().tolist(),
                       "b": layer.bias.tolist()}
                for name, layer in self.layers.items()
            },
            "training_manifest": self.training_manifest,
        }

    @classmethod
    def from_state(cls, state: dict) -> "FcnModel":
        if state.get("schema_version") != 1:
            raise ValueError(
                f"unsupported model schema version {state.get('schema_version')!r}")
        model = cls(state["architecture"], seed=state.get("seed", 0))
        for name, payload in state["weights"].items():
            layer = model.layers[name]
            layer.weights = np.asarray(payload["w"], dtype=float).reshape(
                layer.weights.shape)
            layer.bias = np.asarray(payload["b"], dtype=float)
        model.training_manifest = dict(state.get("training_manifest", {}))
        return model
