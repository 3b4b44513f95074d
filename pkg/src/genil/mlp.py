"""Small dense network with rectifier hiddens and hand-written backprop.

Gradients are computed analytically layer by layer so they can be checked
against finite differences; no autodiff dependency.  Parameters flatten
row-major per layer (W0, b0, W1, b1, ...) for checkpointing and for the
finite-difference harness.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .seeding import derive_seed


class MLP:
    """widths[0] inputs -> rectifier hiddens -> widths[-1] linear outputs."""

    def __init__(self, widths: list[int], weights: list[np.ndarray], biases: list[np.ndarray]):
        self.widths = list(int(w) for w in widths)
        if len(self.widths) < 2:
            raise ConfigError("MLP needs at least input and output widths")
        if any(w < 1 for w in self.widths):
            raise ConfigError(f"all layer widths must be >= 1, got {self.widths}")
        if len(weights) != len(self.widths) - 1 or len(biases) != len(weights):
            raise ConfigError("parameter count does not match widths")
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (self.widths[i], self.widths[i + 1]) or b.shape != (self.widths[i + 1],):
                raise ConfigError(f"layer {i} parameter shapes do not match widths")
        self.weights = weights
        self.biases = biases

    @classmethod
    def create(cls, widths: list[int], seed: int) -> "MLP":
        """Fan-in-scaled uniform weights in (-1/sqrt(fan_in), 1/sqrt(fan_in)),
        zero biases."""
        rng = np.random.default_rng(derive_seed(seed, "mlp-init"))
        weights, biases = [], []
        for fan_in, fan_out in zip(widths, widths[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(list(widths), weights, biases)

    @property
    def in_dim(self) -> int:
        return self.widths[0]

    @property
    def out_dim(self) -> int:
        return self.widths[-1]

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "MLP":
        return MLP(
            list(self.widths),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    def forward(self, X: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Returns (outputs (n, out_dim), layer input cache for backward)."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.in_dim:
            raise ValueError(f"input has {X.shape[1]} features, model expects {self.in_dim}")
        activations = [X]
        h = X
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.maximum(h, 0.0)
            activations.append(h)
        return h, activations

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.forward(X)[0]

    def backward(
        self, activations: list[np.ndarray], d_out: np.ndarray
    ) -> list[tuple[np.ndarray, np.ndarray]]:
        """Parameter gradients for d(loss)/d(outputs) = d_out (n, out_dim)."""
        grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(self.weights)
        delta = np.asarray(d_out, dtype=np.float64)
        for i in range(len(self.weights) - 1, -1, -1):
            grads[i] = (activations[i].T @ delta, delta.sum(axis=0))
            if i > 0:
                delta = delta @ self.weights[i].T
                # rectifier mask: post-activation is zero exactly where it was clipped
                delta = delta * (activations[i] > 0.0)
        return grads

    # -- flat parameter vector (row-major per layer), for FD checks and files

    def get_flat(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b.ravel())
        return np.concatenate(parts)

    def set_flat(self, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.n_params,):
            raise ConfigError(f"expected {self.n_params} parameters, got {vec.shape}")
        offset = 0
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            self.weights[i] = vec[offset : offset + w.size].reshape(w.shape).copy()
            offset += w.size
            self.biases[i] = vec[offset : offset + b.size].copy()
            offset += b.size

    def apply_grads(self, grads, learning_rate: float, l2: float = 0.0) -> None:
        """One gradient-descent step; l2 penalizes weights only."""
        for i, (dw, db) in enumerate(grads):
            step_w = dw if l2 == 0.0 else dw + l2 * self.weights[i]
            self.weights[i] = self.weights[i] - learning_rate * step_w
            self.biases[i] = self.biases[i] - learning_rate * db

    def to_dict(self) -> dict:
        return {
            "widths": list(self.widths),
            "activation": "relu",
            "params": [float(v) for v in self.get_flat()],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MLP":
        if data.get("activation") != "relu":
            raise ConfigError(f"unsupported activation {data.get('activation')!r}")
        widths = [int(w) for w in data["widths"]]
        model = cls.create(widths, seed=0)
        model.set_flat(np.asarray(data["params"], dtype=np.float64))
        return model


def flat_grads(model: MLP, grads) -> np.ndarray:
    """Flatten a backward() result in the same order as get_flat()."""
    parts = []
    for dw, db in grads:
        parts.append(np.asarray(dw).ravel())
        parts.append(np.asarray(db).ravel())
    return np.concatenate(parts)
