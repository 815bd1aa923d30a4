"""
Minimal dense feed-forward network.

Rectified-linear hidden layers, identity output, an explicit reverse-mode
backward pass and clipped plain gradient descent. Every Q-function in the
deep learners is one of these networks.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np

from utils.errors import ContractViolation, WeightsLoadError

WEIGHTS_MAGIC = "SRLW 1"
DEFAULT_CLIP_NORM = 10.0


@dataclass
class DenseLayer:
    """Affine map with weights of shape (out, in) and biases of shape (out,)."""
    weights: np.ndarray
    biases: np.ndarray

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass
class Gradients:
    """Per-layer (d_weights, d_biases), shape-congruent with a DenseNet."""
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def global_norm(self) -> float:
        total = sum(float(np.sum(g * g)) for g in self.weights + self.biases)
        return float(np.sqrt(total))

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(g)) for g in self.weights + self.biases)

    def scaled(self, factor: float) -> "Gradients":
        return Gradients([g * factor for g in self.weights], [g * factor for g in self.biases])

    def flat(self) -> np.ndarray:
        """All components in layer order, weights (row-major) before biases."""
        parts = []
        for dw, db in zip(self.weights, self.biases):
            parts.extend([dw.ravel(), db.ravel()])
        return np.concatenate(parts)


class DenseNet:
    """
    Feed-forward network: ReLU on hidden layers, identity on the output.

    ``forward`` accepts a single vector or a batch of row vectors.
    """

    def __init__(self, layers: Sequence[DenseLayer]):
        if not layers:
            raise ContractViolation("a network needs at least one layer")
        for k in range(1, len(layers)):
            if layers[k].in_dim != layers[k - 1].out_dim:
                raise ContractViolation(
                    f"layer {k} expects {layers[k].in_dim} inputs but layer {k - 1} produces {layers[k - 1].out_dim}"
                )
        for k, layer in enumerate(layers):
            if layer.biases.shape != (layer.out_dim,):
                raise ContractViolation(f"layer {k} bias shape {layer.biases.shape} does not match {layer.out_dim}")
        self.layers = list(layers)

    @property
    def dims(self) -> List[int]:
        return [self.layers[0].in_dim] + [layer.out_dim for layer in self.layers]

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    def forward(self, x: np.ndarray) -> np.ndarray:
        """
        Evaluate the network.

        Args:
            x: Input of shape (in,) or (batch, in)

        Returns:
            Output of shape (out,) or (batch, out)

        Raises:
            ContractViolation: On an input dimension mismatch
        """
        return self._forward(x)[-1]

    def backward(self, x: np.ndarray, output_grad: np.ndarray) -> Gradients:
        """
        Gradients of sum(output * output_grad) with respect to every parameter.

        Batched inputs accumulate (sum) over the batch.

        Args:
            x: Input of shape (in,) or (batch, in)
            output_grad: Upstream gradient, same leading shape as the output

        Raises:
            ContractViolation: On any shape mismatch
        """
        activations = self._forward(x)
        out = activations[-1]
        delta = np.asarray(output_grad, dtype=np.float64)
        if delta.shape != out.shape:
            raise ContractViolation(f"output_grad shape {delta.shape} does not match output shape {out.shape}")
        delta = np.atleast_2d(delta)

        d_weights: List[np.ndarray] = [None] * len(self.layers)
        d_biases: List[np.ndarray] = [None] * len(self.layers)
        for k in range(len(self.layers) - 1, -1, -1):
            inputs = np.atleast_2d(activations[k])
            d_weights[k] = delta.T @ inputs
            d_biases[k] = delta.sum(axis=0)
            if k > 0:
                delta = (delta @ self.layers[k].weights) * (np.atleast_2d(activations[k]) > 0.0)
        return Gradients(d_weights, d_biases)

    def copy(self) -> "DenseNet":
        """Deep copy sharing no arrays with this network."""
        return DenseNet([DenseLayer(layer.weights.copy(), layer.biases.copy()) for layer in self.layers])

    def zero_gradients(self) -> Gradients:
        return Gradients(
            [np.zeros_like(layer.weights) for layer in self.layers],
            [np.zeros_like(layer.biases) for layer in self.layers],
        )

    def parameters_equal(self, other: "DenseNet") -> bool:
        """Bit-for-bit parameter equality."""
        if self.dims != other.dims:
            return False
        return all(
            np.array_equal(a.weights, b.weights) and np.array_equal(a.biases, b.biases)
            for a, b in zip(self.layers, other.layers)
        )

    def _forward(self, x: np.ndarray) -> List[np.ndarray]:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.input_dim or x.ndim not in (1, 2):
            raise ContractViolation(f"input shape {x.shape} does not fit input dimension {self.input_dim}")

        activations = [x]
        h = _input_affine(self.layers[0], x)
        for layer in self.layers[1:]:
            h = np.maximum(h, 0.0)
            activations.append(h)
            h = h @ layer.weights.T + layer.biases
        activations.append(h)
        return activations


def _input_affine(layer: DenseLayer, x: np.ndarray) -> np.ndarray:
    # Accumulate one input column at a time, in index order. Appending
    # zero-weight columns for zero inputs then adds exact zeros, so padded
    # networks reproduce the original outputs bit for bit.
    z = np.broadcast_to(layer.biases, x.shape[:-1] + (layer.out_dim,)).copy()
    for j in range(layer.in_dim):
        z += x[..., j, None] * layer.weights[:, j]
    return z


def init_network(dims: Sequence[int], seed: int) -> DenseNet:
    """
    Fan-based uniform initialization.

    Weights ~ U(-sqrt(6 / (in + out)), +sqrt(6 / (in + out))), biases zero.

    Args:
        dims: Layer widths from input to output, at least two entries
        seed: Generator seed; equal seeds give bit-identical networks
    """
    if len(dims) < 2:
        raise ContractViolation(f"need at least input and output dimensions, got {list(dims)}")
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        layers.append(DenseLayer(
            weights=rng.uniform(-limit, limit, size=(fan_out, fan_in)),
            biases=np.zeros(fan_out),
        ))
    return DenseNet(layers)


def optimizer_step(
    net: DenseNet,
    grads: Gradients,
    lr: float,
    clip_norm: float = DEFAULT_CLIP_NORM,
) -> DenseNet:
    """
    Clipped gradient descent, in place: param <- param - lr * grad.

    Gradients whose global norm exceeds ``clip_norm`` are rescaled to it first.

    Raises:
        ContractViolation: On a negative learning rate, non-finite or
            shape-incongruent gradients
    """
    if lr < 0:
        raise ContractViolation(f"learning rate must be non-negative, got {lr}")
    if len(grads.weights) != len(net.layers):
        raise ContractViolation("gradients do not match the network depth")
    for layer, dw, db in zip(net.layers, grads.weights, grads.biases):
        if dw.shape != layer.weights.shape or db.shape != layer.biases.shape:
            raise ContractViolation("gradient shapes do not match the network")
    if not grads.is_finite():
        raise ContractViolation("gradients contain non-finite values")

    norm = grads.global_norm()
    if norm > clip_norm:
        grads = grads.scaled(clip_norm / norm)
    for layer, dw, db in zip(net.layers, grads.weights, grads.biases):
        layer.weights -= lr * dw
        layer.biases -= lr * db
    return net


def save_weights(net: DenseNet, path: Union[str, Path]) -> Path:
    """
    Write a network in the text weights format.

    ``SRLW 1``, ``dims d0 ... dk``, then per layer a ``W`` line (row-major)
    and a ``b`` line, all values as round-trip decimals.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_weights(net), encoding="utf-8")
    return path


def format_weights(net: DenseNet) -> str:
    lines = [WEIGHTS_MAGIC, "dims " + " ".join(str(d) for d in net.dims)]
    for layer in net.layers:
        lines.append("W " + " ".join(repr(float(v)) for v in layer.weights.ravel()))
        lines.append("b " + " ".join(repr(float(v)) for v in layer.biases))
    return "\n".join(lines) + "\n"


def load_weights(path: Union[str, Path]) -> DenseNet:
    """
    Read a network written by save_weights.

    Raises:
        WeightsLoadError: If the file is missing, malformed, or its value
            counts disagree with the declared dimensions
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise WeightsLoadError(f"cannot read weights {path}: {e}") from e

    if not lines or lines[0] != WEIGHTS_MAGIC:
        raise WeightsLoadError(f"{path}:1: expected header {WEIGHTS_MAGIC!r}")
    if len(lines) < 2 or not lines[1].startswith("dims "):
        raise WeightsLoadError(f"{path}:2: expected a 'dims' line")
    try:
        dims = [int(d) for d in lines[1].split()[1:]]
    except ValueError as e:
        raise WeightsLoadError(f"{path}:2: bad dimensions: {e}") from e
    if len(dims) < 2 or min(dims) < 1:
        raise WeightsLoadError(f"{path}:2: invalid dimensions {dims}")

    expected_lines = 2 + 2 * (len(dims) - 1)
    body = [line for line in lines[2:] if line]
    if len(body) != expected_lines - 2:
        raise WeightsLoadError(
            f"{path}: dims {dims} need {expected_lines - 2} parameter lines, found {len(body)}"
        )

    layers = []
    for k, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        w_line, b_line = 3 + 2 * k, 4 + 2 * k
        weights = _parse_values(path, w_line, body[2 * k], "W", fan_out * fan_in)
        biases = _parse_values(path, b_line, body[2 * k + 1], "b", fan_out)
        layers.append(DenseLayer(weights.reshape(fan_out, fan_in), biases))
    return DenseNet(layers)


def _parse_values(path: Path, number: int, line: str, tag: str, count: int) -> np.ndarray:
    parts = line.split(" ")
    if parts[0] != tag:
        raise WeightsLoadError(f"{path}:{number}: expected a {tag!r} line")
    try:
        values = np.array([float(v) for v in parts[1:]], dtype=np.float64)
    except ValueError as e:
        raise WeightsLoadError(f"{path}:{number}: {e}") from e
    if values.size != count:
        raise WeightsLoadError(f"{path}:{number}: expected {count} values, found {values.size}")
    if not np.all(np.isfinite(values)):
        raise WeightsLoadError(f"{path}:{number}: non-finite parameter")
    return values
