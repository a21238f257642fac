"""Small fully-connected networks with exact backprop and seeded Adam training.

A network with L hidden layers of width M maps R^d -> R^K through L+1 affine
maps with the activation applied after each hidden affine map and never after
the output map. Supported activations: tanh, relu, leaky_relu (slope 0.2).

Training follows a fixed protocol: N(0, 0.01) initialization from a seeded
generator (default seed 0), mini-batch Adam with an exponentially decaying
step size, batches of size min(m, 256), a stopping tolerance on the training
loss, and checkpoints saved each time the loss drops to 1/16 of the previous
checkpoint; the returned parameters are those of the lowest recorded loss.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .hilbert import DiscreteHilbertSpace

LEAKY_SLOPE = 0.2
GRAD_CLIP_NORM = 1e3


def _activation(tag: str):
    if tag == "tanh":
        return np.tanh, lambda z: 1.0 - np.tanh(z) ** 2
    if tag == "relu":
        return (
            lambda z: np.maximum(z, 0.0),
            lambda z: (z > 0).astype(float),
        )
    if tag == "leaky_relu":
        return (
            lambda z: np.where(z > 0, z, LEAKY_SLOPE * z),
            lambda z: np.where(z > 0, 1.0, LEAKY_SLOPE),
        )
    raise ValueError(f"unknown activation {tag!r}")


@dataclass
class MLPModel:
    """Affine-map weights/biases and the activation tag."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "tanh"

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("weights and biases must be nonempty parallel lists")
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or b.shape != (W.shape[1],):
                raise ValueError(f"bad shapes in layer {l}")
            if l > 0 and W.shape[0] != self.weights[l - 1].shape[1]:
                raise ValueError(f"width mismatch between layers {l-1} and {l}")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise ValueError(f"non-finite parameters in layer {l}")
        _activation(self.activation)

    @property
    def widths(self) -> list[int]:
        return [self.weights[0].shape[0]] + [W.shape[1] for W in self.weights]

    @property
    def n_hidden_layers(self) -> int:
        return len(self.weights) - 1

    def copy(self) -> "MLPModel":
        return MLPModel(
            [W.copy() for W in self.weights],
            [b.copy() for b in self.biases],
            self.activation,
        )


def model_widths(d: int, hidden_layers: int, width: int, K: int) -> list[int]:
    """Widths [d, M, ..., M, K] of an L-hidden-layer, width-M network."""
    return [d] + [width] * hidden_layers + [K]


def init_model(widths, activation: str = "tanh", seed: int = 0) -> MLPModel:
    """All weights and biases drawn i.i.d. N(0, 0.01) from a seeded generator."""
    widths = list(widths)
    if len(widths) < 2:
        raise ValueError("need at least input and output widths")
    rng = np.random.default_rng(seed)
    std = 0.1  # variance 0.01
    weights, biases = [], []
    for n_in, n_out in zip(widths[:-1], widths[1:]):
        weights.append(std * rng.standard_normal((n_in, n_out)))
        biases.append(std * rng.standard_normal(n_out))
    return MLPModel(weights, biases, activation)


def forward(model: MLPModel, y) -> np.ndarray:
    """Network output for one point (1-D input) or a batch of points."""
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    out = _forward_cached(model, np.atleast_2d(y))[0][-1]
    return out[0] if single else out


def _forward_cached(model: MLPModel, Y: np.ndarray):
    """Forward pass keeping activations and pre-activations for backprop."""
    act, _ = _activation(model.activation)
    activations = [Y]
    preacts = []
    h = Y
    n_layers = len(model.weights)
    for l, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ W + b
        preacts.append(z)
        h = act(z) if l < n_layers - 1 else z
        activations.append(h)
    return activations, preacts


def loss_mse(model: MLPModel, Y, C) -> float:
    """Mean over samples of the squared Euclidean coefficient residual."""
    Y, C = np.atleast_2d(Y), np.atleast_2d(C)
    if len(Y) == 0:
        raise ValueError("empty batch")
    r = forward(model, Y) - C
    return float((r**2).sum() / len(Y))


def loss_mvnse(model: MLPModel, Y, C, space: DiscreteHilbertSpace) -> float:
    """Mean over samples of the squared Gram-weighted (V-norm) residual."""
    Y, C = np.atleast_2d(Y), np.atleast_2d(C)
    if len(Y) == 0:
        raise ValueError("empty batch")
    if space.dim != C.shape[1]:
        raise ValueError("space dimension does not match output width")
    r = forward(model, Y) - C
    return float(np.einsum("ij,ij->", r, space.apply_gram(r)) / len(Y))


def backward(model: MLPModel, Y, C, loss: str = "mse", space: DiscreteHilbertSpace | None = None):
    """Exact gradients of the selected loss for every weight and bias.

    Returns (grads_W, grads_b, loss_value). For the Gram-weighted loss the
    output-layer residual is multiplied by G; with G = I both losses and
    their gradients coincide.
    """
    Y, C = np.atleast_2d(np.asarray(Y, float)), np.atleast_2d(np.asarray(C, float))
    m = len(Y)
    if m == 0:
        raise ValueError("empty batch")
    activations, preacts = _forward_cached(model, Y)
    r = activations[-1] - C
    if loss == "mse":
        value = float((r**2).sum() / m)
        delta = 2.0 * r / m
    elif loss == "mvnse":
        if space is None:
            raise ValueError("mvnse loss requires a space")
        gr = space.apply_gram(r)
        value = float(np.einsum("ij,ij->", r, gr) / m)
        delta = 2.0 * gr / m
    else:
        raise ValueError(f"unknown loss {loss!r}")

    _, dact = _activation(model.activation)
    n_layers = len(model.weights)
    grads_W = [None] * n_layers
    grads_b = [None] * n_layers
    for l in range(n_layers - 1, -1, -1):
        grads_W[l] = activations[l].T @ delta
        grads_b[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ model.weights[l].T) * dact(preacts[l - 1])
    return grads_W, grads_b, value


@dataclass
class TrainConfig:
    """Training protocol parameters (see the module docstring)."""

    loss: str = "mse"
    epochs: int = 50_000
    tol: float = 5e-7
    batch_size: int | None = None  # None -> min(m, 256)
    lr: float = 1e-3
    lr_decay: float = 0.99
    decay_every: int = 1000
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    precision: str = "double"  # or "single"
    checkpoint_ratio: float = 1.0 / 16.0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not 0 < self.lr_decay <= 1.0:
            raise ValueError("lr_decay must lie in (0, 1]")
        if self.loss not in ("mse", "mvnse"):
            raise ValueError("loss must be 'mse' or 'mvnse'")
        if self.precision not in ("double", "single"):
            raise ValueError("precision must be 'double' or 'single'")


@dataclass
class Checkpoint:
    epoch: int
    loss: float
    weights: list[np.ndarray] = field(repr=False)
    biases: list[np.ndarray] = field(repr=False)


@dataclass
class TrainHistory:
    losses: np.ndarray
    checkpoints: list[Checkpoint]
    epochs_run: int
    stopped_early: bool


def _full_loss(model, Y, C, config, space):
    if config.loss == "mse":
        return loss_mse(model, Y, C)
    return loss_mvnse(model, Y, C, space)


def _clip_gradients(grads_W, grads_b, epoch):
    total = 0.0
    for g in grads_W + grads_b:
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient at epoch {epoch}")
        total += float((g**2).sum())
    norm = np.sqrt(total)
    if norm > GRAD_CLIP_NORM:
        warnings.warn(
            f"gradient norm {norm:.3e} clipped to {GRAD_CLIP_NORM:.0e} at epoch {epoch}",
            RuntimeWarning,
        )
        scale = GRAD_CLIP_NORM / norm
        grads_W = [g * scale for g in grads_W]
        grads_b = [g * scale for g in grads_b]
    return grads_W, grads_b


def train(
    model: MLPModel,
    dataset,
    config: TrainConfig | None = None,
    space: DiscreteHilbertSpace | None = None,
):
    """Seeded mini-batch Adam with checkpointing; returns (best model, history).

    ``dataset`` is a pair (Y, C) of arrays with shapes (m, d) and (m, K).
    The loss recorded per epoch is the full training loss. Training stops
    early once it falls below ``config.tol``. The returned model carries the
    parameters of the lowest full-loss point ever recorded (checkpoints are
    saved on 16x improvements; the best iterate is tracked every epoch).
    """
    config = config or TrainConfig()
    Y, C = dataset
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    m = len(Y)
    if m == 0:
        raise ValueError("empty dataset")
    if config.loss == "mvnse" and space is None:
        raise ValueError("mvnse loss requires a space")
    model = model.copy()
    if config.precision == "single":
        Y, C = Y.astype(np.float32), C.astype(np.float32)
        model.weights = [W.astype(np.float32) for W in model.weights]
        model.biases = [b.astype(np.float32) for b in model.biases]
    batch = config.batch_size or min(m, 256)
    rng = np.random.default_rng(config.seed)

    mom_W = [np.zeros_like(W) for W in model.weights]
    mom_b = [np.zeros_like(b) for b in model.biases]
    vel_W = [np.zeros_like(W) for W in model.weights]
    vel_b = [np.zeros_like(b) for b in model.biases]
    step = 0

    losses = []
    checkpoints: list[Checkpoint] = []
    best = Checkpoint(-1, np.inf, [W.copy() for W in model.weights], [b.copy() for b in model.biases])
    last_checkpoint_loss = np.inf
    stopped_early = False
    epoch = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(m)
        for start in range(0, m, batch):
            idx = order[start : start + batch]
            grads_W, grads_b, batch_loss = backward(
                model, Y[idx], C[idx], config.loss, space
            )
            if not np.isfinite(batch_loss):
                raise FloatingPointError(
                    f"non-finite training loss at epoch {epoch}; aborting"
                )
            grads_W, grads_b = _clip_gradients(grads_W, grads_b, epoch)
            step += 1
            lr_t = config.lr * config.lr_decay ** (step // config.decay_every)
            bc1 = 1.0 - config.beta1**step
            bc2 = 1.0 - config.beta2**step
            for l in range(len(model.weights)):
                for mom, vel, g, p in (
                    (mom_W[l], vel_W[l], grads_W[l], model.weights[l]),
                    (mom_b[l], vel_b[l], grads_b[l], model.biases[l]),
                ):
                    mom *= config.beta1
                    mom += (1.0 - config.beta1) * g
                    vel *= config.beta2
                    vel += (1.0 - config.beta2) * g**2
                    p -= lr_t * (mom / bc1) / (np.sqrt(vel / bc2) + config.eps)
        full = _full_loss(model, Y, C, config, space)
        if not np.isfinite(full):
            raise FloatingPointError(f"non-finite training loss at epoch {epoch}; aborting")
        losses.append(full)
        if full < best.loss:
            best = Checkpoint(
                epoch, full, [W.copy() for W in model.weights], [b.copy() for b in model.biases]
            )
        if full <= config.checkpoint_ratio * last_checkpoint_loss:
            checkpoints.append(
                Checkpoint(epoch, full, [W.copy() for W in model.weights], [b.copy() for b in model.biases])
            )
            last_checkpoint_loss = full
        if full < config.tol:
            stopped_early = True
            break

    best_model = MLPModel(
        [W.copy() for W in best.weights], [b.copy() for b in best.biases], model.activation
    )
    history = TrainHistory(
        losses=np.asarray(losses),
        checkpoints=checkpoints,
        epochs_run=epoch,
        stopped_early=stopped_early,
    )
    return best_model, history
