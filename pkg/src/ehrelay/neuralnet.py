"""Dense feed-forward value network with hand-written backpropagation.

Double precision throughout. The network maps an observation vector to one
action value per link action; hidden layers use the rectifier, the output is
affine. Gradients are exact reverse-mode derivatives of the squared
temporal-difference error of a single selected output unit.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

CHECKPOINT_FORMAT = 1


@dataclass(frozen=True)
class Architecture:
    input_dim: int
    hidden_dims: tuple = (80,)
    output_dim: int = 1

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims",
                           tuple(int(h) for h in self.hidden_dims))
        dims = (self.input_dim, *self.hidden_dims, self.output_dim)
        if any(d < 1 for d in dims):
            raise ValueError(f"all layer dims must be >= 1, got {dims}")

    @property
    def layer_dims(self) -> tuple:
        return (self.input_dim, *self.hidden_dims, self.output_dim)


@dataclass
class QNetworkParams:
    """Per-layer weight matrices (in_dim x out_dim) and bias vectors."""

    arch: Architecture
    weights: list  # list[np.ndarray]
    biases: list  # list[np.ndarray]


@dataclass
class GradientSet:
    """Accumulated parameter change, shape-matched to QNetworkParams."""

    weights: list
    biases: list

    @classmethod
    def zeros_like(cls, params: QNetworkParams) -> "GradientSet":
        return cls(
            weights=[np.zeros_like(w) for w in params.weights],
            biases=[np.zeros_like(b) for b in params.biases],
        )

    def scale(self, factor: float) -> "GradientSet":
        return GradientSet(
            weights=[w * factor for w in self.weights],
            biases=[b * factor for b in self.biases],
        )


def init_network(arch: Architecture, rng: np.random.Generator) -> QNetworkParams:
    """Zero-mean scaled-uniform weights (bound sqrt(6/(fan_in+fan_out))),
    zero biases."""
    weights = []
    biases = []
    dims = arch.layer_dims
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return QNetworkParams(arch=arch, weights=weights, biases=biases)


def forward(params: QNetworkParams, x: np.ndarray) -> np.ndarray:
    """Action values for one observation (1-D input, 1-D output)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.arch.input_dim,):
        raise ValueError(
            f"input shape {x.shape} != ({params.arch.input_dim},)")
    a = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        a = a @ w + b
        if i < last:
            np.maximum(a, 0.0, out=a)
    return a


def forward_batch(params: QNetworkParams, xs: np.ndarray) -> np.ndarray:
    """Action values for a batch of observations (rows)."""
    if xs.ndim != 2 or xs.shape[1] != params.arch.input_dim:
        raise ValueError(
            f"input shape {xs.shape} != (batch, {params.arch.input_dim})")
    a = xs
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        a = a @ w + b
        if i < last:
            np.maximum(a, 0.0, out=a)
    return a


def _forward_cached(params: QNetworkParams, xs: np.ndarray):
    """Batch forward pass keeping post-activation layer outputs for backprop."""
    acts = [xs]
    a = xs
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        a = a @ w + b
        if i < last:
            np.maximum(a, 0.0, out=a)
        acts.append(a)
    return a, acts


def weighted_td_loss(pred_q: float, target_y: float,
                     weight: float) -> tuple[float, float]:
    """Squared error of one transition and its weighted derivative.

    Returns (loss, dloss_dpred) with loss = (y - q)^2 unweighted (it feeds
    the replay priority) and dloss_dpred = -2 w (y - q), the importance-
    weighted derivative with respect to the selected action value.
    """
    err = target_y - pred_q
    return err * err, -2.0 * weight * err


def backward(params: QNetworkParams, x: np.ndarray, selected_action: int,
             upstream: float) -> GradientSet:
    """Gradients of the scalar loss for one input.

    `upstream` is dloss/dpred for the selected output unit; all other output
    units carry zero sensitivity.
    """
    xs = np.asarray(x, dtype=np.float64).reshape(1, -1)
    return backward_batch(params, xs, np.array([selected_action]),
                          np.array([float(upstream)]))


def backward_batch(params: QNetworkParams, xs: np.ndarray,
                   actions: np.ndarray, upstreams: np.ndarray,
                   acts: Optional[list] = None) -> GradientSet:
    """Sum of per-sample loss gradients over a batch.

    `acts` may carry the cached activations of a previous forward pass on the
    same inputs; otherwise the pass is recomputed.
    """
    if acts is None:
        _, acts = _forward_cached(params, xs)
    n_layers = len(params.weights)
    out_dim = params.arch.output_dim
    batch = xs.shape[0]
    delta = np.zeros((batch, out_dim))
    delta[np.arange(batch), actions] = upstreams
    g_w = [None] * n_layers
    g_b = [None] * n_layers
    for i in range(n_layers - 1, -1, -1):
        g_w[i] = acts[i].T @ delta
        g_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i].T) * (acts[i] > 0.0)
    return GradientSet(weights=g_w, biases=g_b)


def apply_update(params: QNetworkParams, accumulated: GradientSet,
                 mu: float) -> QNetworkParams:
    """In-place step theta <- theta + mu * delta.

    The accumulated change already carries the descent sign (it sums
    importance-weighted negative gradients), so a positive mu descends.
    """
    for w, dw in zip(params.weights, accumulated.weights):
        if not np.all(np.isfinite(dw)):
            raise FloatingPointError("non-finite weight update")
        w += mu * dw
    for b, db in zip(params.biases, accumulated.biases):
        if not np.all(np.isfinite(db)):
            raise FloatingPointError("non-finite bias update")
        b += mu * db
    return params


def clone_params(params: QNetworkParams) -> QNetworkParams:
    """Deep copy; the clone is unaffected by later updates to the source."""
    return QNetworkParams(
        arch=params.arch,
        weights=[w.copy() for w in params.weights],
        biases=[b.copy() for b in params.biases],
    )


class SgdOptimizer:
    """Plain first-order step with constant step size."""

    def __init__(self, mu: float):
        self.mu = mu

    def apply(self, params: QNetworkParams, delta: GradientSet) -> None:
        apply_update(params, delta, self.mu)


class AdamOptimizer:
    """Adaptive-moment step applied to the accumulated (ascent-signed)
    change; optional alternative when the plain step will not converge."""

    def __init__(self, mu: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.mu = mu
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self._m: Optional[GradientSet] = None
        self._v: Optional[GradientSet] = None
        self._t = 0

    def apply(self, params: QNetworkParams, delta: GradientSet) -> None:
        if self._m is None:
            self._m = GradientSet.zeros_like(params)
            self._v = GradientSet.zeros_like(params)
        self._t += 1
        b1, b2 = self.beta1, self.beta2
        corr1 = 1.0 - b1 ** self._t
        corr2 = 1.0 - b2 ** self._t
        for group in ("weights", "biases"):
            ps = getattr(params, group)
            ds = getattr(delta, group)
            ms = getattr(self._m, group)
            vs = getattr(self._v, group)
            for p, d, m, v in zip(ps, ds, ms, vs):
                if not np.all(np.isfinite(d)):
                    raise FloatingPointError("non-finite update")
                m *= b1
                m += (1.0 - b1) * d
                v *= b2
                v += (1.0 - b2) * (d * d)
                p += self.mu * (m / corr1) / (np.sqrt(v / corr2) + self.eps)


def make_optimizer(name: str, mu: float):
    if name == "sgd":
        return SgdOptimizer(mu)
    if name == "adam":
        return AdamOptimizer(mu)
    raise ValueError(f"unknown optimizer {name!r}")


def save_params(params: QNetworkParams, path) -> None:
    """Write a checkpoint: format version, architecture, flat arrays.
    Round-trips bit-identically."""
    payload = {
        "format_version": np.array(CHECKPOINT_FORMAT, dtype=np.int64),
        "input_dim": np.array(params.arch.input_dim, dtype=np.int64),
        "hidden_dims": np.array(params.arch.hidden_dims, dtype=np.int64),
        "output_dim": np.array(params.arch.output_dim, dtype=np.int64),
    }
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        payload[f"w{i}"] = w
        payload[f"b{i}"] = b
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_params(path) -> QNetworkParams:
    with np.load(path) as data:
        version = int(data["format_version"])
        if version != CHECKPOINT_FORMAT:
            raise ValueError(f"unsupported checkpoint format {version}")
        arch = Architecture(
            input_dim=int(data["input_dim"]),
            hidden_dims=tuple(int(h) for h in data["hidden_dims"]),
            output_dim=int(data["output_dim"]),
        )
        n_layers = len(arch.hidden_dims) + 1
        weights = [data[f"w{i}"].astype(np.float64) for i in range(n_layers)]
        biases = [data[f"b{i}"].astype(np.float64) for i in range(n_layers)]
    return QNetworkParams(arch=arch, weights=weights, biases=biases)
