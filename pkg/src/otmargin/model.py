"""Scalar reward heads, the margin-adjusted ranking loss, and its gradients.

The head is a small scorer over precomputed feature vectors: either linear
or a single tanh hidden layer.  Gradients are closed form rather than
autodiff so the per-sample update factor sigmoid(s - mu) - 1 is directly
inspectable and testable against finite differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from .errors import DimensionMismatchError, InvalidConfigError, ParseError, ShapeMismatchError
from .margin import MarginVector

ARCHITECTURES = ("linear", "tanh")


@dataclass(frozen=True)
class RewardHead:
    """Immutable parameters of a scalar-valued scorer.

    ``params`` maps parameter names to arrays: ``w``/``b`` for the linear
    head, ``w1``/``b1``/``w2``/``b2`` for the tanh head.
    """

    input_dim: int
    architecture: str
    params: dict[str, np.ndarray]

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise InvalidConfigError(f"unknown architecture {self.architecture!r}")
        if self.input_dim < 1:
            raise InvalidConfigError(f"input_dim must be >= 1, got {self.input_dim}")
        params = {k: np.asarray(v, dtype=float) for k, v in self.params.items()}
        object.__setattr__(self, "params", params)
        expected = {"w", "b"} if self.architecture == "linear" else {"w1", "b1", "w2", "b2"}
        if set(params) != expected:
            raise InvalidConfigError(f"expected parameters {sorted(expected)}, got {sorted(params)}")
        for name, value in params.items():
            if not np.isfinite(value).all():
                raise InvalidConfigError(f"parameter {name!r} contains non-finite values")

    @property
    def hidden_dim(self) -> int | None:
        if self.architecture == "tanh":
            return int(self.params["w2"].size)
        return None


@dataclass(frozen=True)
class LossReport:
    """Batch loss plus per-sample diagnostics.

    ``per_sample_update_signal`` is 1 - sigmoid(s - mu): the magnitude of the
    pressure to widen the reward gap of each sample.
    """

    loss: float
    per_sample_losses: np.ndarray
    per_sample_update_signal: np.ndarray


def initialize_head(
    input_dim: int,
    architecture: str = "linear",
    hidden_dim: int = 16,
    seed: int = 0,
    scale: float = 0.01,
) -> RewardHead:
    """Draw a small random head; biases start at zero."""
    rng = np.random.default_rng(seed)
    if architecture == "linear":
        params = {"w": scale * rng.standard_normal(input_dim), "b": np.float64(0.0)}
    elif architecture == "tanh":
        if hidden_dim < 1:
            raise InvalidConfigError(f"hidden_dim must be >= 1, got {hidden_dim}")
        params = {
            "w1": scale * rng.standard_normal((hidden_dim, input_dim)),
            "b1": np.zeros(hidden_dim),
            "w2": scale * rng.standard_normal(hidden_dim),
            "b2": np.float64(0.0),
        }
    else:
        raise InvalidConfigError(f"unknown architecture {architecture!r}")
    return RewardHead(input_dim, architecture, params)


def reward_batch(head: RewardHead, features: np.ndarray) -> np.ndarray:
    """Score a (n, input_dim) feature matrix; returns n rewards."""
    x = np.asarray(features, dtype=float)
    if x.ndim != 2 or x.shape[1] != head.input_dim:
        raise DimensionMismatchError(
            f"features must have shape (n, {head.input_dim}), got {x.shape}"
        )
    p = head.params
    if head.architecture == "linear":
        return x @ p["w"] + p["b"]
    hidden = np.tanh(x @ p["w1"].T + p["b1"])
    return hidden @ p["w2"] + p["b2"]


def reward(head: RewardHead, features) -> float:
    """Score a single feature vector."""
    x = np.asarray(features, dtype=float)
    if x.ndim != 1 or x.size != head.input_dim:
        raise DimensionMismatchError(f"expected a length-{head.input_dim} vector, got shape {x.shape}")
    return float(reward_batch(head, x[None, :])[0])


def _margin_values(margins, n: int) -> np.ndarray:
    values = margins.values if isinstance(margins, MarginVector) else np.asarray(margins, dtype=float)
    if values.shape != (n,):
        raise ShapeMismatchError(f"expected {n} margins, got shape {values.shape}")
    return values


def bt_margin_loss(rewards_chosen, rewards_rejected, margins) -> LossReport:
    """Margin-adjusted pairwise ranking loss.

    Per sample: -ln sigmoid(s - mu) with s the chosen-minus-rejected reward,
    evaluated as softplus(mu - s) so large gaps neither overflow nor lose the
    loss floor.  The batch loss is the plain mean.
    """
    rw = np.asarray(rewards_chosen, dtype=float)
    rl = np.asarray(rewards_rejected, dtype=float)
    if rw.shape != rl.shape or rw.ndim != 1:
        raise ShapeMismatchError(f"reward vectors must share one length, got {rw.shape} vs {rl.shape}")
    if not (np.isfinite(rw).all() and np.isfinite(rl).all()):
        raise ShapeMismatchError("reward vectors must be finite")
    mu = _margin_values(margins, rw.size)
    x = (rw - rl) - mu
    per_sample = np.logaddexp(0.0, -x)
    update_signal = expit(-x)
    return LossReport(float(per_sample.mean()), per_sample, update_signal)


def loss_gradients(head: RewardHead, chosen_features, rejected_features, margins) -> dict[str, np.ndarray]:
    """Gradient of the batch loss w.r.t. every head parameter.

    Margins are treated as constants.  The per-sample backprop factor is
    (sigmoid(s - mu) - 1) / B, applied to the feature-side derivative of the
    reward gap.  Keys mirror ``head.params``.
    """
    xc = np.asarray(chosen_features, dtype=float)
    xr = np.asarray(rejected_features, dtype=float)
    if xc.shape != xr.shape or xc.ndim != 2 or xc.shape[1] != head.input_dim:
        raise DimensionMismatchError(
            f"batch features must both have shape (B, {head.input_dim}), got {xc.shape} vs {xr.shape}"
        )
    b = xc.shape[0]
    rc = reward_batch(head, xc)
    rr = reward_batch(head, xr)
    x = (rc - rr) - _margin_values(margins, b)
    coeff = -expit(-x) / b  # sigmoid(s - mu) - 1, averaged over the batch

    p = head.params
    if head.architecture == "linear":
        return {"w": (xc - xr).T @ coeff, "b": np.float64(0.0)}

    hc = np.tanh(xc @ p["w1"].T + p["b1"])
    hr = np.tanh(xr @ p["w1"].T + p["b1"])
    ac = (1.0 - hc**2) * coeff[:, None]
    ar = (1.0 - hr**2) * coeff[:, None]
    return {
        "w1": p["w2"][:, None] * (ac.T @ xc - ar.T @ xr),
        "b1": p["w2"] * (ac.sum(axis=0) - ar.sum(axis=0)),
        "w2": (hc - hr).T @ coeff,
        "b2": np.float64(0.0),
    }


def head_to_json(head: RewardHead) -> dict:
    doc = {
        "architecture": head.architecture,
        "input_dim": head.input_dim,
        "weights": {k: v.tolist() for k, v in head.params.items()},
    }
    if head.architecture == "tanh":
        doc["hidden_dim"] = head.hidden_dim
    return doc


def head_from_json(doc: dict) -> RewardHead:
    try:
        arch = doc["architecture"]
        input_dim = int(doc["input_dim"])
        weights = doc["weights"]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed head document: missing {exc}") from exc
    params = {k: np.asarray(v, dtype=float) for k, v in weights.items()}
    return RewardHead(input_dim, arch, params)


def save_head(head: RewardHead, path) -> None:
    Path(path).write_text(json.dumps(head_to_json(head), indent=2) + "\n", encoding="utf-8")


def load_head(path) -> RewardHead:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    return head_from_json(doc)
