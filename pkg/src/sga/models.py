"""Linear-propagation surrogate and two-layer GCN victim.

Both models share the symmetric normalization D^{-1/2}(A+I)D^{-1/2} with
D = diag(degree + 1) and are trained by full-batch gradient descent with
manually coded gradients. No bias terms anywhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .graph import Graph, Split


@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 200
    weight_decay: float = 5e-5
    seed: int = 0
    early_stop_patience: int = 50


def default_train_config(kind: str, seed: int = 0) -> TrainConfig:
    """Per-model defaults: lr 0.1 for the linear surrogate, 0.01 for the GCN."""
    if kind == "sgc":
        return TrainConfig(learning_rate=0.1, seed=seed)
    if kind == "gcn":
        return TrainConfig(learning_rate=0.01, seed=seed)
    raise ValueError(f"unknown model kind: {kind}")


@dataclass
class SurrogateModel:
    """Collapsed k-step linear model: logits = A_hat^k X W / epsilon."""

    W: np.ndarray
    k: int
    epsilon: float = 1.0


@dataclass
class GcnModel:
    """Two-layer GCN: logits = A_hat relu(A_hat X W0) W1."""

    W0: np.ndarray
    W1: np.ndarray
    hidden: int


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def normalized_propagate(g: Graph, k: int, M: np.ndarray) -> np.ndarray:
    """Apply the normalized adjacency k times: A_hat^k M."""
    if k < 0:
        raise ValueError("k must be >= 0")
    P = g.normalized_adjacency()
    out = np.asarray(M, dtype=np.float64)
    for _ in range(k):
        out = P @ out
    return out


def _mean_cross_entropy(probs: np.ndarray, labels: np.ndarray, idx: np.ndarray) -> float:
    p = probs[idx, labels[idx]]
    return float(-np.log(np.clip(p, 1e-300, None)).mean())


def _ce_rows(probs: np.ndarray, y: np.ndarray) -> float:
    p = probs[np.arange(y.size), y]
    return float(-np.log(np.clip(p, 1e-300, None)).mean())


def _validate_split(g: Graph, split: Split) -> None:
    if split.train.size == 0:
        raise ValueError("empty training set")
    for part in (split.train, split.validation, split.test):
        if part.size and (part.min() < 0 or part.max() >= g.n):
            raise ValueError("split references node outside graph")


def _check_config(cfg: TrainConfig) -> None:
    if cfg.learning_rate <= 0 or cfg.epochs < 1 or cfg.weight_decay < 0:
        raise ValueError(f"bad training configuration: {cfg}")


def train_sgc(g: Graph, split: Split, k: int, cfg: TrainConfig) -> SurrogateModel:
    """Fit the collapsed linear model on the training nodes.

    Minimizes mean cross-entropy plus (wd/2)||W||^2 by plain gradient
    descent, restoring the weights with the best validation loss when
    early stopping is enabled. epsilon stays 1 during training; the
    calibrated temperature is applied at attack time. The per-epoch
    training loss is attached as ``model.history``.
    """
    _validate_split(g, split)
    _check_config(cfg)
    S = normalized_propagate(g, k, g.features)
    F, C = g.num_features, g.num_classes
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, F, C]))
    bound = 1.0 / np.sqrt(F)
    W = rng.uniform(-bound, bound, size=(F, C))

    tr, va = split.train, split.validation
    St, Sv = S[tr], S[va]
    yt = g.labels[tr]
    onehot = np.zeros((tr.size, C))
    onehot[np.arange(tr.size), yt] = 1.0

    best_val = np.inf
    best_W = W.copy()
    stall = 0
    history = []
    for _ in range(cfg.epochs):
        probs = softmax(St @ W)
        # overflow to inf is the divergence signal, not an error in itself
        with np.errstate(over="ignore"):
            loss = _ce_rows(probs, yt) + 0.5 * cfg.weight_decay * (W * W).sum()
        if not np.isfinite(loss):
            raise ValueError("training diverged (non-finite loss)")
        history.append(loss)
        grad = St.T @ (probs - onehot) / tr.size + cfg.weight_decay * W
        W -= cfg.learning_rate * grad
        if va.size and cfg.early_stop_patience > 0:
            val = _ce_rows(softmax(Sv @ W), g.labels[va])
            if val < best_val - 1e-12:
                best_val, best_W, stall = val, W.copy(), 0
            else:
                stall += 1
                if stall >= cfg.early_stop_patience:
                    break
    if va.size and cfg.early_stop_patience > 0:
        W = best_W
    m = SurrogateModel(W=W, k=k, epsilon=1.0)
    m.history = np.asarray(history)
    return m


def predict_full(g: Graph, m: SurrogateModel) -> np.ndarray:
    """Class probabilities for every node, softmax(A_hat^k X W / epsilon)."""
    logits = normalized_propagate(g, m.k, g.features @ m.W) / m.epsilon
    return softmax(logits)


def train_gcn(g: Graph, split: Split, hidden: int, cfg: TrainConfig) -> GcnModel:
    """Fit the two-layer GCN with manual backprop.

    Gradients: with P = A_hat, H = relu(P X W0), Z = softmax(P H W1) and
    delta = (Z - Y)/|train| on training rows,
        dW1 = H^T P delta,  dW0 = X^T P (delta W1^T * 1[H > 0])
    using P symmetric. Weight decay applies to both layers.
    """
    _validate_split(g, split)
    _check_config(cfg)
    if hidden < 1:
        raise ValueError("hidden width must be >= 1")
    P = g.normalized_adjacency()
    X = g.features
    F, C = g.num_features, g.num_classes
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, F, hidden, C]))
    W0 = rng.uniform(-1.0 / np.sqrt(F), 1.0 / np.sqrt(F), size=(F, hidden))
    W1 = rng.uniform(-1.0 / np.sqrt(hidden), 1.0 / np.sqrt(hidden), size=(hidden, C))

    tr, va = split.train, split.validation
    onehot = np.zeros((tr.size, C))
    onehot[np.arange(tr.size), g.labels[tr]] = 1.0

    best_val = np.inf
    best = (W0.copy(), W1.copy())
    stall = 0
    history = []
    for _ in range(cfg.epochs):
        H1 = P @ (X @ W0)
        A1 = np.maximum(H1, 0.0)
        logits = P @ (A1 @ W1)
        probs_tr = softmax(logits[tr])
        with np.errstate(over="ignore"):
            loss = _mean_cross_entropy(softmax(logits), g.labels, tr) + 0.5 * cfg.weight_decay * (
                (W0 * W0).sum() + (W1 * W1).sum()
            )
        if not np.isfinite(loss):
            raise ValueError("training diverged (non-finite loss)")
        history.append(loss)

        delta = np.zeros((g.n, C))
        delta[tr] = (probs_tr - onehot) / tr.size
        Pd = P @ delta
        dW1 = A1.T @ Pd + cfg.weight_decay * W1
        dH = (Pd @ W1.T) * (H1 > 0)
        dW0 = X.T @ (P @ dH) + cfg.weight_decay * W0
        W1 -= cfg.learning_rate * dW1
        W0 -= cfg.learning_rate * dW0

        if va.size and cfg.early_stop_patience > 0:
            H1 = np.maximum(P @ (X @ W0), 0.0)
            val = _mean_cross_entropy(softmax(P @ (H1 @ W1)), g.labels, va)
            if val < best_val - 1e-12:
                best_val, best, stall = val, (W0.copy(), W1.copy()), 0
            else:
                stall += 1
                if stall >= cfg.early_stop_patience:
                    break
    if va.size and cfg.early_stop_patience > 0:
        W0, W1 = best
    m = GcnModel(W0=W0, W1=W1, hidden=hidden)
    m.history = np.asarray(history)
    return m


def predict_gcn(g: Graph, m: GcnModel) -> np.ndarray:
    P = g.normalized_adjacency()
    H1 = np.maximum(P @ (g.features @ m.W0), 0.0)
    return softmax(P @ (H1 @ m.W1))


def predict(g: Graph, model) -> np.ndarray:
    """Probability matrix for either model kind."""
    if isinstance(model, SurrogateModel):
        return predict_full(g, model)
    if isinstance(model, GcnModel):
        return predict_gcn(g, model)
    raise TypeError(f"unsupported model type: {type(model).__name__}")


def classification_margin(probs_row: np.ndarray, c: int) -> float:
    """p_c minus the best competing probability; negative = misclassified."""
    rest = np.delete(probs_row, c)
    return float(probs_row[c] - rest.max())


def with_epsilon(m: SurrogateModel, epsilon: float) -> SurrogateModel:
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    return replace(m, epsilon=epsilon)


# --- checkpoint IO: JSON header + raw little-endian float64 sidecar ---


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".bin") if path.suffix == ".json" else Path(str(path) + ".bin")


def save_model(model, path, extra: dict | None = None) -> None:
    """Write a checkpoint: JSON header plus .bin payload of C-order <f8 arrays."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(model, SurrogateModel):
        header = {
            "kind": "sgc",
            "k": model.k,
            "epsilon": model.epsilon,
            "arrays": [["W", list(model.W.shape)]],
        }
        payload = [model.W]
    elif isinstance(model, GcnModel):
        header = {
            "kind": "gcn",
            "hidden": model.hidden,
            "arrays": [["W0", list(model.W0.shape)], ["W1", list(model.W1.shape)]],
        }
        payload = [model.W0, model.W1]
    else:
        raise TypeError(f"unsupported model type: {type(model).__name__}")
    header["dtype"] = "<f8"
    header["payload"] = _sidecar(path).name
    if extra:
        header["extra"] = extra
    path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    blob = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in payload)
    _sidecar(path).write_bytes(blob)


def load_model(path):
    path = Path(path)
    header = json.loads(path.read_text())
    blob = (path.parent / header["payload"]).read_bytes()
    arrays = {}
    offset = 0
    for name, shape in header["arrays"]:
        size = int(np.prod(shape))
        arrays[name] = np.frombuffer(
            blob, dtype="<f8", count=size, offset=offset
        ).reshape(shape).copy()
        offset += size * 8
    if header["kind"] == "sgc":
        return SurrogateModel(W=arrays["W"], k=int(header["k"]), epsilon=float(header["epsilon"]))
    if header["kind"] == "gcn":
        return GcnModel(W0=arrays["W0"], W1=arrays["W1"], hidden=int(header["hidden"]))
    raise ValueError(f"unknown checkpoint kind: {header['kind']}")


def read_checkpoint_header(path) -> dict:
    return json.loads(Path(path).read_text())
