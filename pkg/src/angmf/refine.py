"""Toy pixel-wise refinement: a small MLP with (mu, kappa) heads.

The network maps a per-pixel feature vector through three ReLU hidden
layers (128 wide by default) to four raw outputs.  The first three are
L2-normalized into the direction mu; the fourth goes through a modified
ELU, f(x) = x + 1 for x >= 0 and exp(x) below, so kappa stays positive
with unit slope at zero.  Backpropagation is written out by hand,
including the exact Jacobian of v / ||v||, and is verified against finite
differences in the test suite.

Training follows the uncertainty-guided scheme: each step forwards a full
frame, converts kappa to expected angular error, selects pixels via
:func:`angmf.pixel_select.select_pixels`, and backpropagates the mean nll
over the selected pixels only.  Updates are plain minibatch gradient
descent.

Weight initialization draws from the run's RngState: for each layer in
order, the weight matrix is filled row-major with uniform values in
[-1/sqrt(fan_in), +1/sqrt(fan_in)] and biases start at zero.

Weight files use the ``RMLP1`` format:

    bytes 0..4   magic b"RMLP1"
    bytes 5..8   L = number of layers, little-endian uint32
    then         L + 1 layer widths, little-endian uint32
    then         per layer: weights (out x in, row-major) then bias,
                 all little-endian float32
"""

import math
import struct
from dataclasses import dataclass

import numpy as np

from .distributions import AngMFParams, GRAD_DOT_CLAMP, expected_angular_error
from .errors import (
    DomainError,
    EmptyBatch,
    FormatError,
    NormalizationError,
    NumericalError,
    ShapeError,
)
from .mapio import NormalMap
from .metrics import MetricsReport, angular_errors, summarize, valid_errors
from .pixel_select import SelectionConfig, select_pixels
from .rng import RngState

__all__ = [
    "RefineMLP",
    "TrainConfig",
    "EpochStats",
    "modified_elu",
    "modified_elu_grad",
    "init_mlp",
    "forward",
    "backward",
    "train",
    "save_weights",
    "load_weights",
]

MAGIC_WEIGHTS = b"RMLP1"


def modified_elu(x):
    """x + 1 for x >= 0, exp(x) below; positive, continuous, slope 1 at 0."""
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x >= 0.0, x + 1.0, np.exp(np.minimum(x, 0.0)))
    return out if out.ndim else float(out)


def modified_elu_grad(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x >= 0.0, 1.0, np.exp(np.minimum(x, 0.0)))
    return out if out.ndim else float(out)


@dataclass
class RefineMLP:
    """Plain MLP parameters; weights[l] has shape (out, in)."""

    weights: list
    biases: list

    @property
    def dims(self):
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)


def init_mlp(in_dim, hidden_dims=(128, 128, 128), rng=None):
    """Seeded uniform +-1/sqrt(fan_in) init; see the module docstring for draw order."""
    if rng is None:
        rng = RngState(0)
    dims = (int(in_dim),) + tuple(int(d) for d in hidden_dims) + (4,)
    if any(d < 1 for d in dims):
        raise DomainError(f"layer widths must be >= 1, got {dims}")
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        w = bound * (2.0 * rng.uniform(fan_out * fan_in) - 1.0)
        weights.append(w.reshape(fan_out, fan_in))
        biases.append(np.zeros(fan_out))
    return RefineMLP(weights=weights, biases=biases)


def _forward_batch(mlp, x):
    """Forward a (N, in_dim) batch; returns (mu, kappa, cache)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != mlp.weights[0].shape[1]:
        raise ShapeError(f"expected (N, {mlp.weights[0].shape[1]}) features, got {x.shape}")
    acts = [x]
    h = x
    last = len(mlp.weights) - 1
    pre = []
    for l, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        z = h @ w.T + b
        pre.append(z)
        h = z if l == last else np.maximum(z, 0.0)
        if l != last:
            acts.append(h)
    v = h[:, :3]
    r = np.linalg.norm(v, axis=1)
    if np.any(r < 1e-12):
        raise NormalizationError("direction head collapsed below 1e-12")
    mu = v / r[:, None]
    kappa = modified_elu(h[:, 3])
    return mu, kappa, (acts, pre, v, r, mu, kappa)


def forward(mlp, feature):
    """Per-pixel prediction as AngMFParams."""
    mu, kappa, _ = _forward_batch(mlp, np.asarray(feature, dtype=np.float64)[None, :])
    return AngMFParams(mu=mu[0], kappa=float(kappa[0]))


def _head_gradients(n_gt, v, r, mu, kappa, z3):
    """d(nll)/d(raw outputs) for each row, shape (N, 4)."""
    t_raw = np.sum(mu * n_gt, axis=1)
    alpha = np.arccos(np.clip(t_raw, -1.0, 1.0))
    d_kappa = alpha - expected_angular_error(kappa)

    tg = np.clip(t_raw, -GRAD_DOT_CLAMP, GRAD_DOT_CLAMP)
    sin_a = np.sqrt(1.0 - tg * tg)
    d_mu = (-kappa / sin_a)[:, None] * (n_gt - tg[:, None] * mu)
    d_mu = d_mu - np.sum(d_mu * mu, axis=1, keepdims=True) * mu
    # exact Jacobian of v / ||v||: J^T y = (y - mu (mu . y)) / r
    d_v = (d_mu - np.sum(d_mu * mu, axis=1, keepdims=True) * mu) / r[:, None]

    dz = np.empty((n_gt.shape[0], 4))
    dz[:, :3] = d_v
    dz[:, 3] = d_kappa * modified_elu_grad(z3)
    return dz


def _backward_batch(mlp, x, n_gt):
    """Gradients of the mean nll over a batch; returns (dWs, dbs)."""
    x = np.asarray(x, dtype=np.float64)
    n_gt = np.asarray(n_gt, dtype=np.float64)
    if n_gt.shape != (x.shape[0], 3):
        raise ShapeError(f"expected ({x.shape[0]}, 3) targets, got {n_gt.shape}")
    if x.shape[0] == 0:
        raise EmptyBatch("cannot backpropagate an empty batch")
    _, _, (acts, pre, v, r, mu, kappa) = _forward_batch(mlp, x)
    delta = _head_gradients(n_gt, v, r, mu, kappa, pre[-1][:, 3]) / x.shape[0]

    d_ws = [None] * len(mlp.weights)
    d_bs = [None] * len(mlp.weights)
    for l in range(len(mlp.weights) - 1, -1, -1):
        d_ws[l] = delta.T @ acts[l]
        d_bs[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ mlp.weights[l]) * (pre[l - 1] > 0.0)
    return d_ws, d_bs


def backward(mlp, feature, n_gt):
    """Single-pixel nll gradients in every weight and bias."""
    return _backward_batch(
        mlp,
        np.asarray(feature, dtype=np.float64)[None, :],
        np.asarray(n_gt, dtype=np.float64)[None, :],
    )


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 1
    learning_rate: float = 1e-2
    r_s: float = 0.4
    beta_ug: float = 0.7
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise DomainError("epochs and batch_size must be >= 1")
        # zero is legal (a no-op run used to baseline metrics); negative is not
        if not self.learning_rate >= 0.0:
            raise DomainError(f"learning_rate must be >= 0, got {self.learning_rate}")
        SelectionConfig(r_s=self.r_s, beta_ug=self.beta_ug)  # bounds check only


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    nll: float
    report: MetricsReport


def _frame_errors_deg(mlp, frame):
    x = frame.features.reshape(-1, frame.features.shape[-1])
    mu, kappa, _ = _forward_batch(mlp, x)
    h, w = frame.gt.height, frame.gt.width
    pred = NormalMap.from_vectors(mu.reshape(h, w, 3), valid=frame.gt.valid)
    return angular_errors(pred, frame.gt), kappa


def _mean_nll_all(mlp, frames):
    total, count = 0.0, 0
    for frame in frames:
        x = frame.features.reshape(-1, frame.features.shape[-1])
        mu, kappa, _ = _forward_batch(mlp, x)
        gt = frame.gt.data.reshape(-1, 3).astype(np.float64)
        ok = frame.gt.valid.ravel()
        t = np.clip(np.sum(mu[ok] * gt[ok], axis=1), -1.0, 1.0)
        k = kappa[ok]
        nll = -np.log1p(k * k) + np.log1p(np.exp(-math.pi * k)) + k * np.arccos(t)
        total += float(nll.sum())
        count += int(ok.sum())
    if count == 0:
        raise EmptyBatch("no valid pixels across frames")
    return total / count


def train(frames, config):
    """Train on a list of SyntheticFrames; returns (mlp, per-epoch stats).

    One RngState seeded from ``config.seed`` drives initialization and
    every per-step pixel selection in order, so a (frames, config) pair
    fully determines the final weights bit for bit.
    """
    frames = list(frames)
    if not frames:
        raise EmptyBatch("no training frames")
    in_dim = frames[0].features.shape[-1]
    rng = RngState(config.seed)
    mlp = init_mlp(in_dim, rng=rng)
    sel_cfg = SelectionConfig(r_s=config.r_s, beta_ug=config.beta_ug)

    stats = []
    for epoch in range(1, config.epochs + 1):
        for start in range(0, len(frames), config.batch_size):
            batch = frames[start:start + config.batch_size]
            acc_w = [np.zeros_like(w) for w in mlp.weights]
            acc_b = [np.zeros_like(b) for b in mlp.biases]
            for frame in batch:
                x = frame.features.reshape(-1, in_dim)
                _, kappa, _ = _forward_batch(mlp, x)
                unc = expected_angular_error(kappa)
                sel = select_pixels(unc, frame.gt.valid.ravel(), sel_cfg, rng)
                idx = sel.all_indices
                gt = frame.gt.data.reshape(-1, 3).astype(np.float64)[idx]
                d_ws, d_bs = _backward_batch(mlp, x[idx], gt)
                for l in range(len(acc_w)):
                    acc_w[l] += d_ws[l]
                    acc_b[l] += d_bs[l]
            scale = config.learning_rate / len(batch)
            for l in range(len(acc_w)):
                mlp.weights[l] = mlp.weights[l] - scale * acc_w[l]
                mlp.biases[l] = mlp.biases[l] - scale * acc_b[l]

        nll = _mean_nll_all(mlp, frames)
        if not math.isfinite(nll):
            raise NumericalError(f"training diverged at epoch {epoch} (nll = {nll})")
        errs = np.concatenate([valid_errors(_frame_errors_deg(mlp, f)[0]) for f in frames])
        stats.append(EpochStats(epoch=epoch, nll=nll, report=summarize(errs)))
    return mlp, stats


def save_weights(mlp, path):
    dims = mlp.dims
    with open(path, "wb") as f:
        f.write(MAGIC_WEIGHTS)
        f.write(struct.pack("<I", len(mlp.weights)))
        f.write(struct.pack(f"<{len(dims)}I", *dims))
        for w, b in zip(mlp.weights, mlp.biases):
            f.write(w.astype("<f4").tobytes())
            f.write(b.astype("<f4").tobytes())


def load_weights(path):
    with open(path, "rb") as f:
        buf = f.read()
    if len(buf) < 9:
        raise FormatError(f"{path}: truncated header", offset=len(buf))
    if buf[:5] != MAGIC_WEIGHTS:
        raise FormatError(f"{path}: bad magic {buf[:5]!r}", offset=0)
    (n_layers,) = struct.unpack_from("<I", buf, 5)
    head = 9 + 4 * (n_layers + 1)
    if n_layers < 1 or len(buf) < head:
        raise FormatError(f"{path}: truncated dimension table", offset=min(len(buf), 9))
    dims = struct.unpack_from(f"<{n_layers + 1}I", buf, 9)
    expected = head + sum(4 * (dims[l] * dims[l + 1] + dims[l + 1]) for l in range(n_layers))
    if len(buf) != expected:
        raise FormatError(f"{path}: payload is {len(buf) - head} bytes, expected {expected - head}",
                          offset=min(len(buf), expected))
    weights, biases = [], []
    off = head
    for l in range(n_layers):
        n_w = dims[l] * dims[l + 1]
        w = np.frombuffer(buf, dtype="<f4", count=n_w, offset=off).astype(np.float64)
        if not np.all(np.isfinite(w)):
            bad = int(np.flatnonzero(~np.isfinite(w))[0])
            raise FormatError(f"{path}: non-finite weight in layer {l}", offset=off + 4 * bad)
        weights.append(w.reshape(dims[l + 1], dims[l]))
        off += 4 * n_w
        b = np.frombuffer(buf, dtype="<f4", count=dims[l + 1], offset=off).astype(np.float64)
        if not np.all(np.isfinite(b)):
            bad = int(np.flatnonzero(~np.isfinite(b))[0])
            raise FormatError(f"{path}: non-finite bias in layer {l}", offset=off + 4 * bad)
        biases.append(b)
        off += 4 * dims[l + 1]
    return RefineMLP(weights=weights, biases=biases)
