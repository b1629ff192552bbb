"""Self-attention imputer for 24-hour day vectors.

Each hour is a token embedded from its ``(value, present)`` pair plus a learned
position vector. A stack of pre-norm encoder blocks (multi-head scaled
dot-product attention and a ReLU feed-forward net, each wrapped in a residual
connection) feeds a linear read-out giving one value per hour.

Training minimizes the masked-MAE objective ``w_ort * ORT + w_mit * MIT``:
ORT scores the cells the model could see, MIT the cells hidden from it on
purpose. A fresh single-cell artificial mask is drawn for every row in every
epoch, and the parameters of the epoch with the lowest masked validation MAE
are kept.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..autodiff import Adam, Tensor
from ..core import HOURS_PER_DAY
from ..errors import PipelineError
from ..rng import derive_seed, make_rng
from .base import Imputer, as_rows, require_complete


@dataclass(frozen=True)
class AttentionConfig:
    n_layers: int = 2
    d_model: int = 256
    d_ff: int = 128
    n_heads: int = 4
    d_k: int = 64
    d_v: int = 64
    dropout: float = 0.1
    attn_dropout: float = 0.1
    preset: str = "custom"

    def __post_init__(self):
        if min(self.d_model, self.d_ff, self.n_heads, self.d_k, self.d_v) < 1 or self.n_layers < 0:
            raise PipelineError("bad-config", "attention dimensions must be positive")
        if not (0 <= self.dropout < 1 and 0 <= self.attn_dropout < 1):
            raise PipelineError("bad-config", "dropout rates must lie in [0, 1)")


PRESETS = {
    "saits": AttentionConfig(2, 256, 128, 4, 64, 64, 0.1, 0.1, "saits"),
    "transformer": AttentionConfig(6, 256, 256, 4, 128, 128, 0.1, 0.0, "transformer"),
}


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 100
    batch_size: int = 32
    selection: str = "best"
    seed: int = 0
    weight_ort: float = 1.0
    weight_mit: float = 1.0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise PipelineError("bad-config", "epochs and batch_size must be >= 1")
        if self.lr <= 0:
            raise PipelineError("bad-config", "learning rate must be positive")
        if self.selection not in ("best", "last"):
            raise PipelineError("bad-config", "selection must be 'best' or 'last'")


def init_params(config: AttentionConfig, seed: int) -> dict:
    """Fan-in scaled uniform init: ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``; biases 0, LN gains 1."""
    rng = make_rng(seed)
    d, hk, hv = config.d_model, config.n_heads * config.d_k, config.n_heads * config.d_v

    def uniform(fan_in, shape):
        bound = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-bound, bound, shape)

    p = {
        "embed.W": uniform(2, (2, d)),
        "embed.b": np.zeros(d),
        "pos": uniform(d, (HOURS_PER_DAY, d)),
    }
    for i in range(config.n_layers):
        p.update({
            f"l{i}.ln1.g": np.ones(d), f"l{i}.ln1.b": np.zeros(d),
            f"l{i}.Wq": uniform(d, (d, hk)), f"l{i}.Wk": uniform(d, (d, hk)), f"l{i}.Wv": uniform(d, (d, hv)),
            f"l{i}.Wo": uniform(hv, (hv, d)), f"l{i}.bo": np.zeros(d),
            f"l{i}.ln2.g": np.ones(d), f"l{i}.ln2.b": np.zeros(d),
            f"l{i}.W1": uniform(d, (d, config.d_ff)), f"l{i}.b1": np.zeros(config.d_ff),
            f"l{i}.W2": uniform(config.d_ff, (config.d_ff, d)), f"l{i}.b2": np.zeros(d),
        })
    p["out.W"] = uniform(d, (d, 1))
    p["out.b"] = np.zeros(1)
    return p


def forward(params: dict, config: AttentionConfig, values, mask, training=False, rng=None, record=None):
    """Reconstruct a ``(B, 24)`` batch.

    ``params`` maps names to ``Tensor`` (for gradients) or ndarray. ``values``
    must be zero at absent cells. When ``record`` is a list, each layer's
    attention weights ``(B, H, 24, 24)`` are appended to it.
    """
    values = np.asarray(values, dtype=float)
    mask = np.asarray(mask, dtype=float)
    if values.ndim != 2 or values.shape[1] != HOURS_PER_DAY or mask.shape != values.shape:
        raise PipelineError("shape-error", f"expected matching (B, {HOURS_PER_DAY}) values and mask")
    P = {k: v if isinstance(v, Tensor) else Tensor(v) for k, v in params.items()}
    B, T = values.shape
    H, dk, dv = config.n_heads, config.d_k, config.d_v
    drop = config.dropout if training else 0.0
    attn_drop = config.attn_dropout if training else 0.0

    tokens = Tensor(np.stack([values, mask], axis=-1))
    x = tokens @ P["embed.W"] + P["embed.b"] + P["pos"]
    for i in range(config.n_layers):
        h = x.layer_norm(P[f"l{i}.ln1.g"], P[f"l{i}.ln1.b"])
        q = (h @ P[f"l{i}.Wq"]).reshape(B, T, H, dk).transpose(0, 2, 1, 3)
        k = (h @ P[f"l{i}.Wk"]).reshape(B, T, H, dk).transpose(0, 2, 3, 1)
        v = (h @ P[f"l{i}.Wv"]).reshape(B, T, H, dv).transpose(0, 2, 1, 3)
        weights = ((q @ k) * (1.0 / math.sqrt(dk))).softmax(axis=-1)
        if record is not None:
            record.append(weights.data)
        ctx = (weights.dropout(attn_drop, rng) @ v).transpose(0, 2, 1, 3).reshape(B, T, H * dv)
        x = x + (ctx @ P[f"l{i}.Wo"] + P[f"l{i}.bo"]).dropout(drop, rng)
        h = x.layer_norm(P[f"l{i}.ln2.g"], P[f"l{i}.ln2.b"])
        ff = (h @ P[f"l{i}.W1"] + P[f"l{i}.b1"]).relu() @ P[f"l{i}.W2"] + P[f"l{i}.b2"]
        x = x + ff.dropout(drop, rng)
    return (x @ P["out.W"] + P["out.b"]).reshape(B, T)


def imputation_loss(reconstruction: Tensor, target, observed, artificial, weight_ort=1.0, weight_mit=1.0) -> Tensor:
    """``weight_ort * MAE(observed, not hidden) + weight_mit * MAE(hidden)``."""
    observed = np.asarray(observed, dtype=bool)
    artificial = np.asarray(artificial, dtype=bool)
    target = np.where(observed, target, 0.0)
    ort = reconstruction.masked_mae(target, observed & ~artificial)
    mit = reconstruction.masked_mae(target, artificial)
    return ort * weight_ort + mit * weight_mit


def _inputs(rows):
    present = ~np.isnan(rows)
    return np.where(present, rows, 0.0), present


def sample_artificial_mask(observed, rng):
    """One uniformly chosen observed cell per row (rows with none stay empty)."""
    scores = rng.random(observed.shape)
    scores[~observed] = -1.0
    out = np.zeros(observed.shape, dtype=bool)
    cols = scores.argmax(axis=1)
    rows = np.arange(observed.shape[0])
    out[rows, cols] = observed[rows, cols]
    return out


def predict(params, config, rows, batch_size=256):
    rows = as_rows(rows)
    out = np.empty_like(rows)
    for s in range(0, rows.shape[0], batch_size):
        values, present = _inputs(rows[s:s + batch_size])
        out[s:s + batch_size] = forward(params, config, values, present).data
    return out


def masked_validation_mae(params, config, validation) -> float:
    recon = predict(params, config, validation.rows)
    hidden = validation.hidden_mask
    return float(np.abs(recon - validation.truth)[hidden].mean())


@dataclass
class TrainingHistory:
    train_loss: list = field(default_factory=list)
    val_mae: list = field(default_factory=list)
    best_epoch: int = 0

    def to_dict(self):
        return {"train_loss": self.train_loss, "val_mae": self.val_mae, "best_epoch": self.best_epoch}


def train(train_rows, validation, config: AttentionConfig, train_config: TrainConfig, params=None):
    """Fit attention parameters; returns ``(best_params, TrainingHistory)``.

    ``validation`` is a :class:`~wmimpute.preprocessing.MaskedValidation` in
    the same (normalized) units as ``train_rows``. ``best_epoch`` is 1-based.
    """
    x = as_rows(train_rows)
    tc = train_config
    rng = make_rng(tc.seed)
    params = {k: v.copy() for k, v in (params or init_params(config, derive_seed(tc.seed, "init"))).items()}
    opt = Adam(params, tc.lr, tc.beta1, tc.beta2, tc.eps)
    history = TrainingHistory()
    best, best_mae = None, np.inf

    for epoch in range(1, tc.epochs + 1):
        order = rng.permutation(x.shape[0])
        losses = []
        for s in range(0, x.shape[0], tc.batch_size):
            batch = x[order[s:s + tc.batch_size]]
            observed = ~np.isnan(batch)
            artificial = sample_artificial_mask(observed, rng)
            visible = observed & ~artificial
            leaves = {k: Tensor(v, requires_grad=True) for k, v in params.items()}
            recon = forward(leaves, config, np.where(visible, batch, 0.0), visible, training=True, rng=rng)
            loss = imputation_loss(recon, batch, observed, artificial, tc.weight_ort, tc.weight_mit)
            if not np.isfinite(loss.data):
                raise PipelineError("training-diverged", f"non-finite loss in epoch {epoch}", epoch=epoch)
            loss.backward()
            opt.step({k: t.grad for k, t in leaves.items()})
            losses.append(float(loss.data))

        val_mae = masked_validation_mae(params, config, validation)
        if not np.isfinite(val_mae):
            raise PipelineError("training-diverged", f"non-finite validation MAE in epoch {epoch}", epoch=epoch)
        history.train_loss.append(float(np.mean(losses)))
        history.val_mae.append(val_mae)
        if val_mae < best_mae or tc.selection == "last":
            best_mae, history.best_epoch = val_mae, epoch
            best = {k: v.copy() for k, v in params.items()}
    return best, history


def gradient_check(config: AttentionConfig, seed: int = 0, n_check: int = 50, step: float = 1e-5,
                   batch: int = 4, logit_scale: float = 1.0, resolution: float = 1e-6) -> float:
    """Max relative error between backprop and central-difference gradients.

    Dropout is disabled. ``logit_scale`` multiplies every query projection,
    which scales the attention logits and pushes the softmax toward
    saturation. Entries are drawn at random until ``n_check`` of them have a
    gradient larger than ``resolution`` (MAE terms can cancel to an exact
    zero); for those the error is ``|a - n| / max(|a|, |n|)``. Entries below
    ``resolution`` must agree to within ``resolution`` absolutely, otherwise
    the result is ``inf``.
    """
    config = replace(config, dropout=0.0, attn_dropout=0.0)
    rng = make_rng(seed)
    params = init_params(config, derive_seed(seed, "init"))
    for i in range(config.n_layers):
        params[f"l{i}.Wq"] *= logit_scale
    truth = rng.normal(size=(batch, HOURS_PER_DAY))
    observed = rng.random(truth.shape) > 0.1
    artificial = sample_artificial_mask(observed, rng)
    visible = observed & ~artificial
    inputs = np.where(visible, truth, 0.0)

    def loss_of(p):
        recon = forward(p, config, inputs, visible)
        return imputation_loss(recon, truth, observed, artificial)

    leaves = {k: Tensor(v, requires_grad=True) for k, v in params.items()}
    loss_of(leaves).backward()

    names = sorted(params)
    sizes = np.array([params[k].size for k in names])
    bounds = np.cumsum(sizes)
    worst, checked = 0.0, 0
    for flat in rng.permutation(int(sizes.sum())):
        if checked >= n_check:
            break
        t = int(np.searchsorted(bounds, flat, side="right"))
        name, offset = names[t], int(flat - (bounds[t] - sizes[t]))
        arr = params[name].reshape(-1)
        saved = arr[offset]
        arr[offset] = saved + step
        up = float(loss_of(params).data)
        arr[offset] = saved - step
        down = float(loss_of(params).data)
        arr[offset] = saved
        numeric = (up - down) / (2 * step)
        analytic = float(leaves[name].grad.reshape(-1)[offset])
        scale = max(abs(analytic), abs(numeric))
        if scale <= resolution:
            if abs(analytic - numeric) > resolution:
                return float("inf")
            continue
        worst = max(worst, abs(analytic - numeric) / scale)
        checked += 1
    return worst


class AttentionImputer(Imputer):
    """Attention imputer under the common imputer contract.

    ``fit`` takes the (normalized) complete training rows and, optionally, a
    fixed masked validation set used for best-epoch selection. Without one, a
    seeded fifth of the training rows is held out and masked for selection.
    """

    kind = "attention"

    def __init__(self, config: AttentionConfig | str = "saits", train_config: TrainConfig | None = None):
        super().__init__()
        self.config = PRESETS[config] if isinstance(config, str) else config
        self.train_config = train_config or TrainConfig()

    def fit(self, train_rows, seed=None, validation=None):
        from ..preprocessing import mask_validation

        x = require_complete(train_rows)
        tc = self.train_config if seed is None else replace(self.train_config, seed=int(seed))
        if validation is None:
            order = make_rng(derive_seed(tc.seed, "holdout")).permutation(x.shape[0])
            n_val = max(1, x.shape[0] // 5) if x.shape[0] >= 5 else 0
            held = x[order[:n_val]] if n_val else x
            x = x[order[n_val:]] if n_val else x
            validation = mask_validation(held, derive_seed(tc.seed, "holdout-mask"))
        self.params_, self.history_ = train(x, validation, self.config, tc)
        self.train_config = tc
        self.fitted_ = True
        return self

    def _fill(self, rows):
        return predict(self.params_, self.config, rows)

    def reconstruct(self, rows, record=None):
        values, present = _inputs(as_rows(rows))
        return forward(self.params_, self.config, values, present, record=record).data

    def get_config(self):
        return {"attention": asdict(self.config), "train": asdict(self.train_config)}

    def get_arrays(self):
        return dict(self.params_)

    def get_extra(self):
        return {"history": self.history_.to_dict()}

    @classmethod
    def from_state(cls, config, arrays, extra=None):
        model = cls(AttentionConfig(**config["attention"]), TrainConfig(**config["train"]))
        model.params_ = {k: np.array(v) for k, v in arrays.items()}
        hist = (extra or {}).get("history", {})
        model.history_ = TrainingHistory(list(hist.get("train_loss", [])), list(hist.get("val_mae", [])),
                                         int(hist.get("best_epoch", 0)))
        model.fitted_ = True
        return model
