"""Trainable masked-sequence transformer, implemented from scratch on numpy.

Token + position embeddings feed a stack of post-norm encoder layers
(multi-head self-attention, GELU feed-forward, residuals, layer norm); the
unmask head projects hidden states back onto the vocabulary, weight-tied to
the token embeddings by default. Training minimizes cross-entropy of the
target token at each pair's mask position with Adam over shuffled
mini-batches; all arithmetic runs in float64 with hand-derived gradients so
analytic and finite-difference gradients can be compared directly. Finished
models carry float32 parameters, which makes serialization lossless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .durations import RNG_IDENTITY
from .errors import PoiPlanError
from .sentences import MASK, PAD, TrainingPair, Vocab

Params = dict[str, np.ndarray]

_NEG_BIAS = -1e9
_GELU_C = math.sqrt(2.0 / math.pi)
_LN_EPS = 1e-5


class TrainingError(PoiPlanError):
    """Training cannot start or finish."""


class TrainingDiverged(TrainingError):
    """Loss became non-finite during optimization."""


class MaskQueryError(PoiPlanError):
    """An unmask query is malformed (no mask, too long, bad allowed set)."""


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    d_ff: int = 128
    max_seq_len: int = 64
    dropout: float = 0.1
    lr: float = 1e-3
    batch_size: int = 32
    epochs: int = 10
    seed: int = 13
    tie_output: bool = True

    def __post_init__(self) -> None:
        if min(self.d_model, self.n_layers, self.n_heads, self.d_ff, self.max_seq_len) < 1:
            raise ValueError("all model widths must be >= 1")
        if self.d_model % self.n_heads != 0:
            raise ValueError(f"d_model={self.d_model} not divisible by n_heads={self.n_heads}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0,1), got {self.dropout}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")


@dataclass
class TrainedModel:
    """Immutable after training; safe to share across threads for unmasking."""

    vocab: Vocab
    config: ModelConfig
    params: Params  # float32 tensors
    train_log: tuple[float, ...]
    rng_identity: str = RNG_IDENTITY


@dataclass(frozen=True)
class UnmaskResult:
    position: int
    scores: np.ndarray  # probability per vocab token, sums to 1
    restricted_best: tuple[int, float]


def init_params(cfg: ModelConfig, vocab_size: int, rng: np.random.Generator) -> Params:
    d, dff = cfg.d_model, cfg.d_ff

    def w(*shape: int) -> np.ndarray:
        return rng.normal(0.0, 0.02, size=shape)

    params: Params = {
        "tok_emb": w(vocab_size, d),
        "pos_emb": w(cfg.max_seq_len, d),
        "out.bias": np.zeros(vocab_size),
    }
    if not cfg.tie_output:
        # Zero init: an untrained untied head scores every token uniformly.
        params["out.weight"] = np.zeros((d, vocab_size))
    for i in range(cfg.n_layers):
        p = f"layer{i}."
        params[p + "attn.wq"] = w(d, d)
        params[p + "attn.bq"] = np.zeros(d)
        params[p + "attn.wk"] = w(d, d)
        params[p + "attn.bk"] = np.zeros(d)
        params[p + "attn.wv"] = w(d, d)
        params[p + "attn.bv"] = np.zeros(d)
        params[p + "attn.wo"] = w(d, d)
        params[p + "attn.bo"] = np.zeros(d)
        params[p + "ln1.gamma"] = np.ones(d)
        params[p + "ln1.beta"] = np.zeros(d)
        params[p + "ffn.w1"] = w(d, dff)
        params[p + "ffn.b1"] = np.zeros(dff)
        params[p + "ffn.w2"] = w(dff, d)
        params[p + "ffn.b2"] = np.zeros(d)
        params[p + "ln2.gamma"] = np.ones(d)
        params[p + "ln2.beta"] = np.zeros(d)
    return params


def _gelu(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """GELU (tanh form) and its derivative, both needed on the backward pass."""
    u = _GELU_C * (x + 0.044715 * x**3)
    t = np.tanh(u)
    y = 0.5 * x * (1.0 + t)
    du = _GELU_C * (1.0 + 3 * 0.044715 * x**2)
    grad = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * du
    return y, grad


def _layernorm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray):
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    invstd = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = (x - mu) * invstd
    return gamma * xhat + beta, (xhat, invstd)


def _layernorm_backward(dy: np.ndarray, gamma: np.ndarray, cache) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    xhat, invstd = cache
    dgamma = (dy * xhat).sum(axis=tuple(range(dy.ndim - 1)))
    dbeta = dy.sum(axis=tuple(range(dy.ndim - 1)))
    dxhat = dy * gamma
    dx = invstd * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dgamma, dbeta


def _softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _dropout_mask(rng: np.random.Generator | None, p: float, shape) -> np.ndarray | None:
    if rng is None or p <= 0.0:
        return None
    return (rng.random(shape) >= p) / (1.0 - p)


def _apply(x: np.ndarray, mask: np.ndarray | None) -> np.ndarray:
    return x if mask is None else x * mask


def _split_heads(x: np.ndarray, n_heads: int) -> np.ndarray:
    b, t, d = x.shape
    return x.reshape(b, t, n_heads, d // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    b, h, t, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, h * dh)


def forward_hidden(
    params: Params,
    cfg: ModelConfig,
    tokens: np.ndarray,
    rng: np.random.Generator | None = None,
):
    """Encoder forward pass; returns final hidden states and a backward cache.

    `rng` enables dropout (training); inference passes None.
    """
    b, t = tokens.shape
    if t > cfg.max_seq_len:
        raise MaskQueryError(f"sequence length {t} exceeds max_seq_len {cfg.max_seq_len}")
    scale = 1.0 / math.sqrt(cfg.d_model // cfg.n_heads)
    key_bias = np.where(tokens == PAD, _NEG_BIAS, 0.0)[:, None, None, :]

    x = params["tok_emb"][tokens] + params["pos_emb"][:t][None, :, :]
    drop0 = _dropout_mask(rng, cfg.dropout, x.shape)
    x = _apply(x, drop0)

    layers = []
    for i in range(cfg.n_layers):
        p = f"layer{i}."
        x_in = x
        q = x_in @ params[p + "attn.wq"] + params[p + "attn.bq"]
        k = x_in @ params[p + "attn.wk"] + params[p + "attn.bk"]
        v = x_in @ params[p + "attn.wv"] + params[p + "attn.bv"]
        qh, kh, vh = (_split_heads(m, cfg.n_heads) for m in (q, k, v))
        scores = np.einsum("bhtd,bhkd->bhtk", qh, kh) * scale + key_bias
        attn = _softmax(scores)
        drop_a = _dropout_mask(rng, cfg.dropout, attn.shape)
        attn_d = _apply(attn, drop_a)
        ctx = _merge_heads(np.einsum("bhtk,bhkd->bhtd", attn_d, vh))
        proj = ctx @ params[p + "attn.wo"] + params[p + "attn.bo"]
        drop_p = _dropout_mask(rng, cfg.dropout, proj.shape)
        y1 = x_in + _apply(proj, drop_p)
        x1, ln1_cache = _layernorm(y1, params[p + "ln1.gamma"], params[p + "ln1.beta"])

        h_pre = x1 @ params[p + "ffn.w1"] + params[p + "ffn.b1"]
        g, g_grad = _gelu(h_pre)
        z = g @ params[p + "ffn.w2"] + params[p + "ffn.b2"]
        drop_f = _dropout_mask(rng, cfg.dropout, z.shape)
        y2 = x1 + _apply(z, drop_f)
        x2, ln2_cache = _layernorm(y2, params[p + "ln2.gamma"], params[p + "ln2.beta"])

        layers.append(
            dict(
                x_in=x_in, qh=qh, kh=kh, vh=vh, attn=attn, attn_d=attn_d, ctx=ctx,
                drop_a=drop_a, drop_p=drop_p, ln1=ln1_cache,
                x1=x1, h_pre=h_pre, g=g, g_grad=g_grad, drop_f=drop_f, ln2=ln2_cache,
            )
        )
        x = x2

    cache = dict(tokens=tokens, drop0=drop0, layers=layers, scale=scale)
    return x, cache


def output_logits(params: Params, cfg: ModelConfig, hidden_rows: np.ndarray) -> np.ndarray:
    """Vocabulary logits for a [N, d_model] stack of hidden states."""
    if cfg.tie_output:
        return hidden_rows @ params["tok_emb"].T + params["out.bias"]
    return hidden_rows @ params["out.weight"] + params["out.bias"]


def compute_loss(
    params: Params,
    cfg: ModelConfig,
    tokens: np.ndarray,
    mask_pos: np.ndarray,
    targets: np.ndarray,
) -> float:
    """Mean masked cross-entropy without gradients (finite-difference probes)."""
    hidden, _ = forward_hidden(params, cfg, tokens, rng=None)
    rows = hidden[np.arange(tokens.shape[0]), mask_pos]
    logits = output_logits(params, cfg, rows)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1)) + logits.max(axis=-1)
    return float((lse - logits[np.arange(len(targets)), targets]).mean())


def loss_and_grads(
    params: Params,
    cfg: ModelConfig,
    tokens: np.ndarray,
    mask_pos: np.ndarray,
    targets: np.ndarray,
    rng: np.random.Generator | None = None,
) -> tuple[float, Params]:
    """Masked cross-entropy and analytic gradients for every parameter."""
    b, t = tokens.shape
    hidden, cache = forward_hidden(params, cfg, tokens, rng=rng)
    rows_idx = np.arange(b)
    rows = hidden[rows_idx, mask_pos]
    logits = output_logits(params, cfg, rows)

    shifted = logits - logits.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1)) + logits.max(axis=-1)
    loss = float((lse - logits[rows_idx, targets]).mean())

    grads: Params = {name: np.zeros_like(arr) for name, arr in params.items()}

    dlogits = _softmax(logits)
    dlogits[rows_idx, targets] -= 1.0
    dlogits /= b

    grads["out.bias"] += dlogits.sum(axis=0)
    if cfg.tie_output:
        grads["tok_emb"] += dlogits.T @ rows
        drows = dlogits @ params["tok_emb"]
    else:
        grads["out.weight"] += rows.T @ dlogits
        drows = dlogits @ params["out.weight"].T

    dx = np.zeros_like(hidden)
    dx[rows_idx, mask_pos] = drows

    for i in reversed(range(cfg.n_layers)):
        p = f"layer{i}."
        lc = cache["layers"][i]

        dy2, dg2, db2 = _layernorm_backward(dx, params[p + "ln2.gamma"], lc["ln2"])
        grads[p + "ln2.gamma"] += dg2
        grads[p + "ln2.beta"] += db2
        dz = _apply(dy2, lc["drop_f"])
        grads[p + "ffn.w2"] += np.einsum("bti,btd->id", lc["g"], dz)
        grads[p + "ffn.b2"] += dz.sum(axis=(0, 1))
        dh = (dz @ params[p + "ffn.w2"].T) * lc["g_grad"]
        grads[p + "ffn.w1"] += np.einsum("btd,bti->di", lc["x1"], dh)
        grads[p + "ffn.b1"] += dh.sum(axis=(0, 1))
        dx1 = dy2 + dh @ params[p + "ffn.w1"].T

        dy1, dg1, db1 = _layernorm_backward(dx1, params[p + "ln1.gamma"], lc["ln1"])
        grads[p + "ln1.gamma"] += dg1
        grads[p + "ln1.beta"] += db1
        dproj = _apply(dy1, lc["drop_p"])
        grads[p + "attn.wo"] += np.einsum("btd,bte->de", lc["ctx"], dproj)
        grads[p + "attn.bo"] += dproj.sum(axis=(0, 1))
        dctx = _split_heads(dproj @ params[p + "attn.wo"].T, cfg.n_heads)

        dattn_d = np.einsum("bhtd,bhkd->bhtk", dctx, lc["vh"])
        dvh = np.einsum("bhtk,bhtd->bhkd", lc["attn_d"], dctx)
        dattn = _apply(dattn_d, lc["drop_a"])
        a = lc["attn"]
        dscores = a * (dattn - (dattn * a).sum(axis=-1, keepdims=True))
        dqh = np.einsum("bhtk,bhkd->bhtd", dscores, lc["kh"]) * cache["scale"]
        dkh = np.einsum("bhtk,bhtd->bhkd", dscores, lc["qh"]) * cache["scale"]

        dq, dk, dv = (_merge_heads(m) for m in (dqh, dkh, dvh))
        x_in = lc["x_in"]
        dx = dy1
        for name, dmat in (("q", dq), ("k", dk), ("v", dv)):
            grads[p + f"attn.w{name}"] += np.einsum("btd,bte->de", x_in, dmat)
            grads[p + f"attn.b{name}"] += dmat.sum(axis=(0, 1))
            dx = dx + dmat @ params[p + f"attn.w{name}"].T

    dx = _apply(dx, cache["drop0"])
    grads["pos_emb"][:t] += dx.sum(axis=0)
    np.add.at(grads["tok_emb"], tokens.reshape(-1), dx.reshape(-1, cfg.d_model))

    return loss, grads


def _batch_arrays(pairs: Sequence[TrainingPair]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    width = max(len(p.context) for p in pairs)
    tokens = np.full((len(pairs), width), PAD, dtype=np.int64)
    mask_pos = np.empty(len(pairs), dtype=np.int64)
    targets = np.empty(len(pairs), dtype=np.int64)
    for row, pair in enumerate(pairs):
        tokens[row, : len(pair.context)] = pair.context
        mask_pos[row] = pair.mask_pos
        targets[row] = pair.target
    return tokens, mask_pos, targets


def train(pairs: Sequence[TrainingPair], cfg: ModelConfig, vocab: Vocab) -> TrainedModel:
    """Adam training over shuffled mini-batches; deterministic given cfg.seed."""
    if not pairs:
        raise TrainingError("training corpus is empty")
    vocab_size = len(vocab)
    for pair in pairs:
        if pair.target >= vocab_size or max(pair.context) >= vocab_size:
            raise TrainingError(f"pair references token outside vocabulary of size {vocab_size}")
        if len(pair.context) > cfg.max_seq_len:
            raise TrainingError(f"context of length {len(pair.context)} exceeds max_seq_len {cfg.max_seq_len}")
        if pair.context[pair.mask_pos] != MASK:
            raise TrainingError("pair mask_pos does not point at [MASK]")

    rng = np.random.default_rng(cfg.seed)
    params = init_params(cfg, vocab_size, rng)
    names = sorted(params)
    adam_m = {n: np.zeros_like(params[n]) for n in names}
    adam_v = {n: np.zeros_like(params[n]) for n in names}
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0

    train_log: list[float] = []
    indices = np.arange(len(pairs))
    for epoch in range(cfg.epochs):
        order = rng.permutation(indices)
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = [pairs[i] for i in order[start : start + cfg.batch_size]]
            tokens, mask_pos, targets = _batch_arrays(batch)
            loss, grads = loss_and_grads(
                params, cfg, tokens, mask_pos, targets,
                rng=rng if cfg.dropout > 0 else None,
            )
            if not math.isfinite(loss):
                raise TrainingDiverged(f"loss became {loss} at epoch {epoch}, batch offset {start}")
            epoch_loss += loss * len(batch)
            step += 1
            bias1 = 1.0 - beta1**step
            bias2 = 1.0 - beta2**step
            for name in names:
                g = grads[name]
                adam_m[name] = beta1 * adam_m[name] + (1 - beta1) * g
                adam_v[name] = beta2 * adam_v[name] + (1 - beta2) * g * g
                params[name] = params[name] - cfg.lr * (adam_m[name] / bias1) / (
                    np.sqrt(adam_v[name] / bias2) + eps
                )
        train_log.append(epoch_loss / len(pairs))

    final = {name: params[name].astype(np.float32) for name in names}
    for name, arr in final.items():
        if not np.isfinite(arr).all():
            raise TrainingDiverged(f"parameter {name} is non-finite after training")
    return TrainedModel(vocab=vocab, config=cfg, params=final, train_log=tuple(train_log))


def _params64(model: TrainedModel) -> Params:
    return {name: arr.astype(np.float64) for name, arr in model.params.items()}


def unmask_batch(
    model: TrainedModel,
    queries: Sequence[Sequence[int]],
    allowed: Iterable[int],
) -> list[list[UnmaskResult]]:
    """Run all queries in one forward pass; one UnmaskResult per mask position.

    `allowed` must be a non-empty subset of the vocabulary's POI tokens;
    restricted_best renormalizes the softmax over that subset.
    """
    allowed_set = set(allowed)
    if not allowed_set:
        raise MaskQueryError("allowed token set is empty")
    poi_range = model.vocab.poi_token_range
    if any(tok not in poi_range for tok in allowed_set):
        raise MaskQueryError("allowed set contains non-POI tokens")
    if not queries:
        return []
    cfg, vocab_size = model.config, len(model.vocab)
    mask_positions: list[list[int]] = []
    for qi, query in enumerate(queries):
        if len(query) > cfg.max_seq_len:
            raise MaskQueryError(f"query {qi} has length {len(query)} > max_seq_len {cfg.max_seq_len}")
        if any(tok < 0 or tok >= vocab_size for tok in query):
            raise MaskQueryError(f"query {qi} contains out-of-vocabulary token indices")
        positions = [i for i, tok in enumerate(query) if tok == MASK]
        if not positions:
            raise MaskQueryError(f"query {qi} contains no [MASK] token")
        mask_positions.append(positions)

    width = max(len(q) for q in queries)
    tokens = np.full((len(queries), width), PAD, dtype=np.int64)
    for row, query in enumerate(queries):
        tokens[row, : len(query)] = query

    params = _params64(model)
    hidden, _ = forward_hidden(params, cfg, tokens, rng=None)
    allowed_vec = np.zeros(vocab_size)
    allowed_vec[sorted(allowed_set)] = 1.0

    results: list[list[UnmaskResult]] = []
    for row, positions in enumerate(mask_positions):
        row_results = []
        for pos in positions:
            logits = output_logits(params, cfg, hidden[row, pos][None, :])[0]
            scores = _softmax(logits[None, :])[0]
            restricted = scores * allowed_vec
            total = restricted.sum()
            best = int(restricted.argmax())
            row_results.append(
                UnmaskResult(position=pos, scores=scores, restricted_best=(best, float(restricted[best] / total)))
            )
        results.append(row_results)
    return results


def unmask(model: TrainedModel, query: Sequence[int], allowed: Iterable[int]) -> list[UnmaskResult]:
    """Unmask one query; returns one result per [MASK] position."""
    return unmask_batch(model, [query], allowed)[0]
