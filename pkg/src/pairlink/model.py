"""Trainable tagger: token encoder, shared pair kernel, per-sequence softmax heads.

The forward path mirrors the tagging side of the package.  A sentence is
encoded once; every upper-triangle token pair (i, j) gets the representation

    k_ij = tanh(W [h_i; h_j] + b)

and 2N+1 independent 3-way softmax heads read the link tag off k_ij (head 0
scores the entity sequence, heads 1..N the per-relation head-pair sequences,
heads N+1..2N the tail-pair sequences).  Gradients are derived by hand and
cross-checked against central finite differences in the test suite; no
autograd library is involved.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .codec import index_map
from .core import (
    HandshakingTagging,
    InvalidInput,
    LinkTag,
    PairLinkError,
    RelationSchema,
    Triple,
)
from .decoding import decode

UNK = "<unk>"
PROB_FLOOR = 1e-12


class ShapeError(PairLinkError, ValueError):
    """Tensor dimensions do not line up."""


class NumericError(PairLinkError, ArithmeticError):
    """A loss or gradient stopped being finite."""


@dataclass
class MixerParams:
    """Bidirectional first-order recurrence over the embedded tokens.

    Forward states f_t = tanh(w_fwd x_t + u_fwd f_{t-1} + b_fwd) with f_{-1}
    zero; the backward direction mirrors it from the sentence end; the token
    vector is the concatenation [f_t; g_t].
    """

    w_fwd: np.ndarray  # (state, embed)
    u_fwd: np.ndarray  # (state, state)
    b_fwd: np.ndarray  # (state,)
    w_bwd: np.ndarray
    u_bwd: np.ndarray
    b_bwd: np.ndarray

    @property
    def state_dim(self) -> int:
        return self.w_fwd.shape[0]


@dataclass
class EncoderParams:
    """Embedding table plus optional context mixer; id 0 is the unknown token."""

    vocab: dict[str, int]
    embed: np.ndarray  # (V, embed_dim)
    mixer: MixerParams | None = None

    @property
    def out_dim(self) -> int:
        if self.mixer is None:
            return self.embed.shape[1]
        return 2 * self.mixer.state_dim


@dataclass
class KernelParams:
    weight: np.ndarray  # (pair_dim, 2 * encoder_out)
    bias: np.ndarray  # (pair_dim,)


@dataclass
class TaggerParams:
    """Stacked output heads: weight (2N+1, 3, pair_dim), bias (2N+1, 3)."""

    weight: np.ndarray
    bias: np.ndarray

    @property
    def n_taggers(self) -> int:
        return self.weight.shape[0]


@dataclass
class ModelParams:
    encoder: EncoderParams
    kernel: KernelParams
    taggers: TaggerParams
    n_relations: int
    max_len: int = 100

    def __post_init__(self) -> None:
        d = self.encoder.out_dim
        if self.kernel.weight.shape[1] != 2 * d:
            raise ShapeError(
                f"kernel expects input {self.kernel.weight.shape[1]}, encoder yields {2 * d}"
            )
        if self.kernel.weight.shape[0] != self.kernel.bias.shape[0]:
            raise ShapeError("kernel weight and bias disagree on pair_dim")
        expected = 2 * self.n_relations + 1
        if self.taggers.n_taggers != expected:
            raise ShapeError(
                f"need {expected} output heads for {self.n_relations} relations, "
                f"got {self.taggers.n_taggers}"
            )
        if self.taggers.weight.shape[1:] != (3, self.kernel.weight.shape[0]):
            raise ShapeError("tagger heads do not match the kernel output dimension")
        if self.taggers.bias.shape != (expected, 3):
            raise ShapeError("tagger bias must be (2N+1, 3)")


def tagger_index(kind: str, relation: int | None, n_relations: int) -> int:
    """Position of a tag sequence's head in the stacked tagger arrays."""
    if kind == "eh2et":
        return 0
    if relation is None or not 0 <= relation < n_relations:
        raise InvalidInput(f"relation id {relation!r} out of range for N={n_relations}")
    if kind == "sh2oh":
        return 1 + relation
    if kind == "st2ot":
        return 1 + n_relations + relation
    raise InvalidInput(f"unknown sequence kind: {kind!r}")


def build_vocab(token_lists) -> dict[str, int]:
    """Token -> id map over a corpus, id 0 reserved for unknown tokens."""
    vocab = {UNK: 0}
    for tokens in token_lists:
        for tok in tokens:
            vocab.setdefault(tok, len(vocab))
    return vocab


def _uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_model(
    schema: RelationSchema,
    vocab: dict[str, int],
    d_embed: int = 32,
    d_state: int = 16,
    d_pair: int = 32,
    use_mixer: bool = True,
    max_len: int = 100,
    seed: int = 0,
    rng: np.random.Generator | None = None,
) -> ModelParams:
    """Fresh parameters, every weight uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)]."""
    if rng is None:
        rng = np.random.default_rng(seed)
    if UNK not in vocab or vocab[UNK] != 0:
        raise InvalidInput(f"vocab must map {UNK!r} to id 0")
    n_rel = len(schema)
    embed = _uniform(rng, (len(vocab), d_embed), d_embed)
    mixer = None
    if use_mixer:
        mixer = MixerParams(
            w_fwd=_uniform(rng, (d_state, d_embed), d_embed),
            u_fwd=_uniform(rng, (d_state, d_state), d_state),
            b_fwd=np.zeros(d_state),
            w_bwd=_uniform(rng, (d_state, d_embed), d_embed),
            u_bwd=_uniform(rng, (d_state, d_state), d_state),
            b_bwd=np.zeros(d_state),
        )
    encoder = EncoderParams(vocab=dict(vocab), embed=embed, mixer=mixer)
    d = encoder.out_dim
    kernel = KernelParams(
        weight=_uniform(rng, (d_pair, 2 * d), 2 * d), bias=np.zeros(d_pair)
    )
    taggers = TaggerParams(
        weight=_uniform(rng, (2 * n_rel + 1, 3, d_pair), d_pair),
        bias=np.zeros((2 * n_rel + 1, 3)),
    )
    return ModelParams(encoder, kernel, taggers, n_rel, max_len=max_len)


def named_tensors(params: ModelParams) -> dict[str, np.ndarray]:
    """Every trainable array, keyed by a stable dotted name."""
    out = {
        "encoder.embed": params.encoder.embed,
        "kernel.weight": params.kernel.weight,
        "kernel.bias": params.kernel.bias,
        "taggers.weight": params.taggers.weight,
        "taggers.bias": params.taggers.bias,
    }
    m = params.encoder.mixer
    if m is not None:
        for name in ("w_fwd", "u_fwd", "b_fwd", "w_bwd", "u_bwd", "b_bwd"):
            out[f"encoder.mixer.{name}"] = getattr(m, name)
    return out


def clone_params(params: ModelParams) -> ModelParams:
    m = params.encoder.mixer
    mixer = None
    if m is not None:
        mixer = MixerParams(
            m.w_fwd.copy(), m.u_fwd.copy(), m.b_fwd.copy(),
            m.w_bwd.copy(), m.u_bwd.copy(), m.b_bwd.copy(),
        )
    return ModelParams(
        encoder=EncoderParams(dict(params.encoder.vocab), params.encoder.embed.copy(), mixer),
        kernel=KernelParams(params.kernel.weight.copy(), params.kernel.bias.copy()),
        taggers=TaggerParams(params.taggers.weight.copy(), params.taggers.bias.copy()),
        n_relations=params.n_relations,
        max_len=params.max_len,
    )


# --- forward -----------------------------------------------------------------


def _token_ids(tokens, vocab: dict[str, int]) -> np.ndarray:
    return np.array([vocab.get(t, 0) for t in tokens], dtype=np.int64)


def _encoder_forward(tokens, enc: EncoderParams) -> tuple[np.ndarray, dict]:
    if len(tokens) == 0:
        raise InvalidInput("cannot encode an empty sentence")
    ids = _token_ids(tokens, enc.vocab)
    x = enc.embed[ids]
    if enc.mixer is None:
        return x, {"ids": ids, "x": x, "f": None, "g": None}
    m = enc.mixer
    n, s = len(tokens), m.state_dim
    f = np.empty((n, s))
    state = np.zeros(s)
    for t in range(n):
        state = np.tanh(m.w_fwd @ x[t] + m.u_fwd @ state + m.b_fwd)
        f[t] = state
    g = np.empty((n, s))
    state = np.zeros(s)
    for t in range(n - 1, -1, -1):
        state = np.tanh(m.w_bwd @ x[t] + m.u_bwd @ state + m.b_bwd)
        g[t] = state
    h = np.concatenate([f, g], axis=1)
    return h, {"ids": ids, "x": x, "f": f, "g": g}


def encode_tokens(tokens, encoder: EncoderParams) -> np.ndarray:
    """Context vectors for one sentence, shape (n, out_dim); runs once per sentence."""
    return _encoder_forward(tokens, encoder)[0]


@lru_cache(maxsize=512)
def _pair_rows(n: int) -> tuple[np.ndarray, np.ndarray]:
    imap = index_map(n)
    rows = np.fromiter((i for i, _ in imap.pairs), dtype=np.int64, count=imap.length)
    cols = np.fromiter((j for _, j in imap.pairs), dtype=np.int64, count=imap.length)
    return rows, cols


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    z = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def handshaking_kernel(h_i, h_j, kernel: KernelParams) -> np.ndarray:
    """Pair representation tanh(W [h_i; h_j] + b) for a single token pair."""
    h_i = np.asarray(h_i, dtype=float)
    h_j = np.asarray(h_j, dtype=float)
    if h_i.shape != h_j.shape or h_i.ndim != 1:
        raise ShapeError(f"token vectors disagree: {h_i.shape} vs {h_j.shape}")
    if 2 * h_i.shape[0] != kernel.weight.shape[1]:
        raise ShapeError(
            f"kernel expects input {kernel.weight.shape[1]}, got {2 * h_i.shape[0]}"
        )
    return np.tanh(kernel.weight @ np.concatenate([h_i, h_j]) + kernel.bias)


def tag_distribution(h_pair, taggers: TaggerParams, tagger: int) -> np.ndarray:
    """Softmax over the three link tags for one pair under one output head."""
    if not 0 <= tagger < taggers.n_taggers:
        raise InvalidInput(f"tagger index {tagger} out of range [0, {taggers.n_taggers})")
    h_pair = np.asarray(h_pair, dtype=float)
    if h_pair.shape != (taggers.weight.shape[2],):
        raise ShapeError(
            f"pair vector has shape {h_pair.shape}, heads expect ({taggers.weight.shape[2]},)"
        )
    return softmax(taggers.weight[tagger] @ h_pair + taggers.bias[tagger])


def predict_link(h_pair, taggers: TaggerParams, tagger: int) -> LinkTag:
    """Most likely link tag; ties resolve toward the smaller label."""
    return LinkTag(int(np.argmax(tag_distribution(h_pair, taggers, tagger))))


@dataclass
class ForwardCache:
    h: np.ndarray  # (n, d)
    enc: dict
    rows: np.ndarray
    cols: np.ndarray
    x_pair: np.ndarray  # (P, 2d)
    k: np.ndarray  # (P, pair_dim)
    probs: np.ndarray  # (T, P, 3)


def _forward(tokens, params: ModelParams) -> ForwardCache:
    h, enc_cache = _encoder_forward(tokens, params.encoder)
    rows, cols = _pair_rows(len(tokens))
    x_pair = np.concatenate([h[rows], h[cols]], axis=1)
    k = np.tanh(x_pair @ params.kernel.weight.T + params.kernel.bias)
    logits = np.einsum("pd,tcd->tpc", k, params.taggers.weight) + params.taggers.bias[:, None, :]
    probs = softmax(logits)
    return ForwardCache(h, enc_cache, rows, cols, x_pair, k, probs)


def forward_probs(tokens, params: ModelParams) -> np.ndarray:
    """Per-head tag distributions for a sentence, shape (2N+1, P, 3)."""
    return _forward(tokens, params).probs


def gold_tags(tagging: HandshakingTagging) -> np.ndarray:
    """(2N+1, P) gold tag array in head order: entity, head pairs, tail pairs."""
    return np.array(tagging.sequences(), dtype=np.int64)


def loss_from_probs(probs: np.ndarray, gold: np.ndarray) -> float:
    """Mean negative log-likelihood of the gold tag over all heads and pairs."""
    if probs.shape[:2] != gold.shape:
        raise ShapeError(f"probs {probs.shape} do not cover gold {gold.shape}")
    t_idx = np.arange(probs.shape[0])[:, None]
    p_idx = np.arange(probs.shape[1])[None, :]
    picked = probs[t_idx, p_idx, gold]
    return float(-np.log(np.maximum(picked, PROB_FLOOR)).mean())


def batch_loss(batch, params: ModelParams) -> float:
    """Mean per-sentence loss over (tokens, gold tagging) pairs."""
    if not batch:
        raise InvalidInput("empty batch")
    total = 0.0
    for tokens, tagging in batch:
        total += loss_from_probs(_forward(tokens, params).probs, gold_tags(tagging))
    return total / len(batch)


# --- backward ----------------------------------------------------------------


def _backward(gold: np.ndarray, cache: ForwardCache, params: ModelParams,
              grads: dict[str, np.ndarray], weight: float) -> None:
    probs = cache.probs
    n_heads, n_pairs, _ = probs.shape
    dlogits = probs.copy()
    t_idx = np.arange(n_heads)[:, None]
    p_idx = np.arange(n_pairs)[None, :]
    dlogits[t_idx, p_idx, gold] -= 1.0
    dlogits *= weight / (n_heads * n_pairs)

    grads["taggers.weight"] += np.einsum("tpc,pd->tcd", dlogits, cache.k)
    grads["taggers.bias"] += dlogits.sum(axis=1)
    dk = np.einsum("tpc,tcd->pd", dlogits, params.taggers.weight)

    dpre = dk * (1.0 - cache.k**2)
    grads["kernel.weight"] += dpre.T @ cache.x_pair
    grads["kernel.bias"] += dpre.sum(axis=0)
    dxp = dpre @ params.kernel.weight

    d = cache.h.shape[1]
    dh = np.zeros_like(cache.h)
    np.add.at(dh, cache.rows, dxp[:, :d])
    np.add.at(dh, cache.cols, dxp[:, d:])
    _encoder_backward(cache.enc, params.encoder, dh, grads)


def _encoder_backward(enc_cache: dict, enc: EncoderParams, dh: np.ndarray,
                      grads: dict[str, np.ndarray]) -> None:
    ids = enc_cache["ids"]
    if enc.mixer is None:
        np.add.at(grads["encoder.embed"], ids, dh)
        return
    m = enc.mixer
    x, f, g = enc_cache["x"], enc_cache["f"], enc_cache["g"]
    n, s = f.shape
    dx = np.zeros_like(x)
    # forward-direction recurrence, unrolled backwards
    carry = np.zeros(s)
    for t in range(n - 1, -1, -1):
        da = (dh[t, :s] + carry) * (1.0 - f[t] ** 2)
        grads["encoder.mixer.w_fwd"] += np.outer(da, x[t])
        grads["encoder.mixer.b_fwd"] += da
        if t > 0:
            grads["encoder.mixer.u_fwd"] += np.outer(da, f[t - 1])
        carry = m.u_fwd.T @ da
        dx[t] += m.w_fwd.T @ da
    # backward-direction recurrence, unrolled forwards
    carry = np.zeros(s)
    for t in range(n):
        db = (dh[t, s:] + carry) * (1.0 - g[t] ** 2)
        grads["encoder.mixer.w_bwd"] += np.outer(db, x[t])
        grads["encoder.mixer.b_bwd"] += db
        if t < n - 1:
            grads["encoder.mixer.u_bwd"] += np.outer(db, g[t + 1])
        carry = m.u_bwd.T @ db
        dx[t] += m.w_bwd.T @ db
    np.add.at(grads["encoder.embed"], ids, dx)


def gradient(batch, params: ModelParams) -> tuple[float, dict[str, np.ndarray]]:
    """(mean batch loss, analytic gradients) for (tokens, gold tagging) pairs.

    The loss is the mean over sentences of the per-sentence mean cell loss,
    so duplicating a sample leaves the gradient unchanged.  Raises
    :class:`NumericError` the moment anything stops being finite.
    """
    if not batch:
        raise InvalidInput("empty batch")
    grads = {name: np.zeros_like(arr) for name, arr in named_tensors(params).items()}
    total = 0.0
    scale = 1.0 / len(batch)
    for tokens, tagging in batch:
        cache = _forward(tokens, params)
        gold = gold_tags(tagging)
        if gold.shape != cache.probs.shape[:2]:
            raise ShapeError(
                f"gold tagging {gold.shape} does not match model output {cache.probs.shape[:2]}"
            )
        total += loss_from_probs(cache.probs, gold)
        _backward(gold, cache, params, grads, scale)
    loss = total * scale
    if not math.isfinite(loss):
        raise NumericError(f"non-finite loss: {loss}")
    for name, arr in grads.items():
        if not np.all(np.isfinite(arr)):
            raise NumericError(f"non-finite gradient in {name}")
    return loss, grads


# --- inference ---------------------------------------------------------------


def _fit_length(tokens, max_len: int, mode: str):
    if len(tokens) <= max_len:
        return tokens
    if mode == "strict":
        raise InvalidInput(f"sentence has {len(tokens)} tokens, limit is {max_len}")
    warnings.warn(
        f"truncating a {len(tokens)}-token sentence to {max_len} tokens",
        stacklevel=3,
    )
    return tokens[:max_len]


def _tags_to_tagging(tags: np.ndarray, n: int, n_rel: int) -> HandshakingTagging:
    rows = tags.tolist()
    eh = tuple(rows[0])
    sh = tuple(tuple(rows[1 + r]) for r in range(n_rel))
    st = tuple(tuple(rows[1 + n_rel + r]) for r in range(n_rel))
    return HandshakingTagging(n, eh, sh, st)


def infer(tokens, params: ModelParams, schema: RelationSchema,
          mode: str = "lenient") -> set[Triple]:
    """Forward pass, argmax tags (ties toward the smaller label), then decode."""
    check = params.n_relations
    if check != len(schema):
        raise InvalidInput(f"model has {check} relations, schema has {len(schema)}")
    tokens = _fit_length(tokens, params.max_len, mode)
    cache = _forward(tokens, params)
    tags = np.argmax(cache.probs, axis=2)
    tagging = _tags_to_tagging(tags, len(tokens), params.n_relations)
    return decode(tagging, schema, mode=mode)


def _forward_group(token_lists, params: ModelParams) -> np.ndarray:
    """Stacked forward for same-length sentences; returns argmax tags (B, T, P)."""
    enc = params.encoder
    ids = np.stack([_token_ids(toks, enc.vocab) for toks in token_lists])
    x = enc.embed[ids]  # (B, n, e)
    bsz, n = ids.shape
    if enc.mixer is None:
        h = x
    else:
        m = enc.mixer
        s = m.state_dim
        f = np.empty((bsz, n, s))
        state = np.zeros((bsz, s))
        for t in range(n):
            state = np.tanh(x[:, t] @ m.w_fwd.T + state @ m.u_fwd.T + m.b_fwd)
            f[:, t] = state
        g = np.empty((bsz, n, s))
        state = np.zeros((bsz, s))
        for t in range(n - 1, -1, -1):
            state = np.tanh(x[:, t] @ m.w_bwd.T + state @ m.u_bwd.T + m.b_bwd)
            g[:, t] = state
        h = np.concatenate([f, g], axis=2)
    rows, cols = _pair_rows(n)
    x_pair = np.concatenate([h[:, rows, :], h[:, cols, :]], axis=2)  # (B, P, 2d)
    k = np.tanh(x_pair @ params.kernel.weight.T + params.kernel.bias)
    logits = np.einsum("bpd,tcd->btpc", k, params.taggers.weight)
    logits += params.taggers.bias[None, :, None, :]
    return np.argmax(logits, axis=3)


def infer_batch(sentences, params: ModelParams, schema: RelationSchema,
                batch_size: int = 24, mode: str = "lenient") -> list[set[Triple]]:
    """Inference over many sentences; output order matches input order.

    Each batch is grouped by sentence length so a group runs as one stacked
    forward pass; decoded triple sets equal per-sentence :func:`infer`.
    Softmax is monotone, so argmax is taken on the logits directly.
    """
    if batch_size < 1:
        raise InvalidInput(f"batch size must be >= 1, got {batch_size}")
    if params.n_relations != len(schema):
        raise InvalidInput(
            f"model has {params.n_relations} relations, schema has {len(schema)}"
        )
    fitted = [_fit_length(toks, params.max_len, mode) for toks in sentences]
    results: list[set[Triple] | None] = [None] * len(fitted)
    for start in range(0, len(fitted), batch_size):
        chunk = range(start, min(start + batch_size, len(fitted)))
        by_len: dict[int, list[int]] = {}
        for idx in chunk:
            by_len.setdefault(len(fitted[idx]), []).append(idx)
        for n, idxs in by_len.items():
            tags = _forward_group([fitted[i] for i in idxs], params)
            for row, idx in enumerate(idxs):
                tagging = _tags_to_tagging(tags[row], n, params.n_relations)
                results[idx] = decode(tagging, schema, mode=mode)
    return results  # type: ignore[return-value]


# --- checkpoints ---------------------------------------------------------------

CHECKPOINT_FORMAT = "pairlink-checkpoint"
CHECKPOINT_VERSION = 1


def save_checkpoint(path, params: ModelParams, schema: RelationSchema,
                    extra: dict | None = None) -> str:
    """Write a self-describing .npz checkpoint; returns the actual path used."""
    vocab_tokens = [None] * len(params.encoder.vocab)
    for tok, idx in params.encoder.vocab.items():
        vocab_tokens[idx] = tok
    meta = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "relations": list(schema.relations),
        "vocab": vocab_tokens,
        "use_mixer": params.encoder.mixer is not None,
        "max_len": params.max_len,
        "extra": extra or {},
    }
    arrays = {
        name.replace(".", "__"): arr for name, arr in named_tensors(params).items()
    }
    raw = json.dumps(meta, sort_keys=True).encode("utf-8")
    path = str(path)
    if not path.endswith(".npz"):
        path += ".npz"
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.frombuffer(raw, dtype=np.uint8), **arrays)
    return path


def load_checkpoint(path) -> tuple[ModelParams, RelationSchema, dict]:
    """Read a checkpoint back; arrays roundtrip bit-exactly."""
    with np.load(str(path)) as data:
        if "__meta__" not in data:
            raise InvalidInput(f"{path}: not a model checkpoint (no metadata entry)")
        meta = json.loads(bytes(data["__meta__"]).decode("utf-8"))
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise InvalidInput(f"{path}: unexpected checkpoint format {meta.get('format')!r}")
        if meta.get("version") != CHECKPOINT_VERSION:
            raise InvalidInput(
                f"{path}: checkpoint version {meta.get('version')!r} is not supported"
            )
        tensors = {
            key.replace("__", "."): data[key] for key in data.files if key != "__meta__"
        }
    vocab = {tok: idx for idx, tok in enumerate(meta["vocab"])}
    mixer = None
    if meta["use_mixer"]:
        mixer = MixerParams(
            *(tensors[f"encoder.mixer.{k}"]
              for k in ("w_fwd", "u_fwd", "b_fwd", "w_bwd", "u_bwd", "b_bwd"))
        )
    schema = RelationSchema(tuple(meta["relations"]))
    params = ModelParams(
        encoder=EncoderParams(vocab, tensors["encoder.embed"], mixer),
        kernel=KernelParams(tensors["kernel.weight"], tensors["kernel.bias"]),
        taggers=TaggerParams(tensors["taggers.weight"], tensors["taggers.bias"]),
        n_relations=len(schema),
        max_len=int(meta["max_len"]),
    )
    return params, schema, meta
