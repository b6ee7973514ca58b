"""Convolutional text encoder: embed, convolve over time with several
window sizes, ReLU, max-pool over time, concatenate.

One encoder instance (a parameter prefix inside a flat store) is used
per channel, and separate ones for the prior and inference networks. At
full scale the dimensions are 300-d embeddings and 128 filters for each
of the window sizes {3,4,5}, giving a 384-d output; tests shrink them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import ParamBinder, Var
from .text import PAD_ID

__all__ = ["EncoderConfig", "init_encoder_params", "encode"]


@dataclass(frozen=True)
class EncoderConfig:
    embed_dim: int = 300
    n_filters: int = 128
    windows: tuple[int, ...] = (3, 4, 5)

    @property
    def out_dim(self) -> int:
        return self.n_filters * len(self.windows)


def init_encoder_params(rng: np.random.Generator, vocab_size: int,
                        cfg: EncoderConfig, prefix: str) -> dict[str, np.ndarray]:
    """Fresh encoder parameters under ``prefix``. Embeddings are uniform
    in (-0.05, 0.05); convolution weights are He-scaled normals."""
    params = {
        f"{prefix}.emb": rng.uniform(-0.05, 0.05, size=(vocab_size, cfg.embed_dim)),
    }
    for w in cfg.windows:
        scale = np.sqrt(2.0 / (w * cfg.embed_dim))
        params[f"{prefix}.conv{w}.w"] = rng.normal(
            0.0, scale, size=(w, cfg.embed_dim, cfg.n_filters))
        params[f"{prefix}.conv{w}.b"] = np.zeros(cfg.n_filters)
    return params


def encode(binder: ParamBinder, prefix: str, ids, cfg: EncoderConfig,
           dropout_rng: np.random.Generator | None = None,
           dropout_rate: float = 0.5) -> Var:
    """Encode a token-id sequence to a pooled vector of cfg.out_dim.

    Trailing PAD is stripped first (it carries no content, and windows
    straddling real tokens and padding would otherwise leak into the
    pooled maxima), so the encoding is invariant to trailing padding.
    Sequences shorter than the largest window are left-padded with PAD.
    Dropout applies to the pooled vector only when a generator is given
    (training); without one the encoding is deterministic.
    """
    ids = list(ids)
    if not ids:
        raise ValueError("cannot encode an empty id sequence")
    while len(ids) > 1 and ids[-1] == PAD_ID:
        ids.pop()
    longest = max(cfg.windows)
    if len(ids) < longest:
        ids = [PAD_ID] * (longest - len(ids)) + ids
    table = binder(f"{prefix}.emb")
    embedded = ad.embedding(table, np.asarray(ids, dtype=np.int64))
    pooled = []
    for w in cfg.windows:
        conv = ad.conv1d(embedded, binder(f"{prefix}.conv{w}.w"),
                         binder(f"{prefix}.conv{w}.b"))
        pooled.append(ad.maxpool_time(ad.relu(conv)))
    h = ad.concat(pooled)
    if dropout_rng is not None and dropout_rate > 0.0:
        h = ad.dropout(h, dropout_rate, dropout_rng)
    return h
