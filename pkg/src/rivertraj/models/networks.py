"""Encoder-decoder networks over discretized motion steps.

Both architectures share the step embedding (distance and course-change
lookups, concatenated), the context encoder that replaces the begin token in
curvature mode, and the per-step classification heads.
"""

from __future__ import annotations

import math

import torch
from torch import nn

from ..errors import LabelError, ShapeError
from ..river import context_length
from .config import ModelConfig


class StepEmbedding(nn.Module):
    def __init__(self, distance_vocab: int, cog_vocab: int, d_dist: int, d_cog: int):
        super().__init__()
        self.distance = nn.Embedding(distance_vocab, d_dist)
        self.cog = nn.Embedding(cog_vocab, d_cog)

    @property
    def width(self) -> int:
        return self.distance.embedding_dim + self.cog.embedding_dim

    def forward(self, labels: torch.Tensor) -> torch.Tensor:
        """``(..., 2)`` integer labels to ``(..., d_dist + d_cog)`` vectors."""
        if labels.shape[-1] != 2:
            raise ShapeError("labels need a trailing (distance, cog) dimension")
        d, c = labels[..., 0], labels[..., 1]
        if (
            d.min() < 0
            or d.max() >= self.distance.num_embeddings
            or c.min() < 0
            or c.max() >= self.cog.num_embeddings
        ):
            raise LabelError("label outside embedding vocabulary")
        return torch.cat([self.distance(d), self.cog(c)], dim=-1)


def curvature_classes(cv: torch.Tensor, clip: float, bins: int) -> torch.Tensor:
    """Signed curvature to bin index, rounding halves away from zero."""
    half = bins // 2
    width = clip / half if half else 1.0
    x = torch.clamp(cv, -clip, clip) / width
    k = torch.sign(x) * torch.floor(torch.abs(x) + 0.5)
    return (k + half).long().clamp_(0, bins - 1)


class ContextEncoder(nn.Module):
    """Embedding of the discretized curvature window plus one linear map."""

    def __init__(self, length: int, bins: int, clip: float, d_ctx: int, width: int):
        super().__init__()
        self.length = length
        self.bins = bins
        self.clip = clip
        self.embedding = nn.Embedding(bins, d_ctx)
        self.project = nn.Linear(length * d_ctx, width)

    def forward(self, cv: torch.Tensor) -> torch.Tensor:
        """``(B, N+1)`` curvature values (1/m) to ``(B, width)``."""
        if cv.dim() != 2 or cv.shape[1] != self.length:
            raise ShapeError(f"context window must have length {self.length}, got {tuple(cv.shape)}")
        e = self.embedding(curvature_classes(cv, self.clip, self.bins))
        return self.project(e.flatten(1))


class PositionalEncoding(nn.Module):
    """Fixed sinusoidal encoding added to a ``(B, T, D)`` sequence."""

    def __init__(self, d_model: int, max_len: int = 512):
        super().__init__()
        pos = torch.arange(max_len).unsqueeze(1)
        div = torch.exp(torch.arange(0, d_model, 2) * (-math.log(10000.0) / d_model))
        pe = torch.zeros(max_len, d_model)
        pe[:, 0::2] = torch.sin(pos * div)
        pe[:, 1::2] = torch.cos(pos * div)[:, : d_model // 2]
        self.register_buffer("pe", pe, persistent=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.pe[: x.shape[1]].to(x.dtype)


def _small_linear(fan_in: int, fan_out: int) -> nn.Linear:
    # logits start near zero so the untrained output is close to uniform
    layer = nn.Linear(fan_in, fan_out)
    nn.init.normal_(layer.weight, std=0.1 / math.sqrt(fan_in))
    nn.init.zeros_(layer.bias)
    return layer


class Seq2Seq(nn.Module):
    """Shared input/output processing; subclasses supply the sequence core."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        width = config.step_width
        self.embed = StepEmbedding(
            config.distance_vocab, config.cog_vocab, config.distance_embed, config.cog_embed
        )
        if config.context_mode == "curvature":
            self.context_encoder = ContextEncoder(
                context_length(config.n, config.m),
                config.curvature_bins,
                config.curvature_clip,
                config.context_embed,
                width,
            )
            self.bos = None
        else:
            self.context_encoder = None
            self.bos = nn.Parameter(torch.randn(width))
        out = self.output_width
        self.dropout = nn.Dropout(config.dropout)
        self.distance_head = _small_linear(out, config.distance_vocab)
        self.cog_head = _small_linear(out, config.cog_vocab)
        self.regression_head = nn.Linear(out, 2) if config.head_mode == "hybrid" else None

    @property
    def output_width(self) -> int:
        raise NotImplementedError

    def first_input(self, context: torch.Tensor | None, batch: int) -> torch.Tensor:
        """Decoder input at the first step: context vector or begin token, ``(B, 1, W)``."""
        if self.context_encoder is not None:
            if context is None:
                raise ShapeError("curvature-mode model needs a context window")
            return self.context_encoder(context).unsqueeze(1)
        return self.bos.expand(batch, 1, -1)

    def heads(self, h: torch.Tensor) -> dict[str, torch.Tensor]:
        h = self.dropout(h)
        out = {"distance": self.distance_head(h), "cog": self.cog_head(h)}
        if self.regression_head is not None:
            out["regression"] = self.regression_head(h)
        return out

    def _check_src(self, src: torch.Tensor):
        if src.dim() != 3 or src.shape[1] == 0 or src.shape[2] != 2:
            raise ShapeError(f"source labels must be (B, n>0, 2), got {tuple(src.shape)}")

    def forward(self, src, tgt, context=None) -> dict[str, torch.Tensor]:
        """Teacher-forced logits for all m target steps.

        Args:
            src: ``(B, n, 2)`` input labels.
            tgt: ``(B, m, 2)`` target labels; all but the last are fed back.
            context: ``(B, N+1)`` curvature window (curvature mode only).
        """
        raise NotImplementedError

    @torch.no_grad()
    def greedy(self, src, context=None, steps: int | None = None) -> dict[str, torch.Tensor]:
        """Autoregressive argmax decoding. Returns logits ``(B, m, V)`` and labels ``(B, m, 2)``."""
        raise NotImplementedError


class TransformerSeq2Seq(Seq2Seq):
    def __init__(self, config: ModelConfig):
        super().__init__(config)
        width = config.step_width
        self.positional = PositionalEncoding(width)
        self.input_dropout = nn.Dropout(config.dropout)
        self.transformer = nn.Transformer(
            d_model=width,
            nhead=config.attention_heads,
            num_encoder_layers=config.encoder_layers,
            num_decoder_layers=config.decoder_layers,
            dim_feedforward=config.hidden_size,
            dropout=config.dropout,
            batch_first=True,
        )

    @property
    def output_width(self) -> int:
        return self.config.step_width

    def encode(self, src):
        self._check_src(src)
        x = self.input_dropout(self.positional(self.embed(src)))
        return self.transformer.encoder(x)

    def decode(self, memory, dec_in):
        t = dec_in.shape[1]
        mask = nn.Transformer.generate_square_subsequent_mask(t, dtype=dec_in.dtype)
        y = self.input_dropout(self.positional(dec_in))
        return self.transformer.decoder(y, memory, tgt_mask=mask, tgt_is_causal=True)

    def forward(self, src, tgt, context=None):
        memory = self.encode(src)
        first = self.first_input(context, src.shape[0])
        dec_in = torch.cat([first, self.embed(tgt[:, :-1])], dim=1) if tgt.shape[1] > 1 else first
        return self.heads(self.decode(memory, dec_in))

    @torch.no_grad()
    def greedy(self, src, context=None, steps=None):
        steps = steps or self.config.m
        memory = self.encode(src)
        dec_in = self.first_input(context, src.shape[0])
        dist, cog, labels = [], [], []
        for _ in range(steps):
            out = self.heads(self.decode(memory, dec_in)[:, -1:])
            lab = torch.stack([out["distance"].argmax(-1), out["cog"].argmax(-1)], dim=-1)
            dist.append(out["distance"])
            cog.append(out["cog"])
            labels.append(lab)
            dec_in = torch.cat([dec_in, self.embed(lab)], dim=1)
        return {
            "distance": torch.cat(dist, 1),
            "cog": torch.cat(cog, 1),
            "labels": torch.cat(labels, 1),
        }


class LSTMSeq2Seq(Seq2Seq):
    """Plain LSTM encoder-decoder; the decoder starts from the final encoder state."""

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        width = config.step_width
        drop = config.dropout if config.encoder_layers > 1 else 0.0
        self.encoder = nn.LSTM(width, config.hidden_size, config.encoder_layers, batch_first=True, dropout=drop)
        self.decoder = nn.LSTM(width, config.hidden_size, config.decoder_layers, batch_first=True, dropout=drop)
        self.input_dropout = nn.Dropout(config.dropout)

    @property
    def output_width(self) -> int:
        return self.config.hidden_size

    def encode(self, src):
        self._check_src(src)
        _, state = self.encoder(self.input_dropout(self.embed(src)))
        return state

    def forward(self, src, tgt, context=None):
        state = self.encode(src)
        first = self.first_input(context, src.shape[0])
        dec_in = torch.cat([first, self.embed(tgt[:, :-1])], dim=1) if tgt.shape[1] > 1 else first
        h, _ = self.decoder(self.input_dropout(dec_in), state)
        return self.heads(h)

    @torch.no_grad()
    def greedy(self, src, context=None, steps=None):
        steps = steps or self.config.m
        state = self.encode(src)
        x = self.first_input(context, src.shape[0])
        dist, cog, labels = [], [], []
        for _ in range(steps):
            h, state = self.decoder(self.input_dropout(x), state)
            out = self.heads(h)
            lab = torch.stack([out["distance"].argmax(-1), out["cog"].argmax(-1)], dim=-1)
            dist.append(out["distance"])
            cog.append(out["cog"])
            labels.append(lab)
            x = self.embed(lab)
        return {
            "distance": torch.cat(dist, 1),
            "cog": torch.cat(cog, 1),
            "labels": torch.cat(labels, 1),
        }


def build_model(config: ModelConfig) -> Seq2Seq:
    if config.architecture == "transformer":
        return TransformerSeq2Seq(config)
    return LSTMSeq2Seq(config)
