"""Embedding providers: one vector per linearized lattice node.

Contextual providers re-encode the sentence once per candidate analysis,
with the analysed token replaced by its segment forms, so two nodes that
share a surface form but sit in different analyses can still receive
different vectors.  The virtual root/attachment-sink nodes get the mean
of the original token vectors (or zeros, by configuration).

Providers:

* StaticProvider     - trainable per-form lookup table with hashed OOV buckets
* ToyContextProvider - deterministic hash vectors mixed with neighbour forms
* PrecomputedProvider- vectors loaded from a file keyed by node identity
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import torch
from torch import nn

from .errors import EmbeddingError
from .lattice import (
    AUX_INDEX,
    ROOT_INDEX,
    Analysis,
    LinearizedLattice,
    NodeKind,
    SentenceLattice,
    segments_of,
)

PAD_FORM = "<pad>"


def build_context(
    token_forms: Sequence[str], token_idx: int, analysis: Analysis
) -> tuple[list[str], tuple[int, int]]:
    """Sentence forms with token `token_idx` replaced by its segments.

    Returns the context form list and the half-open span the segments
    occupy within it.
    """
    if not 1 <= token_idx <= len(token_forms):
        raise EmbeddingError(
            f"token index {token_idx} out of range for {len(token_forms)} tokens"
        )
    pieces = list(analysis.forms())
    before = list(token_forms[: token_idx - 1])
    after = list(token_forms[token_idx:])
    start = len(before)
    return before + pieces + after, (start, start + len(pieces))


def _stable_digest(*parts: object) -> int:
    payload = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "big")


class EmbeddingProvider:
    """Maps every node of a linearized lattice to a fixed-size vector."""

    dim: int
    trainable: bool = False

    def embed_nodes(
        self,
        token_forms: Sequence[str],
        lin: LinearizedLattice,
        sent_id: str | None = None,
    ) -> torch.Tensor:
        raise NotImplementedError


class ContextProvider(EmbeddingProvider):
    """Base for providers that encode spans of a context form sequence."""

    def __init__(self, dim: int, root_aux: str = "mean") -> None:
        if dim <= 0:
            raise EmbeddingError(f"embedding dim must be positive, got {dim}")
        if root_aux not in ("mean", "zeros"):
            raise EmbeddingError(f"unknown root/aux vector mode {root_aux!r}")
        self.dim = dim
        self.root_aux = root_aux

    def encode_span(
        self, context: Sequence[str], span: tuple[int, int]
    ) -> torch.Tensor:
        """Vectors for context positions span[0]:span[1], shape (len, dim)."""
        raise NotImplementedError

    def embed_nodes(
        self,
        token_forms: Sequence[str],
        lin: LinearizedLattice,
        sent_id: str | None = None,
    ) -> torch.Tensor:
        n = len(lin.nodes)
        rows = torch.zeros((n, self.dim))
        if self.root_aux == "mean":
            token_vecs = self.encode_span(list(token_forms), (0, len(token_forms)))
            virtual = token_vecs.mean(dim=0)
            rows[ROOT_INDEX] = virtual
            rows[AUX_INDEX] = virtual
        for token_idx, count in enumerate(lin.analysis_counts, start=1):
            for analysis_idx in range(1, count + 1):
                start, end = segments_of(lin, token_idx, analysis_idx)
                analysis = Analysis(
                    segments=tuple(lin.nodes[p].segment for p in range(start, end))
                )
                context, span = build_context(token_forms, token_idx, analysis)
                rows[start:end] = self.encode_span(context, span)
        return rows


class StaticProvider(nn.Module, ContextProvider):
    """Trainable per-form lookup; unseen forms hash into shared buckets.

    The lookup ignores context by construction, so embed_nodes takes a
    fast path straight from node forms.
    """

    trainable = True

    def __init__(
        self,
        vocab: Mapping[str, int] | Iterable[str],
        dim: int,
        n_buckets: int = 16,
        seed: int = 0,
        root_aux: str = "mean",
    ) -> None:
        nn.Module.__init__(self)
        ContextProvider.__init__(self, dim, root_aux)
        if not isinstance(vocab, Mapping):
            vocab = {form: i for i, form in enumerate(sorted(set(vocab)))}
        if sorted(vocab.values()) != list(range(len(vocab))):
            raise EmbeddingError("vocab ids must be exactly 0..len(vocab)-1")
        if n_buckets <= 0:
            raise EmbeddingError(f"need at least one OOV bucket, got {n_buckets}")
        self.vocab = dict(vocab)
        self.n_buckets = n_buckets
        self.seed = seed
        self.table = nn.Embedding(len(self.vocab) + n_buckets, dim)
        generator = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            self.table.weight.copy_(
                torch.randn((len(self.vocab) + n_buckets, dim), generator=generator)
            )

    def _row(self, form: str) -> int:
        idx = self.vocab.get(form)
        if idx is not None:
            return idx
        return len(self.vocab) + _stable_digest("oov", form) % self.n_buckets

    def encode_span(
        self, context: Sequence[str], span: tuple[int, int]
    ) -> torch.Tensor:
        ids = torch.tensor(
            [self._row(form) for form in context[span[0] : span[1]]],
            dtype=torch.long,
        )
        return self.table(ids)

    def embed_nodes(
        self,
        token_forms: Sequence[str],
        lin: LinearizedLattice,
        sent_id: str | None = None,
    ) -> torch.Tensor:
        segment_rows = [
            self._row(node.form)
            for node in lin.nodes
            if node.kind is NodeKind.SEGMENT
        ]
        segment_vecs = self.table(torch.tensor(segment_rows, dtype=torch.long))
        if self.root_aux == "mean":
            token_ids = torch.tensor(
                [self._row(form) for form in token_forms], dtype=torch.long
            )
            virtual = self.table(token_ids).mean(dim=0)
        else:
            virtual = segment_vecs.new_zeros(self.dim)
        return torch.cat([virtual[None], virtual[None], segment_vecs], dim=0)


class ToyContextProvider(ContextProvider):
    """Deterministic context-sensitive vectors for experiments and tests.

    Each position gets a stable hash vector for its own form plus decayed
    hash vectors keyed by (direction, offset, neighbour form), so the same
    form embeds differently when its neighbourhood changes.
    """

    def __init__(
        self, dim: int, seed: int = 0, window: int = 1, root_aux: str = "mean"
    ) -> None:
        super().__init__(dim, root_aux)
        self.seed = seed
        self.window = window
        self._cache: dict[tuple, np.ndarray] = {}

    def _hash_vector(self, key: tuple) -> np.ndarray:
        vec = self._cache.get(key)
        if vec is None:
            rng = np.random.default_rng(_stable_digest(self.seed, *key))
            vec = rng.standard_normal(self.dim)
            self._cache[key] = vec
        return vec

    def encode_span(
        self, context: Sequence[str], span: tuple[int, int]
    ) -> torch.Tensor:
        out = np.zeros((span[1] - span[0], self.dim))
        for row, pos in enumerate(range(span[0], span[1])):
            acc = self._hash_vector(("form", context[pos])).copy()
            for offset in range(1, self.window + 1):
                left = context[pos - offset] if pos - offset >= 0 else PAD_FORM
                right = (
                    context[pos + offset] if pos + offset < len(context) else PAD_FORM
                )
                decay = 0.5 / offset
                acc += decay * self._hash_vector(("L", offset, left))
                acc += decay * self._hash_vector(("R", offset, right))
            out[row] = acc
        return torch.from_numpy(out).float()


NodeKey = tuple[str, int, int, int]


class PrecomputedProvider(EmbeddingProvider):
    """Vectors read from a file, keyed by (sent_id, token, analysis, within).

    Virtual nodes use token index 0 with within-index 0 (root) and 1
    (attachment sink).  A node with no stored vector is an error that
    names the node, so mismatched files fail loudly.
    """

    def __init__(self, dim: int, vectors: Mapping[NodeKey, np.ndarray]) -> None:
        if dim <= 0:
            raise EmbeddingError(f"embedding dim must be positive, got {dim}")
        self.dim = dim
        self.vectors = dict(vectors)
        for key, vec in self.vectors.items():
            if vec.shape != (dim,):
                raise EmbeddingError(
                    f"vector for node {key} has shape {vec.shape}, expected ({dim},)"
                )

    @classmethod
    def from_file(cls, path: str | Path) -> "PrecomputedProvider":
        dim: int | None = None
        vectors: dict[NodeKey, np.ndarray] = {}
        with open(path, encoding="utf-8") as handle:
            for lineno, raw in enumerate(handle, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if dim is None:
                    name, _, value = line.partition("=")
                    if name.strip() != "dim":
                        raise EmbeddingError(
                            f"{path}:{lineno}: expected 'dim=<n>' header, got {line!r}"
                        )
                    dim = int(value)
                    continue
                parts = line.split()
                if len(parts) != 4 + dim:
                    raise EmbeddingError(
                        f"{path}:{lineno}: expected 4 key fields + {dim} values, "
                        f"got {len(parts)} fields"
                    )
                key = (parts[0], int(parts[1]), int(parts[2]), int(parts[3]))
                vectors[key] = np.array([float(x) for x in parts[4:]])
        if dim is None:
            raise EmbeddingError(f"{path}: empty vector file")
        return cls(dim, vectors)

    def _lookup(self, key: NodeKey) -> np.ndarray:
        vec = self.vectors.get(key)
        if vec is None:
            sent_id, token_idx, analysis_idx, within_idx = key
            raise EmbeddingError(
                f"no vector for sentence {sent_id!r} token {token_idx} "
                f"analysis {analysis_idx} segment {within_idx}"
            )
        return vec

    def embed_nodes(
        self,
        token_forms: Sequence[str],
        lin: LinearizedLattice,
        sent_id: str | None = None,
    ) -> torch.Tensor:
        if sent_id is None:
            raise EmbeddingError("precomputed vectors require a sentence id")
        rows = np.zeros((len(lin.nodes), self.dim))
        for pos, node in enumerate(lin.nodes):
            key = (sent_id, node.token_idx, node.analysis_idx, node.within_idx)
            rows[pos] = self._lookup(key)
        return torch.from_numpy(rows).float()


def write_vectors_file(
    path: str | Path, dim: int, records: Iterable[tuple[NodeKey, np.ndarray]]
) -> None:
    """Write the flat vector-file format PrecomputedProvider reads."""
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"dim={dim}\n")
        for (sent_id, token_idx, analysis_idx, within_idx), vec in records:
            if vec.shape != (dim,):
                raise EmbeddingError(
                    f"vector for ({sent_id}, {token_idx}, {analysis_idx}, "
                    f"{within_idx}) has shape {vec.shape}, expected ({dim},)"
                )
            values = " ".join(repr(float(x)) for x in vec)
            handle.write(
                f"{sent_id} {token_idx} {analysis_idx} {within_idx} {values}\n"
            )


def precompute_records(
    provider: EmbeddingProvider,
    sent_id: str,
    token_forms: Sequence[str],
    lin: LinearizedLattice,
) -> list[tuple[NodeKey, np.ndarray]]:
    """Materialize one sentence's node vectors as vector-file records."""
    rows = provider.embed_nodes(token_forms, lin, sent_id=sent_id)
    records = []
    for pos, node in enumerate(lin.nodes):
        key = (sent_id, node.token_idx, node.analysis_idx, node.within_idx)
        records.append((key, rows[pos].detach().numpy().astype(float)))
    return records


def embed_lattice(
    provider: EmbeddingProvider,
    token_forms: Sequence[str],
    lin: LinearizedLattice,
    sent_id: str | None = None,
) -> torch.Tensor:
    """Provider call with shape and finiteness checks."""
    rows = provider.embed_nodes(token_forms, lin, sent_id=sent_id)
    expected = (len(lin.nodes), provider.dim)
    if tuple(rows.shape) != expected:
        raise EmbeddingError(
            f"provider returned shape {tuple(rows.shape)}, expected {expected}"
        )
    finite = torch.isfinite(rows).all(dim=1)
    if not bool(finite.all()):
        pos = int((~finite).nonzero()[0])
        node = lin.nodes[pos]
        raise EmbeddingError(
            f"non-finite embedding for node {pos} "
            f"(token {node.token_idx}, analysis {node.analysis_idx}, "
            f"segment {node.within_idx})"
        )
    return rows


def make_provider(
    kind: str,
    dim: int,
    *,
    vocab: Iterable[str] | None = None,
    vectors_path: str | Path | None = None,
    seed: int = 0,
    root_aux: str = "mean",
) -> EmbeddingProvider:
    """Construct a provider by name (static | toyctx | precomputed)."""
    if kind == "static":
        if vocab is None:
            raise EmbeddingError("static provider needs a vocabulary")
        return StaticProvider(vocab, dim, seed=seed, root_aux=root_aux)
    if kind == "toyctx":
        return ToyContextProvider(dim, seed=seed, root_aux=root_aux)
    if kind == "precomputed":
        if vectors_path is None:
            raise EmbeddingError("precomputed provider needs a vectors file")
        provider = PrecomputedProvider.from_file(vectors_path)
        if provider.dim != dim:
            raise EmbeddingError(
                f"vectors file has dim {provider.dim}, model expects {dim}"
            )
        return provider
    raise EmbeddingError(f"unknown embedding provider {kind!r}")


def provider_state(provider: EmbeddingProvider) -> dict:
    """Serializable description of a provider, for checkpoints.

    Precomputed vectors are deliberately not embedded in the state: at
    parse time the caller supplies a vectors file for the new input.
    """
    if isinstance(provider, StaticProvider):
        forms = sorted(provider.vocab, key=provider.vocab.__getitem__)
        return {
            "kind": "static",
            "dim": provider.dim,
            "n_buckets": provider.n_buckets,
            "seed": provider.seed,
            "root_aux": provider.root_aux,
            "vocab": forms,
            "weights": provider.table.weight.detach().clone(),
        }
    if isinstance(provider, ToyContextProvider):
        return {
            "kind": "toyctx",
            "dim": provider.dim,
            "seed": provider.seed,
            "window": provider.window,
            "root_aux": provider.root_aux,
        }
    if isinstance(provider, PrecomputedProvider):
        return {"kind": "precomputed", "dim": provider.dim}
    raise EmbeddingError(f"cannot serialize provider of type {type(provider).__name__}")


def provider_from_state(
    state: dict, vectors_path: str | Path | None = None
) -> EmbeddingProvider:
    kind = state.get("kind")
    if kind == "static":
        vocab = {form: i for i, form in enumerate(state["vocab"])}
        provider = StaticProvider(
            vocab,
            state["dim"],
            n_buckets=state["n_buckets"],
            seed=state["seed"],
            root_aux=state["root_aux"],
        )
        with torch.no_grad():
            provider.table.weight.copy_(state["weights"])
        return provider
    if kind == "toyctx":
        return ToyContextProvider(
            state["dim"],
            seed=state["seed"],
            window=state["window"],
            root_aux=state["root_aux"],
        )
    if kind == "precomputed":
        if vectors_path is None:
            raise EmbeddingError(
                "this model was trained with precomputed vectors; pass a vectors "
                "file for the sentences being parsed"
            )
        provider = PrecomputedProvider.from_file(vectors_path)
        if provider.dim != state["dim"]:
            raise EmbeddingError(
                f"vectors file has dim {provider.dim}, checkpoint expects {state['dim']}"
            )
        return provider
    raise EmbeddingError(f"unknown provider kind {kind!r} in checkpoint")


def lattice_vocabulary(lattices: Iterable[SentenceLattice]) -> list[str]:
    """All token and segment forms occurring in the lattices, sorted."""
    forms: set[str] = set()
    for lattice in lattices:
        for token_lattice in lattice.tokens:
            forms.add(token_lattice.token.form)
            for analysis in token_lattice.analyses:
                forms.update(analysis.forms())
    return sorted(forms)
