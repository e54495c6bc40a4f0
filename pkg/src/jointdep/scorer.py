"""Joint scorer: shared BiLSTM, biaffine arc/label scoring, tagging branch.

Every node of a linearized lattice is scored as a dependent of every
node (including the virtual root and attachment sink), labels get a
per-relation biaffine, and a separate branch predicts POS and
Gender/Number/Person per node.  Both branches read a shared BiLSTM over
the node embeddings; the parser branch and the tagging branch each add
their own BiLSTM on top.

Score orientation throughout: ``head_scores[d, h]`` is the score of
node h heading node d (rows are dependents).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .conllu import NO_VALUE, GoldSentence
from .embedding import embed_lattice, provider_from_state, provider_state
from .errors import ConfigError, GoldPathError, TrainingError
from .lattice import (
    AUX_INDEX,
    NUM_VIRTUAL_NODES,
    ROOT_INDEX,
    LinearizedLattice,
    NodeKind,
    segments_of,
)

AUX_LABEL = "aux-discard"
MTL_TASKS = ("pos", "gender", "number", "person")

CHECKPOINT_VERSION = 1


@dataclass
class ScorerConfig:
    """Scorer architecture and optimization settings.

    Defaults are the full-scale operating point; tests shrink the sizes.
    """

    embedding_dim: int = 768
    rnn_hidden: int = 600
    shared_rnn_depth: int = 2
    branch_rnn_depth: int = 1
    arc_mlp_size: int = 500
    label_mlp_size: int = 100
    mtl_hidden: int = 600
    embedding_dropout: float = 0.3
    arc_mlp_dropout: float = 0.3
    label_mlp_dropout: float = 0.3
    learning_rate: float = 1e-3
    batch_size: int = 32
    grad_clip_norm: float = 5.0
    label_set: tuple[str, ...] = ()
    tag_sets: dict[str, tuple[str, ...]] = field(default_factory=dict)
    mtl_tasks: tuple[str, ...] = MTL_TASKS
    aux_label_in_loss: bool = True

    def __post_init__(self) -> None:
        for name in (
            "embedding_dim",
            "rnn_hidden",
            "shared_rnn_depth",
            "branch_rnn_depth",
            "arc_mlp_size",
            "label_mlp_size",
            "mtl_hidden",
            "batch_size",
        ):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("embedding_dropout", "arc_mlp_dropout", "label_mlp_dropout"):
            rate = getattr(self, name)
            if not 0.0 <= rate < 1.0:
                raise ConfigError(f"{name} must be in [0, 1), got {rate}")
        if self.learning_rate < 0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.grad_clip_norm <= 0:
            raise ConfigError(f"grad_clip_norm must be positive, got {self.grad_clip_norm}")
        unknown = [t for t in self.mtl_tasks if t not in MTL_TASKS]
        if unknown:
            raise ConfigError(
                f"unknown tagging tasks {unknown}; supported: {list(MTL_TASKS)}"
            )
        if self.label_set and AUX_LABEL not in self.label_set:
            self.label_set = (*self.label_set, AUX_LABEL)
        normalized = {}
        for task, tags in self.tag_sets.items():
            if NO_VALUE not in tags:
                tags = (NO_VALUE, *tags)
            normalized[task] = tuple(tags)
        self.tag_sets = normalized

    def label_index(self) -> dict[str, int]:
        return {label: i for i, label in enumerate(self.label_set)}

    def tag_index(self, task: str) -> dict[str, int]:
        return {tag: i for i, tag in enumerate(self.tag_sets[task])}


def config_with_inventory(
    config: ScorerConfig, sentences: Iterable[GoldSentence]
) -> ScorerConfig:
    """Fill label_set / tag_sets from a treebank (sorted, determinate)."""
    labels: set[str] = set()
    tags: dict[str, set[str]] = {task: set() for task in config.mtl_tasks}
    for sentence in sentences:
        for seg in sentence.all_segments():
            if seg.label is not None:
                labels.add(seg.label)
            for task in config.mtl_tasks:
                tags[task].add(seg.tag(task))
    if not labels:
        raise ConfigError("treebank carries no dependency labels")
    label_set = tuple(sorted(labels - {AUX_LABEL})) + (AUX_LABEL,)
    tag_sets = {
        task: (NO_VALUE, *sorted(values - {NO_VALUE}))
        for task, values in tags.items()
    }
    return dataclasses.replace(config, label_set=label_set, tag_sets=tag_sets)


@dataclass
class ScoreSet:
    """All scores for one linearized lattice (n nodes, L labels)."""

    head_scores: torch.Tensor  # (n, n): [dependent, head]
    label_scores: torch.Tensor  # (n, n, L)
    mtl_logits: dict[str, torch.Tensor]  # task -> (n, |tags|)
    label_set: tuple[str, ...]
    tag_sets: dict[str, tuple[str, ...]]

    def __post_init__(self) -> None:
        n = self.head_scores.shape[0]
        if self.head_scores.shape != (n, n):
            raise ConfigError(f"head_scores must be square, got {tuple(self.head_scores.shape)}")
        if self.label_scores.shape != (n, n, len(self.label_set)):
            raise ConfigError(
                f"label_scores shape {tuple(self.label_scores.shape)} does not match "
                f"{n} nodes x {len(self.label_set)} labels"
            )


class _Mlp(nn.Module):
    def __init__(self, in_size: int, out_size: int, dropout: float) -> None:
        super().__init__()
        self.linear = nn.Linear(in_size, out_size)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.dropout(torch.relu(self.linear(x)))


class JointScorer(nn.Module):
    """Arc-factored biaffine parser with a shared tagging branch."""

    def __init__(self, config: ScorerConfig) -> None:
        super().__init__()
        if not config.label_set:
            raise ConfigError(
                "label_set is empty; derive it with config_with_inventory or set it"
            )
        for task in config.mtl_tasks:
            if task not in config.tag_sets or not config.tag_sets[task]:
                raise ConfigError(
                    f"tagging task {task!r} has no tag set; derive it with "
                    "config_with_inventory"
                )
        self.config = config
        hidden2 = 2 * config.rnn_hidden
        n_labels = len(config.label_set)

        self.embedding_dropout = nn.Dropout(config.embedding_dropout)
        self.shared_rnn = nn.LSTM(
            config.embedding_dim,
            config.rnn_hidden,
            num_layers=config.shared_rnn_depth,
            bidirectional=True,
            batch_first=True,
        )
        self.arc_rnn = nn.LSTM(
            hidden2,
            config.rnn_hidden,
            num_layers=config.branch_rnn_depth,
            bidirectional=True,
            batch_first=True,
        )
        self.mtl_rnn = nn.LSTM(
            hidden2,
            config.rnn_hidden,
            num_layers=config.branch_rnn_depth,
            bidirectional=True,
            batch_first=True,
        )

        self.arc_dep = _Mlp(hidden2, config.arc_mlp_size, config.arc_mlp_dropout)
        self.arc_head = _Mlp(hidden2, config.arc_mlp_size, config.arc_mlp_dropout)
        self.arc_bilinear = nn.Parameter(
            torch.empty(config.arc_mlp_size, config.arc_mlp_size)
        )
        self.arc_head_bias = nn.Parameter(torch.zeros(config.arc_mlp_size))

        self.label_dep = _Mlp(hidden2, config.label_mlp_size, config.label_mlp_dropout)
        self.label_head = _Mlp(hidden2, config.label_mlp_size, config.label_mlp_dropout)
        self.label_bilinear = nn.Parameter(
            torch.empty(n_labels, config.label_mlp_size, config.label_mlp_size)
        )
        self.label_dep_bias = nn.Parameter(torch.zeros(n_labels, config.label_mlp_size))
        self.label_head_bias = nn.Parameter(torch.zeros(n_labels, config.label_mlp_size))
        self.label_bias = nn.Parameter(torch.zeros(n_labels))

        self.mtl_reduce = nn.Linear(hidden2, config.mtl_hidden)
        self.task_heads = nn.ModuleDict(
            {
                task: nn.Linear(config.mtl_hidden, len(config.tag_sets[task]))
                for task in config.mtl_tasks
            }
        )
        self._init_weights()

    def _init_weights(self) -> None:
        nn.init.xavier_uniform_(self.arc_bilinear)
        for l in range(self.label_bilinear.shape[0]):
            nn.init.xavier_uniform_(self.label_bilinear[l])
        for module in (
            self.arc_dep.linear,
            self.arc_head.linear,
            self.label_dep.linear,
            self.label_head.linear,
            self.mtl_reduce,
            *self.task_heads.values(),
        ):
            nn.init.xavier_uniform_(module.weight)
            nn.init.zeros_(module.bias)
        for rnn in (self.shared_rnn, self.arc_rnn, self.mtl_rnn):
            for name, param in rnn.named_parameters():
                if name.startswith("weight"):
                    nn.init.xavier_uniform_(param)
                    continue
                nn.init.zeros_(param)
                if name.startswith("bias_ih"):
                    # forget-gate slice; keeps memory open early in training
                    hidden = param.shape[0] // 4
                    with torch.no_grad():
                        param[hidden : 2 * hidden].fill_(1.0)

    def forward(self, embeddings: torch.Tensor) -> ScoreSet:
        if embeddings.dim() != 2 or embeddings.shape[1] != self.config.embedding_dim:
            raise ConfigError(
                f"expected embeddings of shape (n, {self.config.embedding_dim}), "
                f"got {tuple(embeddings.shape)}"
            )
        x = self.embedding_dropout(embeddings)[None]
        shared, _ = self.shared_rnn(x)
        arc_states = self.arc_rnn(shared)[0][0]
        mtl_states = self.mtl_rnn(shared)[0][0]

        dep = self.arc_dep(arc_states)
        head = self.arc_head(arc_states)
        head_scores = dep @ self.arc_bilinear @ head.T + (head @ self.arc_head_bias)[None, :]

        ldep = self.label_dep(arc_states)
        lhead = self.label_head(arc_states)
        label_scores = (
            torch.einsum("di,lij,hj->dhl", ldep, self.label_bilinear, lhead)
            + (ldep @ self.label_dep_bias.T)[:, None, :]
            + (lhead @ self.label_head_bias.T)[None, :, :]
            + self.label_bias
        )

        mtl = torch.relu(self.mtl_reduce(mtl_states))
        logits = {task: head_mod(mtl) for task, head_mod in self.task_heads.items()}
        return ScoreSet(
            head_scores=head_scores,
            label_scores=label_scores,
            mtl_logits=logits,
            label_set=self.config.label_set,
            tag_sets=dict(self.config.tag_sets),
        )

    def score(self, embeddings: torch.Tensor, mode: str = "eval") -> ScoreSet:
        """Forward pass with the train/eval mode set explicitly."""
        if mode not in ("train", "eval"):
            raise ConfigError(f"unknown scoring mode {mode!r}")
        was_training = self.training
        self.train(mode == "train")
        try:
            return self(embeddings)
        finally:
            self.train(was_training)


@dataclass
class GoldTargets:
    """Per-node training targets for one sentence.

    Index -1 marks nodes excluded from the corresponding loss component
    (virtual nodes everywhere; non-gold-path segments for the taggers).
    """

    gold_head: np.ndarray  # (n,) node position of the gold head
    gold_label: np.ndarray  # (n,) label index at the gold head
    gold_tags: dict[str, np.ndarray]  # task -> (n,) tag index
    gold_analysis: tuple[int, ...]  # chosen analysis per token, 1-based


def build_gold_targets(
    lin: LinearizedLattice, gold: GoldSentence, config: ScorerConfig
) -> GoldTargets:
    """Project a gold sentence onto lattice nodes.

    Gold-path segments point at their gold heads; segments of competing
    analyses point at the attachment sink and carry the reserved discard
    label.  The gold segmentation must be one of the lattice's analyses.
    """
    if not gold.annotated:
        raise GoldPathError(f"sentence {gold.sent_id!r} has no gold heads")
    n = len(lin.nodes)
    label_index = config.label_index()
    if AUX_LABEL not in label_index:
        raise ConfigError(f"label set must include {AUX_LABEL!r}")
    aux_label_idx = label_index[AUX_LABEL]

    gold_analysis: list[int] = []
    node_of_gold: dict[int, int] = {}
    gold_seg_id = 0
    for token_idx, group in enumerate(gold.segments, start=1):
        gold_forms = tuple(seg.form for seg in group)
        match = None
        for analysis_idx in range(1, lin.analysis_counts[token_idx - 1] + 1):
            start, end = segments_of(lin, token_idx, analysis_idx)
            if tuple(lin.nodes[p].form for p in range(start, end)) == gold_forms:
                match = analysis_idx
                break
        if match is None:
            raise GoldPathError(
                f"sentence {gold.sent_id!r}: gold analysis {'+'.join(gold_forms)} of "
                f"token {token_idx} ({gold.tokens[token_idx - 1]!r}) is not in its lattice"
            )
        gold_analysis.append(match)
        start, end = segments_of(lin, token_idx, match)
        for offset in range(end - start):
            gold_seg_id += 1
            node_of_gold[gold_seg_id] = start + offset

    gold_head = np.full(n, -1, dtype=np.int64)
    gold_label = np.full(n, -1, dtype=np.int64)
    gold_tags = {
        task: np.full(n, -1, dtype=np.int64) for task in config.mtl_tasks
    }
    gold_path_nodes = set(node_of_gold.values())

    for pos, node in enumerate(lin.nodes):
        if node.kind is not NodeKind.SEGMENT:
            continue
        if pos not in gold_path_nodes:
            gold_head[pos] = AUX_INDEX
            if config.aux_label_in_loss:
                gold_label[pos] = aux_label_idx

    all_segments = gold.all_segments()
    tag_indices = {task: config.tag_index(task) for task in config.mtl_tasks}
    for seg_id, pos in node_of_gold.items():
        seg = all_segments[seg_id - 1]
        head = seg.head
        gold_head[pos] = ROOT_INDEX if head == 0 else node_of_gold[head]
        if seg.label not in label_index:
            raise ConfigError(
                f"sentence {gold.sent_id!r}: label {seg.label!r} missing from label set"
            )
        gold_label[pos] = label_index[seg.label]
        for task in config.mtl_tasks:
            tag = seg.tag(task)
            if tag not in tag_indices[task]:
                raise ConfigError(
                    f"sentence {gold.sent_id!r}: {task} tag {tag!r} missing from tag set"
                )
            gold_tags[task][pos] = tag_indices[task][tag]

    return GoldTargets(
        gold_head=gold_head,
        gold_label=gold_label,
        gold_tags=gold_tags,
        gold_analysis=tuple(gold_analysis),
    )


def loss(
    scores: ScoreSet, targets: GoldTargets
) -> tuple[torch.Tensor, dict[str, torch.Tensor]]:
    """Total loss and its components (head, label, one per tagging task).

    Each component is a mean cross-entropy over its scored nodes; the
    total is exactly the sum of the components.  Components with no
    scored nodes contribute zero.
    """
    dtype = scores.head_scores.dtype
    components: dict[str, torch.Tensor] = {}

    head_rows = np.nonzero(targets.gold_head >= 0)[0]
    if head_rows.size:
        rows = torch.from_numpy(head_rows)
        gold = torch.from_numpy(targets.gold_head[head_rows])
        components["head"] = F.cross_entropy(scores.head_scores[rows], gold)
    else:
        components["head"] = torch.zeros((), dtype=dtype)

    label_rows = np.nonzero(targets.gold_label >= 0)[0]
    if label_rows.size:
        rows = torch.from_numpy(label_rows)
        heads = torch.from_numpy(targets.gold_head[label_rows])
        gold = torch.from_numpy(targets.gold_label[label_rows])
        components["label"] = F.cross_entropy(scores.label_scores[rows, heads], gold)
    else:
        components["label"] = torch.zeros((), dtype=dtype)

    for task, logits in scores.mtl_logits.items():
        task_rows = np.nonzero(targets.gold_tags[task] >= 0)[0]
        if task_rows.size:
            rows = torch.from_numpy(task_rows)
            gold = torch.from_numpy(targets.gold_tags[task][task_rows])
            components[task] = F.cross_entropy(logits[rows], gold)
        else:
            components[task] = torch.zeros((), dtype=dtype)

    total = torch.stack([c.double() for c in components.values()]).sum()
    return total, components


@dataclass
class TrainItem:
    """One training sentence, pre-linearized with its targets."""

    sent_id: str
    token_forms: tuple[str, ...]
    lin: LinearizedLattice
    targets: GoldTargets
    cached_embedding: torch.Tensor | None = None


def make_optimizer(
    model: JointScorer, provider, config: ScorerConfig
) -> torch.optim.Optimizer:
    params = list(model.parameters())
    if getattr(provider, "trainable", False):
        params += list(provider.parameters())
    return torch.optim.Adam(params, lr=config.learning_rate)


def train_step(
    model: JointScorer,
    provider,
    optimizer: torch.optim.Optimizer,
    batch: Sequence[TrainItem],
    config: ScorerConfig,
) -> float:
    """One optimizer step on a batch; returns the mean batch loss."""
    if not batch:
        raise ConfigError("empty training batch")
    model.train()
    total = torch.zeros((), dtype=torch.float64)
    for item in batch:
        if item.cached_embedding is not None and not getattr(provider, "trainable", False):
            emb = item.cached_embedding
        else:
            emb = embed_lattice(provider, item.token_forms, item.lin, item.sent_id)
        scores = model(emb)
        sentence_loss, _ = loss(scores, item.targets)
        total = total + sentence_loss
    mean = total / len(batch)

    optimizer.zero_grad()
    mean.backward()
    named = list(model.named_parameters())
    if getattr(provider, "trainable", False):
        named += [(f"provider.{n}", p) for n, p in provider.named_parameters()]
    for name, param in named:
        if param.grad is not None and not bool(torch.isfinite(param.grad).all()):
            raise TrainingError(
                f"non-finite gradient in {name} "
                f"(batch loss {float(mean.detach()):.6g})"
            )
    torch.nn.utils.clip_grad_norm_(
        [p for _, p in named], max_norm=config.grad_clip_norm
    )
    optimizer.step()
    return float(mean.detach())


# --- flat key=value config files -------------------------------------------

_INT_FIELDS = {
    "embedding_dim",
    "rnn_hidden",
    "shared_rnn_depth",
    "branch_rnn_depth",
    "arc_mlp_size",
    "label_mlp_size",
    "mtl_hidden",
    "batch_size",
}
_FLOAT_FIELDS = {
    "embedding_dropout",
    "arc_mlp_dropout",
    "label_mlp_dropout",
    "learning_rate",
    "grad_clip_norm",
}
_BOOL_FIELDS = {"aux_label_in_loss"}
_TUPLE_FIELDS = {"label_set", "mtl_tasks"}


def config_to_keyvalues(config: ScorerConfig) -> dict[str, str]:
    out: dict[str, str] = {}
    for name in sorted(_INT_FIELDS | _FLOAT_FIELDS):
        out[name] = repr(getattr(config, name))
    for name in _BOOL_FIELDS:
        out[name] = "true" if getattr(config, name) else "false"
    for name in _TUPLE_FIELDS:
        out[name] = ",".join(getattr(config, name))
    for task, tags in sorted(config.tag_sets.items()):
        out[f"tag_sets.{task}"] = ",".join(tags)
    return out


def config_from_keyvalues(
    values: Mapping[str, str], base: ScorerConfig | None = None
) -> ScorerConfig:
    kwargs = dataclasses.asdict(base) if base is not None else {}
    kwargs.pop("tag_sets", None)
    tag_sets: dict[str, tuple[str, ...]] = dict(base.tag_sets) if base else {}
    for key, raw in values.items():
        value = raw.strip()
        if key.startswith("tag_sets."):
            task = key[len("tag_sets.") :]
            tag_sets[task] = tuple(v for v in value.split(",") if v)
        elif key in _INT_FIELDS:
            try:
                kwargs[key] = int(value)
            except ValueError as exc:
                raise ConfigError(f"config key {key}: expected integer, got {value!r}") from exc
        elif key in _FLOAT_FIELDS:
            try:
                kwargs[key] = float(value)
            except ValueError as exc:
                raise ConfigError(f"config key {key}: expected number, got {value!r}") from exc
        elif key in _BOOL_FIELDS:
            if value not in ("true", "false"):
                raise ConfigError(f"config key {key}: expected true/false, got {value!r}")
            kwargs[key] = value == "true"
        elif key in _TUPLE_FIELDS:
            kwargs[key] = tuple(v for v in value.split(",") if v)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    return ScorerConfig(tag_sets=tag_sets, **kwargs)


def read_keyvalues(path: str | Path) -> dict[str, str]:
    """Parse a flat `key = value` file (# comments, blank lines allowed)."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            out[key.strip()] = value.strip()
    return out


# --- checkpoints ------------------------------------------------------------


@dataclass
class LoadedModel:
    model: JointScorer
    provider: object
    config: ScorerConfig
    metadata: dict


def save_checkpoint(
    path: str | Path,
    model: JointScorer,
    provider,
    metadata: dict | None = None,
) -> None:
    payload = {
        "version": CHECKPOINT_VERSION,
        "config": config_to_keyvalues(model.config),
        "model_state": model.state_dict(),
        "provider": provider_state(provider),
        "metadata": dict(metadata or {}),
    }
    torch.save(payload, path)


def load_checkpoint(
    path: str | Path, vectors_path: str | Path | None = None
) -> LoadedModel:
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise ConfigError(f"cannot read checkpoint {path}: {exc}") from exc
    version = payload.get("version")
    if version != CHECKPOINT_VERSION:
        raise ConfigError(
            f"checkpoint {path} has version {version}, expected {CHECKPOINT_VERSION}"
        )
    config = config_from_keyvalues(payload["config"])
    model = JointScorer(config)
    model.load_state_dict(payload["model_state"])
    model.eval()
    provider = provider_from_state(payload["provider"], vectors_path=vectors_path)
    if provider.dim != config.embedding_dim:
        raise ConfigError(
            f"provider dim {provider.dim} does not match model embedding dim "
            f"{config.embedding_dim}"
        )
    return LoadedModel(
        model=model,
        provider=provider,
        config=config,
        metadata=payload.get("metadata", {}),
    )
