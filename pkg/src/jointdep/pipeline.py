"""Training, parsing and evaluation orchestration.

Ties the pieces together: lexicon -> lattices -> embeddings -> scorer ->
decoder -> treebank.  Training always infuses the training lexicon with
the training treebank's gold analyses (targets are undefined when the
gold path is missing from a lattice); the infused/uninfused switch
controls the lattices built for dev/test sentences only.
"""

from __future__ import annotations

import copy
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import torch

from .conllu import GoldSegment, GoldSentence, read_treebank, write_treebank
from .decoder import JointParse, decode
from .embedding import (
    EmbeddingProvider,
    embed_lattice,
    lattice_vocabulary,
    make_provider,
)
from .errors import ConfigError, DataError
from .evaluation import PRF, RunReport, aligned_multiset_f1, evaluate_run
from .lattice import SentenceLattice, Token, TokenLattice, linearize
from .morph import Lexicon, MAMode, build_sentence_lattice, infuse, load_lexicon
from .scorer import (
    JointScorer,
    ScorerConfig,
    TrainItem,
    build_gold_targets,
    config_with_inventory,
    load_checkpoint,
    make_optimizer,
    save_checkpoint,
    train_step,
)

log = logging.getLogger("jointdep")


@dataclass
class RunConfig:
    """Everything a train/parse/eval run needs; the CLI fills this in."""

    treebank: Path | None = None
    dev: Path | None = None
    input: Path | None = None
    gold: Path | None = None
    pred_paths: tuple[Path, ...] = ()
    lexicon: Path | None = None
    vectors: Path | None = None
    checkpoint: Path | None = None
    checkpoint_dir: Path | None = None
    output: Path | None = None
    ma_mode: MAMode = MAMode.INFUSED
    provider: str = "static"
    seeds: tuple[int, ...] = (1,)
    epochs: int = 20
    eval_every: int = 1
    scorer: ScorerConfig = field(default_factory=ScorerConfig)
    single_root: bool = True
    analysis_score: str = "max"
    n_buckets: int = 16
    root_aux: str = "mean"
    target_seg_f1: float | None = None
    target_dep_f1: float | None = None
    dep_strict: bool = False


def tokens_of(forms: Sequence[str]) -> tuple[Token, ...]:
    return tuple(Token(index=i, form=f) for i, f in enumerate(forms, start=1))


def first_analysis_lattice(lattice: SentenceLattice) -> SentenceLattice:
    """Commit every token to its first lexicon analysis (pipeline baseline)."""
    return SentenceLattice(
        tokens=tuple(
            TokenLattice(token=tl.token, analyses=tl.analyses[:1])
            for tl in lattice.tokens
        )
    )


def parse_to_sentence(
    sent_id: str, token_forms: Sequence[str], parse: JointParse
) -> GoldSentence:
    """Reshape a decoded parse into the treebank sentence type."""
    groups: list[list] = [[] for _ in token_forms]
    for seg in parse.segments:
        groups[seg.token_idx - 1].append(seg)
    return GoldSentence(
        sent_id=sent_id,
        tokens=tuple(token_forms),
        segments=tuple(
            tuple(
                GoldSegment(
                    form=s.form,
                    head=s.head,
                    label=s.label,
                    pos=s.pos,
                    gender=s.gender,
                    number=s.number,
                    person=s.person,
                )
                for s in group
            )
            for group in groups
        ),
    )


def parse_corpus(
    model: JointScorer,
    provider: EmbeddingProvider,
    lexicon: Lexicon,
    sentences: Sequence[GoldSentence],
    single_root: bool = True,
    analysis_score: str = "max",
    first_analysis_only: bool = False,
) -> list[GoldSentence]:
    """Parse every sentence; returns predictions in input order."""
    model.eval()
    out: list[GoldSentence] = []
    for sentence in sentences:
        lattice = build_sentence_lattice(lexicon, tokens_of(sentence.tokens))
        if first_analysis_only:
            lattice = first_analysis_lattice(lattice)
        lin = linearize(lattice)
        emb = embed_lattice(provider, sentence.tokens, lin, sentence.sent_id)
        with torch.no_grad():
            scores = model(emb)
        parse = decode(
            lin, scores, single_root=single_root, analysis_score=analysis_score
        )
        out.append(parse_to_sentence(sentence.sent_id, sentence.tokens, parse))
    return out


@dataclass
class EpochStats:
    epoch: int
    mean_loss: float
    dev_scores: dict[str, PRF] | None


@dataclass
class SeedOutcome:
    seed: int
    model: JointScorer
    provider: EmbeddingProvider
    scorer_config: ScorerConfig
    best_dev: dict[str, PRF] | None
    history: list[EpochStats]
    epochs_run: int


def _dev_lexicon(train_lexicon: Lexicon, dev: Sequence[GoldSentence], cfg: RunConfig) -> Lexicon:
    if cfg.ma_mode is MAMode.INFUSED:
        return infuse(train_lexicon, dev)
    return train_lexicon


def train_single_seed(
    seed: int,
    train_sentences: Sequence[GoldSentence],
    dev_sentences: Sequence[GoldSentence],
    lexicon: Lexicon,
    cfg: RunConfig,
) -> SeedOutcome:
    """Train one model; model selection is by dev dependency F1.

    Stops early once both target F1s (when set) are reached, and always
    restores the best dev checkpoint before returning.
    """
    torch.manual_seed(seed)
    rng = random.Random(seed)

    train_lexicon = infuse(lexicon, train_sentences)
    dev_lexicon = _dev_lexicon(train_lexicon, dev_sentences, cfg)
    scorer_cfg = cfg.scorer
    if not scorer_cfg.label_set:
        scorer_cfg = config_with_inventory(scorer_cfg, train_sentences)

    lattices = [
        build_sentence_lattice(train_lexicon, tokens_of(s.tokens))
        for s in train_sentences
    ]
    provider = make_provider(
        cfg.provider,
        scorer_cfg.embedding_dim,
        vocab=lattice_vocabulary(lattices),
        vectors_path=cfg.vectors,
        seed=seed,
        root_aux=cfg.root_aux,
    )

    items: list[TrainItem] = []
    for sentence, lattice in zip(train_sentences, lattices):
        lin = linearize(lattice)
        item = TrainItem(
            sent_id=sentence.sent_id,
            token_forms=sentence.tokens,
            lin=lin,
            targets=build_gold_targets(lin, sentence, scorer_cfg),
        )
        if not provider.trainable:
            item.cached_embedding = embed_lattice(
                provider, sentence.tokens, lin, sentence.sent_id
            )
        items.append(item)

    model = JointScorer(scorer_cfg)
    optimizer = make_optimizer(model, provider, scorer_cfg)

    history: list[EpochStats] = []
    best_f1 = float("-inf")
    best_dev: dict[str, PRF] | None = None
    best_model_state = copy.deepcopy(model.state_dict())
    best_provider_state = (
        copy.deepcopy(provider.state_dict()) if provider.trainable else None
    )
    epochs_run = 0

    order = list(range(len(items)))
    for epoch in range(1, cfg.epochs + 1):
        epochs_run = epoch
        rng.shuffle(order)
        losses = []
        for start in range(0, len(order), scorer_cfg.batch_size):
            batch = [items[i] for i in order[start : start + scorer_cfg.batch_size]]
            losses.append(train_step(model, provider, optimizer, batch, scorer_cfg))
        mean_loss = sum(losses) / len(losses)

        dev_scores = None
        if dev_sentences and (epoch % cfg.eval_every == 0 or epoch == cfg.epochs):
            preds = parse_corpus(
                model,
                provider,
                dev_lexicon,
                dev_sentences,
                single_root=cfg.single_root,
                analysis_score=cfg.analysis_score,
            )
            dev_scores = {
                task: aligned_multiset_f1(dev_sentences, preds, task)
                for task in ("seg", "pos", "dep")
            }
            if dev_scores["dep"].f1 > best_f1:
                best_f1 = dev_scores["dep"].f1
                best_dev = dev_scores
                best_model_state = copy.deepcopy(model.state_dict())
                if provider.trainable:
                    best_provider_state = copy.deepcopy(provider.state_dict())
        history.append(EpochStats(epoch=epoch, mean_loss=mean_loss, dev_scores=dev_scores))
        if dev_scores is not None:
            log.info(
                "seed %d epoch %d: loss %.4f seg %.4f dep %.4f",
                seed,
                epoch,
                mean_loss,
                dev_scores["seg"].f1,
                dev_scores["dep"].f1,
            )
        else:
            log.info("seed %d epoch %d: loss %.4f", seed, epoch, mean_loss)

        if dev_scores is not None and _targets_met(dev_scores, cfg):
            log.info("seed %d: target scores reached at epoch %d", seed, epoch)
            break

    if best_dev is not None:
        model.load_state_dict(best_model_state)
        if provider.trainable and best_provider_state is not None:
            provider.load_state_dict(best_provider_state)
    model.eval()
    return SeedOutcome(
        seed=seed,
        model=model,
        provider=provider,
        scorer_config=scorer_cfg,
        best_dev=best_dev,
        history=history,
        epochs_run=epochs_run,
    )


def _targets_met(scores: dict[str, PRF], cfg: RunConfig) -> bool:
    targets = [
        (cfg.target_seg_f1, scores["seg"].f1),
        (cfg.target_dep_f1, scores["dep"].f1),
    ]
    set_targets = [(want, got) for want, got in targets if want is not None]
    if not set_targets:
        return False
    return all(got >= want for want, got in set_targets)


def run_train(cfg: RunConfig) -> list[SeedOutcome]:
    """CLI entry: train one model per seed, checkpoint each, summarize."""
    if cfg.treebank is None or cfg.lexicon is None:
        raise ConfigError("training needs --treebank and --lexicon")
    if cfg.checkpoint_dir is None:
        raise ConfigError("training needs --checkpoint-dir")
    train_sentences = read_treebank(cfg.treebank)
    dev_sentences = read_treebank(cfg.dev) if cfg.dev else train_sentences
    lexicon = load_lexicon(cfg.lexicon)

    cfg.checkpoint_dir.mkdir(parents=True, exist_ok=True)
    outcomes = []
    summary_lines = []
    for seed in cfg.seeds:
        outcome = train_single_seed(seed, train_sentences, dev_sentences, lexicon, cfg)
        path = cfg.checkpoint_dir / f"model-seed{seed}.pt"
        metadata = {"seed": seed, "epochs_run": outcome.epochs_run}
        if outcome.best_dev is not None:
            metadata["dev_dep_f1"] = outcome.best_dev["dep"].f1
            metadata["dev_seg_f1"] = outcome.best_dev["seg"].f1
        save_checkpoint(path, outcome.model, outcome.provider, metadata)
        outcomes.append(outcome)
        if outcome.best_dev is not None:
            summary_lines.append(
                f"seed {seed}: epochs {outcome.epochs_run} "
                f"dev seg {outcome.best_dev['seg'].f1:.4f} "
                f"dev dep {outcome.best_dev['dep'].f1:.4f} -> {path}"
            )
        else:
            summary_lines.append(f"seed {seed}: epochs {outcome.epochs_run} -> {path}")
    summary = "\n".join(summary_lines)
    print(summary)
    if cfg.output is not None:
        cfg.output.write_text(summary + "\n", encoding="utf-8")
    return outcomes


def run_parse(cfg: RunConfig) -> list[GoldSentence]:
    """CLI entry: parse a tokenized (or annotated) file with a checkpoint."""
    if cfg.input is None or cfg.lexicon is None or cfg.checkpoint is None:
        raise ConfigError("parsing needs --input, --lexicon and --checkpoint")
    loaded = load_checkpoint(cfg.checkpoint, vectors_path=cfg.vectors)
    sentences = read_treebank(cfg.input, require_heads=False)
    lexicon = load_lexicon(cfg.lexicon)
    if cfg.ma_mode is MAMode.INFUSED:
        if not all(s.annotated for s in sentences):
            raise DataError(
                "--infused parsing needs gold segmentations in the input file"
            )
        lexicon = infuse(lexicon, sentences)
    predictions = parse_corpus(
        loaded.model,
        loaded.provider,
        lexicon,
        sentences,
        single_root=cfg.single_root,
        analysis_score=cfg.analysis_score,
    )
    if cfg.output is not None:
        write_treebank(predictions, cfg.output)
    return predictions


def run_eval(cfg: RunConfig) -> RunReport:
    """CLI entry: score one or more prediction files against gold."""
    if cfg.gold is None or not cfg.pred_paths:
        raise ConfigError("evaluation needs --gold and at least one --pred file")
    gold = read_treebank(cfg.gold)
    runs = [read_treebank(path) for path in cfg.pred_paths]
    report = evaluate_run(gold, runs, strict_dep=cfg.dep_strict)
    print(report.to_text())
    if cfg.output is not None:
        lines = [f"{k}={v}" for k, v in sorted(report.to_keyvalues().items())]
        cfg.output.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return report
