"""Segmentation-aware evaluation.

Predicted and gold segmentations of the same token can disagree in both
content and length, so scores are computed over per-token multisets:
for each raw token, the predicted items and gold items are intersected
as multisets, and precision/recall follow from the matched counts.

Tasks:

* seg - items are segment forms
* pos - items are (form, POS) pairs
* dep - items are (form, label, head form) triples, where the head form
        is "ROOT" for the root arc; strict mode appends the signed
        token-level distance to the head so long-range mistakes stop
        matching

The attachment error breakdown is computed only over sentences whose
predicted segmentation matches gold exactly, where arcs align one-to-one.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .conllu import GoldSentence
from .errors import DataError

TASKS = ("seg", "pos", "dep")
ROOT_FORM = "ROOT"


@dataclass(frozen=True)
class PRF:
    """Aggregated precision/recall counts for one task."""

    matched: int
    predicted: int
    gold: int

    @property
    def precision(self) -> float:
        return self.matched / self.predicted if self.predicted else 0.0

    @property
    def recall(self) -> float:
        return self.matched / self.gold if self.gold else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def __add__(self, other: "PRF") -> "PRF":
        return PRF(
            matched=self.matched + other.matched,
            predicted=self.predicted + other.predicted,
            gold=self.gold + other.gold,
        )


def _token_items(
    sentence: GoldSentence, task: str, strict_dep: bool
) -> list[Counter]:
    """Per-token item multisets for one sentence."""
    segments = sentence.all_segments()
    token_of = sentence.token_of_segment()
    groups: list[Counter] = [Counter() for _ in sentence.tokens]
    seg_id = 0
    for token_idx, group in enumerate(sentence.segments, start=1):
        for seg in group:
            seg_id += 1
            if task == "seg":
                item: object = seg.form
            elif task == "pos":
                item = (seg.form, seg.pos or "_")
            elif task == "dep":
                if seg.head is None:
                    raise DataError(
                        f"sentence {sentence.sent_id!r} has no heads; "
                        "cannot score dependencies"
                    )
                if seg.head == 0:
                    head_form = ROOT_FORM
                    distance = 0
                else:
                    head_form = segments[seg.head - 1].form
                    distance = token_of[seg.head - 1] - token_idx
                item = (seg.form, seg.label or "_", head_form)
                if strict_dep:
                    item = (*item, distance)
            else:
                raise DataError(f"unknown evaluation task {task!r}")
            groups[token_idx - 1][item] += 1
    return groups


def sentence_counts(
    gold: GoldSentence, pred: GoldSentence, task: str, strict_dep: bool = False
) -> PRF:
    """Multiset-intersection counts for one sentence pair."""
    if len(gold.tokens) != len(pred.tokens):
        raise DataError(
            f"sentence {gold.sent_id!r}: gold has {len(gold.tokens)} tokens but "
            f"prediction has {len(pred.tokens)} (tokenization is shared input)"
        )
    gold_items = _token_items(gold, task, strict_dep)
    pred_items = _token_items(pred, task, strict_dep)
    matched = predicted = gold_count = 0
    for g, p in zip(gold_items, pred_items):
        overlap = g & p
        matched += sum(overlap.values())
        predicted += sum(p.values())
        gold_count += sum(g.values())
    return PRF(matched=matched, predicted=predicted, gold=gold_count)


def aligned_multiset_f1(
    gold: Sequence[GoldSentence],
    pred: Sequence[GoldSentence],
    task: str,
    strict_dep: bool = False,
) -> PRF:
    """Corpus-level counts for one task; sentences are paired by position."""
    if task not in TASKS:
        raise DataError(f"unknown evaluation task {task!r}; expected one of {TASKS}")
    if len(gold) != len(pred):
        raise DataError(
            f"gold has {len(gold)} sentences but prediction has {len(pred)}"
        )
    total = PRF(0, 0, 0)
    for g, p in zip(gold, pred):
        total = total + sentence_counts(g, p, task, strict_dep)
    return total


@dataclass
class ErrorBreakdown:
    """Attachment errors by gold label, over segmentation-exact sentences.

    Each row counts arcs whose head is wrong, whose label is wrong, or
    both; correct arcs are not counted.
    """

    rows: dict[str, list[int]] = field(default_factory=dict)  # label -> [head, label, both]
    evaluated_sentences: int = 0
    skipped_sentences: int = 0

    @property
    def total_errors(self) -> int:
        return sum(sum(counts) for counts in self.rows.values())

    def to_text(self) -> str:
        lines = [
            f"sentences evaluated: {self.evaluated_sentences} "
            f"(skipped {self.skipped_sentences} with segmentation mismatches)",
            f"{'gold label':<14} {'head':>6} {'label':>6} {'both':>6} {'total':>6} {'share':>7}",
        ]
        total = self.total_errors
        ordered = sorted(
            self.rows.items(), key=lambda kv: (-sum(kv[1]), kv[0])
        )
        for label, (head_only, label_only, both) in ordered:
            row_total = head_only + label_only + both
            share = row_total / total if total else 0.0
            lines.append(
                f"{label:<14} {head_only:>6} {label_only:>6} {both:>6} "
                f"{row_total:>6} {share:>6.1%}"
            )
        return "\n".join(lines)


def error_breakdown(
    gold: Sequence[GoldSentence], pred: Sequence[GoldSentence]
) -> ErrorBreakdown:
    """Head/label error counts per gold label.

    Sentences whose predicted segmentation differs from gold anywhere
    are skipped entirely, so arcs align by segment position.
    """
    if len(gold) != len(pred):
        raise DataError(
            f"gold has {len(gold)} sentences but prediction has {len(pred)}"
        )
    out = ErrorBreakdown()
    for g, p in zip(gold, pred):
        g_segs = g.all_segments()
        p_segs = p.all_segments()
        if [s.form for s in g_segs] != [s.form for s in p_segs]:
            out.skipped_sentences += 1
            continue
        out.evaluated_sentences += 1
        for g_seg, p_seg in zip(g_segs, p_segs):
            head_wrong = g_seg.head != p_seg.head
            label_wrong = g_seg.label != p_seg.label
            if not head_wrong and not label_wrong:
                continue
            row = out.rows.setdefault(g_seg.label or "_", [0, 0, 0])
            if head_wrong and label_wrong:
                row[2] += 1
            elif head_wrong:
                row[0] += 1
            else:
                row[1] += 1
    return out


@dataclass
class RunReport:
    """Scores for several runs (seeds) against one gold set, plus means."""

    per_run: list[dict[str, PRF]]
    strict_dep: bool = False

    def mean(self, task: str, measure: str = "f1") -> float:
        values = [getattr(scores[task], measure) for scores in self.per_run]
        return sum(values) / len(values)

    def to_text(self) -> str:
        lines = [f"{'run':<6}" + "".join(f"{t.upper():>10}" for t in TASKS)]
        for i, scores in enumerate(self.per_run, start=1):
            lines.append(
                f"{i:<6}" + "".join(f"{scores[t].f1:>10.4f}" for t in TASKS)
            )
        if len(self.per_run) > 1:
            lines.append(
                f"{'mean':<6}" + "".join(f"{self.mean(t):>10.4f}" for t in TASKS)
            )
        return "\n".join(lines)

    def to_keyvalues(self) -> dict[str, str]:
        out: dict[str, str] = {"runs": str(len(self.per_run))}
        for i, scores in enumerate(self.per_run, start=1):
            for task in TASKS:
                prf = scores[task]
                out[f"run{i}.{task}.precision"] = f"{prf.precision:.6f}"
                out[f"run{i}.{task}.recall"] = f"{prf.recall:.6f}"
                out[f"run{i}.{task}.f1"] = f"{prf.f1:.6f}"
        for task in TASKS:
            out[f"mean.{task}.f1"] = f"{self.mean(task):.6f}"
        return out


def evaluate_run(
    gold: Sequence[GoldSentence],
    runs: Sequence[Sequence[GoldSentence]],
    strict_dep: bool = False,
) -> RunReport:
    """Score one or more prediction runs against shared gold."""
    if not runs:
        raise DataError("no prediction runs to evaluate")
    per_run = []
    for pred in runs:
        per_run.append(
            {
                task: aligned_multiset_f1(gold, pred, task, strict_dep=strict_dep)
                for task in TASKS
            }
        )
    return RunReport(per_run=per_run, strict_dep=strict_dep)
