"""Lexicon-backed morphological analysis.

The analyzer is a plain exact-match lexicon: a token form maps to the
list of its known analyses.  Out-of-vocabulary tokens fall back to a
single whole-token analysis so that downstream lattices are never
empty.  `infuse` folds a treebank's gold segmentations back into the
lexicon, which guarantees that every gold path exists in the lattices
built from the infused lexicon; `strip_gold_analyses` simulates the
opposite, an analyzer with coverage gaps.

Lexicon file format (UTF-8 TSV), one analysis per line::

    form<TAB>seg/POS[Key=Val|Key=Val]+seg/POS+seg

POS and the bracketed feature list are optional per segment ('_' also
means absent); multiple lines per form accumulate analyses in file
order.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, TYPE_CHECKING

from .errors import DataError
from .lattice import (
    Analysis,
    Feats,
    Segment,
    SentenceLattice,
    Token,
    TokenLattice,
    format_feats,
    parse_feats,
)

if TYPE_CHECKING:
    from .conllu import GoldSentence


class MAMode(Enum):
    INFUSED = "infused"
    UNINFUSED = "uninfused"


@dataclass(frozen=True)
class Lexicon:
    """Immutable map from token surface form to candidate analyses."""

    entries: Mapping[str, tuple[Analysis, ...]]

    def __post_init__(self) -> None:
        for form, analyses in self.entries.items():
            if not analyses:
                raise DataError(f"lexicon entry {form!r} has no analyses")

    def __contains__(self, form: str) -> bool:
        return form in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, form: str) -> tuple[Analysis, ...] | None:
        return self.entries.get(form)


def analyze(lexicon: Lexicon, token: Token) -> TokenLattice:
    """Look a token up in the lexicon, falling back to the whole form.

    The fallback analysis is a single segment spanning the entire token
    with no hints, so the result always has at least one analysis.
    Duplicate analyses (same segment-form sequence) are dropped, keeping
    the first occurrence.
    """
    analyses = lexicon.get(token.form)
    if analyses is None:
        analyses = (Analysis(segments=(Segment(form=token.form),)),)
    return TokenLattice(token=token, analyses=_dedup(analyses))


def build_sentence_lattice(
    lexicon: Lexicon, sentence: Iterable[Token]
) -> SentenceLattice:
    return SentenceLattice(
        tokens=tuple(analyze(lexicon, token) for token in sentence)
    )


def _dedup(analyses: Iterable[Analysis]) -> tuple[Analysis, ...]:
    seen: set[tuple[str, ...]] = set()
    out = []
    for analysis in analyses:
        forms = analysis.forms()
        if forms in seen:
            continue
        seen.add(forms)
        out.append(analysis)
    return tuple(out)


def infuse(lexicon: Lexicon, treebank: Iterable["GoldSentence"]) -> Lexicon:
    """Return a lexicon that also contains every gold analysis in the treebank.

    Existing analyses are retained in order; a token's gold analysis is
    appended only when no analysis with the same segment-form sequence
    is already listed.  Idempotent: infusing twice with the same
    treebank yields an identical lexicon.
    """
    entries: dict[str, list[Analysis]] = {
        form: list(analyses) for form, analyses in lexicon.entries.items()
    }
    for sentence in treebank:
        for form, gold_analysis in zip(sentence.tokens, sentence.gold_analyses()):
            known = entries.setdefault(form, [])
            if gold_analysis.forms() not in {a.forms() for a in known}:
                known.append(gold_analysis)
    return Lexicon(entries={f: tuple(a) for f, a in entries.items()})


def strip_gold_analyses(
    lexicon: Lexicon,
    treebank: Iterable["GoldSentence"],
    fraction: float,
    seed: int,
) -> Lexicon:
    """Delete the gold analysis from a fraction of the affected lexicon forms.

    Models an analyzer with coverage gaps: for `fraction` of the forms
    whose lexicon entry contains the treebank's gold analysis, that
    analysis is removed (the form's other analyses survive; a form left
    with no analyses is dropped entirely and will take the OOV
    fallback).  Selection is deterministic in `seed`.
    """
    import random

    if not 0.0 <= fraction <= 1.0:
        raise DataError(f"fraction must be in [0, 1], got {fraction}")
    gold_by_form: dict[str, set[tuple[str, ...]]] = {}
    for sentence in treebank:
        for form, gold in zip(sentence.tokens, sentence.gold_analyses()):
            gold_by_form.setdefault(form, set()).add(gold.forms())
    affected = sorted(
        form
        for form, golds in gold_by_form.items()
        if form in lexicon
        and any(a.forms() in golds for a in lexicon.entries[form])
    )
    rng = random.Random(seed)
    n_strip = round(fraction * len(affected))
    stripped = set(rng.sample(affected, n_strip))
    entries: dict[str, tuple[Analysis, ...]] = {}
    for form, analyses in lexicon.entries.items():
        if form in stripped:
            keep = tuple(
                a for a in analyses if a.forms() not in gold_by_form[form]
            )
            if keep:
                entries[form] = keep
        else:
            entries[form] = analyses
    return Lexicon(entries=entries)


_SEGMENT_RE = re.compile(
    r"^(?P<form>[^/\[\]]+)(?:/(?P<pos>[^/\[\]]*))?(?:\[(?P<feats>[^\]]*)\])?$"
)


def _parse_segment(item: str, where: str) -> Segment:
    match = _SEGMENT_RE.match(item)
    if not match or not match.group("form"):
        raise DataError(f"{where}: malformed segment {item!r}")
    pos = match.group("pos")
    feats = match.group("feats")
    return Segment(
        form=match.group("form"),
        pos_hint=None if pos in (None, "", "_") else pos,
        feats_hint=parse_feats(feats) if feats else (),
    )


def load_lexicon(path: str | Path) -> Lexicon:
    """Read a lexicon TSV file; see the module docstring for the format.

    Analyses that repeat a segment-form sequence already listed for the
    form are merged rather than duplicated, and conflicting hints on the
    same segment form are settled lexicon-wide: the most common POS (and
    feature set) for that form wins, first occurrence on ties.
    """
    raw_entries: dict[str, list[Analysis]] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            form, sep, analysis_text = line.partition("\t")
            if not sep or not form or not analysis_text:
                raise DataError(f"{path}:{lineno}: expected 'form<TAB>analysis'")
            segments = tuple(
                _parse_segment(item, f"{path}:{lineno}")
                for item in analysis_text.split("+")
            )
            raw_entries.setdefault(form, []).append(Analysis(segments=segments))
    resolved = _resolve_hints(raw_entries)
    return Lexicon(
        entries={form: _dedup(analyses) for form, analyses in resolved.items()}
    )


def _resolve_hints(
    entries: dict[str, list[Analysis]]
) -> dict[str, list[Analysis]]:
    # Hint votes are counted once per occurrence across the whole lexicon;
    # ties keep the hint seen first.
    pos_votes: dict[str, Counter[str | None]] = {}
    feat_votes: dict[str, Counter[Feats]] = {}
    for analyses in entries.values():
        for analysis in analyses:
            for seg in analysis.segments:
                pos_votes.setdefault(seg.form, Counter())[seg.pos_hint] += 1
                feat_votes.setdefault(seg.form, Counter())[seg.feats_hint] += 1

    def winner(counter: Counter) -> object:
        return counter.most_common(1)[0][0]

    pos_choice = {form: winner(c) for form, c in pos_votes.items()}
    feat_choice = {form: winner(c) for form, c in feat_votes.items()}

    out: dict[str, list[Analysis]] = {}
    for form, analyses in entries.items():
        out[form] = [
            Analysis(
                segments=tuple(
                    Segment(
                        form=seg.form,
                        pos_hint=pos_choice[seg.form],
                        feats_hint=feat_choice[seg.form],
                    )
                    for seg in analysis.segments
                )
            )
            for analysis in analyses
        ]
    return out


def save_lexicon(lexicon: Lexicon, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for form in sorted(lexicon.entries):
            for analysis in lexicon.entries[form]:
                items = []
                for seg in analysis.segments:
                    item = seg.form
                    if seg.pos_hint or seg.feats_hint:
                        item += f"/{seg.pos_hint or '_'}"
                    if seg.feats_hint:
                        item += f"[{format_feats(seg.feats_hint)}]"
                    items.append(item)
                handle.write(f"{form}\t{'+'.join(items)}\n")
