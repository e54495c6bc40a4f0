"""Sentence lattices and their linearization.

A raw token expands into a lattice of candidate morphological analyses;
the whole sentence is the concatenation of its token lattices.  The
scorer consumes a flat node sequence, so `linearize` lays out every
segment of every analysis of every token in (token, analysis, within)
order, preceded by two virtual nodes: the root node at position 0 and
the auxiliary node at position 1.  Segments of analyses that lose the
disambiguation are later attached under the auxiliary node and dropped
from the final tree.

Provenance indices (token_idx, analysis_idx, within_idx) are 1-based,
matching the on-disk lattice and embedding formats where token_idx 0 is
reserved for the root/auxiliary nodes.  Positions in the linearized
node sequence are plain 0-based list indices.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path

from .errors import DataError, LatticeError

Feats = tuple[tuple[str, str], ...]

ROOT_INDEX = 0
AUX_INDEX = 1
NUM_VIRTUAL_NODES = 2


def parse_feats(text: str) -> Feats:
    """Parse a ``Key=Val|Key=Val`` feature string ('_' or '' means none)."""
    if text in ("", "_"):
        return ()
    pairs = []
    for item in text.split("|"):
        key, sep, value = item.partition("=")
        if not sep or not key or not value:
            raise DataError(f"malformed feature item {item!r} in {text!r}")
        pairs.append((key, value))
    return tuple(sorted(pairs))


def format_feats(feats: Feats) -> str:
    if not feats:
        return "_"
    return "|".join(f"{k}={v}" for k, v in sorted(feats))


@dataclass(frozen=True)
class Token:
    """One raw space-delimited input token (1-based sentence position)."""

    index: int
    form: str

    def __post_init__(self) -> None:
        if not self.form:
            raise LatticeError("token form must be non-empty")
        if self.index < 1:
            raise LatticeError(f"token index must be >= 1, got {self.index}")


@dataclass(frozen=True)
class Segment:
    """A single morphological segment, optionally with analyzer hints."""

    form: str
    pos_hint: str | None = None
    feats_hint: Feats = ()

    def __post_init__(self) -> None:
        if not self.form:
            raise LatticeError("segment form must be non-empty")


@dataclass(frozen=True)
class Analysis:
    """One candidate segmentation of a token: an ordered segment sequence."""

    segments: tuple[Segment, ...]

    def __post_init__(self) -> None:
        if len(self.segments) == 0:
            raise LatticeError("analysis must contain at least one segment")

    def forms(self) -> tuple[str, ...]:
        return tuple(seg.form for seg in self.segments)

    def __len__(self) -> int:
        return len(self.segments)


@dataclass(frozen=True)
class TokenLattice:
    """All candidate analyses of one token, in analyzer order."""

    token: Token
    analyses: tuple[Analysis, ...]

    def __post_init__(self) -> None:
        if len(self.analyses) == 0:
            raise LatticeError(
                f"token {self.token.form!r} has no analyses; the analyzer "
                "must supply a fallback"
            )
        seen = set()
        for analysis in self.analyses:
            forms = analysis.forms()
            if forms in seen:
                raise LatticeError(
                    f"duplicate analysis {forms} for token {self.token.form!r}"
                )
            seen.add(forms)


@dataclass(frozen=True)
class SentenceLattice:
    """Token lattices in sentence order."""

    tokens: tuple[TokenLattice, ...]

    def __post_init__(self) -> None:
        for position, tl in enumerate(self.tokens, start=1):
            if tl.token.index != position:
                raise LatticeError(
                    f"token indices must be contiguous 1..k; found index "
                    f"{tl.token.index} at position {position}"
                )

    def __len__(self) -> int:
        return len(self.tokens)

    def token_forms(self) -> tuple[str, ...]:
        return tuple(tl.token.form for tl in self.tokens)


class NodeKind(Enum):
    ROOT = "root"
    AUX = "aux"
    SEGMENT = "segment"


@dataclass(frozen=True)
class LatticeNode:
    """One node of the linearized lattice with its provenance."""

    kind: NodeKind
    segment: Segment | None = None
    token_idx: int = 0
    analysis_idx: int = 0
    within_idx: int = 0

    @property
    def form(self) -> str:
        if self.segment is None:
            raise LatticeError(f"{self.kind.value} node has no segment form")
        return self.segment.form


_ROOT_NODE = LatticeNode(kind=NodeKind.ROOT, within_idx=0)
_AUX_NODE = LatticeNode(kind=NodeKind.AUX, within_idx=1)


@dataclass(frozen=True)
class LinearizedLattice:
    """The flat node sequence fed to the scorer.

    ``nodes[0]`` is the root node, ``nodes[1]`` the auxiliary node, and
    the rest are segment nodes sorted by (token_idx, analysis_idx,
    within_idx).
    """

    nodes: tuple[LatticeNode, ...]
    token_forms: tuple[str, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def n_tokens(self) -> int:
        return len(self.token_forms)

    @cached_property
    def _spans(self) -> dict[tuple[int, int], tuple[int, int]]:
        spans: dict[tuple[int, int], tuple[int, int]] = {}
        for pos, node in enumerate(self.nodes):
            if node.kind is not NodeKind.SEGMENT:
                continue
            key = (node.token_idx, node.analysis_idx)
            start, _ = spans.get(key, (pos, pos))
            spans[key] = (start, pos + 1)
        return spans

    @cached_property
    def analysis_counts(self) -> tuple[int, ...]:
        """Number of analyses per token, in token order."""
        counts = [0] * self.n_tokens
        for token_idx, analysis_idx in self._spans:
            counts[token_idx - 1] = max(counts[token_idx - 1], analysis_idx)
        return tuple(counts)

    def segment_positions(self) -> range:
        return range(NUM_VIRTUAL_NODES, len(self.nodes))


def linearize(lattice: SentenceLattice) -> LinearizedLattice:
    """Flatten a sentence lattice into the scorer's input node sequence.

    Keeps the partial order of the tokens: every node of token j comes
    before every node of token j+1, analyses within a token keep their
    analyzer order, and segments within an analysis keep their order.
    """
    if len(lattice) == 0:
        raise LatticeError("cannot linearize an empty sentence lattice")
    nodes: list[LatticeNode] = [_ROOT_NODE, _AUX_NODE]
    for tl in lattice.tokens:
        for analysis_idx, analysis in enumerate(tl.analyses, start=1):
            for within_idx, segment in enumerate(analysis.segments, start=1):
                nodes.append(
                    LatticeNode(
                        kind=NodeKind.SEGMENT,
                        segment=segment,
                        token_idx=tl.token.index,
                        analysis_idx=analysis_idx,
                        within_idx=within_idx,
                    )
                )
    return LinearizedLattice(
        nodes=tuple(nodes), token_forms=lattice.token_forms()
    )


def segments_of(
    lin: LinearizedLattice, token_idx: int, analysis_idx: int
) -> tuple[int, int]:
    """Node-position range of one analysis, as a half-open (start, end).

    Ranges of distinct (token, analysis) pairs never overlap.
    """
    span = lin._spans.get((token_idx, analysis_idx))
    if span is None:
        raise LatticeError(
            f"no analysis {analysis_idx} for token {token_idx} "
            f"(tokens: {lin.n_tokens})"
        )
    return span


def segment_forms(lin: LinearizedLattice) -> tuple[str, ...]:
    """Forms of the segment nodes only, in linearization order."""
    return tuple(
        node.form for node in lin.nodes if node.kind is NodeKind.SEGMENT
    )


def write_lattice_tsv(lattices: list[SentenceLattice], path: str | Path) -> None:
    """Dump sentence lattices as blank-line-separated TSV blocks.

    Columns: token_idx, analysis_idx, within_idx, form, pos_hint,
    feats_hint, with '_' for absent hints.  A ``# text = ...`` comment
    precedes each sentence so the raw token forms survive the dump.
    """
    with open(path, "w", encoding="utf-8") as handle:
        for lattice in lattices:
            handle.write("# text = " + " ".join(lattice.token_forms()) + "\n")
            for tl in lattice.tokens:
                for analysis_idx, analysis in enumerate(tl.analyses, start=1):
                    for within_idx, seg in enumerate(analysis.segments, start=1):
                        handle.write(
                            "\t".join(
                                (
                                    str(tl.token.index),
                                    str(analysis_idx),
                                    str(within_idx),
                                    seg.form,
                                    seg.pos_hint or "_",
                                    format_feats(seg.feats_hint),
                                )
                            )
                            + "\n"
                        )
            handle.write("\n")


def read_lattice_tsv(path: str | Path) -> list[SentenceLattice]:
    """Inverse of `write_lattice_tsv`.

    Raw token forms are taken from the ``# text`` comment; when a dump
    lacks it, each token's form falls back to the concatenation of its
    first analysis' segment forms.
    """
    lattices: list[SentenceLattice] = []
    block: list[tuple[int, int, int, Segment]] = []
    forms: tuple[str, ...] | None = None

    def flush() -> None:
        nonlocal block, forms
        if not block:
            forms = None
            return
        lattices.append(_lattice_from_rows(block, forms))
        block = []
        forms = None

    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                flush()
                continue
            if line.startswith("#"):
                comment = line[1:].strip()
                if comment.startswith("text ="):
                    forms = tuple(comment[len("text =") :].split())
                continue
            cols = line.split("\t")
            if len(cols) != 6:
                raise DataError(f"{path}:{lineno}: expected 6 columns, got {len(cols)}")
            try:
                token_idx, analysis_idx, within_idx = (int(c) for c in cols[:3])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-integer index") from exc
            segment = Segment(
                form=cols[3],
                pos_hint=None if cols[4] == "_" else cols[4],
                feats_hint=parse_feats(cols[5]),
            )
            block.append((token_idx, analysis_idx, within_idx, segment))
    flush()
    return lattices


def _lattice_from_rows(
    rows: list[tuple[int, int, int, Segment]], forms: tuple[str, ...] | None
) -> SentenceLattice:
    by_token: dict[int, dict[int, list[tuple[int, Segment]]]] = {}
    for token_idx, analysis_idx, within_idx, segment in rows:
        by_token.setdefault(token_idx, {}).setdefault(analysis_idx, []).append(
            (within_idx, segment)
        )
    token_lattices = []
    for token_idx in sorted(by_token):
        analyses = []
        for analysis_idx in sorted(by_token[token_idx]):
            segs = [s for _, s in sorted(by_token[token_idx][analysis_idx])]
            analyses.append(Analysis(segments=tuple(segs)))
        if forms is not None and token_idx <= len(forms):
            form = forms[token_idx - 1]
        else:
            form = "".join(analyses[0].forms())
        token_lattices.append(
            TokenLattice(token=Token(index=token_idx, form=form), analyses=tuple(analyses))
        )
    return SentenceLattice(tokens=tuple(token_lattices))


def format_lattice(lattice: SentenceLattice) -> str:
    """Human-readable one-lattice rendering, used by the CLI and logs."""
    out = io.StringIO()
    for tl in lattice.tokens:
        alts = ", ".join("(" + " ".join(a.forms()) + ")" for a in tl.analyses)
        out.write(f"{tl.token.index}\t{tl.token.form}\t[{alts}]\n")
    return out.getvalue()
