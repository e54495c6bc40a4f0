"""CoNLL-U treebank reading and writing.

Raw tokens are reconstructed from multiword-token range lines (``2-3``
followed by the covered rows); rows outside any range are single-segment
tokens.  Only the columns this engine consumes are kept: FORM, UPOS,
the Gender/Number/Person features, HEAD and DEPREL.  The writer emits
the same canonical shape, so read -> write -> read is a fixed point on
well-formed files.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataError
from .lattice import Analysis, Feats, Segment

MTL_FEATURES = ("Gender", "Number", "Person")
NO_VALUE = "NONE"


@dataclass(frozen=True)
class GoldSegment:
    """One gold (or predicted) segment row.

    `head` is the 1-based index of the head segment within the sentence,
    0 for the root arc, or None when the sentence carries no syntactic
    annotation.
    """

    form: str
    head: int | None
    label: str | None
    pos: str | None = None
    gender: str | None = None
    number: str | None = None
    person: str | None = None

    def tag(self, task: str) -> str:
        value = getattr(self, task)
        return value if value is not None else NO_VALUE


@dataclass(frozen=True)
class GoldSentence:
    """A treebank sentence: raw tokens plus per-token gold segments."""

    sent_id: str
    tokens: tuple[str, ...]
    segments: tuple[tuple[GoldSegment, ...], ...]

    def __post_init__(self) -> None:
        if len(self.tokens) == 0:
            raise DataError(f"sentence {self.sent_id!r} has no tokens")
        if len(self.tokens) != len(self.segments):
            raise DataError(
                f"sentence {self.sent_id!r}: {len(self.tokens)} tokens but "
                f"{len(self.segments)} segment groups"
            )
        for form, group in zip(self.tokens, self.segments):
            if not group:
                raise DataError(
                    f"sentence {self.sent_id!r}: token {form!r} has no segments"
                )
        if self.annotated:
            _check_tree(self.sent_id, [s.head for s in self.all_segments()])

    @property
    def annotated(self) -> bool:
        return all(s.head is not None for s in self.all_segments())

    def all_segments(self) -> tuple[GoldSegment, ...]:
        return tuple(seg for group in self.segments for seg in group)

    def n_segments(self) -> int:
        return sum(len(group) for group in self.segments)

    def token_of_segment(self) -> tuple[int, ...]:
        """1-based token index of each segment, in segment order."""
        out = []
        for token_idx, group in enumerate(self.segments, start=1):
            out.extend([token_idx] * len(group))
        return tuple(out)

    def gold_analyses(self) -> tuple[Analysis, ...]:
        """Per-token gold segmentation as lattice analyses with hints."""
        analyses = []
        for group in self.segments:
            analyses.append(
                Analysis(
                    segments=tuple(
                        Segment(
                            form=seg.form,
                            pos_hint=seg.pos,
                            feats_hint=_feats_of(seg),
                        )
                        for seg in group
                    )
                )
            )
        return tuple(analyses)


def _feats_of(seg: GoldSegment) -> Feats:
    pairs = []
    for key, value in (
        ("Gender", seg.gender),
        ("Number", seg.number),
        ("Person", seg.person),
    ):
        if value is not None:
            pairs.append((key, value))
    return tuple(pairs)


def _check_tree(sent_id: str, heads: Sequence[int | None]) -> None:
    m = len(heads)
    roots = [i for i, h in enumerate(heads, start=1) if h == 0]
    if len(roots) != 1:
        raise DataError(
            f"sentence {sent_id!r}: expected exactly one root, found {len(roots)}"
        )
    for i, h in enumerate(heads, start=1):
        if h is None or not 0 <= h <= m:
            raise DataError(f"sentence {sent_id!r}: head {h} of segment {i} out of range")
        if h == i:
            raise DataError(f"sentence {sent_id!r}: segment {i} is its own head")
    for start in range(1, m + 1):
        seen = set()
        node = start
        while node != 0:
            if node in seen:
                raise DataError(f"sentence {sent_id!r}: cyclic heads at segment {start}")
            seen.add(node)
            node = heads[node - 1]


def _parse_feats_column(text: str, where: str) -> dict[str, str]:
    feats: dict[str, str] = {}
    if text in ("_", ""):
        return feats
    for item in text.split("|"):
        key, sep, value = item.partition("=")
        if not sep:
            raise DataError(f"{where}: malformed FEATS item {item!r}")
        feats[key] = value
    return feats


def read_treebank(
    path: str | Path, *, require_heads: bool = True
) -> list[GoldSentence]:
    """Parse a CoNLL-U file into gold sentences.

    With ``require_heads=False`` a sentence whose HEAD column is entirely
    '_' is accepted as unannotated (for parser input); partially missing
    heads are always an error.
    """
    sentences: list[GoldSentence] = []
    rows: list[tuple[int, str, str | None, dict[str, str], int | None, str | None]] = []
    ranges: list[tuple[int, int, str]] = []
    sent_id: str | None = None

    def flush(lineno: int) -> None:
        nonlocal rows, ranges, sent_id
        if rows:
            sentences.append(
                _assemble(
                    sent_id or f"sent{len(sentences) + 1}",
                    rows,
                    ranges,
                    require_heads,
                    f"{path}:{lineno}",
                )
            )
        rows, ranges, sent_id = [], [], None

    with open(path, encoding="utf-8") as handle:
        lineno = 0
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            where = f"{path}:{lineno}"
            if not line.strip():
                flush(lineno)
                continue
            if line.startswith("#"):
                comment = line[1:].strip()
                if comment.startswith("sent_id"):
                    _, _, value = comment.partition("=")
                    sent_id = value.strip()
                continue
            cols = line.split("\t")
            if len(cols) != 10:
                raise DataError(f"{where}: expected 10 columns, got {len(cols)}")
            if "-" in cols[0]:
                start_s, _, end_s = cols[0].partition("-")
                try:
                    start, end = int(start_s), int(end_s)
                except ValueError as exc:
                    raise DataError(f"{where}: malformed token range {cols[0]!r}") from exc
                if end < start:
                    raise DataError(f"{where}: empty token range {cols[0]!r}")
                ranges.append((start, end, cols[1]))
                continue
            if "." in cols[0]:
                raise DataError(f"{where}: empty nodes ({cols[0]}) are not supported")
            try:
                seg_id = int(cols[0])
            except ValueError as exc:
                raise DataError(f"{where}: malformed segment id {cols[0]!r}") from exc
            if cols[6] == "_":
                head: int | None = None
            else:
                try:
                    head = int(cols[6])
                except ValueError as exc:
                    raise DataError(f"{where}: malformed head {cols[6]!r}") from exc
            feats = _parse_feats_column(cols[5], where)
            pos = None if cols[3] == "_" else cols[3]
            label = None if cols[7] == "_" else cols[7]
            rows.append((seg_id, cols[1], pos, feats, head, label))
        flush(lineno + 1)
    return sentences


def _assemble(
    sent_id: str,
    rows: list[tuple[int, str, str | None, dict[str, str], int | None, str | None]],
    ranges: list[tuple[int, int, str]],
    require_heads: bool,
    where: str,
) -> GoldSentence:
    for expected, row in enumerate(rows, start=1):
        if row[0] != expected:
            raise DataError(
                f"{where}: sentence {sent_id!r} has non-contiguous segment id "
                f"{row[0]} (expected {expected})"
            )
    range_map = {start: (end, form) for start, end, form in ranges}
    covered: set[int] = set()
    for start, end, _ in ranges:
        span = set(range(start, end + 1))
        if span & covered:
            raise DataError(f"{where}: overlapping token ranges in {sent_id!r}")
        covered |= span
        if end > len(rows):
            raise DataError(f"{where}: token range {start}-{end} exceeds segment count")

    heads = [row[4] for row in rows]
    if any(h is None for h in heads):
        if require_heads or not all(h is None for h in heads):
            raise DataError(
                f"{where}: sentence {sent_id!r} has missing heads"
                + ("" if require_heads else " on only some segments")
            )

    tokens: list[str] = []
    groups: list[tuple[GoldSegment, ...]] = []
    seg_id = 1
    while seg_id <= len(rows):
        if seg_id in range_map:
            end, form = range_map[seg_id]
            span = range(seg_id, end + 1)
            seg_id = end + 1
        else:
            form = rows[seg_id - 1][1]
            span = range(seg_id, seg_id + 1)
            seg_id += 1
        tokens.append(form)
        groups.append(
            tuple(_to_segment(rows[i - 1]) for i in span)
        )
    return GoldSentence(
        sent_id=sent_id, tokens=tuple(tokens), segments=tuple(groups)
    )


def _to_segment(
    row: tuple[int, str, str | None, dict[str, str], int | None, str | None]
) -> GoldSegment:
    _, form, pos, feats, head, label = row
    return GoldSegment(
        form=form,
        head=head,
        label=label,
        pos=pos,
        gender=feats.get("Gender"),
        number=feats.get("Number"),
        person=feats.get("Person"),
    )


def _feats_column(seg: GoldSegment) -> str:
    pairs = [
        (key, value)
        for key, value in (
            ("Gender", seg.gender),
            ("Number", seg.number),
            ("Person", seg.person),
        )
        if value is not None
    ]
    if not pairs:
        return "_"
    return "|".join(f"{k}={v}" for k, v in pairs)


def write_treebank(
    sentences: Iterable[GoldSentence], path: str | Path
) -> None:
    """Write sentences in the canonical column shape read_treebank expects."""
    with open(path, "w", encoding="utf-8") as handle:
        for sentence in sentences:
            handle.write(f"# sent_id = {sentence.sent_id}\n")
            seg_id = 1
            for form, group in zip(sentence.tokens, sentence.segments):
                multiword = len(group) > 1 or group[0].form != form
                if multiword:
                    end = seg_id + len(group) - 1
                    handle.write(
                        f"{seg_id}-{end}\t{form}\t_\t_\t_\t_\t_\t_\t_\t_\n"
                    )
                for seg in group:
                    head = "_" if seg.head is None else str(seg.head)
                    handle.write(
                        "\t".join(
                            (
                                str(seg_id),
                                seg.form,
                                "_",
                                seg.pos or "_",
                                "_",
                                _feats_column(seg),
                                head,
                                seg.label or "_",
                                "_",
                                "_",
                            )
                        )
                        + "\n"
                    )
                    seg_id += 1
            handle.write("\n")
