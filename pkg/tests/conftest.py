"""Shared generators, oracles and fixtures for the test suite.

The brute-force helpers here are intentionally independent of the
package's decoding code: they enumerate head assignments exhaustively
so decoder results can be checked against a second derivation.
"""

from __future__ import annotations

import itertools
import random

import numpy as np
import pytest
import torch
from hypothesis import strategies as st

from jointdep.conllu import GoldSegment, GoldSentence
from jointdep.lattice import (
    AUX_INDEX,
    ROOT_INDEX,
    Analysis,
    LinearizedLattice,
    Segment,
    SentenceLattice,
    Token,
    TokenLattice,
    linearize,
    segments_of,
)
from jointdep.scorer import AUX_LABEL, ScoreSet

TEST_LABELS = ("dep", "root", AUX_LABEL)


# --- random structures -------------------------------------------------------


def random_lattice(
    rng: random.Random,
    max_tokens: int = 3,
    max_analyses: int = 3,
    max_segments: int = 3,
) -> SentenceLattice:
    """A random sentence lattice within the given size bounds."""
    tokens = []
    for j in range(1, rng.randint(1, max_tokens) + 1):
        wanted = rng.randint(1, max_analyses)
        seen: set[tuple[str, ...]] = set()
        analyses = []
        while len(analyses) < wanted:
            segs = tuple(
                Segment(form=rng.choice("bgdklmn") + rng.choice("aeiou"))
                for _ in range(rng.randint(1, max_segments))
            )
            analysis = Analysis(segments=segs)
            if analysis.forms() in seen:
                continue
            seen.add(analysis.forms())
            analyses.append(analysis)
        tokens.append(
            TokenLattice(
                token=Token(index=j, form="".join(analyses[0].forms())),
                analyses=tuple(analyses),
            )
        )
    return SentenceLattice(tokens=tuple(tokens))


def random_score_set(
    npr: np.random.Generator,
    lin: LinearizedLattice,
    labels: tuple[str, ...] = TEST_LABELS,
    integer: bool = False,
) -> ScoreSet:
    """Random scores for a lattice; integer-valued scores sum exactly."""
    n = len(lin.nodes)
    if integer:
        head = npr.integers(-10, 11, size=(n, n)).astype(np.float64)
        label = npr.integers(-10, 11, size=(n, n, len(labels))).astype(np.float64)
    else:
        head = npr.standard_normal((n, n))
        label = npr.standard_normal((n, n, len(labels)))
    return ScoreSet(
        head_scores=torch.from_numpy(head),
        label_scores=torch.from_numpy(label),
        mtl_logits={},
        label_set=labels,
        tag_sets={},
    )


@st.composite
def lattices(draw, max_tokens: int = 3, max_analyses: int = 3, max_segments: int = 3):
    """Hypothesis strategy over sentence lattices."""
    seed = draw(st.integers(min_value=0, max_value=2**32 - 1))
    return random_lattice(
        random.Random(seed),
        max_tokens=max_tokens,
        max_analyses=max_analyses,
        max_segments=max_segments,
    )


# --- brute-force oracles -----------------------------------------------------


def _is_tree(heads: dict[int, int]) -> bool:
    """heads maps node -> head (0 = root); True iff all nodes reach 0."""
    for start in heads:
        seen = set()
        node = start
        while node != 0:
            if node in seen:
                return False
            seen.add(node)
            node = heads[node]
    return True


def brute_force_best_tree(
    head_scores: np.ndarray,
    mask: np.ndarray,
    nodes: list[int],
    single_root: bool = True,
) -> tuple[float, dict[int, int] | None]:
    """Exhaustive maximum arborescence over the given nodes.

    Enumerates every head assignment permitted by the mask (the virtual
    root is head 0 here, encoded as column ROOT_INDEX) and keeps the
    best valid tree.  Returns (-inf, None) when no tree is feasible.
    """
    candidates = []
    for d in nodes:
        options = []
        if mask[d, ROOT_INDEX]:
            options.append(0)
        options.extend(h for h in nodes if h != d and mask[d, h])
        candidates.append(options)
    best_weight = float("-inf")
    best: dict[int, int] | None = None
    for combo in itertools.product(*candidates):
        heads = dict(zip(nodes, combo))
        if single_root and sum(1 for h in combo if h == 0) != 1:
            continue
        if not _is_tree(heads):
            continue
        weight = sum(
            head_scores[d, ROOT_INDEX if h == 0 else h] for d, h in heads.items()
        )
        if weight > best_weight:
            best_weight, best = weight, heads
    return best_weight, best


def chosen_node_positions(lin: LinearizedLattice, chosen) -> list[int]:
    positions: list[int] = []
    for token_idx, analysis_idx in enumerate(chosen, start=1):
        start, end = segments_of(lin, token_idx, analysis_idx)
        positions.extend(range(start, end))
    return positions


def parse_tree_weight(lin, parse, head_scores: np.ndarray) -> float:
    """Sum of chosen-tree arc scores for a decoded parse."""
    positions = chosen_node_positions(lin, parse.chosen_analysis)
    weight = 0.0
    for rank, global_pos in enumerate(positions, start=1):
        seg = parse.segments[rank - 1]
        head_global = ROOT_INDEX if seg.head == 0 else positions[seg.head - 1]
        weight += head_scores[global_pos, head_global]
    return weight


def assert_valid_parse(lin: LinearizedLattice, parse, single_root: bool = True) -> None:
    """Check every decoding constraint on a finished parse.

    One analysis per token; output is exactly the chosen analyses'
    segments in order; heads form a tree over the output (single-rooted
    unless relaxed); no segment from a competing analysis appears.
    """
    counts = lin.analysis_counts
    assert len(parse.chosen_analysis) == len(counts)
    for token_idx, analysis_idx in enumerate(parse.chosen_analysis, start=1):
        assert 1 <= analysis_idx <= counts[token_idx - 1]

    positions = chosen_node_positions(lin, parse.chosen_analysis)
    assert len(parse.segments) == len(positions)
    for seg, global_pos in zip(parse.segments, positions):
        node = lin.nodes[global_pos]
        assert seg.form == node.form
        assert seg.token_idx == node.token_idx

    m = len(parse.segments)
    heads = [seg.head for seg in parse.segments]
    assert all(0 <= h <= m for h in heads)
    assert all(h != i for i, h in enumerate(heads, start=1))
    n_roots = sum(1 for h in heads if h == 0)
    if single_root:
        assert n_roots == 1, "exactly one root arc"
    else:
        assert n_roots >= 1, "at least one root arc"
    for start in range(1, m + 1):
        seen = set()
        node = start
        while node != 0:
            assert node not in seen, "cycle in decoded tree"
            seen.add(node)
            node = heads[node - 1]
    for seg in parse.segments:
        assert seg.label != AUX_LABEL


# --- fixed fixtures ----------------------------------------------------------


@pytest.fixture
def worked_lattice() -> SentenceLattice:
    """Three tokens; the middle and last ones are ambiguous."""

    def seg(form: str) -> Segment:
        return Segment(form=form)

    return SentenceLattice(
        tokens=(
            TokenLattice(
                token=Token(index=1, form="bkrti"),
                analyses=(Analysis(segments=(seg("bkrti"),)),),
            ),
            TokenLattice(
                token=Token(index=2, form="bbit"),
                analyses=(
                    Analysis(segments=(seg("b"), seg("bit"))),
                    Analysis(segments=(seg("b"), seg("h"), seg("bit"))),
                ),
            ),
            TokenLattice(
                token=Token(index=3, form="hlbn"),
                analyses=(
                    Analysis(segments=(seg("h"), seg("lbn"))),
                    Analysis(segments=(seg("hlbn"),)),
                ),
            ),
        )
    )


@pytest.fixture
def worked_lin(worked_lattice) -> LinearizedLattice:
    return linearize(worked_lattice)


def make_sentence(
    sent_id: str,
    groups: list[list[tuple]],
    tokens: list[str] | None = None,
) -> GoldSentence:
    """Compact sentence builder.

    Each group is a list of (form, head, label[, pos[, feats-dict]])
    tuples; the token form defaults to the concatenation of its segment
    forms.
    """
    built = []
    forms = []
    for group in groups:
        segs = []
        for item in group:
            form, head, label = item[0], item[1], item[2]
            pos = item[3] if len(item) > 3 else None
            feats = item[4] if len(item) > 4 else {}
            segs.append(
                GoldSegment(
                    form=form,
                    head=head,
                    label=label,
                    pos=pos,
                    gender=feats.get("Gender"),
                    number=feats.get("Number"),
                    person=feats.get("Person"),
                )
            )
        built.append(tuple(segs))
        forms.append("".join(s.form for s in segs))
    return GoldSentence(
        sent_id=sent_id,
        tokens=tuple(tokens) if tokens is not None else tuple(forms),
        segments=tuple(built),
    )
