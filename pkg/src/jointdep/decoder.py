"""Constrained decoding over the linearized lattice.

The decoder turns a score set into a single dependency tree over exactly
one analysis per token, in two phases:

1. unconstrained greedy head proposal over the base mask;
2. per token, keep the unique analysis whose segments all escaped the
   attachment sink; if no analysis (or several) qualifies, fall back to
   the highest-scoring analysis by best non-sink head score.

The chosen segments are then re-decoded as a maximum spanning
arborescence (Chu-Liu/Edmonds) rooted at the virtual root; every
unchosen segment is attached under the attachment sink and stripped
from the returned parse.

Masks are boolean matrices aligned with ``head_scores``: ``mask[d, h]``
says h may head d.  Scores on masked-out arcs never influence decisions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conllu import NO_VALUE
from .errors import LatticeError
from .lattice import (
    AUX_INDEX,
    NUM_VIRTUAL_NODES,
    ROOT_INDEX,
    LinearizedLattice,
    NodeKind,
    segments_of,
)
from .scorer import AUX_LABEL, ScoreSet

NEG_INF = float("-inf")


@dataclass(frozen=True)
class ParsedSegment:
    """One output segment: head/label plus predicted tags.

    `head` is the 1-based index of the head segment in the output
    segmentation, 0 for the root arc.
    """

    token_idx: int
    form: str
    head: int
    label: str
    pos: str | None = None
    gender: str | None = None
    number: str | None = None
    person: str | None = None


@dataclass(frozen=True)
class JointParse:
    """Decoded analysis choice and dependency tree for one sentence."""

    chosen_analysis: tuple[int, ...]  # per token, 1-based
    segments: tuple[ParsedSegment, ...]


def base_mask(lin: LinearizedLattice) -> np.ndarray:
    """Arcs permitted before any analysis is chosen.

    Virtual nodes take no head; nothing heads itself; segments of
    competing analyses of the same token never connect.
    """
    token = np.array([node.token_idx for node in lin.nodes])
    analysis = np.array([node.analysis_idx for node in lin.nodes])
    segment = np.array([node.kind is NodeKind.SEGMENT for node in lin.nodes])
    same_token = token[:, None] == token[None, :]
    same_analysis = analysis[:, None] == analysis[None, :]
    mask = (~same_token | same_analysis) & segment[:, None] & segment[None, :]
    mask[:, ROOT_INDEX] = segment
    mask[:, AUX_INDEX] = segment
    np.fill_diagonal(mask, False)
    return mask


def greedy_heads(head_scores: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Row-wise argmax over permitted heads; -1 for rows with none.

    Ties break toward the lower head index.
    """
    if head_scores.shape != mask.shape:
        raise LatticeError(
            f"scores {head_scores.shape} and mask {mask.shape} disagree"
        )
    masked = np.where(mask, head_scores, NEG_INF)
    heads = masked.argmax(axis=1)
    heads[~mask.any(axis=1)] = -1
    return heads


def select_analyses(
    lin: LinearizedLattice,
    proposal: np.ndarray,
    head_scores: np.ndarray,
    mask: np.ndarray,
    scoring: str = "max",
) -> tuple[int, ...]:
    """Pick one analysis per token from a greedy head proposal.

    An analysis is fully attached when none of its segments chose the
    attachment sink.  Exactly one fully attached analysis wins outright;
    otherwise each analysis is scored by its segments' best non-sink
    permitted head score (aggregated by max or mean) and the best wins,
    ties toward the lower analysis index.
    """
    if scoring not in ("max", "mean"):
        raise LatticeError(f"unknown analysis scoring {scoring!r}")
    no_aux = mask.copy()
    no_aux[:, AUX_INDEX] = False
    best_non_aux = np.where(no_aux, head_scores, NEG_INF).max(axis=1)

    chosen: list[int] = []
    for token_idx, count in enumerate(lin.analysis_counts, start=1):
        fully_attached: list[int] = []
        scores: list[float] = []
        for analysis_idx in range(1, count + 1):
            start, end = segments_of(lin, token_idx, analysis_idx)
            span = range(start, end)
            if all(proposal[p] != AUX_INDEX for p in span):
                fully_attached.append(analysis_idx)
            node_scores = best_non_aux[start:end]
            scores.append(
                float(node_scores.max() if scoring == "max" else node_scores.mean())
            )
        if len(fully_attached) == 1:
            chosen.append(fully_attached[0])
        else:
            chosen.append(1 + int(np.argmax(scores)))
    return tuple(chosen)


def apply_constraints(
    lin: LinearizedLattice, chosen: tuple[int, ...]
) -> np.ndarray:
    """Mask for a fixed analysis choice.

    Chosen segments may attach to the root or to any other chosen
    segment; every unchosen segment must attach to the sink.
    """
    if len(chosen) != len(lin.analysis_counts):
        raise LatticeError(
            f"{len(chosen)} analysis choices for {len(lin.analysis_counts)} tokens"
        )
    n = len(lin.nodes)
    is_chosen = np.zeros(n, dtype=bool)
    for token_idx, analysis_idx in enumerate(chosen, start=1):
        count = lin.analysis_counts[token_idx - 1]
        if not 1 <= analysis_idx <= count:
            raise LatticeError(
                f"token {token_idx} has {count} analyses, chose {analysis_idx}"
            )
        start, end = segments_of(lin, token_idx, analysis_idx)
        is_chosen[start:end] = True

    mask = is_chosen[:, None] & is_chosen[None, :]
    np.fill_diagonal(mask, False)
    mask[:, ROOT_INDEX] = is_chosen
    unchosen = ~is_chosen
    unchosen[:NUM_VIRTUAL_NODES] = False
    mask[unchosen, AUX_INDEX] = True
    return mask


def _cle(scores: np.ndarray) -> np.ndarray:
    """Maximum spanning arborescence rooted at node 0.

    `scores[d, h]` is the weight of h heading d; forbidden arcs are
    -inf.  Returns the head of each node (heads[0] = -1).  Ties break
    toward the lower head index.
    """
    m = scores.shape[0]
    heads = np.full(m, -1, dtype=np.int64)
    if m == 1:
        return heads
    heads[1:] = scores[1:].argmax(axis=1)

    cycle = _find_cycle(heads)
    if cycle is None:
        return heads

    in_cycle = np.zeros(m, dtype=bool)
    in_cycle[cycle] = True
    outside = [0] + [v for v in range(1, m) if not in_cycle[v]]
    local = {v: i for i, v in enumerate(outside)}
    c_local = len(outside)

    m2 = c_local + 1
    sub = np.full((m2, m2), NEG_INF)
    best_into = np.full(len(outside), -1, dtype=np.int64)  # cycle head per out-node
    cycle_scores = scores[cycle, heads[cycle]]
    for v in outside[1:]:
        i = local[v]
        sub[i, : c_local] = [scores[v, u] for u in outside]
        sub[i, i] = NEG_INF
        into = scores[v, cycle]
        best_into[i] = cycle[int(np.argmax(into))]
        sub[i, c_local] = into.max()
    # entering the cycle swaps out one internal arc
    gains = scores[cycle, :] - cycle_scores[:, None]
    enter_gain = gains.max(axis=0)
    enter_node = np.asarray(cycle)[gains.argmax(axis=0)]
    for u in outside:
        sub[c_local, local[u]] = enter_gain[u] + cycle_scores.sum()
    sub[c_local, c_local] = NEG_INF

    sub_heads = _cle(sub)

    result = heads.copy()
    for v in outside[1:]:
        i = local[v]
        h = sub_heads[i]
        result[v] = best_into[i] if h == c_local else outside[h]
    entry_head = outside[sub_heads[c_local]]
    broken = int(enter_node[entry_head])
    result[broken] = entry_head
    for v in cycle:
        if v != broken:
            result[v] = heads[v]
    return result


def _find_cycle(heads: np.ndarray) -> list[int] | None:
    m = len(heads)
    color = np.zeros(m, dtype=np.int8)  # 0 new, 1 active, 2 done
    color[0] = 2
    for start in range(1, m):
        if color[start]:
            continue
        path = []
        v = start
        while color[v] == 0:
            color[v] = 1
            path.append(v)
            v = int(heads[v])
        if color[v] == 1:
            cycle = path[path.index(v) :]
            return cycle
        for u in path:
            color[u] = 2
    return None


def _tree_weight(scores: np.ndarray, heads: np.ndarray) -> float:
    return float(sum(scores[v, heads[v]] for v in range(1, len(heads))))


def maximum_arborescence(
    scores: np.ndarray, single_root: bool = True
) -> np.ndarray:
    """CLE with an optional exactly-one-root-child constraint.

    With `single_root`, the unconstrained optimum is kept if it already
    has one root child; otherwise the root arc is forced onto each
    candidate in turn and the best resulting tree wins.
    """
    scores = scores.astype(np.float64, copy=True)
    np.fill_diagonal(scores, NEG_INF)
    heads = _cle(scores)
    if not single_root:
        return heads
    root_children = [v for v in range(1, len(heads)) if heads[v] == 0]
    if len(root_children) <= 1:
        return heads
    best: np.ndarray | None = None
    best_weight = NEG_INF
    for candidate in range(1, len(heads)):
        if scores[candidate, 0] == NEG_INF:
            continue
        forced = scores.copy()
        forced[:, 0] = NEG_INF
        forced[candidate, 0] = scores[candidate, 0]
        trial = _cle(forced)
        weight = _tree_weight(forced, trial)
        if weight > best_weight:
            best, best_weight = trial, weight
    if best is None:
        raise LatticeError("no feasible single-root tree")
    return best


def mst_decode(
    head_scores: np.ndarray,
    mask: np.ndarray,
    chosen_nodes: list[int],
    single_root: bool = True,
) -> np.ndarray:
    """Optimal heads for the chosen nodes under the constraint mask.

    Returns a full-length head vector: chosen nodes get their tree head,
    unchosen segments the attachment sink, virtual nodes -1.
    """
    n = head_scores.shape[0]
    chosen_set = set(chosen_nodes)
    heads = np.full(n, -1, dtype=np.int64)
    for d in range(NUM_VIRTUAL_NODES, n):
        if d not in chosen_set:
            heads[d] = AUX_INDEX

    m = len(chosen_nodes) + 1
    local_of = {g: i for i, g in enumerate(chosen_nodes, start=1)}
    sub = np.full((m, m), NEG_INF)
    for d_global in chosen_nodes:
        d = local_of[d_global]
        if mask[d_global, ROOT_INDEX]:
            sub[d, 0] = head_scores[d_global, ROOT_INDEX]
        for h_global in chosen_nodes:
            if h_global != d_global and mask[d_global, h_global]:
                sub[d, local_of[h_global]] = head_scores[d_global, h_global]

    local_heads = maximum_arborescence(sub, single_root=single_root)
    for d_global in chosen_nodes:
        h = local_heads[local_of[d_global]]
        heads[d_global] = ROOT_INDEX if h == 0 else chosen_nodes[h - 1]
    return heads


def decode(
    lin: LinearizedLattice,
    scores: ScoreSet,
    single_root: bool = True,
    analysis_score: str = "max",
) -> JointParse:
    """Full constrained decode of one sentence."""
    head_scores = scores.head_scores.detach().numpy().astype(np.float64)
    base = base_mask(lin)
    proposal = greedy_heads(head_scores, base)
    chosen = select_analyses(lin, proposal, head_scores, base, scoring=analysis_score)
    mask = apply_constraints(lin, chosen)

    chosen_nodes: list[int] = []
    for token_idx, analysis_idx in enumerate(chosen, start=1):
        start, end = segments_of(lin, token_idx, analysis_idx)
        chosen_nodes.extend(range(start, end))
    heads = mst_decode(head_scores, mask, chosen_nodes, single_root=single_root)

    label_scores = scores.label_scores.detach().numpy()
    permitted_labels = [
        i for i, label in enumerate(scores.label_set) if label != AUX_LABEL
    ]
    if not permitted_labels:
        raise LatticeError("label set contains only the discard label")

    tag_predictions: dict[str, np.ndarray] = {}
    for task, logits in scores.mtl_logits.items():
        tag_predictions[task] = logits.detach().numpy().argmax(axis=1)

    out_rank = {g: i for i, g in enumerate(chosen_nodes, start=1)}
    segments: list[ParsedSegment] = []
    for g in chosen_nodes:
        node = lin.nodes[g]
        head_global = int(heads[g])
        label_row = label_scores[g, head_global]
        best_label = max(permitted_labels, key=lambda i: label_row[i])
        tags: dict[str, str | None] = {}
        for task in ("pos", "gender", "number", "person"):
            if task in tag_predictions:
                tag = scores.tag_sets[task][int(tag_predictions[task][g])]
                tags[task] = None if tag == NO_VALUE else tag
            else:
                tags[task] = None
        segments.append(
            ParsedSegment(
                token_idx=node.token_idx,
                form=node.form,
                head=0 if head_global == ROOT_INDEX else out_rank[head_global],
                label=scores.label_set[best_label],
                pos=tags["pos"],
                gender=tags["gender"],
                number=tags["number"],
                person=tags["person"],
            )
        )
    return JointParse(chosen_analysis=chosen, segments=tuple(segments))
