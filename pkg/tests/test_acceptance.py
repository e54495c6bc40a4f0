"""Shipping gate: one test per release criterion, at the stated tolerances.

Each test prints exactly one `[PASS]`/`[FAIL]` line (run with `-s` to see
them live; they also appear in captured output on failure).  Slow
quantitative checks (training runs) live at the bottom; the shared
three-seed experiment is trained once per session.
"""

from __future__ import annotations

import itertools
import random
from time import perf_counter

import numpy as np
import pytest
import torch

from conftest import (
    assert_valid_parse,
    brute_force_best_tree,
    chosen_node_positions,
    make_sentence,
    parse_tree_weight,
    random_lattice,
    random_score_set,
)
from jointdep.conllu import read_treebank, write_treebank
from jointdep.decoder import apply_constraints, decode, mst_decode
from jointdep.errors import LatticeError
from jointdep.evaluation import PRF, aligned_multiset_f1, evaluate_run, sentence_counts
from jointdep.lattice import (
    AUX_INDEX,
    NUM_VIRTUAL_NODES,
    ROOT_INDEX,
    Analysis,
    Segment,
    linearize,
    segment_forms,
)
from jointdep.morph import Lexicon, infuse, strip_gold_analyses
from jointdep.pipeline import RunConfig, parse_corpus, train_single_seed
from jointdep.scorer import (
    JointScorer,
    ScorerConfig,
    build_gold_targets,
    config_with_inventory,
    loss,
)
from jointdep.synth import SynthGrammar, generate


def _verdict(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


# --- 1. linearization worked example -----------------------------------------


def test_criterion_01_linearization_exactness(worked_lattice):
    expected = ("bkrti", "b", "bit", "b", "h", "bit", "h", "lbn", "hlbn")
    linearize(worked_lattice)  # warm-up outside the timed call
    t0 = perf_counter()
    lin = linearize(worked_lattice)
    dt = perf_counter() - t0
    forms = segment_forms(lin)
    ok = forms == expected and dt < 1e-3
    _verdict(
        "criterion-1 linearization",
        ok,
        f"segments {list(forms)} in {dt * 1e6:.0f}us (limit 1ms)",
    )


# --- 2. decoding constraints never violated -----------------------------------


def test_criterion_02_constraint_suite():
    rng = random.Random(2)
    npr = np.random.default_rng(2)
    n_pairs = 10_000
    violations = 0
    t0 = perf_counter()
    for _ in range(n_pairs):
        lin = linearize(random_lattice(rng))
        parse = decode(lin, random_score_set(npr, lin))
        try:
            assert_valid_parse(lin, parse)
        except AssertionError:
            violations += 1
    dt = perf_counter() - t0
    ok = violations == 0 and dt < 60.0
    _verdict(
        "criterion-2 constraint suite",
        ok,
        f"{n_pairs} decodes, {violations} violations, {dt:.1f}s (limit 60s)",
    )


# --- 3. MST against exhaustive enumeration ------------------------------------


def test_criterion_03_mst_oracle():
    rng = np.random.default_rng(3)
    wanted = 1_000
    checked = infeasible = mismatches = 0
    t0 = perf_counter()
    while checked < wanted:
        k = int(rng.integers(1, 6))
        n = k + NUM_VIRTUAL_NODES
        nodes = list(range(NUM_VIRTUAL_NODES, n))
        mask = np.zeros((n, n), dtype=bool)
        for d in nodes:
            mask[d, ROOT_INDEX] = True
            for h in nodes:
                if h != d:
                    mask[d, h] = rng.random() < 0.7
        scores = rng.integers(-10, 11, size=(n, n)).astype(np.float64)
        single_root = bool(rng.integers(0, 2))

        best, best_heads = brute_force_best_tree(scores, mask, nodes, single_root)
        if best_heads is None:
            with pytest.raises(LatticeError):
                mst_decode(scores, mask, nodes, single_root=single_root)
            infeasible += 1
            continue
        heads = mst_decode(scores, mask, nodes, single_root=single_root)
        weight = sum(float(scores[d, heads[d]]) for d in nodes)
        if weight != best:
            mismatches += 1
        checked += 1
    dt = perf_counter() - t0
    ok = mismatches == 0 and dt < 60.0
    _verdict(
        "criterion-3 MST oracle",
        ok,
        f"{checked} exact matches, {mismatches} mismatches, "
        f"{infeasible} infeasible (raised), {dt:.1f}s (limit 60s)",
    )


# --- 4. two-phase decoding against global brute force -------------------------


def _best_tree_vectorized(
    head_scores: np.ndarray,
    mask: np.ndarray,
    nodes: list[int],
    single_root: bool = True,
) -> float:
    """Exhaustive best-tree weight, enumerated with numpy.

    Faster sibling of conftest's itertools oracle (cross-checked against
    it below) so the global optimum over all analysis combinations stays
    affordable.
    """
    k = len(nodes)
    options = []
    for d in nodes:
        opts = []
        if mask[d, ROOT_INDEX]:
            opts.append(0)
        opts.extend(j + 1 for j, h in enumerate(nodes) if h != d and mask[d, h])
        if not opts:
            return float("-inf")
        options.append(np.array(opts, dtype=np.int64))
    grids = np.meshgrid(*options, indexing="ij")
    assign = np.stack([g.reshape(-1) for g in grids], axis=1)  # (N, k) local heads
    if single_root:
        assign = assign[(assign == 0).sum(axis=1) == 1]
        if assign.size == 0:
            return float("-inf")
    reach = assign == 0
    parent = np.maximum(assign - 1, 0)
    for _ in range(k):
        reach = reach | (np.take_along_axis(reach, parent, axis=1) & (assign > 0))
    valid = reach.all(axis=1)
    if not valid.any():
        return float("-inf")
    assign = assign[valid]
    columns = np.array([ROOT_INDEX] + nodes)
    weights = np.zeros(len(assign))
    for i, d in enumerate(nodes):
        weights += head_scores[d, columns[assign[:, i]]]
    return float(weights.max())


def test_criterion_04_joint_decode_oracle():
    rng = random.Random(4)
    npr = np.random.default_rng(4)

    # the fast enumerator must agree with the dumb one before we trust it
    for _ in range(60):
        k = rng.randint(1, 4)
        n = k + NUM_VIRTUAL_NODES
        nodes = list(range(NUM_VIRTUAL_NODES, n))
        mask = npr.random((n, n)) < 0.7
        scores = npr.integers(-10, 11, size=(n, n)).astype(np.float64)
        single_root = bool(npr.integers(0, 2))
        slow, _ = brute_force_best_tree(scores, mask, nodes, single_root)
        fast = _best_tree_vectorized(scores, mask, nodes, single_root)
        assert slow == fast

    wanted = 200
    done = conditional_mismatches = 0
    gaps: list[float] = []
    t0 = perf_counter()
    while done < wanted:
        lattice = random_lattice(rng)
        lin = linearize(lattice)
        counts = lin.analysis_counts
        worst_nodes = sum(
            max(len(a) for a in tl.analyses) for tl in lattice.tokens
        )
        n_combos = int(np.prod(counts))
        if worst_nodes > 6 or n_combos > 12:
            continue  # keeps exhaustive enumeration affordable

        score_set = random_score_set(npr, lin, integer=True)
        head_np = score_set.head_scores.numpy().astype(np.float64)
        parse = decode(lin, score_set)
        positions = chosen_node_positions(lin, parse.chosen_analysis)
        decoded_weight = parse_tree_weight(lin, parse, head_np)

        conditional_best = _best_tree_vectorized(
            head_np, apply_constraints(lin, parse.chosen_analysis), positions
        )
        if decoded_weight != conditional_best:
            conditional_mismatches += 1

        all_segments = set(lin.segment_positions())
        decoded_total = decoded_weight + sum(
            head_np[u, AUX_INDEX] for u in all_segments - set(positions)
        )
        global_best = float("-inf")
        for combo in itertools.product(*(range(1, c + 1) for c in counts)):
            pos = chosen_node_positions(lin, combo)
            tree = _best_tree_vectorized(head_np, apply_constraints(lin, combo), pos)
            if tree == float("-inf"):
                continue
            aux = sum(head_np[u, AUX_INDEX] for u in all_segments - set(pos))
            global_best = max(global_best, tree + aux)
        gaps.append(global_best - decoded_total)
        done += 1
    dt = perf_counter() - t0

    gaps_arr = np.array(gaps)
    ok = (
        conditional_mismatches == 0
        and bool((gaps_arr >= 0).all())  # two-phase can never beat the optimum
    )
    _verdict(
        "criterion-4 joint-decode oracle",
        ok,
        f"{done} lattices, conditional mismatches {conditional_mismatches}; "
        f"two-phase vs global gap: mean {gaps_arr.mean():.3f}, "
        f"max {gaps_arr.max():.1f}, optimal in {(gaps_arr == 0).mean():.0%}; "
        f"{dt:.1f}s",
    )


# --- 5. gradient check ---------------------------------------------------------


def test_criterion_05_gradient_check():
    sentence = make_sentence(
        "grad-1",
        [
            [("krh", 0, "root", "VERB", {"Person": "3"})],
            [
                ("b", 4, "case", "ADP"),
                ("h", 4, "det", "DET"),
                ("bit", 1, "obl", "NOUN", {"Gender": "Masc", "Number": "Sing"}),
            ],
        ],
        tokens=["krh", "bbit"],
    )
    lexicon = infuse(Lexicon(entries={}), [sentence])
    entries = dict(lexicon.entries)
    entries["bbit"] = entries["bbit"] + (Analysis(segments=(Segment(form="bbit"),)),)
    lattice_source = Lexicon(entries=entries)

    from jointdep.morph import build_sentence_lattice
    from jointdep.pipeline import tokens_of

    lin = linearize(build_sentence_lattice(lattice_source, tokens_of(sentence.tokens)))
    config = config_with_inventory(
        ScorerConfig(
            embedding_dim=8,
            rnn_hidden=8,
            shared_rnn_depth=1,
            branch_rnn_depth=1,
            arc_mlp_size=8,
            label_mlp_size=8,
            mtl_hidden=8,
            embedding_dropout=0.0,
            arc_mlp_dropout=0.0,
            label_mlp_dropout=0.0,
        ),
        [sentence],
    )
    targets = build_gold_targets(lin, sentence, config)

    torch.manual_seed(5)
    model = JointScorer(config).double().eval()
    emb = torch.randn(len(lin.nodes), config.embedding_dim, dtype=torch.float64)

    def objective() -> torch.Tensor:
        total, _ = loss(model(emb), targets)
        return total

    t0 = perf_counter()
    model.zero_grad()
    objective().backward()
    analytic = {
        name: p.grad.detach().clone() for name, p in model.named_parameters()
    }

    eps = 1e-5
    rng = np.random.default_rng(5)
    worst = 0.0
    checked = 0
    with torch.no_grad():
        for name, param in model.named_parameters():
            flat = param.data.view(-1)
            numel = flat.numel()
            if numel <= 5:
                coords = list(range(numel))
            else:
                coords = sorted(rng.choice(numel, size=5, replace=False).tolist())
            for idx in coords:
                orig = float(flat[idx])
                flat[idx] = orig + eps
                up = float(objective())
                flat[idx] = orig - eps
                down = float(objective())
                flat[idx] = orig
                numeric = (up - down) / (2 * eps)
                a = float(analytic[name].view(-1)[idx])
                rel = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
                worst = max(worst, rel)
                checked += 1
    dt = perf_counter() - t0
    ok = worst <= 1e-4 and dt < 120.0
    _verdict(
        "criterion-5 gradient check",
        ok,
        f"{checked} coordinates over {len(analytic)} parameter tensors, "
        f"max relative error {worst:.2e} (tol 1e-4), {dt:.1f}s (limit 120s)",
    )


# --- 6-8. training-based checks ------------------------------------------------

EXPERIMENT_SCORER = dict(
    embedding_dim=64,
    rnn_hidden=64,
    mtl_hidden=64,
    arc_mlp_size=64,
    label_mlp_size=32,
)


def test_criterion_06_overfit():
    corpus = generate(SynthGrammar(seed=60, ambiguity_rate=0.5), 50)
    cfg = RunConfig(
        epochs=300,
        eval_every=5,
        scorer=ScorerConfig(**EXPERIMENT_SCORER),
        target_seg_f1=0.99,
        target_dep_f1=0.95,
    )
    t0 = perf_counter()
    results = []
    hit = 0
    for seed in (1, 2, 3):
        outcome = train_single_seed(
            seed, corpus.sentences, corpus.sentences, corpus.lexicon, cfg
        )
        seg = outcome.best_dev["seg"].f1
        dep = outcome.best_dev["dep"].f1
        if seg >= 0.99 and dep >= 0.95:
            hit += 1
        results.append(f"seed {seed} seg {seg:.4f} dep {dep:.4f} @ep{outcome.epochs_run}")
    dt = perf_counter() - t0
    ok = hit == 3 and dt < 600.0
    _verdict(
        "criterion-6 overfit",
        ok,
        f"{hit}/3 seeds reached seg>=0.99 dep>=0.95 within 300 epochs "
        f"({'; '.join(results)}), {dt:.0f}s (limit 600s)",
    )


@pytest.fixture(scope="module")
def experiment():
    """Three seeds trained on 300 synth sentences; 500 held out for testing."""
    corpus = generate(SynthGrammar(seed=78, ambiguity_rate=0.5), 800)
    train, test = corpus.sentences[:300], corpus.sentences[300:]
    cfg = RunConfig(
        epochs=60,
        eval_every=5,
        scorer=ScorerConfig(**EXPERIMENT_SCORER),
        target_seg_f1=0.99,
        target_dep_f1=0.95,
    )
    t0 = perf_counter()
    outcomes = [
        train_single_seed(seed, train, train, corpus.lexicon, cfg)
        for seed in (11, 12, 13)
    ]
    joint = {}
    for outcome in outcomes:
        preds = parse_corpus(outcome.model, outcome.provider, corpus.lexicon, test)
        joint[outcome.seed] = {
            task: aligned_multiset_f1(test, preds, task) for task in ("seg", "dep")
        }
    return {
        "corpus": corpus,
        "test": test,
        "outcomes": outcomes,
        "joint": joint,
        "seconds": perf_counter() - t0,
    }


def test_criterion_07_joint_beats_first_analysis_pipeline(experiment):
    test = experiment["test"]
    lexicon = experiment["corpus"].lexicon
    t0 = perf_counter()
    pipeline_dep = []
    for outcome in experiment["outcomes"]:
        preds = parse_corpus(
            outcome.model, outcome.provider, lexicon, test, first_analysis_only=True
        )
        pipeline_dep.append(aligned_multiset_f1(test, preds, "dep").f1)
    dt = experiment["seconds"] + (perf_counter() - t0)

    joint_dep = [experiment["joint"][o.seed]["dep"].f1 for o in experiment["outcomes"]]
    joint_mean = sum(joint_dep) / len(joint_dep)
    pipeline_mean = sum(pipeline_dep) / len(pipeline_dep)
    margin = joint_mean - pipeline_mean
    ok = margin >= 0.05 and dt < 900.0
    _verdict(
        "criterion-7 joint vs pipeline",
        ok,
        f"joint DEP {joint_mean:.4f} vs first-analysis pipeline {pipeline_mean:.4f} "
        f"(+{margin * 100:.1f} points, need >=5), {dt:.0f}s (limit 900s)",
    )


def test_criterion_08_lexicon_stripping_hurts(experiment):
    test = experiment["test"]
    stripped_lexicon = strip_gold_analyses(
        experiment["corpus"].lexicon, test, 0.20, seed=8
    )
    stripped = {"seg": [], "dep": []}
    full = {"seg": [], "dep": []}
    for outcome in experiment["outcomes"]:
        preds = parse_corpus(outcome.model, outcome.provider, stripped_lexicon, test)
        for task in ("seg", "dep"):
            stripped[task].append(aligned_multiset_f1(test, preds, task).f1)
            full[task].append(experiment["joint"][outcome.seed][task].f1)

    means = {
        task: (sum(full[task]) / 3, sum(stripped[task]) / 3) for task in ("seg", "dep")
    }
    ok = all(worse < better for better, worse in means.values())
    _verdict(
        "criterion-8 stripped lexicon",
        ok,
        "mean of 3 seeds, full vs 20%-stripped: "
        + ", ".join(
            f"{task.upper()} {better:.4f} -> {worse:.4f}"
            for task, (better, worse) in means.items()
        ),
    )


# --- 9. metric fixtures and properties ------------------------------------------


def _seg_only(sent_id: str, groups: list[list[str]]):
    from jointdep.conllu import GoldSegment, GoldSentence

    return GoldSentence(
        sent_id=sent_id,
        tokens=tuple("".join(g) for g in groups),
        segments=tuple(
            tuple(GoldSegment(form=f, head=None, label=None) for f in g)
            for g in groups
        ),
    )


def _random_tree_sentence(rng: random.Random, sent_id: str, n_tokens: int):
    groups = []
    seg_id = 0
    for _ in range(n_tokens):
        segs = []
        for _ in range(rng.randint(1, 2)):
            seg_id += 1
            segs.append(
                (
                    rng.choice(["ab", "xy"]),
                    0 if seg_id == 1 else rng.randint(1, seg_id - 1),
                    rng.choice(["dep", "mod"]),
                    rng.choice(["NOUN", "VERB"]),
                )
            )
        groups.append(segs)
    return make_sentence(sent_id, groups)


def test_criterion_09_metric_fixtures_and_properties():
    failures = []

    def check(name: str, prf: PRF, matched: int, predicted: int, gold: int,
              p: float, r: float, f1: float) -> None:
        exact = (prf.matched, prf.predicted, prf.gold) == (matched, predicted, gold)
        close = (
            prf.precision == pytest.approx(p, abs=1e-12)
            and prf.recall == pytest.approx(r, abs=1e-12)
            and prf.f1 == pytest.approx(f1, abs=1e-12)
        )
        if not (exact and close):
            failures.append(name)

    # hand-computed fixtures (12)
    check("partial-overlap-0.8",
          sentence_counts(_seg_only("s", [["b", "h", "bit"]]),
                          _seg_only("s", [["b", "bit"]]), "seg"),
          2, 2, 3, 1.0, 2 / 3, 0.8)
    check("identical",
          sentence_counts(_seg_only("s", [["b", "bit"], ["krh"]]),
                          _seg_only("s", [["b", "bit"], ["krh"]]), "seg"),
          3, 3, 3, 1.0, 1.0, 1.0)
    check("disjoint",
          sentence_counts(_seg_only("s", [["ab"]]),
                          _seg_only("s", [["a", "b"]]), "seg"),
          0, 2, 1, 0.0, 0.0, 0.0)
    check("duplicate-forms",
          sentence_counts(_seg_only("s", [["na", "na"]]),
                          _seg_only("s", [["na"]]), "seg"),
          1, 1, 2, 1.0, 0.5, 2 / 3)
    check("wrong-token-alignment",
          sentence_counts(_seg_only("s", [["ab"], ["cd"]]),
                          _seg_only("s", [["cd"], ["ab"]]), "seg"),
          0, 2, 2, 0.0, 0.0, 0.0)
    check("extra-segment",
          sentence_counts(_seg_only("s", [["a"]]),
                          _seg_only("s", [["a", "b"]]), "seg"),
          1, 2, 1, 0.5, 1.0, 2 / 3)
    pos_gold = make_sentence("s", [[("krh", 0, "root", "VERB")]])
    check("pos-correct",
          sentence_counts(pos_gold, make_sentence("s", [[("krh", 0, "root", "VERB")]]),
                          "pos"),
          1, 1, 1, 1.0, 1.0, 1.0)
    check("pos-wrong-tag",
          sentence_counts(pos_gold, make_sentence("s", [[("krh", 0, "root", "NOUN")]]),
                          "pos"),
          0, 1, 1, 0.0, 0.0, 0.0)
    dep_gold = make_sentence("s", [[("a", 0, "root")], [("b", 1, "dep")]])
    dep_flip = make_sentence("s", [[("a", 0, "root")], [("b", 1, "mod")]])
    check("dep-label-flip",
          sentence_counts(dep_gold, dep_flip, "dep"),
          1, 2, 2, 0.5, 0.5, 0.5)
    check("dep-root-form",
          sentence_counts(make_sentence("s", [[("krh", 0, "root")]]),
                          make_sentence("s", [[("krh", 0, "root")]]), "dep"),
          1, 1, 1, 1.0, 1.0, 1.0)
    same_form_far = make_sentence(
        "s",
        [[("na", 0, "root")], [("xx", 1, "dep")], [("na", 1, "dep")],
         [("yy", 3, "dep")]],
    )
    same_form_near = make_sentence(
        "s",
        [[("na", 0, "root")], [("xx", 1, "dep")], [("na", 1, "dep")],
         [("yy", 1, "dep")]],
    )
    check("dep-lax-head-form",
          sentence_counts(same_form_far, same_form_near, "dep"),
          4, 4, 4, 1.0, 1.0, 1.0)
    check("dep-strict-distance",
          sentence_counts(same_form_far, same_form_near, "dep", strict_dep=True),
          3, 4, 4, 0.75, 0.75, 0.75)
    # corpus-level sum: (2,2,3) + (3,3,3) -> (5,5,6)
    check("corpus-sum",
          aligned_multiset_f1(
              [_seg_only("a", [["b", "h", "bit"]]), _seg_only("b", [["b", "bit"], ["krh"]])],
              [_seg_only("a", [["b", "bit"]]), _seg_only("b", [["b", "bit"], ["krh"]])],
              "seg"),
          5, 5, 6, 1.0, 5 / 6, 10 / 11)

    n_fixtures = 13
    # properties on random cases
    rng = random.Random(9)
    symmetry_bad = monotone_bad = 0
    for i in range(1_000):
        n_tokens = rng.randint(1, 3)
        gold = _random_tree_sentence(rng, "g", n_tokens)
        pred = _random_tree_sentence(rng, "p", n_tokens)
        task = rng.choice(["seg", "pos", "dep"])
        strict = rng.random() < 0.5
        fwd = sentence_counts(gold, pred, task, strict_dep=strict)
        bwd = sentence_counts(pred, gold, task, strict_dep=strict)
        if not (
            fwd.matched == bwd.matched
            and fwd.precision == bwd.recall
            and fwd.recall == bwd.precision
        ):
            symmetry_bad += 1
    for i in range(1_000):
        groups_gold = [
            [rng.choice(["ab", "xy", "q"]) for _ in range(rng.randint(1, 3))]
            for _ in range(rng.randint(1, 3))
        ]
        groups_pred = [
            [rng.choice(["ab", "xy", "q"]) for _ in range(rng.randint(1, 3))]
            for _ in range(len(groups_gold))
        ]
        gold = _seg_only("g", groups_gold)
        before = sentence_counts(gold, _seg_only("p", groups_pred), "seg")
        # add one correct item: copy a gold segment into the same token
        t = rng.randrange(len(groups_gold))
        grown = [list(g) for g in groups_pred]
        grown[t].append(rng.choice(groups_gold[t]))
        after = sentence_counts(gold, _seg_only("p", grown), "seg")
        if after.matched < before.matched or after.recall < before.recall:
            monotone_bad += 1

    ok = not failures and symmetry_bad == 0 and monotone_bad == 0
    _verdict(
        "criterion-9 metric fixtures",
        ok,
        f"{n_fixtures} hand fixtures exact (failed: {failures or 'none'}); "
        f"symmetry violations {symmetry_bad}/1000, "
        f"monotonicity violations {monotone_bad}/1000",
    )


# --- 10. treebank round-trip -----------------------------------------------------

ROUNDTRIP_FIXTURE = """\
# sent_id = fused-1
# text = krh bbit
1\tkrh\t_\tVERB\t_\tNumber=Sing|Person=3\t0\troot\t_\t_
2-4\tbbit\t_\t_\t_\t_\t_\t_\t_\t_
2\tb\t_\tADP\t_\t_\t4\tcase\t_\t_
3\th\t_\tDET\t_\t_\t4\tdet\t_\t_
4\tbit\t_\tNOUN\t_\tGender=Masc|Number=Sing\t1\tobl\t_\t_

# sent_id = plain-2
1\tlbn\t_\tNOUN\t_\tGender=Masc\t2\tnsubj\t_\t_
2\tkrh\t_\tVERB\t_\t_\t0\troot\t_\t_
"""


def _data_lines(text: str) -> list[str]:
    return [ln for ln in text.splitlines() if ln and not ln.startswith("#")]


def test_criterion_10_conllu_roundtrip(tmp_path):
    source = tmp_path / "fixture.conllu"
    source.write_text(ROUNDTRIP_FIXTURE, encoding="utf-8")
    out1 = tmp_path / "pass1.conllu"
    out2 = tmp_path / "pass2.conllu"
    write_treebank(read_treebank(source), out1)
    write_treebank(read_treebank(out1), out2)
    fixed_point = out1.read_bytes() == out2.read_bytes()
    modulo_comments = _data_lines(ROUNDTRIP_FIXTURE) == _data_lines(
        out1.read_text(encoding="utf-8")
    )
    ok = fixed_point and modulo_comments
    _verdict(
        "criterion-10 round-trip",
        ok,
        f"fixed point {fixed_point}, data lines preserved {modulo_comments} "
        "(multiword ranges included)",
    )


# --- 11. seed aggregation protocol ------------------------------------------------


def test_criterion_11_five_seed_aggregation():
    fused = [("b", 3, "case"), ("h", 3, "det"), ("bit", 0, "root")]
    gold = [make_sentence("s", [fused])]
    perfect = [make_sentence("s", [fused])]
    partial = [make_sentence("s", [[("b", 2, "case"), ("bit", 0, "root")]])]
    runs = [perfect, partial, perfect, partial, perfect]
    report = evaluate_run(gold, runs)

    hand_mean = sum(scores["seg"].f1 for scores in report.per_run) / 5
    kv = report.to_keyvalues()
    ok = (
        len(report.per_run) == 5
        and kv["runs"] == "5"
        and report.mean("seg") == hand_mean
        and abs(report.mean("seg") - (1.0 + 0.8 + 1.0 + 0.8 + 1.0) / 5) < 1e-9
        and "mean" in report.to_text()
    )
    _verdict(
        "criterion-11 seed protocol",
        ok,
        f"5 runs aggregated, mean SEG {report.mean('seg'):.6f} "
        f"(hand check {(1.0 + 0.8 + 1.0 + 0.8 + 1.0) / 5:.6f})",
    )
