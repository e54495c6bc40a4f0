"""Synthetic fusion-language corpus generator.

The generated language glues single-letter function morphemes onto noun
stems the way Hebrew orthography does: a case marker (``b``/``l``) or a
determiner (``h``) fuses with the following noun into one written token,
and a case marker can additionally hide a covert determiner, so the
surface ``b`` + stem may read as case+noun or case+determiner+noun.
Some fused surfaces double as ordinary noun stems (homographs), which
makes the correct reading depend on sentence position rather than on
the form alone.

Every surface form gets a lexicon entry whose analyses include the gold
reading plus distractors: the whole form as a noun, the competing
fused readings, and a junk split at a wrong boundary.  Analyses are
ordered shortest-first, so a baseline that always commits to the first
analysis keeps whole-form readings and breaks on fused tokens.

Grammar: verb-rooted clauses with subject/object/oblique nouns,
adjectives following their noun, and an optional conjoined object.
Nouns carry Gender/Number, verbs Person; adjectives agree with the
noun they modify.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .conllu import GoldSegment, GoldSentence
from .errors import ConfigError
from .lattice import Analysis, Segment
from .morph import Lexicon

_CONSONANTS = "bgdkmnprstz"
_VOWELS = "aeiou"


@dataclass(frozen=True)
class SynthGrammar:
    """Vocabulary sizes, fusion inventory, and sampling probabilities."""

    seed: int = 0
    n_nouns: int = 24
    n_verbs: int = 10
    n_adjectives: int = 6
    case_prefixes: tuple[str, ...] = ("b", "l")
    determiner: str = "h"
    conjunction: str = "w"
    ambiguity_rate: float = 0.5
    fused_fraction: float = 0.6
    det_noun_fraction: float = 0.5
    fused_det_rate: float = 0.4
    homograph_rate: float = 0.5
    p_object: float = 0.7
    p_oblique: float = 0.8
    p_adjective: float = 0.4
    p_conjunction: float = 0.2

    def __post_init__(self) -> None:
        if self.n_nouns < 2 or self.n_verbs < 1:
            raise ConfigError(
                "degenerate grammar: need at least 2 nouns and 1 verb, got "
                f"{self.n_nouns} nouns / {self.n_verbs} verbs"
            )
        if not self.case_prefixes or not self.determiner or not self.conjunction:
            raise ConfigError("case prefixes, determiner and conjunction must be set")
        for name in (
            "ambiguity_rate",
            "fused_fraction",
            "det_noun_fraction",
            "fused_det_rate",
            "homograph_rate",
            "p_object",
            "p_oblique",
            "p_adjective",
            "p_conjunction",
        ):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {rate}")


@dataclass(frozen=True)
class SynthStats:
    n_sentences: int
    n_tokens: int
    n_ambiguous_tokens: int
    n_multi_segment_tokens: int

    @property
    def ambiguity(self) -> float:
        return self.n_ambiguous_tokens / self.n_tokens if self.n_tokens else 0.0


@dataclass
class SynthResult:
    sentences: list[GoldSentence]
    lexicon: Lexicon
    stats: SynthStats


@dataclass(frozen=True)
class _Noun:
    form: str
    gender: str
    number: str


@dataclass(frozen=True)
class _Fused:
    """A fused surface: prefix (+ covert determiner) + noun stem."""

    surface: str
    prefix: str
    noun: _Noun
    has_det: bool
    whole: _Noun  # the whole-form noun reading of the same surface
    homograph: bool


@dataclass(frozen=True)
class _DetSurface:
    """Determiner fused onto a noun stem (subject/object position)."""

    surface: str
    noun: _Noun
    whole: _Noun


@dataclass
class _Seg:
    form: str
    pos: str
    label: str
    head_sym: str  # "root" or a slot symbol
    gender: str | None = None
    number: str | None = None
    person: str | None = None
    sym: str | None = None  # set on segments other slots can attach to


@dataclass
class _Inventory:
    nouns: list[_Noun] = field(default_factory=list)
    verbs: list[tuple[str, str]] = field(default_factory=list)  # (form, person)
    adjectives: list[str] = field(default_factory=list)
    fused: list[_Fused] = field(default_factory=list)
    det_surfaces: list[_DetSurface] = field(default_factory=list)


def _make_stems(rng: random.Random, count: int, taken: set[str]) -> list[str]:
    stems: list[str] = []
    while len(stems) < count:
        pattern = rng.choice(("cvcv", "cvcvc", "cvc"))
        form = "".join(
            rng.choice(_CONSONANTS if ch == "c" else _VOWELS) for ch in pattern
        )
        if form in taken:
            continue
        taken.add(form)
        stems.append(form)
    return stems


def _build_inventory(grammar: SynthGrammar, rng: random.Random) -> _Inventory:
    inv = _Inventory()
    taken: set[str] = {
        *grammar.case_prefixes,
        grammar.determiner,
        grammar.conjunction,
    }

    def _noun_of(form: str) -> _Noun:
        return _Noun(
            form=form,
            gender=rng.choice(("Masc", "Fem")),
            number=rng.choice(("Sing", "Plur")),
        )

    inv.nouns = [_noun_of(f) for f in _make_stems(rng, grammar.n_nouns, taken)]
    inv.verbs = [
        (f, rng.choice(("1", "2", "3")))
        for f in _make_stems(rng, grammar.n_verbs, taken)
    ]
    inv.adjectives = _make_stems(rng, grammar.n_adjectives, taken)

    for prefix in grammar.case_prefixes:
        for noun in inv.nouns:
            if rng.random() >= grammar.fused_fraction:
                continue
            surface = prefix + noun.form
            if surface in taken:
                continue
            taken.add(surface)
            inv.fused.append(
                _Fused(
                    surface=surface,
                    prefix=prefix,
                    noun=noun,
                    has_det=rng.random() < grammar.fused_det_rate,
                    whole=_noun_of(surface),
                    homograph=rng.random() < grammar.homograph_rate,
                )
            )
    for noun in inv.nouns:
        if rng.random() >= grammar.det_noun_fraction:
            continue
        surface = grammar.determiner + noun.form
        if surface in taken:
            continue
        taken.add(surface)
        inv.det_surfaces.append(
            _DetSurface(surface=surface, noun=noun, whole=_noun_of(surface))
        )
    return inv


def _noun_segment(noun: _Noun) -> Segment:
    return Segment(
        form=noun.form,
        pos_hint="NOUN",
        feats_hint=(("Gender", noun.gender), ("Number", noun.number)),
    )


def _junk_split(surface: str, at: int) -> Analysis | None:
    if not 0 < at < len(surface):
        return None
    return Analysis(
        segments=(
            Segment(form=surface[:at], pos_hint="X"),
            Segment(form=surface[at:], pos_hint="X"),
        )
    )


def _build_lexicon(grammar: SynthGrammar, inv: _Inventory) -> Lexicon:
    entries: dict[str, list[Analysis]] = {}

    def add(form: str, analysis: Analysis) -> None:
        bucket = entries.setdefault(form, [])
        if analysis.forms() not in [a.forms() for a in bucket]:
            bucket.append(analysis)

    for noun in inv.nouns:
        add(noun.form, Analysis(segments=(_noun_segment(noun),)))
    for form, person in inv.verbs:
        add(
            form,
            Analysis(
                segments=(Segment(form=form, pos_hint="VERB", feats_hint=(("Person", person),)),)
            ),
        )
    for form in inv.adjectives:
        add(form, Analysis(segments=(Segment(form=form, pos_hint="ADJ"),)))
    for prefix in grammar.case_prefixes:
        add(prefix, Analysis(segments=(Segment(form=prefix, pos_hint="ADP"),)))
    add(
        grammar.determiner,
        Analysis(segments=(Segment(form=grammar.determiner, pos_hint="DET"),)),
    )
    add(
        grammar.conjunction,
        Analysis(segments=(Segment(form=grammar.conjunction, pos_hint="CCONJ"),)),
    )

    det_seg = Segment(form=grammar.determiner, pos_hint="DET")
    for fused in inv.fused:
        case_seg = Segment(form=fused.prefix, pos_hint="ADP")
        add(fused.surface, Analysis(segments=(_noun_segment(fused.whole),)))
        add(fused.surface, Analysis(segments=(case_seg, _noun_segment(fused.noun))))
        add(
            fused.surface,
            Analysis(segments=(case_seg, det_seg, _noun_segment(fused.noun))),
        )
        junk = _junk_split(fused.surface, len(fused.prefix) + 1)
        if junk is not None and len(fused.noun.form) >= 2:
            add(fused.surface, junk)
    for det in inv.det_surfaces:
        add(det.surface, Analysis(segments=(_noun_segment(det.whole),)))
        add(det.surface, Analysis(segments=(det_seg, _noun_segment(det.noun))))
        junk = _junk_split(det.surface, len(grammar.determiner) + 1)
        if junk is not None and len(det.noun.form) >= 2:
            add(det.surface, junk)

    ordered = {
        form: tuple(sorted(bucket, key=lambda a: (len(a.segments), a.forms())))
        for form, bucket in entries.items()
    }
    return Lexicon(entries=ordered)


def _noun_slot(
    grammar: SynthGrammar,
    inv: _Inventory,
    rng: random.Random,
    sym: str,
    label: str,
    head_sym: str,
    ambiguous: bool,
    allow_fused_case: bool,
) -> tuple[list[tuple[str, list[_Seg]]], _Noun]:
    """Realize one noun slot as tokens; returns (tokens, content noun)."""
    if ambiguous and allow_fused_case and inv.fused:
        fused = rng.choice(inv.fused)
        segs = [_Seg(form=fused.prefix, pos="ADP", label="case", head_sym=sym)]
        if fused.has_det:
            segs.append(
                _Seg(form=grammar.determiner, pos="DET", label="det", head_sym=sym)
            )
        segs.append(_make_noun_seg(fused.noun, label, head_sym, sym))
        return [(fused.surface, segs)], fused.noun
    if ambiguous and not allow_fused_case:
        pool: list[tuple[str, object]] = [
            ("homograph", f) for f in inv.fused if f.homograph
        ] + [("det", d) for d in inv.det_surfaces]
        if pool:
            kind, item = rng.choice(pool)
            if kind == "homograph":
                noun = item.whole
                return [(item.surface, [_make_noun_seg(noun, label, head_sym, sym)])], noun
            det_segs = [
                _Seg(form=grammar.determiner, pos="DET", label="det", head_sym=sym),
                _make_noun_seg(item.noun, label, head_sym, sym),
            ]
            return [(item.surface, det_segs)], item.noun
    if allow_fused_case:
        # unfused oblique: standalone case token + plain noun token
        prefix = rng.choice(grammar.case_prefixes)
        noun = rng.choice(inv.nouns)
        return (
            [
                (prefix, [_Seg(form=prefix, pos="ADP", label="case", head_sym=sym)]),
                (noun.form, [_make_noun_seg(noun, label, head_sym, sym)]),
            ],
            noun,
        )
    noun = rng.choice(inv.nouns)
    return [(noun.form, [_make_noun_seg(noun, label, head_sym, sym)])], noun


def _make_noun_seg(noun: _Noun, label: str, head_sym: str, sym: str) -> _Seg:
    return _Seg(
        form=noun.form,
        pos="NOUN",
        label=label,
        head_sym=head_sym,
        gender=noun.gender,
        number=noun.number,
        sym=sym,
    )


def _build_sentence(
    grammar: SynthGrammar, inv: _Inventory, rng: random.Random, sent_id: str
) -> GoldSentence:
    has_object = rng.random() < grammar.p_object
    has_oblique = rng.random() < grammar.p_oblique
    has_conj = has_object and rng.random() < grammar.p_conjunction

    capable = 1 + int(has_object) + int(has_oblique)
    est_tokens = 2 + int(has_object) + 2 * int(has_oblique) + 2 * int(has_conj)
    q = min(1.0, grammar.ambiguity_rate * est_tokens / capable)

    tokens: list[tuple[str, list[_Seg]]] = []
    noun_slots: list[tuple[str, _Noun, int]] = []  # (sym, noun, token position)

    def add_slot(sym: str, label: str, fused_case: bool) -> None:
        slot_tokens, noun = _noun_slot(
            grammar,
            inv,
            rng,
            sym=sym,
            label=label,
            head_sym="verb",
            ambiguous=rng.random() < q,
            allow_fused_case=fused_case,
        )
        tokens.extend(slot_tokens)
        noun_slots.append((sym, noun, len(tokens) - 1))

    add_slot("subj", "nsubj", fused_case=False)
    verb_form, person = rng.choice(inv.verbs)
    tokens.append(
        (
            verb_form,
            [_Seg(form=verb_form, pos="VERB", label="root", head_sym="root",
                  person=person, sym="verb")],
        )
    )
    if has_object:
        add_slot("obj", "obj", fused_case=False)
    if has_oblique:
        add_slot("obl", "obl", fused_case=True)

    if has_conj:
        conj_noun = rng.choice(inv.nouns)
        tokens.append(
            (
                grammar.conjunction,
                [_Seg(form=grammar.conjunction, pos="CCONJ", label="cc",
                      head_sym="conj")],
            )
        )
        tokens.append(
            (conj_noun.form, [_make_noun_seg(conj_noun, "conj", "obj", "conj")])
        )

    if noun_slots and rng.random() < grammar.p_adjective:
        sym, noun, position = rng.choice(noun_slots)
        adj = rng.choice(inv.adjectives)
        tokens.insert(
            position + 1,
            (
                adj,
                [_Seg(form=adj, pos="ADJ", label="amod", head_sym=sym,
                      gender=noun.gender, number=noun.number)],
            ),
        )

    sym_to_id: dict[str, int] = {}
    seg_id = 0
    for _, segs in tokens:
        for seg in segs:
            seg_id += 1
            if seg.sym is not None:
                sym_to_id[seg.sym] = seg_id

    groups: list[tuple[GoldSegment, ...]] = []
    for _, segs in tokens:
        group = []
        for seg in segs:
            head = 0 if seg.head_sym == "root" else sym_to_id[seg.head_sym]
            group.append(
                GoldSegment(
                    form=seg.form,
                    head=head,
                    label=seg.label,
                    pos=seg.pos,
                    gender=seg.gender,
                    number=seg.number,
                    person=seg.person,
                )
            )
        groups.append(tuple(group))
    return GoldSentence(
        sent_id=sent_id,
        tokens=tuple(form for form, _ in tokens),
        segments=tuple(groups),
    )


def generate(grammar: SynthGrammar, n_sentences: int) -> SynthResult:
    """Generate a corpus, its covering lexicon, and realized statistics.

    The lexicon contains every gold analysis by construction; realized
    ambiguity (fraction of tokens with two or more lattice analyses) is
    reported in the stats rather than enforced exactly.
    """
    if n_sentences < 1:
        raise ConfigError(f"need at least one sentence, got {n_sentences}")
    rng = random.Random(grammar.seed)
    inv = _build_inventory(grammar, rng)
    lexicon = _build_lexicon(grammar, inv)
    sentences = [
        _build_sentence(grammar, inv, rng, sent_id=f"synth{i}")
        for i in range(1, n_sentences + 1)
    ]

    n_tokens = n_ambiguous = n_multi = 0
    for sentence in sentences:
        for form, group in zip(sentence.tokens, sentence.segments):
            n_tokens += 1
            analyses = lexicon.get(form)
            if analyses is not None and len(analyses) > 1:
                n_ambiguous += 1
            if len(group) > 1:
                n_multi += 1
    stats = SynthStats(
        n_sentences=len(sentences),
        n_tokens=n_tokens,
        n_ambiguous_tokens=n_ambiguous,
        n_multi_segment_tokens=n_multi,
    )
    return SynthResult(sentences=sentences, lexicon=lexicon, stats=stats)
