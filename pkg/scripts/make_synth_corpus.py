#!/usr/bin/env python3
"""Generate a synthetic ambiguous-morphology corpus plus matching lexicon.

Writes train/dev/test CoNLL-U splits and the lexicon TSV into --out-dir,
and prints the realized ambiguity statistics.

    python3 scripts/make_synth_corpus.py --out-dir data/synth --n 1000
"""

from __future__ import annotations

import argparse
from pathlib import Path

from jointdep.conllu import write_treebank
from jointdep.morph import save_lexicon
from jointdep.synth import SynthGrammar, generate


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", type=Path, required=True)
    ap.add_argument("--n", type=int, default=1000, help="total sentences")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--ambiguity", type=float, default=0.5)
    ap.add_argument(
        "--splits",
        type=str,
        default="0.6,0.2,0.2",
        help="train,dev,test fractions (must sum to 1)",
    )
    args = ap.parse_args()

    fractions = [float(x) for x in args.splits.split(",")]
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9:
        ap.error("--splits needs three fractions summing to 1")

    grammar = SynthGrammar(seed=args.seed, ambiguity_rate=args.ambiguity)
    result = generate(grammar, args.n)

    n_train = round(args.n * fractions[0])
    n_dev = round(args.n * fractions[1])
    splits = {
        "train": result.sentences[:n_train],
        "dev": result.sentences[n_train : n_train + n_dev],
        "test": result.sentences[n_train + n_dev :],
    }

    args.out_dir.mkdir(parents=True, exist_ok=True)
    for name, sentences in splits.items():
        path = args.out_dir / f"{name}.conllu"
        write_treebank(sentences, path)
        print(f"{name}: {len(sentences)} sentences -> {path}")
    lexicon_path = args.out_dir / "lexicon.tsv"
    save_lexicon(result.lexicon, lexicon_path)
    print(f"lexicon: {len(result.lexicon)} forms -> {lexicon_path}")

    stats = result.stats
    print(
        f"tokens {stats.n_tokens}, ambiguous {stats.n_ambiguous_tokens} "
        f"(realized ambiguity {stats.ambiguity:.3f}), "
        f"multi-segment {stats.n_multi_segment_tokens}"
    )


if __name__ == "__main__":
    main()
