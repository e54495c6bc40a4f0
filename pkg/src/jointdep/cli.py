"""Command-line interface.

Subcommands: train, parse, eval, lexicon infuse, lattice dump.  Exit
codes: 0 success, 2 configuration/usage errors, 3 malformed input data,
1 anything unexpected.  Set JOINTDEP_LOG=debug|info|warning to control
log verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .conllu import read_treebank
from .errors import ConfigError, DataError, EmbeddingError, JointdepError, LatticeError
from .morph import MAMode, build_sentence_lattice, infuse, load_lexicon, save_lexicon
from .lattice import write_lattice_tsv
from .pipeline import RunConfig, run_eval, run_parse, run_train, tokens_of
from .scorer import ScorerConfig, config_from_keyvalues, read_keyvalues


def _add_ma_mode(parser: argparse.ArgumentParser, default: MAMode) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument(
        "--infused",
        dest="ma_mode",
        action="store_const",
        const=MAMode.INFUSED,
        help="add gold analyses from the input treebank to the lexicon",
    )
    group.add_argument(
        "--uninfused",
        dest="ma_mode",
        action="store_const",
        const=MAMode.UNINFUSED,
        help="use the lexicon as-is (gold readings may be missing)",
    )
    parser.set_defaults(ma_mode=default)


def _seeds(text: str) -> tuple[int, ...]:
    try:
        seeds = tuple(int(part) for part in text.split(",") if part)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"seeds must be comma-separated integers, got {text!r}"
        ) from exc
    if not seeds:
        raise argparse.ArgumentTypeError("need at least one seed")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jointdep",
        description="Joint morphological segmentation and dependency parsing.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train one model per seed")
    train.add_argument("--treebank", type=Path, required=True)
    train.add_argument("--dev", type=Path, help="dev treebank (default: train set)")
    train.add_argument("--lexicon", type=Path, required=True)
    train.add_argument("--checkpoint-dir", type=Path, required=True)
    train.add_argument("--out", type=Path, help="write the summary here too")
    train.add_argument(
        "--provider",
        choices=("static", "toyctx", "precomputed"),
        default="static",
    )
    train.add_argument("--vectors", type=Path, help="vectors file (precomputed provider)")
    train.add_argument("--seeds", type=_seeds, default=(1,))
    train.add_argument("--epochs", type=int, default=20)
    train.add_argument("--config", type=Path, help="key=value scorer config file")
    train.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a single scorer config key (repeatable)",
    )
    _add_ma_mode(train, MAMode.INFUSED)

    parse = sub.add_parser("parse", help="parse a CoNLL-U file with a checkpoint")
    parse.add_argument("--input", type=Path, required=True)
    parse.add_argument("--lexicon", type=Path, required=True)
    parse.add_argument("--checkpoint", type=Path, required=True)
    parse.add_argument("--vectors", type=Path)
    parse.add_argument("--out", type=Path, required=True)
    _add_ma_mode(parse, MAMode.UNINFUSED)

    evaluate = sub.add_parser("eval", help="score prediction files against gold")
    evaluate.add_argument("--gold", type=Path, required=True)
    evaluate.add_argument("--pred", type=Path, nargs="+", required=True)
    evaluate.add_argument("--out", type=Path, help="write key=value scores here")
    evaluate.add_argument(
        "--dep-strict",
        action="store_true",
        help="dependency items also match on signed head distance",
    )

    lexicon = sub.add_parser("lexicon", help="lexicon maintenance")
    lex_sub = lexicon.add_subparsers(dest="lexicon_command", required=True)
    lex_infuse = lex_sub.add_parser(
        "infuse", help="add a treebank's gold analyses to a lexicon"
    )
    lex_infuse.add_argument("--lexicon", type=Path, required=True)
    lex_infuse.add_argument("--treebank", type=Path, required=True)
    lex_infuse.add_argument("--out", type=Path, required=True)

    lattice = sub.add_parser("lattice", help="lattice inspection")
    lat_sub = lattice.add_subparsers(dest="lattice_command", required=True)
    lat_dump = lat_sub.add_parser(
        "dump", help="write the sentence lattices for a CoNLL-U file"
    )
    lat_dump.add_argument("--lexicon", type=Path, required=True)
    lat_dump.add_argument("--input", type=Path, required=True)
    lat_dump.add_argument("--out", type=Path, required=True)
    _add_ma_mode(lat_dump, MAMode.UNINFUSED)
    return parser


def _scorer_config(args: argparse.Namespace) -> ScorerConfig:
    values: dict[str, str] = {}
    if args.config is not None:
        values.update(read_keyvalues(args.config))
    for item in args.overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        values[key.strip()] = value.strip()
    return config_from_keyvalues(values)


def _cmd_train(args: argparse.Namespace) -> int:
    cfg = RunConfig(
        treebank=args.treebank,
        dev=args.dev,
        lexicon=args.lexicon,
        checkpoint_dir=args.checkpoint_dir,
        output=args.out,
        provider=args.provider,
        vectors=args.vectors,
        seeds=args.seeds,
        epochs=args.epochs,
        ma_mode=args.ma_mode,
        scorer=_scorer_config(args),
    )
    run_train(cfg)
    return 0


def _cmd_parse(args: argparse.Namespace) -> int:
    cfg = RunConfig(
        input=args.input,
        lexicon=args.lexicon,
        checkpoint=args.checkpoint,
        vectors=args.vectors,
        output=args.out,
        ma_mode=args.ma_mode,
    )
    run_parse(cfg)
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    cfg = RunConfig(
        gold=args.gold,
        pred_paths=tuple(args.pred),
        output=args.out,
        dep_strict=args.dep_strict,
    )
    run_eval(cfg)
    return 0


def _cmd_lexicon_infuse(args: argparse.Namespace) -> int:
    lexicon = load_lexicon(args.lexicon)
    treebank = read_treebank(args.treebank)
    save_lexicon(infuse(lexicon, treebank), args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_lattice_dump(args: argparse.Namespace) -> int:
    lexicon = load_lexicon(args.lexicon)
    sentences = read_treebank(args.input, require_heads=False)
    if args.ma_mode is MAMode.INFUSED:
        if not all(s.annotated for s in sentences):
            raise DataError("--infused needs gold segmentations in the input file")
        lexicon = infuse(lexicon, sentences)
    lattices = [
        build_sentence_lattice(lexicon, tokens_of(s.tokens)) for s in sentences
    ]
    write_lattice_tsv(lattices, args.out)
    print(f"wrote {args.out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("JOINTDEP_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))

    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "parse":
            return _cmd_parse(args)
        if args.command == "eval":
            return _cmd_eval(args)
        if args.command == "lexicon":
            return _cmd_lexicon_infuse(args)
        if args.command == "lattice":
            return _cmd_lattice_dump(args)
        parser.error(f"unknown command {args.command!r}")
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, LatticeError, EmbeddingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except JointdepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
