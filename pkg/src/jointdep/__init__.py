"""Joint morphological segmentation and dependency parsing over lattices."""

from .conllu import GoldSegment, GoldSentence, read_treebank, write_treebank
from .decoder import JointParse, ParsedSegment, decode
from .errors import (
    ConfigError,
    DataError,
    EmbeddingError,
    GoldPathError,
    JointdepError,
    LatticeError,
    TrainingError,
)
from .lattice import (
    AUX_INDEX,
    ROOT_INDEX,
    Analysis,
    LinearizedLattice,
    Segment,
    SentenceLattice,
    Token,
    TokenLattice,
    linearize,
)
from .morph import Lexicon, MAMode, analyze, build_sentence_lattice, infuse
from .scorer import JointScorer, ScoreSet, ScorerConfig
from .synth import SynthGrammar, generate

__all__ = [
    "AUX_INDEX",
    "ROOT_INDEX",
    "Analysis",
    "ConfigError",
    "DataError",
    "EmbeddingError",
    "GoldPathError",
    "GoldSegment",
    "GoldSentence",
    "JointParse",
    "JointScorer",
    "JointdepError",
    "Lexicon",
    "LinearizedLattice",
    "LatticeError",
    "MAMode",
    "ParsedSegment",
    "ScoreSet",
    "ScorerConfig",
    "Segment",
    "SentenceLattice",
    "SynthGrammar",
    "Token",
    "TokenLattice",
    "TrainingError",
    "analyze",
    "build_sentence_lattice",
    "decode",
    "generate",
    "infuse",
    "linearize",
    "read_treebank",
    "write_treebank",
]
