"""Lexicon-based sentiment scoring.

Pipeline: lowercase, strip punctuation, split on whitespace, drop stop-words,
then average the polarity of every lexicon hit. ``not``/``no``/``never``
flip the sign of the next polar token.

Lexicon file format: UTF-8, one ``term<TAB>polarity`` per line with polarity
``1`` or ``-1``; ``#`` starts a comment. Stop-word files hold one term per line.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import StructuralError

NEGATORS = frozenset({"not", "no", "never"})
_PUNCT = str.maketrans({c: " " for c in string.punctuation if c not in "-'"})


@dataclass(frozen=True)
class SentimentResult:
    score: float
    label: str
    confidence: float


def _data_lines(path: str | Path | None, default: str) -> list[str]:
    if path is None:
        text = resources.files("hostel_ops").joinpath("data").joinpath(default).read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]


def load_lexicon(path: str | Path | None = None) -> dict[str, int]:
    out = {}
    for ln in _data_lines(path, "lexicon.tsv"):
        try:
            term, pol = ln.split("\t")
            pol = int(pol)
        except ValueError as exc:
            raise StructuralError(f"bad lexicon line {ln!r}") from exc
        if pol not in (-1, 1):
            raise StructuralError(f"polarity must be -1 or +1: {ln!r}")
        out[term.lower()] = pol
    return out


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    return frozenset(ln.split("\t")[0].lower() for ln in _data_lines(path, "stopwords.txt")) - NEGATORS


def tokenize(text: str, stopwords: frozenset[str] = frozenset()) -> list[str]:
    tokens = text.lower().translate(_PUNCT).split()
    return [t.strip("'") for t in tokens if t.strip("'") and t.strip("'") not in stopwords]


class SentimentScorer:
    """Callable scorer; stateless once the lexicon is loaded."""

    def __init__(self, lexicon: dict[str, int] | None = None, stopwords: frozenset[str] | None = None,
                 neutral_band: float = 0.1):
        self.lexicon = load_lexicon() if lexicon is None else lexicon
        self.stopwords = load_stopwords() if stopwords is None else frozenset(stopwords) - NEGATORS
        self.neutral_band = neutral_band

    def label_for(self, score: float) -> str:
        if score < -self.neutral_band:
            return "negative"
        if score > self.neutral_band:
            return "positive"
        return "neutral"

    def __call__(self, text: str) -> SentimentResult:
        tokens = tokenize(text, self.stopwords)
        total, matched, flip = 0, 0, False
        for tok in tokens:
            if tok in NEGATORS:
                flip = True
                continue
            pol = self.lexicon.get(tok)
            if pol is None:
                continue
            total += -pol if flip else pol
            matched += 1
            flip = False
        if not tokens or not matched:
            return SentimentResult(0.0, "neutral", 0.0)
        score = total / matched
        return SentimentResult(score, self.label_for(score), matched / len(tokens))


_default: SentimentScorer | None = None


def score_text(text: str) -> SentimentResult:
    """Score with the bundled lexicon and stop-word list."""
    global _default
    if _default is None:
        _default = SentimentScorer()
    return _default(text)
