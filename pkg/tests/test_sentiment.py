import pytest
from hypothesis import given, strategies as st

from hostel_ops.errors import StructuralError
from hostel_ops.sentiment import SentimentScorer, load_lexicon, load_stopwords, score_text, tokenize


def test_bundled_resources_load():
    lex = load_lexicon()
    assert len(lex) > 150
    assert set(lex.values()) == {-1, 1}
    assert "not" not in load_stopwords()


@pytest.mark.parametrize(
    "text,score,label",
    [
        ("", 0.0, "neutral"),
        ("the food was not good", -1.0, "negative"),
        ("clean room, great staff", 1.0, "positive"),
        ("the room is", 0.0, "neutral"),
    ],
)
def test_examples(text, score, label):
    r = score_text(text)
    assert r.score == score and r.label == label


def test_custom_lexicon_and_confidence():
    s = SentimentScorer({"good": 1, "bad": -1}, frozenset({"the"}))
    r = s("The good the bad and ugly")
    assert r.score == 0.0
    assert r.confidence == pytest.approx(2 / 4)
    assert s("never bad").score == 1.0
    assert s("not the good").score == -1.0


def test_neutral_band():
    s = SentimentScorer({"good": 1, "bad": -1}, frozenset(), neutral_band=0.5)
    assert s("good good bad").label == "neutral"
    assert s("good good good good bad").label == "positive"


def test_tokenize_strips_punctuation():
    assert tokenize("Fan's BROKEN!! (again)") == ["fan's", "broken", "again"]


def test_bad_lexicon_file(tmp_path):
    p = tmp_path / "lex.tsv"
    p.write_text("good\t2\n")
    with pytest.raises(StructuralError):
        load_lexicon(p)
    p.write_text("good 1\n")
    with pytest.raises(StructuralError):
        load_lexicon(p)


@given(st.text(max_size=200))
def test_bounds(text):
    r = score_text(text)
    assert -1.0 <= r.score <= 1.0
    assert 0.0 <= r.confidence <= 1.0
    assert r.label in ("negative", "neutral", "positive")
