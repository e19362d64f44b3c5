import pytest
from hypothesis import given
from hypothesis import strategies as st

from quotespread.matcher.normalize import (
    StopwordList,
    default_stopwords,
    is_punct_token,
    normalize,
    parse_stopwords,
    tokenize,
)


def test_punctuation_becomes_its_own_token():
    form = normalize("America First!")
    assert form.exact_tokens == ("america", "first", "!")
    assert form.loose_key == "america first"


def test_stopwords_removed_in_loose_form():
    # the, was, a are in the bundled list; holocaust, good, thing are not
    sw = default_stopwords()
    assert {"the", "was", "a"} <= sw.words
    assert not {"holocaust", "good", "thing"} & sw.words
    assert normalize("the holocaust was a good thing").loose_key == "holocaust good thing"


def test_all_punctuation_is_unmatchable():
    form = normalize("...")
    assert form.exact_tokens == ("...",)
    assert form.loose_key == ""
    assert not form.matchable


def test_empty_input():
    form = normalize("")
    assert form.exact_tokens == () and not form.matchable


@pytest.mark.parametrize(
    "text, tokens",
    [
        ("america (first)", ["america", "(", "first", ")"]),
        ("don't", ["don", "'", "t"]),
        ("a--b", ["a", "--", "b"]),
        ("$100 #tag", ["$", "100", "#", "tag"]),
        ("  ÉCOLE\tnew\nline ", ["école", "new", "line"]),
        ("wait…what", ["wait", "…", "what"]),
    ],
)
def test_tokenize(text, tokens):
    assert tokenize(text) == tokens


def test_punct_token_detection():
    assert is_punct_token("!?")
    assert is_punct_token("\u2014")
    assert not is_punct_token("abc")
    assert not is_punct_token("")


def test_bundled_list_has_version():
    sw = default_stopwords()
    assert sw.version == "nltk-english-179"
    assert len(sw.words) == 179


def test_parse_stopwords_requires_version():
    with pytest.raises(ValueError):
        parse_stopwords("the\na\n")
    sw = parse_stopwords("# version: tiny-1\nThe\n\nof\n")
    assert sw == StopwordList(frozenset({"the", "of"}), "tiny-1")


texts = st.lists(
    st.sampled_from(list("abcAB !?.,'-") + ["the ", " of ", "é", "\n"]),
    max_size=30,
).map("".join)


@given(texts)
def test_loose_key_is_a_fixed_point(text):
    key = normalize(text).loose_key
    assert normalize(key).loose_key == key


@given(texts)
def test_loose_tokens_rederivable_from_exact(text):
    form = normalize(text)
    sw = default_stopwords()
    assert form.loose_tokens == tuple(t for t in form.exact_tokens if t not in sw and not is_punct_token(t))


@given(texts)
def test_normalize_deterministic_and_case_insensitive(text):
    assert normalize(text) == normalize(text)
    assert normalize(text.upper()).loose_key == normalize(text.lower()).loose_key
