import re

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tifeed.errors import UnknownCategory
from tifeed.ingest import Corpus
from tifeed.textprep import (
    ENGLISH_STOPWORDS,
    HASH_TOKEN,
    Source,
    abstract_hashes,
    build_docs,
    compose_text,
    load_stopwords,
    tokenize,
)

from helpers import event, ioc

HEX_TOKEN = re.compile(r"^(?:[0-9a-f]{32}|[0-9a-f]{40}|[0-9a-f]{64})$")


def two_category_event():
    return event(info="Daily report", tags=["kill-chain:delivery"], attrs=[
        ioc(value="198.51.100.1", comment="beacon traffic"),
        ioc(value="dropper.exe|" + "a" * 32, attr_type="filename|md5", category="payload delivery",
            comment="loader sample", attr_id="b"),
    ])


# -- compose_text ---------------------------------------------------------------

def test_compose_info_only():
    ev = two_category_event()
    assert compose_text(ev, {Source.INFO}) == "Daily report"


def test_compose_comments_rat_name():
    ev = event(attrs=[ioc(comment="RAT name")])
    assert compose_text(ev, {Source.COMMENTS}) == "RAT name"


def test_compose_category_filter():
    ev = two_category_event()
    text = compose_text(ev, {Source.COMMENTS, Source.ATTR_VALUES}, "network activity")
    assert "beacon traffic" in text and "198.51.100.1" in text
    assert "loader" not in text and "dropper" not in text


def test_compose_unknown_category():
    with pytest.raises(UnknownCategory):
        compose_text(two_category_event(), {Source.INFO}, "vulnerability", {"network activity"})


def test_compose_never_uses_tags():
    ev = two_category_event()
    text = compose_text(ev, set(Source))
    assert "kill" not in text.lower() and "delivery" not in text.lower()


def test_compose_needs_a_source():
    with pytest.raises(ValueError):
        compose_text(two_category_event(), set())


# -- abstract_hashes --------------------------------------------------------------

def test_abstract_sha256():
    assert abstract_hashes("f" * 64) == HASH_TOKEN


def test_abstract_composite():
    assert abstract_hashes("evil.exe|" + "0123456789abcdef" * 2) == "evil.exe|hashtok"


def test_abstract_sha1_and_mixed_case():
    assert abstract_hashes("see " + "AbC123" * 6 + "ab4f") == "see hashtok"


def test_non_hex_unchanged():
    word = "g" * 64
    assert abstract_hashes(word) == word


def test_wrong_length_hex_unchanged():
    assert abstract_hashes("a" * 33) == "a" * 33
    assert abstract_hashes("a" * 65) == "a" * 65


# -- tokenize -----------------------------------------------------------------------

def test_tokenize_kill_switch():
    assert tokenize("Kill switch domain. Monitor, do not block.") == \
        ["kill", "switch", "domain", "monitor", "block"]


def test_tokenize_tag_like_text():
    assert tokenize("kill-chain:delivery") == ["kill", "chain", "delivery"]


def test_tokenize_empty():
    assert tokenize("") == []


@given(st.text(max_size=60))
def test_tokenize_idempotent(text):
    once = tokenize(text)
    assert tokenize(" ".join(once)) == once
    assert all(re.fullmatch(r"[a-z0-9]+", t) for t in once)
    assert not set(once) & ENGLISH_STOPWORDS


def test_stopword_list_size():
    assert 140 <= len(ENGLISH_STOPWORDS) <= 200


def test_load_stopwords(tmp_path):
    path = tmp_path / "stop.txt"
    path.write_text("# custom list\nFoo\nbar  # trailing\n\n")
    assert load_stopwords(path) == {"foo", "bar"}


# -- build_docs -------------------------------------------------------------------------

def test_build_docs_alignment():
    evs = [event(f"e{i}", ts=i, info=f"word{i}") for i in range(3)]
    docs = build_docs(Corpus.from_events(evs))
    assert [d.event_id for d in docs] == ["e0", "e1", "e2"]
    assert [d.tokens for d in docs] == [("word0",), ("word1",), ("word2",)]


def test_build_docs_single_hash():
    ev = event(attrs=[ioc(value="ab" * 32, attr_type="sha256")])
    (doc,) = build_docs(Corpus.from_events([ev]))
    assert doc.tokens == (HASH_TOKEN,)


def test_build_docs_stopword_only():
    (doc,) = build_docs(Corpus.from_events([event(info="the and of")]))
    assert doc.tokens == () and doc.empty


def test_build_docs_category_filter_unknown():
    with pytest.raises(UnknownCategory):
        build_docs(Corpus.from_events([two_category_event()]), category_filter="nope")


def test_no_hash_leaks_on_synthetic_corpus():
    from tifeed.synthetic import make_corpus
    corpus = make_corpus(200, seed=3)
    docs = build_docs(corpus)
    assert len(docs) == len(corpus.events)
    for d in docs:
        assert not any(HEX_TOKEN.match(t) for t in d.tokens)
