from functools import reduce

from hypothesis import given, settings
from hypothesis import strategies as st

from foodwatch.features import (
    DIM,
    bucket,
    featurize,
    feature_strings,
    fnv1a64,
    tokenize,
    tokenize_url,
)

from conftest import page, query


def fnv_oracle(data: bytes) -> int:
    # independent FNV-1a-64 expressed as a fold
    return reduce(
        lambda h, b: ((h ^ b) * 0x100000001B3) % 2**64, data, 0xCBF29CE484222325
    )


def test_fnv_known_vectors():
    # published FNV-1a 64-bit test vectors
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a64(b"foobar") == 0x85944171F73967E8


@settings(max_examples=200, deadline=None)
@given(st.binary(max_size=64))
def test_fnv_matches_fold_oracle(data):
    assert fnv1a64(data) == fnv_oracle(data)


def test_food_poisoning_exact_indices():
    event = query(text="food poisoning")
    expected = sorted(
        {
            fnv_oracle(s.encode()) % DIM
            for s in ("q:food", "q:poisoning", "qb:food_poisoning")
        }
    )
    vec = featurize(event)
    assert list(vec.indices) == expected
    assert all(i < DIM for i in vec.indices)


def test_empty_event_is_empty_vector():
    assert len(featurize(query(text=""))) == 0


def test_tokenizer_rules():
    assert tokenize("Fo0d-Poisoning!! after  2 days") == ["fo0d", "poisoning", "after", "2", "days"]
    assert tokenize_url("https://en.wikipedia.org/wiki/Foodborne_illness") == [
        "en", "wikipedia", "org", "wiki", "foodborne", "illness",
    ]
    # scheme tokens never leak into URL features
    event = query(text="", results=[page(url="https://example.org/x", title="", snippet="", tags=())])
    feats = set(feature_strings(event))
    assert "u:https" not in feats and "u:example" in feats


def test_namespaces_cover_all_sources():
    event = query(
        text="sick now",
        results=[
            page(
                url="http://site.org/page",
                title="Food safety basics",
                snippet="wash your hands",
                tags=("foodborne_illness", "health"),
            )
        ],
    )
    feats = set(feature_strings(event))
    assert {"q:sick", "q:now", "qb:sick_now"} <= feats
    assert {"u:site", "u:org", "u:page"} <= feats
    assert {"t:food", "t:safety", "tb:food_safety", "tb:safety_basics"} <= feats
    assert {"s:wash", "s:your", "sb:wash_your"} <= feats
    assert {"k:foodborne_illness", "k:health"} <= feats


def test_duplicates_collapse():
    vec = featurize(query(text="food food food"))
    expected = sorted({bucket("q:food"), bucket("qb:food_food")})
    assert list(vec.indices) == expected


def test_bucket_bound_holds_over_large_corpus():
    from foodwatch.seeding import make_rng

    rng = make_rng(8, "corpus")
    vocab = [f"w{i}" for i in range(2000)]
    max_index = -1
    for _ in range(100_000):
        words = [vocab[int(k)] for k in rng.integers(0, len(vocab), size=3)]
        vec = featurize(query(text=" ".join(words)))
        if len(vec):
            max_index = max(max_index, vec.indices[-1])
    assert 0 <= max_index < DIM


@settings(max_examples=150, deadline=None)
@given(st.text(max_size=60))
def test_featurize_pure_and_bounded(text):
    event = query(text=text)
    first = featurize(event)
    second = featurize(event)
    assert first == second
    assert all(0 <= i < DIM for i in first.indices)
    assert list(first.indices) == sorted(set(first.indices))
