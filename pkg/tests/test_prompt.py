import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from t3s2s.errors import (
    AmbiguousKeyword,
    DimensionMismatch,
    KeywordNotFound,
    MissingEmbedding,
    TooManyTokens,
    ZeroEnergyKeyword,
)
from t3s2s.prompt import (
    EmbeddingMatrix,
    EmbeddingProvider,
    KeywordIndices,
    TokenSequence,
    cosine,
    cosine_profile,
    embed,
    embed_word,
    energy_profile,
    extract_keywords,
    prompt_balance,
    tokenize,
)

from conftest import SCENE_PROMPT

SCENE_WORDS = [
    "isometric", "view", "of", "game", "scene", "a", "plain", "walk", "path",
    "a", "river", "a", "high", "mountain", "houses",
]


def test_tokenize_simple():
    t = tokenize("a river", 8)
    assert t.words == ("a", "river")
    assert t.i_end == 3
    assert t.tokens() == ["<bos>", "a", "river", "<eos>", "<pad>", "<pad>", "<pad>", "<pad>"]


def test_tokenize_scene_prompt_counts():
    t = tokenize(SCENE_PROMPT, 77)
    assert list(t.words) == SCENE_WORDS  # hand-counted
    assert len(t.words) == 15
    assert t.i_end == 16


def test_tokenize_empty():
    t = tokenize("", 4)
    assert t.words == ()
    assert t.i_end == 1


def test_tokenize_too_many():
    with pytest.raises(TooManyTokens):
        tokenize("one two three", 4)


def test_extract_keywords_overrides_scene():
    t = tokenize(SCENE_PROMPT, 77)
    q = extract_keywords(t, overrides=[("plain", 1), ("path", 2), ("river", 3), ("mountain", 4), ("houses", 5)])
    assert q.q == (7, 9, 11, 14, 15)
    assert q.ids == (1, 2, 3, 4, 5)
    # cross-check by indexing the token list
    assert [t.token(i) for i in q.q] == ["plain", "path", "river", "mountain", "houses"]


def test_extract_keywords_lexicon():
    q = extract_keywords(tokenize("a river", 8), lexicon={"river"})
    assert q.q == (2,)
    assert q.binding == {2: 1}


def test_extract_keywords_empty_warns():
    with pytest.warns(UserWarning):
        q = extract_keywords(tokenize("nothing here", 8), lexicon={"river"})
    assert q.q == () and q.warning


def test_extract_keywords_errors():
    t = tokenize("a river and a river bank", 16)
    with pytest.raises(AmbiguousKeyword):
        extract_keywords(t, overrides=[("river", 1)])
    with pytest.raises(KeywordNotFound):
        extract_keywords(t, overrides=[("lake", 1)])


def test_default_lexicon_size():
    from t3s2s.prompt import default_lexicon
    assert 180 <= len(default_lexicon()) <= 260


def test_synthetic_provider_norms():
    p = EmbeddingProvider.synthetic(seed=3, d=64)
    assert np.linalg.norm(p.vector("<eos>")) == pytest.approx(1.5, rel=1e-15)
    assert np.linalg.norm(p.vector("<bos>")) == pytest.approx(1.0, rel=1e-15)
    for w in SCENE_WORDS:
        assert 0.7 - 1e-12 <= np.linalg.norm(p.vector(w)) <= 1.2 + 1e-12


def test_embed_rows():
    p = EmbeddingProvider.synthetic(seed=0, d=8)
    t = tokenize("a river a", 10)
    S = embed(t, p)
    assert S.stage == "global"
    assert np.array_equal(S.rows[1], S.rows[3])
    assert np.linalg.norm(S.rows[t.i_end]) == pytest.approx(1.5, rel=1e-15)
    # padding copies <eos>
    assert all(np.array_equal(S.rows[i], S.rows[t.i_end]) for i in range(t.i_end + 1, t.n))


def test_embed_word_synthetic_matches_context():
    p = EmbeddingProvider.synthetic(seed=0, d=8)
    S = embed(tokenize("a river", 8), p)
    assert np.array_equal(embed_word("river", p), S.rows[2])
    assert np.array_equal(embed_word("river", p), embed_word("river", p))


@pytest.fixture
def emb_file(tmp_path):
    table = {
        "<bos>": [1, 0, 0, 0], "<eos>": [0, 0, 0, 10], "a": [0, 1, 0, 0],
        "river": [3, 4, 0, 0], "river@single": [0, 0, 3, 4],
    }
    path = tmp_path / "emb.json"
    path.write_text(json.dumps(table))
    return path


def test_file_provider(emb_file):
    p = EmbeddingProvider.from_file(emb_file)
    assert p.d == 4
    assert list(embed_word("river", p)) == [0, 0, 3, 4]
    S = embed(tokenize("a river", 6), p)
    assert list(S.rows[2]) == [3, 4, 0, 0]
    with pytest.raises(DimensionMismatch):
        EmbeddingProvider.from_file(emb_file, d=8)
    with pytest.raises(MissingEmbedding):
        embed(tokenize("a lake", 6), p)


def test_prompt_balance_forced_arithmetic(emb_file, tmp_path):
    table = json.loads(emb_file.read_text())
    del table["river@single"]
    path = tmp_path / "e2.json"
    path.write_text(json.dumps(table))
    p = EmbeddingProvider.from_file(path)
    t = tokenize("a river", 6)
    S_g = embed(t, p)
    q = extract_keywords(t, overrides=[("river", 1)])
    S_b = prompt_balance(S_g, q, p)
    # |(3,4)| = 5, |<eos>| = 10 -> factor 2
    assert list(S_b.rows[2]) == [6, 8, 0, 0]
    assert S_b.stage == "balanced"


def test_prompt_balance_identity_scale(tmp_path):
    table = {"<bos>": [1, 0], "<eos>": [0, 5], "river": [3, 4]}
    path = tmp_path / "e.json"
    path.write_text(json.dumps(table))
    p = EmbeddingProvider.from_file(path)
    t = tokenize("river", 4)
    S_b = prompt_balance(embed(t, p), extract_keywords(t, overrides=[("river", 1)]), p)
    assert list(S_b.rows[1]) == [3, 4]


def test_prompt_balance_empty_q_is_identity():
    p = EmbeddingProvider.synthetic(0, 8)
    t = tokenize("a b c", 8)
    S_g = embed(t, p)
    S_b = prompt_balance(S_g, KeywordIndices((), (), ()), p)
    assert np.array_equal(S_b.rows, S_g.rows)


def test_prompt_balance_zero_energy(tmp_path):
    path = tmp_path / "e.json"
    path.write_text(json.dumps({"<bos>": [1, 0], "<eos>": [0, 5], "river": [0, 0]}))
    p = EmbeddingProvider.from_file(path)
    t = tokenize("river", 4)
    with pytest.raises(ZeroEnergyKeyword):
        prompt_balance(embed(t, p), extract_keywords(t, overrides=[("river", 1)]), p)


def test_energy_profile():
    t = TokenSequence(("x",), 2, 4)
    rows = np.array([[0.0, 0.0], [3.0, 4.0], [1.5, 0.0], [1.5, 0.0]])
    S = EmbeddingMatrix(rows, t)
    assert energy_profile(S, 2) == [(0, 0.0), (1, 5.0), (2, 1.5)]


def test_cosine_basic():
    assert cosine(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == pytest.approx(1.0)
    assert cosine(np.array([1.0, 0.0]), np.array([0.0, 2.0])) == 0.0


def test_cosine_profile_on_balanced_is_one():
    p = EmbeddingProvider.synthetic(5, 64)
    t = tokenize(SCENE_PROMPT, 77)
    q = extract_keywords(t, overrides=[("plain", 1), ("houses", 2)])
    S_b = prompt_balance(embed(t, p), q, p)
    for _, c in cosine_profile(S_b, q, p):
        assert c == pytest.approx(1.0, abs=1e-9)


words_st = st.lists(st.sampled_from(["a", "river", "lake", "tree", "of", "big", "houses", "path", "the"]),
                    min_size=1, max_size=12)


@settings(max_examples=60, deadline=None)
@given(words=words_st, seed=st.integers(0, 2**63 - 1), d=st.sampled_from([8, 64]))
def test_balance_invariants(words, seed, d):
    p = EmbeddingProvider.synthetic(seed, d)
    t = tokenize(" ".join(words), 20)
    q = extract_keywords(t, lexicon={"river", "lake", "tree", "houses", "path"}) if any(
        w in {"river", "lake", "tree", "houses", "path"} for w in words) else KeywordIndices((), (), ())
    S_g = embed(t, p)
    S_b = prompt_balance(S_g, q, p)
    target = np.linalg.norm(S_b.rows[t.i_end])
    for i in range(t.n):
        if i in q.q:
            assert abs(np.linalg.norm(S_b.rows[i]) - target) <= 1e-9 * target
        else:
            assert S_b.rows[i].tobytes() == S_g.rows[i].tobytes()
    again = prompt_balance(S_b, q, p)
    np.testing.assert_allclose(again.rows, S_b.rows, rtol=1e-9, atol=0)
    assert prompt_balance(S_g, q, p).rows.tobytes() == S_b.rows.tobytes()
