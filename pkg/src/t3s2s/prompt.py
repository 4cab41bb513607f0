"""Prompt tokenization, keyword extraction, embeddings and prompt balance.

The text encoder is replaced by an :class:`EmbeddingProvider`: either a
deterministic synthetic table keyed by ``(word, seed)`` or a JSON file of
precomputed vectors.
"""
from __future__ import annotations

import hashlib
import json
import string
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    AmbiguousKeyword,
    ConfigError,
    DimensionMismatch,
    IOFailure,
    KeywordNotFound,
    MissingEmbedding,
    NonFiniteEmbedding,
    TooManyTokens,
    ZeroEnergyKeyword,
)

BOS = "<bos>"
EOS = "<eos>"
PAD = "<pad>"

BOS_NORM = 1.0
EOS_NORM = 1.5
WORD_NORM_RANGE = (0.7, 1.2)

_PUNCT = str.maketrans("", "", string.punctuation)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TokenSequence:
    """Word-level token slots: ``<bos>`` at 0, words, ``<eos>`` at ``i_end``, padding."""

    words: tuple[str, ...]
    i_end: int
    n: int

    def __post_init__(self):
        if not 1 <= self.i_end < self.n:
            raise ConfigError(f"i_end={self.i_end} outside [1, {self.n})")
        if len(self.words) != self.i_end - 1:
            raise ConfigError("word count does not match i_end")

    def token(self, i: int) -> str:
        if i == 0:
            return BOS
        if i < self.i_end:
            return self.words[i - 1]
        if i == self.i_end:
            return EOS
        if i < self.n:
            return PAD
        raise IndexError(i)

    def tokens(self) -> list[str]:
        return [self.token(i) for i in range(self.n)]


def normalize_word(word: str) -> str:
    return word.translate(_PUNCT).lower().strip()


def tokenize(text: str, n: int) -> TokenSequence:
    """Split ``text`` into lowercase words with punctuation removed.

    Raises :class:`TooManyTokens` when the words plus the two special tokens
    do not fit in ``n`` slots.
    """
    if n < 2:
        raise ConfigError(f"context length must be >= 2, got {n}")
    if not text.isprintable():
        raise ConfigError("prompt contains non-printable characters")
    words = tuple(w for w in text.translate(_PUNCT).lower().split() if w)
    if len(words) + 2 > n:
        raise TooManyTokens(f"{len(words)} words + 2 special tokens exceed n={n}")
    return TokenSequence(words=words, i_end=len(words) + 1, n=n)


@dataclass(frozen=True)
class KeywordIndices:
    """Sorted keyword token indices ``q`` with their instance ids."""

    q: tuple[int, ...]
    ids: tuple[int, ...]
    words: tuple[str, ...]
    warning: str | None = None

    def __post_init__(self):
        if len(self.q) != len(self.ids) or len(self.q) != len(self.words):
            raise ConfigError("q, ids and words must have equal length")
        if any(b <= a for a, b in zip(self.q, self.q[1:])):
            raise ConfigError("keyword indices must be strictly increasing")
        if len(set(self.ids)) != len(self.ids):
            raise ConfigError("an instance id may be bound to only one keyword")
        if any(i < 1 for i in self.ids):
            raise ConfigError("instance ids must be positive")

    @property
    def binding(self) -> dict[int, int]:
        return dict(zip(self.q, self.ids))

    def __len__(self) -> int:
        return len(self.q)

    def __iter__(self):
        return iter(self.q)


@lru_cache(maxsize=1)
def default_lexicon() -> frozenset[str]:
    text = resources.files("t3s2s").joinpath("data/lexicon.txt").read_text("utf-8")
    return frozenset(w.strip() for w in text.split() if w.strip())


def extract_keywords(
    tokens: TokenSequence,
    lexicon: Iterable[str] | None = None,
    overrides: Sequence[tuple[str, int]] | None = None,
) -> KeywordIndices:
    """Locate instance keywords.

    Overrides, when given, are authoritative: each override word must occur
    exactly once among the tokens. Otherwise every word found in ``lexicon``
    becomes a keyword and ids are assigned 1, 2, ... in token order.
    """
    if overrides:
        found: list[tuple[int, int, str]] = []
        for word, inst in overrides:
            w = normalize_word(word)
            hits = [i + 1 for i, tok in enumerate(tokens.words) if tok == w]
            if not hits:
                raise KeywordNotFound(f"keyword {word!r} not in prompt")
            if len(hits) > 1:
                raise AmbiguousKeyword(f"keyword {word!r} occurs {len(hits)} times")
            found.append((hits[0], int(inst), w))
        found.sort()
        if len({f[0] for f in found}) != len(found):
            raise AmbiguousKeyword("two overrides name the same token")
        return KeywordIndices(
            q=tuple(f[0] for f in found),
            ids=tuple(f[1] for f in found),
            words=tuple(f[2] for f in found),
        )

    lex = default_lexicon() if lexicon is None else frozenset(lexicon)
    q = tuple(i + 1 for i, w in enumerate(tokens.words) if w in lex)
    warning = None
    if not q:
        warning = "no keywords found; prompt balance and prominence are no-ops"
        warnings.warn(warning, stacklevel=2)
    return KeywordIndices(
        q=q,
        ids=tuple(range(1, len(q) + 1)),
        words=tuple(tokens.words[i - 1] for i in q),
        warning=warning,
    )


@lru_cache(maxsize=8192)
def _synthetic_vector(token: str, seed: int, d: int) -> np.ndarray:
    key = (seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little") + token.encode("utf-8")
    h = int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")
    rng = np.random.default_rng(h)
    v = rng.standard_normal(d)
    u = rng.random()
    if token == BOS:
        norm = BOS_NORM
    elif token == EOS:
        norm = EOS_NORM
    else:
        lo, hi = WORD_NORM_RANGE
        norm = lo + (hi - lo) * u
    v = v * (norm / np.linalg.norm(v))
    # nudge single components by one ulp until the computed norm is exact
    order = np.argsort(-np.abs(v), kind="stable")
    for step in range(4 * d):
        actual = np.linalg.norm(v)
        if actual == norm:
            break
        i = order[step % d]
        v[i] = np.nextafter(v[i], 0.0 if actual > norm else np.copysign(np.inf, v[i]))
    return _frozen(v)


@dataclass(frozen=True)
class EmbeddingProvider:
    """Source of token vectors standing in for a frozen text encoder."""

    mode: str = "synthetic"
    d: int = 64
    seed: int = 0
    path: str | None = None
    table: Mapping[str, np.ndarray] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.mode not in ("synthetic", "file"):
            raise ConfigError(f"unknown embedding mode {self.mode!r}")
        if self.d < 1:
            raise ConfigError("embedding dimension must be positive")

    @classmethod
    def synthetic(cls, seed: int = 0, d: int = 64) -> EmbeddingProvider:
        return cls(mode="synthetic", d=d, seed=seed)

    @classmethod
    def from_file(cls, path: str | Path, d: int | None = None) -> EmbeddingProvider:
        try:
            raw = json.loads(Path(path).read_text("utf-8"))
        except OSError as exc:
            raise IOFailure(f"cannot read embedding file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON at byte {exc.pos}: {exc.msg}") from exc
        if not isinstance(raw, dict) or not raw:
            raise ConfigError(f"{path}: expected a non-empty JSON object")
        table = {}
        for key, vec in raw.items():
            arr = np.asarray(vec, dtype=np.float64)
            if arr.ndim != 1:
                raise ConfigError(f"{path}: entry {key!r} is not a flat array")
            if not np.all(np.isfinite(arr)):
                raise NonFiniteEmbedding(f"{path}: entry {key!r} has non-finite values")
            table[key] = _frozen(arr)
        dims = {v.shape[0] for v in table.values()}
        if len(dims) != 1:
            raise DimensionMismatch(f"{path}: entries have mixed dimensions {sorted(dims)}")
        file_d = dims.pop()
        if d is not None and d != file_d:
            raise DimensionMismatch(f"{path}: file dimension {file_d} != provider dimension {d}")
        return cls(mode="file", d=file_d, path=str(path), table=table)

    def vector(self, token: str) -> np.ndarray:
        """In-context vector of a word or special token."""
        if self.mode == "synthetic":
            return _synthetic_vector(token, self.seed, self.d)
        try:
            return self.table[token]
        except KeyError:
            raise MissingEmbedding(f"no embedding for {token!r} in {self.path}") from None

    def single(self, word: str) -> np.ndarray:
        """Vector of ``word`` encoded on its own."""
        if self.mode == "file" and f"{word}@single" in self.table:
            return self.table[f"{word}@single"]
        return self.vector(word)


@dataclass(frozen=True)
class EmbeddingMatrix:
    """``n x d`` token embeddings tagged with the stage that produced them."""

    rows: np.ndarray
    tokens: TokenSequence
    stage: str = "global"

    def __post_init__(self):
        if self.stage not in ("global", "recombined", "balanced"):
            raise ConfigError(f"unknown stage {self.stage!r}")
        if self.rows.ndim != 2 or self.rows.shape[0] != self.tokens.n:
            raise DimensionMismatch(
                f"embedding rows {self.rows.shape} do not match n={self.tokens.n}"
            )
        if not np.all(np.isfinite(self.rows)):
            raise NonFiniteEmbedding("embedding matrix has non-finite entries")
        if self.rows.flags.writeable:
            rows = self.rows.copy()
            object.__setattr__(self, "rows", _frozen(rows))

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    @property
    def i_end(self) -> int:
        return self.tokens.i_end


def embed(tokens: TokenSequence, provider: EmbeddingProvider) -> EmbeddingMatrix:
    """Global embedding: one provider vector per slot, padding copies ``<eos>``."""
    rows = np.empty((tokens.n, provider.d), dtype=np.float64)
    for i in range(tokens.i_end + 1):
        v = provider.vector(tokens.token(i))
        if v.shape[0] != provider.d:
            raise DimensionMismatch(f"vector for {tokens.token(i)!r} has length {v.shape[0]}")
        rows[i] = v
    rows[tokens.i_end + 1:] = rows[tokens.i_end]
    return EmbeddingMatrix(_frozen(rows), tokens, "global")


def embed_word(word: str, provider: EmbeddingProvider) -> np.ndarray:
    if not word:
        raise ConfigError("cannot embed an empty word")
    v = provider.single(word)
    if v.shape[0] != provider.d:
        raise DimensionMismatch(f"single-word vector for {word!r} has length {v.shape[0]}")
    return v


def recombine(S_g: EmbeddingMatrix, q: KeywordIndices, provider: EmbeddingProvider) -> EmbeddingMatrix:
    """Replace keyword rows with their single-word encodings."""
    rows = S_g.rows.copy()
    for i in q.q:
        rows[i] = embed_word(S_g.tokens.token(i), provider)
    return EmbeddingMatrix(_frozen(rows), S_g.tokens, "recombined")


def prompt_balance(
    S_g: EmbeddingMatrix, q: KeywordIndices, provider: EmbeddingProvider
) -> EmbeddingMatrix:
    """Swap in single-word keyword vectors and lift them to the ``<eos>`` energy.

    Each keyword row becomes ``(E_end / E_i) * s_w`` where ``E_end`` is the
    norm of the end-of-text row and ``E_i`` the norm of the single-word
    vector ``s_w``. All other rows are copied unchanged.
    """
    if not len(q):
        return EmbeddingMatrix(S_g.rows, S_g.tokens, "balanced")
    S_r = recombine(S_g, q, provider)
    target = np.linalg.norm(S_r.rows[S_r.i_end])
    rows = S_r.rows.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for i in q.q:
            e_i = np.linalg.norm(rows[i])
            if e_i == 0.0:
                raise ZeroEnergyKeyword(f"keyword {S_g.tokens.token(i)!r} has zero energy")
            rows[i] = (target / e_i) * rows[i]
    if not np.all(np.isfinite(rows)):
        raise NonFiniteEmbedding("balanced embeddings are not finite")
    return EmbeddingMatrix(_frozen(rows), S_g.tokens, "balanced")


def energy_profile(S: EmbeddingMatrix | np.ndarray, i_end: int) -> list[tuple[int, float]]:
    rows = S.rows if isinstance(S, EmbeddingMatrix) else np.asarray(S, dtype=np.float64)
    if i_end >= rows.shape[0]:
        raise ConfigError(f"i_end={i_end} out of range for {rows.shape[0]} rows")
    return [(i, float(np.linalg.norm(rows[i]))) for i in range(i_end + 1)]


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroEnergyKeyword("cosine of a zero vector is undefined")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def cosine_profile(
    S: EmbeddingMatrix, q: KeywordIndices, provider: EmbeddingProvider
) -> list[tuple[int, float]]:
    """Cosine between each keyword row of ``S`` and its single-word vector."""
    return [(i, cosine(S.rows[i], embed_word(S.tokens.token(i), provider))) for i in q.q]
