"""Closed-vocabulary prompt handling.

The model's text side is a learned embedding table over a small fixed word
list. Prompts are lowercase whitespace-tokenized; the placeholder token
``[v]`` marks where a learned concept vector is spliced in at forward time
(the table row for ``[v]`` itself is never used).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

V_TOKEN = "[v]"


class UnknownWordError(ValueError):
    pass


@dataclass(frozen=True)
class Vocabulary:
    words: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.words)) != len(self.words):
            raise ValueError("vocabulary has duplicate words")
        if V_TOKEN not in self.words:
            raise ValueError(f"vocabulary must contain the {V_TOKEN} placeholder")
        object.__setattr__(self, "_index", {w: i for i, w in enumerate(self.words)})

    def __len__(self) -> int:
        return len(self.words)

    @property
    def v_id(self) -> int:
        return self._index[V_TOKEN]

    def id_of(self, word: str) -> int:
        try:
            return self._index[word]
        except KeyError:
            raise UnknownWordError(f"word {word!r} not in vocabulary") from None

    @classmethod
    def build(cls, captions: Iterable[str], extra_words: Iterable[str] = ()) -> "Vocabulary":
        words: set[str] = set()
        for caption in captions:
            words.update(caption.lower().split())
        words.update(w.lower() for w in extra_words)
        words.discard(V_TOKEN)
        return cls(words=tuple(sorted(words)) + (V_TOKEN,))


@dataclass(frozen=True)
class PromptTokens:
    """Token ids plus the position(s) of the concept placeholder."""

    ids: tuple[int, ...]
    v_positions: tuple[int, ...]
    template: str

    @property
    def v_position(self) -> int | None:
        if not self.v_positions:
            return None
        if len(self.v_positions) > 1:
            raise ValueError("prompt has multiple concept placeholders")
        return self.v_positions[0]

    def __len__(self) -> int:
        return len(self.ids)


def tokenize(vocab: Vocabulary, template: str) -> PromptTokens:
    """Tokenize a prompt; at most one [v] placeholder is allowed."""
    tokens = _tokenize(vocab, template)
    if len(tokens.v_positions) > 1:
        raise ValueError("prompt may contain at most one [v] placeholder")
    return tokens


def tokenize_multi(vocab: Vocabulary, template: str) -> PromptTokens:
    """Tokenize a multi-concept prompt; [v] may appear several times."""
    return _tokenize(vocab, template)


def _tokenize(vocab: Vocabulary, template: str) -> PromptTokens:
    words = template.lower().split()
    if not words:
        raise ValueError("empty prompt")
    ids = tuple(vocab.id_of(w) if w != V_TOKEN else vocab.v_id for w in words)
    v_positions = tuple(i for i, w in enumerate(words) if w == V_TOKEN)
    return PromptTokens(ids=ids, v_positions=v_positions, template=template)


def multi_concept_prompt(n: int) -> str:
    """Prompt used for plug-and-play composition: tokens joined by "and"."""
    return "a photo of " + " and ".join([V_TOKEN] * n)
