"""Token vocabulary and masked-prediction training pairs.

Each trajectory becomes a family of training sentences: for every ordered
pair of steps i < j, the interleaved (category, poi) tokens of steps i..j-1
followed by a terminal [MASK] form the context, and step j's POI token is
the target. A trajectory with n visits therefore yields n(n-1)/2 pairs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

from .corpus import Poi, Trajectory, sort_poi_key
from .errors import DataError

PAD, MASK, CLS, SEP, UNK = range(5)
SPECIAL_TOKENS = ("[PAD]", "[MASK]", "[CLS]", "[SEP]", "[UNK]")

DEFAULT_MAX_SEQ_LEN = 64


class VocabError(DataError):
    """The POI table cannot produce a well-formed vocabulary."""


def _poi_surface(poi_id: str) -> str:
    return f"poi:{poi_id}"


def _cat_surface(category: str) -> str:
    return "cat:" + "_".join(category.split())


@dataclass(frozen=True)
class Vocab:
    """Bijective token <-> index mapping: specials, POI tokens, category tokens.

    Ordering is deterministic: the five specials at fixed indices (PAD=0),
    then POIs sorted by id, then categories sorted lexicographically.
    """

    tokens: tuple[str, ...]
    poi_ids: tuple[str, ...]
    categories: tuple[str, ...]
    poi_category: dict[str, str]
    _index: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self._index.update({tok: i for i, tok in enumerate(self.tokens)})

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def poi_token_range(self) -> range:
        return range(len(SPECIAL_TOKENS), len(SPECIAL_TOKENS) + len(self.poi_ids))

    def poi_token(self, poi_id: str) -> int:
        try:
            return self._index[_poi_surface(poi_id)]
        except KeyError:
            raise VocabError(f"unknown poi id {poi_id!r}") from None

    def category_token(self, category: str) -> int:
        try:
            return self._index[_cat_surface(category)]
        except KeyError:
            raise VocabError(f"unknown category {category!r}") from None

    def poi_id_of(self, token: int) -> str:
        if token not in self.poi_token_range:
            raise VocabError(f"token {token} is not a POI token")
        return self.poi_ids[token - len(SPECIAL_TOKENS)]

    def is_poi_token(self, token: int) -> bool:
        return token in self.poi_token_range

    def surface(self, token: int) -> str:
        return self.tokens[token]

    def fingerprint(self) -> str:
        payload = "\n".join(self.tokens) + "\n--\n" + "\n".join(
            f"{p}={self.poi_category[p]}" for p in self.poi_ids
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def build_vocab(pois: Sequence[Poi]) -> Vocab:
    """Deterministic vocabulary over a POI table."""
    if not pois:
        raise VocabError("POI table is empty")
    seen: set[str] = set()
    for poi in pois:
        if poi.poi_id in seen:
            raise VocabError(f"duplicate poi id {poi.poi_id!r}")
        seen.add(poi.poi_id)
        if not poi.category:
            raise VocabError(f"poi {poi.poi_id!r} has an empty category")
    poi_ids = tuple(sorted((p.poi_id for p in pois), key=sort_poi_key))
    categories = tuple(sorted({p.category for p in pois}))
    tokens = (
        SPECIAL_TOKENS
        + tuple(_poi_surface(pid) for pid in poi_ids)
        + tuple(_cat_surface(cat) for cat in categories)
    )
    if len(set(tokens)) != len(tokens):
        raise VocabError("token surfaces collide; check poi ids and categories")
    return Vocab(
        tokens=tokens,
        poi_ids=poi_ids,
        categories=categories,
        poi_category={p.poi_id: p.category for p in pois},
    )


@dataclass(frozen=True)
class TrainingPair:
    context: tuple[int, ...]
    mask_pos: int
    target: int


def step_tokens(vocab: Vocab, poi_id: str) -> tuple[int, int]:
    """(category token, poi token) for one trajectory step."""
    return vocab.category_token(vocab.poi_category[poi_id]), vocab.poi_token(poi_id)


def generate_pairs(
    traj: Trajectory,
    vocab: Vocab,
    max_seq_len: int = DEFAULT_MAX_SEQ_LEN,
) -> list[TrainingPair]:
    """All i<j masked pairs of one trajectory; empty when it has < 2 visits.

    Contexts longer than max_seq_len are truncated from the left in whole
    (category, poi) steps: the oldest steps carry the least transition signal.
    """
    n = len(traj.visits)
    pairs: list[TrainingPair] = []
    steps = [step_tokens(vocab, v.poi_id) for v in traj.visits]
    max_steps = (max_seq_len - 1) // 2
    for j in range(1, n):  # target index, 0-based
        target = vocab.poi_token(traj.visits[j].poi_id)
        for i in range(j):
            first = max(i, j - max_steps)
            context: list[int] = []
            for cat_tok, poi_tok in steps[first:j]:
                context.extend((cat_tok, poi_tok))
            context.append(MASK)
            pairs.append(TrainingPair(context=tuple(context), mask_pos=len(context) - 1, target=target))
    return pairs


def generate_corpus(
    trajectories: Iterable[Trajectory],
    vocab: Vocab,
    max_seq_len: int = DEFAULT_MAX_SEQ_LEN,
) -> list[TrainingPair]:
    """Concatenation of generate_pairs over all trajectories."""
    out: list[TrainingPair] = []
    for traj in trajectories:
        out.extend(generate_pairs(traj, vocab, max_seq_len))
    return out


def export_pairs(pairs: Iterable[TrainingPair], vocab: Vocab, out: IO[str]) -> None:
    """One line per pair: space-separated context surfaces, tab, target surface."""
    for pair in pairs:
        context = " ".join(vocab.surface(tok) for tok in pair.context)
        out.write(f"{context}\t{vocab.surface(pair.target)}\n")
