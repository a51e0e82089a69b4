"""Shared domain types for token-pair link tagging.

Conventions used across the package:

* token indices are 0-based and spans are inclusive on both ends,
* relation ids are dense integers assigned by schema order,
* a sentence of n tokens yields one flattened tag sequence per tagger,
  covering the upper-triangle token pairs (i, j), j >= i, in row-major
  order.

Everything here is immutable after construction and safe to share between
concurrent readers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum


class PairLinkError(Exception):
    """Base class for every error raised by this package."""


class InvalidInput(PairLinkError, ValueError):
    """An argument violates a documented precondition."""


class InvalidIndex(PairLinkError, IndexError):
    """A token pair or flat sequence index lies outside its valid range."""


def seq_length(n: int) -> int:
    """Number of token pairs (i, j) with 0 <= i <= j < n, i.e. (n^2 + n) / 2."""
    if n < 1:
        raise InvalidInput(f"sentence length must be >= 1, got {n}")
    return (n * n + n) // 2


class LinkTag(IntEnum):
    """Value of one cell in a flattened tag sequence."""

    NONE = 0
    # link read left to right: row token first, column token second
    FORWARD = 1
    # link whose natural direction points into the lower triangle, folded
    # onto the transposed upper-triangle cell
    REVERSED = 2


@dataclass(frozen=True, order=True)
class TokenSpan:
    """Inclusive token span: ``head`` is the first token, ``tail`` the last."""

    head: int
    tail: int

    def __post_init__(self) -> None:
        if not 0 <= self.head <= self.tail:
            raise InvalidInput(f"bad span: head={self.head}, tail={self.tail}")

    def __len__(self) -> int:
        return self.tail - self.head + 1


@dataclass(frozen=True, order=True)
class Triple:
    """(subject span, relation id, object span). Equality is structural."""

    subject: TokenSpan
    relation: int
    object: TokenSpan

    def __post_init__(self) -> None:
        if self.relation < 0:
            raise InvalidInput(f"relation id must be >= 0, got {self.relation}")


@dataclass(frozen=True)
class RelationSchema:
    """Ordered registry of relation names; a relation's id is its position."""

    relations: tuple[str, ...]
    _ids: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        relations = tuple(self.relations)
        object.__setattr__(self, "relations", relations)
        if not relations:
            raise InvalidInput("a schema needs at least one relation")
        ids: dict[str, int] = {}
        for rid, name in enumerate(relations):
            if not name:
                raise InvalidInput("relation names must be non-empty")
            if name in ids:
                raise InvalidInput(f"duplicate relation name: {name!r}")
            ids[name] = rid
        object.__setattr__(self, "_ids", ids)

    def __len__(self) -> int:
        return len(self.relations)

    def __contains__(self, name: str) -> bool:
        return name in self._ids

    def id_of(self, name: str) -> int:
        try:
            return self._ids[name]
        except KeyError:
            raise InvalidInput(f"unknown relation: {name!r}") from None

    def name_of(self, rid: int) -> str:
        if not 0 <= rid < len(self.relations):
            raise InvalidIndex(f"relation id out of range: {rid}")
        return self.relations[rid]


@dataclass(frozen=True)
class SentenceAnnotation:
    """A tokenized sentence plus its gold relation triples.

    ``triples`` keeps input order but never holds structural duplicates
    (set semantics with a stable order, so downstream tie-breaks are
    deterministic).  ``char_spans`` optionally maps each token to its
    (start, end) character offsets in ``text``, end exclusive.
    """

    tokens: tuple[str, ...]
    text: str = ""
    triples: tuple[Triple, ...] = ()
    char_spans: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self) -> None:
        tokens = tuple(self.tokens)
        object.__setattr__(self, "tokens", tokens)
        if not tokens:
            raise InvalidInput("a sentence needs at least one token")
        n = len(tokens)
        seen: set[Triple] = set()
        unique: list[Triple] = []
        for t in self.triples:
            for span in (t.subject, t.object):
                if span.tail >= n:
                    raise InvalidInput(
                        f"span ({span.head}, {span.tail}) exceeds sentence length {n}"
                    )
            if t not in seen:
                seen.add(t)
                unique.append(t)
        object.__setattr__(self, "triples", tuple(unique))
        if self.char_spans is not None:
            spans = tuple((int(a), int(b)) for a, b in self.char_spans)
            if len(spans) != n:
                raise InvalidInput(
                    f"char_spans must align 1:1 with tokens ({len(spans)} vs {n})"
                )
            object.__setattr__(self, "char_spans", spans)

    @property
    def n(self) -> int:
        return len(self.tokens)

    def triple_set(self) -> frozenset[Triple]:
        return frozenset(self.triples)


@dataclass(frozen=True)
class HandshakingTagging:
    """The 2N+1 flattened tag sequences for one sentence of length ``n``.

    ``eh2et`` aligns entity start tokens with entity end tokens and is shared
    by all relations; ``sh2oh`` and ``st2ot`` carry one sequence per relation,
    linking the start tokens (respectively the end tokens) of subject-object
    pairs.  Every sequence has length ``seq_length(n)`` and cell values are
    ``LinkTag`` ints.
    """

    n: int
    eh2et: tuple[int, ...]
    sh2oh: tuple[tuple[int, ...], ...]
    st2ot: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        length = seq_length(self.n)

        def as_tuple(seq):
            # preserve tuple subclasses handed in by callers
            return seq if isinstance(seq, tuple) else tuple(seq)

        eh2et = as_tuple(self.eh2et)
        sh2oh = tuple(as_tuple(s) for s in self.sh2oh)
        st2ot = tuple(as_tuple(s) for s in self.st2ot)
        if len(sh2oh) != len(st2ot):
            raise InvalidInput(
                "need one head sequence and one tail sequence per relation, "
                f"got {len(sh2oh)} vs {len(st2ot)}"
            )
        def check(label: str, seq: tuple[int, ...]) -> None:
            if len(seq) != length:
                raise InvalidInput(
                    f"{label} has length {len(seq)}, expected {length} for n={self.n}"
                )
            for tag in seq:
                if tag not in (0, 1, 2):
                    raise InvalidInput(f"{label} holds tag {tag!r}, expected 0, 1 or 2")

        check("eh2et", eh2et)
        for label, group in (("sh2oh", sh2oh), ("st2ot", st2ot)):
            for rid, seq in enumerate(group):
                check(f"{label}[{rid}]", seq)
        object.__setattr__(self, "eh2et", eh2et)
        object.__setattr__(self, "sh2oh", sh2oh)
        object.__setattr__(self, "st2ot", st2ot)

    @property
    def n_relations(self) -> int:
        return len(self.sh2oh)

    def sequences(self) -> tuple[tuple[int, ...], ...]:
        """All 2N+1 sequences: entity sequence first, then heads, then tails."""
        return (self.eh2et, *self.sh2oh, *self.st2ot)
