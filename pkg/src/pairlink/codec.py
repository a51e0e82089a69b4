"""Lossless mapping between annotations and flattened token-pair tag sequences.

The upper triangle of the n x n token-pair matrix is flattened row-major.
A link whose natural direction would land in the lower triangle (object
token before subject token) is folded onto the transposed upper-triangle
cell with the reversed tag 2.  The entity sequence only ever uses tag 1,
since an entity's head token never follows its tail token.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache

from .core import (
    HandshakingTagging,
    InvalidIndex,
    InvalidInput,
    PairLinkError,
    RelationSchema,
    SentenceAnnotation,
    TokenSpan,
    Triple,
    seq_length,
)

MODES = ("strict", "lenient")


def check_mode(mode: str) -> str:
    if mode not in MODES:
        raise InvalidInput(f"mode must be one of {MODES}, got {mode!r}")
    return mode


def seq_index(i: int, j: int, n: int) -> int:
    """Flat position of the pair (i, j), j >= i, in row-major order."""
    if not 0 <= i <= j < n:
        raise InvalidIndex(f"not an upper-triangle pair for n={n}: ({i}, {j})")
    return i * n - (i * (i - 1)) // 2 + (j - i)


def matrix_index(k: int, n: int) -> tuple[int, int]:
    """Inverse of :func:`seq_index`: the pair stored at flat position ``k``."""
    total = seq_length(n)
    if not 0 <= k < total:
        raise InvalidIndex(f"flat index {k} out of range [0, {total}) for n={n}")
    # row i is the largest one whose first flat position i*n - i*(i-1)/2 is <= k;
    # solve the quadratic, then correct any isqrt rounding
    i = (2 * n + 1 - math.isqrt((2 * n + 1) ** 2 - 8 * k)) // 2
    while i * n - (i * (i - 1)) // 2 > k:
        i -= 1
    while (i + 1) * n - ((i + 1) * i) // 2 <= k:
        i += 1
    j = i + (k - (i * n - (i * (i - 1)) // 2))
    return i, j


class IndexMap:
    """Precomputed bijection between upper-triangle pairs and flat indices."""

    __slots__ = ("n", "length", "pairs", "row_start")

    def __init__(self, n: int) -> None:
        self.n = n
        self.length = seq_length(n)
        self.pairs: tuple[tuple[int, int], ...] = tuple(
            (i, j) for i in range(n) for j in range(i, n)
        )
        self.row_start: tuple[int, ...] = tuple(
            i * n - (i * (i - 1)) // 2 for i in range(n)
        )

    def index(self, i: int, j: int) -> int:
        if not 0 <= i <= j < self.n:
            raise InvalidIndex(f"not an upper-triangle pair for n={self.n}: ({i}, {j})")
        return self.row_start[i] + (j - i)

    def pair(self, k: int) -> tuple[int, int]:
        if not 0 <= k < self.length:
            raise InvalidIndex(f"flat index {k} out of range [0, {self.length})")
        return self.pairs[k]


@lru_cache(maxsize=512)
def index_map(n: int) -> IndexMap:
    return IndexMap(n)


@dataclass(frozen=True)
class EncodeConflict:
    """Two triples demanded different nonzero tags for the same cell."""

    kind: str  # "sh2oh" or "st2ot"
    relation: int
    pair: tuple[int, int]  # upper-triangle cell (row, column)
    existing_tag: int
    incoming_tag: int


class EncodeConflictError(PairLinkError):
    """Strict-mode encode refused an annotation with tag conflicts."""

    def __init__(self, conflicts: list[EncodeConflict]) -> None:
        self.conflicts = list(conflicts)
        first = self.conflicts[0]
        super().__init__(
            f"{len(self.conflicts)} tag conflict(s); first: {first.kind} cell "
            f"{first.pair} of relation {first.relation} wants both tag "
            f"{first.existing_tag} and tag {first.incoming_tag}"
        )


def _oriented(a: int, b: int) -> tuple[int, int, int]:
    """Upper-triangle cell and tag for a link from token a to token b."""
    if a <= b:
        return a, b, 1
    return b, a, 2


def _collect(
    ann: SentenceAnnotation, schema: RelationSchema
) -> tuple[set[TokenSpan], dict[str, dict[tuple[int, int, int], int]], list[EncodeConflict]]:
    n_rel = len(schema)
    entity_spans: set[TokenSpan] = set()
    cells: dict[str, dict[tuple[int, int, int], int]] = {"sh2oh": {}, "st2ot": {}}
    conflicts: list[EncodeConflict] = []
    for t in ann.triples:
        if t.relation >= n_rel:
            raise InvalidInput(
                f"triple uses relation id {t.relation}, schema has only {n_rel}"
            )
        entity_spans.add(t.subject)
        entity_spans.add(t.object)
        for kind, a, b in (
            ("sh2oh", t.subject.head, t.object.head),
            ("st2ot", t.subject.tail, t.object.tail),
        ):
            i, j, tag = _oriented(a, b)
            bucket = cells[kind]
            key = (t.relation, i, j)
            old = bucket.get(key)
            if old is None:
                bucket[key] = tag
            elif old != tag:
                conflicts.append(EncodeConflict(kind, t.relation, (i, j), old, tag))
                bucket[key] = 1  # forward links win the tie-break
    return entity_spans, cells, conflicts


def encode_with_conflicts(
    ann: SentenceAnnotation, schema: RelationSchema
) -> tuple[HandshakingTagging, list[EncodeConflict]]:
    """Lenient encode: apply the 1-beats-2 tie-break and report every conflict."""
    entity_spans, cells, conflicts = _collect(ann, schema)
    n = ann.n
    imap = index_map(n)
    length = imap.length
    row_start = imap.row_start

    eh = [0] * length
    for span in entity_spans:
        eh[row_start[span.head] + (span.tail - span.head)] = 1
    sh = [[0] * length for _ in range(len(schema))]
    st = [[0] * length for _ in range(len(schema))]
    for (rid, i, j), tag in cells["sh2oh"].items():
        sh[rid][row_start[i] + (j - i)] = tag
    for (rid, i, j), tag in cells["st2ot"].items():
        st[rid][row_start[i] + (j - i)] = tag
    tagging = HandshakingTagging(
        n, tuple(eh), tuple(map(tuple, sh)), tuple(map(tuple, st))
    )
    return tagging, conflicts


def encode(
    ann: SentenceAnnotation, schema: RelationSchema, mode: str = "strict"
) -> HandshakingTagging:
    """Tag sequences for an annotated sentence.

    Strict mode raises :class:`EncodeConflictError` when two triples demand
    different nonzero tags at the same cell; lenient mode keeps the forward
    tag (use :func:`encode_with_conflicts` to also get the conflict list).
    """
    check_mode(mode)
    tagging, conflicts = encode_with_conflicts(ann, schema)
    if conflicts and mode == "strict":
        raise EncodeConflictError(conflicts)
    return tagging


def detect_conflicts(
    ann: SentenceAnnotation, schema: RelationSchema
) -> list[EncodeConflict]:
    """Cell-level tag conflicts this annotation would produce; [] iff strict encode succeeds."""
    return _collect(ann, schema)[2]


def self_relating_triples(ann: SentenceAnnotation) -> tuple[Triple, ...]:
    """Triples whose subject and object are the same span (legal but unusual)."""
    return tuple(t for t in ann.triples if t.subject == t.object)


def phantom_triples(ann: SentenceAnnotation, schema: RelationSchema) -> frozenset[Triple]:
    """Extra triples that any faithful decoder must also emit for this annotation.

    Per relation, the tag sequences only record the set of (subject head,
    object head) pairs, the set of (subject tail, object tail) pairs, and the
    pool of entity spans.  When a head link and a tail pair coming from
    different gold triples recombine into another valid entity pair, the
    resulting triple is indistinguishable from a gold one.  A nonempty result
    means the annotation is not losslessly encodable even though it may be
    free of cell-level conflicts.

    Brute force over entity-span pairs, independent of the flattening and of
    the decoder.
    """
    heads_by_rel: dict[int, set[tuple[int, int]]] = {}
    tails_by_rel: dict[int, set[tuple[int, int]]] = {}
    spans: set[TokenSpan] = set()
    for t in ann.triples:
        if t.relation >= len(schema):
            raise InvalidInput(
                f"triple uses relation id {t.relation}, schema has only {len(schema)}"
            )
        spans.add(t.subject)
        spans.add(t.object)
        heads_by_rel.setdefault(t.relation, set()).add((t.subject.head, t.object.head))
        tails_by_rel.setdefault(t.relation, set()).add((t.subject.tail, t.object.tail))
    gold = set(ann.triples)
    phantoms: set[Triple] = set()
    for rid, heads in heads_by_rel.items():
        tails = tails_by_rel[rid]
        for s in spans:
            for o in spans:
                if (s.head, o.head) in heads and (s.tail, o.tail) in tails:
                    t = Triple(s, rid, o)
                    if t not in gold:
                        phantoms.add(t)
    return frozenset(phantoms)


# --- serialized form: one JSON object per line ------------------------------

_FIELDS = ("n", "relations", "eh2et", "sh2oh", "st2ot")


def tagging_to_obj(tagging: HandshakingTagging, schema: RelationSchema) -> dict:
    if tagging.n_relations != len(schema):
        raise InvalidInput(
            f"tagging has {tagging.n_relations} relations, schema has {len(schema)}"
        )
    return {
        "n": tagging.n,
        "relations": list(schema.relations),
        "eh2et": list(tagging.eh2et),
        "sh2oh": [list(s) for s in tagging.sh2oh],
        "st2ot": [list(s) for s in tagging.st2ot],
    }


def obj_to_tagging(obj: dict, mode: str = "strict") -> tuple[HandshakingTagging, RelationSchema]:
    check_mode(mode)
    if not isinstance(obj, dict):
        raise InvalidInput(f"expected a JSON object, got {type(obj).__name__}")
    missing = [f for f in _FIELDS if f not in obj]
    if missing:
        raise InvalidInput(f"tagging object is missing fields: {missing}")
    schema = RelationSchema(tuple(obj["relations"]))
    n = obj["n"]
    if not isinstance(n, int):
        raise InvalidInput(f"field 'n' must be an int, got {type(n).__name__}")
    eh = tuple(obj["eh2et"])
    sh = tuple(tuple(s) for s in obj["sh2oh"])
    st = tuple(tuple(s) for s in obj["st2ot"])
    if len(sh) != len(schema) or len(st) != len(schema):
        raise InvalidInput(
            f"expected {len(schema)} head and tail sequences, got {len(sh)} and {len(st)}"
        )
    tagging = HandshakingTagging(n, eh, sh, st)
    if mode == "strict":
        for label, seqs in (("eh2et", (eh,)), ("sh2oh", sh), ("st2ot", st)):
            for seq in seqs:
                for k, tag in enumerate(seq):
                    if tag not in (0, 1, 2):
                        raise InvalidInput(
                            f"corrupt tagging: {label} holds tag {tag!r} at flat index {k}"
                        )
        for k, tag in enumerate(eh):
            if tag == 2:
                raise InvalidInput(
                    f"corrupt tagging: reversed tag in eh2et at flat index {k}"
                )
    return tagging, schema


def dump_tagging_line(tagging: HandshakingTagging, schema: RelationSchema) -> str:
    """Canonical single-line JSON form; byte-stable for identical inputs."""
    return json.dumps(tagging_to_obj(tagging, schema), separators=(",", ":"))


def parse_tagging_line(line: str, mode: str = "strict") -> tuple[HandshakingTagging, RelationSchema]:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"not valid JSON: {exc}") from None
    return obj_to_tagging(obj, mode=mode)
