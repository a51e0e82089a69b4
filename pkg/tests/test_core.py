"""Tests for core value types and the pair-sequence length law."""

from __future__ import annotations

import pytest

from pairlink import (
    HandshakingTagging,
    InvalidInput,
    LinkTag,
    PairLinkError,
    RelationSchema,
    SentenceAnnotation,
    TokenSpan,
    Triple,
    seq_length,
)

from conftest import annotation, triple


class TestSeqLength:
    def test_matches_enumeration_up_to_64(self):
        for n in range(1, 65):
            pairs = sum(1 for i in range(n) for j in range(i, n))
            assert seq_length(n) == pairs

    def test_pinned_value_n_100(self):
        assert seq_length(100) == 5050

    @pytest.mark.parametrize("bad", [0, -1, -100])
    def test_rejects_nonpositive(self, bad):
        with pytest.raises(InvalidInput):
            seq_length(bad)


class TestTokenSpan:
    def test_orders_and_length(self):
        s = TokenSpan(2, 5)
        assert len(s) == 4
        assert TokenSpan(0, 1) < s

    def test_single_token_span(self):
        assert len(TokenSpan(3, 3)) == 1

    @pytest.mark.parametrize("head,tail", [(-1, 0), (3, 2), (0, -1)])
    def test_rejects_bad_bounds(self, head, tail):
        with pytest.raises(InvalidInput):
            TokenSpan(head, tail)

    def test_hashable_and_frozen(self):
        s = TokenSpan(1, 2)
        assert s in {TokenSpan(1, 2)}
        with pytest.raises(AttributeError):
            s.head = 0


class TestTriple:
    def test_equality_and_hash(self):
        assert triple(0, 1, 0, 2, 3) == triple(0, 1, 0, 2, 3)
        assert len({triple(0, 1, 0, 2, 3), triple(0, 1, 0, 2, 3)}) == 1

    def test_rejects_negative_relation(self):
        with pytest.raises(InvalidInput):
            Triple(TokenSpan(0, 0), -1, TokenSpan(1, 1))


class TestRelationSchema:
    def test_lookup_round_trip(self):
        schema = RelationSchema(("a", "b", "c"))
        assert len(schema) == 3
        for rid, name in enumerate(("a", "b", "c")):
            assert schema.id_of(name) == rid
            assert schema.name_of(rid) == name
        assert "b" in schema
        assert "z" not in schema

    def test_rejects_duplicates_and_empty(self):
        with pytest.raises(InvalidInput):
            RelationSchema(("a", "a"))
        with pytest.raises(InvalidInput):
            RelationSchema(("a", ""))
        with pytest.raises(InvalidInput):
            RelationSchema(())

    def test_unknown_lookups_raise(self):
        schema = RelationSchema(("a",))
        with pytest.raises(PairLinkError):
            schema.id_of("missing")
        with pytest.raises(PairLinkError):
            schema.name_of(5)


class TestSentenceAnnotation:
    def test_basic_properties(self):
        ann = annotation(4, [triple(0, 0, 0, 2, 3)])
        assert ann.n == 4
        assert ann.triple_set() == frozenset({triple(0, 0, 0, 2, 3)})

    def test_dedups_triples_preserving_order(self):
        t1 = triple(0, 0, 0, 1, 1)
        t2 = triple(1, 1, 0, 2, 2)
        ann = annotation(3, [t1, t2, t1])
        assert ann.triples == (t1, t2)

    def test_rejects_span_out_of_range(self):
        with pytest.raises(InvalidInput):
            annotation(3, [triple(0, 0, 0, 2, 3)])

    def test_rejects_empty_tokens(self):
        with pytest.raises(InvalidInput):
            SentenceAnnotation(tokens=(), triples=())

    def test_char_spans_must_align_with_tokens(self):
        with pytest.raises(InvalidInput):
            SentenceAnnotation(
                tokens=("a", "b"),
                triples=(),
                char_spans=((0, 1),),
            )


class TestHandshakingTagging:
    def test_shape_validation(self):
        with pytest.raises(InvalidInput):
            HandshakingTagging(n=3, eh2et=(0,) * 5, sh2oh=(), st2ot=())

    def test_relation_sequences_must_pair_up(self):
        flat = (0,) * seq_length(3)
        with pytest.raises(InvalidInput):
            HandshakingTagging(n=3, eh2et=flat, sh2oh=(flat,), st2ot=())

    def test_sequences_order_is_entity_subject_tail(self):
        flat = (0,) * seq_length(2)
        sh = ((1, 0, 0), (0, 1, 0))
        st = ((0, 0, 1), (1, 1, 0))
        tagging = HandshakingTagging(n=2, eh2et=flat, sh2oh=sh, st2ot=st)
        assert tagging.n_relations == 2
        assert tagging.sequences() == (flat, *sh, *st)

    def test_rejects_out_of_range_tags(self):
        with pytest.raises(InvalidInput):
            HandshakingTagging(n=2, eh2et=(0, 3, 0), sh2oh=(), st2ot=())

    def test_link_tag_values(self):
        assert LinkTag.NONE == 0
        assert LinkTag.FORWARD == 1
        assert LinkTag.REVERSED == 2
