"""Tests for pair indexing, tagging encode, conflicts, and serialization."""

from __future__ import annotations

import json
import random

import pytest

from pairlink import (
    EncodeConflictError,
    InvalidIndex,
    InvalidInput,
    RelationSchema,
    TokenSpan,
    Triple,
    decode,
    detect_conflicts,
    dump_tagging_line,
    encode,
    encode_with_conflicts,
    index_map,
    matrix_index,
    parse_tagging_line,
    phantom_triples,
    seq_index,
    seq_length,
)
from pairlink.codec import self_relating_triples, tagging_to_obj
from pairlink.synth import random_annotation

from conftest import annotation, triple


class TestPairIndexing:
    @pytest.mark.parametrize(
        "i,j,n,k",
        [(0, 0, 3, 0), (1, 2, 3, 4), (2, 2, 3, 5), (0, 4, 5, 4), (99, 99, 100, 5049)],
    )
    def test_seq_index_pinned(self, i, j, n, k):
        assert seq_index(i, j, n) == k

    @pytest.mark.parametrize("k,n,pair", [(4, 3, (1, 2)), (0, 1, (0, 0)), (5049, 100, (99, 99))])
    def test_matrix_index_pinned(self, k, n, pair):
        assert matrix_index(k, n) == pair

    def test_round_trip_all_cells(self):
        for n in (1, 2, 3, 7, 12, 40):
            k = 0
            for i in range(n):
                for j in range(i, n):
                    assert seq_index(i, j, n) == k
                    assert matrix_index(k, n) == (i, j)
                    k += 1
            assert k == seq_length(n)

    def test_matrix_index_against_scan(self):
        # independent oracle: walk the flattened sequence cell by cell
        for n in (5, 11):
            flat = [(i, j) for i in range(n) for j in range(i, n)]
            for k, pair in enumerate(flat):
                assert matrix_index(k, n) == pair

    def test_rejects_out_of_range(self):
        with pytest.raises(InvalidIndex):
            seq_index(1, 0, 3)  # lower triangle
        with pytest.raises(InvalidIndex):
            seq_index(0, 3, 3)
        with pytest.raises(InvalidIndex):
            matrix_index(6, 3)
        with pytest.raises(InvalidIndex):
            matrix_index(-1, 3)

    def test_index_map_matches_functions_and_caches(self):
        m = index_map(9)
        assert m is index_map(9)
        assert m.length == seq_length(9)
        for k in range(m.length):
            i, j = m.pair(k)
            assert matrix_index(k, 9) == (i, j)
            assert m.index(i, j) == seq_index(i, j, 9) == k


class TestEncode:
    def test_figure_annotation_produces_pinned_cells(self, figure_fixture):
        schema, tokens, expected_tagging, expected_triples = figure_fixture
        ann = annotation(len(tokens), sorted(expected_triples), tokens=tokens)
        tagging = encode(ann, schema)
        assert tagging == expected_tagging
        n = len(tokens)
        # spot-check the hand-derived cells
        assert tagging.eh2et[seq_index(0, 1, n)] == 1
        assert tagging.eh2et[seq_index(0, 2, n)] == 1
        assert tagging.eh2et[seq_index(3, 4, n)] == 1
        assert tagging.sh2oh[0][seq_index(0, 3, n)] == 1
        assert tagging.st2ot[0][seq_index(1, 4, n)] == 1
        assert tagging.sh2oh[1][seq_index(0, 3, n)] == 2
        assert tagging.st2ot[1][seq_index(1, 4, n)] == 2
        assert tagging.st2ot[1][seq_index(2, 4, n)] == 2

    def test_single_triple_minimal_cells(self, schema2):
        ann = annotation(5, [triple(0, 1, 1, 3, 4)])
        tagging = encode(ann, schema2)
        assert sum(tagging.eh2et) == 2  # two entity spans
        assert sum(tagging.sh2oh[0]) == 0 and sum(tagging.st2ot[0]) == 0
        assert sum(tagging.sh2oh[1]) == 1 and sum(tagging.st2ot[1]) == 1

    def test_rejects_relation_id_outside_schema(self, schema2):
        ann = annotation(3, [triple(0, 0, 5, 1, 1)])
        with pytest.raises(InvalidInput):
            encode(ann, schema2)

    def test_opposite_links_conflict(self, schema2):
        # A->B and B->A under the same relation demand tag 1 and tag 2
        # in the same head cell and the same tail cell.
        ann = annotation(4, [triple(0, 1, 0, 2, 3), triple(2, 3, 0, 0, 1)])
        conflicts = detect_conflicts(ann, schema2)
        assert {(c.kind, c.relation, c.pair) for c in conflicts} == {
            ("sh2oh", 0, (0, 2)),
            ("st2ot", 0, (1, 3)),
        }
        with pytest.raises(EncodeConflictError) as exc_info:
            encode(ann, schema2, mode="strict")
        assert len(exc_info.value.conflicts) == 2

    def test_lenient_conflict_keeps_forward_tag(self, schema2):
        ann = annotation(4, [triple(2, 3, 0, 0, 1), triple(0, 1, 0, 2, 3)])
        tagging, conflicts = encode_with_conflicts(ann, schema2)
        assert len(conflicts) == 2
        # regardless of triple order, the forward tag wins the cell
        assert tagging.sh2oh[0][seq_index(0, 2, 4)] == 1
        assert tagging.st2ot[0][seq_index(1, 3, 4)] == 1
        assert encode(ann, schema2, mode="lenient") == tagging

    def test_same_relation_opposite_links_in_distinct_cells_coexist(self, schema2):
        # reversal is only a conflict when it lands in the same cell
        ann = annotation(6, [triple(0, 0, 0, 2, 2), triple(4, 4, 0, 1, 1)])
        assert detect_conflicts(ann, schema2) == []
        tagging = encode(ann, schema2)
        assert tagging.sh2oh[0][seq_index(0, 2, 6)] == 1
        assert tagging.sh2oh[0][seq_index(1, 4, 6)] == 2

    def test_self_relating_triple_round_trips(self, schema2):
        t = triple(1, 2, 0, 1, 2)
        ann = annotation(4, [t])
        assert self_relating_triples(ann) == (t,)
        tagging = encode(ann, schema2)
        # diagonal-ish cells: head link (1,1), tail link (2,2)
        assert tagging.sh2oh[0][seq_index(1, 1, 4)] == 1
        assert decode(tagging, schema2) == frozenset({t})

    def test_mode_is_validated(self, schema2):
        ann = annotation(2, [])
        with pytest.raises(InvalidInput):
            encode(ann, schema2, mode="forgiving")


class TestRoundTrip:
    def test_seeded_annotations_round_trip(self, schema2):
        rng = random.Random(1234)
        for _ in range(300):
            ann = random_annotation(rng, schema2, n_max=12, max_triples=6)
            tagging = encode(ann, schema2)
            assert decode(tagging, schema2) == ann.triple_set()

    def test_phantom_counterexample_is_closed_not_lost(self):
        # Head links and tail pairs recombine across triples of one relation:
        # the gold set below is cell-conflict-free yet not losslessly
        # encodable, and the decoder must surface the recombined triple.
        schema = RelationSchema(("r",))
        gold = (
            triple(0, 1, 0, 5, 6),
            triple(0, 2, 0, 5, 7),
            triple(1, 1, 0, 6, 7),
        )
        phantom = triple(0, 1, 0, 5, 7)
        ann = annotation(8, gold)
        assert detect_conflicts(ann, schema) == []
        assert phantom_triples(ann, schema) == frozenset({phantom})
        decoded = decode(encode(ann, schema), schema)
        assert decoded == ann.triple_set() | {phantom}

    def test_generator_output_is_phantom_free(self, schema2):
        rng = random.Random(99)
        for _ in range(200):
            ann = random_annotation(rng, schema2, n_max=10, max_triples=5)
            assert phantom_triples(ann, schema2) == frozenset()


class TestSerialization:
    def test_line_round_trip_is_byte_stable(self, figure_fixture):
        schema, _, tagging, _ = figure_fixture
        line = dump_tagging_line(tagging, schema)
        parsed_tagging, parsed_schema = parse_tagging_line(line)
        assert parsed_tagging == tagging
        assert parsed_schema == schema
        assert dump_tagging_line(parsed_tagging, parsed_schema) == line
        assert "\n" not in line

    def test_obj_shape(self, schema2):
        tagging = encode(annotation(3, [triple(0, 0, 0, 1, 2)]), schema2)
        obj = tagging_to_obj(tagging, schema2)
        assert sorted(obj) == ["eh2et", "n", "relations", "sh2oh", "st2ot"]
        assert obj["n"] == 3
        assert obj["relations"] == ["works_for", "lives_in"]
        assert len(obj["sh2oh"]) == len(obj["st2ot"]) == 2

    def test_schema_size_must_match(self, figure_fixture, schema2):
        _, _, tagging, _ = figure_fixture
        with pytest.raises(InvalidInput):
            tagging_to_obj(tagging, schema2)

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda o: o.pop("eh2et"),
            lambda o: o.__setitem__("n", "3"),
            lambda o: o.__setitem__("sh2oh", o["sh2oh"][:-1]),
            lambda o: o["st2ot"][0].__setitem__(0, 7),
            lambda o: o["eh2et"].__setitem__(0, 2),  # reversed tag in entity sequence
        ],
    )
    def test_strict_parse_rejects_corrupt_lines(self, figure_fixture, mutate):
        schema, _, tagging, _ = figure_fixture
        obj = tagging_to_obj(tagging, schema)
        mutate(obj)
        with pytest.raises(InvalidInput):
            parse_tagging_line(json.dumps(obj), mode="strict")

    def test_lenient_parse_accepts_reversed_entity_tag(self, figure_fixture):
        schema, _, tagging, _ = figure_fixture
        obj = tagging_to_obj(tagging, schema)
        obj["eh2et"][0] = 2
        parsed, _ = parse_tagging_line(json.dumps(obj), mode="lenient")
        assert parsed.eh2et[0] == 2

    def test_parse_rejects_non_json(self):
        with pytest.raises(InvalidInput):
            parse_tagging_line("not json at all")
