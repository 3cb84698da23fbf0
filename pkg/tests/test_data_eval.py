import itertools
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vner.data import PAD, UNK, CorpusError, Sentence, Vocabulary, bio_inventory, build_vocab, decode_joint, \
    encode_joint, is_valid_bio, load_embeddings, read_corpus, read_embedding_file, repair_bio, write_corpus, \
    write_tagged
from vner.evaluation import EntitySpan, extract_spans, render_bio, score

from oracles import conlleval_counts

NESTED_EXAMPLE = [
    ("Ca", "O", "O"), ("mổ", "O", "O"), ("do", "O", "O"), ("bác", "O", "O"), ("sĩ", "O", "O"),
    ("T.N.Q.P", "O", "B-PER"), ("thực", "O", "O"), ("hiện", "O", "O"), (".", "O", "O"),
]


def write(tmp_path, text, name="c.txt"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


class TestReadCorpus:
    def test_two_token_sentence(self, tmp_path):
        corpus = read_corpus(write(tmp_path, "John B-PER\nSmith I-PER\n\n"))
        assert len(corpus) == 1
        assert extract_spans(corpus[0].tags) == {EntitySpan(0, 1, "PER")}

    def test_orphan_inside_repaired_with_warning(self, tmp_path, caplog):
        with caplog.at_level(logging.WARNING):
            corpus = read_corpus(write(tmp_path, "Hà_Nội\tI-LOC\nđẹp\tO\n"))
        assert corpus[0].tags == ["B-LOC", "O"]
        assert "repaired" in caplog.text

    def test_repair_off_rejects(self, tmp_path):
        with pytest.raises(CorpusError):
            read_corpus(write(tmp_path, "a\tO\nb\tI-LOC\n"), repair=False)

    def test_nested_example_two_columns(self, tmp_path):
        text = "".join(f"{w}\t{a}\t{b}\n" for w, a, b in NESTED_EXAMPLE)
        (sent,) = read_corpus(write(tmp_path, text), "token,tag,tag2")
        assert len(sent) == 9
        assert sent.tags2[5] == "B-PER"
        assert all(t == "O" for i, t in enumerate(sent.tags2) if i != 5)
        assert all(t == "O" for t in sent.tags)
        assert encode_joint(sent.tags, sent.tags2)[5] == "O+B-PER"

    def test_column_count_error_names_line(self, tmp_path):
        with pytest.raises(CorpusError) as err:
            read_corpus(write(tmp_path, "a\tO\n\nb\tO\tX\n"))
        assert err.value.line == 3 and ":3:" in str(err.value)

    def test_bad_tag(self, tmp_path):
        with pytest.raises(CorpusError):
            read_corpus(write(tmp_path, "a\tPER\n"))

    def test_features_and_ignored_columns(self, tmp_path):
        (s,) = read_corpus(write(tmp_path, "a\tN\tB-NP\tx\tO\nb\tV\tB-VP\ty\tB-LOC\n"),
                           "token,pos,chunk,_,tag")
        assert s.pos == ["N", "V"] and s.chunk == ["B-NP", "B-VP"] and s.tags == ["O", "B-LOC"]

    def test_blank_line_runs_and_trailing_block(self, tmp_path):
        corpus = read_corpus(write(tmp_path, "\n\na\tO\n\n\n\nb\tO\nc\tO"))
        assert [s.tokens for s in corpus] == [["a"], ["b", "c"]]

    def test_missing_file(self, tmp_path):
        with pytest.raises(CorpusError):
            read_corpus(tmp_path / "nope.txt")

    def test_write_then_read(self, tmp_path):
        corpus = [Sentence(["a", "b"], ["B-PER", "I-PER"], ["O", "B-LOC"])]
        roles = write_corpus(tmp_path / "w.txt", corpus)
        assert roles == "token,tag,tag2"
        back = read_corpus(tmp_path / "w.txt", roles)
        assert back[0].tags == corpus[0].tags and back[0].tags2 == corpus[0].tags2

    def test_write_tagged_appends_columns(self, tmp_path):
        corpus = read_corpus(write(tmp_path, "a\tO\nb\tB-PER\n"))
        write_tagged(tmp_path / "out.txt", corpus, [[["O", "B-LOC"]]])
        assert (tmp_path / "out.txt").read_text() == "a\tO\tO\nb\tB-PER\tB-LOC\n\n"


class TestBio:
    def test_repair_rules(self):
        assert repair_bio(["I-PER", "I-PER", "O", "I-LOC"]) == (["B-PER", "I-PER", "O", "B-LOC"], [0, 3])
        assert repair_bio(["B-PER", "I-ORG"]) == (["B-PER", "B-ORG"], [1])

    def test_validity(self):
        assert is_valid_bio(["B-PER", "I-PER", "O", "B-LOC"])
        assert not is_valid_bio(["O", "I-PER"])


class TestJointTags:
    def test_examples(self):
        assert encode_joint(["O"], ["B-PER"]) == ["O+B-PER"]
        assert encode_joint(["O"], ["O"]) == ["O+O"]

    def test_round_trip_over_inventory(self):
        inv = bio_inventory(["LOC", "ORG", "PER", "MISC"])
        pairs = list(itertools.product(inv, inv))
        l1, l2 = [a for a, _ in pairs], [b for _, b in pairs]
        joint = encode_joint(l1, l2)
        assert all(t.count("+") == 1 for t in joint)
        assert decode_joint(joint, inv) == (l1, l2)

    def test_decode_errors(self):
        with pytest.raises(ValueError):
            decode_joint(["O"])
        with pytest.raises(ValueError):
            decode_joint(["O+B-XYZ"], bio_inventory(["PER"]))
        with pytest.raises(ValueError):
            encode_joint(["O"], ["O", "O"])


class TestSpans:
    def test_cases(self):
        assert extract_spans(["O", "O", "O"]) == set()
        assert extract_spans(["B-LOC", "I-LOC", "O", "B-PER"]) == {EntitySpan(0, 1, "LOC"), EntitySpan(3, 3, "PER")}
        assert extract_spans(["B-PER", "B-PER"]) == {EntitySpan(0, 0, "PER"), EntitySpan(1, 1, "PER")}

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 2), st.integers(1, 3), st.sampled_from(["PER", "LOC", "ORG"])),
                    max_size=5))
    def test_render_then_extract_is_identity(self, pieces):
        spans, pos = set(), 0
        for gap, width, kind in pieces:
            pos += gap
            spans.add(EntitySpan(pos, pos + width - 1, kind))
            pos += width
        assert extract_spans(render_bio(spans, pos + 1)) == spans


class TestScore:
    def test_identical(self):
        r = score([["B-PER", "I-PER", "O"]], [["B-PER", "I-PER", "O"]])
        assert (r.precision, r.recall, r.f1) == (1.0, 1.0, 1.0)

    def test_boundary_miss_scores_zero(self):
        gold = [["O", "O", "O", "B-PER", "I-PER"]]
        pred = [["O", "O", "O", "B-PER", "O"]]
        r = score(gold, pred)
        assert (r.precision, r.recall, r.f1) == (0.0, 0.0, 0.0)

    def test_three_of_five(self):
        gold = [["B-PER", "O", "B-LOC", "O", "B-ORG", "O", "B-PER", "O", "O"]]
        pred = [["B-PER", "O", "B-LOC", "O", "B-ORG", "O", "B-LOC", "O", "B-MISC"]]
        r = score(gold, pred)
        assert (r.micro.correct, r.micro.predicted, r.micro.gold) == (3, 5, 4)
        assert f"{100 * r.precision:.2f}" == "60.00"
        assert f"{100 * r.recall:.2f}" == "75.00"
        assert f"{100 * r.f1:.2f}" == "66.67"

    def test_nested_levels_pooled(self):
        gold = [[["B-ORG", "I-ORG"], ["O", "B-LOC"]]]
        pred = [[["B-ORG", "I-ORG"], ["B-LOC", "O"]]]
        r = score(gold, pred, nested=True)
        assert (r.micro.correct, r.micro.predicted, r.micro.gold) == (1, 2, 2)
        # same span on a different level does not count
        r = score([[["B-LOC"], ["O"]]], [[["O"], ["B-LOC"]]], nested=True)
        assert r.micro.correct == 0

    def test_per_type_and_format(self):
        r = score([["B-PER", "B-LOC"]], [["B-PER", "O"]])
        assert r.per_type["PER"].f1 == 1.0 and r.per_type["LOC"].recall == 0.0
        lines = r.format().splitlines()
        assert lines[0].split() == ["type", "precision", "recall", "F1", "support"]
        assert lines[-1].split()[0] == "micro" and len(lines) == 4

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            score([["O"]], [["O", "O"]])

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.lists(st.sampled_from(["O", "B-PER", "I-PER", "B-LOC", "I-LOC"]), min_size=1, max_size=8),
                    min_size=1, max_size=4), st.randoms(use_true_random=False))
    def test_properties_against_direct_count(self, gold, rnd):
        pred = [[rnd.choice(["O", "B-PER", "I-PER", "B-LOC"]) for _ in s] for s in gold]
        r = score(gold, pred)
        assert (r.micro.correct, r.micro.predicted, r.micro.gold) == conlleval_counts(gold, pred)
        assert 0.0 <= r.f1 <= 1.0
        assert r.micro.correct <= min(r.micro.gold, r.micro.predicted)
        if r.micro.gold:
            assert score(gold, gold).f1 == 1.0
            assert score(gold, [["O"] * len(s) for s in gold]).recall == 0.0


class TestVocabulary:
    def test_reserved_first_and_unk_fallback(self):
        v = build_vocab([["b", "a", "b"], ["c"]])
        assert v.itos[:2] == [PAD, UNK] and v.itos[2] == "b"
        assert v.index("zzz") == v.unk_id

    def test_cap_counts_reserved(self):
        v = build_vocab([["a", "a", "b", "c", "c", "c"]], max_size=4)
        assert v.itos == [PAD, UNK, "c", "a"]

    def test_dict_round_trip(self):
        v = build_vocab([["x", "y"]])
        assert Vocabulary.from_dict(v.to_dict()) == v


class TestEmbeddings:
    def test_row_from_file(self, tmp_path):
        vocab = Vocabulary(["a"])
        table = load_embeddings(write(tmp_path, "a 1.0 2.0\n"), vocab)
        np.testing.assert_array_equal(table.weight.data[vocab.index("a")], [1.0, 2.0])
        np.testing.assert_array_equal(table.weight.data[0], 0.0)

    def test_missing_word_seeded(self, tmp_path):
        vocab = Vocabulary(["a", "b"])
        p = write(tmp_path, "a 1.0 2.0\n")
        r1 = load_embeddings(p, vocab, seed=5).weight.data
        r2 = load_embeddings(p, vocab, seed=5).weight.data
        r3 = load_embeddings(p, vocab, seed=6).weight.data
        i = vocab.index("b")
        assert r1[i].tobytes() == r2[i].tobytes()
        assert not np.array_equal(r1[i], r3[i])
        assert np.all(np.abs(r1[i]) <= 0.25)

    def test_dimension_error_line(self, tmp_path):
        with pytest.raises(CorpusError) as err:
            read_embedding_file(write(tmp_path, "a 1.0 2.0\nb 1.0 2.0 3.0\n"))
        assert err.value.line == 2

    def test_duplicate_first_wins(self, tmp_path, caplog):
        with caplog.at_level(logging.WARNING):
            vecs, dim = read_embedding_file(write(tmp_path, "a 1 2\na 3 4\n"))
        assert dim == 2 and vecs["a"].tolist() == [1.0, 2.0]
        assert "duplicate" in caplog.text

    def test_header_line_skipped(self, tmp_path):
        vecs, dim = read_embedding_file(write(tmp_path, "2 3\na 1 2 3\nb 4 5 6\n"))
        assert dim == 3 and set(vecs) == {"a", "b"}

    def test_empty_file(self, tmp_path):
        with pytest.raises(CorpusError):
            read_embedding_file(write(tmp_path, ""))

    def test_frozen_flag(self, tmp_path):
        table = load_embeddings(write(tmp_path, "a 1 2\n"), Vocabulary(["a"]), trainable=False)
        assert not table.trainable and not table.weight.requires_grad


def test_vocabulary_custom_unknown_symbol():
    v = build_vocab([["a", "b"]], reserved=("<u>", "</s>"), unk="<u>")
    assert v.index("zzz") == 0
    assert Vocabulary.from_dict(v.to_dict()).index("zzz") == 0
    with pytest.raises(KeyError):
        Vocabulary(["a"], reserved=(), unk=None).index("b")
