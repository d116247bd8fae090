import json

import numpy as np
import pytest

from docnmt.bpe import train_bpe
from docnmt.corpus import Candidate, ContrastiveInstance, make_contrastive_set, make_synthetic_corpus
from docnmt.metrics import (
    BleuStats,
    InstanceResult,
    aggregate_contrastive,
    bleu,
    bleu_score_from_stats,
    bleu_stats,
    distance_bucket,
    doc_bleu,
    evaluate_contrastive,
    format_report_table,
    majority_class_rate,
    score_contrastive_instance,
    tokenize_13a,
)
from docnmt.model import Model, ModelConfig


# --- tokenizer ----------------------------------------------------------------

def test_tokenize_separates_punctuation():
    assert tokenize_13a("Hello, world!") == ["Hello", ",", "world", "!"]
    assert tokenize_13a("end.") == ["end", "."]
    assert tokenize_13a('"quoted"') == ['"', "quoted", '"']


def test_tokenize_keeps_decimal_numbers_together():
    assert tokenize_13a("it costs 4.5 now") == ["it", "costs", "4.5", "now"]
    assert tokenize_13a("version 2.3.1 shipped") == ["version", "2.3.1", "shipped"]


def test_tokenize_hyphens():
    assert tokenize_13a("x-ray") == ["x-ray"]
    assert tokenize_13a("4-5") == ["4", "-", "5"]


def test_tokenize_unescapes_entities():
    assert tokenize_13a("&quot;a&quot; &amp; b") == ['"', "a", '"', "&", "b"]


def test_tokenize_collapses_whitespace():
    assert tokenize_13a("  a   b  ") == ["a", "b"]
    assert tokenize_13a("") == []


# --- BLEU hand-derived cases ---------------------------------------------------

def test_perfect_match_scores_100():
    assert bleu(["the cat sat on the mat ."], ["the cat sat on the mat ."]) == pytest.approx(100.0)


def test_empty_candidate_scores_0():
    assert bleu([""], ["the cat sat"]) == 0.0


def test_short_candidate_scores_0_without_effective_order():
    # two tokens only: no 3-grams exist, and that order zeroes the product
    assert bleu(["the cat"], ["the cat"]) == 0.0


def test_clipped_unigrams_hand_case():
    # cand "the the the the" vs ref "the cat sat": unigram matches clipped
    # to 1 of 4; higher orders all unmatched, smoothing halves each time:
    # p = (1/4, 1/6, 1/8, 1/8), BP = 1 since 4 > 3
    got = bleu(["the the the the"], ["the cat sat"])
    expected = 100.0 * ((1 / 4) * (1 / 6) * (1 / 8) * (1 / 8)) ** 0.25
    assert got == pytest.approx(expected, abs=1e-9)
    assert got == pytest.approx(15.9735, abs=1e-3)


def test_zero_bigram_smoothing_hand_case():
    # cand "b a d c" vs ref "a b c d": all unigrams match, no higher order
    # does: p = (1, 1/6, 1/8, 1/8), BP = 1
    got = bleu(["b a d c"], ["a b c d"])
    expected = 100.0 * (1.0 * (1 / 6) * (1 / 8) * (1 / 8)) ** 0.25
    assert got == pytest.approx(expected, abs=1e-9)
    assert got == pytest.approx(22.5894, abs=1e-3)


def test_brevity_penalty_hand_case():
    # cand is a 4-token prefix of a 7-token ref: precisions all 1,
    # BP = exp(1 - 7/4)
    got = bleu(["the cat sat on"], ["the cat sat on a soft mat"])
    expected = 100.0 * np.exp(1.0 - 7.0 / 4.0)
    assert got == pytest.approx(expected, abs=1e-9)
    assert got == pytest.approx(47.2367, abs=1e-3)


def test_longer_candidate_has_no_brevity_penalty():
    got = bleu(["the cat sat on a soft mat"], ["the cat sat on"])
    # matches: 4/7 unigrams, 3/6 bigrams, 2/5 trigrams, 1/4 four-grams
    expected = 100.0 * ((4 / 7) * (3 / 6) * (2 / 5) * (1 / 4)) ** 0.25
    assert got == pytest.approx(expected, abs=1e-9)


def test_stats_are_additive_exactly():
    pairs = [("the cat sat on", "the cat sat on the mat"),
             ("a b c d e", "a b x d e"),
             ("hello world again now", "hello world now again")]
    separate = [bleu_stats(c, r) for c, r in pairs]
    combined = separate[0] + separate[1] + separate[2]
    assert combined.matches == [sum(s.matches[i] for s in separate) for i in range(4)]
    assert combined.totals == [sum(s.totals[i] for s in separate) for i in range(4)]
    assert combined.cand_len == sum(s.cand_len for s in separate)
    assert combined.ref_len == sum(s.ref_len for s in separate)
    assert bleu([c for c, _ in pairs], [r for _, r in pairs]) == \
        pytest.approx(bleu_score_from_stats(combined), abs=1e-12)
    assert sum(separate, BleuStats()).matches == combined.matches


def test_doc_bleu_equals_sentence_bleu_for_single_sentence_docs():
    cands = ["the cat sat on", "a b c d", "hello world again now"]
    refs = ["the cat sat on the mat", "a b x d", "hello world now again"]
    s = bleu(cands, refs)
    d = doc_bleu([[c] for c in cands], [[r] for r in refs])
    assert d == s


def test_doc_bleu_crosses_sentence_boundaries():
    # identical sentences, different order inside the document: sentence
    # BLEU is perfect either way, document BLEU sees boundary n-grams
    doc_c = [["a b c d", "e f g h"]]
    doc_r_same = [["a b c d", "e f g h"]]
    doc_r_swapped = [["e f g h", "a b c d"]]
    assert doc_bleu(doc_c, doc_r_same) == pytest.approx(100.0)
    assert doc_bleu(doc_c, doc_r_swapped) < 100.0


def test_bleu_input_validation():
    with pytest.raises(ValueError, match="candidates"):
        bleu(["a"], ["a", "b"])
    with pytest.raises(ValueError, match="empty"):
        bleu([], [])
    with pytest.raises(ValueError, match="document 0"):
        doc_bleu([["a", "b"]], [["a"]])


def test_score_range_and_insensitivity_to_unrelated_text():
    score = bleu(["completely unrelated words here"], ["the quick brown fox jumps"])
    assert 0.0 <= score < 10.0


# --- contrastive scoring --------------------------------------------------------

def synth_fixture():
    docs, _ = make_synthetic_corpus(40, 10, seed=17)
    instances = make_contrastive_set(docs, k=2)
    lines = [s for d in docs for pair in d.sentences for s in pair]
    bpe = train_bpe(lines, vocab_size=200)
    return docs, instances, bpe


def test_untrained_model_scores_near_chance():
    _, instances, bpe = synth_fixture()
    cfg = ModelConfig(vocab_size=bpe.size, n_layers=1, n_heads=2, d_model=16,
                      d_ff=32, max_len=24, dropout=0.0)
    model = Model.init(cfg, seed=4)
    results = evaluate_contrastive(model, bpe, instances[:180], k=2)
    acc = sum(r.correct for r in results) / len(results)
    assert 1 / 3 - 0.15 < acc < 1 / 3 + 0.15


def test_tied_scores_count_as_incorrect():
    _, instances, bpe = synth_fixture()
    cfg = ModelConfig(vocab_size=bpe.size, n_layers=1, n_heads=2, d_model=16,
                      d_ff=32, max_len=24, dropout=0.0)
    model = Model.init(cfg, seed=4)
    for p in model.params.values():
        p.data[:] = 0.0
    # uniform logits: every candidate of equal token length ties exactly
    r = score_contrastive_instance(model, bpe, instances[0], k=2)
    assert r.chosen is None
    assert not r.correct


def test_scoring_is_deterministic():
    _, instances, bpe = synth_fixture()
    cfg = ModelConfig(vocab_size=bpe.size, n_layers=1, n_heads=2, d_model=16,
                      d_ff=32, max_len=24, dropout=0.0)
    model = Model.init(cfg, seed=9)
    a = score_contrastive_instance(model, bpe, instances[3], k=2)
    b = score_contrastive_instance(model, bpe, instances[3], k=2)
    assert a == b


def test_self_context_mode_uses_source_as_context():
    _, instances, bpe = synth_fixture()
    cfg = ModelConfig(vocab_size=bpe.size, n_layers=1, n_heads=2, d_model=16,
                      d_ff=32, max_len=24, dropout=0.0)
    model = Model.init(cfg, seed=9)
    inst = instances[0]
    self_scored = score_contrastive_instance(model, bpe, inst, k=2, context_mode="self")
    solo = ContrastiveInstance(
        context=(inst.source,),
        source=inst.source,
        candidates=inst.candidates,
        antecedent_location=inst.antecedent_location,
        antecedent_distance=inst.antecedent_distance,
    )
    prev_scored = score_contrastive_instance(model, bpe, solo, k=2, context_mode="prev")
    assert self_scored.scores == prev_scored.scores
    with pytest.raises(ValueError, match="context mode"):
        score_contrastive_instance(model, bpe, inst, k=2, context_mode="global")


# --- aggregation -----------------------------------------------------------------

def fake_result(correct, pronoun="er", location="external", distance=1):
    return InstanceResult(correct, 0 if correct else 1, (0.0, -1.0, -2.0),
                          pronoun, location, distance)


def test_perfect_oracle_aggregates_to_one():
    results = [fake_result(True, p, loc, d)
               for p in ("er", "es", "sie")
               for loc in ("external", "intrasegmental")
               for d in (0, 1, 2, 3, 5)]
    report = aggregate_contrastive(results)
    assert report.total.accuracy == 1.0
    assert all(c.accuracy == 1.0 for c in report.by_pronoun.values())
    assert all(c.accuracy == 1.0 for c in report.by_distance.values())


def test_adversarial_scorer_aggregates_to_zero():
    results = [fake_result(False) for _ in range(10)]
    assert aggregate_contrastive(results).total.accuracy == 0.0


def test_partition_counts_sum_to_total():
    rng = np.random.default_rng(5)
    results = [fake_result(bool(rng.integers(0, 2)),
                           pronoun=("er", "es", "sie")[rng.integers(0, 3)],
                           location=("external", "intrasegmental")[rng.integers(0, 2)],
                           distance=int(rng.integers(0, 7)))
               for _ in range(200)]
    report = aggregate_contrastive(results)
    for cells in (report.by_pronoun, report.by_location, report.by_distance):
        assert sum(c.count for c in cells.values()) == report.total.count
        assert sum(c.correct for c in cells.values()) == report.total.correct


def test_distance_buckets():
    assert [distance_bucket(d) for d in (0, 1, 2, 3, 4, 9)] == \
        ["0", "1", "2", "3", ">3", ">3"]


def test_majority_class_rate():
    results = [fake_result(True, p) for p in ("er", "er", "er", "es", "sie")]
    assert majority_class_rate(results) == pytest.approx(0.6)


def test_report_serializes_and_formats():
    results = [fake_result(True, "er", "external", 1),
               fake_result(False, "es", "intrasegmental", 0),
               fake_result(True, "sie", "external", 5)]
    report = aggregate_contrastive(results)
    d = report.to_dict(meta={"context_mode": "prev", "k": 2})
    parsed = json.loads(json.dumps(d))
    assert parsed["total"]["count"] == 3
    assert parsed["meta"]["k"] == 2
    assert set(parsed["by_distance"]) == {"0", "1", ">3"}
    table = format_report_table(report)
    assert "total" in table and "distance" in table and ">3" in table
    header, *rows = table.splitlines()
    assert header.split()[:2] == ["category", "bucket"]
    assert len(rows) == 1 + 3 + 2 + 3
