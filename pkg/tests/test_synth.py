import pytest

from lexrationale import synth
from lexrationale.rationale import ScoredSnippet
from lexrationale.tokenize import Snippet, tokenize

CFG = synth.GenConfig(n_resp=8, n_nonresp=12, doc_length=(100, 160), background_vocab=400, topic_vocab=40, seed=3)


def test_generation_is_deterministic():
    a, ta = synth.generate(CFG)
    b, tb = synth.generate(CFG)
    assert a == b and ta == tb
    c, _ = synth.generate(synth.GenConfig(**{**CFG.__dict__, "seed": 4}))
    assert c != a


def test_counts_ids_and_order():
    corpus, truth = synth.generate(CFG)
    assert corpus.counts == (8, 12)
    assert corpus.ids[0] == "doc-00" and corpus.ids[-1] == "doc-19"
    assert all(d.responsive for d in corpus.documents[:8])
    assert set(truth.spans) == {d.id for d in corpus.responsive()}


def test_plants_hold_topic_words_and_background_does_not():
    corpus, truth = synth.generate(CFG)
    vocab = synth.build_vocabularies(CFG)
    topic = set(vocab.topic)
    assert topic.isdisjoint(vocab.background)
    for doc in corpus:
        tokens = tokenize(doc.text).tokens
        lo, hi = CFG.doc_length
        assert lo <= len(tokens) <= hi
        planted = set()
        for start, length in truth.spans.get(doc.id, ()):
            assert 0 <= start and start + length <= len(tokens)
            planted.update(range(start, start + length))
        for i, tok in enumerate(tokens):
            assert (tok in topic) == (i in planted)


def test_vocabulary_shared_across_corpus_seeds():
    a = synth.build_vocabularies(CFG)
    b = synth.build_vocabularies(synth.GenConfig(**{**CFG.__dict__, "seed": 99}))
    assert a == b


def test_weak_signal_leaves_some_background_in_plants():
    cfg = synth.GenConfig(**{**CFG.__dict__, "signal_strength": 0.5})
    corpus, truth = synth.generate(cfg)
    topic = set(synth.build_vocabularies(cfg).topic)
    doc = corpus.responsive()[0]
    start, length = truth[doc.id][0]
    window = tokenize(doc.text).tokens[start : start + length]
    share = sum(t in topic for t in window) / length
    assert 0.2 < share < 0.8


def test_multiple_plants_do_not_overlap():
    cfg = synth.GenConfig(**{**CFG.__dict__, "plants_per_resp_doc": (3, 3), "plant_length": 30})
    _, truth = synth.generate(cfg)
    for spans in truth.spans.values():
        assert len(spans) == 3
        for (s1, l1), (s2, _) in zip(spans, spans[1:]):
            assert s1 + l1 <= s2


@pytest.mark.parametrize(
    "change",
    [
        {"plants_per_resp_doc": (2, 4)},
        {"doc_length": (50, 40)},
        {"signal_strength": 0.0},
        {"plant_length": 200},
        {"vocab_overlap": 1.0},
        {"n_resp": -1},
    ],
)
def test_invalid_configs_rejected(change):
    with pytest.raises(ValueError):
        synth.generate(synth.GenConfig(**{**CFG.__dict__, **change}))


def test_ground_truth_round_trip(tmp_path):
    _, truth = synth.generate(CFG)
    path = tmp_path / "truth.jsonl"
    synth.save_ground_truth(truth, path)
    assert synth.load_ground_truth(path) == truth


def test_recall_counts_half_overlap_as_hit():
    truth = synth.GroundTruth({"d": ((100, 50),)})
    assert synth.rationale_recall([Snippet("d", 125, 50)], truth, 1) == 1.0
    assert synth.rationale_recall([Snippet("d", 126, 50)], truth, 1) == 0.0
    ranked = [ScoredSnippet(Snippet("d", 0, 50), 0.9), ScoredSnippet(Snippet("d", 100, 50), 0.8)]
    assert synth.rationale_recall(ranked, truth, 1) == 0.0
    assert synth.rationale_recall(ranked, truth, 2) == 1.0
    assert synth.rationale_recall([], truth, 2, doc_id="d") == 0.0


def test_recall_argument_errors():
    truth = synth.GroundTruth({"d": ((0, 10),)})
    with pytest.raises(ValueError):
        synth.rationale_recall([], truth, 2)
    with pytest.raises(ValueError):
        synth.rationale_recall([Snippet("d", 0, 5), Snippet("e", 0, 5)], truth, 2)
    with pytest.raises(KeyError):
        synth.rationale_recall([Snippet("x", 0, 5)], truth, 2)
