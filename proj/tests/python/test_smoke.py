import json
import math

import numpy as np
import pytest

import caseencoder as ce


def test_version_and_tokenize():
    assert ce.__version__
    assert ce.tokenize("A b,c") == ["a", "b", "c"]
    assert ce.tokenize("x y", mode="whitespace") == ["x", "y"]


def test_expand_articles_counts_branches():
    spec = {"articles": [{"article_id": "A", "acts": [[["甲", "乙"], ["丙", "丁", "戊"]], [["己"]]]}]}
    text = json.dumps(spec, ensure_ascii=False)
    assert ce.count_branches(text) == [7]
    branches = ce.expand_articles(text)
    assert len(branches) == 7
    assert branches[0] == ("A", 0, ["甲", "丙"])


def test_malformed_spec_raises():
    with pytest.raises(ce.ValidationError):
        ce.expand_articles('{"articles": [{"article_id": "A", "acts": [[]]}]}')


def test_bm25_zero_for_disjoint_query():
    spec = json.dumps({"articles": [{"article_id": "A", "acts": [[["甲乙"], ["丙"]]]}]}, ensure_ascii=False)
    assert ce.bm25_scores(spec, ["x"]) == [0.0]
    assert ce.bm25_scores(spec, ["甲"])[0] > 0


def test_weights_partition_and_training():
    corpus = ce.generate_corpus(articles=2, branches=2, vocab=48, cases_per_branch=5, seed=3)
    ids, w, csv = ce.relevance_weights(corpus["articles_json"], corpus["cases_jsonl"])
    assert w.shape == (20, 20)
    assert np.all((w >= 0) & (w <= 1))
    labels = ce.class_partition(csv, ids[:10])
    assert labels[0] == 0 and len(labels) == 10

    trainer = ce.Trainer(corpus["cases_jsonl"], csv, steps=3, quadruples=2, hidden=16, layers=1, heads=2, ffn=32)
    trainer.run()
    assert trainer.steps_done == 3
    assert len(trainer.log_jsonl.strip().splitlines()) == 3
    model = trainer.model
    emb = model.embed_queries(["甲乙", "丙丁"])
    assert emb.shape == (2, 16)
    assert np.all(np.isfinite(emb))


def test_bcl_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    e = rng.normal(size=(6, 5))
    labels = [0, 0, 1, 1, 2, 2]
    w = np.where(np.equal.outer(labels, labels), 0.8, 0.1)
    value, grad = ce.bcl_loss(e, labels, w)
    assert value > 0
    eps = 1e-6
    for i, j in [(0, 0), (3, 2), (5, 4)]:
        up, down = e.copy(), e.copy()
        up[i, j] += eps
        down[i, j] -= eps
        numeric = (ce.bcl_loss(up, labels, w)[0] - ce.bcl_loss(down, labels, w)[0]) / (2 * eps)
        assert math.isclose(grad[i, j], numeric, rel_tol=1e-5, abs_tol=1e-8)


def test_ndcg_and_pca():
    assert ce.ndcg_at_k(["a", "b", "c"], {"a": 2, "b": 1}, 3) == pytest.approx(1.0)
    assert ce.ndcg_at_k(["c", "b", "a"], {"a": 2}, 1) == 0.0
    pts = np.array([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [2.0, 1.0, 0.0]])
    coords, components, eigenvalues, explained = ce.pca2d(pts)
    assert coords.shape == (4, 2)
    assert explained == pytest.approx(1.0)
    assert eigenvalues[0] >= eigenvalues[1]
