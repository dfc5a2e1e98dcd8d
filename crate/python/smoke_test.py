"""Smoke test for the `tecr` extension module.

Build and install first:

    pip install maturin
    maturin develop --release -m crates/py/Cargo.toml

then run `python python/smoke_test.py`.
"""

import math
import tempfile

import tecr


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol


def main():
    key = tecr.Clustering.from_clusters([["a", "b", "c", "d"]])
    resp = tecr.Clustering.from_clusters([["a", "b"], ["c", "d"]])
    p, r, f = tecr.muc(key, resp)
    assert (p, close(r, 2 / 3), close(f, 0.8)) == (1.0, True, True), (p, r, f)
    assert close(tecr.b_cubed(tecr.Clustering.from_clusters([["a", "b", "c"]]),
                              tecr.Clustering.from_clusters([["a", "b"], ["c"]]))[2], 5 / 7)
    assert tecr.conll_f1(key, key) == 1.0

    c = tecr.cluster(["a", "b", "c"], [("a", "b", 0.9), ("a", "c", 0.8), ("b", "c", 0.2)], 0.5)
    assert c.clusters() == {"a": ["a", "b", "c"]}, c.clusters()

    prompt = tecr.format_prompt("Someone quit the job today", "quit")
    assert prompt == "Context: Someone quit the job today\nEvent: quit\nBefore:"
    before, after = tecr.parse_completion(" He was angry. He argued.\nAfter: He left. END")
    assert before == ["He was angry.", "He argued."] and after == ["He left."]

    vec, weights = tecr.attend([1.0, 0.0], [[1.0, 2.0], [3.0, 4.0]], [[1.0], [0.0]], [[1.0], [1.0]])
    assert close(sum(weights), 1.0) and all(w >= 0 for w in weights)
    assert all(math.isfinite(v) for v in vec)

    corpus, hard = tecr.Corpus.synthetic(n_topics=2, seed=3)
    gold = corpus.gold_clustering()
    report = tecr.evaluate(corpus, gold)
    assert report["conll_f1"] == 1.0, report["conll_f1"]
    assert len(corpus) == len(gold) == 32 and hard

    try:
        tecr.muc(key, tecr.Clustering.from_clusters([["a"]]))
    except tecr.TecrError:
        pass
    else:
        raise AssertionError("mismatched mention sets should raise")

    config = tecr.RunConfig()
    config.seeds = [1]
    config.mode = "intra"
    config.epochs = 2
    config.n_topics = 2
    with tempfile.TemporaryDirectory() as out:
        summary = tecr.train(config, out)
        assert len(summary["seeds"]) == 1 and not summary["failures"]
        assert len(tecr.checkpoint_fingerprint(f"{out}/seed-1/model.ckpt")) == 64

    gc = tecr.gradcheck(seeds=[1])
    assert gc["pass"], gc

    print("smoke test passed")


if __name__ == "__main__":
    main()
