import math
from fractions import Fraction

import numpy as np
import pytest

import lir
from lir import (
    ConfigError,
    DatasetError,
    DegenerateLabels,
    DimensionError,
    DuplicateKey,
    EmbeddingRecord,
    LanguageMatrix,
    LogisticConfig,
    NoRelevantError,
    RankedList,
    RetrievalDataset,
    average_precision,
    evaluate_retrieval,
    evaluate_transfer,
    export_projection,
    fit_components,
    logistic_loss,
    predict_logistic,
    rank_candidates,
    train_logistic,
)
from lir.io import report_json
from oracles import average_precision_oracle, logistic_gd_oracle, rank_oracle


def rec(rid, lang, vec):
    return EmbeddingRecord(id=rid, lang=lang, vec=np.asarray(vec, dtype=float))


class TestRankCandidates:
    def test_basic_order(self):
        q = rec("q", "en", [1.0, 0.0])
        cands = [rec("a", "en", [1.0, 0.0]), rec("b", "en", [0.0, 1.0]), rec("c", "en", [-1.0, 0.0])]
        assert rank_candidates(q, cands).candidate_ids == ("a", "b", "c")

    def test_ties_broken_by_id(self):
        q = rec("q", "en", [1.0, 0.0])
        cands = [rec("z", "en", [2.0, 0.0]), rec("a", "en", [1.0, 0.0])]
        assert rank_candidates(q, cands).candidate_ids == ("a", "z")

    def test_permutation_invariant(self):
        rng = np.random.default_rng(0)
        q = rec("q", "en", rng.standard_normal(5))
        cands = [rec(f"c{i}", "en", rng.standard_normal(5)) for i in range(20)]
        base = rank_candidates(q, cands).candidate_ids
        shuffled = list(cands)
        rng.shuffle(shuffled)
        assert rank_candidates(q, shuffled).candidate_ids == base

    def test_zero_vectors_score_zero(self):
        q = rec("q", "en", [1.0, 0.0])
        cands = [rec("a", "en", [0.0, 0.0]), rec("b", "en", [-1.0, 0.0]), rec("c", "en", [0.5, 0.0])]
        # zero candidate scores 0, strictly between +0.5 and -1 cosines
        assert rank_candidates(q, cands).candidate_ids == ("c", "a", "b")
        zero_q = rec("q", "en", [0.0, 0.0])
        assert rank_candidates(zero_q, cands).candidate_ids == ("a", "b", "c")

    def test_matches_bruteforce_sort(self):
        rng = np.random.default_rng(1)
        for trial in range(20):
            d = int(rng.integers(2, 8))
            q = rec("q", "en", rng.standard_normal(d))
            cands = [rec(f"c{i}", "en", rng.standard_normal(d)) for i in range(5)]
            expected = rank_oracle(q.vec, [(c.id, c.vec) for c in cands])
            assert list(rank_candidates(q, cands).candidate_ids) == expected

    def test_errors(self):
        q = rec("q", "en", [1.0, 0.0])
        with pytest.raises(DimensionError):
            rank_candidates(q, [rec("a", "en", [1.0])])
        with pytest.raises(DuplicateKey):
            rank_candidates(q, [rec("a", "en", [1.0, 0.0]), rec("a", "en", [0.0, 1.0])])


class TestAveragePrecision:
    def test_five_sixths_fixture(self):
        ranking = RankedList(query_id="q", candidate_ids=("r1", "x", "r2"))
        ap = average_precision(ranking, {"r1", "r2"})
        assert ap == float(Fraction(5, 6))

    def test_all_relevant_first(self):
        ranking = RankedList(query_id="q", candidate_ids=("a", "b", "c", "d"))
        assert average_precision(ranking, {"a", "b"}) == 1.0

    def test_single_relevant_last(self):
        n = 7
        ids = tuple(f"c{i}" for i in range(n))
        assert average_precision(RankedList("q", ids), {ids[-1]}) == 1.0 / n

    def test_empty_relevant_rejected(self):
        with pytest.raises(NoRelevantError):
            average_precision(RankedList("q", ("a",)), set())

    def test_relevant_must_be_ranked(self):
        with pytest.raises(DatasetError):
            average_precision(RankedList("q", ("a",)), {"missing"})

    def test_matches_rational_oracle_exactly(self):
        rng = np.random.default_rng(2)
        for _ in range(60):
            n = int(rng.integers(1, 25))
            ids = [f"c{i}" for i in range(n)]
            rng.shuffle(ids)
            n_rel = int(rng.integers(1, n + 1))
            relevant = set(rng.choice(ids, size=n_rel, replace=False).tolist())
            got = average_precision(RankedList("q", tuple(ids)), relevant)
            assert got == float(average_precision_oracle(ids, relevant))
            assert 0.0 <= got <= 1.0

    def test_one_iff_relevant_on_top(self):
        ids = ("a", "b", "c", "d")
        assert average_precision(RankedList("q", ids), {"a", "c"}) < 1.0
        assert average_precision(RankedList("q", ids), {"a", "b"}) == 1.0


def two_lang_dataset():
    queries = [
        rec("q-en", "en", [1.0, 0.0, 0.0]),
        rec("q-zh-1", "zh", [0.0, 1.0, 0.0]),
        rec("q-zh-2", "zh", [0.0, 0.0, 1.0]),
    ]
    candidates = [
        rec("c1", "en", [1.0, 0.0, 0.0]),
        rec("c2", "zh", [0.0, 1.0, 0.0]),
        rec("c3", "zh", [0.0, 0.1, 1.0]),
        rec("c4", "en", [0.5, 0.5, 0.0]),
    ]
    qrels = {"q-en": {"c1"}, "q-zh-1": {"c3"}, "q-zh-2": {"c3"}}
    return RetrievalDataset(queries=queries, candidates=candidates, qrels=qrels)


class TestEvaluateRetrieval:
    def test_perfect_single_query(self):
        ds = RetrievalDataset(
            queries=[rec("q", "en", [1.0, 0.0])],
            candidates=[rec("c1", "en", [2.0, 0.0]), rec("c2", "en", [0.0, 1.0])],
            qrels={"q": {"c1"}},
        )
        report = evaluate_retrieval(ds)
        assert report.overall_map == 1.0
        assert report.query_count == 1
        assert report.config["rank"] == 0

    def test_overall_is_query_mean_not_language_mean(self):
        ds = two_lang_dataset()
        report = evaluate_retrieval(ds)
        # one en query with AP 1.0, two zh queries: overall weights queries,
        # not languages
        r_en = report.per_language_map["en"]
        r_zh = report.per_language_map["zh"]
        assert r_en == 1.0
        assert report.overall_map == pytest.approx((r_en + 2 * r_zh) / 3, abs=1e-12)
        assert report.overall_map != pytest.approx((r_en + r_zh) / 2, abs=1e-6)

    def test_rank_zero_bases_bitwise_equal_to_no_bases(self):
        ds = two_lang_dataset()
        bases = {
            lang: lir.ComponentBasis(
                lang=lang,
                basis=np.zeros((3, 0)),
                rank=0,
                source_fingerprint="r0",
                sample_count=3,
            )
            for lang in ("en", "zh")
        }
        plain = evaluate_retrieval(ds)
        with_r0 = evaluate_retrieval(ds, bases)
        assert report_json(plain) == report_json(with_r0)

    def test_missing_language_basis_is_strict(self):
        ds = two_lang_dataset()
        bases = {
            "en": lir.ComponentBasis(
                lang="en", basis=np.zeros((3, 0)), rank=0, source_fingerprint="x", sample_count=1
            )
        }
        with pytest.raises(lir.MissingBasis):
            evaluate_retrieval(ds, bases)

    def test_removal_changes_ranking(self):
        cfg = lir.SynthConfig(
            languages=("l00", "l01", "l02"),
            topics=8,
            per_topic_per_lang=6,
            dim=16,
            bias_scale=5.0,
            semantic_scale=1.0,
            noise_scale=0.1,
            seed=3,
        )
        res = lir.generate(cfg)
        ds = res.retrieval_dataset()
        bases = {
            lang: fit_components(LanguageMatrix.from_records(res.records_for(lang)), 1)
            for lang in cfg.languages
        }
        before = evaluate_retrieval(ds)
        after = evaluate_retrieval(ds, bases)
        assert after.overall_map - before.overall_map >= 0.3
        assert after.config["rank"] == 1
        assert set(after.per_language_map) == set(cfg.languages)

    def test_rerun_serialization_identical(self):
        ds = two_lang_dataset()
        assert report_json(evaluate_retrieval(ds)) == report_json(evaluate_retrieval(ds))

    def test_rank_recorded_and_mixed_ranks_need_explicit_value(self):
        ds = two_lang_dataset()
        assert evaluate_retrieval(ds, rank=3).config["rank"] == 3
        rng = np.random.default_rng(17)

        def fitted(lang, r):
            rows = rng.standard_normal((10, 3))
            return fit_components(LanguageMatrix(lang=lang, rows=rows), r)

        mixed = {"en": fitted("en", 1), "zh": fitted("zh", 2)}
        with pytest.raises(ConfigError):
            evaluate_retrieval(ds, mixed)
        report = evaluate_retrieval(ds, mixed, rank=2)
        assert report.config["rank"] == 2

    def test_map_invariant_under_monotone_score_transform(self):
        rng = np.random.default_rng(5)
        scores = rng.standard_normal(12)
        ids = np.array([f"c{i:02d}" for i in range(12)])
        base_order = np.lexsort((ids, -scores))
        for transform in (lambda s: 2.0 * s + 1.0, np.tanh, lambda s: s**3):
            alt_order = np.lexsort((ids, -transform(scores)))
            assert np.array_equal(base_order, alt_order)
        relevant = {"c03", "c07", "c11"}
        ranked = tuple(ids[base_order].tolist())
        ap = average_precision(RankedList("q", ranked), relevant)
        assert 0.0 <= ap <= 1.0


class TestTrainLogistic:
    def test_zero_epochs_predicts_half(self):
        x = np.array([[1.0], [-1.0]])
        w = train_logistic(x, [1, 0], LogisticConfig(learning_rate=0.1, epochs=0))
        assert np.all(w == 0.0)
        z = x @ w[:-1] + w[-1]
        assert np.allclose(1.0 / (1.0 + np.exp(-z)), 0.5)

    def test_separable_1d(self):
        x = np.array([[-1.0], [1.0]])
        y = [0, 1]
        w = train_logistic(x, y, LogisticConfig(learning_rate=0.5, epochs=500, l2=0.0))
        assert np.array_equal(predict_logistic(x, w), [0, 1])

    def test_matches_pure_python_oracle(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal((12, 3))
        y = (x[:, 0] + 0.2 * rng.standard_normal(12) > 0).astype(int)
        if y.min() == y.max():
            y[0] = 1 - y[0]
        w = train_logistic(x, y, LogisticConfig(learning_rate=0.3, epochs=40, l2=0.01))
        oracle = logistic_gd_oracle(x.tolist(), list(y), lr=0.3, epochs=40, l2=0.01)
        assert np.allclose(w, oracle, atol=1e-10)

    def test_duplicating_rows_leaves_weights_unchanged(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal((10, 2))
        y = (x[:, 0] > 0).astype(int)
        if y.min() == y.max():
            y[0] = 1 - y[0]
        cfg = LogisticConfig(learning_rate=0.2, epochs=100)
        w1 = train_logistic(x, y, cfg)
        w2 = train_logistic(np.vstack([x, x]), np.concatenate([y, y]), cfg)
        assert np.allclose(w1, w2, atol=1e-12)

    def test_loss_non_increasing_small_lr(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal((30, 4))
        y = (x @ np.array([1.0, -0.5, 0.2, 0.0]) > 0).astype(int)
        losses = []
        for epochs in range(0, 60, 5):
            w = train_logistic(x, y, LogisticConfig(learning_rate=0.01, epochs=epochs))
            losses.append(logistic_loss(x, y, w))
        assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))

    def test_single_class_rejected(self):
        with pytest.raises(DegenerateLabels):
            train_logistic(np.ones((3, 2)), [1, 1, 1])

    def test_bad_labels_rejected(self):
        with pytest.raises(ConfigError):
            train_logistic(np.ones((2, 2)), [0, 2])
        with pytest.raises(DimensionError):
            train_logistic(np.ones((2, 2)), [0, 1, 1])


def transfer_fixture(seed=42):
    cfg = lir.SynthConfig(
        languages=("l00", "l01", "l02"),
        topics=3,
        per_topic_per_lang=30,
        dim=12,
        bias_scale=8.0,
        semantic_scale=1.0,
        noise_scale=0.3,
        seed=seed,
        label_rule="topic-parity",
    )
    res = lir.generate(cfg)
    bases = {
        lang: fit_components(LanguageMatrix.from_records(res.records_for(lang)), 1)
        for lang in cfg.languages
    }
    tests = {}
    for lang in cfg.languages:
        recs = res.records_for(lang)
        tests[lang] = (recs, [res.labels[r.id] for r in recs])
    train_recs = res.records_for("l00")
    train_labels = [res.labels[r.id] for r in train_recs]
    return cfg, res, bases, tests, train_recs, train_labels


class TestEvaluateTransfer:
    def test_baseline_report_shape(self):
        cfg, _, _, tests, train_recs, train_labels = transfer_fixture()
        report = evaluate_transfer(train_recs, train_labels, tests)
        assert report.train_language == "l00"
        assert set(report.per_language_accuracy) == set(cfg.languages)
        values = [report.per_language_accuracy[lang] for lang in sorted(tests)]
        assert report.average == pytest.approx(math.fsum(values) / len(values), abs=1e-15)
        assert report.config["placement"] == "both"
        assert report.config["rank"] == 0

    def test_rank_zero_bitwise_equals_baseline(self):
        _, _, _, tests, train_recs, train_labels = transfer_fixture()
        r0 = {
            lang: lir.ComponentBasis(
                lang=lang,
                basis=np.zeros((12, 0)),
                rank=0,
                source_fingerprint="r0",
                sample_count=5,
            )
            for lang in tests
        }
        base = evaluate_transfer(train_recs, train_labels, tests)
        with_r0 = evaluate_transfer(train_recs, train_labels, tests, r0)
        assert report_json(base) == report_json(with_r0)

    def test_train_language_identity_when_same_basis(self):
        # test language == train language, r=0: accuracy equals in-language baseline
        _, _, _, tests, train_recs, train_labels = transfer_fixture()
        only_train = {"l00": tests["l00"]}
        base = evaluate_transfer(train_recs, train_labels, only_train)
        assert base.per_language_accuracy["l00"] == base.average

    def test_removal_improves_cross_language(self):
        cfg, _, bases, tests, train_recs, train_labels = transfer_fixture()
        lcfg = LogisticConfig(learning_rate=1.0, epochs=600)
        base = evaluate_transfer(train_recs, train_labels, tests, logistic=lcfg)
        treated = evaluate_transfer(
            train_recs, train_labels, tests, bases, placement="both", logistic=lcfg
        )
        others = [lang for lang in cfg.languages if lang != "l00"]
        base_avg = np.mean([base.per_language_accuracy[lang] for lang in others])
        lir_avg = np.mean([treated.per_language_accuracy[lang] for lang in others])
        assert lir_avg > base_avg
        assert treated.config["rank"] == 1

    def test_placement_eval_leaves_train_raw(self):
        _, _, bases, tests, train_recs, train_labels = transfer_fixture()
        both = evaluate_transfer(train_recs, train_labels, tests, bases, placement="both")
        eval_only = evaluate_transfer(train_recs, train_labels, tests, bases, placement="eval")
        assert both.config["placement"] == "both"
        assert eval_only.config["placement"] == "eval"
        assert report_json(both) != report_json(eval_only)

    def test_invalid_inputs(self):
        _, _, _, tests, train_recs, train_labels = transfer_fixture()
        with pytest.raises(ConfigError):
            evaluate_transfer(train_recs, train_labels, tests, placement="sometimes")
        with pytest.raises(DegenerateLabels):
            evaluate_transfer(train_recs, [0] * len(train_recs), tests)
        mixed = list(train_recs[:2]) + [rec("other", "l01", train_recs[0].vec)]
        with pytest.raises(ConfigError):
            evaluate_transfer(mixed, [0, 1, 0], tests)
        with pytest.raises(ConfigError):
            evaluate_transfer(train_recs, train_labels, {})


class TestExportProjection:
    def test_row_per_record(self):
        rng = np.random.default_rng(9)
        records = [rec(f"r{i}", "en", rng.standard_normal(4)) for i in range(6)]
        rows = export_projection(records, 2)
        assert [r[0] for r in rows] == [r.id for r in records]
        assert all(len(r[2]) == 2 for r in rows)

    def test_offset_languages_separate_then_overlap(self):
        rng = np.random.default_rng(10)
        en = [rec(f"e{i}", "en", [8.0 + rng.normal(0, 0.1), rng.normal(0, 0.5)]) for i in range(30)]
        zh = [rec(f"z{i}", "zh", [-8.0 + rng.normal(0, 0.1), rng.normal(0, 0.5)]) for i in range(30)]
        rows = export_projection(en + zh, 1)
        en_scores = [r[2][0] for r in rows if r[1] == "en"]
        zh_scores = [r[2][0] for r in rows if r[1] == "zh"]
        assert min(en_scores) > max(zh_scores) or min(zh_scores) > max(en_scores)

    def test_duplicated_points_all_zero(self):
        records = [rec(f"r{i}", "en", [1.0, 2.0, 3.0]) for i in range(4)]
        rows = export_projection(records, 1)
        assert all(abs(r[2][0]) <= 1e-12 for r in rows)

    def test_errors(self):
        with pytest.raises(lir.RankError):
            export_projection([rec("a", "en", [1.0, 2.0])], 1)
        records = [rec("a", "en", [1.0, 2.0]), rec("b", "en", [2.0, 1.0])]
        with pytest.raises(lir.RankError):
            export_projection(records, 3)
