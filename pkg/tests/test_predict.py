import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracle
from conftest import as_matrix, random_matrix, to_lists
from hybridcf import (
    DEFAULT_MAPPING,
    EmptyResultError,
    HybridConfig,
    IngestError,
    SimilarityMetric,
    Source,
    SynthSpec,
    cold_start_profile,
    generate,
    predict_hybrid,
    predict_item_based,
    predict_user_based,
    questionnaire_catalog,
)
from hybridcf.predict import alpha_label, blend, parse_alpha

nan = np.nan
METRICS = list(SimilarityMetric)


def fuzz_case(seed, max_users=12, max_items=8):
    """(train matrix, test vector, held-out item indices) from one seed."""
    rng = np.random.default_rng(seed)
    nu, ni = int(rng.integers(3, max_users + 1)), int(rng.integers(3, max_items + 1))
    v = random_matrix(rng, nu, ni, float(rng.uniform(0, 0.3)))
    if np.isnan(v[:-1]).all():
        v[0, 0] = 3.0
    held = sorted(rng.choice(ni, size=int(rng.integers(1, max(2, ni // 2))), replace=False).tolist())
    return as_matrix(v[:-1]), v[-1], held


class TestUserBased:
    def test_constant_neighbors(self):
        train = as_matrix([[1, 2, 4], [2, 1, 4], [1, 1, 4]])
        recs = predict_user_based([1, 2, nan], train, ["i2"], SimilarityMetric.EUCLIDEAN, 3)
        assert recs.as_dict() == {"i2": 4.0}

    def test_mean_skips_missing_neighbor_rating(self):
        train = as_matrix([[1, 2, 5], [2, 1, 3], [1, 1, nan]])
        recs = predict_user_based([1, 2, nan], train, ["i2"], SimilarityMetric.EUCLIDEAN, 3)
        assert recs.as_dict() == {"i2": 4.0}
        assert recs[0].source is Source.USER_BASED

    @pytest.mark.parametrize("metric", METRICS)
    @pytest.mark.parametrize("seed", range(5))
    def test_identical_user_n1(self, metric, seed):
        rng = np.random.default_rng(seed)
        v = rng.integers(0, 6, size=(9, 8)).astype(float)
        v[1:][rng.random((8, 8)) < 0.2] = nan
        train = as_matrix(v)
        held = ["i1", "i4", "i6"]
        recs = predict_user_based(v[0], train, held, metric, 1)
        assert recs.as_dict() == {it: v[0, int(it[1:])] for it in held}

    def test_test_item_value_is_ignored(self):
        train = as_matrix([[1, 2, 5], [4, 4, 1]])
        a = predict_user_based([1, 2, 0], train, ["i2"], SimilarityMetric.PEARSON, 1)
        b = predict_user_based([1, 2, nan], train, ["i2"], SimilarityMetric.PEARSON, 1)
        assert a == b

    def test_fallback_to_item_then_global_mean(self):
        # Pearson undefined everywhere (overlap 1), so no neighbor contributes
        train = as_matrix([[3, nan, 2, nan], [nan, 4, nan, nan]])
        recs = predict_user_based([5, nan, nan, nan], train, ["i2", "i3"], SimilarityMetric.PEARSON, 2)
        assert recs.as_dict() == {"i3": 3.0, "i2": 2.0}
        assert {r.source for r in recs} == {Source.FALLBACK}

    def test_empty_train_rejected(self):
        with pytest.raises(EmptyResultError):
            predict_user_based([1.0], as_matrix(np.empty((0, 1))), ["i0"], SimilarityMetric.COSINE, 1)

    def test_unknown_item_rejected(self):
        with pytest.raises(KeyError):
            predict_user_based([1, 2], as_matrix([[1, 2]]), ["zz"], SimilarityMetric.COSINE, 1)


class TestItemBased:
    def test_own_ratings_of_nearest_items(self):
        train = as_matrix([[5, 5, 5, 1], [4, 4, 4, 0], [0, 1, 0, 5]])
        recs = predict_item_based([5, 5, 5, nan], train, ["i3"], SimilarityMetric.EUCLIDEAN, 3)
        assert recs.as_dict() == {"i3": 5.0}

    @pytest.mark.parametrize("metric", [SimilarityMetric.PEARSON, SimilarityMetric.EUCLIDEAN])
    def test_duplicate_column(self, metric):
        # target i0 equals i1 over the training users, column mean 2 so imputation agrees too
        train = as_matrix([[1, 1, 4], [3, 3, 0], [2, 2, 5], [2, 2, 1]])
        recs = predict_item_based([nan, 2, 5], train, ["i0"], metric, 1)
        assert recs.as_dict() == {"i0": 2.0}

    def test_planted_item_groups(self):
        spec = SynthSpec(n_users=12, n_items=10, user_clusters=2, item_groups=2,
                         affinity=((5, 1), (1, 5)), noise_sd=0.3, missing_rate=0.0, seed=3)
        m, truth = generate(spec)
        train, test = m.take_users(range(11)), m.values[11]
        held = [0, 1]
        recs = predict_item_based(test, train, held, SimilarityMetric.PEARSON, 3).as_dict()
        want = oracle.item_based(to_lists(train.values), to_lists(test[None, :])[0], held, "pearson", 3)
        for j in held:
            assert recs[m.items[j]] == pytest.approx(want[j][0], abs=1e-12)
            same = [c for c in range(10) if c not in held and truth.item_group[c] == truth.item_group[j]]
            assert recs[m.items[j]] == pytest.approx(test[same].mean(), abs=1e-12)


class TestOracle:
    @pytest.mark.parametrize("seed", range(60))
    def test_pure_predictors_match_direct_implementation(self, seed):
        train, test, held = fuzz_case(seed)
        rows, user = to_lists(train.values), to_lists(test[None, :])[0]
        for metric in METRICS:
            for n in (1, 3, 5):
                for fn, ref, src in ((predict_user_based, oracle.user_based, Source.USER_BASED),
                                     (predict_item_based, oracle.item_based, Source.ITEM_BASED)):
                    got = {train.item_index(r.item_id): r for r in fn(test, train, held, metric, n)}
                    want = ref(rows, user, held, metric.value, n)
                    assert set(got) == set(want)
                    for j, (p, fell) in want.items():
                        assert got[j].predicted_rating == pytest.approx(p, abs=1e-12)
                        assert got[j].source is (Source.FALLBACK if fell else src)


class TestHybrid:
    def test_blend_examples(self):
        for alpha, want in ((1.0, 4.0), (0.0, 2.0), (0.25, 2.5)):
            out, _, _ = blend(alpha, [4.0], [False], [2.0], [False])
            assert out.tolist() == [want]

    def test_blend_substitutes_fallen_component(self):
        out, fell, sub = blend(0.5, [4.0, 4.0, 4.0], [True, False, True], [2.0, 2.0, 2.0], [False, True, True])
        assert out.tolist() == [2.0, 4.0, 3.0]
        assert fell.tolist() == [True, True, True]
        assert sub.tolist() == [True, True, False]

    @settings(max_examples=200)
    @given(st.floats(0, 5), st.floats(0, 5), st.floats(0, 1))
    def test_blend_linear_and_in_range(self, ru, ri, alpha):
        out, _, _ = blend(alpha, [ru], [False], [ri], [False])
        if 0 < alpha < 1:
            assert out[0] == pytest.approx(alpha * ru + (1 - alpha) * ri, abs=1e-12)
        assert min(ru, ri) - 1e-12 <= out[0] <= max(ru, ri) + 1e-12

    @pytest.mark.parametrize("seed", range(30))
    def test_endpoints_exact(self, seed):
        train, test, held = fuzz_case(seed)
        for metric in METRICS:
            for n in (1, 5):
                assert predict_hybrid(test, train, held, HybridConfig(metric, n, 1)) == \
                    predict_user_based(test, train, held, metric, n)
                assert predict_hybrid(test, train, held, HybridConfig(metric, n, 0)) == \
                    predict_item_based(test, train, held, metric, n)

    @pytest.mark.parametrize("seed", range(30))
    def test_interior_matches_oracle_blend(self, seed):
        train, test, held = fuzz_case(seed)
        rows, user = to_lists(train.values), to_lists(test[None, :])[0]
        for metric in METRICS:
            u = oracle.user_based(rows, user, held, metric.value, 3)
            i = oracle.item_based(rows, user, held, metric.value, 3)
            for alpha in (1 / 8, 1 / 3, 2 / 3):
                got = predict_hybrid(test, train, held, HybridConfig(metric, 3, alpha)).as_dict()
                for j in held:
                    want = oracle.hybrid(u[j], i[j], alpha)
                    assert got[train.items[j]] == pytest.approx(want, abs=1e-12)
                    assert 0 <= got[train.items[j]] <= 5

    def test_deterministic(self):
        train, test, held = fuzz_case(7)
        cfg = HybridConfig("cosine", 3, "1/5")
        assert predict_hybrid(test, train, held, cfg) == predict_hybrid(test, train, held, cfg)

    def test_ordering_of_list(self):
        train = as_matrix([[5, 1, 3, 2], [5, 1, 3, 2]])
        recs = predict_hybrid([nan, nan, nan, 2], train, ["i0", "i1", "i2"], HybridConfig("euclidean", 1, 0.5))
        assert [r.item_id for r in recs] == ["i0", "i2", "i1"]


class TestConfig:
    def test_alpha_parsing_and_labels(self):
        assert parse_alpha("1/4") == 0.25
        assert alpha_label(1 / 7) == "1/7"
        assert alpha_label(1.0) == "1"
        cfg = HybridConfig("pearson", 5, "2/3")
        assert HybridConfig.from_dict(cfg.to_dict()) == cfg

    @pytest.mark.parametrize("kwargs", [dict(n_neighbors=0, alpha=0.5), dict(n_neighbors=3, alpha=1.5)])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            HybridConfig("pearson", **kwargs)


class TestColdStart:
    def test_all_dont_know(self):
        items = ["T1", "T2", "S1"]
        vec = cold_start_profile({it: "I don't know" for it in items}, DEFAULT_MAPPING, items)
        assert np.isnan(vec).all()
        train = as_matrix([[1, 2, 3], [3, 4, 5]])
        for metric in METRICS:
            recs = predict_user_based(vec, train, [0, 1, 2], metric, 1)
            assert {r.source for r in recs} == {Source.FALLBACK}
            assert recs.as_dict() == {"i0": 2.0, "i1": 3.0, "i2": 4.0}

    def test_identical_to_training_user(self):
        items = ["T1", "T2", "T3", "S1"]
        row = np.array([4.0, nan, 0.0, 5.0])
        answers = {it: ("never tried" if np.isnan(v) else DEFAULT_MAPPING.label_for(int(v)))
                   for it, v in zip(items, row)}
        np.testing.assert_array_equal(cold_start_profile(answers, DEFAULT_MAPPING, items), row)

    def test_mixed_sheet(self):
        answers = {"T1": "not at all", "T2": "very little", "T3": "little", "S1": "medium",
                   "S2": "much", "S3": "very much", "S4": "never tried", "S5": "I don't know"}
        vec = cold_start_profile(answers, DEFAULT_MAPPING, list(answers))
        np.testing.assert_array_equal(vec, [0, 1, 2, 3, 4, 5, nan, nan])

    def test_unknown_item_rejected(self):
        with pytest.raises(IngestError, match="unknown item"):
            cold_start_profile({"Z1": "much"}, DEFAULT_MAPPING, ["T1"])

    def test_catalog_item_outside_layout_ignored(self):
        cat = questionnaire_catalog()
        vec = cold_start_profile({"P1": "much", "T1": "little"}, DEFAULT_MAPPING, ["T1", "T2"], cat)
        np.testing.assert_array_equal(vec, [2, nan])
