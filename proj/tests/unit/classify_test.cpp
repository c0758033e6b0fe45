#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "cgrips/classify.hpp"
#include "cgrips/error.hpp"
#include "cgrips/random.hpp"
#include "oracles.hpp"

using namespace cgrips;

namespace {

std::vector<FeatureVector> random_vectors(Rng& rng, std::size_t n, std::size_t dim, int levels = 0) {
    std::vector<FeatureVector> out(n, FeatureVector(dim));
    for (auto& v : out)
        for (auto& x : v)
            x = levels ? static_cast<float>(uniform_below(rng, levels)) / static_cast<float>(levels)
                       : static_cast<float>(uniform_unit(rng));
    return out;
}

std::vector<std::string> random_labels(Rng& rng, std::size_t n, const std::vector<std::string>& pool) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(pool[uniform_below(rng, pool.size())]);
    return out;
}

std::vector<std::string> ids_for(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back("t" + std::to_string(i));
    return out;
}

PredictionSet prediction_set(const std::vector<std::string>& truth, const std::vector<std::string>& pred) {
    return PredictionSet{ids_for(truth.size()), truth, pred, std::nullopt};
}

const std::vector<std::string> kFour{"a", "b", "c", "d"};

}  // namespace

TEST(ImageFeatures, MeanPoolsAndScales) {
    ImageGrid img(32, 255);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) img.ink(c, r, c < 2 ? 0 : 255);
    const auto f = image_features(img, 4);
    ASSERT_EQ(f.size(), 64u);
    EXPECT_FLOAT_EQ(f[0], 0.5f);
    EXPECT_FLOAT_EQ(f[1], 1.0f);
    EXPECT_EQ(image_features(img, 1).size(), 1024u);
    EXPECT_THROW(image_features(img, 5), InputError);
}

TEST(Knn, SingleTrainingPoint) {
    const std::vector<FeatureVector> train{{0.1f, 0.2f}};
    const std::vector<std::string> labels{"only"}, set{"only", "other"};
    const KnnClassifier model(train, labels, set);
    const std::vector<FeatureVector> test{{0.9f, 0.9f}};
    const auto p = model.predict(test, ids_for(1), std::vector<std::string>{"other"}, KnnOptions{1, 1});
    EXPECT_EQ(p.predicted_labels[0], "only");
    EXPECT_EQ((*p.scores)[0], (std::vector<double>{1.0, 0.0}));
}

TEST(Knn, ExactMatchWinsAtKOne) {
    Rng rng = make_rng(31);
    const auto train = random_vectors(rng, 40, 8);
    const auto labels = random_labels(rng, 40, kFour);
    const KnnClassifier model(train, labels, kFour);
    const auto p = model.predict(train, ids_for(40), labels, KnnOptions{1, 1});
    EXPECT_EQ(p.predicted_labels, labels);
}

TEST(Knn, MatchesExhaustiveOracle) {
    Rng rng = make_rng(32);
    for (int trial = 0; trial < 12; ++trial) {
        const std::size_t n_train = 20 + uniform_below(rng, 180), n_test = 1 + uniform_below(rng, 100);
        const std::size_t dim = 1 + uniform_below(rng, 12);
        // Coarse levels force many exact distance ties.
        const int levels = trial % 2 ? 3 : 0;
        const auto train = random_vectors(rng, n_train, dim, levels);
        const auto test = random_vectors(rng, n_test, dim, levels);
        const auto labels = random_labels(rng, n_train, kFour);
        for (std::size_t k : {1, 3, 4, 7}) {
            const auto expected = oracle::knn(train, labels, test, k, kFour);
            const auto got = knn_train_predict(train, labels, test, ids_for(n_test),
                                               std::vector<std::string>(n_test, "a"), k, kFour, 2);
            ASSERT_EQ(got.predicted_labels, expected.predicted) << "k=" << k;
            ASSERT_EQ(*got.scores, expected.scores);
        }
    }
}

TEST(Knn, ThreadCountDoesNotChangePredictions) {
    Rng rng = make_rng(33);
    const auto train = random_vectors(rng, 150, 20);
    const auto test = random_vectors(rng, 80, 20);
    const auto labels = random_labels(rng, 150, kFour);
    const KnnClassifier model(train, labels, kFour);
    const auto one = model.predict(test, ids_for(80), std::vector<std::string>(80, "a"), KnnOptions{5, 1});
    const auto many = model.predict(test, ids_for(80), std::vector<std::string>(80, "a"), KnnOptions{5, 8});
    EXPECT_EQ(one.predicted_labels, many.predicted_labels);
    EXPECT_EQ(*one.scores, *many.scores);
}

TEST(Knn, TieBreakBySummedDistanceThenLabel) {
    // k=2: one neighbour each; the nearer one wins.
    const std::vector<FeatureVector> train{{0.0f}, {1.0f}};
    const std::vector<std::string> labels{"z", "a"}, set{"a", "z"};
    const KnnClassifier model(train, labels, set);
    const std::vector<FeatureVector> near_z{{0.2f}}, middle{{0.5f}};
    const std::vector<std::string> truth{"a"};
    EXPECT_EQ(model.predict(near_z, ids_for(1), truth, KnnOptions{2, 1}).predicted_labels[0], "z");
    EXPECT_EQ(model.predict(middle, ids_for(1), truth, KnnOptions{2, 1}).predicted_labels[0], "a");
}

TEST(Knn, Errors) {
    const std::vector<FeatureVector> empty;
    EXPECT_THROW(KnnClassifier(empty, {}, kFour), InputError);
    const std::vector<FeatureVector> ragged{{0.0f, 1.0f}, {1.0f}};
    EXPECT_THROW(KnnClassifier(ragged, {"a", "b"}, kFour), InputError);
    const std::vector<FeatureVector> train{{0.0f, 1.0f}};
    const KnnClassifier model(train, {"a"}, kFour);
    const std::vector<FeatureVector> wrong{{0.0f}};
    EXPECT_THROW(model.predict(wrong, ids_for(1), std::vector<std::string>{"a"}, KnnOptions{1, 1}), InputError);
    EXPECT_THROW(model.predict(train, ids_for(1), std::vector<std::string>{"a"}, KnnOptions{2, 1}), InputError);
    EXPECT_THROW(model.predict(train, ids_for(1), std::vector<std::string>{"a"}, KnnOptions{0, 1}), InputError);
}

TEST(SelectK, PicksBestAndPrefersSmallerOnTies) {
    // Two clusters; every odd k gets validation right, so k = 1 wins the tie.
    const std::vector<FeatureVector> train{{0.0f}, {0.1f}, {0.2f}, {0.9f}, {1.0f}, {1.1f}, {1.2f}, {1.3f}};
    const std::vector<std::string> labels{"a", "a", "a", "b", "b", "b", "b", "b"}, set{"a", "b"};
    const KnnClassifier model(train, labels, set);
    const std::vector<FeatureVector> val{{0.05f}, {1.05f}};
    const std::vector<std::string> val_labels{"a", "b"};
    const std::size_t candidates[] = {1, 3, 5, 7};
    const auto s = select_k(model, val, val_labels, candidates);
    EXPECT_EQ(s.k, 1u);
    EXPECT_DOUBLE_EQ(s.validation_accuracy, 1.0);
    // At k = 7 the "a" query is outvoted.
    const std::size_t big[] = {7, 5};
    EXPECT_EQ(select_k(model, val, val_labels, big).k, 5u);
    const std::size_t too_big[] = {9};
    EXPECT_THROW(select_k(model, val, val_labels, too_big), InputError);
}

TEST(Metrics, PerfectTwoClass) {
    PredictionSet p = prediction_set({"a", "b", "a", "b"}, {"a", "b", "a", "b"});
    p.scores = std::vector<std::vector<double>>{{1, 0}, {0, 1}, {1, 0}, {0, 1}};
    const std::vector<std::string> set{"a", "b"};
    const auto m = compute_metrics(p, set);
    EXPECT_EQ(m.accuracy, 1.0);
    EXPECT_EQ(m.precision_weighted, 1.0);
    EXPECT_EQ(m.recall_weighted, 1.0);
    EXPECT_EQ(m.f1_weighted, 1.0);
    EXPECT_EQ(m.f1_macro, 1.0);
    ASSERT_TRUE(m.roc_auc_ovr_macro.has_value());
    EXPECT_EQ(*m.roc_auc_ovr_macro, 1.0);
}

TEST(Metrics, MatchesConfusionOracle) {
    Rng rng = make_rng(34);
    for (int trial = 0; trial < 200; ++trial) {
        const auto truth = random_labels(rng, 50, kFour);
        const auto pred = random_labels(rng, 50, {"a", "b", "c"});
        const auto m = compute_metrics(prediction_set(truth, pred), kFour, MetricsOptions{false, 0.0});
        const auto o = oracle::confusion_metrics(truth, pred, kFour);
        ASSERT_NEAR(m.accuracy, o.accuracy, 1e-9);
        ASSERT_NEAR(m.precision_weighted, o.precision_weighted, 1e-9);
        ASSERT_NEAR(m.recall_weighted, o.recall_weighted, 1e-9);
        ASSERT_NEAR(m.f1_weighted, o.f1_weighted, 1e-9);
        ASSERT_NEAR(m.f1_macro, o.f1_macro, 1e-9);
    }
}

TEST(Metrics, AccuracyIsTraceOverTotal) {
    const auto m = compute_metrics(prediction_set({"a", "a", "b", "c"}, {"a", "b", "b", "a"}), kFour,
                                   MetricsOptions{false, 0.0});
    EXPECT_EQ(m.accuracy, 0.5);
}

TEST(Metrics, BoundsAndPermutationInvariance) {
    Rng rng = make_rng(35);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 10 + uniform_below(rng, 60);
        PredictionSet p = prediction_set(random_labels(rng, n, kFour), random_labels(rng, n, kFour));
        std::vector<std::vector<double>> scores;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> row(4);
            for (auto& v : row) v = std::floor(uniform_unit(rng) * 5.0) / 5.0;
            scores.push_back(row);
        }
        p.scores = scores;
        const auto m = compute_metrics(p, kFour);
        for (double v : {m.accuracy, m.precision_weighted, m.recall_weighted, m.f1_weighted, m.f1_macro,
                         m.roc_auc_ovr_macro.value_or(0.5)}) {
            ASSERT_GE(v, 0.0);
            ASSERT_LE(v, 1.0);
        }
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        shuffle(std::span<std::size_t>(order), rng);
        PredictionSet q;
        q.scores.emplace();
        for (auto i : order) {
            q.ids.push_back(p.ids[i]);
            q.true_labels.push_back(p.true_labels[i]);
            q.predicted_labels.push_back(p.predicted_labels[i]);
            q.scores->push_back((*p.scores)[i]);
        }
        const auto mq = compute_metrics(q, kFour);
        ASSERT_NEAR(m.accuracy, mq.accuracy, 1e-12);
        ASSERT_NEAR(m.f1_weighted, mq.f1_weighted, 1e-12);
        ASSERT_NEAR(m.f1_macro, mq.f1_macro, 1e-12);
        ASSERT_NEAR(m.roc_auc_ovr_macro.value_or(-1), mq.roc_auc_ovr_macro.value_or(-1), 1e-12);
    }
}

TEST(Metrics, RocAucOmittedForSingleTrueLabel) {
    PredictionSet p = prediction_set({"a", "a"}, {"a", "b"});
    p.scores = std::vector<std::vector<double>>{{1, 0}, {0, 1}};
    const std::vector<std::string> set{"a", "b"};
    const auto m = compute_metrics(p, set);
    EXPECT_FALSE(m.roc_auc_ovr_macro.has_value());
    ASSERT_EQ(m.diagnostics.size(), 1u);
}

TEST(Metrics, Errors) {
    const std::vector<std::string> set{"a", "b"};
    EXPECT_THROW(compute_metrics(PredictionSet{}, set), InputError);
    EXPECT_THROW(compute_metrics(prediction_set({"a", "b"}, {"a", "b"}), set), InputError);  // no scores
    EXPECT_THROW(compute_metrics(prediction_set({"a", "x"}, {"a", "b"}), set, MetricsOptions{false, 0}), InputError);
}

TEST(RocAuc, MatchesMannWhitney) {
    Rng rng = make_rng(36);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + uniform_below(rng, 80);
        std::vector<double> scores;
        std::vector<bool> positive;
        std::vector<std::uint8_t> flags;
        for (std::size_t i = 0; i < n; ++i) {
            scores.push_back(std::floor(uniform_unit(rng) * 6.0) / 6.0);
            const bool pos = i == 0 || (i != 1 && uniform_below(rng, 2));
            positive.push_back(pos);
            flags.push_back(pos);
        }
        ASSERT_NEAR(roc_auc_binary(scores, flags), oracle::mann_whitney_auc(scores, positive), 1e-12);
    }
}

TEST(RocAuc, OneHotAndConstantScores) {
    const std::vector<std::string> truth{"a", "b", "c", "a", "c", "b"};
    PredictionSet p = prediction_set(truth, truth);
    const std::vector<std::string> set{"a", "b", "c"};
    std::vector<std::vector<double>> onehot, constant;
    for (const auto& t : truth) {
        onehot.push_back({t == "a" ? 1.0 : 0.0, t == "b" ? 1.0 : 0.0, t == "c" ? 1.0 : 0.0});
        constant.push_back({0.3, 0.3, 0.3});
    }
    p.scores = onehot;
    EXPECT_EQ(*compute_metrics(p, set).roc_auc_ovr_macro, 1.0);
    p.scores = constant;
    EXPECT_EQ(*compute_metrics(p, set).roc_auc_ovr_macro, 0.5);
}

TEST(McNemar, SymmetricTableAtMode) {
    EXPECT_DOUBLE_EQ(mcnemar_exact_p(5, 5), 1.0);
    EXPECT_DOUBLE_EQ(mcnemar_exact_p(5, 5), oracle::mcnemar_exact_pascal(5, 5));
}

TEST(McNemar, OneSidedTenZero) {
    EXPECT_NEAR(mcnemar_exact_p(10, 0), 2.0 * std::pow(0.5, 10), 1e-15);
    EXPECT_NEAR(mcnemar_exact_p(10, 0), 0.00195, 1e-5);
}

TEST(McNemar, ExactMatchesPascalOracle) {
    for (std::size_t b = 0; b <= 25; ++b)
        for (std::size_t c = 0; b + c <= 25; ++c)
            ASSERT_NEAR(mcnemar_exact_p(b, c), oracle::mcnemar_exact_pascal(b, c), 1e-14) << b << "," << c;
}

TEST(McNemar, ChiSquareAgreesWithExact) {
    EXPECT_NEAR(mcnemar_chi2_p(30, 12), mcnemar_exact_p(30, 12), 0.02);
    // (|30-12|-1)^2/42 = 6.881, upper tail of chi-square(1).
    EXPECT_NEAR(mcnemar_chi2_p(30, 12), std::erfc(std::sqrt(289.0 / 42.0 / 2.0)), 1e-15);
    EXPECT_NEAR(mcnemar_exact_p(30, 12), oracle::mcnemar_exact_pascal(30, 12), 1e-14);
}

TEST(McNemar, TableFromPredictionSets) {
    // 10 items where only the first classifier is right.
    std::vector<std::string> truth(12, "a"), first(12, "a"), second(12, "b");
    second[10] = "a";
    second[11] = "a";
    const auto r = mcnemar_test(prediction_set(truth, first), prediction_set(truth, second));
    EXPECT_EQ(r.b, 10u);
    EXPECT_EQ(r.c, 0u);
    EXPECT_TRUE(r.exact);
    EXPECT_NEAR(r.p_value, 0.001953125, 1e-15);
}

TEST(McNemar, MatchesById) {
    auto a = prediction_set({"a", "b"}, {"a", "a"});
    auto b = a;
    std::swap(b.ids[0], b.ids[1]);
    std::swap(b.true_labels[0], b.true_labels[1]);
    std::swap(b.predicted_labels[0], b.predicted_labels[1]);
    const auto r = mcnemar_test(a, b);
    EXPECT_EQ(r.b + r.c, 0u);
    EXPECT_EQ(r.p_value, 1.0);
    EXPECT_FALSE(r.diagnostic.empty());
}

TEST(McNemar, LargeTablesUseChiSquare) {
    std::vector<std::string> truth(60, "a"), first(60, "a"), second(60, "a");
    for (int i = 0; i < 30; ++i) second[i] = "b";
    for (int i = 30; i < 42; ++i) first[i] = "b";
    const auto r = mcnemar_test(prediction_set(truth, first), prediction_set(truth, second));
    EXPECT_FALSE(r.exact);
    EXPECT_EQ(r.b, 30u);
    EXPECT_EQ(r.c, 12u);
}

TEST(McNemar, MismatchedSetsRejected) {
    const auto a = prediction_set({"a", "b"}, {"a", "a"});
    EXPECT_THROW(mcnemar_test(a, prediction_set({"a"}, {"a"})), InputError);
    EXPECT_THROW(mcnemar_test(a, prediction_set({"a", "a"}, {"a", "a"})), InputError);
}

TEST(Serialization, PredictionsAndMetricsRoundTrip) {
    const auto dir = std::filesystem::temp_directory_path() / "cgrips_classify_test";
    std::filesystem::create_directories(dir);
    PredictionSet p = prediction_set({"a", "b"}, {"b", "b"});
    p.scores = std::vector<std::vector<double>>{{0.25, 0.75}, {0.0, 1.0}};
    write_predictions(p, dir / "p.jsonl");
    const auto back = read_predictions(dir / "p.jsonl");
    EXPECT_EQ(back.ids, p.ids);
    EXPECT_EQ(back.true_labels, p.true_labels);
    EXPECT_EQ(back.predicted_labels, p.predicted_labels);
    EXPECT_EQ(*back.scores, *p.scores);

    const std::vector<std::string> set{"a", "b"};
    const auto m = compute_metrics(p, set, MetricsOptions{true, 1.5});
    write_metrics(m, dir / "m.json");
    const auto mb = read_metrics(dir / "m.json");
    EXPECT_EQ(mb.accuracy, m.accuracy);
    EXPECT_EQ(mb.f1_macro, m.f1_macro);
    EXPECT_EQ(mb.roc_auc_ovr_macro, m.roc_auc_ovr_macro);
    EXPECT_EQ(mb.train_runtime_sec, 1.5);

    std::ofstream(dir / "bad.jsonl") << "{\"id\":\"x\",\"true\":\"a\"}\n";
    EXPECT_THROW(read_predictions(dir / "bad.jsonl"), InputError);
    std::filesystem::remove_all(dir);
}

TEST(Serialization, NullScoresAllowed) {
    const auto path = std::filesystem::temp_directory_path() / "cgrips_null_scores.jsonl";
    std::ofstream(path) << "{\"id\":\"x\",\"true\":\"a\",\"pred\":\"b\",\"scores\":null}\n";
    const auto p = read_predictions(path);
    EXPECT_FALSE(p.scores.has_value());
    std::filesystem::remove(path);
}
