#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cgrips/render.hpp"

namespace cgrips {

// Parallel lists; scores (when present) hold one row per item with one
// entry per class in label_set order.
struct PredictionSet {
    std::vector<std::string> ids;
    std::vector<std::string> true_labels;
    std::vector<std::string> predicted_labels;
    std::optional<std::vector<std::vector<double>>> scores;

    std::size_t size() const noexcept { return ids.size(); }
    // Throws InputError when the lists disagree in length or scores are
    // malformed for `label_count` classes (pass 0 to skip the score check).
    void validate(std::size_t label_count = 0) const;
};

struct MetricsReport {
    double accuracy = 0.0;
    double precision_weighted = 0.0;
    double recall_weighted = 0.0;
    double f1_weighted = 0.0;
    double f1_macro = 0.0;
    std::optional<double> roc_auc_ovr_macro;
    double train_runtime_sec = 0.0;
    std::vector<std::string> diagnostics;
};

using FeatureVector = std::vector<float>;

// Mean-pools `factor` x `factor` blocks (the image size must divide evenly)
// and scales intensities to [0,1], row-major.
FeatureVector image_features(const ImageGrid& img, int pool_factor);

struct KnnOptions {
    std::size_t k = 1;
    unsigned threads = 1;
};

// Euclidean k-nearest-neighbour classifier over fixed-length vectors.
// Neighbours at equal distance are taken in training order. The vote winner
// is the label with most neighbours, then the smallest summed distance, then
// the lexicographically smallest label. Scores are vote fractions.
class KnnClassifier {
public:
    // label_set fixes the score column order; every training label must be in it.
    KnnClassifier(std::vector<FeatureVector> train, std::vector<std::string> labels,
                  std::vector<std::string> label_set);

    std::size_t size() const noexcept { return train_.size(); }
    std::size_t dimension() const noexcept { return dimension_; }
    const std::vector<std::string>& label_set() const noexcept { return label_set_; }

    PredictionSet predict(std::span<const FeatureVector> test, std::span<const std::string> test_ids,
                          std::span<const std::string> test_labels, const KnnOptions& options) const;

private:
    std::vector<FeatureVector> train_;
    std::vector<std::string> labels_;
    std::vector<std::size_t> label_index_;
    std::vector<std::string> label_set_;
    std::size_t dimension_ = 0;
};

PredictionSet knn_train_predict(std::span<const FeatureVector> train, std::span<const std::string> train_labels,
                                std::span<const FeatureVector> test, std::span<const std::string> test_ids,
                                std::span<const std::string> test_labels, std::size_t k,
                                std::span<const std::string> label_set, unsigned threads = 1);

struct KSelection {
    std::size_t k = 1;
    double validation_accuracy = 0.0;
};

// Picks the candidate with the best validation accuracy; ties go to the
// smaller k. Candidates larger than the training set are skipped.
KSelection select_k(const KnnClassifier& model, std::span<const FeatureVector> validation,
                    std::span<const std::string> validation_labels, std::span<const std::size_t> candidates,
                    unsigned threads = 1);

struct MetricsOptions {
    bool roc_auc = true;
    double train_runtime_sec = 0.0;
};

// Precision/recall/F1 weighted by true-class support; macro F1 averages over
// the labels present in either truth or predictions. ROC-AUC is one-vs-rest
// per class (trapezoidal over score thresholds), macro-averaged over classes
// that have both positives and negatives; it is omitted with a diagnostic
// when fewer than two true labels occur.
MetricsReport compute_metrics(const PredictionSet& p, std::span<const std::string> label_set,
                              const MetricsOptions& options = {});

// Area under the ROC curve for binary targets (positive[i] != 0), tied
// scores handled by the trapezoid between threshold steps.
double roc_auc_binary(std::span<const double> scores, std::span<const std::uint8_t> positive);

struct McNemarResult {
    std::size_t b = 0;  // first correct, second wrong
    std::size_t c = 0;  // first wrong, second correct
    double p_value = 1.0;
    bool exact = true;
    std::string diagnostic;
};

inline constexpr std::size_t kMcNemarExactLimit = 25;

double mcnemar_exact_p(std::size_t b, std::size_t c);
double mcnemar_chi2_p(std::size_t b, std::size_t c);
// Exact two-sided binomial test for b + c <= 25, continuity-corrected
// chi-square otherwise; b + c == 0 gives p = 1 with a diagnostic.
McNemarResult mcnemar_test(const PredictionSet& a, const PredictionSet& b);

// JSON lines {"id", "true", "pred", "scores"}; score columns follow the
// producing run's label_set. Metrics are a single JSON object.
void write_predictions(const PredictionSet& p, const std::filesystem::path& path);
PredictionSet read_predictions(const std::filesystem::path& path);
std::string metrics_to_json(const MetricsReport& report);
void write_metrics(const MetricsReport& report, const std::filesystem::path& path);
MetricsReport read_metrics(const std::filesystem::path& path);

}  // namespace cgrips
