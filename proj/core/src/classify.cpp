#include "cgrips/classify.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <queue>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cgrips/error.hpp"
#include "cgrips/parallel.hpp"
#include "cgrips/seqio.hpp"

namespace cgrips {

void PredictionSet::validate(std::size_t label_count) const {
    if (true_labels.size() != ids.size() || predicted_labels.size() != ids.size())
        throw InputError("prediction set lists differ in length");
    if (!scores) return;
    if (scores->size() != ids.size()) throw InputError("prediction set has a score row count mismatch");
    for (const auto& row : *scores) {
        if (label_count != 0 && row.size() != label_count)
            throw InputError(fmt::format("score row has {} entries for {} classes", row.size(), label_count));
        for (double v : row)
            if (!std::isfinite(v)) throw InputError("score rows must be finite");
    }
}

FeatureVector image_features(const ImageGrid& img, int pool_factor) {
    if (pool_factor < 1 || img.size() % pool_factor != 0)
        throw InputError(fmt::format("pool factor {} does not divide image size {}", pool_factor, img.size()));
    const int out = img.size() / pool_factor;
    const double norm = 255.0 * pool_factor * pool_factor;
    FeatureVector f(static_cast<std::size_t>(out) * static_cast<std::size_t>(out));
    for (int r = 0; r < out; ++r) {
        for (int c = 0; c < out; ++c) {
            unsigned sum = 0;
            for (int dr = 0; dr < pool_factor; ++dr)
                for (int dc = 0; dc < pool_factor; ++dc) sum += img.at(c * pool_factor + dc, r * pool_factor + dr);
            f[static_cast<std::size_t>(r) * static_cast<std::size_t>(out) + static_cast<std::size_t>(c)] =
                static_cast<float>(sum / norm);
        }
    }
    return f;
}

KnnClassifier::KnnClassifier(std::vector<FeatureVector> train, std::vector<std::string> labels,
                             std::vector<std::string> label_set)
    : train_(std::move(train)), labels_(std::move(labels)), label_set_(std::move(label_set)) {
    if (train_.empty()) throw InputError("k-NN needs a non-empty training set");
    if (train_.size() != labels_.size()) throw InputError("k-NN training vectors and labels differ in count");
    dimension_ = train_.front().size();
    for (const auto& v : train_)
        if (v.size() != dimension_) throw InputError("k-NN training vectors differ in dimension");
    std::map<std::string, std::size_t> index;
    for (std::size_t k = 0; k < label_set_.size(); ++k) index.emplace(label_set_[k], k);
    for (const auto& l : labels_) {
        const auto it = index.find(l);
        if (it == index.end()) throw InputError(fmt::format("training label '{}' is not in the label set", l));
        label_index_.push_back(it->second);
    }
}

PredictionSet KnnClassifier::predict(std::span<const FeatureVector> test, std::span<const std::string> test_ids,
                                     std::span<const std::string> test_labels, const KnnOptions& options) const {
    if (options.k < 1 || options.k > train_.size())
        throw InputError(fmt::format("k = {} is outside [1, {}]", options.k, train_.size()));
    if (test_ids.size() != test.size() || test_labels.size() != test.size())
        throw InputError("test vectors, ids and labels differ in count");
    for (const auto& v : test)
        if (v.size() != dimension_)
            throw InputError(fmt::format("test vector has dimension {}, expected {}", v.size(), dimension_));

    const std::size_t k = options.k;
    const std::size_t classes = label_set_.size();
    PredictionSet out;
    out.ids.assign(test_ids.begin(), test_ids.end());
    out.true_labels.assign(test_labels.begin(), test_labels.end());
    out.predicted_labels.resize(test.size());
    out.scores.emplace(test.size(), std::vector<double>(classes, 0.0));

    parallel_for(test.size(), options.threads, [&](std::size_t t) {
        // Max-heap on (squared distance, training index) keeps the k best.
        using Candidate = std::pair<double, std::size_t>;
        std::priority_queue<Candidate> best;
        const auto& query = test[t];
        for (std::size_t i = 0; i < train_.size(); ++i) {
            const auto& ref = train_[i];
            double d2 = 0.0;
            for (std::size_t f = 0; f < dimension_; ++f) {
                const double diff = static_cast<double>(query[f]) - static_cast<double>(ref[f]);
                d2 += diff * diff;
            }
            const Candidate cand{d2, i};
            if (best.size() < k) best.push(cand);
            else if (cand < best.top()) {
                best.pop();
                best.push(cand);
            }
        }
        std::vector<std::size_t> votes(classes, 0);
        std::vector<double> dist_sum(classes, 0.0);
        while (!best.empty()) {
            const auto [d2, i] = best.top();
            best.pop();
            ++votes[label_index_[i]];
            dist_sum[label_index_[i]] += std::sqrt(d2);
        }
        std::optional<std::size_t> winner;
        for (std::size_t c = 0; c < classes; ++c) {
            if (votes[c] == 0) continue;
            if (!winner || votes[c] > votes[*winner]) {
                winner = c;
            } else if (votes[c] == votes[*winner]) {
                if (dist_sum[c] < dist_sum[*winner] ||
                    (dist_sum[c] == dist_sum[*winner] && label_set_[c] < label_set_[*winner]))
                    winner = c;
            }
        }
        out.predicted_labels[t] = label_set_[*winner];
        auto& row = (*out.scores)[t];
        for (std::size_t c = 0; c < classes; ++c) row[c] = static_cast<double>(votes[c]) / static_cast<double>(k);
    });
    return out;
}

PredictionSet knn_train_predict(std::span<const FeatureVector> train, std::span<const std::string> train_labels,
                                std::span<const FeatureVector> test, std::span<const std::string> test_ids,
                                std::span<const std::string> test_labels, std::size_t k,
                                std::span<const std::string> label_set, unsigned threads) {
    KnnClassifier model({train.begin(), train.end()}, {train_labels.begin(), train_labels.end()},
                        {label_set.begin(), label_set.end()});
    return model.predict(test, test_ids, test_labels, KnnOptions{k, threads});
}

namespace {

double accuracy_of(const PredictionSet& p) {
    if (p.size() == 0) return 0.0;
    std::size_t hit = 0;
    for (std::size_t i = 0; i < p.size(); ++i) hit += p.true_labels[i] == p.predicted_labels[i];
    return static_cast<double>(hit) / static_cast<double>(p.size());
}

}  // namespace

KSelection select_k(const KnnClassifier& model, std::span<const FeatureVector> validation,
                    std::span<const std::string> validation_labels, std::span<const std::size_t> candidates,
                    unsigned threads) {
    if (validation.empty()) throw InputError("k selection needs a validation set");
    std::vector<std::string> ids(validation.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = std::to_string(i);
    std::optional<KSelection> best;
    for (const auto k : candidates) {
        if (k < 1 || k > model.size()) continue;
        const auto p = model.predict(validation, ids, validation_labels, KnnOptions{k, threads});
        const double acc = accuracy_of(p);
        if (!best || acc > best->validation_accuracy || (acc == best->validation_accuracy && k < best->k))
            best = KSelection{k, acc};
    }
    if (!best) throw InputError("no k candidate fits the training set size");
    return *best;
}

double roc_auc_binary(std::span<const double> scores, std::span<const std::uint8_t> positive) {
    if (scores.size() != positive.size()) throw InputError("roc_auc: scores and targets differ in length");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    const auto pos_total =
        static_cast<double>(std::ranges::count_if(positive, [](std::uint8_t v) { return v != 0; }));
    const double neg_total = static_cast<double>(positive.size()) - pos_total;
    if (pos_total == 0.0 || neg_total == 0.0) throw InputError("roc_auc needs both classes present");

    double tp = 0.0, fp = 0.0, area = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        const double threshold = scores[order[i]];
        const double tp0 = tp, fp0 = fp;
        while (i < order.size() && scores[order[i]] == threshold) {
            if (positive[order[i]]) tp += 1.0;
            else fp += 1.0;
            ++i;
        }
        area += (fp - fp0) * (tp + tp0) / 2.0;
    }
    return area / (pos_total * neg_total);
}

MetricsReport compute_metrics(const PredictionSet& p, std::span<const std::string> label_set,
                              const MetricsOptions& options) {
    if (p.size() == 0) throw InputError("cannot compute metrics of an empty prediction set");
    p.validate(label_set.size());
    std::map<std::string, std::size_t> index;
    for (std::size_t k = 0; k < label_set.size(); ++k) index.emplace(label_set[k], k);
    auto lookup = [&](const std::string& label) {
        const auto it = index.find(label);
        if (it == index.end()) throw InputError(fmt::format("label '{}' is not in the label set", label));
        return it->second;
    };

    const std::size_t classes = label_set.size();
    const std::size_t n = p.size();
    std::vector<std::vector<std::size_t>> confusion(classes, std::vector<std::size_t>(classes, 0));
    std::vector<std::size_t> truth(n);
    for (std::size_t i = 0; i < n; ++i) {
        truth[i] = lookup(p.true_labels[i]);
        ++confusion[truth[i]][lookup(p.predicted_labels[i])];
    }

    MetricsReport r;
    r.train_runtime_sec = options.train_runtime_sec;
    std::size_t trace = 0;
    double f1_macro_sum = 0.0;
    std::size_t f1_macro_count = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        const std::size_t tp = confusion[c][c];
        std::size_t support = 0, predicted = 0;
        for (std::size_t k = 0; k < classes; ++k) {
            support += confusion[c][k];
            predicted += confusion[k][c];
        }
        trace += tp;
        const double precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
        const double recall = support ? static_cast<double>(tp) / static_cast<double>(support) : 0.0;
        const double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        const double weight = static_cast<double>(support) / static_cast<double>(n);
        r.precision_weighted += weight * precision;
        r.recall_weighted += weight * recall;
        r.f1_weighted += weight * f1;
        if (support > 0 || predicted > 0) {
            f1_macro_sum += f1;
            ++f1_macro_count;
        }
    }
    r.accuracy = static_cast<double>(trace) / static_cast<double>(n);
    r.f1_macro = f1_macro_count ? f1_macro_sum / static_cast<double>(f1_macro_count) : 0.0;

    if (options.roc_auc) {
        if (!p.scores) throw InputError("ROC-AUC requested but the prediction set has no scores");
        const std::set<std::size_t> present(truth.begin(), truth.end());
        if (present.size() < 2) {
            r.diagnostics.push_back("ROC-AUC omitted: fewer than two distinct true labels");
        } else {
            double sum = 0.0;
            std::vector<double> column(n);
            std::vector<std::uint8_t> flags(n);
            for (const auto c : present) {
                for (std::size_t i = 0; i < n; ++i) {
                    column[i] = (*p.scores)[i][c];
                    flags[i] = truth[i] == c;
                }
                sum += roc_auc_binary(column, flags);
            }
            r.roc_auc_ovr_macro = sum / static_cast<double>(present.size());
        }
    }
    return r;
}

double mcnemar_exact_p(std::size_t b, std::size_t c) {
    const std::size_t n = b + c;
    if (n == 0) return 1.0;
    const std::size_t k = std::min(b, c);
    // P(X <= k) for X ~ Binomial(n, 1/2), terms built multiplicatively.
    double term = std::pow(0.5, static_cast<double>(n));
    double tail = term;
    for (std::size_t i = 1; i <= k; ++i) {
        term *= static_cast<double>(n - i + 1) / static_cast<double>(i);
        tail += term;
    }
    return std::min(1.0, 2.0 * tail);
}

double mcnemar_chi2_p(std::size_t b, std::size_t c) {
    const double n = static_cast<double>(b + c);
    if (n == 0.0) return 1.0;
    const double diff = std::max(0.0, std::abs(static_cast<double>(b) - static_cast<double>(c)) - 1.0);
    const double stat = diff * diff / n;
    // Survival function of chi-square with one degree of freedom.
    return std::erfc(std::sqrt(stat / 2.0));
}

McNemarResult mcnemar_test(const PredictionSet& a, const PredictionSet& b) {
    a.validate();
    b.validate();
    if (a.size() != b.size()) throw InputError("McNemar: prediction sets differ in size");
    std::map<std::string, std::size_t> in_b;
    for (std::size_t i = 0; i < b.size(); ++i)
        if (!in_b.emplace(b.ids[i], i).second) throw InputError(fmt::format("McNemar: duplicate id '{}'", b.ids[i]));

    McNemarResult r;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto it = in_b.find(a.ids[i]);
        if (it == in_b.end()) throw InputError(fmt::format("McNemar: id '{}' missing from second set", a.ids[i]));
        const std::size_t j = it->second;
        if (a.true_labels[i] != b.true_labels[j])
            throw InputError(fmt::format("McNemar: true labels disagree for id '{}'", a.ids[i]));
        const bool a_ok = a.predicted_labels[i] == a.true_labels[i];
        const bool b_ok = b.predicted_labels[j] == b.true_labels[j];
        if (a_ok && !b_ok) ++r.b;
        if (!a_ok && b_ok) ++r.c;
    }
    if (r.b + r.c == 0) {
        r.p_value = 1.0;
        r.diagnostic = "degenerate table: the classifiers never disagree";
    } else if (r.b + r.c <= kMcNemarExactLimit) {
        r.p_value = mcnemar_exact_p(r.b, r.c);
    } else {
        r.exact = false;
        r.p_value = mcnemar_chi2_p(r.b, r.c);
    }
    return r;
}

void write_predictions(const PredictionSet& p, const std::filesystem::path& path) {
    p.validate();
    std::string text;
    for (std::size_t i = 0; i < p.size(); ++i) {
        nlohmann::json row = {{"id", p.ids[i]}, {"true", p.true_labels[i]}, {"pred", p.predicted_labels[i]}};
        row["scores"] = p.scores ? nlohmann::json((*p.scores)[i]) : nlohmann::json(nullptr);
        text += row.dump();
        text += '\n';
    }
    write_file_atomically(path, text);
}

PredictionSet read_predictions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot read predictions {}", path.string()));
    PredictionSet p;
    std::vector<std::vector<double>> scores;
    bool any_scores = false, all_scores = true;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            p.ids.push_back(j.at("id").get<std::string>());
            p.true_labels.push_back(j.at("true").get<std::string>());
            p.predicted_labels.push_back(j.at("pred").get<std::string>());
            if (j.contains("scores") && !j["scores"].is_null()) {
                any_scores = true;
                scores.push_back(j["scores"].get<std::vector<double>>());
            } else {
                all_scores = false;
                scores.emplace_back();
            }
        } catch (const nlohmann::json::exception& e) {
            throw InputError(fmt::format("{}:{}: bad prediction row: {}", path.string(), line_no, e.what()));
        }
    }
    if (any_scores && !all_scores) throw InputError("predictions mix rows with and without scores");
    if (any_scores) p.scores = std::move(scores);
    p.validate();
    return p;
}

std::string metrics_to_json(const MetricsReport& r) {
    nlohmann::json j = {{"accuracy", r.accuracy},
                        {"precision_weighted", r.precision_weighted},
                        {"recall_weighted", r.recall_weighted},
                        {"f1_weighted", r.f1_weighted},
                        {"f1_macro", r.f1_macro},
                        {"train_runtime_sec", r.train_runtime_sec}};
    j["roc_auc_ovr_macro"] = r.roc_auc_ovr_macro ? nlohmann::json(*r.roc_auc_ovr_macro) : nlohmann::json(nullptr);
    if (!r.diagnostics.empty()) j["diagnostics"] = r.diagnostics;
    return j.dump(2);
}

void write_metrics(const MetricsReport& report, const std::filesystem::path& path) {
    write_file_atomically(path, metrics_to_json(report) + "\n");
}

MetricsReport read_metrics(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot read metrics {}", path.string()));
    try {
        const auto j = nlohmann::json::parse(in);
        MetricsReport r;
        r.accuracy = j.at("accuracy").get<double>();
        r.precision_weighted = j.at("precision_weighted").get<double>();
        r.recall_weighted = j.at("recall_weighted").get<double>();
        r.f1_weighted = j.at("f1_weighted").get<double>();
        r.f1_macro = j.at("f1_macro").get<double>();
        r.train_runtime_sec = j.at("train_runtime_sec").get<double>();
        if (j.contains("roc_auc_ovr_macro") && !j["roc_auc_ovr_macro"].is_null())
            r.roc_auc_ovr_macro = j["roc_auc_ovr_macro"].get<double>();
        if (j.contains("diagnostics")) r.diagnostics = j["diagnostics"].get<std::vector<std::string>>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(fmt::format("{}: bad metrics report: {}", path.string(), e.what()));
    }
}

}  // namespace cgrips
