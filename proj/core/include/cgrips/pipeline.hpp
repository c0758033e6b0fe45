#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cgrips/cgr.hpp"
#include "cgrips/classify.hpp"
#include "cgrips/render.hpp"
#include "cgrips/rips.hpp"
#include "cgrips/seqio.hpp"

namespace cgrips {

struct PipelineConfig {
    // Unset means: the layout file's alpha when a layout file is given,
    // otherwise kDefaultAlpha.
    std::optional<double> alpha;
    double epsilon = kDefaultEpsilon;
    std::vector<double> epsilon_list;
    int image_size = 224;
    double margin_frac = 0.05;
    int vertex_radius = 2;
    bool triangles = false;
    CoordinateFrame frame = CoordinateFrame::fixed_unit_box;
    double test_frac = 0.2;
    double val_frac = 0.3;
    std::uint64_t seed = 0;
    std::vector<std::size_t> knn_k_candidates{1, 3, 5, 7};
    int pool_factor = 4;
    unsigned threads = 1;
    bool strict = false;
    std::optional<std::filesystem::path> layout_file;

    RenderConfig render_config() const;
    // Re-checks every constraint of the modules the values feed.
    void validate() const;
};

// Overlays the keys present in a JSON config object onto `base`.
PipelineConfig apply_config_json(PipelineConfig base, std::string_view json_text);
PipelineConfig load_config_file(const std::filesystem::path& path, PipelineConfig base = {});
// Fully resolved configuration, alpha included.
std::string config_to_json(const PipelineConfig& cfg, const AlphabetLayout& layout);

AlphabetLayout resolve_layout(const PipelineConfig& cfg);

// cgr_map -> distance_matrix -> rips_complex -> render_complex.
ImageGrid sequence_image(std::string_view residues, const AlphabetLayout& layout, double epsilon,
                         const RenderConfig& render, bool triangles = false);

// File name for a sequence id: characters outside [A-Za-z0-9._-] become '_'.
std::string image_file_name(const std::string& id);

struct SequenceFailure {
    std::string id;
    std::string message;
};

struct BatchResult {
    DatasetManifest manifest;  // sorted by id, then epsilon
    std::vector<SequenceFailure> failures;
    SplitAssignment split;
};

// Renders every sequence to `<out_dir>/<id>.png`, then writes
// manifest.jsonl and run_config.json. Output does not depend on cfg.threads.
// Per-sequence failures are collected (and written to failures.json) unless
// cfg.strict, which rethrows the first one.
BatchResult run_batch(const Dataset& dataset, const std::filesystem::path& out_dir, const PipelineConfig& cfg);

// One sub-directory per threshold (`eps_<value>`), each with its own
// manifest, plus a combined manifest.jsonl at the top level.
BatchResult run_sweep(const Dataset& dataset, const std::filesystem::path& out_dir, const PipelineConfig& cfg);
std::string epsilon_dir_name(double epsilon);

struct EvalResult {
    MetricsReport metrics;
    PredictionSet predictions;
    KSelection selection;
};

// Trains k-NN on the manifest's train split, selects k on validation and
// evaluates the test split. Writes predictions.jsonl, metrics.json and
// run_config.json to out_dir.
EvalResult run_eval(const std::filesystem::path& manifest_path, const std::filesystem::path& out_dir,
                    const PipelineConfig& cfg);

// The whole sequence -> image -> k-NN path held in memory, for experiments
// that re-render test sequences (robustness curves, seed sweeps).
class KnnPipeline {
public:
    KnnPipeline(const Dataset& dataset, const SplitAssignment& split, const PipelineConfig& cfg);

    std::size_t k() const noexcept { return selection_.k; }
    const KSelection& selection() const noexcept { return selection_; }
    double train_runtime_sec() const noexcept { return train_runtime_sec_; }
    const std::vector<Sequence>& test_sequences() const noexcept { return test_; }
    const std::vector<std::string>& label_set() const noexcept { return label_set_; }

    PredictionSet predict(std::span<const Sequence> sequences) const;
    double accuracy(std::span<const Sequence> sequences) const;
    MetricsReport evaluate_test() const;

private:
    std::vector<FeatureVector> features(std::span<const Sequence> sequences) const;

    PipelineConfig cfg_;
    AlphabetLayout layout_;
    RenderConfig render_;
    std::vector<std::string> label_set_;
    std::optional<KnnClassifier> model_;
    KSelection selection_;
    std::vector<Sequence> test_;
    double train_runtime_sec_ = 0.0;
};

}  // namespace cgrips
