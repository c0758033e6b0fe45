#include "cgrips/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cgrips/error.hpp"
#include "cgrips/parallel.hpp"

namespace cgrips {

RenderConfig PipelineConfig::render_config() const {
    RenderConfig r;
    r.image_size = image_size;
    r.margin_frac = margin_frac;
    r.vertex_radius = vertex_radius;
    r.frame = frame;
    return r;
}

void PipelineConfig::validate() const {
    if (alpha && !(*alpha > 0.0 && *alpha < 1.0))
        throw InputError(fmt::format("alpha must lie strictly inside (0,1), got {}", *alpha));
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
        throw InputError(fmt::format("epsilon must be finite and >= 0, got {}", epsilon));
    for (std::size_t k = 0; k < epsilon_list.size(); ++k) {
        if (!(epsilon_list[k] >= 0.0) || !std::isfinite(epsilon_list[k]))
            throw InputError("epsilon list values must be finite and >= 0");
        if (k > 0 && !(epsilon_list[k] > epsilon_list[k - 1]))
            throw InputError("epsilon list must be strictly ascending");
    }
    render_config().validate();
    if (!(test_frac > 0.0 && test_frac < 1.0)) throw InputError(fmt::format("test_frac must lie in (0,1), got {}", test_frac));
    if (!(val_frac >= 0.0 && val_frac < 1.0)) throw InputError(fmt::format("val_frac must lie in [0,1), got {}", val_frac));
    if (knn_k_candidates.empty()) throw InputError("knn_k_candidates must not be empty");
    for (auto k : knn_k_candidates)
        if (k < 1) throw InputError("knn_k_candidates must be >= 1");
    if (pool_factor < 1 || image_size % pool_factor != 0)
        throw InputError(fmt::format("pool_factor {} must divide image_size {}", pool_factor, image_size));
    if (threads < 1) throw InputError("threads must be >= 1");
}

namespace {

std::string frame_name(CoordinateFrame f) {
    return f == CoordinateFrame::fixed_unit_box ? "fixed_unit_box" : "per_sequence_bbox";
}

CoordinateFrame frame_from_name(const std::string& name) {
    if (name == "fixed_unit_box") return CoordinateFrame::fixed_unit_box;
    if (name == "per_sequence_bbox") return CoordinateFrame::per_sequence_bbox;
    throw InputError(fmt::format("unknown coordinate frame '{}'", name));
}

}  // namespace

PipelineConfig apply_config_json(PipelineConfig cfg, std::string_view json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(fmt::format("config is not valid JSON: {}", e.what()));
    }
    if (!j.is_object()) throw InputError("config must be a JSON object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "alpha") cfg.alpha = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
            else if (key == "epsilon") cfg.epsilon = v.get<double>();
            else if (key == "epsilon_list") cfg.epsilon_list = v.get<std::vector<double>>();
            else if (key == "image_size") cfg.image_size = v.get<int>();
            else if (key == "margin_frac") cfg.margin_frac = v.get<double>();
            else if (key == "vertex_radius") cfg.vertex_radius = v.get<int>();
            else if (key == "triangles") cfg.triangles = v.get<bool>();
            else if (key == "frame") cfg.frame = frame_from_name(v.get<std::string>());
            else if (key == "test_frac") cfg.test_frac = v.get<double>();
            else if (key == "val_frac") cfg.val_frac = v.get<double>();
            else if (key == "seed") cfg.seed = v.get<std::uint64_t>();
            else if (key == "knn_k_candidates") cfg.knn_k_candidates = v.get<std::vector<std::size_t>>();
            else if (key == "pool_factor") cfg.pool_factor = v.get<int>();
            else if (key == "threads") cfg.threads = v.get<unsigned>();
            else if (key == "strict") cfg.strict = v.get<bool>();
            else if (key == "layout_file") {
                if (v.is_null()) cfg.layout_file.reset();
                else cfg.layout_file = v.get<std::string>();
            }
            // Keys written by config_to_json for the record only.
            else if (key == "layout_symbols" || key == "layout_origin") continue;
            else throw InputError(fmt::format("unknown config key '{}'", key));
        }
    } catch (const nlohmann::json::type_error& e) {
        throw InputError(fmt::format("config value has the wrong type: {}", e.what()));
    }
    return cfg;
}

PipelineConfig load_config_file(const std::filesystem::path& path, PipelineConfig base) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot read config file {}", path.string()));
    std::stringstream buffer;
    buffer << in.rdbuf();
    return apply_config_json(std::move(base), buffer.str());
}

std::string config_to_json(const PipelineConfig& cfg, const AlphabetLayout& layout) {
    nlohmann::json j = {{"alpha", layout.alpha()},
                        {"epsilon", cfg.epsilon},
                        {"epsilon_list", cfg.epsilon_list},
                        {"image_size", cfg.image_size},
                        {"margin_frac", cfg.margin_frac},
                        {"vertex_radius", cfg.vertex_radius},
                        {"triangles", cfg.triangles},
                        {"frame", frame_name(cfg.frame)},
                        {"test_frac", cfg.test_frac},
                        {"val_frac", cfg.val_frac},
                        {"seed", cfg.seed},
                        {"knn_k_candidates", cfg.knn_k_candidates},
                        {"pool_factor", cfg.pool_factor},
                        {"threads", cfg.threads},
                        {"strict", cfg.strict},
                        {"layout_symbols", layout.symbols()},
                        {"layout_origin", {layout.origin().x, layout.origin().y}}};
    j["layout_file"] = cfg.layout_file ? nlohmann::json(cfg.layout_file->string()) : nlohmann::json(nullptr);
    return j.dump(2);
}

AlphabetLayout resolve_layout(const PipelineConfig& cfg) {
    if (cfg.layout_file) {
        auto layout = load_layout_file(*cfg.layout_file);
        return cfg.alpha ? layout.with_alpha(*cfg.alpha) : layout;
    }
    return protein_layout(cfg.alpha.value_or(kDefaultAlpha));
}

ImageGrid sequence_image(std::string_view residues, const AlphabetLayout& layout, double epsilon,
                         const RenderConfig& render, bool triangles) {
    const auto trajectory = cgr_map(residues, layout);
    const auto dm = distance_matrix(trajectory);
    const auto complex = rips_complex(dm, epsilon, triangles);
    return render_complex(complex, trajectory.points, render);
}

std::string image_file_name(const std::string& id) {
    std::string name = id;
    for (auto& ch : name) {
        const bool keep = (ch >= 'A' && ch <= 'Z') || (ch >= 'a' && ch <= 'z') || (ch >= '0' && ch <= '9') ||
                          ch == '.' || ch == '_' || ch == '-';
        if (!keep) ch = '_';
    }
    if (name.empty() || name == "." || name == "..") name = "_" + name;
    return name + ".png";
}

std::string epsilon_dir_name(double epsilon) { return fmt::format("eps_{}", epsilon); }

namespace {

void ensure_directory(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError(fmt::format("cannot create directory {}: {}", dir.string(), ec.message()));
}

void check_unique_file_names(const Dataset& dataset) {
    std::map<std::string, std::string> seen;
    for (const auto& s : dataset.sequences()) {
        const auto name = image_file_name(s.id);
        if (auto [it, fresh] = seen.emplace(name, s.id); !fresh)
            throw PipelineError(fmt::format("ids '{}' and '{}' map to the same image file {}", it->second, s.id, name));
    }
}

void write_failures(const std::vector<SequenceFailure>& failures, const std::filesystem::path& path) {
    auto j = nlohmann::json::array();
    for (const auto& f : failures) j.push_back({{"id", f.id}, {"error", f.message}});
    write_file_atomically(path, j.dump(2) + "\n");
}

// Renders all sequences at the given thresholds into `<dir_for(eps)>/<id>.png`.
// Manifest image paths are relative to `manifest_root`.
BatchResult render_all(const Dataset& dataset, const std::filesystem::path& out_dir,
                       std::span<const double> epsilons, bool per_epsilon_dirs, const PipelineConfig& cfg) {
    cfg.validate();
    const auto layout = resolve_layout(cfg);
    const auto render = cfg.render_config();
    check_unique_file_names(dataset);
    ensure_directory(out_dir);
    for (double eps : epsilons)
        if (per_epsilon_dirs) ensure_directory(out_dir / epsilon_dir_name(eps));

    BatchResult result;
    result.split = stratified_split(dataset, cfg.test_frac, cfg.val_frac, cfg.seed);

    const auto& seqs = dataset.sequences();
    const std::size_t per_seq = epsilons.size();
    std::vector<std::optional<ManifestEntry>> slots(seqs.size() * per_seq);
    std::vector<std::optional<std::string>> errors(seqs.size());

    parallel_for(seqs.size(), cfg.threads, [&](std::size_t i) {
        const auto& s = seqs[i];
        try {
            const auto trajectory = cgr_map(s.residues, layout, s.id);
            const auto dm = distance_matrix(trajectory);
            const auto complexes = epsilon_sweep(dm, epsilons, cfg.triangles);
            const auto file = image_file_name(s.id);
            for (std::size_t e = 0; e < per_seq; ++e) {
                const auto img = render_complex(complexes[e], trajectory.points, render);
                const auto rel = per_epsilon_dirs ? std::filesystem::path(epsilon_dir_name(epsilons[e])) / file
                                                  : std::filesystem::path(file);
                write_image(img, out_dir / rel);
                slots[i * per_seq + e] = ManifestEntry{s.id,           s.label,         result.split.part_of(s.id),
                                                       rel.generic_string(), epsilons[e], layout.alpha(),
                                                       cfg.image_size};
            }
        } catch (const std::exception& ex) {
            if (cfg.strict) throw;
            errors[i] = ex.what();
        }
    });

    for (std::size_t i = 0; i < seqs.size(); ++i)
        if (errors[i]) result.failures.push_back({seqs[i].id, *errors[i]});
    for (auto& slot : slots)
        if (slot) result.manifest.push_back(std::move(*slot));
    std::ranges::sort(result.manifest, [](const ManifestEntry& a, const ManifestEntry& b) {
        if (a.id != b.id) return a.id < b.id;
        return a.epsilon < b.epsilon;
    });

    if (per_epsilon_dirs) {
        for (double eps : epsilons) {
            DatasetManifest sub;
            for (const auto& e : result.manifest) {
                if (e.epsilon != eps) continue;
                auto copy = e;
                copy.image_path = std::filesystem::path(e.image_path).filename().generic_string();
                sub.push_back(std::move(copy));
            }
            write_manifest(sub, out_dir / epsilon_dir_name(eps) / "manifest.jsonl");
        }
    }
    write_file_atomically(out_dir / "run_config.json", config_to_json(cfg, layout) + "\n");
    if (!result.failures.empty()) write_failures(result.failures, out_dir / "failures.json");
    write_manifest(result.manifest, out_dir / "manifest.jsonl");
    return result;
}

}  // namespace

BatchResult run_batch(const Dataset& dataset, const std::filesystem::path& out_dir, const PipelineConfig& cfg) {
    const double eps[] = {cfg.epsilon};
    return render_all(dataset, out_dir, eps, false, cfg);
}

BatchResult run_sweep(const Dataset& dataset, const std::filesystem::path& out_dir, const PipelineConfig& cfg) {
    if (cfg.epsilon_list.empty()) throw InputError("sweep needs a non-empty epsilon list");
    return render_all(dataset, out_dir, cfg.epsilon_list, true, cfg);
}

EvalResult run_eval(const std::filesystem::path& manifest_path, const std::filesystem::path& out_dir,
                    const PipelineConfig& cfg) {
    cfg.validate();
    const auto manifest = read_manifest(manifest_path);
    if (manifest.empty()) throw InputError("manifest is empty");
    const auto root = manifest_path.parent_path();

    std::set<std::string> ids, labels;
    for (const auto& e : manifest) {
        if (!ids.insert(e.id).second)
            throw InputError(fmt::format("manifest lists id '{}' more than once; evaluate one epsilon at a time", e.id));
        labels.insert(e.label);
    }
    const std::vector<std::string> label_set(labels.begin(), labels.end());

    std::vector<FeatureVector> features(manifest.size());
    parallel_for(manifest.size(), cfg.threads, [&](std::size_t i) {
        const auto path = root / manifest[i].image_path;
        if (!std::filesystem::exists(path)) throw IoError(fmt::format("missing image {}", path.string()));
        features[i] = image_features(read_image(path), cfg.pool_factor);
    });

    struct Part {
        std::vector<FeatureVector> x;
        std::vector<std::string> ids, labels;
    };
    Part train, validation, test;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        Part& part = manifest[i].split == SplitPart::train        ? train
                     : manifest[i].split == SplitPart::validation ? validation
                                                                  : test;
        part.x.push_back(features[i]);
        part.ids.push_back(manifest[i].id);
        part.labels.push_back(manifest[i].label);
    }
    if (train.x.empty() || test.x.empty()) throw InputError("manifest needs non-empty train and test splits");
    if (std::set<std::string>(train.labels.begin(), train.labels.end()).size() < 2)
        throw InputError("training split holds a single class");

    const auto started = std::chrono::steady_clock::now();
    KnnClassifier model(train.x, train.labels, label_set);
    KSelection selection{cfg.knn_k_candidates.front(), 0.0};
    if (!validation.x.empty()) selection = select_k(model, validation.x, validation.labels, cfg.knn_k_candidates, cfg.threads);
    const double runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    EvalResult result;
    result.selection = selection;
    result.predictions = model.predict(test.x, test.ids, test.labels, KnnOptions{selection.k, cfg.threads});
    result.metrics = compute_metrics(result.predictions, label_set, MetricsOptions{true, runtime});
    result.metrics.diagnostics.push_back(
        fmt::format("k = {} selected on validation (accuracy {:.4f})", selection.k, selection.validation_accuracy));

    ensure_directory(out_dir);
    write_predictions(result.predictions, out_dir / "predictions.jsonl");
    write_metrics(result.metrics, out_dir / "metrics.json");
    write_file_atomically(out_dir / "run_config.json", config_to_json(cfg, resolve_layout(cfg)) + "\n");
    return result;
}

KnnPipeline::KnnPipeline(const Dataset& dataset, const SplitAssignment& split, const PipelineConfig& cfg)
    : cfg_(cfg), layout_(resolve_layout(cfg)), render_(cfg.render_config()), label_set_(dataset.label_set()) {
    cfg_.validate();
    std::vector<Sequence> train, validation;
    for (const auto& s : dataset.sequences()) {
        switch (split.part_of(s.id)) {
            case SplitPart::train: train.push_back(s); break;
            case SplitPart::validation: validation.push_back(s); break;
            case SplitPart::test: test_.push_back(s); break;
        }
    }
    if (train.empty()) throw InputError("k-NN pipeline needs training sequences");

    const auto started = std::chrono::steady_clock::now();
    std::vector<std::string> train_labels;
    for (const auto& s : train) train_labels.push_back(s.label);
    model_.emplace(features(train), std::move(train_labels), label_set_);
    selection_ = KSelection{cfg_.knn_k_candidates.front(), 0.0};
    if (!validation.empty()) {
        std::vector<std::string> val_labels;
        for (const auto& s : validation) val_labels.push_back(s.label);
        selection_ = select_k(*model_, features(validation), val_labels, cfg_.knn_k_candidates, cfg_.threads);
    }
    train_runtime_sec_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
}

std::vector<FeatureVector> KnnPipeline::features(std::span<const Sequence> sequences) const {
    std::vector<FeatureVector> out(sequences.size());
    parallel_for(sequences.size(), cfg_.threads, [&](std::size_t i) {
        out[i] = image_features(sequence_image(sequences[i].residues, layout_, cfg_.epsilon, render_, cfg_.triangles),
                                cfg_.pool_factor);
    });
    return out;
}

PredictionSet KnnPipeline::predict(std::span<const Sequence> sequences) const {
    std::vector<std::string> ids, labels;
    for (const auto& s : sequences) {
        ids.push_back(s.id);
        labels.push_back(s.label);
    }
    return model_->predict(features(sequences), ids, labels, KnnOptions{selection_.k, cfg_.threads});
}

double KnnPipeline::accuracy(std::span<const Sequence> sequences) const {
    if (sequences.empty()) return 0.0;
    const auto p = predict(sequences);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < p.size(); ++i) hit += p.true_labels[i] == p.predicted_labels[i];
    return static_cast<double>(hit) / static_cast<double>(p.size());
}

MetricsReport KnnPipeline::evaluate_test() const {
    return compute_metrics(predict(test_), label_set_, MetricsOptions{true, train_runtime_sec_});
}

}  // namespace cgrips
