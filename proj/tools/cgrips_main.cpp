// cgrips: sequences -> CGR trajectories -> Rips complexes -> images -> k-NN.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cgrips/classify.hpp"
#include "cgrips/error.hpp"
#include "cgrips/perturb.hpp"
#include "cgrips/pipeline.hpp"
#include "cgrips/rips.hpp"
#include "cgrips/seqio.hpp"

namespace {

using namespace cgrips;

enum ExitCode : int { kOk = 0, kUsage = 1, kInput = 2, kPipeline = 3, kIo = 4 };

// Flag values live here until they are overlaid on the resolved config; an
// option only wins over the config file when it was given on the command line.
struct ConfigFlags {
    std::string config_file;
    PipelineConfig values;
    std::string frame = "fixed_unit_box";
    std::string layout_file;
    std::vector<std::pair<CLI::Option*, std::function<void(PipelineConfig&)>>> setters;

    template <class T>
    CLI::Option* add(CLI::App& app, const std::string& name, T PipelineConfig::* field, const std::string& help) {
        auto* opt = app.add_option(name, values.*field, help);
        setters.emplace_back(opt, [this, field](PipelineConfig& cfg) { cfg.*field = values.*field; });
        return opt;
    }

    PipelineConfig resolve() const {
        PipelineConfig cfg;
        if (!config_file.empty()) cfg = load_config_file(config_file, cfg);
        for (const auto& [opt, set] : setters)
            if (opt->count() > 0) set(cfg);
        cfg.validate();
        return cfg;
    }
};

struct AlphaFlag {
    double value = kDefaultAlpha;
};

void add_render_flags(CLI::App& app, ConfigFlags& f, AlphaFlag& alpha) {
    app.add_option("--config", f.config_file, "JSON config file (flags override it)")->check(CLI::ExistingFile);
    auto* a = app.add_option("--alpha", alpha.value, "CGR contraction factor in (0,1)");
    f.setters.emplace_back(a, [&alpha](PipelineConfig& cfg) { cfg.alpha = alpha.value; });
    auto* l = app.add_option("--layout", f.layout_file, "JSON attractor layout file")->check(CLI::ExistingFile);
    f.setters.emplace_back(l, [&f](PipelineConfig& cfg) { cfg.layout_file = f.layout_file; });
    f.add(app, "--epsilon", &PipelineConfig::epsilon, "Rips threshold");
    f.add(app, "--image-size", &PipelineConfig::image_size, "image side in pixels");
    f.add(app, "--margin-frac", &PipelineConfig::margin_frac, "blank border as a fraction of the side");
    f.add(app, "--vertex-radius", &PipelineConfig::vertex_radius, "vertex disc radius in pixels");
    auto* t = app.add_flag("--triangles", f.values.triangles, "fill Rips triangles");
    f.setters.emplace_back(t, [&f](PipelineConfig& cfg) { cfg.triangles = f.values.triangles; });
    auto* fr = app.add_option("--frame", f.frame, "coordinate frame")
                   ->check(CLI::IsMember({"fixed_unit_box", "per_sequence_bbox"}));
    f.setters.emplace_back(fr, [&f](PipelineConfig& cfg) {
        cfg.frame = f.frame == "fixed_unit_box" ? CoordinateFrame::fixed_unit_box : CoordinateFrame::per_sequence_bbox;
    });
    f.add(app, "--threads", &PipelineConfig::threads, "worker threads");
    auto* s = app.add_flag("--strict", f.values.strict, "fail on the first invalid row or sequence");
    f.setters.emplace_back(s, [&f](PipelineConfig& cfg) { cfg.strict = f.values.strict; });
}

void add_split_flags(CLI::App& app, ConfigFlags& f) {
    f.add(app, "--test-frac", &PipelineConfig::test_frac, "fraction held out for test");
    f.add(app, "--val-frac", &PipelineConfig::val_frac, "fraction of the remainder held out for validation");
    f.add(app, "--seed", &PipelineConfig::seed, "split seed");
}

void add_knn_flags(CLI::App& app, ConfigFlags& f) {
    f.add(app, "--k", &PipelineConfig::knn_k_candidates, "k-NN candidates selected on validation")->delimiter(',');
    f.add(app, "--pool-factor", &PipelineConfig::pool_factor, "mean-pool factor before k-NN");
}

Dataset load(const std::string& path, const std::string& format, const PipelineConfig& cfg) {
    LoadOptions options;
    options.format = format.empty() ? format_from_extension(path) : (format == "fasta" ? InputFormat::fasta : InputFormat::csv);
    options.strict = cfg.strict;
    auto result = load_dataset(path, resolve_layout(cfg), options);
    for (const auto& d : result.diagnostics) fmt::print(stderr, "{}:{}: skipped: {}\n", path, d.line, d.message);
    return std::move(result.dataset);
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty() || out_path == "-") {
        std::cout << text;
    } else {
        write_file_atomically(out_path, text);
    }
}

nlohmann::json split_to_json(const SplitAssignment& s) {
    return {{"seed", s.seed}, {"train", s.train}, {"validation", s.validation}, {"test", s.test}};
}

double parse_epsilon_token(const std::string& token) {
    std::size_t used = 0;
    double value = 0.0;
    try {
        value = std::stod(token, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != token.size()) throw CLI::ValidationError("--epsilons", "not a number: " + token);
    return value;
}

int run(int argc, char** argv) {
    CLI::App app{"Chaos Game Representation + Vietoris-Rips topological images for sequences"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "cgrips 0.1.0");

    // stats
    auto* stats = app.add_subcommand("stats", "per-class counts and sequence lengths");
    ConfigFlags stats_f;
    AlphaFlag stats_a;
    std::string stats_in, stats_fmt, stats_out;
    bool stats_json = false;
    stats->add_option("input", stats_in, "dataset (csv or fasta)")->required()->check(CLI::ExistingFile);
    stats->add_option("--format", stats_fmt, "input format")->check(CLI::IsMember({"csv", "fasta"}));
    stats->add_flag("--json", stats_json, "print JSON instead of a table");
    stats->add_option("-o,--out", stats_out, "output file (default stdout)");
    add_render_flags(*stats, stats_f, stats_a);

    // split
    auto* split = app.add_subcommand("split", "deterministic stratified train/validation/test split");
    ConfigFlags split_f;
    AlphaFlag split_a;
    std::string split_in, split_fmt, split_out;
    split->add_option("input", split_in, "dataset (csv or fasta)")->required()->check(CLI::ExistingFile);
    split->add_option("--format", split_fmt, "input format")->check(CLI::IsMember({"csv", "fasta"}));
    split->add_option("-o,--out", split_out, "output JSON file (default stdout)");
    add_render_flags(*split, split_f, split_a);
    add_split_flags(*split, split_f);

    // batch
    auto* batch = app.add_subcommand("batch", "render every sequence to <out>/<id>.png plus a manifest");
    ConfigFlags batch_f;
    AlphaFlag batch_a;
    std::string batch_in, batch_fmt, batch_out;
    batch->add_option("input", batch_in, "dataset (csv or fasta)")->required()->check(CLI::ExistingFile);
    batch->add_option("out_dir", batch_out, "output directory")->required();
    batch->add_option("--format", batch_fmt, "input format")->check(CLI::IsMember({"csv", "fasta"}));
    add_render_flags(*batch, batch_f, batch_a);
    add_split_flags(*batch, batch_f);

    // sweep
    auto* sweep = app.add_subcommand("sweep", "render one image set per threshold");
    ConfigFlags sweep_f;
    AlphaFlag sweep_a;
    std::string sweep_in, sweep_fmt, sweep_out;
    std::vector<std::string> sweep_eps;
    sweep->add_option("input", sweep_in, "dataset (csv or fasta)")->required()->check(CLI::ExistingFile);
    sweep->add_option("out_dir", sweep_out, "output directory")->required();
    sweep->add_option("--format", sweep_fmt, "input format")->check(CLI::IsMember({"csv", "fasta"}));
    auto* sweep_eps_opt =
        sweep->add_option("--epsilons", sweep_eps, "ascending thresholds, comma separated")->delimiter(',');
    add_render_flags(*sweep, sweep_f, sweep_a);
    add_split_flags(*sweep, sweep_f);

    // persistence
    auto* pers = app.add_subcommand("persistence", "H0 persistence diagrams (JSON lines)");
    ConfigFlags pers_f;
    AlphaFlag pers_a;
    std::string pers_in, pers_fmt, pers_out, pers_id, pers_complex_dir;
    pers->add_option("input", pers_in, "dataset (csv or fasta)")->required()->check(CLI::ExistingFile);
    pers->add_option("--format", pers_fmt, "input format")->check(CLI::IsMember({"csv", "fasta"}));
    pers->add_option("--id", pers_id, "only this sequence");
    pers->add_option("-o,--out", pers_out, "output file (default stdout)");
    pers->add_option("--export-complex", pers_complex_dir, "also write <dir>/<id>.json with the complex at --epsilon");
    add_render_flags(*pers, pers_f, pers_a);

    // perturb
    auto* pert = app.add_subcommand("perturb", "robustness curve of the k-NN pipeline under perturbation");
    ConfigFlags pert_f;
    AlphaFlag pert_a;
    std::string pert_in, pert_fmt, pert_out;
    std::vector<std::size_t> pert_mutations{0, 1, 2, 4};
    std::size_t pert_indels = 0, pert_trials = 5;
    std::optional<std::size_t> pert_truncate;
    pert->add_option("input", pert_in, "dataset (csv or fasta)")->required()->check(CLI::ExistingFile);
    pert->add_option("--format", pert_fmt, "input format")->check(CLI::IsMember({"csv", "fasta"}));
    pert->add_option("-o,--out", pert_out, "CSV output (default stdout)");
    pert->add_option("--mutations", pert_mutations, "mutation counts, one strength each")
        ->delimiter(',')
        ->capture_default_str();
    pert->add_option("--indels", pert_indels, "indel events added to every strength")->capture_default_str();
    pert->add_option("--truncate-to", pert_truncate, "truncate every test sequence to this length");
    pert->add_option("--trials", pert_trials, "trial seeds per strength (seed, seed+1, ...)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    add_render_flags(*pert, pert_f, pert_a);
    add_split_flags(*pert, pert_f);
    add_knn_flags(*pert, pert_f);

    // eval
    auto* eval = app.add_subcommand("eval", "k-NN on a manifest's images; writes predictions and metrics");
    ConfigFlags eval_f;
    AlphaFlag eval_a;
    std::string eval_manifest, eval_out;
    eval->add_option("manifest", eval_manifest, "manifest.jsonl from batch")->required()->check(CLI::ExistingFile);
    eval->add_option("out_dir", eval_out, "output directory")->required();
    add_render_flags(*eval, eval_f, eval_a);
    add_knn_flags(*eval, eval_f);

    // mcnemar
    auto* mc = app.add_subcommand("mcnemar", "McNemar test between two prediction files");
    std::string mc_a, mc_b;
    mc->add_option("first", mc_a, "predictions.jsonl")->required()->check(CLI::ExistingFile);
    mc->add_option("second", mc_b, "predictions.jsonl")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    if (stats->parsed()) {
        const auto cfg = stats_f.resolve();
        const auto rows = dataset_stats(load(stats_in, stats_fmt, cfg));
        std::string text;
        if (stats_json) {
            auto j = nlohmann::json::array();
            for (const auto& r : rows)
                j.push_back({{"label", r.label}, {"count", r.count}, {"min_len", r.min_len},
                             {"max_len", r.max_len}, {"mean_len", r.mean_len}});
            text = j.dump(2) + "\n";
        } else {
            std::size_t total = 0;
            text = fmt::format("{:<24} {:>6} {:>5} {:>5} {:>7}\n", "label", "count", "min", "max", "mean");
            for (const auto& r : rows) {
                text += fmt::format("{:<24} {:>6} {:>5} {:>5} {:>7.2f}\n", r.label, r.count, r.min_len, r.max_len,
                                    r.mean_len);
                total += r.count;
            }
            text += fmt::format("{:<24} {:>6}\n", "total", total);
        }
        emit(text, stats_out);
        return kOk;
    }

    if (split->parsed()) {
        const auto cfg = split_f.resolve();
        const auto s = stratified_split(load(split_in, split_fmt, cfg), cfg.test_frac, cfg.val_frac, cfg.seed);
        emit(split_to_json(s).dump(2) + "\n", split_out);
        return kOk;
    }

    if (batch->parsed() || sweep->parsed()) {
        const bool is_sweep = sweep->parsed();
        auto cfg = is_sweep ? sweep_f.resolve() : batch_f.resolve();
        if (is_sweep) {
            if (sweep_eps_opt->count() > 0) {
                cfg.epsilon_list.clear();
                for (const auto& t : sweep_eps) cfg.epsilon_list.push_back(parse_epsilon_token(t));
            }
            if (cfg.epsilon_list.empty()) {
                fmt::print(stderr, "sweep: --epsilons needs at least one threshold\n");
                return kUsage;
            }
            cfg.validate();
        }
        const auto dataset = load(is_sweep ? sweep_in : batch_in, is_sweep ? sweep_fmt : batch_fmt, cfg);
        const auto out = is_sweep ? sweep_out : batch_out;
        const auto result = is_sweep ? run_sweep(dataset, out, cfg) : run_batch(dataset, out, cfg);
        fmt::print(stderr, "{} images, {} failures -> {}\n", result.manifest.size(), result.failures.size(), out);
        for (const auto& f : result.failures) fmt::print(stderr, "failed {}: {}\n", f.id, f.message);
        return result.failures.empty() ? kOk : kPipeline;
    }

    if (pers->parsed()) {
        const auto cfg = pers_f.resolve();
        const auto layout = resolve_layout(cfg);
        const auto dataset = load(pers_in, pers_fmt, cfg);
        if (!pers_complex_dir.empty()) std::filesystem::create_directories(pers_complex_dir);
        std::string text;
        bool found = pers_id.empty();
        for (const auto& s : dataset.sequences()) {
            if (!pers_id.empty() && s.id != pers_id) continue;
            found = true;
            const auto traj = cgr_map(s.residues, layout, s.id);
            const auto dm = distance_matrix(traj);
            nlohmann::json row = {{"id", s.id}, {"pairs", nlohmann::json::parse(persistence_to_json(h0_persistence(dm)))}};
            text += row.dump() + "\n";
            if (!pers_complex_dir.empty()) {
                const auto complex = rips_complex(dm, cfg.epsilon, cfg.triangles);
                auto name = image_file_name(s.id);
                name.replace(name.size() - 4, 4, ".json");
                write_file_atomically(std::filesystem::path(pers_complex_dir) / name,
                                      complex_to_json(complex, traj.points) + "\n");
            }
        }
        if (!found) throw InputError(fmt::format("no sequence with id '{}'", pers_id));
        emit(text, pers_out);
        return kOk;
    }

    if (pert->parsed()) {
        const auto cfg = pert_f.resolve();
        const auto dataset = load(pert_in, pert_fmt, cfg);
        const auto split_assignment = stratified_split(dataset, cfg.test_frac, cfg.val_frac, cfg.seed);
        const KnnPipeline pipeline(dataset, split_assignment, cfg);
        std::vector<PerturbationSpec> strengths;
        for (auto m : pert_mutations) strengths.push_back(PerturbationSpec{m, pert_indels, pert_truncate, 0});
        std::vector<std::uint64_t> seeds;
        for (std::size_t t = 0; t < pert_trials; ++t) seeds.push_back(cfg.seed + t);
        const auto curve =
            robustness_curve(pipeline.test_sequences(), strengths, seeds, resolve_layout(cfg).symbols(),
                             [&](std::span<const Sequence> s) { return pipeline.accuracy(s); });
        emit(robustness_csv(curve), pert_out);
        fmt::print(stderr, "k = {}, clean accuracy {:.4f}, empirical slope {:.6f}\n", pipeline.k(),
                   curve.clean_accuracy, curve.empirical_slope);
        return kOk;
    }

    if (eval->parsed()) {
        const auto cfg = eval_f.resolve();
        const auto result = run_eval(eval_manifest, eval_out, cfg);
        std::cout << metrics_to_json(result.metrics) << "\n";
        return kOk;
    }

    if (mc->parsed()) {
        const auto r = mcnemar_test(read_predictions(mc_a), read_predictions(mc_b));
        nlohmann::json j = {{"b", r.b}, {"c", r.c}, {"p_value", r.p_value}, {"method", r.exact ? "exact" : "chi2"}};
        if (!r.diagnostic.empty()) j["diagnostic"] = r.diagnostic;
        std::cout << j.dump(2) << "\n";
        return kOk;
    }
    return kUsage;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const CLI::ValidationError& e) {
        fmt::print(stderr, "usage error: {}\n", e.what());
        return kUsage;
    } catch (const cgrips::InputError& e) {
        fmt::print(stderr, "input error: {}\n", e.what());
        return kInput;
    } catch (const cgrips::IoError& e) {
        fmt::print(stderr, "i/o error: {}\n", e.what());
        return kIo;
    } catch (const std::filesystem::filesystem_error& e) {
        fmt::print(stderr, "i/o error: {}\n", e.what());
        return kIo;
    } catch (const std::exception& e) {
        fmt::print(stderr, "pipeline error: {}\n", e.what());
        return kPipeline;
    }
}
