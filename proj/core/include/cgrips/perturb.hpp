#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cgrips/seqio.hpp"

namespace cgrips {

// Counts of each perturbation kind. Each indel event is an insertion or a
// deletion with equal probability.
struct PerturbationSpec {
    std::size_t mutations = 0;
    std::size_t indels = 0;
    std::optional<std::size_t> truncate_to;
    std::uint64_t seed = 0;
};

// mutations + indels + (residues removed by truncation).
std::size_t sigma_l1(const PerturbationSpec& spec, std::size_t original_length);

// Applies truncation, then indels, then point mutations; all positions and
// symbols come from a generator seeded with spec.seed. Insertions draw a
// uniform symbol from `alphabet`; a mutation always changes the symbol,
// drawing uniformly from the other alphabet symbols. Throws InputError when
// the spec could empty the sequence (truncate_to == 0, or more indels than
// residues left after truncation) or the alphabet is too small to mutate.
std::string perturb(std::string_view residues, const PerturbationSpec& spec, std::string_view alphabet);
Sequence perturb(const Sequence& seq, const PerturbationSpec& spec, std::string_view alphabet);

// Maps a batch of (possibly perturbed) test sequences to an accuracy.
using AccuracyFn = std::function<double(std::span<const Sequence>)>;

struct RobustnessRow {
    double sigma_l1 = 0.0;  // mean over the perturbed sequences
    std::uint64_t trial_seed = 0;
    double accuracy = 0.0;
};

struct RobustnessSummary {
    double sigma_l1 = 0.0;
    double mean_accuracy = 0.0;
};

struct RobustnessCurve {
    double clean_accuracy = 0.0;
    std::vector<RobustnessRow> rows;          // strength-major, then trial
    std::vector<RobustnessSummary> summary;   // one per strength
    // max |mean_accuracy - clean_accuracy| / sigma_l1 over strengths with
    // sigma_l1 > 0; zero when there are none.
    double empirical_slope = 0.0;
};

// For every strength template and trial seed, perturbs each test sequence
// with seed (trial_seed ^ sequence index) and evaluates `accuracy`.
RobustnessCurve robustness_curve(std::span<const Sequence> test, std::span<const PerturbationSpec> strengths,
                                 std::span<const std::uint64_t> trial_seeds, std::string_view alphabet,
                                 const AccuracyFn& accuracy);

// sigma_l1,trial_seed,accuracy
std::string robustness_csv(const RobustnessCurve& curve);

}  // namespace cgrips
