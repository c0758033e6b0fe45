#include "cgrips/perturb.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "cgrips/error.hpp"
#include "cgrips/random.hpp"

namespace cgrips {

std::size_t sigma_l1(const PerturbationSpec& spec, std::size_t original_length) {
    std::size_t removed = 0;
    if (spec.truncate_to && *spec.truncate_to < original_length) removed = original_length - *spec.truncate_to;
    return spec.mutations + spec.indels + removed;
}

std::string perturb(std::string_view residues, const PerturbationSpec& spec, std::string_view alphabet) {
    if (residues.empty()) throw InputError("cannot perturb an empty sequence");
    if (spec.truncate_to && *spec.truncate_to == 0) throw InputError("truncation to length 0");
    std::string out(residues.substr(0, std::min(residues.size(), spec.truncate_to.value_or(residues.size()))));
    if (spec.indels >= out.size())
        throw InputError(fmt::format("{} indels could delete all {} residues", spec.indels, out.size()));
    if ((spec.indels > 0 || spec.mutations > 0) && alphabet.empty())
        throw InputError("perturbation needs a non-empty alphabet");
    if (spec.mutations > 0 && alphabet.size() < 2) throw InputError("mutation needs at least two symbols");

    Rng rng = make_rng(spec.seed);
    for (std::size_t e = 0; e < spec.indels; ++e) {
        if (rng() & 1u) {
            const auto at = uniform_below(rng, out.size() + 1);
            out.insert(out.begin() + static_cast<std::ptrdiff_t>(at), alphabet[uniform_below(rng, alphabet.size())]);
        } else {
            out.erase(out.begin() + static_cast<std::ptrdiff_t>(uniform_below(rng, out.size())));
        }
    }
    for (std::size_t m = 0; m < spec.mutations; ++m) {
        const auto at = uniform_below(rng, out.size());
        const char current = out[at];
        // Draw among the symbols other than the current one; a residue outside
        // the alphabet may become any symbol.
        const auto pos = alphabet.find(current);
        if (pos == std::string_view::npos) {
            out[at] = alphabet[uniform_below(rng, alphabet.size())];
        } else {
            auto k = uniform_below(rng, alphabet.size() - 1);
            if (k >= pos) ++k;
            out[at] = alphabet[k];
        }
    }
    return out;
}

Sequence perturb(const Sequence& seq, const PerturbationSpec& spec, std::string_view alphabet) {
    return Sequence{seq.id, perturb(seq.residues, spec, alphabet), seq.label};
}

RobustnessCurve robustness_curve(std::span<const Sequence> test, std::span<const PerturbationSpec> strengths,
                                 std::span<const std::uint64_t> trial_seeds, std::string_view alphabet,
                                 const AccuracyFn& accuracy) {
    if (strengths.empty()) throw InputError("robustness curve needs at least one strength");
    if (trial_seeds.empty()) throw InputError("robustness curve needs at least one trial seed");
    if (test.empty()) throw InputError("robustness curve needs test sequences");

    RobustnessCurve curve;
    curve.clean_accuracy = accuracy(test);
    for (const auto& strength : strengths) {
        RobustnessSummary summary;
        for (const auto trial : trial_seeds) {
            std::vector<Sequence> perturbed;
            perturbed.reserve(test.size());
            double l1 = 0.0;
            for (std::size_t i = 0; i < test.size(); ++i) {
                PerturbationSpec spec = strength;
                spec.seed = trial ^ static_cast<std::uint64_t>(i);
                perturbed.push_back(perturb(test[i], spec, alphabet));
                l1 += static_cast<double>(sigma_l1(spec, test[i].residues.size()));
            }
            RobustnessRow row{l1 / static_cast<double>(test.size()), trial, accuracy(perturbed)};
            summary.sigma_l1 += row.sigma_l1;
            summary.mean_accuracy += row.accuracy;
            curve.rows.push_back(row);
        }
        summary.sigma_l1 /= static_cast<double>(trial_seeds.size());
        summary.mean_accuracy /= static_cast<double>(trial_seeds.size());
        if (summary.sigma_l1 > 0.0)
            curve.empirical_slope = std::max(
                curve.empirical_slope, std::abs(summary.mean_accuracy - curve.clean_accuracy) / summary.sigma_l1);
        curve.summary.push_back(summary);
    }
    return curve;
}

std::string robustness_csv(const RobustnessCurve& curve) {
    std::string out = "sigma_l1,trial_seed,accuracy\n";
    for (const auto& r : curve.rows) out += fmt::format("{},{},{}\n", r.sigma_l1, r.trial_seed, r.accuracy);
    return out;
}

}  // namespace cgrips
