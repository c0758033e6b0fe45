#include "cgrips/cgr.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cgrips/error.hpp"

namespace cgrips {

double norm(Point2 p) { return std::sqrt(p.x * p.x + p.y * p.y); }

namespace {

bool in_unit_box(Point2 p) {
    return std::isfinite(p.x) && std::isfinite(p.y) && std::abs(p.x) <= 1.0 &&
           std::abs(p.y) <= 1.0;
}

}  // namespace

AlphabetLayout::AlphabetLayout(std::string symbols, std::vector<Point2> coords, double alpha,
                               Point2 origin)
    : symbols_(std::move(symbols)), coords_(std::move(coords)), alpha_(alpha), origin_(origin) {
    if (symbols_.empty()) throw InputError("alphabet layout has no symbols");
    if (symbols_.size() != coords_.size())
        throw InputError(fmt::format("layout has {} symbols but {} coordinates", symbols_.size(),
                                     coords_.size()));
    if (!(alpha_ > 0.0 && alpha_ < 1.0))
        throw InputError(fmt::format("alpha must lie strictly inside (0,1), got {}", alpha_));
    if (!in_unit_box(origin_)) throw InputError("layout origin must lie in [-1,1]^2");

    index_.fill(-1);
    for (std::size_t k = 0; k < symbols_.size(); ++k) {
        const auto slot = static_cast<unsigned char>(symbols_[k]);
        if (index_[slot] != -1)
            throw InputError(fmt::format("symbol '{}' appears twice in layout", symbols_[k]));
        if (!in_unit_box(coords_[k]))
            throw InputError(
                fmt::format("attractor for '{}' must lie in [-1,1]^2", symbols_[k]));
        index_[slot] = static_cast<int>(k);
    }

    min_separation_ = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < coords_.size(); ++i) {
        for (std::size_t j = i + 1; j < coords_.size(); ++j) {
            const double d = norm(coords_[i] - coords_[j]);
            if (d == 0.0)
                throw InputError(fmt::format("symbols '{}' and '{}' share an attractor",
                                             symbols_[i], symbols_[j]));
            min_separation_ = std::min(min_separation_, d);
        }
    }
    if (coords_.size() == 1) min_separation_ = 0.0;
}

std::optional<std::size_t> AlphabetLayout::index_of(char symbol) const noexcept {
    const int k = index_[static_cast<unsigned char>(symbol)];
    if (k < 0) return std::nullopt;
    return static_cast<std::size_t>(k);
}

Point2 AlphabetLayout::attractor(char symbol) const {
    const auto k = index_of(symbol);
    if (!k) throw InputError(fmt::format("symbol '{}' has no attractor in the layout", symbol));
    return coords_[*k];
}

AlphabetLayout AlphabetLayout::restricted_to(std::string_view subset) const {
    std::vector<Point2> coords;
    coords.reserve(subset.size());
    for (char s : subset) coords.push_back(attractor(s));
    return AlphabetLayout(std::string(subset), std::move(coords), alpha_, origin_);
}

AlphabetLayout AlphabetLayout::with_alpha(double alpha) const {
    return AlphabetLayout(symbols_, coords_, alpha, origin_);
}

AlphabetLayout protein_layout(double alpha) {
    constexpr auto n = kProteinSymbols.size();
    std::vector<Point2> coords;
    coords.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
        coords.push_back({std::cos(angle), std::sin(angle)});
    }
    return AlphabetLayout(std::string(kProteinSymbols), std::move(coords), alpha, Point2{0.0, 0.0});
}

AlphabetLayout parse_layout_json(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(fmt::format("layout file is not valid JSON: {}", e.what()));
    }
    if (!doc.is_object()) throw InputError("layout file must hold a JSON object");

    auto read_point = [](const nlohmann::json& v, const std::string& key) {
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
            throw InputError(fmt::format("layout entry '{}' must be [x, y]", key));
        return Point2{v[0].get<double>(), v[1].get<double>()};
    };

    if (!doc.contains("alpha") || !doc["alpha"].is_number())
        throw InputError("layout file needs a numeric 'alpha'");
    const double alpha = doc["alpha"].get<double>();
    Point2 origin{};
    std::string symbols;
    std::vector<Point2> coords;
    for (const auto& [key, value] : doc.items()) {
        if (key == "alpha") continue;
        if (key == "origin") {
            origin = read_point(value, key);
            continue;
        }
        if (key.size() != 1)
            throw InputError(fmt::format("layout key '{}' is not a single symbol", key));
        symbols.push_back(key[0]);
        coords.push_back(read_point(value, key));
    }
    return AlphabetLayout(std::move(symbols), std::move(coords), alpha, origin);
}

AlphabetLayout load_layout_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot read layout file {}", path.string()));
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_layout_json(buffer.str());
}

CgrTrajectory cgr_map(std::string_view residues, const AlphabetLayout& layout,
                      std::string source_id) {
    CgrTrajectory out;
    out.source_id = std::move(source_id);
    out.points.reserve(residues.size());
    const double alpha = layout.alpha();
    const double pull = 1.0 - alpha;
    Point2 p = layout.origin();
    for (char s : residues) {
        const Point2 c = layout.attractor(s);
        p = {alpha * p.x + pull * c.x, alpha * p.y + pull * c.y};
        out.points.push_back(p);
    }
    return out;
}

Point2 final_point(const CgrTrajectory& trajectory) {
    if (trajectory.points.empty()) throw InputError("final_point of an empty trajectory");
    return trajectory.points.back();
}

}  // namespace cgrips
