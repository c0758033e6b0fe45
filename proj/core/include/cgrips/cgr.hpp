#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cgrips {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
double norm(Point2 p);

// The 20 standard amino acids in alphabetical one-letter order.
inline constexpr std::string_view kProteinSymbols = "ACDEFGHIKLMNPQRSTVWY";
inline constexpr double kDefaultAlpha = 0.5;

// Fixed attractor geometry for a finite alphabet plus the contraction factor.
// Construction validates: alpha in (0,1), coordinates and origin inside
// [-1,1]^2, attractors pairwise distinct, symbols unique.
class AlphabetLayout {
public:
    AlphabetLayout(std::string symbols, std::vector<Point2> coords, double alpha,
                   Point2 origin = {});

    const std::string& symbols() const noexcept { return symbols_; }
    std::span<const Point2> coords() const noexcept { return coords_; }
    double alpha() const noexcept { return alpha_; }
    Point2 origin() const noexcept { return origin_; }
    std::size_t size() const noexcept { return symbols_.size(); }

    // Smallest pairwise distance between two attractors.
    double min_separation() const noexcept { return min_separation_; }

    bool contains(char symbol) const noexcept { return index_of(symbol).has_value(); }
    std::optional<std::size_t> index_of(char symbol) const noexcept;
    // Throws InputError when the symbol has no attractor.
    Point2 attractor(char symbol) const;

    // Same geometry restricted to `subset` (in the given order).
    AlphabetLayout restricted_to(std::string_view subset) const;
    AlphabetLayout with_alpha(double alpha) const;

private:
    std::string symbols_;
    std::vector<Point2> coords_;
    double alpha_;
    Point2 origin_;
    double min_separation_ = 0.0;
    std::array<int, 256> index_{};
};

// The 20 amino acids on the vertices of a regular 20-gon inscribed in the
// unit circle, symbol k at angle 2*pi*k/20, origin at the centre.
AlphabetLayout protein_layout(double alpha = kDefaultAlpha);

// Layout file: {"alpha": a, "origin": [x, y]?, "A": [x, y], "C": [x, y], ...}.
// Symbol order follows the sorted keys.
AlphabetLayout load_layout_file(const std::filesystem::path& path);
AlphabetLayout parse_layout_json(std::string_view text);

struct CgrTrajectory {
    std::vector<Point2> points;
    std::string source_id;
};

// p_i = alpha * p_{i-1} + (1 - alpha) * c(s_i), starting from layout.origin().
CgrTrajectory cgr_map(std::string_view residues, const AlphabetLayout& layout,
                      std::string source_id = {});

// Last point p_n. Throws InputError for an empty trajectory.
Point2 final_point(const CgrTrajectory& trajectory);

}  // namespace cgrips
