#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cgrips/cgr.hpp"

namespace cgrips {

inline constexpr double kDefaultEpsilon = 0.3;

// Dense symmetric matrix of Euclidean distances, row-major.
class DistanceMatrix {
public:
    DistanceMatrix() = default;
    explicit DistanceMatrix(std::size_t n) : n_(n), d_(n * n, 0.0) {}

    std::size_t size() const noexcept { return n_; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return d_[i * n_ + j]; }
    void set(std::size_t i, std::size_t j, double v) noexcept {
        d_[i * n_ + j] = v;
        d_[j * n_ + i] = v;
    }
    // Largest entry.
    double diameter() const noexcept;

private:
    std::size_t n_ = 0;
    std::vector<double> d_;
};

DistanceMatrix distance_matrix(std::span<const Point2> points);
DistanceMatrix distance_matrix(const CgrTrajectory& trajectory);

struct Edge {
    std::size_t i;
    std::size_t j;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct Triangle {
    std::size_t i;
    std::size_t j;
    std::size_t k;
    friend auto operator<=>(const Triangle&, const Triangle&) = default;
};

// Vertices are always 0..n-1. Edges (i<j) satisfy d(i,j) <= epsilon and are
// sorted lexicographically; triangles are filled only on request.
struct RipsComplex {
    double epsilon = 0.0;
    std::size_t vertex_count = 0;
    std::vector<Edge> edges;
    std::optional<std::vector<Triangle>> triangles;
};

RipsComplex rips_complex(const DistanceMatrix& dm, double epsilon, bool include_triangles = false);

// One complex per threshold; thresholds must be strictly ascending and >= 0.
std::vector<RipsComplex> epsilon_sweep(const DistanceMatrix& dm, std::span<const double> epsilons,
                                       bool include_triangles = false);

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct PersistencePair {
    double birth = 0.0;
    double death = kInfinity;
    bool essential() const noexcept { return death == kInfinity; }
    friend bool operator==(const PersistencePair&, const PersistencePair&) = default;
};

// H0 diagram of the Rips filtration. Finite pairs are listed by non-decreasing
// death; the single essential class comes last.
struct PersistenceDiagramH0 {
    std::vector<PersistencePair> pairs;

    std::vector<PersistencePair> finite() const;
    std::size_t essential_count() const;
    // Number of connected components of the complex at threshold epsilon.
    std::size_t components_at(double epsilon) const;
};

// Single-linkage union-find over edges sorted by (weight, i, j). Merges at
// weight zero (coincident points) sit on the diagonal and are not reported.
PersistenceDiagramH0 h0_persistence(const DistanceMatrix& dm);

// Bottleneck distance under the sup norm, matching points to each other or to
// their diagonal projections; essential classes are matched by fiat at cost
// |birth_a - birth_b|. Throws InputError when essential counts differ.
double bottleneck_distance(const PersistenceDiagramH0& a, const PersistenceDiagramH0& b);

// The two computation routes behind bottleneck_distance, exposed for testing:
// a bitmask min-max assignment (finite parts of size <= 12) and binary search
// over candidate thresholds with a perfect-matching test.
double bottleneck_exhaustive(std::span<const PersistencePair> a, std::span<const PersistencePair> b);
double bottleneck_threshold_search(std::span<const PersistencePair> a,
                                   std::span<const PersistencePair> b);

inline constexpr std::size_t kExhaustiveBottleneckLimit = 12;

// {"epsilon": e, "coords": [[x,y]...], "edges": [[i,j]...], "triangles"?: [[i,j,k]...]}
std::string complex_to_json(const RipsComplex& complex, std::span<const Point2> coords);
// [[birth, death]...] with null for an infinite death.
std::string persistence_to_json(const PersistenceDiagramH0& diagram);

}  // namespace cgrips
