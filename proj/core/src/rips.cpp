#include "cgrips/rips.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cgrips/error.hpp"

namespace cgrips {

double DistanceMatrix::diameter() const noexcept {
    return d_.empty() ? 0.0 : *std::ranges::max_element(d_);
}

DistanceMatrix distance_matrix(std::span<const Point2> points) {
    DistanceMatrix dm(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = i + 1; j < points.size(); ++j) {
            const double dx = points[i].x - points[j].x;
            const double dy = points[i].y - points[j].y;
            dm.set(i, j, std::sqrt(dx * dx + dy * dy));
        }
    }
    return dm;
}

DistanceMatrix distance_matrix(const CgrTrajectory& trajectory) {
    return distance_matrix(std::span<const Point2>(trajectory.points));
}

namespace {

void check_epsilon(double epsilon) {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
        throw InputError(fmt::format("epsilon must be finite and >= 0, got {}", epsilon));
}

std::vector<Triangle> triangles_of(const DistanceMatrix& dm, double epsilon) {
    std::vector<Triangle> out;
    const auto n = dm.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            if (dm(i, j) > epsilon) continue;
            for (std::size_t k = j + 1; k < n; ++k)
                if (dm(i, k) <= epsilon && dm(j, k) <= epsilon) out.push_back({i, j, k});
        }
    return out;
}

struct WeightedEdge {
    double weight;
    Edge edge;
};

// All pairs i<j ordered by (weight, i, j).
std::vector<WeightedEdge> sorted_edges(const DistanceMatrix& dm) {
    std::vector<WeightedEdge> edges;
    const auto n = dm.size();
    edges.reserve(n * (n - (n > 0 ? 1 : 0)) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) edges.push_back({dm(i, j), {i, j}});
    std::ranges::sort(edges, [](const WeightedEdge& a, const WeightedEdge& b) {
        if (a.weight != b.weight) return a.weight < b.weight;
        return a.edge < b.edge;
    });
    return edges;
}

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) {
        std::iota(parent_.begin(), parent_.end(), std::size_t{0});
    }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    // Returns false when x and y were already connected.
    bool link(std::size_t x, std::size_t y) {
        x = find(x);
        y = find(y);
        if (x == y) return false;
        if (rank_[x] < rank_[y]) std::swap(x, y);
        parent_[y] = x;
        if (rank_[x] == rank_[y]) ++rank_[x];
        return true;
    }

private:
    std::vector<std::size_t> parent_;
    std::vector<std::uint8_t> rank_;
};

}  // namespace

RipsComplex rips_complex(const DistanceMatrix& dm, double epsilon, bool include_triangles) {
    check_epsilon(epsilon);
    RipsComplex out;
    out.epsilon = epsilon;
    out.vertex_count = dm.size();
    for (std::size_t i = 0; i < dm.size(); ++i)
        for (std::size_t j = i + 1; j < dm.size(); ++j)
            if (dm(i, j) <= epsilon) out.edges.push_back({i, j});
    if (include_triangles) out.triangles = triangles_of(dm, epsilon);
    return out;
}

std::vector<RipsComplex> epsilon_sweep(const DistanceMatrix& dm, std::span<const double> epsilons,
                                       bool include_triangles) {
    for (std::size_t k = 0; k < epsilons.size(); ++k) {
        check_epsilon(epsilons[k]);
        if (k > 0 && !(epsilons[k] > epsilons[k - 1]))
            throw InputError("epsilon sweep thresholds must be strictly ascending");
    }
    const auto by_weight = sorted_edges(dm);
    std::vector<RipsComplex> out;
    out.reserve(epsilons.size());
    std::size_t cut = 0;
    for (double eps : epsilons) {
        while (cut < by_weight.size() && by_weight[cut].weight <= eps) ++cut;
        RipsComplex c;
        c.epsilon = eps;
        c.vertex_count = dm.size();
        c.edges.reserve(cut);
        for (std::size_t e = 0; e < cut; ++e) c.edges.push_back(by_weight[e].edge);
        std::ranges::sort(c.edges);
        if (include_triangles) c.triangles = triangles_of(dm, eps);
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<PersistencePair> PersistenceDiagramH0::finite() const {
    std::vector<PersistencePair> out;
    for (const auto& p : pairs)
        if (!p.essential()) out.push_back(p);
    return out;
}

std::size_t PersistenceDiagramH0::essential_count() const {
    return static_cast<std::size_t>(std::ranges::count_if(pairs, &PersistencePair::essential));
}

std::size_t PersistenceDiagramH0::components_at(double epsilon) const {
    return static_cast<std::size_t>(
        std::ranges::count_if(pairs, [&](const PersistencePair& p) { return p.death > epsilon; }));
}

PersistenceDiagramH0 h0_persistence(const DistanceMatrix& dm) {
    if (dm.size() == 0) throw InputError("h0_persistence needs at least one point");
    PersistenceDiagramH0 out;
    UnionFind components(dm.size());
    std::size_t merges = 0;
    for (const auto& [w, e] : sorted_edges(dm)) {
        if (!components.link(e.i, e.j)) continue;
        if (w > 0.0) out.pairs.push_back({0.0, w});
        if (++merges == dm.size() - 1) break;
    }
    out.pairs.push_back({0.0, kInfinity});
    return out;
}

namespace {

double pair_cost(const PersistencePair& a, const PersistencePair& b) {
    return std::max(std::abs(a.birth - b.birth), std::abs(a.death - b.death));
}

double diagonal_cost(const PersistencePair& p) { return (p.death - p.birth) / 2.0; }

// Kuhn's augmenting-path matching; adjacency is given as a predicate.
template <typename Adjacent>
bool has_perfect_matching(std::size_t n, Adjacent&& adjacent) {
    std::vector<std::ptrdiff_t> match_right(n, -1);
    std::vector<char> visited;
    auto try_left = [&](auto&& self, std::size_t u) -> bool {
        for (std::size_t v = 0; v < n; ++v) {
            if (visited[v] || !adjacent(u, v)) continue;
            visited[v] = 1;
            if (match_right[v] < 0 || self(self, static_cast<std::size_t>(match_right[v]))) {
                match_right[v] = static_cast<std::ptrdiff_t>(u);
                return true;
            }
        }
        return false;
    };
    for (std::size_t u = 0; u < n; ++u) {
        visited.assign(n, 0);
        if (!try_left(try_left, u)) return false;
    }
    return true;
}

}  // namespace

double bottleneck_exhaustive(std::span<const PersistencePair> a, std::span<const PersistencePair> b) {
    if (a.size() < b.size()) std::swap(a, b);  // bitmask runs over the smaller side
    if (b.size() > kExhaustiveBottleneckLimit)
        throw InputError("diagram too large for exhaustive bottleneck matching");
    const std::size_t masks = std::size_t{1} << b.size();
    std::vector<double> dp(masks, kInfinity), next(masks);
    dp[0] = 0.0;
    for (const auto& pa : a) {
        std::ranges::fill(next, kInfinity);
        for (std::size_t mask = 0; mask < masks; ++mask) {
            if (dp[mask] == kInfinity) continue;
            const std::size_t to_diag = mask;
            next[to_diag] = std::min(next[to_diag], std::max(dp[mask], diagonal_cost(pa)));
            for (std::size_t j = 0; j < b.size(); ++j) {
                if (mask & (std::size_t{1} << j)) continue;
                const std::size_t m2 = mask | (std::size_t{1} << j);
                next[m2] = std::min(next[m2], std::max(dp[mask], pair_cost(pa, b[j])));
            }
        }
        dp.swap(next);
    }
    double best = kInfinity;
    for (std::size_t mask = 0; mask < masks; ++mask) {
        if (dp[mask] == kInfinity) continue;
        double cost = dp[mask];
        for (std::size_t j = 0; j < b.size(); ++j)
            if (!(mask & (std::size_t{1} << j))) cost = std::max(cost, diagonal_cost(b[j]));
        best = std::min(best, cost);
    }
    return best;
}

double bottleneck_threshold_search(std::span<const PersistencePair> a,
                                   std::span<const PersistencePair> b) {
    const std::size_t m = a.size(), n = b.size();
    std::vector<double> candidates{0.0};
    for (const auto& p : a) candidates.push_back(diagonal_cost(p));
    for (const auto& q : b) candidates.push_back(diagonal_cost(q));
    for (const auto& p : a)
        for (const auto& q : b) candidates.push_back(pair_cost(p, q));
    std::ranges::sort(candidates);
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    // Left: a_0..a_{m-1}, then diagonal copies of b. Right: b_0..b_{n-1},
    // then diagonal copies of a.
    auto feasible = [&](double t) {
        return has_perfect_matching(m + n, [&](std::size_t u, std::size_t v) {
            if (u < m && v < n) return pair_cost(a[u], b[v]) <= t;
            if (u < m) return v - n == u && diagonal_cost(a[u]) <= t;
            if (v < n) return u - m == v && diagonal_cost(b[v]) <= t;
            return true;
        });
    };

    std::size_t lo = 0, hi = candidates.size() - 1;  // the largest candidate is always feasible
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (feasible(candidates[mid])) hi = mid;
        else lo = mid + 1;
    }
    return candidates[lo];
}

double bottleneck_distance(const PersistenceDiagramH0& a, const PersistenceDiagramH0& b) {
    const auto ea = a.essential_count(), eb = b.essential_count();
    if (ea != eb)
        throw InputError(fmt::format("diagrams have {} and {} essential classes", ea, eb));

    std::vector<double> births_a, births_b;
    for (const auto& p : a.pairs)
        if (p.essential()) births_a.push_back(p.birth);
    for (const auto& p : b.pairs)
        if (p.essential()) births_b.push_back(p.birth);
    std::ranges::sort(births_a);
    std::ranges::sort(births_b);
    double essential = 0.0;
    for (std::size_t k = 0; k < births_a.size(); ++k)
        essential = std::max(essential, std::abs(births_a[k] - births_b[k]));

    const auto fa = a.finite(), fb = b.finite();
    const double finite = std::max(fa.size(), fb.size()) <= kExhaustiveBottleneckLimit
                              ? bottleneck_exhaustive(fa, fb)
                              : bottleneck_threshold_search(fa, fb);
    return std::max(essential, finite);
}

std::string complex_to_json(const RipsComplex& complex, std::span<const Point2> coords) {
    nlohmann::json j;
    j["epsilon"] = complex.epsilon;
    auto& c = j["coords"] = nlohmann::json::array();
    for (const auto& p : coords) c.push_back({p.x, p.y});
    auto& e = j["edges"] = nlohmann::json::array();
    for (const auto& edge : complex.edges) e.push_back({edge.i, edge.j});
    if (complex.triangles) {
        auto& t = j["triangles"] = nlohmann::json::array();
        for (const auto& tri : *complex.triangles) t.push_back({tri.i, tri.j, tri.k});
    }
    return j.dump();
}

std::string persistence_to_json(const PersistenceDiagramH0& diagram) {
    auto j = nlohmann::json::array();
    for (const auto& p : diagram.pairs) {
        if (p.essential()) j.push_back({p.birth, nullptr});
        else j.push_back({p.birth, p.death});
    }
    return j.dump();
}

}  // namespace cgrips
