#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "cgrips/cgr.hpp"
#include "cgrips/error.hpp"
#include "cgrips/random.hpp"
#include "cgrips/rips.hpp"
#include "oracles.hpp"

using namespace cgrips;

namespace {

std::vector<Point2> random_cloud(Rng& rng, std::size_t n) {
    std::vector<Point2> pts;
    for (std::size_t i = 0; i < n; ++i) pts.push_back({2.0 * uniform_unit(rng) - 1.0, 2.0 * uniform_unit(rng) - 1.0});
    return pts;
}

std::set<std::pair<std::size_t, std::size_t>> edge_set(const RipsComplex& c) {
    std::set<std::pair<std::size_t, std::size_t>> out;
    for (const auto& e : c.edges) out.emplace(e.i, e.j);
    return out;
}

PersistenceDiagramH0 diagram(std::vector<PersistencePair> pairs) { return PersistenceDiagramH0{std::move(pairs)}; }

}  // namespace

TEST(DistanceMatrix, ThreeFourFive) {
    const std::vector<Point2> pts{{0, 0}, {3, 4}};
    const auto dm = distance_matrix(pts);
    EXPECT_DOUBLE_EQ(dm(0, 1), 5.0);
    EXPECT_DOUBLE_EQ(dm(1, 0), 5.0);
    EXPECT_DOUBLE_EQ(dm.diameter(), 5.0);
}

TEST(DistanceMatrix, MatchesNaiveLoopAndIsMetric) {
    auto rng = make_rng(1);
    const auto pts = random_cloud(rng, 50);
    const auto dm = distance_matrix(pts);
    const auto naive = oracle::naive_distances(pts);
    for (std::size_t i = 0; i < 50; ++i) {
        EXPECT_EQ(dm(i, i), 0.0);
        for (std::size_t j = 0; j < 50; ++j) {
            ASSERT_EQ(dm(i, j), naive[i][j]);
            ASSERT_EQ(dm(i, j), dm(j, i));
            for (std::size_t k = 0; k < 50; k += 7) ASSERT_LE(dm(i, j), dm(i, k) + dm(k, j) + 1e-9);
        }
    }
}

TEST(RipsComplex, EquilateralTriangleWithinEpsilon) {
    const double h = 0.1 * std::sqrt(3.0) / 2.0;
    const std::vector<Point2> pts{{0, 0}, {0.1, 0}, {0.05, h}};
    const auto dm = distance_matrix(pts);
    const auto plain = rips_complex(dm, 0.3);
    EXPECT_EQ(plain.vertex_count, 3u);
    EXPECT_EQ(plain.edges.size(), 3u);
    EXPECT_FALSE(plain.triangles.has_value());
    const auto filled = rips_complex(dm, 0.3, true);
    ASSERT_TRUE(filled.triangles.has_value());
    ASSERT_EQ(filled.triangles->size(), 1u);
    EXPECT_EQ(filled.triangles->front(), (Triangle{0, 1, 2}));
}

TEST(RipsComplex, ZeroEpsilonHasNoEdges) {
    auto rng = make_rng(2);
    const auto c = rips_complex(distance_matrix(random_cloud(rng, 15)), 0.0);
    EXPECT_EQ(c.vertex_count, 15u);
    EXPECT_TRUE(c.edges.empty());
}

TEST(RipsComplex, BoundaryDistanceIncluded) {
    const std::vector<Point2> pts{{0, 0}, {0.25, 0}};
    EXPECT_EQ(rips_complex(distance_matrix(pts), 0.25).edges.size(), 1u);
    EXPECT_EQ(rips_complex(distance_matrix(pts), std::nextafter(0.25, 0.0)).edges.size(), 0u);
}

TEST(RipsComplex, RejectsBadEpsilon) {
    const auto dm = distance_matrix(std::vector<Point2>{{0, 0}});
    EXPECT_THROW(rips_complex(dm, -0.1), InputError);
    EXPECT_THROW(rips_complex(dm, std::nan("")), InputError);
}

TEST(RipsComplex, MatchesAllPairsOracle) {
    auto rng = make_rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const auto pts = random_cloud(rng, 1 + uniform_below(rng, 12));
        const double eps = 0.05 + 0.45 * uniform_unit(rng);
        const auto c = rips_complex(distance_matrix(pts), eps, true);
        ASSERT_EQ(edge_set(c), oracle::rips_edges(pts, eps));
        ASSERT_TRUE(std::is_sorted(c.edges.begin(), c.edges.end()));
        std::set<std::tuple<std::size_t, std::size_t, std::size_t>> tris;
        for (const auto& t : *c.triangles) tris.emplace(t.i, t.j, t.k);
        ASSERT_EQ(tris, oracle::rips_triangles(pts, eps));
    }
}

TEST(EpsilonSweep, ExtremesAndNesting) {
    auto rng = make_rng(4);
    const auto pts = random_cloud(rng, 20);
    const auto dm = distance_matrix(pts);
    const double eps[] = {0.0, dm.diameter()};
    const auto sweep = epsilon_sweep(dm, eps);
    EXPECT_TRUE(sweep.front().edges.empty());
    EXPECT_EQ(sweep.back().edges.size(), 20u * 19u / 2u);
}

TEST(EpsilonSweep, EachLevelEqualsIndependentComplex) {
    auto rng = make_rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto dm = distance_matrix(random_cloud(rng, 20));
        std::vector<double> eps;
        for (int k = 1; k <= 10; ++k) eps.push_back(0.08 * k);
        const auto sweep = epsilon_sweep(dm, eps, true);
        ASSERT_EQ(sweep.size(), eps.size());
        for (std::size_t k = 0; k < eps.size(); ++k) {
            const auto single = rips_complex(dm, eps[k], true);
            ASSERT_EQ(sweep[k].edges, single.edges);
            ASSERT_EQ(*sweep[k].triangles, *single.triangles);
            ASSERT_EQ(sweep[k].epsilon, eps[k]);
            if (k > 0) {
                const auto prev = edge_set(sweep[k - 1]), cur = edge_set(sweep[k]);
                ASSERT_TRUE(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
            }
        }
    }
}

TEST(EpsilonSweep, RejectsUnorderedThresholds) {
    const auto dm = distance_matrix(std::vector<Point2>{{0, 0}, {0.1, 0}});
    const double repeated[] = {0.1, 0.1};
    const double negative[] = {-0.1, 0.2};
    EXPECT_THROW(epsilon_sweep(dm, repeated), InputError);
    EXPECT_THROW(epsilon_sweep(dm, negative), InputError);
}

TEST(H0Persistence, TwoPoints) {
    const auto d = h0_persistence(distance_matrix(std::vector<Point2>{{0, 0}, {0.4, 0}}));
    ASSERT_EQ(d.pairs.size(), 2u);
    EXPECT_EQ(d.pairs[0], (PersistencePair{0.0, 0.4}));
    EXPECT_TRUE(d.pairs[1].essential());
    EXPECT_EQ(d.essential_count(), 1u);
}

TEST(H0Persistence, SinglePoint) {
    const auto d = h0_persistence(distance_matrix(std::vector<Point2>{{0.2, 0.2}}));
    ASSERT_EQ(d.pairs.size(), 1u);
    EXPECT_TRUE(d.pairs[0].essential());
    EXPECT_EQ(d.pairs[0].birth, 0.0);
}

TEST(H0Persistence, FiniteDeathsAreMstWeights) {
    auto rng = make_rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        const auto pts = random_cloud(rng, 2 + uniform_below(rng, 15));
        const auto d = h0_persistence(distance_matrix(pts));
        std::vector<double> deaths;
        for (const auto& p : d.finite()) {
            EXPECT_EQ(p.birth, 0.0);
            deaths.push_back(p.death);
        }
        ASSERT_EQ(deaths, oracle::mst_weights(pts));
        EXPECT_EQ(d.essential_count(), 1u);
    }
}

TEST(H0Persistence, ComponentCountMatchesFiniteDeaths) {
    auto rng = make_rng(7);
    const auto pts = random_cloud(rng, 25);
    const auto d = h0_persistence(distance_matrix(pts));
    for (double eps : {0.0, 0.05, 0.1, 0.2, 0.5, 3.0}) {
        std::size_t merged = 0;
        for (const auto& p : d.finite()) merged += p.death <= eps;
        EXPECT_EQ(d.components_at(eps), pts.size() - merged);
    }
}

TEST(H0Persistence, DuplicatePointsLeaveNoDiagonalPairs) {
    const auto d = h0_persistence(distance_matrix(std::vector<Point2>{{0, 0}, {0, 0}, {0.5, 0}}));
    ASSERT_EQ(d.finite().size(), 1u);
    EXPECT_DOUBLE_EQ(d.finite()[0].death, 0.5);
    EXPECT_EQ(d.components_at(0.0), 2u);
}

TEST(Bottleneck, IdenticalDiagramsAreAtZero) {
    auto rng = make_rng(8);
    const auto d = h0_persistence(distance_matrix(random_cloud(rng, 10)));
    EXPECT_EQ(bottleneck_distance(d, d), 0.0);
}

TEST(Bottleneck, MatchingBeatsDiagonal) {
    const auto a = diagram({{0, 1.0}, {0, kInfinity}});
    const auto b = diagram({{0, 1.2}, {0, kInfinity}});
    EXPECT_NEAR(bottleneck_distance(a, b), 0.2, 1e-15);
}

TEST(Bottleneck, UnmatchedPointGoesToDiagonal) {
    const auto a = diagram({{0, 0.1}, {0, 0.8}, {0, kInfinity}});
    const auto b = diagram({{0, 0.8}, {0, kInfinity}});
    EXPECT_NEAR(bottleneck_distance(a, b), 0.05, 1e-15);
}

TEST(Bottleneck, EssentialCountsMustAgree) {
    const auto a = diagram({{0, kInfinity}});
    const auto b = diagram({{0, kInfinity}, {0, kInfinity}});
    EXPECT_THROW(bottleneck_distance(a, b), InputError);
}

TEST(Bottleneck, ExhaustiveMatchesBruteForce) {
    auto rng = make_rng(9);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<PersistencePair> a, b;
        const auto na = uniform_below(rng, 7), nb = uniform_below(rng, 7);
        for (std::size_t i = 0; i < na; ++i) a.push_back({0.0, uniform_unit(rng)});
        for (std::size_t i = 0; i < nb; ++i) b.push_back({0.0, uniform_unit(rng)});
        a.push_back({0.0, kInfinity});
        b.push_back({0.0, kInfinity});
        const double expected = oracle::bottleneck_brute_force(a, b);
        ASSERT_NEAR(bottleneck_distance(diagram(a), diagram(b)), expected, 1e-12);
        ASSERT_NEAR(bottleneck_threshold_search(diagram(a).finite(), diagram(b).finite()), expected, 1e-12);
    }
}

TEST(Bottleneck, ThresholdSearchMatchesExhaustiveOnMidSizes) {
    auto rng = make_rng(10);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<PersistencePair> a, b;
        const auto na = 1 + uniform_below(rng, 10), nb = 1 + uniform_below(rng, 10);
        for (std::size_t i = 0; i < na; ++i) a.push_back({0.0, uniform_unit(rng)});
        for (std::size_t i = 0; i < nb; ++i) b.push_back({0.0, uniform_unit(rng)});
        ASSERT_NEAR(bottleneck_exhaustive(a, b), bottleneck_threshold_search(a, b), 1e-12);
    }
}

TEST(Bottleneck, StabilityUnderSupNormPerturbation) {
    auto rng = make_rng(12);
    std::size_t violations = 0;
    for (int trial = 0; trial < 150; ++trial) {
        const auto n = 2 + uniform_below(rng, 19);
        const auto pts = random_cloud(rng, n);
        for (double delta : {0.001, 0.01, 0.05}) {
            auto moved = pts;
            for (auto& p : moved) {
                p.x += delta * (2.0 * uniform_unit(rng) - 1.0);
                p.y += delta * (2.0 * uniform_unit(rng) - 1.0);
            }
            double sup = 0.0;
            for (std::size_t i = 0; i < n; ++i) sup = std::max(sup, norm(moved[i] - pts[i]));
            const double db = bottleneck_distance(h0_persistence(distance_matrix(pts)),
                                                  h0_persistence(distance_matrix(moved)));
            violations += db > 2.0 * sup + 1e-9;
        }
    }
    EXPECT_EQ(violations, 0u);
}

TEST(Export, ComplexJson) {
    const std::vector<Point2> pts{{0, 0}, {0.1, 0}, {0.9, 0}};
    const auto j = nlohmann::json::parse(complex_to_json(rips_complex(distance_matrix(pts), 0.3), pts));
    EXPECT_DOUBLE_EQ(j["epsilon"].get<double>(), 0.3);
    EXPECT_EQ(j["coords"].size(), 3u);
    EXPECT_EQ(j["edges"], nlohmann::json::parse("[[0,1]]"));
    EXPECT_FALSE(j.contains("triangles"));
}

TEST(Export, PersistenceJsonUsesNullForInfinity) {
    const auto j = nlohmann::json::parse(
        persistence_to_json(h0_persistence(distance_matrix(std::vector<Point2>{{0, 0}, {0.4, 0}}))));
    ASSERT_EQ(j.size(), 2u);
    EXPECT_DOUBLE_EQ(j[0][1].get<double>(), 0.4);
    EXPECT_TRUE(j[1][1].is_null());
}

// Regression record for the 24-residue sample on the default layout. The
// values are properties of this layout, frozen from the first run.
TEST(RipsComplex, SampleSequenceStructure) {
    const auto traj = cgr_map("ACDEFGHIKLMNPQRSTVWYAAAA", protein_layout());
    const auto c = rips_complex(distance_matrix(traj), kDefaultEpsilon);
    std::vector<int> degree(c.vertex_count, 0);
    for (const auto& e : c.edges) ++degree[e.i], ++degree[e.j];
    const auto isolated = std::count(degree.begin(), degree.end(), 0);
    EXPECT_EQ(isolated, 0);
    EXPECT_EQ(c.edges.size(), 26u);
}
