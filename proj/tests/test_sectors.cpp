#include "marketstruct/sectors.hpp"

#include "oracles.hpp"

#include <catch_amalgamated.hpp>

using namespace marketstruct;

namespace {

DistanceMatrix random_distances(std::size_t n, std::uint64_t seed, bool integer = false) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.1, 5.0);
    std::uniform_int_distribution<int> k(1, 3);
    DistanceMatrix d;
    d.values = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) d.labels.push_back(std::string(1, static_cast<char>('a' + (n - 1 - i))) + "_s");
    for (Eigen::Index i = 0; i < d.values.rows(); ++i)
        for (Eigen::Index j = i + 1; j < d.values.cols(); ++j) d.values(i, j) = d.values(j, i) = integer ? k(rng) : u(rng);
    return d;
}

std::set<std::size_t> leaves(const Dendrogram& dg, std::size_t id) {
    const auto n = dg.labels.size();
    if (id < n) return {id};
    auto a = leaves(dg, dg.merges[id - n].a);
    auto b = leaves(dg, dg.merges[id - n].b);
    a.insert(b.begin(), b.end());
    return a;
}

} // namespace

TEST_CASE("linkage names round trip", "[sectors]") {
    for (auto l : {Linkage::average, Linkage::single, Linkage::complete}) CHECK(linkage_from_string(to_string(l)) == l);
    CHECK_THROWS(linkage_from_string("ward"));
}

TEST_CASE("four-point example under every linkage", "[sectors]") {
    DistanceMatrix d;
    d.labels = {"a", "b", "c", "d"};
    d.values.resize(4, 4);
    d.values << 0, 1, 4, 5,
                1, 0, 3, 6,
                4, 3, 0, 2,
                5, 6, 2, 0;
    const auto avg = agglomerative_cluster(d, Linkage::average);
    REQUIRE(avg.merges.size() == 3);
    CHECK(avg.merges[0].height == 1.0);
    CHECK(avg.merges[1].height == 2.0);
    CHECK(avg.merges[2].height == Catch::Approx(4.5));
    CHECK(agglomerative_cluster(d, Linkage::single).merges[2].height == 3.0);
    CHECK(agglomerative_cluster(d, Linkage::complete).merges[2].height == 6.0);
    CHECK(avg.merges[2].size == 4);
    CHECK(avg.leaf_order() == std::vector<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("clustering matches a naive recomputation", "[sectors]") {
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
        const bool ties = seed % 3 == 0;
        const auto d = random_distances(7 + seed % 4, seed, ties);
        for (const char* name : {"average", "single", "complete"}) {
            const auto dg = agglomerative_cluster(d, linkage_from_string(name));
            const auto ref = oracle::naive_cluster(d.values, d.labels, name);
            REQUIRE(dg.merges.size() == ref.size());
            for (std::size_t k = 0; k < ref.size(); ++k) {
                CHECK(std::abs(dg.merges[k].height - ref[k].height) < 1e-12);
                CHECK(leaves(dg, d.labels.size() + k) == ref[k].members);
            }
        }
    }
}

TEST_CASE("single linkage heights are the minimum spanning tree weights", "[sectors][property]") {
    for (std::uint64_t seed = 20; seed < 26; ++seed) {
        const auto d = random_distances(9, seed);
        const auto dg = agglomerative_cluster(d, Linkage::single);
        const auto mst = oracle::mst_weights(d.values);
        for (std::size_t k = 0; k < mst.size(); ++k) CHECK(std::abs(dg.merges[k].height - mst[k]) < 1e-12);
    }
}

TEST_CASE("merge heights are monotone and results do not depend on input order", "[sectors][property]") {
    const auto d = random_distances(10, 99);
    std::vector<std::size_t> perm(10);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937(5));
    DistanceMatrix shuffled;
    shuffled.values.resize(10, 10);
    for (std::size_t i = 0; i < 10; ++i) {
        shuffled.labels.push_back(d.labels[perm[i]]);
        for (std::size_t j = 0; j < 10; ++j)
            shuffled.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                d.values(static_cast<Eigen::Index>(perm[i]), static_cast<Eigen::Index>(perm[j]));
    }
    for (auto l : {Linkage::average, Linkage::single, Linkage::complete}) {
        const auto a = agglomerative_cluster(d, l);
        const auto b = agglomerative_cluster(shuffled, l);
        for (std::size_t k = 1; k < a.merges.size(); ++k) CHECK(a.merges[k].height >= a.merges[k - 1].height - 1e-12);
        for (std::size_t k = 0; k < a.merges.size(); ++k) {
            CHECK(a.merges[k].height == Catch::Approx(b.merges[k].height).epsilon(1e-12));
            std::set<std::string> la, lb;
            for (auto i : leaves(a, 10 + k)) la.insert(d.labels[i]);
            for (auto i : leaves(b, 10 + k)) lb.insert(shuffled.labels[i]);
            CHECK(la == lb);
        }
    }
}

TEST_CASE("equal distances merge the alphabetically first pair", "[sectors]") {
    DistanceMatrix d;
    d.labels = {"delta", "beta", "alpha", "gamma"};
    d.values = Matrix::Constant(4, 4, 1.0);
    d.values.diagonal().setZero();
    const auto dg = agglomerative_cluster(d, Linkage::average);
    CHECK(leaves(dg, 4) == std::set<std::size_t>{1, 2});
    CHECK(leaves(dg, 5) == std::set<std::size_t>{0, 1, 2});
    CHECK(dg.merges[0].a == 2);
    CHECK(dg.merges[0].b == 1);
}

TEST_CASE("clustering rejects malformed matrices", "[sectors]") {
    DistanceMatrix d;
    d.labels = {"x"};
    d.values = Matrix::Zero(1, 1);
    CHECK_THROWS(agglomerative_cluster(d));
    d.labels = {"x", "y"};
    CHECK_THROWS(agglomerative_cluster(d));
    d.values = Matrix::Zero(2, 2);
    d.values(0, 1) = d.values(1, 0) = std::nan("");
    CHECK_THROWS(agglomerative_cluster(d));
}

TEST_CASE("variance paths and their distance", "[sectors]") {
    const auto panel = oracle::sector_panel(260, 3);
    const auto parts = sector_partition(panel);
    REQUIRE(parts.size() == 3);
    const auto paths = variance_paths(parts, 120);
    REQUIRE(paths.size() == 3);
    for (const auto& p : paths) {
        CHECK(p.times.size() == 260 - 120 + 1);
        for (double v : p.values) {
            CHECK(v >= 1.0 / 3.0 - 1e-12);
            CHECK(v <= 1.0 + 1e-12);
        }
    }
    const auto d = path_distance_matrix(paths);
    CHECK(d.labels == std::vector<std::string>{"sector_A", "sector_B", "sector_C"});
    CHECK(d.values.diagonal().isZero(0.0));
    CHECK((d.values - d.values.transpose()).cwiseAbs().maxCoeff() == 0.0);
    for (Eigen::Index i = 0; i < 3; ++i)
        for (Eigen::Index j = 0; j < 3; ++j)
            for (Eigen::Index k = 0; k < 3; ++k) CHECK(d.values(i, k) <= d.values(i, j) + d.values(j, k) + 1e-12);

    double manual = 0;
    for (std::size_t i = 0; i < paths[0].values.size(); ++i) manual += std::abs(paths[0].values[i] - paths[2].values[i]);
    CHECK(std::abs(d.values(0, 2) - manual / static_cast<double>(paths[0].values.size())) < 1e-14);

    std::map<std::string, ReturnsPanel> lonely{{"solo", select_columns(panel, std::vector<std::size_t>{0})}};
    CHECK_THROWS(variance_paths(lonely, 120));
    VariancePath shorter = paths[1];
    shorter.values.pop_back();
    shorter.times.pop_back();
    CHECK_THROWS(l1_path_distance(paths[0], shorter));
}
