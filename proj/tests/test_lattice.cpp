#include "qbsde/lattice.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace qbsde;

TEST_CASE("layer sizes and weights") {
    const LatticeModel a(TimeGrid(1.0, 2), 1);
    CHECK(a.layer_size(0) == 1);
    CHECK(a.layer_size(1) == 2);
    CHECK(a.layer_size(2) == 3);
    const LatticeModel b(TimeGrid(1.0, 1), 2);
    CHECK(b.layer_size(0) == 1);
    CHECK(b.layer_size(1) == 4);
    for (int d = 1; d <= 3; ++d) {
        const LatticeModel l(TimeGrid(1.0, 3), d);
        CHECK(l.child_weight() * l.children() == 1.0);
        CHECK(l.total_nodes() == 1 + std::pow(2, d) + std::pow(3, d) + std::pow(4, d));
    }
    std::vector<double> w(2);
    b.brownian_state(0, 0, w);
    CHECK(w == std::vector<double>{0, 0});
}

TEST_CASE("node budget") {
    CHECK_THROWS_AS(LatticeModel(TimeGrid(1.0, 200), 3, 1'000'000), NodeBudgetError);
    CHECK_NOTHROW(LatticeModel(TimeGrid(1.0, 40), 3, 1'000'000)); // 861^2 nodes
    CHECK_THROWS_AS(LatticeModel(TimeGrid(1.0, 5), 0), ParameterRangeError);
}

TEST_CASE("indexing round-trips and children recombine") {
    const LatticeModel l(TimeGrid(1.0, 6), 3);
    std::vector<int> up(3);
    std::array<std::size_t, 8> kids{};
    for (int k = 0; k < 6; ++k)
        for (std::size_t i = 0; i < l.layer_size(k); ++i) {
            l.up_counts(k, i, up);
            CHECK(l.index_of(k, up) == i);
            l.child_indices(k, i, kids);
            std::vector<int> cu(3);
            for (int c = 0; c < 8; ++c) {
                l.up_counts(k + 1, kids[c], cu);
                for (int j = 0; j < 3; ++j) {
                    const int moved = cu[j] - up[j];
                    CHECK(moved == (l.child_increment(c, j) > 0 ? 1 : 0));
                }
            }
        }
}

TEST_CASE("projection examples") {
    const LatticeModel l1(TimeGrid(1.0, 1), 1);
    // Layer-1 node 0 is the down move, node 1 the up move.
    const Projection p = project(l1, 0, std::vector<double>{-1, 1}, 1);
    CHECK(p.cond[0] == 0.0);
    CHECK(p.z[0] == 1.0);

    const Projection c = project(l1, 0, std::vector<double>{2.5, 2.5}, 1);
    CHECK(c.cond[0] == 2.5);
    CHECK(c.z[0] == 0.0);

    const LatticeModel l2(TimeGrid(1.0, 1), 2);
    // Value = sign of the first component's increment.
    const Projection q = project(l2, 0, std::vector<double>{-1, -1, 1, 1}, 1);
    CHECK(q.cond[0] == 0.0);
    CHECK(q.z[0] == 1.0);
    CHECK(q.z[1] == 0.0);

    CHECK_THROWS_AS(project(l1, 1, std::vector<double>{0, 0, 0}, 1), std::out_of_range);
    CHECK_THROWS_AS(project(l1, 0, std::vector<double>{0, 0, 0}, 1), std::invalid_argument);
    const LatticeModel flat(TimeGrid(0.0, 1), 1);
    CHECK_THROWS_AS(project(flat, 0, std::vector<double>{1, 1}, 1), ParameterRangeError);
}

TEST_CASE("optimised and reference projections are bit-identical") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    for (int d = 1; d <= 3; ++d) {
        const LatticeModel l(TimeGrid(0.7, 9), d);
        for (int k : {0, 4, 8}) {
            for (int width : {1, 3}) {
                std::vector<double> v(l.layer_size(k + 1) * width);
                for (double& x : v) x = nd(rng);
                const Projection a = project(l, k, v, width, ExecPolicy::Parallel);
                const Projection s = project(l, k, v, width, ExecPolicy::Serial);
                const Projection r = reference::project(l, k, v, width);
                CHECK(a.cond == r.cond);
                CHECK(a.z == r.z);
                CHECK(s.cond == a.cond);
                CHECK(s.z == a.z);
            }
        }
    }
}

TEST_CASE("tower property") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd;
    const LatticeModel l(TimeGrid(1.0, 6), 2);
    const int k = 2;
    std::vector<double> v(l.layer_size(k + 2));
    for (double& x : v) x = nd(rng);
    const Projection mid = project(l, k + 1, v, 1);
    const Projection twice = project(l, k, mid.cond, 1);

    std::array<std::size_t, 4> c1{}, c2{};
    for (std::size_t i = 0; i < l.layer_size(k); ++i) {
        l.child_indices(k, i, c1);
        double direct = 0.0;
        for (int a = 0; a < 4; ++a) {
            l.child_indices(k + 1, c1[a], c2);
            double inner = 0.0;
            for (int b = 0; b < 4; ++b) inner += 0.25 * v[c2[b]];
            direct += 0.25 * inner;
        }
        CHECK(std::abs(twice.cond[i] - direct) <= 1e-14);
    }
}

TEST_CASE("martingale representation reproduces child values exactly in d = 1") {
    // Y_{k+1} = E + Z dW holds node-wise for the binomial tree.
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd;
    const LatticeModel l(TimeGrid(2.0, 7), 1);
    std::vector<double> v(l.layer_size(5));
    for (double& x : v) x = nd(rng);
    const Projection p = project(l, 4, v, 1);
    std::array<std::size_t, 2> kids{};
    for (std::size_t i = 0; i < l.layer_size(4); ++i) {
        l.child_indices(4, i, kids);
        for (int c = 0; c < 2; ++c)
            CHECK(p.cond[i] + p.z[i] * l.child_increment(c, 0) == doctest::Approx(v[kids[c]]).epsilon(1e-14));
    }
}
