#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "hchc/errors.hpp"
#include "hchc/metrics.hpp"

using namespace hchc;

namespace {

// Minimum over all permutations, lexicographically first on ties.
Assignment brute_assignment(const DenseMatrix& cost) {
    const std::size_t n = cost.rows();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Assignment best;
    best.total_cost = INFINITY;
    do {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += cost(i, perm[i]);
        if (s < best.total_cost) best = Assignment{perm, s};
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

}  // namespace

TEST_CASE("hungarian on small hand cases") {
    const Assignment a = hungarian(DenseMatrix{{4, 1, 3}, {2, 0, 5}, {3, 2, 2}});
    CHECK(a.total_cost == 5.0);
    CHECK(a.column_for_row == std::vector<std::size_t>{1, 0, 2});

    const Assignment id = hungarian(DenseMatrix::identity(4) * -1.0);
    CHECK(id.column_for_row == std::vector<std::size_t>{0, 1, 2, 3});
    CHECK(id.total_cost == -4.0);

    CHECK(hungarian(DenseMatrix{{7}}).column_for_row == std::vector<std::size_t>{0});
    CHECK(hungarian(DenseMatrix()).column_for_row.empty());
    CHECK_THROWS_AS(hungarian(DenseMatrix(2, 3)), InputError);
    CHECK_THROWS_AS(hungarian(DenseMatrix{{0, NAN}, {1, 1}}), InputError);
}

TEST_CASE("hungarian breaks ties lexicographically") {
    CHECK(hungarian(DenseMatrix(3, 3, 1.0)).column_for_row == std::vector<std::size_t>{0, 1, 2});
    // both (0->1, 1->0) and (0->0, 1->1) cost 2
    CHECK(hungarian(DenseMatrix{{1, 1}, {1, 1}}).column_for_row == std::vector<std::size_t>{0, 1});
    CHECK(hungarian(DenseMatrix{{2, 1, 1}, {1, 2, 1}, {1, 1, 2}}).column_for_row ==
          std::vector<std::size_t>{1, 2, 0});
}

TEST_CASE("hungarian agrees with exhaustive search") {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> small(0, 4);
    std::uniform_real_distribution<double> real(-5.0, 5.0);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(trial % 7);
        DenseMatrix cost(n, n);
        // integer costs make ties common
        for (double& v : cost.values()) v = trial % 2 ? small(rng) : real(rng);
        const Assignment fast = hungarian(cost);
        const Assignment slow = brute_assignment(cost);
        CHECK(fast.total_cost == doctest::Approx(slow.total_cost).epsilon(1e-12));
        CHECK(fast.column_for_row == slow.column_for_row);
    }
}

TEST_CASE("confusion matrix is square and zero padded") {
    const auto m = confusion_matrix({0, 0, 2}, {1, 1, 0});
    CHECK(m.size() == 3);
    CHECK(m[0][1] == 2);
    CHECK(m[2][0] == 1);
    CHECK(m[1][1] == 0);
    CHECK_THROWS_AS(confusion_matrix({0}, {0, 1}), InputError);
    CHECK_THROWS_AS(confusion_matrix({-1}, {0}), InputError);
}

TEST_CASE("accuracy") {
    CHECK(acc({0, 0, 1, 1}, {1, 1, 0, 0}) == 1.0);
    CHECK(acc({0, 0, 1}, {0, 1, 1}) == doctest::Approx(2.0 / 3.0));
    CHECK(acc({0, 0, 0, 0}, {0, 1, 2, 3}) == 0.25);
    // more predicted clusters than true ones
    CHECK(acc({0, 1, 2, 3}, {0, 0, 1, 1}) == 0.5);
    CHECK_THROWS_AS(acc({}, {}), InputError);
}

TEST_CASE("NMI") {
    CHECK(nmi({0, 0, 1, 1, 2}, {2, 2, 0, 0, 1}) == 1.0);
    CHECK(nmi({0, 0, 0}, {0, 0, 0}) == 1.0);
    CHECK(nmi({0, 0, 0, 0}, {0, 1, 0, 1}) == 0.0);
    // 2x2 independent design: exactly zero mutual information
    CHECK(nmi({0, 0, 1, 1}, {0, 1, 0, 1}) == doctest::Approx(0.0).epsilon(1e-15));

    // hand-computed: pred {0,0,1,1}, truth {0,0,0,1}
    const double h_pred = std::log(2.0);
    const double h_truth = -(0.75 * std::log(0.75) + 0.25 * std::log(0.25));
    const double mi = 0.5 * std::log(0.5 / (0.5 * 0.75)) + 0.25 * std::log(0.25 / (0.5 * 0.75)) +
                      0.25 * std::log(0.25 / (0.5 * 0.25));
    CHECK(nmi({0, 0, 1, 1}, {0, 0, 0, 1}) == doctest::Approx(mi / std::sqrt(h_pred * h_truth)).epsilon(1e-14));
}

TEST_CASE("metrics of permuted truth are exactly 1, random labels are near chance") {
    std::mt19937_64 rng(7);
    Labels truth(10000);
    for (std::size_t i = 0; i < truth.size(); ++i) truth[i] = static_cast<int>(i % 10);
    const std::vector<int> perm{3, 7, 1, 0, 9, 2, 8, 5, 4, 6};
    Labels permuted(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) permuted[i] = perm[static_cast<std::size_t>(truth[i])];
    CHECK(acc(permuted, truth) == 1.0);
    CHECK(nmi(permuted, truth) == 1.0);

    std::uniform_int_distribution<int> label(0, 9);
    Labels random(truth.size());
    for (int& l : random) l = label(rng);
    const double a = acc(random, truth);
    CHECK(a >= 0.08);
    CHECK(a <= 0.13);
    CHECK(nmi(random, truth) < 0.01);
}
