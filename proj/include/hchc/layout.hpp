#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hchc/gldc.hpp"
#include "hchc/matrix.hpp"

namespace hchc {

/// Symmetric c x c cluster similarity with unit diagonal, entries in [-1, 1].
struct SimilarityMatrix {
    DenseMatrix values;
    /// Clusters whose probability column has zero variance; their
    /// off-diagonal similarity is defined as 0.
    std::vector<std::size_t> degenerate_columns;

    std::size_t size() const noexcept { return values.rows(); }
    double operator()(std::size_t i, std::size_t j) const noexcept { return values(i, j); }
};

/// A Hamiltonian cycle over cluster ids in canonical form: it starts at the
/// smallest id and order[1] < order.back() (for c >= 3).
struct CycleOrder {
    std::vector<std::size_t> order;
    double total_cost = 0.0;  // consecutive edges plus the closing edge

    std::size_t size() const noexcept { return order.size(); }
};

enum class CycleSolver { Exact, Greedy };

std::string_view to_string(CycleSolver s) noexcept;

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

struct LayoutParams {
    double gamma_exponent = 1.0;
    double radius = 1.0;
    std::size_t exact_cycle_max = 16;
    double outlier_threshold = 0.5;

    /// Throws ConfigError naming the key.
    void validate() const;

    friend bool operator==(const LayoutParams&, const LayoutParams&) = default;
};

/// Largest exact_cycle_max accepted; the DP table grows as c * 2^c.
inline constexpr std::size_t kMaxExactCycle = 20;

struct CircularLayout {
    double radius = 1.0;
    CycleOrder cycle;
    CycleSolver solver = CycleSolver::Exact;
    std::vector<double> anchor_angles;  // by cycle position
    std::vector<Point2> anchor_coords;  // by cycle position
    std::vector<Point2> sample_coords;
    std::vector<bool> outlier_flags;
    double similarity_score = 0.0;  // S_sam of the chosen cycle
    std::vector<std::string> warnings;

    /// Anchor of a cluster id (not a cycle position).
    Point2 anchor_of(std::size_t cluster) const;
};

// ---------------------------------------------------------------------------
// Cluster similarity

SimilarityMatrix pearson_similarity(const ProbabilityMatrix& probabilities);

/// t = sgn(s) |s|^gamma with sgn(s) = 1 for s > 0 and -1 otherwise. The
/// diagonal stays 1. gamma == 1 returns the input unchanged.
SimilarityMatrix weight_similarity(const SimilarityMatrix& similarity, double gamma_exponent);

/// dis(i,j) = (1 - t(i,j)) / sum_{a<b} (1 - t(a,b)), zero diagonal. Throws
/// DegenerateError when every off-diagonal similarity is 1.
DenseMatrix dissimilarity(const SimilarityMatrix& similarity);

// ---------------------------------------------------------------------------
// Cycle solvers. All take a symmetric, nonnegative, zero-diagonal matrix.

/// Rotates and reflects a cycle into canonical form.
std::vector<std::size_t> canonical_cycle(std::vector<std::size_t> order);

/// Sum of consecutive edges plus the closing edge.
double cycle_cost(std::span<const std::size_t> order, const DenseMatrix& distances);

/// Exact minimum cycle by Held-Karp bitmask DP, O(c^2 2^c). Requires
/// 3 <= c <= exact_cycle_max; larger inputs throw InputError so callers pick
/// the greedy solver explicitly.
CycleOrder held_karp_cycle(const DenseMatrix& distances, std::size_t exact_cycle_max = 16);

/// Repeatedly takes the shortest remaining edge that keeps every degree <= 2
/// and closes no premature cycle, then joins the two path ends. c >= 3.
CycleOrder greedy_cycle(const DenseMatrix& distances);

/// Exhaustive search over all (c-1)!/2 cycles; c <= 9.
CycleOrder brute_force_cycle(const DenseMatrix& distances);

struct SolvedCycle {
    CycleOrder cycle;
    CycleSolver solver = CycleSolver::Exact;
};

/// Exact when c <= exact_cycle_max, greedy otherwise. c == 2 gives [0, 1].
SolvedCycle solve_cycle(const DenseMatrix& distances, std::size_t exact_cycle_max);

/// S_sam: sum of similarities along consecutive and closing edges.
double similarity_score(std::span<const std::size_t> order, const SimilarityMatrix& similarity);

// ---------------------------------------------------------------------------
// Circle mapping

/// Anchor angles by cycle position: the first is 0 and each step advances by
/// 2 pi dis(prev, cur) / (sum of consecutive dis + closing dis).
std::vector<double> compute_angles(std::span<const std::size_t> order, const DenseMatrix& distances);

std::vector<Point2> anchor_positions(std::span<const double> angles, double radius);

/// mu_x = sum_pos p(x, order[pos]) * anchors[pos].
std::vector<Point2> sample_positions(const ProbabilityMatrix& probabilities, std::span<const Point2> anchors,
                                     std::span<const std::size_t> order);

/// flag[i] = max_j p(i,j) < threshold. Requires 1/c < threshold < 1.
std::vector<bool> flag_outliers(const ProbabilityMatrix& probabilities, double threshold);

/// sum_i |mu_x_i / r|^2, in [0, n].
double layout_quality(const ProbabilityMatrix& probabilities, std::span<const Point2> anchors,
                      std::span<const std::size_t> order, double radius);

/// The whole mapping: similarity, weighting, dissimilarity, cycle, angles,
/// anchors, sample positions and outlier flags.
CircularLayout map_to_circle(const ProbabilityMatrix& probabilities, const LayoutParams& params);

}  // namespace hchc
