#include "hchc/layout.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>

#include "hchc/errors.hpp"

namespace hchc {

std::string_view to_string(CycleSolver s) noexcept { return s == CycleSolver::Exact ? "exact" : "greedy"; }

void LayoutParams::validate() const {
    if (!(gamma_exponent >= 0.0) || !std::isfinite(gamma_exponent)) {
        throw ConfigError("gamma_exponent", "must be >= 0");
    }
    if (!(radius > 0.0) || !std::isfinite(radius)) throw ConfigError("radius", "must be > 0");
    if (exact_cycle_max < 3 || exact_cycle_max > kMaxExactCycle) {
        throw ConfigError("exact_cycle_max", "must lie in [3, " + std::to_string(kMaxExactCycle) + "]");
    }
    if (!(outlier_threshold > 0.0 && outlier_threshold < 1.0)) {
        throw ConfigError("outlier_threshold", "must lie in (0, 1)");
    }
}

Point2 CircularLayout::anchor_of(std::size_t cluster) const {
    for (std::size_t pos = 0; pos < cycle.order.size(); ++pos) {
        if (cycle.order[pos] == cluster) return anchor_coords.at(pos);
    }
    throw InputError("anchor_of: cluster " + std::to_string(cluster) + " is not on the cycle");
}

// ---------------------------------------------------------------------------
// Similarity

SimilarityMatrix pearson_similarity(const ProbabilityMatrix& probabilities) {
    const std::size_t n = probabilities.samples();
    const std::size_t c = probabilities.clusters();
    if (n < 2) throw InputError("pearson_similarity: need at least 2 samples");

    // A column is degenerate when all of its entries are identical; testing
    // the computed variance instead would miss this through rounding.
    std::vector<char> constant(c, 1);
    for (std::size_t i = 1; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j)
            if (probabilities(i, j) != probabilities(0, j)) constant[j] = 0;

    DenseMatrix centered = probabilities.values();
    for (std::size_t j = 0; j < c; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += centered(i, j);
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) centered(i, j) -= mean;
    }
    const DenseMatrix cov = matmul_tn(centered, centered);

    SimilarityMatrix out;
    out.values = DenseMatrix(c, c);
    for (std::size_t j = 0; j < c; ++j) {
        if (constant[j] || !(cov(j, j) > 0.0)) out.degenerate_columns.push_back(j);
    }
    const auto degenerate = [&](std::size_t j) { return constant[j] || !(cov(j, j) > 0.0); };
    for (std::size_t a = 0; a < c; ++a) {
        out.values(a, a) = 1.0;
        for (std::size_t b = a + 1; b < c; ++b) {
            double s = 0.0;
            if (!degenerate(a) && !degenerate(b)) {
                s = std::clamp(cov(a, b) / (std::sqrt(cov(a, a)) * std::sqrt(cov(b, b))), -1.0, 1.0);
            }
            out.values(a, b) = s;
            out.values(b, a) = s;
        }
    }
    return out;
}

SimilarityMatrix weight_similarity(const SimilarityMatrix& similarity, double gamma_exponent) {
    if (!(gamma_exponent >= 0.0)) throw InputError("weight_similarity: exponent must be >= 0");
    if (gamma_exponent == 1.0) return similarity;
    SimilarityMatrix out = similarity;
    const std::size_t c = similarity.size();
    for (std::size_t a = 0; a < c; ++a) {
        for (std::size_t b = 0; b < c; ++b) {
            if (a == b) continue;
            const double s = similarity(a, b);
            const double sign = s > 0.0 ? 1.0 : -1.0;
            out.values(a, b) = sign * std::pow(std::abs(s), gamma_exponent);
        }
    }
    return out;
}

DenseMatrix dissimilarity(const SimilarityMatrix& similarity) {
    const std::size_t c = similarity.size();
    if (c < 2) throw InputError("dissimilarity: need at least 2 clusters");
    double total = 0.0;
    for (std::size_t a = 0; a < c; ++a)
        for (std::size_t b = a + 1; b < c; ++b) total += 1.0 - similarity(a, b);
    if (!(total > 0.0)) throw DegenerateError("dissimilarity: all cluster similarities are 1");
    DenseMatrix out(c, c);
    for (std::size_t a = 0; a < c; ++a) {
        for (std::size_t b = a + 1; b < c; ++b) {
            const double d = (1.0 - similarity(a, b)) / total;
            out(a, b) = d;
            out(b, a) = d;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Cycles

namespace {

void require_distance_matrix(const DenseMatrix& d, const char* op) {
    if (d.rows() != d.cols()) throw InputError(std::string(op) + ": distance matrix must be square");
    for (std::size_t i = 0; i < d.rows(); ++i) {
        if (d(i, i) != 0.0) throw InputError(std::string(op) + ": distance matrix needs a zero diagonal");
        for (std::size_t j = 0; j < d.cols(); ++j) {
            const double v = d(i, j);
            if (!std::isfinite(v) || v < 0.0) {
                throw InputError(std::string(op) + ": distances must be finite and nonnegative");
            }
            if (std::abs(v - d(j, i)) > 1e-12) throw InputError(std::string(op) + ": distance matrix must be symmetric");
        }
    }
}

CycleOrder finish(std::vector<std::size_t> order, const DenseMatrix& d) {
    CycleOrder out;
    out.order = canonical_cycle(std::move(order));
    out.total_cost = cycle_cost(out.order, d);
    return out;
}

}  // namespace

std::vector<std::size_t> canonical_cycle(std::vector<std::size_t> order) {
    if (order.empty()) return order;
    const auto smallest = std::min_element(order.begin(), order.end());
    std::rotate(order.begin(), smallest, order.end());
    if (order.size() >= 3 && order[1] > order.back()) std::reverse(order.begin() + 1, order.end());
    return order;
}

double cycle_cost(std::span<const std::size_t> order, const DenseMatrix& distances) {
    if (order.size() < 2) return 0.0;
    double cost = 0.0;
    for (std::size_t i = 1; i < order.size(); ++i) cost += distances(order[i - 1], order[i]);
    return cost + distances(order.back(), order.front());
}

CycleOrder held_karp_cycle(const DenseMatrix& distances, std::size_t exact_cycle_max) {
    require_distance_matrix(distances, "held_karp_cycle");
    const std::size_t c = distances.rows();
    if (c < 3) throw InputError("held_karp_cycle: need at least 3 clusters");
    if (c > exact_cycle_max || c > kMaxExactCycle) {
        throw InputError("held_karp_cycle: " + std::to_string(c) + " clusters exceeds the exact limit " +
                         std::to_string(std::min(exact_cycle_max, kMaxExactCycle)) + "; use greedy_cycle");
    }
    // Vertex 0 is the fixed start. Bit (v - 1) of a mask marks vertex v as
    // visited; best(mask, v) is the cheapest path 0 -> ... -> v through mask.
    const std::size_t others = c - 1;
    const std::size_t masks = std::size_t{1} << others;
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> best(masks * c, inf);
    std::vector<std::uint8_t> parent(masks * c, 0);
    const auto at = [c](std::size_t mask, std::size_t v) { return mask * c + v; };

    for (std::size_t v = 1; v < c; ++v) best[at(std::size_t{1} << (v - 1), v)] = distances(0, v);
    for (std::size_t mask = 1; mask < masks; ++mask) {
        for (std::size_t last = 1; last < c; ++last) {
            const double here = best[at(mask, last)];
            if (here == inf) continue;
            for (std::size_t next = 1; next < c; ++next) {
                const std::size_t bit = std::size_t{1} << (next - 1);
                if (mask & bit) continue;
                const double cand = here + distances(last, next);
                double& slot = best[at(mask | bit, next)];
                if (cand < slot) {
                    slot = cand;
                    parent[at(mask | bit, next)] = static_cast<std::uint8_t>(last);
                }
            }
        }
    }
    const std::size_t full = masks - 1;
    std::size_t end = 1;
    double best_total = inf;
    for (std::size_t v = 1; v < c; ++v) {
        const double total = best[at(full, v)] + distances(v, 0);
        if (total < best_total) {
            best_total = total;
            end = v;
        }
    }
    std::vector<std::size_t> order(c);
    std::size_t mask = full, v = end;
    for (std::size_t pos = c - 1; pos >= 1; --pos) {
        order[pos] = v;
        const std::size_t prev = parent[at(mask, v)];
        mask &= ~(std::size_t{1} << (v - 1));
        v = prev;
    }
    order[0] = 0;
    return finish(std::move(order), distances);
}

CycleOrder greedy_cycle(const DenseMatrix& distances) {
    require_distance_matrix(distances, "greedy_cycle");
    const std::size_t c = distances.rows();
    if (c < 3) throw InputError("greedy_cycle: need at least 3 clusters");

    struct Edge {
        double length;
        std::size_t a, b;
    };
    std::vector<Edge> edges;
    edges.reserve(c * (c - 1) / 2);
    for (std::size_t a = 0; a < c; ++a)
        for (std::size_t b = a + 1; b < c; ++b) edges.push_back({distances(a, b), a, b});
    std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
        if (x.length != y.length) return x.length < y.length;
        return x.a != y.a ? x.a < y.a : x.b < y.b;
    });

    std::vector<std::size_t> component(c);
    std::iota(component.begin(), component.end(), std::size_t{0});
    const auto root = [&](std::size_t v) {
        while (component[v] != v) v = component[v] = component[component[v]];
        return v;
    };
    std::vector<std::size_t> degree(c, 0);
    std::vector<std::vector<std::size_t>> adjacent(c);
    std::size_t chosen = 0;
    for (const Edge& e : edges) {
        if (chosen == c - 1) break;
        if (degree[e.a] == 2 || degree[e.b] == 2) continue;
        const std::size_t ra = root(e.a), rb = root(e.b);
        if (ra == rb) continue;
        component[ra] = rb;
        ++degree[e.a];
        ++degree[e.b];
        adjacent[e.a].push_back(e.b);
        adjacent[e.b].push_back(e.a);
        ++chosen;
    }
    // The chosen edges form one Hamiltonian path; walk it from an end.
    std::size_t start = 0;
    while (degree[start] != 1) ++start;
    std::vector<std::size_t> order{start};
    std::size_t prev = c, cur = start;
    while (order.size() < c) {
        const std::size_t next = adjacent[cur][0] != prev ? adjacent[cur][0] : adjacent[cur][1];
        order.push_back(next);
        prev = cur;
        cur = next;
    }
    return finish(std::move(order), distances);
}

CycleOrder brute_force_cycle(const DenseMatrix& distances) {
    require_distance_matrix(distances, "brute_force_cycle");
    const std::size_t c = distances.rows();
    if (c > 9) throw InputError("brute_force_cycle: limited to 9 clusters");
    if (c < 2) throw InputError("brute_force_cycle: need at least 2 clusters");
    std::vector<std::size_t> tail(c - 1);
    std::iota(tail.begin(), tail.end(), std::size_t{1});
    std::vector<std::size_t> order(c), best_order;
    double best = std::numeric_limits<double>::infinity();
    do {
        // Each undirected cycle once: second element below the last.
        if (tail.size() >= 2 && tail.front() > tail.back()) continue;
        order[0] = 0;
        std::copy(tail.begin(), tail.end(), order.begin() + 1);
        const double cost = cycle_cost(order, distances);
        if (cost < best) {
            best = cost;
            best_order = order;
        }
    } while (std::next_permutation(tail.begin(), tail.end()));
    return finish(std::move(best_order), distances);
}

SolvedCycle solve_cycle(const DenseMatrix& distances, std::size_t exact_cycle_max) {
    const std::size_t c = distances.rows();
    if (c == 2) {
        require_distance_matrix(distances, "solve_cycle");
        return {finish({0, 1}, distances), CycleSolver::Exact};
    }
    if (c <= exact_cycle_max && c <= kMaxExactCycle) {
        return {held_karp_cycle(distances, exact_cycle_max), CycleSolver::Exact};
    }
    return {greedy_cycle(distances), CycleSolver::Greedy};
}

double similarity_score(std::span<const std::size_t> order, const SimilarityMatrix& similarity) {
    for (std::size_t v : order) {
        if (v >= similarity.size()) throw InputError("similarity_score: cluster id out of range");
    }
    return cycle_cost(order, similarity.values);
}

// ---------------------------------------------------------------------------
// Circle mapping

std::vector<double> compute_angles(std::span<const std::size_t> order, const DenseMatrix& distances) {
    const std::size_t c = order.size();
    if (c < 2) throw InputError("compute_angles: need at least 2 anchors");
    const double denominator = cycle_cost(order, distances);
    if (!(denominator > 0.0)) throw DegenerateError("compute_angles: cycle has zero total dissimilarity");
    std::vector<double> angles(c, 0.0);
    for (std::size_t i = 1; i < c; ++i) {
        angles[i] = angles[i - 1] + 2.0 * std::numbers::pi * distances(order[i], order[i - 1]) / denominator;
    }
    return angles;
}

std::vector<Point2> anchor_positions(std::span<const double> angles, double radius) {
    if (!(radius > 0.0)) throw InputError("anchor_positions: radius must be > 0");
    std::vector<Point2> out;
    out.reserve(angles.size());
    for (double a : angles) out.push_back({radius * std::cos(a), radius * std::sin(a)});
    return out;
}

std::vector<Point2> sample_positions(const ProbabilityMatrix& probabilities, std::span<const Point2> anchors,
                                     std::span<const std::size_t> order) {
    const std::size_t c = probabilities.clusters();
    if (anchors.size() != c || order.size() != c) {
        throw InputError("sample_positions: need one anchor per cluster");
    }
    std::vector<Point2> out(probabilities.samples());
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto row = probabilities.row(i);
        Point2 p;
        for (std::size_t pos = 0; pos < c; ++pos) {
            const double w = row[order[pos]];
            p.x += w * anchors[pos].x;
            p.y += w * anchors[pos].y;
        }
        out[i] = p;
    }
    return out;
}

std::vector<bool> flag_outliers(const ProbabilityMatrix& probabilities, double threshold) {
    const double floor = 1.0 / static_cast<double>(probabilities.clusters());
    if (!(threshold > floor && threshold < 1.0)) {
        throw InputError("flag_outliers: threshold must lie in (1/c, 1)");
    }
    std::vector<bool> flags(probabilities.samples());
    for (std::size_t i = 0; i < flags.size(); ++i) {
        auto row = probabilities.row(i);
        flags[i] = *std::max_element(row.begin(), row.end()) < threshold;
    }
    return flags;
}

double layout_quality(const ProbabilityMatrix& probabilities, std::span<const Point2> anchors,
                      std::span<const std::size_t> order, double radius) {
    if (!(radius > 0.0)) throw InputError("layout_quality: radius must be > 0");
    double total = 0.0;
    for (const Point2& p : sample_positions(probabilities, anchors, order)) {
        const double x = p.x / radius, y = p.y / radius;
        total += x * x + y * y;
    }
    return total;
}

CircularLayout map_to_circle(const ProbabilityMatrix& probabilities, const LayoutParams& params) {
    params.validate();
    const std::size_t c = probabilities.clusters();
    if (c < 2) throw InputError("map_to_circle: need at least 2 clusters");

    CircularLayout layout;
    layout.radius = params.radius;
    const SimilarityMatrix raw = pearson_similarity(probabilities);
    for (std::size_t j : raw.degenerate_columns) {
        layout.warnings.push_back("cluster " + std::to_string(j) +
                                  " has a constant probability column; its similarities are set to 0");
    }
    const SimilarityMatrix weighted = weight_similarity(raw, params.gamma_exponent);
    const DenseMatrix dis = dissimilarity(weighted);

    SolvedCycle solved = solve_cycle(dis, params.exact_cycle_max);
    layout.cycle = std::move(solved.cycle);
    layout.solver = solved.solver;
    layout.similarity_score = similarity_score(layout.cycle.order, weighted);

    const auto& order = layout.cycle.order;
    for (std::size_t pos = 0; pos < c; ++pos) {
        const std::size_t next = order[(pos + 1) % c];
        if (dis(order[pos], next) == 0.0) {
            layout.warnings.push_back("clusters " + std::to_string(order[pos]) + " and " + std::to_string(next) +
                                      " have zero dissimilarity; their anchors coincide");
        }
    }
    layout.anchor_angles = compute_angles(order, dis);
    layout.anchor_coords = anchor_positions(layout.anchor_angles, params.radius);
    layout.sample_coords = sample_positions(probabilities, layout.anchor_coords, order);

    // The outlier rule needs threshold > 1/c; with few clusters a low
    // configured threshold flags nothing rather than failing the run.
    if (params.outlier_threshold > 1.0 / static_cast<double>(c)) {
        layout.outlier_flags = flag_outliers(probabilities, params.outlier_threshold);
    } else {
        layout.outlier_flags.assign(probabilities.samples(), false);
        layout.warnings.push_back("outlier_threshold is not above 1/c; no samples flagged");
    }
    return layout;
}

}  // namespace hchc
