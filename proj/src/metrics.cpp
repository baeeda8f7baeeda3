#include "hchc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hchc/errors.hpp"

namespace hchc {

namespace {

// Shortest-augmenting-path Hungarian method with potentials, O(n^3).
// Rows/columns are 1-based internally; `allowed(i, j)` masks out cells.
template <class Allowed>
double solve_assignment(const DenseMatrix& cost, Allowed allowed, std::vector<std::size_t>* column_for_row) {
    const std::size_t n = cost.rows();
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        match[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = match[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = allowed(i0 - 1, j - 1) ? cost(i0 - 1, j - 1) - u[i0] - v[j] : inf;
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if (j1 == 0) return inf;  // no feasible completion
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> cols(n);
    for (std::size_t j = 1; j <= n; ++j) cols[match[j] - 1] = j - 1;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += cost(i, cols[i]);
    if (column_for_row) *column_for_row = std::move(cols);
    return total;
}

void require_same_length(const Labels& a, const Labels& b, const char* op) {
    if (a.size() != b.size()) {
        throw InputError(std::string(op) + ": label sequences differ in length (" + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()) + ")");
    }
    for (const Labels* labels : {&a, &b}) {
        for (int l : *labels) {
            if (l < 0) throw InputError(std::string(op) + ": negative label id");
        }
    }
}

std::size_t label_span(const Labels& labels) {
    return labels.empty() ? 0 : static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;
}

}  // namespace

Assignment hungarian(const DenseMatrix& cost) {
    if (cost.rows() != cost.cols()) throw InputError("hungarian: cost matrix must be square");
    if (!cost.all_finite()) throw InputError("hungarian: cost matrix must be finite");
    const std::size_t n = cost.rows();
    Assignment out;
    if (n == 0) return out;

    const double optimum = solve_assignment(cost, [](std::size_t, std::size_t) { return true; }, nullptr);
    double scale = 0.0;
    for (double v : cost.values()) scale = std::max(scale, std::abs(v));
    const double tol = 1e-9 * std::max(1.0, scale * static_cast<double>(n));

    // Fix rows in order to their smallest column that still admits an optimal
    // completion; this yields the lexicographically smallest optimum.
    std::vector<std::ptrdiff_t> fixed(n, -1);
    std::vector<char> taken(n, 0);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            if (taken[c]) continue;
            fixed[r] = static_cast<std::ptrdiff_t>(c);
            const auto allowed = [&](std::size_t i, std::size_t j) {
                if (fixed[i] >= 0) return static_cast<std::size_t>(fixed[i]) == j;
                return !taken[j] && j != c;
            };
            const double total = solve_assignment(cost, allowed, nullptr);
            if (total <= optimum + tol) break;
            fixed[r] = -1;
        }
        if (fixed[r] < 0) throw InputError("hungarian: numerical failure while fixing row " + std::to_string(r));
        taken[static_cast<std::size_t>(fixed[r])] = 1;
    }
    out.column_for_row.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        out.column_for_row[r] = static_cast<std::size_t>(fixed[r]);
        out.total_cost += cost(r, out.column_for_row[r]);
    }
    return out;
}

std::vector<std::vector<std::size_t>> confusion_matrix(const Labels& pred, const Labels& truth) {
    require_same_length(pred, truth, "confusion_matrix");
    const std::size_t k = std::max(label_span(pred), label_span(truth));
    std::vector<std::vector<std::size_t>> counts(k, std::vector<std::size_t>(k, 0));
    for (std::size_t i = 0; i < pred.size(); ++i) {
        ++counts[static_cast<std::size_t>(pred[i])][static_cast<std::size_t>(truth[i])];
    }
    return counts;
}

double acc(const Labels& pred, const Labels& truth) {
    require_same_length(pred, truth, "acc");
    if (pred.empty()) throw InputError("acc: empty label sequences");
    const auto counts = confusion_matrix(pred, truth);
    const std::size_t k = counts.size();
    DenseMatrix cost(k, k);
    for (std::size_t p = 0; p < k; ++p)
        for (std::size_t t = 0; t < k; ++t) cost(p, t) = -static_cast<double>(counts[p][t]);
    const Assignment match = hungarian(cost);
    std::size_t correct = 0;
    for (std::size_t p = 0; p < k; ++p) correct += counts[p][match.column_for_row[p]];
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

double nmi(const Labels& pred, const Labels& truth) {
    require_same_length(pred, truth, "nmi");
    if (pred.empty()) throw InputError("nmi: empty label sequences");
    const auto counts = confusion_matrix(pred, truth);
    const std::size_t k = counts.size();
    const double n = static_cast<double>(pred.size());
    std::vector<double> row_sum(k, 0.0), col_sum(k, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
        for (std::size_t t = 0; t < k; ++t) {
            row_sum[p] += static_cast<double>(counts[p][t]);
            col_sum[t] += static_cast<double>(counts[p][t]);
        }
    }
    const auto entropy = [n](const std::vector<double>& marginal) {
        double h = 0.0;
        for (double m : marginal) {
            if (m > 0.0) h -= (m / n) * std::log(m / n);
        }
        return h;
    };
    // Identical partitions up to relabeling: every nonempty row and column of
    // the confusion matrix has a single nonzero cell. Exact 1 by definition.
    bool bijective = true;
    for (std::size_t p = 0; p < k && bijective; ++p) {
        for (std::size_t t = 0; t < k; ++t) {
            const double joint = static_cast<double>(counts[p][t]);
            if (joint > 0.0 && (joint != row_sum[p] || joint != col_sum[t])) {
                bijective = false;
                break;
            }
        }
    }
    if (bijective) return 1.0;

    const double h_pred = entropy(row_sum);
    const double h_truth = entropy(col_sum);
    if (h_pred == 0.0 || h_truth == 0.0) return (h_pred == 0.0 && h_truth == 0.0) ? 1.0 : 0.0;

    double mi = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
        for (std::size_t t = 0; t < k; ++t) {
            const double joint = static_cast<double>(counts[p][t]);
            if (joint > 0.0) mi += (joint / n) * std::log(joint * n / (row_sum[p] * col_sum[t]));
        }
    }
    return std::clamp(mi / std::sqrt(h_pred * h_truth), 0.0, 1.0);
}

}  // namespace hchc
