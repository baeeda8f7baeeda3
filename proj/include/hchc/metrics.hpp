#pragma once

#include <cstddef>
#include <vector>

#include "hchc/gldc.hpp"
#include "hchc/matrix.hpp"

namespace hchc {

struct Assignment {
    std::vector<std::size_t> column_for_row;
    double total_cost = 0.0;
};

/// Minimum-cost perfect matching on a square cost matrix (Kuhn-Munkres).
/// Among equally cheap matchings the lexicographically smallest
/// column_for_row is returned. Throws InputError on non-square or
/// non-finite input.
Assignment hungarian(const DenseMatrix& cost);

/// counts(p, t) = #{i : pred_i = p, truth_i = t}, zero-padded to a square
/// max(c_pred, c_true) matrix.
std::vector<std::vector<std::size_t>> confusion_matrix(const Labels& pred, const Labels& truth);

/// Fraction of samples correct under the best one-to-one relabeling of pred.
double acc(const Labels& pred, const Labels& truth);

/// MI / sqrt(H(pred) H(truth)) with natural logs. 1 for identical
/// partitions (including two single-cluster ones), 0 when exactly one
/// entropy vanishes.
double nmi(const Labels& pred, const Labels& truth);

}  // namespace hchc
