#pragma once

#include <Eigen/Dense>

#include "aif/encoder.hpp"

namespace aif::detail {

// Relative-position rows for a length-n sequence: row r holds
// alpha[r - (n-1)], so Arel.middleRows(n-1-i, n) are the alphas seen
// from query position i. Zero when table is null.
Eigen::MatrixXd relative_window(const RelativePositionTable* table, int n, int d_k);

// Row-wise softmax with max subtraction.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& scores);

// Cross-entropy of a single logit row against `label`; optionally
// writes the unscaled gradient softmax(logits) - onehot(label).
double cross_entropy(const Eigen::RowVectorXd& logits, int label,
                     Eigen::RowVectorXd* dlogits);

}  // namespace aif::detail
