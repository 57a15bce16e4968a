#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>

namespace sigmaforge {

/// Sample-major storage: one flow per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

/// Maps a batch of rows to one score in [0,1] per row. Must be safe to call
/// concurrently from several threads.
using BatchScorer = std::function<Vector(const Matrix&)>;

}  // namespace sigmaforge
