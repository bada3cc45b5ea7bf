#pragma once

#include <Eigen/Dense>

namespace segalign {

// T x num_states log-likelihood scores, one row per frame.
using ScoreMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace segalign
