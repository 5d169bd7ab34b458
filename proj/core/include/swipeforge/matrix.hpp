#pragma once

#include <Eigen/Core>

namespace swipeforge {

/// Dense row-major 64-bit matrix used for features, emissions and all model
/// parameters.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

}  // namespace swipeforge
