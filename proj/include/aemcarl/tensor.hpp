#pragma once

#include <Eigen/Dense>

namespace aemcarl {

// Dense row-major matrix of 64-bit floats. Vectors are 1 x n.
using Tensor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace aemcarl
