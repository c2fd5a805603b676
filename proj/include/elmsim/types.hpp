#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace elmsim {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;
using MatrixXi = Matrix<int>;
using VectorXi = Vector<int>;

// Row-major so that one tick's feature codes are contiguous.
using CodeMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Microseconds = std::int64_t;

}  // namespace elmsim
