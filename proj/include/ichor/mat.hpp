// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

namespace ichor {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

}  // namespace ichor
