#pragma once

#include <Eigen/Core>

#include "mdn/linalg.hpp"

namespace mdn::detail {

template <class T>
using RowMatOf = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMat = RowMatOf<double>;
using Map = Eigen::Map<RowMat>;
using ConstMap = Eigen::Map<const RowMat>;
using Strided = Eigen::OuterStride<>;
using ConstStridedMap = Eigen::Map<const RowMat, 0, Strided>;

inline Eigen::Index ix(std::size_t v) { return static_cast<Eigen::Index>(v); }

inline ConstMap view(const Matrix& m) { return ConstMap(m.data(), ix(m.rows()), ix(m.cols())); }
inline Map view(Matrix& m) { return Map(m.data(), ix(m.rows()), ix(m.cols())); }

/// Columns [0, count) of m without copying.
inline ConstStridedMap leading_cols(const Matrix& m, std::size_t count) {
  return ConstStridedMap(m.data(), ix(m.rows()), ix(count), Strided(ix(m.cols())));
}

}  // namespace mdn::detail
