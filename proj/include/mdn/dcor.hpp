#pragma once

#include <span>
#include <utility>
#include <vector>

#include "mdn/linalg.hpp"

namespace mdn {

class DcorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DcorReport {
  std::vector<std::pair<int, double>> per_group;  ///< ascending group id
  double average = 0.0;
};

/// Squared distance covariance (biased V-statistic): mean of the entrywise
/// product of the double-centered pairwise Euclidean distance matrices.
/// Rows are samples.
double dcov2(const Matrix& a, const Matrix& b);

/// dcov²(a,b) / sqrt(dcov²(a,a)·dcov²(b,b)), in [0, 1]. Returns 0 when either
/// input is (numerically) constant.
double dcor2(const Matrix& a, const Matrix& b);

/// dcor² restricted to each group's rows, plus the unweighted mean over groups.
DcorReport dcor2_by_group(const Matrix& features, const Matrix& meta, std::span<const int> groups);

}  // namespace mdn
