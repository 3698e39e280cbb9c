#include "mdn/dcor.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

namespace mdn {

namespace {

constexpr double kDegenerate = 1e-14;

// Double-centered distance matrix, row-major n×n.
std::vector<double> centered_distances(const Matrix& x) {
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  std::vector<double> d(n * n, 0.0);
  // Feature-major copy so the innermost loop runs over samples and vectorizes;
  // each squared distance still accumulates over k in order.
  std::vector<double> xt(p * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < p; ++k) xt[k * n + i] = x(i, k);
  for (std::size_t i = 0; i < n; ++i) {
    double* acc = d.data() + i * n;
    for (std::size_t k = 0; k < p; ++k) {
      const double xik = xt[k * n + i];
      const double* col = xt.data() + k * n;
      for (std::size_t j = i + 1; j < n; ++j) {
        const double diff = xik - col[j];
        acc[j] += diff * diff;
      }
    }
    for (std::size_t j = i + 1; j < n; ++j) {
      acc[j] = std::sqrt(acc[j]);
      d[j * n + i] = acc[j];
    }
  }
  std::vector<double> row_mean(n, 0.0);
  double grand = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += d[i * n + j];
    row_mean[i] = s / static_cast<double>(n);
    grand += s;
  }
  grand /= static_cast<double>(n * n);
  // Symmetric, so column means equal row means.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d[i * n + j] += grand - row_mean[i] - row_mean[j];
  return d;
}

double mean_product(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s / static_cast<double>(a.size());
}

void check_inputs(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows()) {
    throw DcorError(std::string(op) + ": row counts differ (" + a.shape_string() + " vs " +
                    b.shape_string() + ")");
  }
  if (a.rows() < 2) throw DcorError(std::string(op) + ": need at least 2 samples");
}

}  // namespace

double dcov2(const Matrix& a, const Matrix& b) {
  check_inputs(a, b, "dcov2");
  return mean_product(centered_distances(a), centered_distances(b));
}

double dcor2(const Matrix& a, const Matrix& b) {
  check_inputs(a, b, "dcor2");
  const auto da = centered_distances(a);
  const auto db = centered_distances(b);
  const double vaa = mean_product(da, da);
  const double vbb = mean_product(db, db);
  if (vaa <= kDegenerate || vbb <= kDegenerate) return 0.0;
  const double v = mean_product(da, db) / std::sqrt(vaa * vbb);
  return std::clamp(v, 0.0, 1.0);
}

DcorReport dcor2_by_group(const Matrix& features, const Matrix& meta, std::span<const int> groups) {
  if (features.rows() != meta.rows() || features.rows() != groups.size()) {
    throw DcorError("dcor2_by_group: features, metadata and group labels disagree on row count");
  }
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < groups.size(); ++i) members[groups[i]].push_back(i);
  if (members.empty()) throw DcorError("dcor2_by_group: no samples");

  DcorReport report;
  for (const auto& [group, rows] : members) {
    if (rows.size() < 2) {
      throw DcorError("dcor2_by_group: group " + std::to_string(group) +
                      " has fewer than 2 samples");
    }
    report.per_group.emplace_back(group,
                                  dcor2(select_rows(features, rows), select_rows(meta, rows)));
  }
  double sum = 0.0;
  for (const auto& entry : report.per_group) sum += entry.second;
  report.average = sum / static_cast<double>(report.per_group.size());
  return report;
}

}  // namespace mdn
