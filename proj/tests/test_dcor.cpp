#include "doctest.h"
#include "oracle.hpp"

#include <numeric>

#include "mdn/dcor.hpp"

using mdn::Matrix;

TEST_SUITE("dcor") {
  TEST_CASE("constant input gives zero") {
    const Matrix a(6, 2, 3.0);
    mdn::Rng rng(1);
    const Matrix b = oracle::random_matrix(6, 1, rng);
    CHECK(mdn::dcov2(a, b) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(mdn::dcor2(a, b) == 0.0);
  }

  TEST_CASE("small scalar pair matches the textbook formula") {
    const Matrix a = Matrix::from_rows({{0}, {1}, {2}, {3}});
    CHECK(std::abs(mdn::dcov2(a, a) - oracle::naive_dcov2(a, a)) < 1e-10);
    CHECK(mdn::dcov2(a, a) == doctest::Approx(0.8125).epsilon(1e-12));
  }

  TEST_CASE("row permutation invariance") {
    mdn::Rng rng(2);
    const Matrix a = oracle::random_matrix(30, 3, rng);
    const Matrix b = oracle::random_matrix(30, 2, rng);
    std::vector<std::size_t> perm(30);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<std::size_t>(perm));
    const double before = mdn::dcov2(a, b);
    const double after = mdn::dcov2(mdn::select_rows(a, perm), mdn::select_rows(b, perm));
    CHECK(std::abs(before - after) <= 1e-12 * std::abs(before));
  }

  TEST_CASE("self and affine cases") {
    mdn::Rng rng(3);
    const Matrix x = oracle::random_matrix(50, 4, rng);
    CHECK(std::abs(mdn::dcor2(x, x) - 1.0) < 1e-10);
    const Matrix a = oracle::random_matrix(40, 1, rng);
    Matrix b = a;
    for (double& v : b.values()) v = 2.0 * v + 1.0;
    CHECK(std::abs(mdn::dcor2(a, b) - 1.0) < 1e-10);
  }

  TEST_CASE("matches the oracle on random inputs") {
    mdn::Rng rng(4);
    for (int trial = 0; trial < 40; ++trial) {
      const std::size_t n = 2 + rng.below(40);
      const Matrix a = oracle::random_matrix(n, 1 + rng.below(4), rng);
      const Matrix b = oracle::random_matrix(n, 1 + rng.below(2), rng);
      CHECK(std::abs(mdn::dcor2(a, b) - oracle::naive_dcor2(a, b)) < 1e-10);
    }
  }

  TEST_CASE("grouped evaluation") {
    mdn::Rng rng(5);
    const std::size_t half = 200;
    Matrix feats(2 * half, 1), meta(2 * half, 1);
    std::vector<int> groups(2 * half);
    // Within each group feature and meta are independent, but both shift with
    // the group, so the pooled value is large.
    for (std::size_t i = 0; i < 2 * half; ++i) {
      const int g = i < half ? 0 : 1;
      groups[i] = g;
      feats(i, 0) = 10.0 * g + rng.uniform();
      meta(i, 0) = 10.0 * g + rng.uniform();
    }
    const auto report = mdn::dcor2_by_group(feats, meta, groups);
    REQUIRE(report.per_group.size() == 2);
    CHECK(report.per_group[0].first == 0);
    CHECK(report.per_group[1].first == 1);
    CHECK(report.per_group[0].second < 0.05);
    CHECK(report.per_group[1].second < 0.05);
    CHECK(mdn::dcor2(feats, meta) > 0.8);
    CHECK(report.average == doctest::Approx((report.per_group[0].second + report.per_group[1].second) / 2));

    // Identical copies in both groups.
    const Matrix a = oracle::random_matrix(20, 2, rng);
    const Matrix m = oracle::random_matrix(20, 1, rng);
    Matrix a2(40, 2), m2(40, 1);
    std::vector<int> g2(40);
    for (std::size_t i = 0; i < 40; ++i) {
      a2(i, 0) = a(i % 20, 0);
      a2(i, 1) = a(i % 20, 1);
      m2(i, 0) = m(i % 20, 0);
      g2[i] = i < 20 ? 7 : 3;
    }
    const auto same = mdn::dcor2_by_group(a2, m2, g2);
    CHECK(same.per_group[0].first == 3);
    CHECK(same.per_group[0].second == doctest::Approx(same.per_group[1].second).epsilon(1e-12));
    CHECK(same.average == doctest::Approx(same.per_group[0].second).epsilon(1e-12));

    const std::vector<int> single(20, 4);
    const auto one = mdn::dcor2_by_group(a, m, single);
    CHECK(one.per_group.size() == 1);
    CHECK(one.average == one.per_group[0].second);
  }

  TEST_CASE("errors") {
    const Matrix a(4, 1), b(3, 1);
    CHECK_THROWS(mdn::dcor2(a, b));
    std::vector<int> groups{0, 0, 0, 1};
    Matrix f(4, 1), m(4, 1);
    CHECK_THROWS_WITH_AS(mdn::dcor2_by_group(f, m, groups), doctest::Contains("1"), mdn::DcorError);
  }
}
