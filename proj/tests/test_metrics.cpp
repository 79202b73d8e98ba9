#include <cmath>
#include <random>

#include "doctest.h"

#include "mmgcn/error.hpp"
#include "mmgcn/metrics.hpp"
#include "support.hpp"

using namespace mmgcn;
using Eigen::MatrixXd;

namespace {

DemandSeries weekly(const Eigen::VectorXd& profile_scale, int weeks) {
  DemandSeries s;
  s.values.resize(2, 336 * weeks);
  for (int w = 0; w < weeks; ++w)
    for (int t = 0; t < 336; ++t) {
      s.values(0, w * 336 + t) = profile_scale(w) * (1.0 + std::sin(t * 0.1));
      s.values(1, w * 336 + t) = 2.0 + (t % 48 == 0 ? profile_scale(w) : 0.0);
    }
  return s;
}

}  // namespace

TEST_CASE("rmse") {
  const MatrixXd a = MatrixXd::Random(3, 4);
  CHECK(rmse(a, a) == 0.0);
  CHECK(rmse(a, (a.array() + 2.0).matrix()) == doctest::Approx(2.0).epsilon(1e-15));
  MatrixXd p(1, 4), t = MatrixXd::Zero(1, 4);
  p << 0, 3, 4, 0;
  CHECK(rmse(p, t) == 2.5);
  CHECK_THROWS_AS(rmse(p, MatrixXd::Zero(2, 2)), InvalidArgument);
  CHECK_THROWS_AS(rmse(MatrixXd(0, 4), MatrixXd(0, 4)), InvalidArgument);

  // Invariant under a shared row permutation.
  const MatrixXd q = MatrixXd::Random(5, 3), r = MatrixXd::Random(5, 3);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(5);
  perm.indices() << 3, 0, 4, 1, 2;
  CHECK(rmse(perm * q, perm * r) == doctest::Approx(rmse(q, r)).epsilon(1e-15));
}

TEST_CASE("temporal drift") {
  Eigen::VectorXd flat = Eigen::VectorXd::Ones(4);
  const DemandSeries s = weekly(flat, 4);
  const auto same = kl_temporal_drift(s, s);
  REQUIRE(same.weeks.size() == 4);
  for (const auto& w : same.weeks) {
    CHECK(w.kl_divergence == 0.0);
    CHECK(std::isnan(w.test_rmse));
  }

  Eigen::VectorXd growing(4);
  growing << 1, 2, 3, 4;
  const DemandSeries drifted = weekly(growing, 4);
  DemandSeries train = drifted, test = drifted;
  train.values = drifted.values.leftCols(336);
  test.values = drifted.values.rightCols(3 * 336);
  const auto r = kl_temporal_drift(train, test);
  for (const auto& w : r.weeks) CHECK(w.kl_divergence >= 0.0);
  CHECK(r.weeks[2].kl_divergence > r.weeks[0].kl_divergence);

  DemandSeries partial = s;
  partial.values = s.values.leftCols(500);
  CHECK_THROWS_AS(kl_temporal_drift(partial, s), InvalidArgument);
  CHECK_THROWS_AS(kl_temporal_drift(s, partial), InvalidArgument);

  const Eigen::VectorXd p = weekly_pattern(s, 1);
  CHECK(p.size() == 336);
  CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((p.array() > 0.0).all());

  // Weekly RMSE attaches by week of the test column.
  DriftReport rep = kl_temporal_drift(s, s);
  MatrixXd preds = MatrixXd::Zero(3, 2), targets = MatrixXd::Zero(3, 2);
  targets.row(0).setConstant(1.0);
  targets.row(2).setConstant(3.0);
  attach_weekly_rmse(rep, preds, targets, {10, 20, 400}, 336);
  CHECK(rep.weeks[0].test_rmse == doctest::Approx(std::sqrt(0.5)));
  CHECK(rep.weeks[1].test_rmse == doctest::Approx(3.0));
  CHECK(std::isnan(rep.weeks[2].test_rmse));
}

TEST_CASE("feature independence") {
  MatrixXd corr(4, 2);
  corr << 1, 1, -1, -1, 1, 1, -1, -1;  // unit variance, identical columns
  const auto fi = feature_independence(corr);
  CHECK(fi.value == doctest::Approx(-std::log(2.0)).epsilon(1e-14));
  CHECK(!fi.degenerate);

  const auto scaled = feature_independence(3.0 * corr);
  CHECK(scaled.value == doctest::Approx(fi.value - 2.0 * std::log(3.0)).epsilon(1e-13));

  CHECK(feature_independence(corr, true).value == doctest::Approx(-std::log(std::sqrt(2.0))).epsilon(1e-14));

  const auto constant = feature_independence(MatrixXd::Constant(5, 3, 2.0));
  CHECK(constant.degenerate);
  CHECK(std::isinf(constant.value));
  CHECK_THROWS_AS(feature_independence(MatrixXd::Ones(1, 3)), InvalidArgument);
  CHECK_THROWS_AS(feature_independence(MatrixXd::Ones(4, 1)), InvalidArgument);

  // Independent features of variance v: Monte Carlo against -ln(v sqrt 2).
  std::mt19937_64 rng(10);
  std::normal_distribution<double> n(0.0, std::sqrt(0.7));
  MatrixXd ind(100000, 2);
  for (Eigen::Index i = 0; i < ind.rows(); ++i) ind(i, 0) = n(rng), ind(i, 1) = n(rng);
  CHECK(std::abs(feature_independence(ind).value + std::log(0.7 * std::sqrt(2.0))) < 0.05);
}

TEST_CASE("modality relationship") {
  CovarianceSet cov = CovarianceSet::identity({2, 2, 2, 3}, {true, true, false, false});
  auto r = modality_relationship(cov, 3);
  CHECK(r.correlation == MatrixXd::Identity(3, 3));
  CHECK(r.layer_id == 3);
  REQUIRE(r.labels.size() == 3);
  CHECK(r.labels[0] == "N");

  MatrixXd s(2, 2);
  s << 4, 2, 2, 1;
  CHECK(correlation_form(s) == MatrixXd::Ones(2, 2));
  MatrixXd bad = s;
  bad(1, 1) = 0.0;
  CHECK_THROWS_AS(correlation_form(bad), NumericalFailure);

  cov = CovarianceSet::identity({2, 2, 2, 2}, {true, true, false, false});
  s(1, 1) = 2.0;
  cov.sigma[3] = SpdMatrix(s);
  r = modality_relationship(cov, 4);
  CHECK(r.correlation(0, 1) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(r.correlation(0, 0) == 1.0);
  CHECK(r.raw == s);

  s << 1, -0.5, -0.5, 1;
  cov.sigma[3] = SpdMatrix(s);
  r = modality_relationship(cov, 4);
  CHECK(r.correlation(1, 0) == -0.5);

  testing::Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    CovarianceSet c = CovarianceSet::identity({1, 1, 1, 4}, {true, true, false, false});
    c.sigma[3] = SpdMatrix(testing::random_spd(rng, 4, 0.1));
    const auto rr = modality_relationship(c, 1);
    CHECK(rr.correlation == rr.correlation.transpose());
    CHECK((rr.correlation.diagonal().array() == 1.0).all());
    CHECK(rr.correlation.cwiseAbs().maxCoeff() <= 1.0);
  }
}

TEST_CASE("numerical rank and baselines") {
  CHECK(numerical_rank(MatrixXd::Identity(4, 4)) == 4);
  CHECK(numerical_rank(MatrixXd::Ones(3, 5)) == 1);
  CHECK(numerical_rank(MatrixXd::Zero(3, 3)) == 0);

  DemandSeries s;
  s.values.resize(1, 3 * 336);
  for (Eigen::Index t = 0; t < s.values.cols(); ++t) s.values(0, t) = static_cast<double>(t % 336) + (t >= 672 ? 100.0 : 0.0);
  const auto samples = make_windows(s);
  const IndexRange train{0, 672};
  std::vector<Sample> probe{samples[336], samples[400]};  // targets 672 and 736
  const MatrixXd ha = historical_average_predictions(s, train, probe);
  CHECK(ha(0, 0) == 0.0);
  CHECK(ha(1, 0) == 64.0);
  CHECK(stack_targets(probe)(1, 0) == 164.0);
}
