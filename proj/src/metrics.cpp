#include "mmgcn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mmgcn/error.hpp"

namespace mmgcn {

using Eigen::Index;
using Eigen::MatrixXd;

double rmse(const MatrixXd& predictions, const MatrixXd& targets) {
  if (predictions.rows() != targets.rows() || predictions.cols() != targets.cols()) {
    throw InvalidArgument("prediction and target shapes differ");
  }
  if (predictions.size() == 0) throw InvalidArgument("rmse of an empty matrix");
  return std::sqrt((predictions - targets).squaredNorm() / static_cast<double>(predictions.size()));
}

Eigen::VectorXd weekly_pattern(const DemandSeries& series, std::size_t week) {
  const std::size_t w = series.intervals_per_week();
  if ((week + 1) * w > series.length()) throw InvalidArgument("week index past the end of the series");
  Eigen::VectorXd p = series.values.middleCols(static_cast<Index>(week * w), static_cast<Index>(w)).colwise().sum().transpose();
  p.array() += kPatternSmoothing;
  return p / p.sum();
}

namespace {

double kl(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  double s = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    if (p(i) > 0.0) s += p(i) * std::log(p(i) / q(i));
  }
  return std::max(0.0, s);
}

std::size_t whole_weeks(const DemandSeries& s, const char* what) {
  const std::size_t w = s.intervals_per_week();
  if (s.length() == 0 || s.length() % w != 0) {
    throw InvalidArgument(std::string(what) + " series must cover whole weeks");
  }
  return s.length() / w;
}

}  // namespace

DriftReport kl_temporal_drift(const DemandSeries& train, const DemandSeries& test) {
  if (train.interval_minutes != test.interval_minutes) throw InvalidArgument("series intervals differ");
  if (train.vertex_count() != test.vertex_count()) throw InvalidArgument("series differ in region count");
  const std::size_t n_train = whole_weeks(train, "training");
  const std::size_t n_test = whole_weeks(test, "test");
  const Eigen::VectorXd ref = weekly_pattern(train, n_train - 1);
  DriftReport report;
  for (std::size_t k = 0; k < n_test; ++k) {
    const Eigen::VectorXd q = weekly_pattern(test, k);
    report.weeks.push_back({k, (q.array() == ref.array()).all() ? 0.0 : kl(ref, q),
                            std::numeric_limits<double>::quiet_NaN()});
  }
  return report;
}

void attach_weekly_rmse(DriftReport& report, const MatrixXd& predictions, const MatrixXd& targets,
                        const std::vector<std::size_t>& columns, std::size_t intervals_per_week) {
  if (predictions.rows() != static_cast<Index>(columns.size()) || targets.rows() != predictions.rows()) {
    throw InvalidArgument("one column index per prediction row is required");
  }
  for (auto& w : report.weeks) {
    double sq = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < columns.size(); ++k) {
      if (columns[k] / intervals_per_week != w.week_index) continue;
      sq += (predictions.row(static_cast<Index>(k)) - targets.row(static_cast<Index>(k))).squaredNorm();
      n += static_cast<std::size_t>(predictions.cols());
    }
    w.test_rmse = n ? std::sqrt(sq / static_cast<double>(n)) : std::numeric_limits<double>::quiet_NaN();
  }
}

FeatureIndependence feature_independence(const MatrixXd& activations, bool off_diagonal_only) {
  if (activations.rows() < 2 || activations.cols() < 2) {
    throw InvalidArgument("feature independence needs at least two rows and two features");
  }
  const MatrixXd centred = activations.rowwise() - activations.colwise().mean();
  MatrixXd c = centred.transpose() * centred / static_cast<double>(activations.rows());
  if (off_diagonal_only) c.diagonal().setZero();
  const double norm = c.norm();
  if (!(norm > 0.0)) return {std::numeric_limits<double>::infinity(), true};
  return {-std::log(norm), false};
}

MatrixXd correlation_form(const MatrixXd& s) {
  if (s.rows() != s.cols()) throw InvalidArgument("covariance must be square");
  const Index m = s.rows();
  for (Index i = 0; i < m; ++i) {
    if (!(s(i, i) > 0.0)) throw NumericalFailure("modality covariance has a non-positive diagonal entry");
  }
  MatrixXd r(m, m);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < m; ++j) {
      r(i, j) = i == j ? 1.0 : std::clamp(s(i, j) / std::sqrt(s(i, i) * s(j, j)), -1.0, 1.0);
    }
  }
  return r;
}

RelationshipMatrix modality_relationship(const CovarianceSet& cov, std::size_t layer_id,
                                         std::vector<std::string> labels) {
  const MatrixXd& s = cov.sigma[kModeModality].matrix();
  const Index m = s.rows();
  RelationshipMatrix out;
  out.layer_id = layer_id;
  out.raw = s;
  out.correlation = correlation_form(s);
  if (labels.empty()) {
    for (Index i = 0; i < m; ++i) {
      labels.push_back(i < 3 ? modality_label(static_cast<Modality>(i)) : "m" + std::to_string(i));
    }
  }
  if (static_cast<Index>(labels.size()) != m) throw InvalidArgument("one label per modality is required");
  out.labels = std::move(labels);
  return out;
}

std::size_t numerical_rank(const MatrixXd& m, double tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixXd> svd(m);
  std::size_t r = 0;
  for (Index i = 0; i < svd.singularValues().size(); ++i) r += svd.singularValues()(i) > tol;
  return r;
}

MatrixXd historical_average_predictions(const DemandSeries& series, const IndexRange& train,
                                        const std::vector<Sample>& samples) {
  const std::size_t w = series.intervals_per_week();
  const Index v = series.values.rows();
  MatrixXd sum = MatrixXd::Zero(v, static_cast<Index>(w));
  Eigen::VectorXd count = Eigen::VectorXd::Zero(static_cast<Index>(w));
  for (std::size_t t = train.lo; t < std::min(train.hi, series.length()); ++t) {
    sum.col(static_cast<Index>(t % w)) += series.values.col(static_cast<Index>(t));
    count(static_cast<Index>(t % w)) += 1.0;
  }
  // Slots never seen in training fall back to the overall training mean.
  const double total = count.sum();
  const Eigen::VectorXd overall = total > 0 ? Eigen::VectorXd(sum.rowwise().sum() / total) : Eigen::VectorXd::Zero(v);
  MatrixXd out(static_cast<Index>(samples.size()), v);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const Index slot = static_cast<Index>(samples[k].target_index % w);
    if (count(slot) > 0) {
      out.row(static_cast<Index>(k)) = (sum.col(slot) / count(slot)).transpose();
    } else {
      out.row(static_cast<Index>(k)) = overall.transpose();
    }
  }
  return out;
}

MatrixXd regional_mean_predictions(const DemandSeries& series, const IndexRange& train,
                                   const std::vector<Sample>& samples) {
  const std::size_t hi = std::min(train.hi, series.length());
  if (hi <= train.lo) throw InvalidArgument("training range is empty");
  const Eigen::VectorXd mean =
      series.values.middleCols(static_cast<Index>(train.lo), static_cast<Index>(hi - train.lo)).rowwise().mean();
  return mean.transpose().replicate(static_cast<Index>(samples.size()), 1);
}

MatrixXd stack_targets(const std::vector<Sample>& samples) {
  if (samples.empty()) return {};
  MatrixXd out(static_cast<Index>(samples.size()), samples.front().target.rows());
  for (std::size_t k = 0; k < samples.size(); ++k) out.row(static_cast<Index>(k)) = samples[k].target.transpose();
  return out;
}

}  // namespace mmgcn
