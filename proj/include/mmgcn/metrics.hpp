#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mmgcn/data.hpp"
#include "mmgcn/params.hpp"

namespace mmgcn {

/// sqrt(mean((p - t)^2)) over every cell.
double rmse(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& targets);

struct WeekDrift {
  std::size_t week_index = 0;    // 0-based week of the test series
  double kl_divergence = 0.0;
  double test_rmse = 0.0;        // NaN until attach_weekly_rmse fills it
};

struct DriftReport {
  std::vector<WeekDrift> weeks;
};

inline constexpr double kPatternSmoothing = 1e-9;

/// Time-of-week distribution of city-total demand for one whole week of columns.
Eigen::VectorXd weekly_pattern(const DemandSeries& series, std::size_t week);

/// KL(pattern of the last training week || pattern of each test week).
/// Both series must consist of whole weeks.
DriftReport kl_temporal_drift(const DemandSeries& train, const DemandSeries& test);

/// Fills test_rmse per week: rows of `predictions`/`targets` are samples whose
/// test-series column is `columns[k]`.
void attach_weekly_rmse(DriftReport& report, const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& targets,
                        const std::vector<std::size_t>& columns, std::size_t intervals_per_week);

struct FeatureIndependence {
  double value = 0.0;       // -ln ||C||_F
  bool degenerate = false;  // covariance vanished; value is +inf
};

/// Population covariance of the columns of `activations` (rows: sample x vertex).
/// With `off_diagonal_only` the norm skips the variances.
FeatureIndependence feature_independence(const Eigen::MatrixXd& activations, bool off_diagonal_only = false);

struct RelationshipMatrix {
  std::size_t layer_id = 0;
  std::vector<std::string> labels;
  Eigen::MatrixXd correlation;
  Eigen::MatrixXd raw;
};

/// R_ij = S_ij / sqrt(S_ii S_jj); throws NumericalFailure on a non-positive diagonal.
Eigen::MatrixXd correlation_form(const Eigen::MatrixXd& s);

/// Correlation form of the modality covariance, labelled N, P, R for the first three modalities.
RelationshipMatrix modality_relationship(const CovarianceSet& cov, std::size_t layer_id,
                                         std::vector<std::string> labels = {});

/// Count of singular values above `tol`.
std::size_t numerical_rank(const Eigen::MatrixXd& m, double tol = 1e-8);

/// Per-region mean of training targets at the same time-of-week slot; rows follow `samples`.
Eigen::MatrixXd historical_average_predictions(const DemandSeries& series, const IndexRange& train,
                                               const std::vector<Sample>& samples);

/// Per-region mean over the training targets, ignoring time of day and week.
Eigen::MatrixXd regional_mean_predictions(const DemandSeries& series, const IndexRange& train,
                                          const std::vector<Sample>& samples);

/// Samples stacked as N x |V| target rows.
Eigen::MatrixXd stack_targets(const std::vector<Sample>& samples);

}  // namespace mmgcn
