#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "mmgcn/data.hpp"
#include "mmgcn/layers.hpp"
#include "mmgcn/params.hpp"
#include "mmgcn/regularization.hpp"

namespace mmgcn {

struct TrainConfig {
  double learning_rate = 5e-4;
  std::size_t batch_size = 32;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  std::size_t cov_update_every = 1;  // batches between covariance updates
  std::size_t max_steps = 0;         // stop after this many batches in total (0: no limit)
  std::uint64_t seed = 0;
  RegularizerConfig reg;

  void validate() const;
};

struct TrainState {
  NetworkParams params;
  ParamBuffers first_moment;
  ParamBuffers second_moment;
  std::uint64_t step = 0;
  std::size_t epoch = 0;  // completed epochs
  double best_val_rmse = std::numeric_limits<double>::infinity();
  std::size_t epochs_since_improvement = 0;
  std::mt19937_64 rng;
};

TrainState init_train_state(const NetworkConfig& net, const TrainConfig& cfg);

/// J_W on one batch (see `objective`), returned as a scalar.
double total_loss(std::span<const Sample> batch, const NetworkParams& params,
                  const std::vector<LaplacianBasis>& bases, const RegularizerConfig& reg);

/// Bias-corrected Adam update. Throws NumericalFailure naming the block on a
/// non-finite gradient, before touching any parameter.
void adam_step(TrainState& state, const ParamBuffers& grads, const TrainConfig& cfg);

/// Samples plus the divisor that maps raw demand to model units.
struct TrainingData {
  std::vector<Sample> train;
  std::vector<Sample> val;
  double scale = 1.0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_rmse = 0.0;
  double val_rmse = 0.0;
};

struct CovarianceSnapshot {
  std::size_t epoch = 0;
  std::vector<std::size_t> layers;        // indices of MRGCN layers
  std::vector<CovarianceSet> covariances; // one per entry of `layers`
};

struct TrainResult {
  TrainState best;  // state at the epoch with the lowest validation RMSE
  TrainState last;
  std::vector<EpochRecord> history;
  std::vector<CovarianceSnapshot> covariance_history;
};

/// RMSE in raw units of predictions for `samples` (stored in model units).
double evaluate_rmse(std::span<const Sample> samples, const std::vector<LaplacianBasis>& bases,
                     const NetworkParams& params, double scale);

/// Mini-batch training: each batch takes one Adam step on grad J_W, then
/// re-estimates the non-frozen covariances of every prior-carrying MRGCN
/// layer from the updated weights every `cov_update_every` batches.
/// Early-stops after `patience` epochs without a validation improvement.
/// Passing `resume` continues from a saved state.
TrainResult train(const TrainingData& data, const std::vector<LaplacianBasis>& bases, const NetworkConfig& net,
                  const TrainConfig& cfg, const TrainState* resume = nullptr);

/// Power or Chebyshev bases for the dataset's three graphs, in modality order.
std::vector<LaplacianBasis> dataset_bases(const Dataset& ds, std::size_t degree, BasisKind kind);

}  // namespace mmgcn
