#include "mmgcn/training.hpp"

#include <cmath>

#include "mmgcn/error.hpp"

namespace mmgcn {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
  if (batch_size < 1) throw InvalidArgument("batch_size must be at least 1");
  if (patience < 1) throw InvalidArgument("patience must be at least 1");
  if (cov_update_every < 1) throw InvalidArgument("cov_update_every must be at least 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw InvalidArgument("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw InvalidArgument("adam_eps must be positive");
  reg.validate();
}

TrainState init_train_state(const NetworkConfig& net, const TrainConfig& cfg) {
  TrainState s;
  s.params = init_network(net, cfg.seed, cfg.reg.frozen_modes);
  s.first_moment = zeros_like(s.params);
  s.second_moment = zeros_like(s.params);
  s.rng.seed(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  return s;
}

double total_loss(std::span<const Sample> batch, const NetworkParams& params,
                  const std::vector<LaplacianBasis>& bases, const RegularizerConfig& reg) {
  return objective(batch, bases, params, reg).total;
}

void adam_step(TrainState& state, const ParamBuffers& grads, const TrainConfig& cfg) {
  auto& layers = state.params.layers;
  if (grads.size() != layers.size()) throw InvalidArgument("gradient structure does not match parameters");
  for (std::size_t l = 0; l < grads.size(); ++l) {
    if (grads[l].weights.size() != weight_data(layers[l]).size() ||
        grads[l].biases.size() != bias_data(layers[l]).size()) {
      throw InvalidArgument("gradient structure does not match parameters");
    }
    for (const auto* buf : {&grads[l].weights, &grads[l].biases}) {
      for (double g : *buf) {
        if (!std::isfinite(g)) {
          throw NumericalFailure("non-finite gradient in layer " + std::to_string(l + 1) +
                                 (buf == &grads[l].weights ? " weights" : " biases"));
        }
      }
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.adam_beta1, t);
  const double c2 = 1.0 - std::pow(cfg.adam_beta2, t);
  auto update = [&](std::span<double> p, const std::vector<double>& g, std::vector<double>& m, std::vector<double>& v) {
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = cfg.adam_beta1 * m[k] + (1.0 - cfg.adam_beta1) * g[k];
      v[k] = cfg.adam_beta2 * v[k] + (1.0 - cfg.adam_beta2) * g[k] * g[k];
      p[k] -= cfg.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.adam_eps);
    }
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(weight_data(layers[l]), grads[l].weights, state.first_moment[l].weights, state.second_moment[l].weights);
    update(bias_data(layers[l]), grads[l].biases, state.first_moment[l].biases, state.second_moment[l].biases);
  }
}

double evaluate_rmse(std::span<const Sample> samples, const std::vector<LaplacianBasis>& bases,
                     const NetworkParams& params, double scale) {
  if (samples.empty()) throw InvalidArgument("cannot evaluate an empty sample set");
  double sq = 0.0;
  std::size_t cells = 0;
  const Eigen::MatrixXd pred = predict_batch(samples, bases, params);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    sq += (pred.row(static_cast<Eigen::Index>(k)).transpose() - samples[k].target).squaredNorm();
    cells += static_cast<std::size_t>(samples[k].target.rows());
  }
  return scale * std::sqrt(sq / static_cast<double>(cells));
}

namespace {

CovarianceSnapshot snapshot(const NetworkParams& params, std::size_t epoch) {
  CovarianceSnapshot s;
  s.epoch = epoch;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    if (const auto* m = std::get_if<MrgcnLayerParams>(&params.layers[l])) {
      s.layers.push_back(l);
      s.covariances.push_back(m->covariances);
    }
  }
  return s;
}

void shuffle(std::vector<std::size_t>& order, std::mt19937_64& rng) {
  for (std::size_t i = order.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
}

}  // namespace

TrainResult train(const TrainingData& data, const std::vector<LaplacianBasis>& bases, const NetworkConfig& net,
                  const TrainConfig& cfg, const TrainState* resume) {
  cfg.validate();
  net.validate();
  TrainResult result;
  result.last = resume ? *resume : init_train_state(net, cfg);
  result.best = result.last;
  if (cfg.max_epochs == 0 || result.last.epoch >= cfg.max_epochs) return result;
  if (data.train.empty() || data.val.empty()) throw InvalidArgument("training and validation sets must be nonempty");

  TrainState& state = result.last;
  std::vector<std::size_t> order(data.train.size());
  std::vector<Sample> batch;
  batch.reserve(cfg.batch_size);
  bool budget_exhausted = false;

  while (state.epoch < cfg.max_epochs && !budget_exhausted) {
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    shuffle(order, state.rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(data.train[order[k]]);
      try {
        const GradientResult g = network_gradients(batch, bases, state.params, cfg.reg);
        adam_step(state, g.grads, cfg);
        if (state.step % cfg.cov_update_every == 0) {
          for (auto& layer : state.params.layers) {
            if (auto* m = std::get_if<MrgcnLayerParams>(&layer); m && m->tensor_prior) update_covariances(*m, cfg.reg);
          }
        }
      } catch (const NumericalFailure& e) {
        throw NumericalFailure("epoch " + std::to_string(state.epoch + 1) + ", batch " +
                               std::to_string(start / cfg.batch_size + 1) + ": " + e.what());
      }
      if (cfg.max_steps && state.step >= cfg.max_steps) {
        budget_exhausted = true;
        break;
      }
    }
    ++state.epoch;
    EpochRecord rec;
    rec.epoch = state.epoch;
    rec.train_rmse = evaluate_rmse(data.train, bases, state.params, data.scale);
    rec.val_rmse = evaluate_rmse(data.val, bases, state.params, data.scale);
    result.history.push_back(rec);
    result.covariance_history.push_back(snapshot(state.params, state.epoch));
    if (rec.val_rmse < state.best_val_rmse) {
      state.best_val_rmse = rec.val_rmse;
      state.epochs_since_improvement = 0;
      result.best = state;
    } else {
      ++state.epochs_since_improvement;
      if (state.epochs_since_improvement >= cfg.patience) break;
    }
  }
  return result;
}

std::vector<LaplacianBasis> dataset_bases(const Dataset& ds, std::size_t degree, BasisKind kind) {
  std::vector<LaplacianBasis> bases;
  for (const auto* g : ds.graphs()) {
    bases.push_back(laplacian_basis(normalized_laplacian(*g), static_cast<int>(degree), kind));
  }
  return bases;
}

}  // namespace mmgcn
