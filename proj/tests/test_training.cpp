#include <cmath>
#include <filesystem>

#include "doctest.h"

#include "mmgcn/checkpoint.hpp"
#include "mmgcn/error.hpp"
#include "mmgcn/metrics.hpp"
#include "mmgcn/training.hpp"
#include "support.hpp"

using namespace mmgcn;
using Eigen::MatrixXd;
namespace fs = std::filesystem;

namespace {

LaplacianBasis single_vertex_basis() {
  return laplacian_basis(normalized_laplacian(RelationGraph(Modality::Custom, MatrixXd::Zero(1, 1))), 0);
}

// prediction = w x + b on one vertex.
NetworkParams scalar_model(double w) {
  NetworkConfig cfg;
  cfg.modalities = 1;
  cfg.degree = 0;
  cfg.window = 1;
  cfg.vertex_count = 1;
  cfg.layers = {{LayerKind::Mrgcn, 1, 1, Activation::Identity, false}};
  NetworkParams p = init_network(cfg, 0);
  weight_data(p.layers[0])[0] = w;
  return p;
}

RegularizerConfig no_reg() {
  RegularizerConfig r;
  r.alpha_low = r.alpha_high = 0.0;
  return r;
}

struct Tiny {
  Dataset ds;
  std::vector<LaplacianBasis> bases;
  TrainingData data;
  NetworkConfig net;
};

Tiny tiny_problem(double noise = 0.0, std::vector<std::size_t> dims = {8, 8, 8, 1}) {
  SynthConfig sc;
  sc.grid_rows = 4;
  sc.grid_cols = 4;
  sc.weeks = 2;
  sc.noise_scale = noise;
  sc.seed = 3;
  Tiny t;
  t.ds = generate_synthetic(sc);
  t.bases = dataset_bases(t.ds, 2, BasisKind::Power);
  const auto split = split_dataset(make_windows(t.ds.series), t.ds.splits);
  t.data.scale = fit_scale(t.ds.series, t.ds.splits);
  t.data.train = scale_samples(split.train, t.data.scale);
  t.data.val = scale_samples(split.val, t.data.scale);
  t.net.modalities = 3;
  t.net.degree = 2;
  std::size_t in = 5;
  for (std::size_t l = 0; l < dims.size(); ++l) {
    t.net.layers.push_back({l < 2 ? LayerKind::Ggcn : LayerKind::Mrgcn, in, dims[l],
                            l + 1 == dims.size() ? Activation::Identity : Activation::ReLU, true});
    in = dims[l];
  }
  return t;
}

TrainConfig quick(std::size_t epochs) {
  TrainConfig c;
  c.max_epochs = epochs;
  c.learning_rate = 5e-3;
  c.batch_size = 16;
  c.seed = 9;
  return c;
}

}  // namespace

TEST_CASE("total loss") {
  const std::vector<LaplacianBasis> bases{single_vertex_basis()};
  const std::vector<Sample> one{{MatrixXd::Constant(1, 1, 1.0), MatrixXd::Constant(1, 1, 1.0), 0}};
  CHECK(total_loss(one, scalar_model(3.0), bases, no_reg()) == doctest::Approx(std::sqrt(4.0 + 1e-12)).epsilon(1e-15));
  CHECK(total_loss(one, scalar_model(1.0), bases, no_reg()) == doctest::Approx(1e-6).epsilon(1e-9));

  const std::vector<Sample> zero_target{{MatrixXd::Constant(1, 1, 1.0), MatrixXd::Zero(1, 1), 0}};
  CHECK(total_loss(zero_target, scalar_model(0.0), bases, RegularizerConfig{}) == doctest::Approx(1e-6).epsilon(1e-9));

  // With regularizers off the loss is the smoothed batch RMSE.
  testing::Rng rng(1);
  testing::Instance inst = testing::random_instance(rng);
  MatrixXd preds(static_cast<Eigen::Index>(inst.batch.size()), inst.batch[0].target.rows());
  for (std::size_t k = 0; k < inst.batch.size(); ++k) {
    preds.row(static_cast<Eigen::Index>(k)) = network_forward(inst.batch[k].input, inst.bases, inst.params).transpose();
  }
  const double r = rmse(preds, stack_targets(inst.batch));
  CHECK(total_loss(inst.batch, inst.params, inst.bases, no_reg()) == doctest::Approx(std::sqrt(r * r + 1e-12)).epsilon(1e-13));
  CHECK(total_loss(inst.batch, inst.params, inst.bases, inst.reg) > total_loss(inst.batch, inst.params, inst.bases, no_reg()));
  CHECK_THROWS_AS(total_loss({}, inst.params, inst.bases, no_reg()), InvalidArgument);
}

TEST_CASE("adam step") {
  TrainConfig cfg;
  TrainState s;
  s.params = scalar_model(0.5);
  s.first_moment = zeros_like(s.params);
  s.second_moment = zeros_like(s.params);
  const std::vector<double> before = flatten(s.params);

  ParamBuffers zero = zeros_like(s.params);
  adam_step(s, zero, cfg);
  CHECK(s.step == 1);
  CHECK(flatten(s.params) == before);

  TrainState t;
  t.params = scalar_model(0.5);
  t.first_moment = zeros_like(t.params);
  t.second_moment = zeros_like(t.params);
  ParamBuffers g = zeros_like(t.params);
  g[0].weights[0] = 3.0;
  g[0].biases[0] = -0.02;
  adam_step(t, g, cfg);
  CHECK(flatten(t.params)[0] == doctest::Approx(0.5 - cfg.learning_rate * 3.0 / (3.0 + cfg.adam_eps)).epsilon(1e-15));
  CHECK(flatten(t.params)[1] == doctest::Approx(cfg.learning_rate * 0.02 / (0.02 + cfg.adam_eps)).epsilon(1e-12));

  ParamBuffers nan = zeros_like(t.params);
  nan[0].biases[0] = std::nan("");
  const auto snapshot = flatten(t.params);
  try {
    adam_step(t, nan, cfg);
    FAIL("expected a numerical failure");
  } catch (const NumericalFailure& e) {
    CHECK(std::string(e.what()).find("layer 1 biases") != std::string::npos);
  }
  CHECK(flatten(t.params) == snapshot);
  CHECK(t.step == 1);

  ParamBuffers wrong(2);
  CHECK_THROWS_AS(adam_step(t, wrong, cfg), InvalidArgument);
}

TEST_CASE("adam descends a one-parameter quadratic") {
  const std::vector<LaplacianBasis> bases{single_vertex_basis()};
  const std::vector<Sample> one{{MatrixXd::Constant(1, 1, 1.0), MatrixXd::Constant(1, 1, 1.0), 0}};
  TrainConfig cfg;
  TrainState s;
  s.params = scalar_model(3.0);
  s.first_moment = zeros_like(s.params);
  s.second_moment = zeros_like(s.params);
  double prev = total_loss(one, s.params, bases, no_reg());
  const double start = prev;
  for (int step = 0; step < 50; ++step) {
    adam_step(s, network_gradients(one, bases, s.params, no_reg()).grads, cfg);
    const double now = total_loss(one, s.params, bases, no_reg());
    CHECK(now <= prev);
    prev = now;
  }
  CHECK(prev < start);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = {};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = {};
  c.patience = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("zero epochs returns the initial state") {
  const Tiny t = tiny_problem();
  TrainConfig cfg = quick(0);
  const TrainResult r = train(t.data, t.bases, t.net, cfg);
  CHECK(r.history.empty());
  CHECK(r.last.step == 0);
  CHECK(flatten(r.last.params) == flatten(init_network(t.net, cfg.seed, cfg.reg.frozen_modes)));
}

TEST_CASE("training beats trivial predictors on a small noiseless city") {
  const Tiny t = tiny_problem();
  TrainConfig cfg = quick(12);
  const TrainResult r = train(t.data, t.bases, t.net, cfg);
  REQUIRE(!r.history.empty());
  const double final_train = r.history.back().train_rmse;

  const auto split = split_dataset(make_windows(t.ds.series), t.ds.splits);
  const MatrixXd targets = stack_targets(split.train);
  const double zeros = rmse(MatrixXd::Zero(targets.rows(), targets.cols()), targets);
  const double mean = rmse(regional_mean_predictions(t.ds.series, t.ds.splits.train, split.train), targets);
  MESSAGE("train RMSE " << final_train << ", zeros " << zeros << ", regional mean " << mean);
  CHECK(final_train < zeros);
  CHECK(final_train < mean);

  // The returned parameters are the validation minimum of the history.
  double best = std::numeric_limits<double>::infinity();
  for (const auto& h : r.history) best = std::min(best, h.val_rmse);
  CHECK(r.best.best_val_rmse == best);
  CHECK(evaluate_rmse(t.data.val, t.bases, r.best.params, t.data.scale) == best);

  for (const auto& snap : r.covariance_history) {
    for (const auto& cov : snap.covariances) {
      CHECK(cov.sigma[0].is_identity());
      CHECK(cov.sigma[1].is_identity());
      for (std::size_t k : {2u, 3u}) {
        const MatrixXd& s = cov.sigma[k].matrix();
        CHECK(s == s.transpose());
        CHECK(Eigen::SelfAdjointEigenSolver<MatrixXd>(s).eigenvalues().minCoeff() >= cfg.reg.epsilon);
      }
    }
  }
}

TEST_CASE("fully frozen covariances stay at identity") {
  const Tiny t = tiny_problem(0.2);
  TrainConfig cfg = quick(2);
  cfg.reg.frozen_modes = {true, true, true, true};
  const TrainResult r = train(t.data, t.bases, t.net, cfg);
  REQUIRE(r.covariance_history.size() == 2);
  for (const auto& snap : r.covariance_history) {
    REQUIRE(snap.covariances.size() == 2);
    for (const auto& cov : snap.covariances)
      for (const auto& s : cov.sigma) CHECK(s.is_identity());
  }
}

TEST_CASE("training is deterministic and resumes exactly") {
  const Tiny t = tiny_problem(0.2);
  TrainConfig cfg = quick(4);
  cfg.reg.frozen_modes = {false, false, false, false};
  const TrainResult a = train(t.data, t.bases, t.net, cfg);
  const TrainResult b = train(t.data, t.bases, t.net, cfg);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t k = 0; k < a.history.size(); ++k) {
    CHECK(a.history[k].train_rmse == b.history[k].train_rmse);
    CHECK(a.history[k].val_rmse == b.history[k].val_rmse);
  }
  CHECK(flatten(a.last.params) == flatten(b.last.params));

  TrainConfig half = cfg;
  half.max_epochs = 2;
  const TrainResult first = train(t.data, t.bases, t.net, half);
  const fs::path dir = fs::temp_directory_path() / "mmgcn_test_resume";
  fs::remove_all(dir);
  save_checkpoint({first.last, t.data.scale}, dir, "last");
  const Checkpoint restored = load_checkpoint(dir, "last");
  CHECK(restored.scale == t.data.scale);
  const TrainResult rest = train(t.data, t.bases, t.net, cfg, &restored.state);
  REQUIRE(rest.history.size() == 2);
  CHECK(rest.history[0].val_rmse == a.history[2].val_rmse);
  CHECK(rest.history[1].train_rmse == a.history[3].train_rmse);
  CHECK(flatten(rest.last.params) == flatten(a.last.params));
  CHECK(rest.last.step == a.last.step);
  for (std::size_t l = 2; l < 4; ++l) {
    const auto& x = std::get<MrgcnLayerParams>(rest.last.params.layers[l]).covariances;
    const auto& y = std::get<MrgcnLayerParams>(a.last.params.layers[l]).covariances;
    for (std::size_t k = 0; k < 4; ++k) CHECK(x.sigma[k].matrix() == y.sigma[k].matrix());
  }
}

TEST_CASE("checkpoint round trip preserves the whole state") {
  const Tiny t = tiny_problem(0.2);
  const TrainResult r = train(t.data, t.bases, t.net, quick(1));
  const fs::path dir = fs::temp_directory_path() / "mmgcn_test_ckpt";
  fs::remove_all(dir);
  save_checkpoint({r.last, 2.5}, dir);
  CHECK(fs::exists(dir / "checkpoint.json"));
  CHECK(fs::exists(dir / "checkpoint.bin"));
  Checkpoint c = load_checkpoint(dir);
  CHECK(c.scale == 2.5);
  CHECK(flatten(c.state.params) == flatten(r.last.params));
  CHECK(flatten(c.state.first_moment) == flatten(r.last.first_moment));
  CHECK(flatten(c.state.second_moment) == flatten(r.last.second_moment));
  CHECK(c.state.step == r.last.step);
  CHECK(c.state.epoch == r.last.epoch);
  CHECK(c.state.best_val_rmse == r.last.best_val_rmse);
  std::mt19937_64 rng = r.last.rng;
  CHECK(c.state.rng() == rng());
  CHECK(evaluate_rmse(t.data.val, t.bases, c.state.params, c.scale) ==
        evaluate_rmse(t.data.val, t.bases, r.last.params, 2.5));

  fs::resize_file(dir / "checkpoint.bin", 16);
  CHECK_THROWS_AS(load_checkpoint(dir), LoadError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing"), LoadError);
}
