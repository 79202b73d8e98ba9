#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mmgcn/config.hpp"
#include "mmgcn/data.hpp"
#include "mmgcn/layers.hpp"
#include "mmgcn/training.hpp"

namespace mmgcn {

/// Exit codes of `dispatch`.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;      // unknown subcommand, invalid config, unreadable inputs
inline constexpr int kExitNumerical = 3;  // numerical failure during a run

/// Everything a run needs once the dataset is loaded: bases, scaled splits and the network layout.
struct Experiment {
  Dataset dataset;
  std::vector<LaplacianBasis> bases;
  TrainingData data;          // scaled train/val samples and the scale
  std::vector<Sample> test;   // scaled
  NetworkConfig net;
};

Experiment prepare_experiment(const RunConfig& cfg, Dataset dataset);

/// Trains per `cfg` and writes run.json, checkpoint.{json,bin} (best state),
/// last.{json,bin}, history.csv and covariance_history.csv into the output directory.
TrainResult run_training(const RunConfig& cfg, const Experiment& exp);

/// `mmgcn <synth|train|evaluate|predict|analyze> --config FILE [--out DIR]`.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mmgcn
