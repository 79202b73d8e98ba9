#include "mmgcn/cli.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>

#include "CLI11.hpp"
#include "json.hpp"

#include "mmgcn/checkpoint.hpp"
#include "mmgcn/error.hpp"
#include "mmgcn/metrics.hpp"

namespace mmgcn {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw LoadError(path.string() + ": cannot write");
  out << std::setprecision(17);
  return out;
}

void write_json(const fs::path& path, const json& j) { open_out(path) << j.dump(2) << '\n'; }

// JSON has no infinity or NaN; such values are written as null.
json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

void write_run_json(const RunConfig& cfg, const std::string& command, const NetworkConfig* net) {
  json j = to_json(cfg);
  j["command"] = command;
  if (net) j["net_config"] = to_json(*net);
  fs::create_directories(cfg.output_dir);
  write_json(cfg.output_dir / "run.json", j);
}

Experiment load_experiment(const RunConfig& cfg) { return prepare_experiment(cfg, load_dataset(cfg.dataset)); }

Checkpoint load_matching_checkpoint(const RunConfig& cfg, const Experiment& exp) {
  Checkpoint ckpt = load_checkpoint(cfg.output_dir);
  if (to_json(ckpt.state.params.config) != to_json(exp.net)) {
    throw ConfigError("variant", "checkpoint in " + cfg.output_dir.string() + " was trained with a different network");
  }
  return ckpt;
}

Eigen::MatrixXd raw_predictions(std::span<const Sample> samples, const Experiment& exp, const NetworkParams& params,
                                double scale) {
  return scale * predict_batch(samples, exp.bases, params);
}

int cmd_synth(const fs::path& config, const fs::path& out_dir, std::ostream& out) {
  const SynthConfig synth = config.empty() ? SynthConfig{} : load_synth_config(config);
  const Dataset ds = generate_synthetic(synth);
  const fs::path manifest = write_dataset(ds, out_dir);
  json run = {{"command", "synth"}, {"synth", to_json(synth)}, {"output_dir", fs::absolute(out_dir).string()}};
  write_json(out_dir / "run.json", run);
  out << "wrote " << manifest.string() << " (" << ds.vertex_count() << " regions, " << ds.series.length()
      << " intervals)\n";
  return kExitOk;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const Experiment exp = load_experiment(cfg);
  const TrainResult result = run_training(cfg, exp);
  const double test = evaluate_rmse(exp.test, exp.bases, result.best.params, exp.data.scale);
  write_json(cfg.output_dir / "summary.json", {{"epochs", result.history.size()},
                                               {"steps", result.last.step},
                                               {"best_val_rmse", finite_or_null(result.best.best_val_rmse)},
                                               {"test_rmse", test}});
  out << std::setprecision(10) << "epochs " << result.history.size() << ", best validation RMSE "
      << result.best.best_val_rmse << ", test RMSE " << test << "\n";
  return kExitOk;
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
  const Experiment exp = load_experiment(cfg);
  write_run_json(cfg, "evaluate", &exp.net);
  const Checkpoint ckpt = load_matching_checkpoint(cfg, exp);
  const auto& p = ckpt.state.params;
  const double val = evaluate_rmse(exp.data.val, exp.bases, p, ckpt.scale);
  const double test = evaluate_rmse(exp.test, exp.bases, p, ckpt.scale);
  const Eigen::MatrixXd targets = ckpt.scale * stack_targets(exp.test);
  const double zeros = rmse(Eigen::MatrixXd::Zero(targets.rows(), targets.cols()), targets);
  const double ha = rmse(historical_average_predictions(exp.dataset.series, exp.dataset.splits.train, exp.test), targets);
  write_json(cfg.output_dir / "evaluation.json", {{"val_rmse", val},
                                                  {"test_rmse", test},
                                                  {"recorded_best_val_rmse", finite_or_null(ckpt.state.best_val_rmse)},
                                                  {"zeros_test_rmse", zeros},
                                                  {"historical_average_test_rmse", ha}});
  out << std::setprecision(10) << "validation RMSE " << val << ", test RMSE " << test << " (zeros " << zeros
      << ", historical average " << ha << ")\n";
  return kExitOk;
}

int cmd_predict(const RunConfig& cfg, std::ostream& out) {
  const Experiment exp = load_experiment(cfg);
  write_run_json(cfg, "predict", &exp.net);
  const Checkpoint ckpt = load_matching_checkpoint(cfg, exp);
  const auto& series = exp.dataset.series;
  const std::size_t target = cfg.predict_target_index < 0 ? exp.dataset.splits.test.lo
                                                          : static_cast<std::size_t>(cfg.predict_target_index);
  const std::size_t week = series.intervals_per_week();
  if (target < week || target >= series.length()) {
    throw ConfigError("predict_target_index", "must lie in [" + std::to_string(week) + ", " +
                                                  std::to_string(series.length()) + ")");
  }
  const Sample s = make_windows(series)[target - week];
  const Eigen::MatrixXd pred = ckpt.scale * network_forward(s.input / ckpt.scale, exp.bases, ckpt.state.params);
  auto f = open_out(cfg.output_dir / "predictions.csv");
  f << "region,prediction,observed\n";
  for (Eigen::Index v = 0; v < pred.rows(); ++v) f << v << ',' << pred(v, 0) << ',' << s.target(v, 0) << '\n';
  out << "wrote " << (cfg.output_dir / "predictions.csv").string() << " for target index " << target << "\n";
  return kExitOk;
}

DemandSeries slice_weeks(const DemandSeries& s, std::size_t first_week, std::size_t weeks) {
  DemandSeries out = s;
  const auto w = static_cast<Eigen::Index>(s.intervals_per_week());
  out.values = s.values.middleCols(static_cast<Eigen::Index>(first_week) * w, static_cast<Eigen::Index>(weeks) * w);
  return out;
}

int cmd_analyze(const RunConfig& cfg, std::ostream& out) {
  const Experiment exp = load_experiment(cfg);
  write_run_json(cfg, "analyze", &exp.net);
  const Checkpoint ckpt = load_matching_checkpoint(cfg, exp);
  const auto& ds = exp.dataset;
  const std::size_t week = ds.series.intervals_per_week();

  // Drift: whole weeks before the end of training against whole weeks of the test range.
  const std::size_t train_weeks = ds.splits.train.hi / week;
  const std::size_t test_first = (ds.splits.test.lo + week - 1) / week;
  const std::size_t test_end = ds.splits.test.hi / week;
  // Too short for whole weeks on both sides: the drift files stay empty with a note.
  const bool drift_possible = train_weeks > 0 && test_end > test_first;
  DriftReport drift;
  if (drift_possible) {
    drift = kl_temporal_drift(slice_weeks(ds.series, 0, train_weeks),
                              slice_weeks(ds.series, test_first, test_end - test_first));
    std::vector<std::size_t> columns;
    std::vector<Sample> in_weeks;
    for (const auto& s : exp.test) {
      if (s.target_index >= test_first * week && s.target_index < test_end * week) {
        columns.push_back(s.target_index - test_first * week);
        in_weeks.push_back(s);
      }
    }
    attach_weekly_rmse(drift, raw_predictions(in_weeks, exp, ckpt.state.params, ckpt.scale),
                       ckpt.scale * stack_targets(in_weeks), columns, week);
  }
  {
    auto f = open_out(cfg.output_dir / "drift.csv");
    f << "week_index,kl_divergence,test_rmse\n";
    json j = json::array();
    for (const auto& w : drift.weeks) {
      f << w.week_index << ',' << w.kl_divergence << ',' << w.test_rmse << '\n';
      j.push_back({{"week_index", w.week_index}, {"kl_divergence", w.kl_divergence},
                   {"test_rmse", finite_or_null(w.test_rmse)}});
    }
    json doc{{"weeks", j}};
    if (!drift_possible) doc["note"] = "needs a whole training week and a whole test week";
    write_json(cfg.output_dir / "drift.json", doc);
  }

  // Feature independence of each hidden layer's activations over the test set, per modality.
  {
    const auto& layers = ckpt.state.params.config.layers;
    std::vector<std::vector<Eigen::MatrixXd>> acts(layers.size(),
                                                   std::vector<Eigen::MatrixXd>(exp.net.modalities));
    const auto v = static_cast<Eigen::Index>(ds.vertex_count());
    for (std::size_t l = 0; l < layers.size(); ++l) {
      for (auto& a : acts[l]) a.resize(v * static_cast<Eigen::Index>(exp.test.size()),
                                       static_cast<Eigen::Index>(layers[l].out_features));
    }
    for (std::size_t k = 0; k < exp.test.size(); ++k) {
      const ForwardTrace tr = forward_trace(exp.test[k].input, exp.bases, ckpt.state.params);
      for (std::size_t l = 0; l < layers.size(); ++l) {
        for (std::size_t j = 0; j < exp.net.modalities; ++j) {
          acts[l][j].middleRows(static_cast<Eigen::Index>(k) * v, v) = tr.layers[l].output[j];
        }
      }
    }
    auto f = open_out(cfg.output_dir / "feature_independence.csv");
    f << "layer,modality,value,degenerate\n";
    for (std::size_t l = 0; l < layers.size(); ++l) {
      if (layers[l].out_features < 2 || exp.test.empty()) continue;
      for (std::size_t j = 0; j < exp.net.modalities; ++j) {
        const FeatureIndependence fi = feature_independence(acts[l][j], cfg.analysis.off_diagonal_only);
        f << l + 1 << ',' << modality_label(static_cast<Modality>(j)) << ',' << fi.value << ','
          << (fi.degenerate ? 1 : 0) << '\n';
      }
    }
  }

  // Modality relationships of every prior-carrying MRGCN layer.
  for (std::size_t l = 0; l < ckpt.state.params.layers.size(); ++l) {
    const auto* m = std::get_if<MrgcnLayerParams>(&ckpt.state.params.layers[l]);
    if (!m || !m->tensor_prior) continue;
    const RelationshipMatrix rel = modality_relationship(m->covariances, l + 1);
    auto f = open_out(cfg.output_dir / ("relationship_layer" + std::to_string(l + 1) + ".csv"));
    f << "row,col,correlation,raw\n";
    for (Eigen::Index r = 0; r < rel.correlation.rows(); ++r) {
      for (Eigen::Index c = 0; c < rel.correlation.cols(); ++c) {
        f << rel.labels[static_cast<std::size_t>(r)] << ',' << rel.labels[static_cast<std::size_t>(c)] << ','
          << rel.correlation(r, c) << ',' << rel.raw(r, c) << '\n';
      }
    }
  }

  // Graph statistics.
  {
    const auto graphs = ds.graphs();
    json density = json::object(), pairs = json::array();
    for (const auto* g : graphs) density[g->name()] = graph_density(*g, cfg.analysis.graph_threshold);
    for (std::size_t a = 0; a < graphs.size(); ++a) {
      for (std::size_t b = a + 1; b < graphs.size(); ++b) {
        const GraphComparison c = compare_graphs(*graphs[a], *graphs[b], cfg.analysis.graph_threshold);
        pairs.push_back({{"first", graphs[a]->name()}, {"second", graphs[b]->name()},
                         {"f_measure", c.f_measure}, {"edit_distance", c.edit_distance}});
      }
    }
    write_json(cfg.output_dir / "graph_stats.json",
               {{"threshold", cfg.analysis.graph_threshold}, {"density", density}, {"comparisons", pairs}});
  }
  out << "wrote analysis for " << drift.weeks.size() << " test week(s) to " << cfg.output_dir.string() << "\n";
  return kExitOk;
}

}  // namespace

Experiment prepare_experiment(const RunConfig& cfg, Dataset dataset) {
  Experiment exp;
  exp.net = build_network(cfg.variant, cfg.network, dataset.vertex_count());
  exp.bases = dataset_bases(dataset, cfg.network.degree, cfg.network.basis);
  const DatasetSplit split = split_dataset(make_windows(dataset.series), dataset.splits);
  exp.data.scale = fit_scale(dataset.series, dataset.splits);
  exp.data.train = scale_samples(split.train, exp.data.scale);
  exp.data.val = scale_samples(split.val, exp.data.scale);
  exp.test = scale_samples(split.test, exp.data.scale);
  exp.dataset = std::move(dataset);
  return exp;
}

TrainResult run_training(const RunConfig& cfg, const Experiment& exp) {
  write_run_json(cfg, "train", &exp.net);
  TrainResult result = train(exp.data, exp.bases, exp.net, cfg.train);
  save_checkpoint({result.best, exp.data.scale}, cfg.output_dir, "checkpoint");
  save_checkpoint({result.last, exp.data.scale}, cfg.output_dir, "last");
  {
    auto f = open_out(cfg.output_dir / "history.csv");
    f << "epoch,train_rmse,val_rmse\n";
    for (const auto& h : result.history) f << h.epoch << ',' << h.train_rmse << ',' << h.val_rmse << '\n';
  }
  auto f = open_out(cfg.output_dir / "covariance_history.csv");
  f << "epoch,layer,mode,row,col,value\n";
  for (const auto& snap : result.covariance_history) {
    for (std::size_t k = 0; k < snap.layers.size(); ++k) {
      const CovarianceSet& cov = snap.covariances[k];
      for (int mode = 0; mode < 4; ++mode) {
        if (cov.frozen[static_cast<std::size_t>(mode)]) continue;
        const auto& m = cov.sigma[static_cast<std::size_t>(mode)].matrix();
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
          for (Eigen::Index c = 0; c < m.cols(); ++c) {
            f << snap.epoch << ',' << snap.layers[k] + 1 << ',' << cov_mode_name(mode) << ',' << r << ',' << c << ','
              << m(r, c) << '\n';
          }
        }
      }
    }
  }
  return result;
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-modal multi-graph convolution networks for region-level demand forecasting", "mmgcn"};
  app.require_subcommand(1);
  std::string config, out_dir;
  struct Sub {
    const char* name;
    const char* help;
  };
  const Sub subs[] = {{"synth", "generate a synthetic dataset"},
                      {"train", "train a model and write checkpoint and history"},
                      {"evaluate", "compute validation and test RMSE from a checkpoint"},
                      {"predict", "write per-region predictions for one target index"},
                      {"analyze", "write drift, feature-independence, relationship and graph reports"}};
  for (const auto& s : subs) {
    auto* sc = app.add_subcommand(s.name, s.help);
    sc->add_option("--config", config, "JSON configuration file")->required(std::string(s.name) != "synth");
    sc->add_option("--out", out_dir, "output directory (overrides output_dir)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    if (cmd == "synth") return cmd_synth(config, out_dir.empty() ? fs::path("data") : fs::path(out_dir), out);
    RunConfig cfg = load_run_config(config);
    if (!out_dir.empty()) cfg.output_dir = fs::absolute(out_dir).lexically_normal();
    if (cmd == "train") return cmd_train(cfg, out);
    if (cmd == "evaluate") return cmd_evaluate(cfg, out);
    if (cmd == "predict") return cmd_predict(cfg, out);
    return cmd_analyze(cfg, out);
  } catch (const ConfigError& e) {
    err << "invalid config: " << e.what() << "\n";
    return kExitUsage;
  } catch (const LoadError& e) {
    err << "load error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalFailure& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const InvalidArgument& e) {
    err << "invalid argument: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "filesystem error: " << e.what() << "\n";
    return kExitUsage;
  }
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"mmgcn"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace mmgcn
