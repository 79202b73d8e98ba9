#include "mmgcn/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "json.hpp"
#include "mmgcn/csv.hpp"
#include "mmgcn/error.hpp"

namespace mmgcn {

using Eigen::Index;
using Eigen::MatrixXd;

std::size_t DemandSeries::intervals_per_day() const {
  if (interval_minutes <= 0 || 1440 % interval_minutes != 0) {
    throw InvalidArgument("interval_minutes must be a positive divisor of 1440");
  }
  return static_cast<std::size_t>(1440 / interval_minutes);
}

void DemandSeries::validate() const {
  intervals_per_day();
  if (values.rows() < 1 || values.cols() < 1) throw InvalidArgument("demand series is empty");
  for (Index i = 0; i < values.rows(); ++i) {
    for (Index t = 0; t < values.cols(); ++t) {
      const double v = values(i, t);
      if (!std::isfinite(v) || v < 0.0) {
        throw InvalidArgument("demand must be finite and nonnegative (region " + std::to_string(i) + ")");
      }
    }
  }
}

std::vector<Sample> make_windows(const DemandSeries& series) {
  const std::size_t day = series.intervals_per_day();
  const std::size_t week = 7 * day;
  const std::size_t total = series.length();
  if (total <= week) {
    throw InvalidArgument("series needs more than one week of intervals (" + std::to_string(week) + ")");
  }
  const std::size_t lags[kWindowSlots] = {1, 2, 3, day, week};
  std::vector<Sample> out;
  out.reserve(total - week);
  const Index v = series.values.rows();
  for (std::size_t t = week; t < total; ++t) {
    Sample s;
    s.input.resize(v, static_cast<Index>(kWindowSlots));
    for (std::size_t k = 0; k < kWindowSlots; ++k) {
      s.input.col(static_cast<Index>(k)) = series.values.col(static_cast<Index>(t - lags[k]));
    }
    s.target = series.values.col(static_cast<Index>(t));
    s.target_index = t;
    out.push_back(std::move(s));
  }
  return out;
}

void SplitRanges::validate() const {
  for (const auto* r : {&train, &val, &test}) {
    if (r->hi < r->lo) throw InvalidArgument("split range has hi < lo");
  }
  // Empty ranges impose no ordering constraint.
  const IndexRange* ordered[] = {&train, &val, &test};
  const IndexRange* prev = nullptr;
  for (const auto* r : ordered) {
    if (r->empty()) continue;
    if (prev && r->lo < prev->hi) throw InvalidArgument("split ranges overlap or are out of order");
    prev = r;
  }
}

DatasetSplit split_dataset(const std::vector<Sample>& samples, const SplitRanges& ranges) {
  ranges.validate();
  DatasetSplit out;
  for (const auto& s : samples) {
    if (ranges.train.contains(s.target_index)) {
      out.train.push_back(s);
    } else if (ranges.val.contains(s.target_index)) {
      out.val.push_back(s);
    } else if (ranges.test.contains(s.target_index)) {
      out.test.push_back(s);
    }
  }
  return out;
}

SplitRanges default_splits(std::size_t length, std::size_t week) {
  if (length <= week) throw InvalidArgument("series too short to split");
  SplitRanges r;
  if (length >= 4 * week) {
    r.train = {week, length - 2 * week};
    r.val = {length - 2 * week, length - week};
    r.test = {length - week, length};
  } else {
    const std::size_t n = length - week;
    const std::size_t n_train = n * 7 / 10;
    const std::size_t n_val = (n - n_train) / 2;
    r.train = {week, week + n_train};
    r.val = {week + n_train, week + n_train + n_val};
    r.test = {week + n_train + n_val, length};
  }
  return r;
}

void SynthConfig::validate() const {
  if (grid_rows < 1 || grid_cols < 1) throw InvalidArgument("grid dimensions must be positive");
  if (poi_categories < 1) throw InvalidArgument("poi_categories must be positive");
  if (weeks < 2) throw InvalidArgument("synthetic series needs at least two weeks");
  if (interval_minutes <= 0 || 1440 % interval_minutes != 0) {
    throw InvalidArgument("interval_minutes must be a positive divisor of 1440");
  }
  if (!(drift_rate >= 0.0)) throw InvalidArgument("drift_rate must be nonnegative");
  if (!(noise_scale >= 0.0)) throw InvalidArgument("noise_scale must be nonnegative");
  if (!(base_level > 0.0)) throw InvalidArgument("base_level must be positive");
  if (!(smoothing >= 0.0) || smoothing > 1.0 / 3.0) throw InvalidArgument("smoothing must lie in [0, 1/3]");
  if (!(ar_coefficient >= 0.0) || !(ar_coefficient < 1.0)) throw InvalidArgument("ar_coefficient must lie in [0, 1)");
  if (!(transit_share >= 0.0) || !(transit_share <= 1.0)) throw InvalidArgument("transit_share must lie in [0, 1]");
  if (latent_zones < 1) throw InvalidArgument("latent_zones must be positive");
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// D^{-1} A, with an identity row for isolated vertices.
MatrixXd row_normalized(const MatrixXd& a) {
  MatrixXd r = a;
  for (Index i = 0; i < a.rows(); ++i) {
    const double d = a.row(i).sum();
    if (d > 0.0) {
      r.row(i) /= d;
    } else {
      r(i, i) = 1.0;
    }
  }
  return r;
}

MatrixXd symmetric_normalized(const RelationGraph& g) {
  return MatrixXd::Identity(static_cast<Index>(g.vertex_count()), static_cast<Index>(g.vertex_count())) -
         normalized_laplacian(g);
}

MatrixXd synth_poi(const SynthConfig& cfg, std::mt19937_64& rng, MatrixXd& zone_mix) {
  const int rows = cfg.grid_rows, cols = cfg.grid_cols;
  const Index v = static_cast<Index>(rows) * cols;
  const Index zones = cfg.latent_zones;
  const Index cats = cfg.poi_categories;

  std::gamma_distribution<double> profile_draw(0.8, 1.0);
  MatrixXd profiles(zones, cats);
  for (Index z = 0; z < zones; ++z) {
    for (Index c = 0; c < cats; ++c) profiles(z, c) = profile_draw(rng) + 1e-3;
    profiles.row(z) /= profiles.row(z).sum();
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::pair<double, double>> centres;
  for (Index z = 0; z < zones; ++z) centres.emplace_back(unit(rng) * rows, unit(rng) * cols);
  const double width = std::max(rows, cols) / 3.0 + 0.5;

  zone_mix.resize(v, zones);
  Eigen::VectorXd density(v);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const Index i = static_cast<Index>(r) * cols + c;
      for (Index z = 0; z < zones; ++z) {
        const double dr = r + 0.5 - centres[static_cast<std::size_t>(z)].first;
        const double dc = c + 0.5 - centres[static_cast<std::size_t>(z)].second;
        zone_mix(i, z) = std::exp(-(dr * dr + dc * dc) / (2.0 * width * width)) + 0.05 * unit(rng);
      }
      zone_mix.row(i) /= zone_mix.row(i).sum();
      density(i) = 0.5 + unit(rng);
    }
  }

  MatrixXd poi(v, cats);
  for (Index i = 0; i < v; ++i) {
    for (Index c = 0; c < cats; ++c) {
      const double mean = 40.0 * density(i) * zone_mix.row(i).dot(profiles.col(c));
      std::poisson_distribution<int> count(std::max(mean, 1e-3));
      poi(i, c) = count(rng);
    }
    if (poi.row(i).sum() == 0.0) poi(i, 0) = 1.0;
  }
  return poi;
}

MatrixXd synth_road_links(const SynthConfig& cfg, std::mt19937_64& rng) {
  const int rows = cfg.grid_rows, cols = cfg.grid_cols;
  const Index v = static_cast<Index>(rows) * cols;
  MatrixXd conn = MatrixXd::Zero(v, v);
  auto link = [&](int r1, int c1, int r2, int c2) {
    const Index a = static_cast<Index>(r1) * cols + c1;
    const Index b = static_cast<Index>(r2) * cols + c2;
    if (a == b) return;
    conn(a, b) = 1.0;
    conn(b, a) = 1.0;
  };
  // Transit lines: stations every second cell along a row or column.
  const int lines = std::max(1, (rows + cols) / 3);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int k = 0; k < lines; ++k) {
    const bool horizontal = coin(rng) == 0;
    const int span = horizontal ? cols : rows;
    if (span < 3) continue;
    std::uniform_int_distribution<int> pick(0, (horizontal ? rows : cols) - 1);
    const int fixed = pick(rng);
    const int start = coin(rng);
    for (int s = start; s + 2 < span; s += 2) {
      if (horizontal) {
        link(fixed, s, fixed, s + 2);
      } else {
        link(s, fixed, s + 2, fixed);
      }
    }
  }
  // Express links between random far-apart regions.
  if (v > 1) {
    std::uniform_int_distribution<int> pr(0, rows - 1), pc(0, cols - 1);
    const Index extra = std::max<Index>(1, v / 6);
    for (Index k = 0; k < extra; ++k) {
      const int r1 = pr(rng), c1 = pc(rng), r2 = pr(rng), c2 = pc(rng);
      if (std::max(std::abs(r1 - r2), std::abs(c1 - c2)) >= 2) link(r1, c1, r2, c2);
    }
  }
  return conn;
}

}  // namespace

Dataset generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  Dataset ds;
  ds.grid_rows = cfg.grid_rows;
  ds.grid_cols = cfg.grid_cols;
  ds.neighborhood = build_neighborhood(cfg.grid_rows, cfg.grid_cols);
  MatrixXd zone_mix;
  ds.poi = synth_poi(cfg, rng, zone_mix);
  ds.poi_similarity = build_poi_similarity(ds.poi);
  ds.road_links = synth_road_links(cfg, rng);
  ds.road_connectivity = build_road_connectivity(ds.road_links, ds.neighborhood);

  const Index v = static_cast<Index>(ds.neighborhood.vertex_count());
  const std::size_t day = static_cast<std::size_t>(1440 / cfg.interval_minutes);
  const std::size_t week = 7 * day;
  const std::size_t total = week * static_cast<std::size_t>(cfg.weeks);

  // Region-level amplitude follows POI volume; phases follow the zone mixture.
  const Eigen::VectorXd poi_total = ds.poi.rowwise().sum();
  const double mean_total = poi_total.mean();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd amp(v), daily(v), weekly(v), phase(v), phase2(v), wphase(v);
  std::vector<double> zone_phase;
  for (int z = 0; z < cfg.latent_zones; ++z) zone_phase.push_back(kTwoPi * unit(rng));
  for (Index i = 0; i < v; ++i) {
    amp(i) = cfg.base_level * std::clamp(poi_total(i) / mean_total, 0.3, 2.5);
    daily(i) = 0.35 + 0.2 * zone_mix(i, 0);
    weekly(i) = 0.1 + 0.1 * unit(rng);
    double p = 0.0;
    for (int z = 0; z < cfg.latent_zones; ++z) p += zone_mix(i, z) * zone_phase[static_cast<std::size_t>(z)];
    phase(i) = p;
    phase2(i) = kTwoPi * unit(rng);
    wphase(i) = kTwoPi * unit(rng);
  }

  // One week of the periodic signal, smoothed over the three graphs.
  MatrixXd periodic(v, static_cast<Index>(week));
  for (std::size_t tau = 0; tau < week; ++tau) {
    const double d = static_cast<double>(tau % day) / static_cast<double>(day);
    const double w = static_cast<double>(tau) / static_cast<double>(week);
    for (Index i = 0; i < v; ++i) {
      periodic(i, static_cast<Index>(tau)) =
          amp(i) * (1.0 + daily(i) * std::sin(kTwoPi * d + phase(i)) +
                    0.15 * daily(i) * std::sin(2.0 * kTwoPi * d + phase2(i)) +
                    weekly(i) * std::sin(kTwoPi * w + wphase(i)));
    }
  }
  const MatrixXd eye = MatrixXd::Identity(v, v);
  const MatrixXd smoother = (1.0 - 3.0 * cfg.smoothing) * eye +
                            cfg.smoothing * (row_normalized(ds.neighborhood.adjacency()) +
                                             row_normalized(ds.poi_similarity.adjacency()) +
                                             row_normalized(ds.road_connectivity.adjacency()));
  const MatrixXd smoothed = smoother * periodic;

  // Disturbances hop along transit links, then spread to grid neighbours.
  const MatrixXd propagate = symmetric_normalized(ds.neighborhood) *
                             ((1.0 - cfg.transit_share) * eye + cfg.transit_share * symmetric_normalized(ds.road_connectivity));
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd disturbance = Eigen::VectorXd::Zero(v);
  auto step = [&]() {
    Eigen::VectorXd next = cfg.ar_coefficient * (propagate * disturbance);
    for (Index i = 0; i < v; ++i) next(i) += cfg.noise_scale * amp(i) * gauss(rng);
    disturbance = std::move(next);
  };
  if (cfg.noise_scale > 0.0) {
    for (std::size_t k = 0; k < 2 * day; ++k) step();
  }

  MatrixXd values(v, static_cast<Index>(total));
  for (std::size_t t = 0; t < total; ++t) {
    if (cfg.noise_scale > 0.0) step();
    const std::size_t tau = t % week;
    const double d = static_cast<double>(t % day) / static_cast<double>(day);
    const double weeks_elapsed = static_cast<double>(t) / static_cast<double>(week);
    for (Index i = 0; i < v; ++i) {
      double x = smoothed(i, static_cast<Index>(tau));
      if (cfg.noise_scale > 0.0) x += disturbance(i);
      if (cfg.drift_rate > 0.0) {
        x += cfg.drift_rate * weeks_elapsed * amp(i) * (1.0 + 0.5 * std::sin(kTwoPi * d + phase(i) + 1.5));
      }
      values(i, static_cast<Index>(t)) = std::max(0.0, x);
    }
  }
  ds.series.values = std::move(values);
  ds.series.interval_minutes = cfg.interval_minutes;
  ds.series.start_timestamp = "2017-03-01T00:00";
  ds.splits = default_splits(total, week);
  return ds;
}

std::filesystem::path write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_matrix_csv(dir / "demand.csv", ds.series.values);
  write_matrix_csv(dir / "poi.csv", ds.poi);
  write_matrix_csv(dir / "road.csv", ds.road_links);
  nlohmann::ordered_json j;
  j["vertex_count"] = ds.vertex_count();
  j["interval_minutes"] = ds.series.interval_minutes;
  j["start_timestamp"] = ds.series.start_timestamp;
  j["demand_csv"] = "demand.csv";
  j["poi_csv"] = "poi.csv";
  j["road_csv"] = "road.csv";
  j["grid_rows"] = ds.grid_rows;
  j["grid_cols"] = ds.grid_cols;
  j["splits"] = {{"train", {ds.splits.train.lo, ds.splits.train.hi}},
                 {"val", {ds.splits.val.lo, ds.splits.val.hi}},
                 {"test", {ds.splits.test.lo, ds.splits.test.hi}}};
  const auto path = dir / "manifest.json";
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw LoadError("failed writing " + path.string());
  return path;
}

namespace {

template <typename T>
T manifest_field(const nlohmann::json& j, const char* key, const std::filesystem::path& path) {
  if (!j.contains(key)) throw LoadError(path.string() + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + ": field '" + key + "' has the wrong type");
  }
}

IndexRange manifest_range(const nlohmann::json& splits, const char* key, const std::filesystem::path& path) {
  const auto v = manifest_field<std::vector<std::size_t>>(splits, key, path);
  if (v.size() != 2) throw LoadError(path.string() + ": split '" + key + "' must be [lo, hi]");
  return {v[0], v[1]};
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& rel) {
  std::filesystem::path p(rel);
  return p.is_absolute() ? p : base / p;
}

void check_rows(const MatrixXd& m, Index rows, const std::filesystem::path& file, const char* what) {
  if (m.rows() != rows) {
    throw LoadError(file.string() + ": expected " + std::to_string(rows) + " rows (" + what + "), got " +
                    std::to_string(m.rows()));
  }
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw LoadError("cannot open " + manifest_path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(manifest_path.string() + ": invalid JSON (" + e.what() + ")");
  }
  const auto base = manifest_path.parent_path();
  Dataset ds;
  ds.grid_rows = manifest_field<int>(j, "grid_rows", manifest_path);
  ds.grid_cols = manifest_field<int>(j, "grid_cols", manifest_path);
  const auto v = manifest_field<Index>(j, "vertex_count", manifest_path);
  if (ds.grid_rows < 1 || ds.grid_cols < 1 || static_cast<Index>(ds.grid_rows) * ds.grid_cols != v) {
    throw LoadError(manifest_path.string() + ": vertex_count does not equal grid_rows * grid_cols");
  }
  ds.series.interval_minutes = manifest_field<int>(j, "interval_minutes", manifest_path);
  if (j.contains("start_timestamp")) ds.series.start_timestamp = j["start_timestamp"].get<std::string>();

  const auto demand_path = resolve(base, manifest_field<std::string>(j, "demand_csv", manifest_path));
  const auto poi_path = resolve(base, manifest_field<std::string>(j, "poi_csv", manifest_path));
  const auto road_path = resolve(base, manifest_field<std::string>(j, "road_csv", manifest_path));

  ds.series.values = read_matrix_csv(demand_path);
  check_rows(ds.series.values, v, demand_path, "one per region");
  for (Index i = 0; i < v; ++i) {
    for (Index t = 0; t < ds.series.values.cols(); ++t) {
      const double x = ds.series.values(i, t);
      if (!std::isfinite(x) || x < 0.0) {
        throw LoadError(demand_path.string() + " (row " + std::to_string(i + 1) + "): demand must be nonnegative");
      }
    }
  }
  try {
    ds.series.validate();
    if (ds.series.length() < ds.series.intervals_per_week()) {
      throw InvalidArgument("series shorter than one week");
    }
  } catch (const InvalidArgument& e) {
    throw LoadError(demand_path.string() + ": " + e.what());
  }

  ds.poi = read_matrix_csv(poi_path);
  check_rows(ds.poi, v, poi_path, "one per region");
  for (Index i = 0; i < v; ++i) {
    if (!ds.poi.row(i).allFinite() || (ds.poi.row(i).array() < 0.0).any()) {
      throw LoadError(poi_path.string() + " (row " + std::to_string(i + 1) + "): POI counts must be nonnegative");
    }
  }

  ds.road_links = read_matrix_csv(road_path);
  check_rows(ds.road_links, v, road_path, "one per region");
  if (ds.road_links.cols() != v) throw LoadError(road_path.string() + ": connectivity matrix must be square");
  for (Index i = 0; i < v; ++i) {
    for (Index k = 0; k < v; ++k) {
      const double x = ds.road_links(i, k);
      const std::string row = road_path.string() + " (row " + std::to_string(i + 1) + ")";
      if (x != 0.0 && x != 1.0) throw LoadError(row + ": connectivity entries must be 0 or 1");
      if (i == k && x != 0.0) throw LoadError(row + ": connectivity diagonal must be zero");
      if (x != ds.road_links(k, i)) throw LoadError(row + ": connectivity matrix is not symmetric");
    }
  }

  ds.neighborhood = build_neighborhood(ds.grid_rows, ds.grid_cols);
  ds.poi_similarity = build_poi_similarity(ds.poi);
  ds.road_connectivity = build_road_connectivity(ds.road_links, ds.neighborhood);

  if (!j.contains("splits")) throw LoadError(manifest_path.string() + ": missing field 'splits'");
  const auto& sp = j["splits"];
  ds.splits.train = manifest_range(sp, "train", manifest_path);
  ds.splits.val = manifest_range(sp, "val", manifest_path);
  ds.splits.test = manifest_range(sp, "test", manifest_path);
  try {
    ds.splits.validate();
  } catch (const InvalidArgument& e) {
    throw LoadError(manifest_path.string() + ": " + e.what());
  }
  if (ds.splits.test.hi > ds.series.length()) {
    throw LoadError(manifest_path.string() + ": split ranges extend past the end of the series");
  }
  return ds;
}

double fit_scale(const DemandSeries& series, const SplitRanges& splits) {
  const Index cols = std::min<Index>(series.values.cols(), static_cast<Index>(std::max<std::size_t>(splits.train.hi, 1)));
  const double mx = series.values.leftCols(cols).maxCoeff();
  return mx > 0.0 ? mx : 1.0;
}

std::vector<Sample> scale_samples(std::vector<Sample> samples, double scale) {
  if (!(scale > 0.0)) throw InvalidArgument("scale must be positive");
  for (auto& s : samples) {
    s.input /= scale;
    s.target /= scale;
  }
  return samples;
}

}  // namespace mmgcn
