#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mmgcn/graphs.hpp"

namespace mmgcn {

/// |V| x T_total nonnegative observations at a fixed interval.
struct DemandSeries {
  Eigen::MatrixXd values;
  int interval_minutes = 30;
  std::string start_timestamp = "1970-01-01T00:00";

  std::size_t vertex_count() const noexcept { return static_cast<std::size_t>(values.rows()); }
  std::size_t length() const noexcept { return static_cast<std::size_t>(values.cols()); }
  std::size_t intervals_per_day() const;
  std::size_t intervals_per_week() const { return 7 * intervals_per_day(); }
  /// Throws InvalidArgument on negative/non-finite values or an interval that does not divide a day.
  void validate() const;
};

/// Input columns are ordered [t-1, t-2, t-3, t-day, t-week].
struct Sample {
  Eigen::MatrixXd input;   // |V| x 5
  Eigen::MatrixXd target;  // |V| x 1
  std::size_t target_index = 0;
};

inline constexpr std::size_t kWindowSlots = 5;

/// One sample per target index t in [week, T_total).
std::vector<Sample> make_windows(const DemandSeries& series);

/// Half-open interval of target indices [lo, hi).
struct IndexRange {
  std::size_t lo = 0;
  std::size_t hi = 0;

  bool empty() const noexcept { return hi <= lo; }
  bool contains(std::size_t t) const noexcept { return t >= lo && t < hi; }
};

struct SplitRanges {
  IndexRange train, val, test;
  /// Throws InvalidArgument unless each range is well formed and train < val < test without overlap.
  void validate() const;
};

struct DatasetSplit {
  std::vector<Sample> train, val, test;
};

/// Partitions by target index; samples outside every range are dropped.
DatasetSplit split_dataset(const std::vector<Sample>& samples, const SplitRanges& ranges);

struct SynthConfig {
  int grid_rows = 6;
  int grid_cols = 6;
  int poi_categories = 13;
  int weeks = 8;
  int interval_minutes = 30;
  double drift_rate = 0.0;
  double noise_scale = 0.0;
  std::uint64_t seed = 0;
  // Generator shape knobs.
  double base_level = 20.0;     // mean demand of an average region
  double smoothing = 0.15;      // per-graph weight of the spatial smoothing operator
  double ar_coefficient = 0.8;  // persistence of the cross-graph disturbance process
  double transit_share = 0.5;   // share of each disturbance step that hops along a transit link first
  int latent_zones = 3;         // POI mixture components

  void validate() const;
};

/// A city: the three modality graphs over the grid plus the raw inputs they came from.
struct Dataset {
  int grid_rows = 0;
  int grid_cols = 0;
  RelationGraph neighborhood{Modality::Neighborhood, Eigen::MatrixXd::Zero(1, 1)};
  RelationGraph poi_similarity{Modality::PoiSimilarity, Eigen::MatrixXd::Zero(1, 1)};
  RelationGraph road_connectivity{Modality::RoadConnectivity, Eigen::MatrixXd::Zero(1, 1)};
  Eigen::MatrixXd poi;        // |V| x categories
  Eigen::MatrixXd road_links; // |V| x |V| 0/1 direct connections, before neighbour removal
  DemandSeries series;
  SplitRanges splits;

  std::size_t vertex_count() const noexcept { return series.vertex_count(); }
  /// The graphs in modality order (N, P, R).
  std::array<const RelationGraph*, 3> graphs() const {
    return {&neighborhood, &poi_similarity, &road_connectivity};
  }
};

/// Week-aligned default split: all but the last two weeks train, then one week each of val and test.
SplitRanges default_splits(std::size_t length, std::size_t week);

Dataset generate_synthetic(const SynthConfig& cfg);

/// Writes demand.csv, poi.csv, road.csv and manifest.json into `dir`.
std::filesystem::path write_dataset(const Dataset& ds, const std::filesystem::path& dir);

/// Reads a manifest (paths relative to the manifest's directory) and validates every file.
/// Throws LoadError naming the offending file (and row where applicable).
Dataset load_dataset(const std::filesystem::path& manifest_path);

/// Divisor that maps the training portion (columns < train.hi) into [0, 1].
double fit_scale(const DemandSeries& series, const SplitRanges& splits);
std::vector<Sample> scale_samples(std::vector<Sample> samples, double scale);

}  // namespace mmgcn
