#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "mmgcn/graphs.hpp"
#include "mmgcn/numerics.hpp"

namespace mmgcn {

enum class LayerKind { Ggcn, Mrgcn };
enum class Activation { ReLU, Identity };

/// Covariance modes of the MRGCN weight tensor.
enum CovMode : int { kModeInput = 0, kModeOutput = 1, kModeChebyshev = 2, kModeModality = 3 };

std::string layer_kind_name(LayerKind k);
std::string cov_mode_name(int mode);

struct LayerSpec {
  LayerKind kind = LayerKind::Ggcn;
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  Activation activation = Activation::ReLU;
  // MRGCN only: whether the tensor-normal prior (J2) and covariance updates apply.
  bool tensor_prior = true;
};

struct NetworkConfig {
  std::size_t modalities = 3;
  std::size_t degree = 4;  // K; each convolution has K + 1 terms
  std::size_t window = 5;  // input slots per vertex
  BasisKind basis = BasisKind::Power;
  // Per-vertex biases (|V| x f) instead of per-feature vectors broadcast over vertices.
  bool per_vertex_bias = false;
  std::size_t vertex_count = 0;  // required when per_vertex_bias is set
  std::vector<LayerSpec> layers;

  std::size_t terms() const noexcept { return degree + 1; }
  std::size_t bias_rows() const noexcept { return per_vertex_bias ? vertex_count : 1; }
  /// Throws InvalidArgument if consecutive layer dims disagree or the last layer is not 1-wide.
  void validate() const;
};

/// Hidden dims (32, 64, 32, 1) with `lower` GGCN layers followed by MRGCN layers.
NetworkConfig default_network_config(std::size_t lower_layers = 2);

/// Four mode covariances (I, O, C, M). Frozen modes are held at exactly I.
struct CovarianceSet {
  std::array<SpdMatrix, 4> sigma;
  std::array<bool, 4> frozen{false, false, false, false};

  static CovarianceSet identity(const Dims4& dims, const std::array<bool, 4>& frozen);
  Dims4 dims() const;
};

/// Lower-layer weights: modality blocks w_{i,j} (source i -> target j), each a
/// stack of K+1 matrices f1 x f2. Storage order (i, j, a, r, c), last fastest,
/// so the stack for (i, j) is a contiguous (K+1)f1 x f2 row-major matrix.
struct GgcnLayerParams {
  std::size_t modalities = 0;
  std::size_t terms = 0;
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  std::size_t bias_rows = 1;
  Activation activation = Activation::ReLU;
  std::vector<double> weights;
  std::vector<double> biases;  // (j, row, feature)

  GgcnLayerParams() = default;
  GgcnLayerParams(std::size_t modalities, std::size_t terms, std::size_t in, std::size_t out,
                  std::size_t bias_rows, Activation activation);

  std::size_t block_size() const noexcept { return terms * in_features * out_features; }
  std::size_t block_offset(std::size_t src, std::size_t dst) const noexcept {
    return (src * modalities + dst) * block_size();
  }
  Eigen::Map<const RowMatrix> stacked(std::size_t src, std::size_t dst) const;
  Eigen::Map<RowMatrix> stacked(std::size_t src, std::size_t dst);
  Eigen::Map<const RowMatrix> bias(std::size_t modality) const;
  Eigen::Map<RowMatrix> bias(std::size_t modality);
};

/// Higher-layer weights: intra-modality only, as a Tensor4 with dims
/// [f1, f2, K+1, |M|], plus the tensor-normal covariances.
struct MrgcnLayerParams {
  Tensor4 weights;
  std::size_t bias_rows = 1;
  Activation activation = Activation::ReLU;
  bool tensor_prior = true;
  std::vector<double> biases;  // (j, row, feature)
  CovarianceSet covariances;

  MrgcnLayerParams() = default;
  MrgcnLayerParams(std::size_t modalities, std::size_t terms, std::size_t in, std::size_t out,
                   std::size_t bias_rows, Activation activation, bool tensor_prior,
                   const std::array<bool, 4>& frozen);

  std::size_t modalities() const noexcept { return weights.dims()[3]; }
  std::size_t terms() const noexcept { return weights.dims()[2]; }
  std::size_t in_features() const noexcept { return weights.dims()[0]; }
  std::size_t out_features() const noexcept { return weights.dims()[1]; }

  /// (K+1)f1 x f2 stack of the modality's weight matrices, copied out of the tensor.
  Eigen::MatrixXd stacked(std::size_t modality) const;
  void set_stacked(std::size_t modality, const Eigen::MatrixXd& stack);
  /// Adds a stacked-layout gradient into a flat buffer laid out like `weights`.
  void accumulate_stacked(std::size_t modality, const Eigen::MatrixXd& stack, std::span<double> flat) const;
  Eigen::Map<const RowMatrix> bias(std::size_t modality) const;
};

using LayerParams = std::variant<GgcnLayerParams, MrgcnLayerParams>;

struct NetworkParams {
  NetworkConfig config;
  std::vector<LayerParams> layers;
};

/// Flat buffers congruent to one layer's trainable parameters.
struct LayerBuffers {
  std::vector<double> weights;
  std::vector<double> biases;
};
using ParamBuffers = std::vector<LayerBuffers>;

/// Builds parameters with weights uniform in +-sqrt(6 / (f1 + f2)), zero biases
/// and identity covariances (frozen per `frozen`).
NetworkParams init_network(const NetworkConfig& config, std::uint64_t seed,
                           const std::array<bool, 4>& frozen = {true, true, false, false});

std::span<double> weight_data(LayerParams& layer);
std::span<const double> weight_data(const LayerParams& layer);
std::span<double> bias_data(LayerParams& layer);
std::span<const double> bias_data(const LayerParams& layer);

ParamBuffers zeros_like(const NetworkParams& params);
std::size_t parameter_count(const NetworkParams& params);

/// Concatenates weights then biases of every layer, in layer order.
std::vector<double> flatten(const NetworkParams& params);
std::vector<double> flatten(const ParamBuffers& buffers);
void unflatten(std::span<const double> flat, NetworkParams& params);

}  // namespace mmgcn
