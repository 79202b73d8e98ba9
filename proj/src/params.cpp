#include "mmgcn/params.hpp"

#include <cmath>
#include <random>

#include "mmgcn/error.hpp"

namespace mmgcn {

std::string layer_kind_name(LayerKind k) { return k == LayerKind::Ggcn ? "ggcn" : "mrgcn"; }

std::string cov_mode_name(int mode) {
  static const char* names[] = {"I", "O", "C", "M"};
  if (mode < 0 || mode > 3) throw InvalidArgument("covariance mode must be in 0..3");
  return names[mode];
}

void NetworkConfig::validate() const {
  if (modalities < 1) throw InvalidArgument("network needs at least one modality");
  if (window < 1) throw InvalidArgument("input window must be positive");
  if (layers.empty()) throw InvalidArgument("network needs at least one layer");
  if (per_vertex_bias && vertex_count < 1) {
    throw InvalidArgument("per-vertex biases need a vertex count");
  }
  std::size_t in = window;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& spec = layers[l];
    if (spec.in_features != in) {
      throw InvalidArgument("layer " + std::to_string(l + 1) + " input dim does not match previous output");
    }
    if (spec.out_features < 1) throw InvalidArgument("layer output dim must be positive");
    in = spec.out_features;
  }
  if (in != 1) throw InvalidArgument("final layer must produce one feature per modality");
}

NetworkConfig default_network_config(std::size_t lower_layers) {
  NetworkConfig cfg;
  const std::size_t dims[] = {32, 64, 32, 1};
  std::size_t in = cfg.window;
  for (std::size_t l = 0; l < 4; ++l) {
    LayerSpec spec;
    spec.kind = l < lower_layers ? LayerKind::Ggcn : LayerKind::Mrgcn;
    spec.in_features = in;
    spec.out_features = dims[l];
    spec.activation = l + 1 == 4 ? Activation::Identity : Activation::ReLU;
    cfg.layers.push_back(spec);
    in = dims[l];
  }
  return cfg;
}

CovarianceSet CovarianceSet::identity(const Dims4& dims, const std::array<bool, 4>& frozen) {
  CovarianceSet set;
  for (std::size_t k = 0; k < 4; ++k) set.sigma[k] = SpdMatrix::identity(dims[k]);
  set.frozen = frozen;
  return set;
}

Dims4 CovarianceSet::dims() const {
  return {sigma[0].dim(), sigma[1].dim(), sigma[2].dim(), sigma[3].dim()};
}

GgcnLayerParams::GgcnLayerParams(std::size_t m, std::size_t t, std::size_t in, std::size_t out,
                                 std::size_t rows, Activation act)
    : modalities(m), terms(t), in_features(in), out_features(out), bias_rows(rows), activation(act),
      weights(m * m * t * in * out, 0.0), biases(m * rows * out, 0.0) {
  if (m == 0 || t == 0 || in == 0 || out == 0 || rows == 0) {
    throw InvalidArgument("GGCN layer dimensions must be positive");
  }
}

Eigen::Map<const RowMatrix> GgcnLayerParams::stacked(std::size_t src, std::size_t dst) const {
  return {weights.data() + block_offset(src, dst), static_cast<Eigen::Index>(terms * in_features),
          static_cast<Eigen::Index>(out_features)};
}

Eigen::Map<RowMatrix> GgcnLayerParams::stacked(std::size_t src, std::size_t dst) {
  return {weights.data() + block_offset(src, dst), static_cast<Eigen::Index>(terms * in_features),
          static_cast<Eigen::Index>(out_features)};
}

Eigen::Map<const RowMatrix> GgcnLayerParams::bias(std::size_t modality) const {
  return {biases.data() + modality * bias_rows * out_features, static_cast<Eigen::Index>(bias_rows),
          static_cast<Eigen::Index>(out_features)};
}

Eigen::Map<RowMatrix> GgcnLayerParams::bias(std::size_t modality) {
  return {biases.data() + modality * bias_rows * out_features, static_cast<Eigen::Index>(bias_rows),
          static_cast<Eigen::Index>(out_features)};
}

MrgcnLayerParams::MrgcnLayerParams(std::size_t m, std::size_t t, std::size_t in, std::size_t out,
                                   std::size_t rows, Activation act, bool prior,
                                   const std::array<bool, 4>& frozen)
    : weights(Dims4{in, out, t, m}), bias_rows(rows), activation(act), tensor_prior(prior),
      biases(m * rows * out, 0.0), covariances(CovarianceSet::identity(Dims4{in, out, t, m}, frozen)) {
  if (rows == 0) throw InvalidArgument("bias rows must be positive");
}

Eigen::MatrixXd MrgcnLayerParams::stacked(std::size_t modality) const {
  const std::size_t f1 = in_features(), f2 = out_features(), nt = terms();
  Eigen::MatrixXd s(static_cast<Eigen::Index>(nt * f1), static_cast<Eigen::Index>(f2));
  for (std::size_t a = 0; a < nt; ++a) {
    for (std::size_t r = 0; r < f1; ++r) {
      for (std::size_t c = 0; c < f2; ++c) {
        s(static_cast<Eigen::Index>(a * f1 + r), static_cast<Eigen::Index>(c)) = weights(r, c, a, modality);
      }
    }
  }
  return s;
}

void MrgcnLayerParams::set_stacked(std::size_t modality, const Eigen::MatrixXd& stack) {
  const std::size_t f1 = in_features(), f2 = out_features(), nt = terms();
  if (static_cast<std::size_t>(stack.rows()) != nt * f1 || static_cast<std::size_t>(stack.cols()) != f2) {
    throw InvalidArgument("stacked weight shape mismatch");
  }
  for (std::size_t a = 0; a < nt; ++a) {
    for (std::size_t r = 0; r < f1; ++r) {
      for (std::size_t c = 0; c < f2; ++c) {
        weights(r, c, a, modality) = stack(static_cast<Eigen::Index>(a * f1 + r), static_cast<Eigen::Index>(c));
      }
    }
  }
}

void MrgcnLayerParams::accumulate_stacked(std::size_t modality, const Eigen::MatrixXd& stack,
                                          std::span<double> flat) const {
  const std::size_t f1 = in_features(), f2 = out_features(), nt = terms();
  for (std::size_t a = 0; a < nt; ++a) {
    for (std::size_t r = 0; r < f1; ++r) {
      for (std::size_t c = 0; c < f2; ++c) {
        flat[weights.offset(r, c, a, modality)] +=
            stack(static_cast<Eigen::Index>(a * f1 + r), static_cast<Eigen::Index>(c));
      }
    }
  }
}

Eigen::Map<const RowMatrix> MrgcnLayerParams::bias(std::size_t modality) const {
  const std::size_t f2 = out_features();
  return {biases.data() + modality * bias_rows * f2, static_cast<Eigen::Index>(bias_rows),
          static_cast<Eigen::Index>(f2)};
}

NetworkParams init_network(const NetworkConfig& config, std::uint64_t seed, const std::array<bool, 4>& frozen) {
  config.validate();
  NetworkParams params;
  params.config = config;
  std::mt19937_64 rng(seed);
  const std::size_t m = config.modalities;
  const std::size_t nt = config.terms();
  for (const auto& spec : config.layers) {
    const std::size_t f1 = spec.in_features, f2 = spec.out_features;
    const double limit = std::sqrt(6.0 / static_cast<double>(f1 + f2));
    std::uniform_real_distribution<double> dist(-limit, limit);
    if (spec.kind == LayerKind::Ggcn) {
      GgcnLayerParams layer(m, nt, f1, f2, config.bias_rows(), spec.activation);
      for (double& w : layer.weights) w = dist(rng);
      params.layers.emplace_back(std::move(layer));
    } else {
      MrgcnLayerParams layer(m, nt, f1, f2, config.bias_rows(), spec.activation, spec.tensor_prior, frozen);
      // Fill slice by slice so each (modality, term) matrix gets consecutive draws.
      for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t a = 0; a < nt; ++a) {
          for (std::size_t r = 0; r < f1; ++r) {
            for (std::size_t c = 0; c < f2; ++c) layer.weights(r, c, a, j) = dist(rng);
          }
        }
      }
      params.layers.emplace_back(std::move(layer));
    }
  }
  return params;
}

std::span<double> weight_data(LayerParams& layer) {
  return std::visit(
      [](auto& l) -> std::span<double> {
        if constexpr (std::is_same_v<std::decay_t<decltype(l)>, GgcnLayerParams>) {
          return l.weights;
        } else {
          return l.weights.data();
        }
      },
      layer);
}

std::span<const double> weight_data(const LayerParams& layer) {
  return weight_data(const_cast<LayerParams&>(layer));
}

std::span<double> bias_data(LayerParams& layer) {
  return std::visit([](auto& l) -> std::span<double> { return l.biases; }, layer);
}

std::span<const double> bias_data(const LayerParams& layer) { return bias_data(const_cast<LayerParams&>(layer)); }

ParamBuffers zeros_like(const NetworkParams& params) {
  ParamBuffers out;
  out.reserve(params.layers.size());
  for (const auto& layer : params.layers) {
    out.push_back({std::vector<double>(weight_data(layer).size(), 0.0),
                   std::vector<double>(bias_data(layer).size(), 0.0)});
  }
  return out;
}

std::size_t parameter_count(const NetworkParams& params) {
  std::size_t n = 0;
  for (const auto& layer : params.layers) n += weight_data(layer).size() + bias_data(layer).size();
  return n;
}

std::vector<double> flatten(const NetworkParams& params) {
  std::vector<double> flat;
  flat.reserve(parameter_count(params));
  for (const auto& layer : params.layers) {
    const auto w = weight_data(layer);
    const auto b = bias_data(layer);
    flat.insert(flat.end(), w.begin(), w.end());
    flat.insert(flat.end(), b.begin(), b.end());
  }
  return flat;
}

std::vector<double> flatten(const ParamBuffers& buffers) {
  std::vector<double> flat;
  for (const auto& layer : buffers) {
    flat.insert(flat.end(), layer.weights.begin(), layer.weights.end());
    flat.insert(flat.end(), layer.biases.begin(), layer.biases.end());
  }
  return flat;
}

void unflatten(std::span<const double> flat, NetworkParams& params) {
  if (flat.size() != parameter_count(params)) throw InvalidArgument("flat parameter vector has wrong length");
  std::size_t pos = 0;
  for (auto& layer : params.layers) {
    for (auto span : {weight_data(layer), bias_data(layer)}) {
      std::copy(flat.begin() + static_cast<std::ptrdiff_t>(pos),
                flat.begin() + static_cast<std::ptrdiff_t>(pos + span.size()), span.begin());
      pos += span.size();
    }
  }
}

}  // namespace mmgcn
