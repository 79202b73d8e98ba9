#include "mmgcn/layers.hpp"

#include <cmath>

#include "mmgcn/error.hpp"

namespace mmgcn {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;

Index idx(std::size_t n) { return static_cast<Index>(n); }

void check_bases(const std::vector<LaplacianBasis>& bases, std::size_t modalities, std::size_t terms) {
  if (bases.size() != modalities) throw InvalidArgument("need exactly one Laplacian basis per modality");
  for (const auto& b : bases) {
    if (b.terms() != terms) throw InvalidArgument("basis degree does not match layer polynomial degree");
    if (b.vertex_count() != bases.front().vertex_count()) {
      throw InvalidArgument("modality graphs differ in vertex count");
    }
  }
}

void check_inputs(const std::vector<MatrixXd>& xs, const std::vector<LaplacianBasis>& bases, std::size_t in) {
  if (xs.size() != bases.size()) throw InvalidArgument("modality count of inputs and bases differ");
  for (const auto& x : xs) {
    if (static_cast<std::size_t>(x.rows()) != bases.front().vertex_count() ||
        static_cast<std::size_t>(x.cols()) != in) {
      throw InvalidArgument("layer input has the wrong shape");
    }
  }
}

// [P_0 X | P_1 X | ... | P_K X]
MatrixXd propagate(const MatrixXd& x, const LaplacianBasis& basis) {
  const Index f = x.cols();
  MatrixXd h(x.rows(), f * idx(basis.terms()));
  h.leftCols(f) = x;
  for (std::size_t a = 1; a < basis.terms(); ++a) {
    h.middleCols(idx(a) * f, f).noalias() = basis.powers[a] * x;
  }
  return h;
}

template <typename BiasMap>
void add_bias(MatrixXd& z, const BiasMap& bias) {
  if (bias.rows() == 1) {
    z.rowwise() += bias.row(0);
  } else {
    if (bias.rows() != z.rows()) throw InvalidArgument("per-vertex bias rows do not match vertex count");
    z += bias;
  }
}

MatrixXd activate(const MatrixXd& z, Activation act) {
  return act == Activation::ReLU ? MatrixXd(z.cwiseMax(0.0)) : z;
}

// Per-layer precomputed weight stacks; GGCN layers read their maps directly.
using MrgcnStacks = std::vector<std::vector<MatrixXd>>;

MrgcnStacks build_stacks(const NetworkParams& params) {
  MrgcnStacks stacks(params.layers.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    if (const auto* m = std::get_if<MrgcnLayerParams>(&params.layers[l])) {
      for (std::size_t j = 0; j < m->modalities(); ++j) stacks[l].push_back(m->stacked(j));
    }
  }
  return stacks;
}

void run_ggcn(const GgcnLayerParams& p, const std::vector<LaplacianBasis>& bases, LayerTrace& t) {
  const std::size_t m = p.modalities;
  t.preactivation.assign(m, MatrixXd::Zero(t.propagated.front().rows(), idx(p.out_features)));
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < m; ++i) t.preactivation[j].noalias() += t.propagated[i] * p.stacked(i, j);
    add_bias(t.preactivation[j], p.bias(j));
  }
  t.output.resize(m);
  for (std::size_t j = 0; j < m; ++j) t.output[j] = activate(t.preactivation[j], p.activation);
  (void)bases;
}

void run_mrgcn(const MrgcnLayerParams& p, const std::vector<MatrixXd>& stacks, LayerTrace& t) {
  const std::size_t m = p.modalities();
  t.preactivation.resize(m);
  t.output.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    t.preactivation[j].noalias() = t.propagated[j] * stacks[j];
    add_bias(t.preactivation[j], p.bias(j));
    t.output[j] = activate(t.preactivation[j], p.activation);
  }
}

void check_network(const Eigen::MatrixXd& x, const std::vector<LaplacianBasis>& bases, const NetworkParams& params) {
  const auto& cfg = params.config;
  if (params.layers.size() != cfg.layers.size() || params.layers.empty()) {
    throw InvalidArgument("network parameters do not match their configuration");
  }
  check_bases(bases, cfg.modalities, cfg.terms());
  if (static_cast<std::size_t>(x.rows()) != bases.front().vertex_count() ||
      static_cast<std::size_t>(x.cols()) != cfg.window) {
    throw InvalidArgument("input window has the wrong shape");
  }
}

ForwardTrace trace_with(const MatrixXd& x, const std::vector<LaplacianBasis>& bases, const NetworkParams& params,
                        const MrgcnStacks& stacks) {
  const std::size_t m = params.config.modalities;
  ForwardTrace tr;
  tr.layers.resize(params.layers.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& t = tr.layers[l];
    t.propagated.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      const MatrixXd& in = l == 0 ? x : tr.layers[l - 1].output[i];
      t.propagated[i] = propagate(in, bases[i]);
    }
    if (const auto* g = std::get_if<GgcnLayerParams>(&params.layers[l])) {
      run_ggcn(*g, bases, t);
    } else {
      run_mrgcn(std::get<MrgcnLayerParams>(params.layers[l]), stacks[l], t);
    }
  }
  tr.prediction = fusion_forward(tr.layers.back().output);
  return tr;
}

// Accumulates d(prediction . dpred) into grads.
void backward(const ForwardTrace& tr, const MatrixXd& dpred, const std::vector<LaplacianBasis>& bases,
              const NetworkParams& params, const MrgcnStacks& stacks, ParamBuffers& grads) {
  const std::size_t m = params.config.modalities;
  std::vector<MatrixXd> d_out(m, dpred / static_cast<double>(m));
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const auto& t = tr.layers[l];
    const Activation act = std::visit([](const auto& p) { return p.activation; }, params.layers[l]);
    const std::size_t bias_rows = std::visit([](const auto& p) { return p.bias_rows; }, params.layers[l]);
    std::vector<MatrixXd> dz(m);
    for (std::size_t j = 0; j < m; ++j) {
      dz[j] = act == Activation::ReLU
                  ? MatrixXd((t.preactivation[j].array() > 0.0).select(d_out[j].array(), 0.0).matrix())
                  : d_out[j];
      const Index f2 = dz[j].cols();
      Eigen::Map<RowMatrix> gb(grads[l].biases.data() + j * bias_rows * static_cast<std::size_t>(f2),
                               idx(bias_rows), f2);
      if (bias_rows == 1) {
        gb.row(0) += dz[j].colwise().sum();
      } else {
        gb += dz[j];
      }
    }
    std::vector<MatrixXd> dh(m);
    if (const auto* g = std::get_if<GgcnLayerParams>(&params.layers[l])) {
      for (std::size_t i = 0; i < m; ++i) {
        dh[i] = MatrixXd::Zero(t.propagated[i].rows(), t.propagated[i].cols());
        for (std::size_t j = 0; j < m; ++j) {
          Eigen::Map<RowMatrix> gw(grads[l].weights.data() + g->block_offset(i, j),
                                   idx(g->terms * g->in_features), idx(g->out_features));
          gw.noalias() += t.propagated[i].transpose() * dz[j];
          if (l > 0) dh[i].noalias() += dz[j] * g->stacked(i, j).transpose();
        }
      }
    } else {
      const auto& p = std::get<MrgcnLayerParams>(params.layers[l]);
      for (std::size_t j = 0; j < m; ++j) {
        p.accumulate_stacked(j, t.propagated[j].transpose() * dz[j], grads[l].weights);
        if (l > 0) dh[j].noalias() = dz[j] * stacks[l][j].transpose();
      }
    }
    if (l == 0) break;
    const Index f1 = tr.layers[l - 1].output.front().cols();
    for (std::size_t i = 0; i < m; ++i) {
      MatrixXd dx = dh[i].leftCols(f1);
      for (std::size_t a = 1; a < bases[i].terms(); ++a) {
        dx.noalias() += bases[i].powers[a].transpose() * dh[i].middleCols(idx(a) * f1, f1);
      }
      d_out[i] = std::move(dx);
    }
  }
}

struct RegTerms {
  double group = 0.0;
  double tensor = 0.0;
};

RegTerms regularizers(const NetworkParams& params, const RegularizerConfig& reg, ParamBuffers* grads) {
  RegTerms out;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    if (const auto* g = std::get_if<GgcnLayerParams>(&params.layers[l])) {
      if (reg.alpha_low == 0.0) continue;
      auto r = group_lasso(*g, reg.alpha_intra);
      out.group += r.loss;
      if (grads) {
        auto& gw = (*grads)[l].weights;
        for (std::size_t k = 0; k < gw.size(); ++k) gw[k] += reg.alpha_low * r.grad[k];
      }
    } else {
      const auto& p = std::get<MrgcnLayerParams>(params.layers[l]);
      if (!p.tensor_prior || reg.alpha_high == 0.0) continue;
      auto r = tensor_normal_loss(p.weights, p.covariances);
      out.tensor += r.loss;
      if (grads) {
        auto& gw = (*grads)[l].weights;
        const auto gd = r.grad.data();
        for (std::size_t k = 0; k < gw.size(); ++k) gw[k] += reg.alpha_high * gd[k];
      }
    }
  }
  return out;
}

}  // namespace

Eigen::MatrixXd cheb_conv(const Eigen::MatrixXd& x, const LaplacianBasis& basis,
                          std::span<const Eigen::MatrixXd> weights) {
  if (weights.size() != basis.terms()) throw InvalidArgument("need one weight matrix per basis term");
  if (static_cast<std::size_t>(x.rows()) != basis.vertex_count()) {
    throw InvalidArgument("signal rows do not match graph size");
  }
  const Index f2 = weights.front().cols();
  MatrixXd out = MatrixXd::Zero(x.rows(), f2);
  for (std::size_t a = 0; a < basis.terms(); ++a) {
    if (weights[a].rows() != x.cols() || weights[a].cols() != f2) {
      throw InvalidArgument("convolution weight shape mismatch");
    }
    out.noalias() += basis.powers[a] * (x * weights[a]);
  }
  return out;
}

std::vector<Eigen::MatrixXd> ggcn_forward(const std::vector<Eigen::MatrixXd>& xs,
                                          const std::vector<LaplacianBasis>& bases,
                                          const GgcnLayerParams& params) {
  check_bases(bases, params.modalities, params.terms);
  check_inputs(xs, bases, params.in_features);
  LayerTrace t;
  for (std::size_t i = 0; i < xs.size(); ++i) t.propagated.push_back(propagate(xs[i], bases[i]));
  run_ggcn(params, bases, t);
  return t.output;
}

std::vector<Eigen::MatrixXd> mrgcn_forward(const std::vector<Eigen::MatrixXd>& xs,
                                           const std::vector<LaplacianBasis>& bases,
                                           const MrgcnLayerParams& params) {
  check_bases(bases, params.modalities(), params.terms());
  check_inputs(xs, bases, params.in_features());
  LayerTrace t;
  std::vector<MatrixXd> stacks;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    t.propagated.push_back(propagate(xs[i], bases[i]));
    stacks.push_back(params.stacked(i));
  }
  run_mrgcn(params, stacks, t);
  return t.output;
}

Eigen::MatrixXd fusion_forward(const std::vector<Eigen::MatrixXd>& xs) {
  if (xs.empty()) throw InvalidArgument("fusion needs at least one modality");
  MatrixXd sum = MatrixXd::Zero(xs.front().rows(), 1);
  for (const auto& x : xs) {
    if (x.cols() != 1) throw InvalidArgument("fusion inputs must have feature dimension 1");
    if (x.rows() != sum.rows()) throw InvalidArgument("fusion inputs differ in vertex count");
    sum += x;
  }
  return sum / static_cast<double>(xs.size());
}

ForwardTrace forward_trace(const Eigen::MatrixXd& x_window, const std::vector<LaplacianBasis>& bases,
                           const NetworkParams& params) {
  check_network(x_window, bases, params);
  return trace_with(x_window, bases, params, build_stacks(params));
}

Eigen::MatrixXd network_forward(const Eigen::MatrixXd& x_window, const std::vector<LaplacianBasis>& bases,
                                const NetworkParams& params) {
  return forward_trace(x_window, bases, params).prediction;
}

Eigen::MatrixXd predict_batch(std::span<const Sample> samples, const std::vector<LaplacianBasis>& bases,
                              const NetworkParams& params) {
  if (samples.empty()) return {};
  const auto stacks = build_stacks(params);
  MatrixXd out(idx(samples.size()), samples.front().input.rows());
  for (std::size_t s = 0; s < samples.size(); ++s) {
    check_network(samples[s].input, bases, params);
    out.row(idx(s)) = trace_with(samples[s].input, bases, params, stacks).prediction.transpose();
  }
  return out;
}

namespace {

template <bool kWithGrad>
GradientResult evaluate(std::span<const Sample> batch, const std::vector<LaplacianBasis>& bases,
                        const NetworkParams& params, const RegularizerConfig& reg) {
  if (batch.empty()) throw InvalidArgument("batch must not be empty");
  const auto stacks = build_stacks(params);
  std::vector<ForwardTrace> traces;
  traces.reserve(batch.size());
  double sq = 0.0;
  std::size_t cells = 0;
  for (const auto& s : batch) {
    check_network(s.input, bases, params);
    if (s.target.rows() != s.input.rows() || s.target.cols() != 1) {
      throw InvalidArgument("sample target must be |V| x 1");
    }
    traces.push_back(trace_with(s.input, bases, params, stacks));
    sq += (traces.back().prediction - s.target).squaredNorm();
    cells += static_cast<std::size_t>(s.target.rows());
  }
  GradientResult out;
  out.loss.data = std::sqrt(sq / static_cast<double>(cells) + kRmseSmoothing);
  if constexpr (kWithGrad) {
    out.grads = zeros_like(params);
    const double coef = 1.0 / (static_cast<double>(cells) * out.loss.data);
    for (std::size_t k = 0; k < batch.size(); ++k) {
      backward(traces[k], coef * (traces[k].prediction - batch[k].target), bases, params, stacks, out.grads);
    }
  }
  const RegTerms r = regularizers(params, reg, kWithGrad ? &out.grads : nullptr);
  out.loss.group = r.group;
  out.loss.tensor = r.tensor;
  out.loss.total = out.loss.data + reg.alpha_low * r.group + reg.alpha_high * r.tensor;
  return out;
}

}  // namespace

LossBreakdown objective(std::span<const Sample> batch, const std::vector<LaplacianBasis>& bases,
                        const NetworkParams& params, const RegularizerConfig& reg) {
  return evaluate<false>(batch, bases, params, reg).loss;
}

GradientResult network_gradients(std::span<const Sample> batch, const std::vector<LaplacianBasis>& bases,
                                 const NetworkParams& params, const RegularizerConfig& reg) {
  return evaluate<true>(batch, bases, params, reg);
}

}  // namespace mmgcn
