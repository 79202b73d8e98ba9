#include "support.hpp"

#include <cmath>

namespace testing {

using Eigen::Index;
using Eigen::MatrixXd;
using mmgcn::Dims4;
using mmgcn::Tensor4;

MatrixXd random_matrix(Rng& rng, Index rows, Index cols, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = u(rng);
  }
  return m;
}

MatrixXd random_spd(Rng& rng, Index n, double shift) {
  const MatrixXd b = random_matrix(rng, n, n);
  MatrixXd s = b * b.transpose() + shift * MatrixXd::Identity(n, n);
  return 0.5 * (s + s.transpose());
}

MatrixXd random_adjacency(Rng& rng, Index n, double sparsity, bool weighted) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MatrixXd a = MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      if (u(rng) < sparsity) continue;
      a(i, j) = a(j, i) = weighted ? 0.1 + u(rng) : 1.0;
    }
  }
  return a;
}

Tensor4 random_tensor(Rng& rng, const Dims4& dims) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> data(dims[0] * dims[1] * dims[2] * dims[3]);
  for (auto& x : data) x = u(rng);
  return Tensor4(dims, std::move(data));
}

MatrixXd kron(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd k(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  }
  return k;
}

Eigen::VectorXd brute_vec(const Tensor4& t) {
  const Dims4& d = t.dims();
  Eigen::VectorXd v(static_cast<Index>(t.size()));
  Index k = 0;
  for (std::size_t i = 0; i < d[0]; ++i)
    for (std::size_t o = 0; o < d[1]; ++o)
      for (std::size_t c = 0; c < d[2]; ++c)
        for (std::size_t m = 0; m < d[3]; ++m) v(k++) = t(i, o, c, m);
  return v;
}

double brute_quadratic(const Tensor4& t, const std::array<MatrixXd, 4>& f) {
  const MatrixXd big = kron(kron(kron(f[0], f[1]), f[2]), f[3]);
  const Eigen::VectorXd v = brute_vec(t);
  return v.dot(big * v);
}

MatrixXd brute_unfold(const Tensor4& t, int mode) {
  const Dims4& d = t.dims();
  const auto md = static_cast<std::size_t>(mode);
  MatrixXd u(static_cast<Index>(d[md]), static_cast<Index>(t.size() / d[md]));
  std::array<std::size_t, 4> idx{};
  for (idx[0] = 0; idx[0] < d[0]; ++idx[0])
    for (idx[1] = 0; idx[1] < d[1]; ++idx[1])
      for (idx[2] = 0; idx[2] < d[2]; ++idx[2])
        for (idx[3] = 0; idx[3] < d[3]; ++idx[3]) {
          // Column: the remaining indices, in canonical order, last fastest.
          std::size_t col = 0;
          for (std::size_t k = 0; k < 4; ++k) {
            if (k != md) col = col * d[k] + idx[k];
          }
          u(static_cast<Index>(idx[md]), static_cast<Index>(col)) = t(idx[0], idx[1], idx[2], idx[3]);
        }
  return u;
}

MatrixXd brute_flip_flop(const Tensor4& t, const std::array<MatrixXd, 4>& sigma, int mode, double eps,
                         bool inverse) {
  MatrixXd k = MatrixXd::Identity(1, 1);
  for (int m = 0; m < 4; ++m) {
    if (m == mode) continue;
    const MatrixXd& s = sigma[static_cast<std::size_t>(m)];
    k = kron(k, inverse ? MatrixXd(s.inverse()) : s);
  }
  const MatrixXd u = brute_unfold(t, mode);
  const double di = static_cast<double>(t.dim(mode));
  const MatrixXd s = (di / static_cast<double>(t.size())) * u * k * u.transpose();
  return s + eps * MatrixXd::Identity(s.rows(), s.cols());
}

MatrixXd brute_laplacian(const MatrixXd& a) {
  const Index n = a.rows();
  std::vector<double> inv_sqrt(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    double d = 0.0;
    for (Index j = 0; j < n; ++j) d += a(i, j);
    inv_sqrt[static_cast<std::size_t>(i)] = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
  }
  MatrixXd l(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      l(i, j) = (i == j ? 1.0 : 0.0) -
                inv_sqrt[static_cast<std::size_t>(i)] * a(i, j) * inv_sqrt[static_cast<std::size_t>(j)];
    }
  }
  return l;
}

std::vector<MatrixXd> brute_powers(const MatrixXd& l, int k) {
  std::vector<MatrixXd> p{MatrixXd::Identity(l.rows(), l.cols())};
  for (int a = 1; a <= k; ++a) p.push_back(p.back() * l);
  return p;
}

std::vector<MatrixXd> brute_basis(const MatrixXd& l, int k, mmgcn::BasisKind kind) {
  if (kind == mmgcn::BasisKind::Power) return brute_powers(l, k);
  const MatrixXd id = MatrixXd::Identity(l.rows(), l.cols());
  const MatrixXd t = l - id;
  std::vector<MatrixXd> out{id};
  if (k >= 1) out.push_back(t);
  for (int a = 2; a <= k; ++a) out.push_back(2.0 * t * out[static_cast<std::size_t>(a - 1)] - out[static_cast<std::size_t>(a - 2)]);
  return out;
}

std::vector<MatrixXd> ggcn_block(const mmgcn::GgcnLayerParams& p, std::size_t src, std::size_t dst) {
  std::vector<MatrixXd> out;
  for (std::size_t a = 0; a < p.terms; ++a) {
    MatrixXd w(static_cast<Index>(p.in_features), static_cast<Index>(p.out_features));
    for (std::size_t r = 0; r < p.in_features; ++r) {
      for (std::size_t c = 0; c < p.out_features; ++c) {
        w(static_cast<Index>(r), static_cast<Index>(c)) =
            p.weights[(((src * p.modalities + dst) * p.terms + a) * p.in_features + r) * p.out_features + c];
      }
    }
    out.push_back(w);
  }
  return out;
}

MatrixXd ggcn_bias(const mmgcn::GgcnLayerParams& p, std::size_t j) {
  MatrixXd b(static_cast<Index>(p.bias_rows), static_cast<Index>(p.out_features));
  for (std::size_t r = 0; r < p.bias_rows; ++r) {
    for (std::size_t c = 0; c < p.out_features; ++c) {
      b(static_cast<Index>(r), static_cast<Index>(c)) = p.biases[(j * p.bias_rows + r) * p.out_features + c];
    }
  }
  return b;
}

MatrixXd brute_chebnet(const MatrixXd& x, const MatrixXd& laplacian, mmgcn::BasisKind kind,
                       const std::vector<MatrixXd>& w, const MatrixXd& bias, bool relu) {
  const auto basis = brute_basis(laplacian, static_cast<int>(w.size()) - 1, kind);
  MatrixXd z = MatrixXd::Zero(x.rows(), w.front().cols());
  for (std::size_t a = 0; a < w.size(); ++a) z += basis[a] * x * w[a];
  for (Index v = 0; v < z.rows(); ++v) z.row(v) += bias.rows() == 1 ? bias.row(0) : bias.row(v);
  if (relu) z = z.cwiseMax(0.0);
  return z;
}

Instance random_instance(Rng& rng, const InstanceOptions& opts) {
  using namespace mmgcn;
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Instance inst;
  const std::size_t v = pick(2, opts.max_vertices);
  const std::size_t degree = pick(0, opts.max_degree);
  const BasisKind kind = u(rng) < 0.5 ? BasisKind::Power : BasisKind::Chebyshev;
  for (std::size_t m = 0; m < opts.modalities; ++m) {
    inst.graphs.emplace_back(Modality::Custom, random_adjacency(rng, static_cast<Index>(v)));
    inst.bases.push_back(laplacian_basis(normalized_laplacian(inst.graphs.back()), static_cast<int>(degree), kind));
  }

  NetworkConfig cfg;
  cfg.modalities = opts.modalities;
  cfg.degree = degree;
  cfg.window = pick(1, opts.max_features);
  cfg.basis = kind;
  cfg.per_vertex_bias = u(rng) < 0.3;
  cfg.vertex_count = v;
  const std::size_t depth = pick(2, 3);
  std::size_t in = cfg.window;
  for (std::size_t l = 0; l < depth; ++l) {
    LayerSpec s;
    s.kind = u(rng) < 0.5 ? LayerKind::Ggcn : LayerKind::Mrgcn;
    s.in_features = in;
    s.out_features = l + 1 == depth ? 1 : pick(1, opts.max_features);
    s.activation = l + 1 == depth ? Activation::Identity : Activation::ReLU;
    s.tensor_prior = u(rng) < 0.8;
    cfg.layers.push_back(s);
    in = s.out_features;
  }
  // At least one layer of each kind exercises both regularizers.
  cfg.layers.front().kind = LayerKind::Ggcn;
  cfg.layers.back().kind = LayerKind::Mrgcn;
  cfg.layers.back().tensor_prior = true;

  std::array<bool, 4> frozen{};
  for (auto& f : frozen) f = u(rng) < 0.4;
  inst.params = init_network(cfg, rng(), frozen);
  for (auto& layer : inst.params.layers) {
    for (auto& b : bias_data(layer)) b = 0.5 * (2.0 * u(rng) - 1.0);
    if (auto* m = std::get_if<MrgcnLayerParams>(&layer); m && opts.random_covariances) {
      for (std::size_t k = 0; k < 4; ++k) {
        if (m->covariances.frozen[k]) continue;
        m->covariances.sigma[k] = SpdMatrix(random_spd(rng, static_cast<Index>(m->weights.dims()[k])));
      }
    }
  }

  for (std::size_t s = 0; s < opts.batch; ++s) {
    Sample smp;
    smp.input = random_matrix(rng, static_cast<Index>(v), static_cast<Index>(cfg.window), 0.0, 2.0);
    smp.target = random_matrix(rng, static_cast<Index>(v), 1, 0.0, 2.0);
    smp.target_index = s;
    inst.batch.push_back(smp);
  }
  inst.reg.alpha_intra = 0.1 + 0.4 * u(rng);
  inst.reg.alpha_low = 0.05 + 0.2 * u(rng);
  inst.reg.alpha_high = 0.05 + 0.2 * u(rng);
  inst.reg.frozen_modes = frozen;
  return inst;
}

GradientCheck check_gradients(const Instance& inst, double h, double floor) {
  using namespace mmgcn;
  const GradientResult g = network_gradients(inst.batch, inst.bases, inst.params, inst.reg);
  const std::vector<double> analytic = flatten(g.grads);
  const std::vector<double> x0 = flatten(inst.params);
  NetworkParams work = inst.params;
  const ScalarFunction f = [&](std::span<const double> x) {
    unflatten(x, work);
    return objective(inst.batch, inst.bases, work, inst.reg).total;
  };
  const std::vector<double> numeric = finite_diff_gradient(f, x0, h);
  GradientCheck out;
  out.coordinates = x0.size();
  for (std::size_t k = 0; k < x0.size(); ++k) {
    const double a = analytic[k], b = numeric[k];
    const double scale = std::max(std::abs(a), std::abs(b));
    if (scale < floor) continue;
    out.max_relative_error = std::max(out.max_relative_error, std::abs(a - b) / scale);
  }
  return out;
}

}  // namespace testing
