#include "mmgcn/regularization.hpp"

#include <cmath>

#include "mmgcn/error.hpp"

namespace mmgcn {

void RegularizerConfig::validate() const {
  // Zero disables a term.
  if (!(alpha_intra >= 0.0)) throw InvalidArgument("alpha_intra must be nonnegative");
  if (!(alpha_low >= 0.0)) throw InvalidArgument("alpha_low must be nonnegative");
  if (!(alpha_high >= 0.0)) throw InvalidArgument("alpha_high must be nonnegative");
  if (!(epsilon > 0.0) || !(epsilon < 1.0)) throw InvalidArgument("epsilon must lie in (0, 1)");
}

GroupLassoResult group_lasso(const GgcnLayerParams& params, double alpha_intra) {
  GroupLassoResult out;
  out.grad.assign(params.weights.size(), 0.0);
  const std::size_t bs = params.block_size();
  for (std::size_t i = 0; i < params.modalities; ++i) {
    for (std::size_t j = 0; j < params.modalities; ++j) {
      const std::size_t off = params.block_offset(i, j);
      double sq = 0.0;
      for (std::size_t k = 0; k < bs; ++k) sq += params.weights[off + k] * params.weights[off + k];
      const double norm = std::sqrt(sq);
      const double coef = i == j ? alpha_intra : 1.0;
      out.loss += coef * norm;
      if (norm > 0.0) {
        for (std::size_t k = 0; k < bs; ++k) out.grad[off + k] = coef * params.weights[off + k] / norm;
      }
    }
  }
  return out;
}

namespace {

void check_dims(const Tensor4& w, const CovarianceSet& cov) {
  if (cov.dims() != w.dims()) throw InvalidArgument("covariance dims do not match weight tensor");
}

std::array<Eigen::MatrixXd, 4> inverse_factors(const CovarianceSet& cov) {
  std::array<Eigen::MatrixXd, 4> f;
  for (std::size_t k = 0; k < 4; ++k) f[k] = spd_inverse(cov.sigma[k]).matrix();
  return f;
}

}  // namespace

TensorNormalResult tensor_normal_loss(const Tensor4& weights, const CovarianceSet& cov) {
  check_dims(weights, cov);
  TensorNormalResult out;
  out.grad = multiply_modes(weights, inverse_factors(cov));
  out.loss = 0.5 * weights.dot(out.grad);
  return out;
}

Eigen::MatrixXd flip_flop_scatter(const Tensor4& weights, const CovarianceSet& cov, int mode, FlipFlopForm form) {
  check_dims(weights, cov);
  if (mode < 0 || mode > 3) throw InvalidArgument("covariance mode must be in 0..3");
  std::array<Eigen::MatrixXd, 4> factors;
  for (std::size_t k = 0; k < 4; ++k) {
    if (static_cast<int>(k) == mode) continue;
    factors[k] = form == FlipFlopForm::Literal ? cov.sigma[k].matrix() : spd_inverse(cov.sigma[k]).matrix();
  }
  const Tensor4 mixed = multiply_modes(weights, factors, mode);
  const Eigen::MatrixXd u = mode_unfold(weights, mode);
  const Eigen::MatrixXd v = mode_unfold(mixed, mode);
  const double scale = static_cast<double>(weights.dim(mode)) / static_cast<double>(weights.size());
  Eigen::MatrixXd s = scale * (u * v.transpose());
  return 0.5 * (s + s.transpose());
}

SpdMatrix flip_flop_update(const Tensor4& weights, const CovarianceSet& cov, int mode, double epsilon,
                           FlipFlopForm form) {
  if (mode < 0 || mode > 3) throw InvalidArgument("covariance mode must be in 0..3");
  if (cov.frozen[static_cast<std::size_t>(mode)]) {
    throw InvalidArgument("mode " + cov_mode_name(mode) + " is frozen");
  }
  Eigen::MatrixXd s = flip_flop_scatter(weights, cov, mode, form);
  if (!s.allFinite()) throw NumericalFailure("covariance update of mode " + cov_mode_name(mode) + " is non-finite");
  s.diagonal().array() += epsilon;
  return SpdMatrix(std::move(s));
}

void update_covariances(MrgcnLayerParams& layer, const RegularizerConfig& cfg) {
  auto& cov = layer.covariances;
  for (int mode = 0; mode < 4; ++mode) {
    if (cov.frozen[static_cast<std::size_t>(mode)]) continue;
    if (!cfg.normalize_covariance) {
      cov.sigma[static_cast<std::size_t>(mode)] =
          flip_flop_update(layer.weights, cov, mode, cfg.epsilon, cfg.flip_flop_form);
      continue;
    }
    Eigen::MatrixXd s = flip_flop_scatter(layer.weights, cov, mode, cfg.flip_flop_form);
    if (!s.allFinite()) {
      throw NumericalFailure("covariance update of mode " + cov_mode_name(mode) + " produced non-finite values");
    }
    const double n = static_cast<double>(s.rows());
    const double trace = s.trace();
    if (trace > 0.0 && std::isfinite(trace)) {
      s *= (1.0 - cfg.epsilon) * n / trace;
    }
    s.diagonal().array() += cfg.epsilon;
    cov.sigma[static_cast<std::size_t>(mode)] = SpdMatrix(std::move(s));
  }
}

}  // namespace mmgcn
