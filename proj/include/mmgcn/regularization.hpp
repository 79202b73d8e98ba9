#pragma once

#include <array>
#include <vector>

#include "mmgcn/numerics.hpp"
#include "mmgcn/params.hpp"

namespace mmgcn {

enum class FlipFlopForm {
  Literal,     // other modes enter through their covariances
  InverseMle,  // other modes enter through their inverse covariances
};

struct RegularizerConfig {
  double alpha_intra = 0.1;   // weight on intra-modality blocks in J1
  double alpha_low = 1e-4;    // J1 trade-off
  double alpha_high = 1e-4;   // J2 trade-off
  double epsilon = 1e-6;      // flip-flop jitter
  std::array<bool, 4> frozen_modes{true, true, false, false};  // (I, O, C, M)
  FlipFlopForm flip_flop_form = FlipFlopForm::Literal;
  // Rescale every updated covariance to trace / dim == 1.
  bool normalize_covariance = true;

  void validate() const;
};

struct GroupLassoResult {
  double loss = 0.0;
  std::vector<double> grad;  // congruent to GgcnLayerParams::weights
};

/// alpha * sum_{i==j} ||w_ij||_F + sum_{i!=j} ||w_ij||_F, subgradient 0 at zero blocks.
GroupLassoResult group_lasso(const GgcnLayerParams& params, double alpha_intra);

struct TensorNormalResult {
  double loss = 0.0;
  Tensor4 grad;
};

/// J2 = 1/2 vec(W)^T (S_I (x) S_O (x) S_C (x) S_M)^{-1} vec(W), gradient W x_k S_k^{-1}.
TensorNormalResult tensor_normal_loss(const Tensor4& weights, const CovarianceSet& cov);

/// (d_i / prod d) W_(i) (x)_{k != i} S_k W_(i)^T without the jitter; InverseMle uses S_k^{-1}.
Eigen::MatrixXd flip_flop_scatter(const Tensor4& weights, const CovarianceSet& cov, int mode, FlipFlopForm form);

/// One flip-flop estimate of mode `mode`: scatter + epsilon I.
SpdMatrix flip_flop_update(const Tensor4& weights, const CovarianceSet& cov, int mode, double epsilon,
                           FlipFlopForm form = FlipFlopForm::Literal);

/// Re-estimates every non-frozen mode in order I, O, C, M, each using the
/// latest estimates of the others. With normalization the update is
/// epsilon I + (1 - epsilon) S d / tr(S), which has trace / dim == 1 and
/// smallest eigenvalue >= epsilon.
void update_covariances(MrgcnLayerParams& layer, const RegularizerConfig& cfg);

}  // namespace mmgcn
