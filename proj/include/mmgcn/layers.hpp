#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mmgcn/data.hpp"
#include "mmgcn/graphs.hpp"
#include "mmgcn/params.hpp"
#include "mmgcn/regularization.hpp"

namespace mmgcn {

/// sum_a P_a X W_a over the basis terms.
Eigen::MatrixXd cheb_conv(const Eigen::MatrixXd& x, const LaplacianBasis& basis,
                          std::span<const Eigen::MatrixXd> weights);

/// X'_j = act(sum_i G(X_i; A_i, w_ij) + b_j). Modality i is always convolved on its own graph.
std::vector<Eigen::MatrixXd> ggcn_forward(const std::vector<Eigen::MatrixXd>& xs,
                                          const std::vector<LaplacianBasis>& bases,
                                          const GgcnLayerParams& params);

/// X'_j = act(G(X_j; A_j, W_j) + b_j). Covariances play no part in the forward pass.
std::vector<Eigen::MatrixXd> mrgcn_forward(const std::vector<Eigen::MatrixXd>& xs,
                                           const std::vector<LaplacianBasis>& bases,
                                           const MrgcnLayerParams& params);

/// Modality-wise mean of |V| x 1 outputs.
Eigen::MatrixXd fusion_forward(const std::vector<Eigen::MatrixXd>& xs);

struct LayerTrace {
  std::vector<Eigen::MatrixXd> propagated;     // per source modality: [P_0 X | ... | P_K X]
  std::vector<Eigen::MatrixXd> preactivation;  // per target modality
  std::vector<Eigen::MatrixXd> output;
};

struct ForwardTrace {
  std::vector<LayerTrace> layers;
  Eigen::MatrixXd prediction;
};

/// Full forward pass keeping intermediates. The window is fed to every modality.
ForwardTrace forward_trace(const Eigen::MatrixXd& x_window, const std::vector<LaplacianBasis>& bases,
                           const NetworkParams& params);

Eigen::MatrixXd network_forward(const Eigen::MatrixXd& x_window, const std::vector<LaplacianBasis>& bases,
                                const NetworkParams& params);

/// Predictions for many samples, stacked as N x |V|.
Eigen::MatrixXd predict_batch(std::span<const Sample> samples, const std::vector<LaplacianBasis>& bases,
                              const NetworkParams& params);

/// Smoothing floor inside the data-term square root.
inline constexpr double kRmseSmoothing = 1e-12;

struct LossBreakdown {
  double total = 0.0;
  double data = 0.0;    // sqrt(MSE + 1e-12) over batch and vertices
  double group = 0.0;   // sum of J1 over GGCN layers (before alpha_low)
  double tensor = 0.0;  // sum of J2 over prior-carrying MRGCN layers (before alpha_high)
};

struct GradientResult {
  LossBreakdown loss;
  ParamBuffers grads;
};

/// J_W = J0 + alpha_low sum J1 + alpha_high sum J2. Coefficients of zero disable a term.
LossBreakdown objective(std::span<const Sample> batch, const std::vector<LaplacianBasis>& bases,
                        const NetworkParams& params, const RegularizerConfig& reg);

/// Reverse-mode gradient of `objective` with covariances held constant.
GradientResult network_gradients(std::span<const Sample> batch, const std::vector<LaplacianBasis>& bases,
                                 const NetworkParams& params, const RegularizerConfig& reg);

}  // namespace mmgcn
