// Shared fixtures for the unit and acceptance suites: seeded random instances
// and brute-force reference implementations that avoid the library's own kernels.
#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "mmgcn/data.hpp"
#include "mmgcn/graphs.hpp"
#include "mmgcn/layers.hpp"
#include "mmgcn/numerics.hpp"
#include "mmgcn/params.hpp"
#include "mmgcn/regularization.hpp"

namespace testing {

using Rng = std::mt19937_64;

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo = -1.0, double hi = 1.0);
/// B B^T + shift I with B uniform in [-1, 1].
Eigen::MatrixXd random_spd(Rng& rng, Eigen::Index n, double shift = 0.5);
/// Symmetric, zero diagonal, nonnegative; entries zero with probability `sparsity`.
Eigen::MatrixXd random_adjacency(Rng& rng, Eigen::Index n, double sparsity = 0.3, bool weighted = true);
mmgcn::Tensor4 random_tensor(Rng& rng, const mmgcn::Dims4& dims);

// ---- reference implementations ----

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);
/// vec(W) by explicit index enumeration with the last mode fastest.
Eigen::VectorXd brute_vec(const mmgcn::Tensor4& t);
/// vec(W)^T (A_I kron A_O kron A_C kron A_M) vec(W) with the 4-way Kronecker materialized.
double brute_quadratic(const mmgcn::Tensor4& t, const std::array<Eigen::MatrixXd, 4>& factors);
/// Mode unfolding by enumeration of every index tuple.
Eigen::MatrixXd brute_unfold(const mmgcn::Tensor4& t, int mode);
/// (d_i / prod d) W_(i) K W_(i)^T + eps I, K the explicit Kronecker of the other modes'
/// factors (covariances, or their dense inverses when `inverse` is set).
Eigen::MatrixXd brute_flip_flop(const mmgcn::Tensor4& t, const std::array<Eigen::MatrixXd, 4>& sigma, int mode,
                                double eps, bool inverse);
/// I - D^-1/2 A D^-1/2 by loops, isolated vertices contribute a zero scaling.
Eigen::MatrixXd brute_laplacian(const Eigen::MatrixXd& a);
/// L^0..L^K by repeated multiplication.
std::vector<Eigen::MatrixXd> brute_powers(const Eigen::MatrixXd& l, int k);

/// Basis terms built independently: raw powers of L, or the Chebyshev recurrence on L - I.
std::vector<Eigen::MatrixXd> brute_basis(const Eigen::MatrixXd& l, int k, mmgcn::BasisKind kind);
/// Weight matrices of GGCN block (src, dst) read from the flat (i, j, a, r, c) storage.
std::vector<Eigen::MatrixXd> ggcn_block(const mmgcn::GgcnLayerParams& p, std::size_t src, std::size_t dst);
/// Bias of target modality j as a bias_rows x f matrix, read from the flat storage.
Eigen::MatrixXd ggcn_bias(const mmgcn::GgcnLayerParams& p, std::size_t j);
/// act(sum_a B_a X W_a + b) with b broadcast over vertices when it has one row.
Eigen::MatrixXd brute_chebnet(const Eigen::MatrixXd& x, const Eigen::MatrixXd& laplacian, mmgcn::BasisKind kind,
                              const std::vector<Eigen::MatrixXd>& w, const Eigen::MatrixXd& bias, bool relu);

// ---- random network instances ----

struct InstanceOptions {
  std::size_t max_vertices = 4;
  std::size_t modalities = 2;
  std::size_t max_degree = 2;
  std::size_t max_features = 3;
  std::size_t batch = 3;
  bool random_covariances = true;
};

struct Instance {
  std::vector<mmgcn::RelationGraph> graphs;
  std::vector<mmgcn::LaplacianBasis> bases;
  mmgcn::NetworkParams params;
  std::vector<mmgcn::Sample> batch;
  mmgcn::RegularizerConfig reg;
};

/// Random graphs, a 2-3 layer mix of GGCN and MRGCN layers, nonzero biases, random SPD
/// covariances on unfrozen modes and regularizer weights large enough to matter.
Instance random_instance(Rng& rng, const InstanceOptions& opts = {});

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
};

/// Compares network_gradients against central differences of objective. Relative error
/// is |a-b| / max(|a|, |b|); coordinates where both magnitudes are below `floor` count as agreeing.
GradientCheck check_gradients(const Instance& inst, double h = 1e-5, double floor = 1e-7);

}  // namespace testing
