#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace mmgcn {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Dims4 = std::array<std::size_t, 4>;

/// Dense 4-mode tensor in canonical order (I, O, C, M), last mode fastest.
/// Flattening `data()` is the vec() convention used by every Kronecker identity.
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(const Dims4& dims);
  Tensor4(const Dims4& dims, std::vector<double> data);

  const Dims4& dims() const noexcept { return dims_; }
  std::size_t dim(int mode) const { return dims_.at(static_cast<std::size_t>(mode)); }
  std::size_t size() const noexcept { return data_.size(); }

  std::size_t offset(std::size_t i, std::size_t o, std::size_t c, std::size_t m) const noexcept {
    return ((i * dims_[1] + o) * dims_[2] + c) * dims_[3] + m;
  }
  double& operator()(std::size_t i, std::size_t o, std::size_t c, std::size_t m) noexcept {
    return data_[offset(i, o, c, m)];
  }
  double operator()(std::size_t i, std::size_t o, std::size_t c, std::size_t m) const noexcept {
    return data_[offset(i, o, c, m)];
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  double squared_norm() const noexcept;
  double dot(const Tensor4& other) const;
  bool all_finite() const noexcept;

 private:
  Dims4 dims_{0, 0, 0, 0};
  std::vector<double> data_;
};

/// Mode-n unfolding: row k holds every entry whose `mode` index is k; columns
/// enumerate the remaining modes in canonical order.
Eigen::MatrixXd mode_unfold(const Tensor4& t, int mode);
Tensor4 mode_refold(const Eigen::MatrixXd& unfolded, const Dims4& dims, int mode);

/// t x_mode m: contracts `mode` of t with the columns of m (m.cols() == dim(mode)).
Tensor4 mode_product(const Tensor4& t, const Eigen::MatrixXd& m, int mode);

/// Symmetric positive definite matrix. Construction checks symmetry (1e-10,
/// scaled by the largest entry) and positive definiteness via Cholesky.
class SpdMatrix {
 public:
  SpdMatrix() : m_(Eigen::MatrixXd::Identity(1, 1)) {}
  explicit SpdMatrix(Eigen::MatrixXd m);
  static SpdMatrix identity(std::size_t n);

  const Eigen::MatrixXd& matrix() const noexcept { return m_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(m_.rows()); }
  bool is_identity() const;

 private:
  struct Unchecked {};
  SpdMatrix(Eigen::MatrixXd m, Unchecked) : m_(std::move(m)) {}
  friend SpdMatrix spd_inverse(const SpdMatrix&);

  Eigen::MatrixXd m_;
};

/// Inverse through a symmetric eigendecomposition. A condition estimate above
/// 1e12 triggers one retry with 1e-10 I added; failing again throws NumericalFailure.
SpdMatrix spd_inverse(const SpdMatrix& m);

/// Applies factors[k] along every mode k with k != skip_mode (skip_mode = -1: all modes).
Tensor4 multiply_modes(const Tensor4& t, const std::array<Eigen::MatrixXd, 4>& factors, int skip_mode = -1);

/// vec(W)^T (inv_0 (x) inv_1 (x) inv_2 (x) inv_3) vec(W) without forming the Kronecker product.
double all_mode_quadratic(const Tensor4& t, const std::array<SpdMatrix, 4>& inverses);

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for each coordinate.
std::vector<double> finite_diff_gradient(const ScalarFunction& f, std::span<const double> x, double h);

}  // namespace mmgcn
