#include "mmgcn/numerics.hpp"

#include <cmath>
#include <numeric>

#include "mmgcn/error.hpp"

namespace mmgcn {

namespace {

std::size_t product(const Dims4& d) { return d[0] * d[1] * d[2] * d[3]; }

void check_mode(int mode) {
  if (mode < 0 || mode > 3) throw InvalidArgument("tensor mode must be in 0..3");
}

// Sizes of the modes before and after `mode` in canonical order.
std::pair<std::size_t, std::size_t> outer_inner(const Dims4& d, int mode) {
  std::size_t outer = 1, inner = 1;
  for (int k = 0; k < mode; ++k) outer *= d[static_cast<std::size_t>(k)];
  for (int k = mode + 1; k < 4; ++k) inner *= d[static_cast<std::size_t>(k)];
  return {outer, inner};
}

}  // namespace

Tensor4::Tensor4(const Dims4& dims) : dims_(dims), data_(product(dims), 0.0) {
  for (auto d : dims) {
    if (d == 0) throw InvalidArgument("tensor dimensions must be positive");
  }
}

Tensor4::Tensor4(const Dims4& dims, std::vector<double> data) : dims_(dims), data_(std::move(data)) {
  for (auto d : dims) {
    if (d == 0) throw InvalidArgument("tensor dimensions must be positive");
  }
  if (data_.size() != product(dims)) throw InvalidArgument("tensor data length does not match dims");
  if (!all_finite()) throw InvalidArgument("tensor entries must be finite");
}

double Tensor4::squared_norm() const noexcept {
  return std::inner_product(data_.begin(), data_.end(), data_.begin(), 0.0);
}

double Tensor4::dot(const Tensor4& other) const {
  if (other.dims_ != dims_) throw InvalidArgument("tensor dims differ");
  return std::inner_product(data_.begin(), data_.end(), other.data_.begin(), 0.0);
}

bool Tensor4::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Eigen::MatrixXd mode_unfold(const Tensor4& t, int mode) {
  check_mode(mode);
  const auto [outer, inner] = outer_inner(t.dims(), mode);
  const std::size_t dm = t.dim(mode);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(dm), static_cast<Eigen::Index>(outer * inner));
  const auto data = t.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t k = 0; k < dm; ++k) {
      const double* src = data.data() + (o * dm + k) * inner;
      for (std::size_t n = 0; n < inner; ++n) {
        out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(o * inner + n)) = src[n];
      }
    }
  }
  return out;
}

Tensor4 mode_refold(const Eigen::MatrixXd& unfolded, const Dims4& dims, int mode) {
  check_mode(mode);
  const auto [outer, inner] = outer_inner(dims, mode);
  const std::size_t dm = dims[static_cast<std::size_t>(mode)];
  if (static_cast<std::size_t>(unfolded.rows()) != dm ||
      static_cast<std::size_t>(unfolded.cols()) != outer * inner) {
    throw InvalidArgument("unfolded matrix shape does not match dims");
  }
  Tensor4 t(dims);
  auto data = t.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t k = 0; k < dm; ++k) {
      double* dst = data.data() + (o * dm + k) * inner;
      for (std::size_t n = 0; n < inner; ++n) {
        dst[n] = unfolded(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(o * inner + n));
      }
    }
  }
  return t;
}

Tensor4 mode_product(const Tensor4& t, const Eigen::MatrixXd& m, int mode) {
  check_mode(mode);
  const std::size_t dm = t.dim(mode);
  if (static_cast<std::size_t>(m.cols()) != dm || m.rows() < 1) {
    throw InvalidArgument("mode product matrix does not match tensor mode size");
  }
  Dims4 out_dims = t.dims();
  out_dims[static_cast<std::size_t>(mode)] = static_cast<std::size_t>(m.rows());
  Tensor4 out(out_dims);
  const auto [outer, inner] = outer_inner(t.dims(), mode);
  const auto rows = static_cast<Eigen::Index>(m.rows());
  const auto src = t.data();
  auto dst = out.data();
  for (std::size_t o = 0; o < outer; ++o) {
    Eigen::Map<const RowMatrix> slice(src.data() + o * dm * inner, static_cast<Eigen::Index>(dm),
                                      static_cast<Eigen::Index>(inner));
    Eigen::Map<RowMatrix> res(dst.data() + o * static_cast<std::size_t>(rows) * inner, rows,
                              static_cast<Eigen::Index>(inner));
    res.noalias() = m * slice;
  }
  return out;
}

SpdMatrix::SpdMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {
  if (m_.rows() < 1 || m_.rows() != m_.cols()) throw InvalidArgument("SPD matrix must be square and non-empty");
  if (!m_.allFinite()) throw InvalidArgument("SPD matrix entries must be finite");
  const double scale = std::max(1.0, m_.cwiseAbs().maxCoeff());
  if ((m_ - m_.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw InvalidArgument("SPD matrix is not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(m_);
  if (llt.info() != Eigen::Success) throw InvalidArgument("matrix is not positive definite");
}

SpdMatrix SpdMatrix::identity(std::size_t n) {
  return SpdMatrix(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)),
                   Unchecked{});
}

bool SpdMatrix::is_identity() const {
  return m_ == Eigen::MatrixXd::Identity(m_.rows(), m_.cols());
}

SpdMatrix spd_inverse(const SpdMatrix& m) {
  const auto n = m.matrix().rows();
  if (m.is_identity()) return SpdMatrix::identity(static_cast<std::size_t>(n));
  Eigen::MatrixXd a = m.matrix();
  for (int attempt = 0; attempt < 2; ++attempt) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
    if (eig.info() == Eigen::Success) {
      const auto& lambda = eig.eigenvalues();
      const double lo = lambda.minCoeff();
      const double hi = lambda.maxCoeff();
      if (lo > 0.0 && hi / lo <= 1e12) {
        const auto& v = eig.eigenvectors();
        const Eigen::MatrixXd raw = v * lambda.cwiseInverse().asDiagonal() * v.transpose();
        Eigen::MatrixXd inv = 0.5 * (raw + raw.transpose());
        return SpdMatrix(std::move(inv), SpdMatrix::Unchecked{});
      }
    }
    a += 1e-10 * Eigen::MatrixXd::Identity(n, n);
  }
  throw NumericalFailure("covariance matrix is numerically singular (condition estimate > 1e12)");
}

Tensor4 multiply_modes(const Tensor4& t, const std::array<Eigen::MatrixXd, 4>& factors, int skip_mode) {
  Tensor4 out = t;
  for (int k = 0; k < 4; ++k) {
    if (k == skip_mode) continue;
    const auto& f = factors[static_cast<std::size_t>(k)];
    if (f.rows() == f.cols() && f.isIdentity(0.0)) continue;
    out = mode_product(out, f, k);
  }
  return out;
}

double all_mode_quadratic(const Tensor4& t, const std::array<SpdMatrix, 4>& inverses) {
  std::array<Eigen::MatrixXd, 4> factors;
  for (std::size_t k = 0; k < 4; ++k) {
    if (inverses[k].dim() != t.dims()[k]) throw InvalidArgument("inverse covariance does not match tensor mode size");
    factors[k] = inverses[k].matrix();
  }
  return t.dot(multiply_modes(t, factors));
}

std::vector<double> finite_diff_gradient(const ScalarFunction& f, std::span<const double> x, double h) {
  if (!(h > 0.0)) throw InvalidArgument("finite-difference step must be positive");
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = probe[i];
    probe[i] = xi + h;
    const double up = f(probe);
    probe[i] = xi - h;
    const double down = f(probe);
    probe[i] = xi;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace mmgcn
