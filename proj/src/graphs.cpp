#include "mmgcn/graphs.hpp"

#include <cmath>
#include <iostream>
#include <sstream>

#include "mmgcn/error.hpp"

namespace mmgcn {

std::string modality_label(Modality m) {
  switch (m) {
    case Modality::Neighborhood: return "N";
    case Modality::PoiSimilarity: return "P";
    case Modality::RoadConnectivity: return "R";
    case Modality::Custom: return "X";
  }
  return "X";
}

RelationGraph::RelationGraph(Modality modality, Eigen::MatrixXd adjacency, std::string name)
    : modality_(modality), name_(std::move(name)), adjacency_(std::move(adjacency)) {
  const auto n = adjacency_.rows();
  if (n < 1 || adjacency_.cols() != n) {
    throw InvalidArgument("adjacency must be a non-empty square matrix");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (adjacency_(i, i) != 0.0) {
      std::ostringstream os;
      os << "adjacency diagonal must be zero (row " << i << ")";
      throw InvalidArgument(os.str());
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      const double a = adjacency_(i, j);
      if (!std::isfinite(a) || a < 0.0) {
        std::ostringstream os;
        os << "adjacency entries must be finite and nonnegative (row " << i << ")";
        throw InvalidArgument(os.str());
      }
      if (a != adjacency_(j, i)) {
        std::ostringstream os;
        os << "adjacency must be symmetric (row " << i << ", col " << j << ")";
        throw InvalidArgument(os.str());
      }
    }
  }
}

RelationGraph build_neighborhood(int grid_rows, int grid_cols) {
  if (grid_rows < 1 || grid_cols < 1) {
    throw InvalidArgument("grid dimensions must be positive");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(grid_rows) * grid_cols;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int r = 0; r < grid_rows; ++r) {
    for (int c = 0; c < grid_cols; ++c) {
      const Eigen::Index v = static_cast<Eigen::Index>(r) * grid_cols + c;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr;
          const int cc = c + dc;
          if ((dr == 0 && dc == 0) || rr < 0 || cc < 0 || rr >= grid_rows || cc >= grid_cols) continue;
          a(v, static_cast<Eigen::Index>(rr) * grid_cols + cc) = 1.0;
        }
      }
    }
  }
  return RelationGraph(Modality::Neighborhood, std::move(a), "neighborhood");
}

RelationGraph build_poi_similarity(const Eigen::MatrixXd& poi, std::vector<std::size_t>* degenerate_rows) {
  const Eigen::Index n = poi.rows();
  if (n < 1 || poi.cols() < 1) {
    throw InvalidArgument("POI matrix must have at least one region and one category");
  }
  if (!poi.allFinite() || (poi.array() < 0.0).any()) {
    throw InvalidArgument("POI counts must be finite and nonnegative");
  }
  const Eigen::VectorXd norms = poi.rowwise().norm();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (norms(i) == 0.0) {
      std::clog << "warning: region " << i << " has an all-zero POI vector; its similarity row is zero\n";
      if (degenerate_rows) degenerate_rows->push_back(static_cast<std::size_t>(i));
    }
  }
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (norms(i) == 0.0) continue;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (norms(j) == 0.0) continue;
      const double s = poi.row(i).dot(poi.row(j)) / (norms(i) * norms(j));
      a(i, j) = s;
      a(j, i) = s;
    }
  }
  return RelationGraph(Modality::PoiSimilarity, std::move(a), "poi_similarity");
}

RelationGraph build_road_connectivity(const Eigen::MatrixXd& conn, const RelationGraph& neighborhood) {
  const auto& an = neighborhood.adjacency();
  if (conn.rows() != an.rows() || conn.cols() != an.cols()) {
    throw InvalidArgument("connectivity matrix and neighbourhood graph differ in vertex count");
  }
  Eigen::MatrixXd a = (conn - an).cwiseMax(0.0);
  return RelationGraph(Modality::RoadConnectivity, std::move(a), "road_connectivity");
}

Eigen::MatrixXd normalized_laplacian(const RelationGraph& g) {
  const auto& a = g.adjacency();
  const Eigen::Index n = a.rows();
  Eigen::VectorXd inv_sqrt_deg(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = a.row(i).sum();
    inv_sqrt_deg(i) = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
  }
  Eigen::MatrixXd l = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (a(i, j) != 0.0) l(i, j) -= a(i, j) * (inv_sqrt_deg(i) * inv_sqrt_deg(j));
    }
  }
  return l;
}

LaplacianBasis laplacian_basis(const Eigen::MatrixXd& laplacian, int degree, BasisKind kind) {
  if (degree < 0) throw InvalidArgument("polynomial degree must be nonnegative");
  if (laplacian.rows() != laplacian.cols() || laplacian.rows() < 1) {
    throw InvalidArgument("laplacian must be a non-empty square matrix");
  }
  const Eigen::Index n = laplacian.rows();
  LaplacianBasis basis;
  basis.degree = static_cast<std::size_t>(degree);
  basis.kind = kind;
  basis.powers.reserve(basis.degree + 1);
  basis.powers.push_back(Eigen::MatrixXd::Identity(n, n));
  if (degree == 0) return basis;

  if (kind == BasisKind::Power) {
    basis.powers.push_back(laplacian);
    for (int k = 2; k <= degree; ++k) {
      basis.powers.push_back(basis.powers.back() * laplacian);
    }
  } else {
    // Chebyshev recurrence on the spectrum-centred operator L - I, spectrum in [-1, 1].
    const Eigen::MatrixXd scaled = laplacian - Eigen::MatrixXd::Identity(n, n);
    basis.powers.push_back(scaled);
    for (int k = 2; k <= degree; ++k) {
      const auto& prev = basis.powers[static_cast<std::size_t>(k - 1)];
      const auto& prev2 = basis.powers[static_cast<std::size_t>(k - 2)];
      basis.powers.push_back(2.0 * scaled * prev - prev2);
    }
  }
  return basis;
}

namespace {

long count_edges(const Eigen::MatrixXd& a, double threshold) {
  long e = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < a.cols(); ++j) {
      if (a(i, j) > threshold) ++e;
    }
  }
  return e;
}

}  // namespace

double graph_density(const RelationGraph& g, double threshold) {
  const double n = static_cast<double>(g.vertex_count());
  if (g.vertex_count() < 2) throw InvalidArgument("graph density needs at least two vertices");
  if (threshold < 0.0) throw InvalidArgument("edge threshold must be nonnegative");
  return 2.0 * static_cast<double>(count_edges(g.adjacency(), threshold)) / (n * (n - 1.0));
}

GraphComparison compare_graphs(const RelationGraph& g1, const RelationGraph& g2, double threshold) {
  if (g1.vertex_count() != g2.vertex_count()) {
    throw InvalidArgument("compared graphs differ in vertex count");
  }
  if (threshold < 0.0) throw InvalidArgument("edge threshold must be nonnegative");
  const auto& a = g1.adjacency();
  const auto& b = g2.adjacency();
  long n1 = 0, n2 = 0, both = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < a.cols(); ++j) {
      const bool e1 = a(i, j) > threshold;
      const bool e2 = b(i, j) > threshold;
      n1 += e1;
      n2 += e2;
      both += e1 && e2;
    }
  }
  GraphComparison out;
  out.f_measure = (n1 + n2 == 0) ? 1.0 : 2.0 * static_cast<double>(both) / static_cast<double>(n1 + n2);
  out.edit_distance = n1 + n2 - 2 * both;
  return out;
}

}  // namespace mmgcn
