#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mmgcn {

enum class Modality { Neighborhood, PoiSimilarity, RoadConnectivity, Custom };

std::string modality_label(Modality m);

/// One modality's weighted region graph. The adjacency is validated on
/// construction: square, symmetric, zero diagonal, finite and nonnegative.
class RelationGraph {
 public:
  RelationGraph(Modality modality, Eigen::MatrixXd adjacency, std::string name = {});

  Modality modality() const noexcept { return modality_; }
  const std::string& name() const noexcept { return name_; }
  const Eigen::MatrixXd& adjacency() const noexcept { return adjacency_; }
  std::size_t vertex_count() const noexcept { return static_cast<std::size_t>(adjacency_.rows()); }

 private:
  Modality modality_;
  std::string name_;
  Eigen::MatrixXd adjacency_;
};

enum class BasisKind { Power, Chebyshev };

/// Polynomial basis [P_0, ..., P_K] of a Laplacian used by the graph convolution.
/// Power: P_a = L^a. Chebyshev: T_a of the rescaled operator L - I.
struct LaplacianBasis {
  std::vector<Eigen::MatrixXd> powers;
  std::size_t degree = 0;
  BasisKind kind = BasisKind::Power;

  std::size_t terms() const noexcept { return powers.size(); }
  std::size_t vertex_count() const noexcept {
    return powers.empty() ? 0 : static_cast<std::size_t>(powers.front().rows());
  }
};

/// 8-neighbourhood grid graph, vertices indexed row-major.
RelationGraph build_neighborhood(int grid_rows, int grid_cols);

/// Cosine similarity of POI count vectors. Regions with an all-zero POI row get
/// an all-zero adjacency row/column; their indices are appended to
/// `degenerate_rows` when given and a warning is written to std::clog.
RelationGraph build_poi_similarity(const Eigen::MatrixXd& poi,
                                   std::vector<std::size_t>* degenerate_rows = nullptr);

/// A_C = max(0, conn - A_N): direct transit links that are not already neighbours.
RelationGraph build_road_connectivity(const Eigen::MatrixXd& conn, const RelationGraph& neighborhood);

/// L = I - D^{-1/2} A D^{-1/2}; isolated vertices contribute an identity row.
Eigen::MatrixXd normalized_laplacian(const RelationGraph& g);

LaplacianBasis laplacian_basis(const Eigen::MatrixXd& laplacian, int degree,
                               BasisKind kind = BasisKind::Power);

/// 2|E| / (|V|(|V|-1)) where an edge is a pair i<j with weight above `threshold`.
double graph_density(const RelationGraph& g, double threshold = 0.0);

struct GraphComparison {
  double f_measure = 0.0;
  long edit_distance = 0;
};

/// Binarized edge-set comparison: F = 2|E1 n E2| / (|E1| + |E2|) (1 when both
/// are empty) and edit distance = |E1 symmetric-difference E2|.
GraphComparison compare_graphs(const RelationGraph& g1, const RelationGraph& g2, double threshold = 0.0);

}  // namespace mmgcn
