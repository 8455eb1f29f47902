#pragma once

// Latent vectors -> 2D workspace: k-NN graph, geodesics, classical MDS,
// Isomap, a PCA baseline and Procrustes alignment between rounds.
// Everything here is a pure function of its inputs and bit-deterministic.

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace spacedit {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

enum class LayoutMethod { isomap, pca, mds };

std::string_view to_string(LayoutMethod method);
LayoutMethod layout_method_from_string(std::string_view name);

struct Layout2D {
  std::vector<Point2> points;
  LayoutMethod method = LayoutMethod::isomap;
  int epoch = 0;  // checkpoint that produced the latents

  std::size_t size() const { return points.size(); }
  bool operator==(const Layout2D&) const = default;
};

struct GraphEdge {
  std::size_t to = 0;
  double weight = 0.0;
};

/// Symmetric weighted adjacency; each list sorted by neighbour id.
struct NeighborGraph {
  std::size_t k_graph = 0;
  std::vector<std::vector<GraphEdge>> adjacency;

  std::size_t node_count() const { return adjacency.size(); }
  std::size_t edge_count() const;
  bool has_edge(std::size_t a, std::size_t b) const;
  void add_edge(std::size_t a, std::size_t b, double weight);
  /// Component id per node, numbered in order of the lowest member.
  std::vector<std::size_t> components() const;
};

/// Coincident points are stored with this weight so every edge stays positive.
inline constexpr double kMinEdgeWeight = 1e-12;
inline constexpr std::size_t kDefaultGraphNeighbors = 10;

NeighborGraph build_knn_graph(const Eigen::MatrixXd& latents, std::size_t k_graph);

/// Joins components by repeatedly adding the globally shortest edge between
/// two different components until one remains.
NeighborGraph bridge_components(NeighborGraph graph, const Eigen::MatrixXd& latents);

/// All-pairs shortest paths (Dijkstra from every node). Throws a precondition
/// error if the graph is disconnected.
Eigen::MatrixXd geodesic_distances(const NeighborGraph& graph);

struct MdsResult {
  Eigen::MatrixXd coords;             // n x out_dims
  std::vector<double> eigenvalues;    // top out_dims, descending, before clamping
  std::vector<std::string> warnings;
};

MdsResult classical_mds(const Eigen::MatrixXd& distances, std::size_t out_dims = 2);

Layout2D isomap(const Eigen::MatrixXd& latents, std::size_t k_graph = kDefaultGraphNeighbors,
                std::vector<std::string>* warnings = nullptr);

Layout2D pca_2d(const Eigen::MatrixXd& latents);

struct AlignmentResult {
  Layout2D aligned;
  double rmse = 0.0;
};

/// Least-squares translation + orthogonal map (+ uniform scale) taking
/// `source` onto `target`.
AlignmentResult procrustes_align(const Layout2D& target, const Layout2D& source, bool allow_scale);

Eigen::MatrixXd to_matrix(const Layout2D& layout);
Layout2D from_matrix(const Eigen::MatrixXd& coords, LayoutMethod method, int epoch);

/// Flips each column so its largest-magnitude entry is positive
/// (first such entry on ties).
void fix_column_signs(Eigen::MatrixXd& columns);

}  // namespace spacedit
