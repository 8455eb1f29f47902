#include "spacedit/embedding.hpp"

#include "spacedit/error.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <utility>

namespace spacedit {

std::string_view to_string(LayoutMethod method) {
  switch (method) {
    case LayoutMethod::isomap: return "isomap";
    case LayoutMethod::pca: return "pca";
    case LayoutMethod::mds: return "mds";
  }
  return "isomap";
}

LayoutMethod layout_method_from_string(std::string_view name) {
  if (name == "isomap") return LayoutMethod::isomap;
  if (name == "pca") return LayoutMethod::pca;
  if (name == "mds") return LayoutMethod::mds;
  throw Error(ErrorCode::parse, "unknown layout method '" + std::string(name) + "'");
}

std::size_t NeighborGraph::edge_count() const {
  std::size_t total = 0;
  for (const auto& list : adjacency) total += list.size();
  return total / 2;
}

bool NeighborGraph::has_edge(std::size_t a, std::size_t b) const {
  const auto& list = adjacency.at(a);
  auto it = std::lower_bound(list.begin(), list.end(), b,
                             [](const GraphEdge& e, std::size_t id) { return e.to < id; });
  return it != list.end() && it->to == b;
}

void NeighborGraph::add_edge(std::size_t a, std::size_t b, double weight) {
  if (a == b || has_edge(a, b)) return;
  auto insert = [](std::vector<GraphEdge>& list, GraphEdge e) {
    auto it = std::lower_bound(list.begin(), list.end(), e.to,
                               [](const GraphEdge& x, std::size_t id) { return x.to < id; });
    list.insert(it, e);
  };
  insert(adjacency[a], {b, weight});
  insert(adjacency[b], {a, weight});
}

std::vector<std::size_t> NeighborGraph::components() const {
  constexpr auto unset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> comp(node_count(), unset);
  std::size_t next = 0;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < node_count(); ++s) {
    if (comp[s] != unset) continue;
    comp[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      for (const auto& e : adjacency[u]) {
        if (comp[e.to] == unset) {
          comp[e.to] = next;
          stack.push_back(e.to);
        }
      }
    }
    ++next;
  }
  return comp;
}

namespace {

double squared_distance(const Eigen::MatrixXd& pts, Eigen::Index a, Eigen::Index b) {
  return (pts.row(a) - pts.row(b)).squaredNorm();
}

double edge_weight(double squared) {
  return squared > 0.0 ? std::sqrt(squared) : kMinEdgeWeight;
}

}  // namespace

NeighborGraph build_knn_graph(const Eigen::MatrixXd& latents, std::size_t k_graph) {
  const auto n = static_cast<std::size_t>(latents.rows());
  if (k_graph == 0 || k_graph >= n) {
    throw Error(ErrorCode::configuration, "k_graph must satisfy 1 <= k_graph < n (k_graph=" +
                                              std::to_string(k_graph) + ", n=" +
                                              std::to_string(n) + ")");
  }
  if (!latents.allFinite()) throw Error(ErrorCode::input, "non-finite latent vector");

  NeighborGraph graph;
  graph.k_graph = k_graph;
  graph.adjacency.resize(n);
  std::vector<std::pair<double, std::size_t>> candidates;
  candidates.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    candidates.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) candidates.emplace_back(squared_distance(latents, i, j), j);
    }
    std::partial_sort(candidates.begin(), candidates.begin() + k_graph, candidates.end());
    for (std::size_t r = 0; r < k_graph; ++r) {
      graph.add_edge(i, candidates[r].second, edge_weight(candidates[r].first));
    }
  }
  return graph;
}

NeighborGraph bridge_components(NeighborGraph graph, const Eigen::MatrixXd& latents) {
  const auto n = graph.node_count();
  if (static_cast<std::size_t>(latents.rows()) != n) {
    throw Error(ErrorCode::shape, "latent count does not match graph size");
  }
  auto comp = graph.components();
  std::size_t count = n == 0 ? 0 : *std::max_element(comp.begin(), comp.end()) + 1;
  if (count <= 1) return graph;

  Eigen::MatrixXd sq(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) sq(i, j) = sq(j, i) = squared_distance(latents, i, j);
  }
  while (count > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (comp[i] != comp[j] && sq(i, j) < best) {
          best = sq(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    graph.add_edge(bi, bj, edge_weight(best));
    const auto keep = std::min(comp[bi], comp[bj]);
    const auto drop = std::max(comp[bi], comp[bj]);
    for (auto& c : comp) {
      if (c == drop) c = keep;
      else if (c > drop) --c;
    }
    --count;
  }
  return graph;
}

Eigen::MatrixXd geodesic_distances(const NeighborGraph& graph) {
  const auto n = graph.node_count();
  const auto comp = graph.components();
  if (std::any_of(comp.begin(), comp.end(), [](std::size_t c) { return c != 0; })) {
    throw Error(ErrorCode::precondition,
                "graph is disconnected; call bridge_components before geodesic_distances");
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd dist = Eigen::MatrixXd::Constant(n, n, inf);
  using Entry = std::pair<double, std::size_t>;
  std::vector<Entry> heap_storage;
  for (std::size_t s = 0; s < n; ++s) {
    auto row = dist.row(s);
    row(s) = 0.0;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap(std::greater<>{},
                                                                        std::move(heap_storage));
    heap.emplace(0.0, s);
    while (!heap.empty()) {
      const auto [d, u] = heap.top();
      heap.pop();
      if (d > row(u)) continue;
      for (const auto& e : graph.adjacency[u]) {
        const double cand = d + e.weight;
        if (cand < row(e.to)) {
          row(e.to) = cand;
          heap.emplace(cand, e.to);
        }
      }
    }
    heap_storage.clear();
  }
  // Each source runs independently; average the two directions so the matrix
  // is exactly symmetric regardless of summation order along paths.
  Eigen::MatrixXd sym = 0.5 * (dist + dist.transpose());
  sym.diagonal().setZero();
  return sym;
}

void fix_column_signs(Eigen::MatrixXd& columns) {
  for (Eigen::Index c = 0; c < columns.cols(); ++c) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index r = 0; r < columns.rows(); ++r) {
      const double a = std::abs(columns(r, c));
      if (a > best_abs) {
        best_abs = a;
        best = r;
      }
    }
    if (columns.rows() > 0 && columns(best, c) < 0.0) columns.col(c) *= -1.0;
  }
}

MdsResult classical_mds(const Eigen::MatrixXd& distances, std::size_t out_dims) {
  const auto n = distances.rows();
  if (n != distances.cols()) throw Error(ErrorCode::input, "distance matrix must be square");
  if (n < 1 || out_dims == 0) throw Error(ErrorCode::input, "empty distance matrix or out_dims");
  if (!distances.allFinite()) throw Error(ErrorCode::input, "distance matrix has non-finite entries");
  const double scale = std::max(1.0, distances.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (distances(i, i) < 0.0) throw Error(ErrorCode::input, "negative diagonal in distance matrix");
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (std::abs(distances(i, j) - distances(j, i)) > 1e-9 * scale) {
        throw Error(ErrorCode::input, "distance matrix is not symmetric");
      }
    }
  }

  const Eigen::MatrixXd sq = distances.array().square().matrix();
  const Eigen::VectorXd row_mean = sq.rowwise().mean();
  const Eigen::RowVectorXd col_mean = sq.colwise().mean();
  const double grand = sq.mean();
  Eigen::MatrixXd b(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      b(i, j) = -0.5 * (sq(i, j) - row_mean(i) - col_mean(j) + grand);
    }
  }
  b = 0.5 * (b + b.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(b);
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::input, "eigendecomposition failed");

  MdsResult result;
  result.coords = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(out_dims));
  const auto available = std::min<Eigen::Index>(n, static_cast<Eigen::Index>(out_dims));
  Eigen::MatrixXd vectors(n, available);
  for (Eigen::Index c = 0; c < available; ++c) {
    vectors.col(c) = solver.eigenvectors().col(n - 1 - c);
    result.eigenvalues.push_back(solver.eigenvalues()(n - 1 - c));
  }
  fix_column_signs(vectors);
  for (Eigen::Index c = 0; c < available; ++c) {
    double lambda = result.eigenvalues[c];
    if (lambda < 0.0) {
      result.warnings.push_back("eigenvalue " + std::to_string(c) + " is negative (" +
                                std::to_string(lambda) + "); clamped to zero");
      lambda = 0.0;
    }
    result.coords.col(c) = vectors.col(c) * std::sqrt(lambda);
  }
  return result;
}

Eigen::MatrixXd to_matrix(const Layout2D& layout) {
  Eigen::MatrixXd m(layout.size(), 2);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    m(i, 0) = layout.points[i].x;
    m(i, 1) = layout.points[i].y;
  }
  return m;
}

Layout2D from_matrix(const Eigen::MatrixXd& coords, LayoutMethod method, int epoch) {
  Layout2D layout;
  layout.method = method;
  layout.epoch = epoch;
  layout.points.resize(coords.rows());
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    layout.points[i] = {coords(i, 0), coords.cols() > 1 ? coords(i, 1) : 0.0};
  }
  return layout;
}

Layout2D isomap(const Eigen::MatrixXd& latents, std::size_t k_graph,
                std::vector<std::string>* warnings) {
  if (latents.rows() < 4) throw Error(ErrorCode::input, "isomap needs at least 4 points");
  auto graph = bridge_components(build_knn_graph(latents, k_graph), latents);
  auto mds = classical_mds(geodesic_distances(graph), 2);
  if (warnings) warnings->insert(warnings->end(), mds.warnings.begin(), mds.warnings.end());
  return from_matrix(mds.coords, LayoutMethod::isomap, 0);
}

Layout2D pca_2d(const Eigen::MatrixXd& latents) {
  const auto n = latents.rows();
  if (n < 2) throw Error(ErrorCode::input, "pca needs at least 2 points");
  const Eigen::MatrixXd centered = latents.rowwise() - latents.colwise().mean();
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::input, "eigendecomposition failed");
  const auto d = cov.rows();
  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(n, 2);
  for (Eigen::Index c = 0; c < std::min<Eigen::Index>(2, d); ++c) {
    scores.col(c) = centered * solver.eigenvectors().col(d - 1 - c);
  }
  fix_column_signs(scores);
  return from_matrix(scores, LayoutMethod::pca, 0);
}

AlignmentResult procrustes_align(const Layout2D& target, const Layout2D& source, bool allow_scale) {
  if (target.size() != source.size()) throw Error(ErrorCode::alignment, "layouts differ in size");
  if (source.size() < 2) throw Error(ErrorCode::alignment, "alignment needs at least 2 points");
  const Eigen::MatrixXd t = to_matrix(target);
  const Eigen::MatrixXd s = to_matrix(source);
  const Eigen::RowVector2d t_mean = t.colwise().mean();
  const Eigen::RowVector2d s_mean = s.colwise().mean();
  const Eigen::MatrixXd tc = t.rowwise() - t_mean;
  const Eigen::MatrixXd sc = s.rowwise() - s_mean;
  const double s_norm = sc.squaredNorm();
  if (!(s_norm > 0.0)) throw Error(ErrorCode::alignment, "source points are all identical");

  const Eigen::Matrix2d cross = sc.transpose() * tc;
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix2d rotation = svd.matrixU() * svd.matrixV().transpose();
  const double scale = allow_scale ? svd.singularValues().sum() / s_norm : 1.0;

  const Eigen::MatrixXd aligned = ((scale * sc * rotation).rowwise() + t_mean).eval();
  AlignmentResult result;
  result.aligned = from_matrix(aligned, source.method, source.epoch);
  result.rmse = std::sqrt((aligned - t).squaredNorm() / static_cast<double>(source.size()));
  return result;
}

}  // namespace spacedit
