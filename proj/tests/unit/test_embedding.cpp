#include "doctest.h"

#include "oracles.hpp"

#include "spacedit/embedding.hpp"
#include "spacedit/error.hpp"

#include <cmath>
#include <random>

using namespace spacedit;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd x(rows, cols);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
  return x;
}

Eigen::MatrixXd pairwise(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd d(x.rows(), x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.rows(); ++j) d(i, j) = (x.row(i) - x.row(j)).norm();
  }
  return d;
}

Eigen::MatrixXd random_rotation(Eigen::Index dim, std::uint64_t seed) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian(dim, dim, seed));
  return qr.householderQ();
}

}  // namespace

TEST_CASE("k-NN graph equals the brute-force union") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto x = gaussian(50, 4, seed);
    const auto g = build_knn_graph(x, 5);
    const auto expected = oracle::knn_edges(x, 5);
    CHECK(g.edge_count() == expected.size());
    for (const auto& [a, b] : expected) CHECK(g.has_edge(a, b));
  }
}

TEST_CASE("k-NN graph rejects bad k and non-finite latents") {
  const auto x = gaussian(5, 2, 1);
  CHECK_THROWS_AS(build_knn_graph(x, 0), Error);
  auto bad = x;
  bad(2, 1) = std::nan("");
  CHECK_THROWS_AS(build_knn_graph(bad, 2), Error);
}

TEST_CASE("duplicate points get the minimum edge weight") {
  Eigen::MatrixXd x(3, 2);
  x << 0, 0, 0, 0, 5, 5;
  const auto g = build_knn_graph(x, 1);
  bool found = false;
  for (const auto& e : g.adjacency[0]) {
    if (e.to == 1) {
      CHECK(e.weight == kMinEdgeWeight);
      found = true;
    }
  }
  CHECK(found);
}

TEST_CASE("bridging three components adds exactly two edges") {
  Eigen::MatrixXd x(9, 2);
  x << 0, 0, 0.1, 0, 0, 0.1,
       10, 0, 10.1, 0, 10, 0.1,
       0, 20, 0.1, 20, 0, 20.1;
  const auto g = build_knn_graph(x, 2);
  CHECK(oracle::component_count(g) == 3);
  const auto bridged = bridge_components(g, x);
  CHECK(bridged.edge_count() == g.edge_count() + 2);
  CHECK(oracle::component_count(bridged) == 1);
}

TEST_CASE("geodesics on a disconnected graph are refused") {
  Eigen::MatrixXd x(4, 1);
  x << 0, 0.1, 50, 50.1;
  CHECK_THROWS_AS(geodesic_distances(build_knn_graph(x, 1)), Error);
}

TEST_CASE("geodesics on a chain sum the hops") {
  Eigen::MatrixXd x(5, 1);
  x << 0, 1, 3, 6, 10;
  const auto d = geodesic_distances(build_knn_graph(x, 1));
  CHECK(d(0, 4) == doctest::Approx(10.0));
  CHECK(d(1, 3) == doctest::Approx(5.0));
}

TEST_CASE("classical MDS recovers a 2D configuration") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto x = gaussian(50, 2, seed);
    const auto mds = classical_mds(pairwise(x), 2);
    CHECK(oracle::procrustes_rmse(x, mds.coords) < 1e-8);
    CHECK(mds.warnings.empty());
  }
}

TEST_CASE("classical MDS rejects asymmetric input") {
  Eigen::MatrixXd d = pairwise(gaussian(4, 2, 3));
  d(0, 1) += 1.0;
  CHECK_THROWS_AS(classical_mds(d, 2), Error);
}

TEST_CASE("classical MDS warns on non-Euclidean input") {
  Eigen::MatrixXd d(3, 3);
  d << 0, 1, 10, 1, 0, 1, 10, 1, 0;  // violates the triangle inequality
  const auto mds = classical_mds(d, 2);
  CHECK_FALSE(mds.warnings.empty());
  CHECK(mds.coords.allFinite());
}

TEST_CASE("Isomap with a complete graph matches PCA on a flat manifold") {
  const Eigen::MatrixXd plane = gaussian(60, 2, 4);
  Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(60, 10);
  padded.leftCols(2) = plane;
  const Eigen::MatrixXd x = padded * random_rotation(10, 5);
  const auto iso = to_matrix(isomap(x, 59));
  const auto pca = to_matrix(pca_2d(x));
  const double scale = std::sqrt(pca.squaredNorm() / 60.0);
  CHECK(oracle::procrustes_rmse(pca, iso) / scale < 1e-6);
}

TEST_CASE("PCA matches the covariance eigendecomposition") {
  Eigen::MatrixXd flat = gaussian(80, 2, 6);
  flat.col(0) *= 3.0;
  Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(80, 5);
  padded.leftCols(2) = flat;
  const Eigen::MatrixXd x = padded * random_rotation(5, 7);
  const Eigen::MatrixXd centred = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd cov = centred.transpose() * centred / 79.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::MatrixXd top = eig.eigenvectors().rightCols(2).rowwise().reverse();
  const Eigen::MatrixXd expected = centred * top;
  const auto got = to_matrix(pca_2d(x));
  for (int c = 0; c < 2; ++c) {
    const double sign = expected.col(c).dot(got.col(c)) < 0 ? -1.0 : 1.0;
    CHECK((expected.col(c) * sign - got.col(c)).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("Isomap unrolls a swiss roll") {
  const oracle::SwissRoll roll(200, 2.0, 8);
  const auto layout = isomap(roll.points, 10);
  auto planar = [&](std::size_t i, std::size_t j) {
    return std::hypot(layout.points[i].x - layout.points[j].x, layout.points[i].y - layout.points[j].y);
  };
  // Rank order of intrinsic distances survives in the plane.
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::size_t> pick(0, 199);
  int agree = 0, total = 0;
  while (total < 2000) {
    const auto a = pick(rng), b = pick(rng), c = pick(rng);
    if (a == b || a == c || b == c) continue;
    const double di = roll.intrinsic(a, b) - roll.intrinsic(a, c);
    if (std::abs(di) < 1.0) continue;
    ++total;
    agree += (di > 0) == (planar(a, b) > planar(a, c));
  }
  CHECK(static_cast<double>(agree) / total >= 0.95);

  const auto geo = geodesic_distances(bridge_components(build_knn_graph(roll.points, 10), roll.points));
  CHECK(geo(0, 1) == doctest::Approx(roll.intrinsic(0, 1)).epsilon(0.05));
}

TEST_CASE("Procrustes undoes rotation, reflection and translation") {
  const auto x = gaussian(30, 2, 9);
  const double th = 0.7;
  Eigen::Matrix2d r;
  r << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  Eigen::Matrix2d flip;
  flip << 1, 0, 0, -1;
  Eigen::MatrixXd moved = (x * r * flip).rowwise() + Eigen::RowVector2d(4.0, -2.0);
  const auto target = from_matrix(x, LayoutMethod::isomap, 0);
  const auto fit = procrustes_align(target, from_matrix(moved, LayoutMethod::isomap, 1), false);
  CHECK(fit.rmse < 1e-10);
  CHECK(fit.aligned.epoch == 1);

  const auto scaled = procrustes_align(target, from_matrix(moved * 2.5, LayoutMethod::isomap, 1), true);
  CHECK(scaled.rmse < 1e-10);
}

TEST_CASE("Procrustes refuses mismatched or degenerate layouts") {
  const auto a = from_matrix(gaussian(5, 2, 1), LayoutMethod::isomap, 0);
  const auto b = from_matrix(gaussian(6, 2, 1), LayoutMethod::isomap, 0);
  CHECK_THROWS_AS(procrustes_align(a, b, false), Error);
  const auto same = from_matrix(Eigen::MatrixXd::Ones(5, 2), LayoutMethod::isomap, 0);
  CHECK_THROWS_AS(procrustes_align(a, same, true), Error);
}
