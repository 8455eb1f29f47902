#include "doctest.h"

#include "oracles.hpp"

#include "spacedit/error.hpp"
#include "spacedit/feedback.hpp"

#include <random>
#include <sstream>

using namespace spacedit;

namespace {

Layout2D random_layout(std::size_t n, std::mt19937_64& rng, bool integer_grid) {
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::uniform_int_distribution<int> g(-3, 3);
  Layout2D l;
  for (std::size_t i = 0; i < n; ++i) {
    l.points.push_back(integer_grid ? Point2{double(g(rng)), double(g(rng))} : Point2{u(rng), u(rng)});
  }
  return l;
}

FeedbackTargets one_target(Eigen::RowVectorXd p, Eigen::RowVectorXd n, double delta) {
  FeedbackTargets t;
  t.moved_ids = {0};
  t.anchor_p = p;
  t.anchor_n = n;
  t.delta = delta;
  return t;
}

}  // namespace

TEST_CASE("reference selection matches an exhaustive sort") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 100;
    const auto before = random_layout(n, rng, trial % 2 == 1);  // odd trials force ties
    auto after = before;
    std::vector<int> labels(n);
    std::uniform_int_distribution<int> cls(0, 3);
    for (auto& l : labels) l = cls(rng);
    std::vector<std::size_t> moved{3, 17, 42};
    for (auto m : moved) after.points[m] = {after.points[m].x + 2.0, after.points[m].y - 1.0};
    std::vector<bool> allowed(n, true);
    for (std::size_t i = 0; i < n; i += 7) allowed[i] = false;
    const auto got = select_references(before, after, labels, moved, 5, allowed);
    REQUIRE(got.sets.size() == moved.size());
    for (std::size_t i = 0; i < moved.size(); ++i) {
      CHECK(got.sets[i] == oracle::references(before, after, labels, moved, moved[i], 5, allowed));
    }
  }
}

TEST_CASE("reference shortfall is reported and unusable sets flagged") {
  Layout2D l;
  l.points = {{0, 0}, {1, 0}, {2, 0}, {3, 0}};
  const std::vector<int> labels{0, 0, 1, 1};
  const std::vector<std::size_t> moved{0};
  auto sel = select_references(l, l, labels, moved, 5);
  CHECK(sel.sets[0].positive_ids.size() == 1);
  CHECK(sel.sets[0].negative_ids.size() == 2);
  CHECK(sel.warnings.size() == 2);

  const std::vector<int> lonely{0, 1, 1, 1};
  sel = select_references(l, l, lonely, moved, 2);
  CHECK_FALSE(sel.sets[0].usable());
  CHECK(sel.warnings.size() == 1);
}

TEST_CASE("anchor of two references weights by inverse squared distance") {
  Eigen::VectorXd m(2);
  m << 0, 0;
  Eigen::MatrixXd refs(2, 2);
  refs << 1, 0, 0, 2;
  const auto w = anchor_weights(m, refs);
  CHECK(w(0) == doctest::Approx(0.8));
  CHECK(w(1) == doctest::Approx(0.2));
  const auto a = compute_anchor(m, refs);
  CHECK(a(0) == doctest::Approx(0.8));
  CHECK(a(1) == doctest::Approx(0.4));
  CHECK((a - oracle::weighted_anchor(m, refs, true)).norm() < 1e-12);
}

TEST_CASE("unnormalised anchors keep the raw weights") {
  Eigen::VectorXd m(2);
  m << 0, 0;
  Eigen::MatrixXd refs(2, 2);
  refs << 1, 0, 0, 2;
  const auto w = anchor_weights(m, refs, AnchorWeighting::unnormalized);
  CHECK(w(0) == doctest::Approx(1.0));
  CHECK(w(1) == doctest::Approx(0.25));
}

TEST_CASE("normalised anchors stay in the convex hull") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd m(6);
    Eigen::MatrixXd refs(5, 6);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = g(rng);
    for (Eigen::Index i = 0; i < refs.size(); ++i) refs.data()[i] = g(rng);
    const auto w = anchor_weights(m, refs);
    CHECK((w.array() >= 0).all());
    CHECK(std::abs(w.sum() - 1.0) < 1e-9);
    CHECK((compute_anchor(m, refs) - oracle::weighted_anchor(m, refs, true)).norm() < 1e-12);
  }
}

TEST_CASE("anchor of a reference that coincides with the latent") {
  Eigen::VectorXd m(2);
  m << 1, 1;
  Eigen::MatrixXd refs(2, 2);
  refs << 1, 1, 5, 5;
  const auto a = compute_anchor(m, refs);
  CHECK(a.allFinite());
  CHECK((a - m).norm() < 1e-6);
}

TEST_CASE("distance loss hinge boundary is exactly zero") {
  Eigen::RowVectorXd m(2), p(2), n(2);
  m << 0, 0;
  p << 0, 0;
  n << 1, 0;
  const auto dl = distance_loss(m, one_target(p, n, 1.0));
  CHECK(dl.loss == 0.0);
  CHECK(dl.grads.norm() == 0.0);
}

TEST_CASE("symmetric anchors give exactly the margin and gradient (-2, 2)") {
  Eigen::RowVectorXd m(2), p(2), n(2);
  m << 0, 0;
  p << 1, 0;
  n << 0, 1;
  const auto dl = distance_loss(m, one_target(p, n, 1.0));
  CHECK(dl.loss == 1.0);
  CHECK(dl.grads(0, 0) == -2.0);
  CHECK(dl.grads(0, 1) == 2.0);
  for (int c = 0; c < 2; ++c) {
    Eigen::RowVectorXd up = m, down = m;
    up(c) += 1e-6;
    down(c) -= 1e-6;
    const double fd = (distance_loss(up, one_target(p, n, 1.0)).loss -
                       distance_loss(down, one_target(p, n, 1.0)).loss) / 2e-6;
    CHECK(fd == doctest::Approx(dl.grads(0, c)).epsilon(1e-6));
  }
}

TEST_CASE("distance loss gradients match finite differences away from the kink") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index d = 4, dim = 5;
    FeedbackTargets t;
    t.delta = 1.0;
    t.anchor_p.resize(d, dim);
    t.anchor_n.resize(d, dim);
    Eigen::MatrixXd m(d, dim);
    for (Eigen::Index i = 0; i < d * dim; ++i) {
      t.anchor_p.data()[i] = g(rng);
      t.anchor_n.data()[i] = g(rng);
      m.data()[i] = g(rng);
    }
    for (Eigen::Index i = 0; i < d; ++i) t.moved_ids.push_back(i);
    const auto dl = distance_loss(m, t);
    for (Eigen::Index i = 0; i < d; ++i) {
      if (std::abs(dl.hinge_args[i]) < 1e-3) continue;
      for (Eigen::Index c = 0; c < dim; ++c) {
        auto up = m, down = m;
        up(i, c) += 1e-6;
        down(i, c) -= 1e-6;
        const double fd = (distance_loss(up, t).loss - distance_loss(down, t).loss) / 2e-6;
        const double an = dl.grads(i, c);
        worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6}));
      }
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("distance loss with no moved items is zero") {
  const auto dl = distance_loss(Eigen::MatrixXd(0, 3), FeedbackTargets{});
  CHECK(dl.loss == 0.0);
}

TEST_CASE("total loss combines the weighted terms") {
  const auto b = total_loss(1.0, 2.0, 1.0, 0.1);
  CHECK(b.total == doctest::Approx(1.2));
  CHECK(total_loss(0.7, 5.0, 1.0, 0.0).total == 0.7);
  CHECK_THROWS_AS(total_loss(1.0, 1.0, -1.0, 0.1), Error);
}

TEST_CASE("edit script lines round trip") {
  EditTransaction tx;
  tx.moves = {{4, {0.5, -1.25}, {2.0, 3.0}}, {9, {1e-3, 7.0}, {-4.0, 0.1}}};
  tx.source = EditSource::oracle;
  tx.created_at = 1234;
  const auto line = edit_to_json_line(tx);
  CHECK(line.find('\n') == std::string::npos);
  const auto back = edit_from_json_line(line);
  CHECK(back.moves == tx.moves);
  CHECK(back.source == EditSource::oracle);
}

TEST_CASE("edit script errors name the line") {
  std::istringstream in(R"({"moves":[{"id":1,"old":[0,0],"new":[1,1]}],"source":"human"}
{"moves":[{"id":1,"old":[0,0]}],"source":"human"}
)");
  try {
    read_edit_script(in);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(edit_from_json_line("{not json"), Error);
  CHECK_THROWS_AS(edit_from_json_line(R"({"moves":[{"id":1,"old":[0,0],"new":[1,1]}],"source":"robot"})"), Error);
}

TEST_CASE("a transaction may not move an item twice") {
  EditTransaction tx;
  tx.moves = {{1, {0, 0}, {1, 1}}, {1, {1, 1}, {2, 2}}};
  CHECK_THROWS_AS(tx.validate(), Error);
}
