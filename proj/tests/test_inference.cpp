#include "cdnet/errors.hpp"
#include "cdnet/inference.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace cdnet;
using testing::random_matrix;
using testing::random_spd;

TEST_CASE("assemble qp") {
  Matrix e1 = Matrix::Zero(3, 1);
  e1(0, 0) = 1.0;
  Matrix g = Matrix::Zero(3, 3);
  g(0, 0) = 3.0;
  QpProblem p = assemble_qp(e1, CorrelationMatrix(g), 0.1);
  CHECK(p.h(0, 0) == doctest::Approx(2.2).epsilon(1e-15));
  CHECK(p.f[0] == doctest::Approx(-6.0).epsilon(1e-15));

  std::mt19937_64 rng(1);
  const Matrix gamma = testing::random_symmetric(rng, 6);
  p = assemble_qp(Matrix::Zero(6, 4), CorrelationMatrix(gamma), 0.3);
  CHECK(p.h == 0.6 * Matrix::Identity(4, 4));
  CHECK(p.f.isZero(0.0));

  for (int t = 0; t < 20; ++t) {
    const Matrix x = random_matrix(rng, 7, 4);
    const Matrix gm = testing::random_symmetric(rng, 7);
    p = assemble_qp(x, CorrelationMatrix(gm), 0.1);
    const auto [h, f] = testing::naive_qp(x, gm, 0.1);
    CHECK((p.h - h).cwiseAbs().maxCoeff() <= 1e-12 * h.cwiseAbs().maxCoeff());
    CHECK((p.f - f).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, f.cwiseAbs().maxCoeff()));
    CHECK(p.h == p.h.transpose());
    CHECK(p.h.diagonal().minCoeff() >= 0.2);
  }
  CHECK_THROWS_AS(assemble_qp(Matrix::Zero(5, 2), CorrelationMatrix(gamma), 0.1), DimensionError);
}

TEST_CASE("solve qp special cases") {
  QpProblem scalar{Matrix::Constant(1, 1, 2.2), Vector::Constant(1, -6.0)};
  CHECK(solve_qp(scalar)[0] == doctest::Approx(30.0 / 11.0).epsilon(1e-14));

  std::mt19937_64 rng(2);
  const Matrix h = random_spd(rng, 5);
  CHECK(solve_qp({h, testing::random_nonneg(rng, 5)}).isZero(0.0));

  Matrix indefinite = Matrix::Identity(2, 2);
  indefinite(1, 1) = -1.0;
  CHECK_THROWS_AS(solve_qp({indefinite, Vector::Zero(2)}), ValidationError);
  Matrix asym = Matrix::Identity(2, 2);
  asym(0, 1) = 0.5;
  CHECK_THROWS_AS(solve_qp({asym, Vector::Zero(2)}), ValidationError);
}

TEST_CASE("solve qp against active-set enumeration") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    const int k = 1 + t % 10;
    const Matrix h = random_spd(rng, k);
    const Vector f = testing::random_vector(rng, k);
    const QpProblem p{h, f};
    const Vector c = solve_qp(p);
    CHECK(c.minCoeff() >= 0.0);
    CHECK(kkt_residual(p, c) < 1e-8);
    if (k <= 6) {
      CHECK((c - testing::enumerate_active_sets(h, f)).norm() < 1e-8);
    }
    const Vector projected = h.ldlt().solve(-f).cwiseMax(0.0);
    CHECK(qp_value(p, c) <= qp_value(p, Vector::Zero(k)) + 1e-12);
    CHECK(qp_value(p, c) <= qp_value(p, projected) + 1e-12);
  }
}

TEST_CASE("score scaler") {
  const std::vector<Vector> ys{Vector::Constant(2, 1.0), (Vector(2) << 3.0, 1.0).finished(),
                               (Vector(2) << 5.0, 1.0).finished()};
  const ScoreScaler s = ScoreScaler::fit(ys);
  CHECK(s.center[0] == doctest::Approx(3.0));
  CHECK(s.scale[0] == doctest::Approx(std::sqrt(8.0 / 3.0)));
  CHECK(s.scale[1] == 1.0);
  for (const auto& y : ys) CHECK((s.from_network(s.to_network(y)) - y).norm() < 1e-14);
}

TEST_CASE("predict") {
  std::mt19937_64 rng(4);
  const NetworkWeights theta = NetworkWeights::random(3, 2, rng);
  const Matrix x = random_matrix(rng, 10, 3);
  auto [c0, y0] = predict(x, theta, CorrelationMatrix(Matrix::Zero(10, 10)), 0.1);
  CHECK(c0.isZero(0.0));
  CHECK(y0 == forward(theta, Vector::Zero(3)));

  const Vector planted = (Vector(3) << 0.5, 1.5, 2.0).finished();
  const CorrelationMatrix gamma(reconstruct(x, planted));
  double previous = std::numeric_limits<double>::infinity();
  for (double g2 : {1e-1, 1e-3, 1e-5, 1e-7}) {
    const double err = (predict(x, theta, gamma, g2).first - planted).norm();
    CHECK(err <= previous);
    previous = err;
  }
  CHECK(previous < 1e-5);

  auto [c1, y1] = predict(x, theta, gamma, 0.1);
  auto [c2, y2] = predict(x, theta, gamma, 0.1);
  CHECK(c1 == c2);
  CHECK(y1 == y2);
  CHECK_THROWS_AS(predict(x, theta, gamma, 0.0), ValidationError);
}
