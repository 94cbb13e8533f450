#include "cdnet/ann.hpp"
#include "cdnet/errors.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace cdnet;
using testing::fd_violation;
using testing::random_vector;

namespace {

Vector to_vector(NetworkWeights w) {
  std::vector<double> out;
  for_each_block([&](auto& b) { out.insert(out.end(), b.data(), b.data() + b.size()); }, w);
  return Eigen::Map<Vector>(out.data(), static_cast<Eigen::Index>(out.size()));
}

NetworkWeights from_vector(NetworkWeights like, const Vector& v) {
  Eigen::Index at = 0;
  for_each_block(
      [&](auto& b) {
        std::copy(v.data() + at, v.data() + at + b.size(), b.data());
        at += b.size();
      },
      like);
  return like;
}

Vector straight_line(const NetworkWeights& t, const Vector& c) {
  Vector h1(t.hidden()), h2(t.hidden()), y(t.outputs());
  for (int i = 0; i < t.hidden(); ++i) {
    double a = t.b1[i];
    for (int k = 0; k < t.inputs(); ++k) a += t.w1(i, k) * c[k];
    h1[i] = std::tanh(a);
  }
  for (int i = 0; i < t.hidden(); ++i) {
    double a = t.b2[i];
    for (int j = 0; j < t.hidden(); ++j) a += t.w2(i, j) * h1[j];
    h2[i] = std::log1p(std::exp(a));
  }
  for (int i = 0; i < t.outputs(); ++i) {
    double a = t.b3[i];
    for (int j = 0; j < t.hidden(); ++j) a += t.w3(i, j) * h2[j];
    y[i] = a;
  }
  return y;
}

}  // namespace

TEST_CASE("network shapes") {
  std::mt19937_64 rng(1);
  const NetworkWeights t = NetworkWeights::random(8, 3, rng);
  CHECK(t.hidden() == 40);
  CHECK(t.inputs() == 8);
  CHECK(t.outputs() == 3);
  CHECK(t.parameter_count() == 40 * 8 + 40 + 40 * 40 + 40 + 3 * 40 + 3);
  CHECK(t.all_finite());
  CHECK_THROWS_AS(forward(t, Vector::Zero(7)), DimensionError);
}

TEST_CASE("forward") {
  CHECK(forward(NetworkWeights::zeros(4, 3), Vector::Ones(4)).isZero(0.0));
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    const NetworkWeights th = NetworkWeights::random(5, 3, rng);
    const Vector c = random_vector(rng, 5);
    const Vector y = forward(th, c);
    CHECK((y - straight_line(th, c)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(forward(th, c) == y);
  }
}

TEST_CASE("activations") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  for (int t = 0; t < 1000; ++t) {
    const double x = u(rng);
    CHECK(softplus(x) > 0.0);
    CHECK(std::abs(std::tanh(x)) <= 1.0);
    CHECK(softplus(x) == doctest::Approx(std::log1p(std::exp(x))).epsilon(1e-13));
    CHECK(sigmoid(x) == doctest::Approx(1.0 / (1.0 + std::exp(-x))).epsilon(1e-13));
  }
  CHECK(softplus(800.0) == 800.0);
  CHECK(std::isfinite(softplus(-800.0)));
}

TEST_CASE("network loss") {
  NetworkWeights th = NetworkWeights::zeros(2, 2);
  th.b3 << 1.0, 2.0;
  const std::vector<Vector> cs{Vector::Zero(2), Vector::Ones(2)};
  const std::vector<Vector> ys{Vector::Zero(2), (Vector(2) << 1.0, 4.0).finished()};
  // residuals (1,2) and (0,-2): 1 + 4 + 0 + 4 = 9
  CHECK(network_loss(th, cs, ys, 0.1) == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(network_loss(th, cs, ys, 0.0) == 0.0);

  std::mt19937_64 rng(4);
  const NetworkWeights r = NetworkWeights::random(2, 2, rng);
  const std::vector<Vector> fit{forward(r, cs[0]), forward(r, cs[1])};
  CHECK(network_loss(r, cs, fit, 0.1) == 0.0);
  const double a = network_loss(r, cs, ys, 0.3);
  CHECK(network_loss(r, {cs[1], cs[0]}, {ys[1], ys[0]}, 0.3) == doctest::Approx(a).epsilon(1e-15));
  CHECK_THROWS_AS(network_loss(r, cs, {ys[0]}, 0.1), DimensionError);
}

TEST_CASE("backprop against finite differences") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    const NetworkWeights th = NetworkWeights::random(4, 3, rng);
    const Vector c = random_vector(rng, 4);
    const Vector y = random_vector(rng, 3);
    const Vector w0 = to_vector(th);
    auto loss_w = [&](const Vector& w) { return (forward(from_vector(th, w), c) - y).squaredNorm(); };
    CHECK(fd_violation(loss_w, w0, to_vector(backprop_weights(th, c, y))) <= 1.0);
    auto loss_c = [&](const Vector& v) { return (forward(th, v) - y).squaredNorm(); };
    CHECK(fd_violation(loss_c, c, backprop_input(th, c, y)) <= 1.0);
    CHECK(backprop(th, c, y).loss == doctest::Approx(loss_c(c)).epsilon(1e-15));
  }
}

TEST_CASE("backprop special cases") {
  std::mt19937_64 rng(6);
  NetworkWeights th = NetworkWeights::random(4, 3, rng);
  const Vector c = random_vector(rng, 4);
  const Vector y = forward(th, c);
  CHECK(to_vector(backprop_weights(th, c, y)).isZero(0.0));
  CHECK(backprop_input(th, c, y).isZero(0.0));

  const Vector target = random_vector(rng, 3);
  const Backprop base = backprop(th, c, target);
  const Vector shifted = y + 2.0 * (target - y);
  const Backprop twice = backprop(th, c, shifted);
  CHECK((twice.weights.w3 - 2.0 * base.weights.w3).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((twice.weights.b3 - 2.0 * base.weights.b3).cwiseAbs().maxCoeff() < 1e-12);

  th.w1.setZero();
  CHECK(backprop_input(th, c, target).isZero(0.0));
}

TEST_CASE("adam step") {
  const NetworkWeights zero = NetworkWeights::zeros(1, 1, 1);
  NetworkWeights g = zero;
  for_each_block([](auto& b) { b.setConstant(0.5); }, g);
  auto [state, theta] = adam_step(AdamState::fresh(zero, 1e-4), zero, g);
  CHECK(state.t == 1);
  // m_hat = 0.5, v_hat = 0.25, step = 1e-4 * 0.5 / (0.5 + 1e-8)
  const double want = -1e-4 / (1.0 + 2e-8);
  for_each_block(
      [&](auto& b) {
        for (Eigen::Index i = 0; i < b.size(); ++i) {
          CHECK(b.data()[i] == doctest::Approx(want).epsilon(1e-12));
          CHECK(b.data()[i] == doctest::Approx(-9.99999984e-5).epsilon(1e-9));
        }
      },
      theta);

  auto [fresh, still] = adam_step(AdamState::fresh(zero, 1e-4), theta, zero);
  CHECK(to_vector(still) == to_vector(theta));
  CHECK(to_vector(fresh.m).isZero(0.0));
  auto [s0, t0] = adam_step(state, theta, zero);
  CHECK(s0.m.b3[0] == doctest::Approx(0.9 * state.m.b3[0]).epsilon(1e-15));
  CHECK(s0.v.b3[0] == doctest::Approx(0.999 * state.v.b3[0]).epsilon(1e-15));

  std::mt19937_64 rng(7);
  NetworkWeights th = NetworkWeights::random(3, 2, rng);
  NetworkWeights grad = NetworkWeights::random(3, 2, rng);
  AdamState st = AdamState::fresh(th, 1e-3);
  for (int step = 0; step < 2; ++step) {
    auto [ns, nt] = adam_step(st, th, grad);
    CHECK((to_vector(nt) - to_vector(th)).cwiseAbs().maxCoeff() <= 1e-3 * (1.0 + 1e-8));
    st = ns;
    th = nt;
  }
}

TEST_CASE("adam schedule") {
  const AdamSchedule s;
  CHECK(s.epochs == 50);
  CHECK(s.batch_size == 12);
  CHECK(s.lr_at_epoch(0) == doctest::Approx(1e-4).epsilon(1e-15));
  CHECK(s.lr_at_epoch(4) == doctest::Approx(1e-4).epsilon(1e-15));
  CHECK(s.lr_at_epoch(5) == doctest::Approx(9e-5).epsilon(1e-14));
  CHECK(s.lr_at_epoch(10) == doctest::Approx(8.1e-5).epsilon(1e-14));
}

TEST_CASE("train theta") {
  std::mt19937_64 init(8);
  const NetworkWeights th = NetworkWeights::random(3, 2, init);
  std::vector<Vector> cs, ys;
  for (int n = 0; n < 25; ++n) {
    cs.push_back(testing::random_nonneg(init, 3));
    ys.push_back((Vector(2) << cs.back().sum(), cs.back()[0] - cs.back()[1]).finished());
  }
  AdamSchedule s;
  s.lr0 = 1e-2;
  std::mt19937_64 r1(9), r2(9);
  const NetworkWeights a = train_theta(th, cs, ys, s, r1);
  const NetworkWeights b = train_theta(th, cs, ys, s, r2);
  CHECK(to_vector(a) == to_vector(b));
  CHECK(network_loss(a, cs, ys, 1.0) < network_loss(th, cs, ys, 1.0));
  CHECK_THROWS_AS(train_theta(th, {}, {}, s, r1), ValidationError);
}
