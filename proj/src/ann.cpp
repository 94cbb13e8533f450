#include "cdnet/ann.hpp"

#include "cdnet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cdnet {

NetworkWeights NetworkWeights::zeros(int k, int m, int hidden) {
  return {Matrix::Zero(hidden, k), Vector::Zero(hidden), Matrix::Zero(hidden, hidden),
          Vector::Zero(hidden),    Matrix::Zero(m, hidden), Vector::Zero(m)};
}

NetworkWeights NetworkWeights::random(int k, int m, std::mt19937_64& rng, int hidden) {
  auto glorot = [&rng](Eigen::Index rows, Eigen::Index cols) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> u(-limit, limit);
    Matrix w(rows, cols);
    // Fill row-major so the draw order does not depend on Eigen's storage.
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = u(rng);
    }
    return w;
  };
  NetworkWeights theta = zeros(k, m, hidden);
  theta.w1 = glorot(hidden, k);
  theta.w2 = glorot(hidden, hidden);
  theta.w3 = glorot(m, hidden);
  return theta;
}

bool NetworkWeights::all_finite() const {
  bool ok = true;
  for_each_block([&ok](const auto& b) { ok = ok && b.allFinite(); }, *this);
  return ok;
}

std::size_t NetworkWeights::parameter_count() const {
  std::size_t n = 0;
  for_each_block([&n](const auto& b) { n += static_cast<std::size_t>(b.size()); }, *this);
  return n;
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

void check_input(const NetworkWeights& theta, const Loadings& c) {
  if (c.size() != theta.w1.cols()) {
    throw DimensionError("network expects " + std::to_string(theta.w1.cols()) +
                         " inputs, got " + std::to_string(c.size()));
  }
}

struct Activations {
  Vector h1;  // tanh(w1 c + b1)
  Vector z2;  // w2 h1 + b2
  Vector h2;  // softplus(z2)
  Vector out;
};

Activations run(const NetworkWeights& theta, const Loadings& c) {
  check_input(theta, c);
  Activations a;
  a.h1 = (theta.w1 * c + theta.b1).array().tanh().matrix();
  a.z2 = theta.w2 * a.h1 + theta.b2;
  a.h2 = a.z2.unaryExpr([](double v) { return softplus(v); });
  a.out = theta.w3 * a.h2 + theta.b3;
  return a;
}

}  // namespace

ScoreVector forward(const NetworkWeights& theta, const Loadings& c) { return run(theta, c).out; }

double network_loss(const NetworkWeights& theta, const std::vector<Loadings>& cs,
                    const std::vector<ScoreVector>& ys, double lambda_tradeoff) {
  if (cs.size() != ys.size()) {
    throw DimensionError("network_loss: " + std::to_string(cs.size()) + " inputs but " +
                         std::to_string(ys.size()) + " targets");
  }
  double total = 0.0;
  for (std::size_t n = 0; n < cs.size(); ++n) {
    if (ys[n].size() != theta.w3.rows()) throw DimensionError("network_loss: target length");
    total += (forward(theta, cs[n]) - ys[n]).squaredNorm();
  }
  return lambda_tradeoff * total;
}

Backprop backprop(const NetworkWeights& theta, const Loadings& c, const ScoreVector& y) {
  const Activations a = run(theta, c);
  if (y.size() != a.out.size()) {
    throw DimensionError("target has length " + std::to_string(y.size()) +
                         ", network outputs " + std::to_string(a.out.size()));
  }
  Backprop g;
  const Vector d3 = 2.0 * (a.out - y);
  g.loss = (a.out - y).squaredNorm();
  g.weights.w3 = d3 * a.h2.transpose();
  g.weights.b3 = d3;
  const Vector d2 =
      (theta.w3.transpose() * d3).cwiseProduct(a.z2.unaryExpr([](double v) { return sigmoid(v); }));
  g.weights.w2 = d2 * a.h1.transpose();
  g.weights.b2 = d2;
  const Vector d1 = (theta.w2.transpose() * d2)
                        .cwiseProduct((1.0 - a.h1.array().square()).matrix());
  g.weights.w1 = d1 * c.transpose();
  g.weights.b1 = d1;
  g.input = theta.w1.transpose() * d1;
  return g;
}

NetworkWeights backprop_weights(const NetworkWeights& theta, const Loadings& c,
                                const ScoreVector& y) {
  return backprop(theta, c, y).weights;
}

Vector backprop_input(const NetworkWeights& theta, const Loadings& c, const ScoreVector& y) {
  return backprop(theta, c, y).input;
}

AdamState AdamState::fresh(const NetworkWeights& like, double lr) {
  AdamState s;
  s.m = NetworkWeights::zeros(like.inputs(), like.outputs(), like.hidden());
  s.v = s.m;
  s.lr = lr;
  return s;
}

std::pair<AdamState, NetworkWeights> adam_step(AdamState state, NetworkWeights theta,
                                               const NetworkWeights& grad) {
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const double b1 = state.beta1, b2 = state.beta2, lr = state.lr, eps = state.eps;
  for_each_block(
      [=](auto& p, auto& m, auto& v, const auto& g) {
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
        p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
      },
      theta, state.m, state.v, grad);
  return {std::move(state), std::move(theta)};
}

double AdamSchedule::lr_at_epoch(int epoch) const {
  return lr0 * std::pow(decay, static_cast<double>(epoch / decay_every));
}

NetworkWeights train_theta(NetworkWeights theta, const std::vector<Loadings>& cs,
                           const std::vector<ScoreVector>& ys, const AdamSchedule& schedule,
                           std::mt19937_64& rng) {
  if (cs.empty()) throw ValidationError("train_theta: empty dataset");
  if (cs.size() != ys.size()) throw DimensionError("train_theta: inputs and targets differ");
  if (schedule.batch_size < 1 || schedule.epochs < 0) {
    throw ValidationError("train_theta: invalid schedule");
  }
  std::vector<std::size_t> order(cs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  AdamState state = AdamState::fresh(theta, schedule.lr0);
  const std::size_t batch = static_cast<std::size_t>(schedule.batch_size);
  for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
    state.lr = schedule.lr_at_epoch(epoch);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      NetworkWeights grad = NetworkWeights::zeros(theta.inputs(), theta.outputs(), theta.hidden());
      for (std::size_t i = start; i < stop; ++i) {
        const Backprop g = backprop(theta, cs[order[i]], ys[order[i]]);
        for_each_block([](auto& acc, const auto& gi) { acc += gi; }, grad, g.weights);
      }
      std::tie(state, theta) = adam_step(std::move(state), std::move(theta), grad);
    }
  }
  if (!theta.all_finite()) throw DivergenceError("network weights became non-finite");
  return theta;
}

}  // namespace cdnet
