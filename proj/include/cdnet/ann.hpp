#pragma once

#include "cdnet/model_core.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace cdnet {

inline constexpr int kHiddenWidth = 40;

/// Two hidden layers (tanh, softplus) and an affine readout.
struct NetworkWeights {
  Matrix w1;  // H x K
  Vector b1;  // H
  Matrix w2;  // H x H
  Vector b2;  // H
  Matrix w3;  // M x H
  Vector b3;  // M

  static NetworkWeights zeros(int k, int m, int hidden = kHiddenWidth);
  /// Glorot-uniform weights, zero biases.
  static NetworkWeights random(int k, int m, std::mt19937_64& rng, int hidden = kHiddenWidth);

  int inputs() const { return static_cast<int>(w1.cols()); }
  int outputs() const { return static_cast<int>(w3.rows()); }
  int hidden() const { return static_cast<int>(w1.rows()); }
  bool all_finite() const;
  std::size_t parameter_count() const;
};

/// Applies `f` to every parameter block of each argument in lockstep.
template <class F, class... W>
void for_each_block(F&& f, W&... w) {
  f(w.w1...);
  f(w.b1...);
  f(w.w2...);
  f(w.b2...);
  f(w.w3...);
  f(w.b3...);
}

using ScoreVector = Vector;

double softplus(double x);
double sigmoid(double x);

ScoreVector forward(const NetworkWeights& theta, const Loadings& c);

/// lambda * sum_n ||forward(theta, c_n) - y_n||^2
double network_loss(const NetworkWeights& theta, const std::vector<Loadings>& cs,
                    const std::vector<ScoreVector>& ys, double lambda_tradeoff);

/// Gradients of ||forward(theta, c) - y||^2.
struct Backprop {
  NetworkWeights weights;
  Vector input;
  double loss = 0.0;
};
Backprop backprop(const NetworkWeights& theta, const Loadings& c, const ScoreVector& y);
NetworkWeights backprop_weights(const NetworkWeights& theta, const Loadings& c,
                                const ScoreVector& y);
Vector backprop_input(const NetworkWeights& theta, const Loadings& c, const ScoreVector& y);

struct AdamState {
  NetworkWeights m;
  NetworkWeights v;
  std::int64_t t = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState fresh(const NetworkWeights& like, double lr);
};

/// One bias-corrected ADAM update.
std::pair<AdamState, NetworkWeights> adam_step(AdamState state, NetworkWeights theta,
                                               const NetworkWeights& grad);

struct AdamSchedule {
  int epochs = 50;
  int batch_size = 12;
  double lr0 = 1e-4;
  double decay = 0.9;
  int decay_every = 5;

  double lr_at_epoch(int epoch) const;
};

/// Mini-batch ADAM on sum_n ||forward(theta, c_n) - y_n||^2. Moments start
/// from zero on every call; the weights are warm-started from `theta`.
NetworkWeights train_theta(NetworkWeights theta, const std::vector<Loadings>& cs,
                           const std::vector<ScoreVector>& ys, const AdamSchedule& schedule,
                           std::mt19937_64& rng);

}  // namespace cdnet
