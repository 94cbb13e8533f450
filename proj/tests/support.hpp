#pragma once

#include "cdnet/model_core.hpp"
#include "cdnet/synth.hpp"
#include "cdnet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

namespace testing {

using cdnet::Matrix;
using cdnet::Vector;

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                            double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  return random_matrix(rng, n, 1, scale).col(0);
}

inline Vector random_nonneg(std::mt19937_64& rng, Eigen::Index n) {
  return random_vector(rng, n).cwiseAbs();
}

inline Matrix random_symmetric(std::mt19937_64& rng, Eigen::Index p) {
  Matrix a = random_matrix(rng, p, p);
  Matrix s = 0.5 * (a + a.transpose());
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < i; ++j) s(i, j) = s(j, i);
  return s;
}

inline Matrix random_spd(std::mt19937_64& rng, Eigen::Index k) {
  Matrix a = random_matrix(rng, k, k);
  Matrix h = a * a.transpose() + 0.1 * Matrix::Identity(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < i; ++j) h(i, j) = h(j, i);
  return h;
}

/// Worst violation of |fd - analytic| <= max(abs_floor, rel * |analytic|), as a
/// ratio; <= 1 means every coordinate passes.
inline double fd_violation(const std::function<double(const Vector&)>& f, const Vector& x,
                           const Vector& analytic, double h = 1e-5, double rel = 1e-5,
                           double abs_floor = 1e-8) {
  double worst = 0.0;
  Vector xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    const double up = f(xp);
    xp[i] = x[i] - h;
    const double down = f(xp);
    xp[i] = x[i];
    const double fd = (up - down) / (2.0 * h);
    const double tol = std::max(abs_floor, rel * std::max(std::abs(fd), std::abs(analytic[i])));
    worst = std::max(worst, std::abs(fd - analytic[i]) / tol);
  }
  return worst;
}

inline Vector flatten(const Matrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

inline Matrix unflatten(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

/// Small planted problem for trainer checks.
inline cdnet::SynthSpec small_spec(std::uint64_t seed) {
  cdnet::SynthSpec s;
  s.p = 8;
  s.k_true = 3;
  s.n = 6;
  s.m = 2;
  s.seed = seed;
  return s;
}

struct Problem {
  cdnet::TrainingSet data;
  cdnet::TrainConfig config;
  cdnet::TrainState state;
};

/// Initialized state with the split variables and duals moved off the
/// constraint surface so every term is active.
inline Problem perturbed_problem(std::uint64_t seed, int k = 3) {
  Problem pr;
  auto [ds, truth] = cdnet::generate(small_spec(seed));
  pr.data = ds.training_set();
  pr.config.hp.k = k;
  pr.config.seed = seed;
  std::mt19937_64 rng(seed);
  pr.state = cdnet::initialize(pr.data, pr.config, rng);
  for (auto& s : pr.state.constraints) {
    s.v += random_matrix(rng, s.v.rows(), s.v.cols(), 0.1);
    s.lambda = random_matrix(rng, s.v.rows(), s.v.cols(), 0.1);
  }
  return pr;
}

}  // namespace testing
