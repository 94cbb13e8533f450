#pragma once

#include "cdnet/ann.hpp"
#include "cdnet/model_core.hpp"

#include <cstdint>
#include <utility>

namespace cdnet {

/// min 0.5 c^T h c + f^T c  subject to c >= 0.
struct QpProblem {
  Matrix h;
  Vector f;
};

struct QpOptions {
  int max_iter = 10000;
  double kkt_tol = 1e-10;
};

struct QpResult {
  Vector solution;
  int iterations = 0;
  double kkt_residual = 0.0;
  bool converged = false;
};

/// Largest KKT violation: |g_i| where c_i > 0, max(-g_i, 0) where c_i = 0.
double kkt_residual(const QpProblem& p, const Vector& c);
double qp_value(const QpProblem& p, const Vector& c);

/// H = 2 (X^T X) o (X^T X) + 2 gamma2 I,  f = -2 diag(X^T G X).
QpProblem assemble_qp(const Dictionary& x, const CorrelationMatrix& gamma, double gamma2);

/// Projected gradient with an Armijo-safeguarded exact step, interleaved with
/// a direct solve on the current free set. `start` is projected onto c >= 0.
/// Does not check definiteness; callers guarantee h is SPD.
QpResult projected_gradient_qp(const QpProblem& p, const Vector& start, const QpOptions& opts);

/// Validates that h is symmetric positive definite, then solves.
Loadings solve_qp(const QpProblem& p, const QpOptions& opts = {});

/// Maps raw scores to the units the network is trained on and back.
struct ScoreScaler {
  Vector center;
  Vector scale;

  static ScoreScaler identity(int m);
  /// Per-dimension mean and (population) standard deviation; unit scale for
  /// constant columns.
  static ScoreScaler fit(const std::vector<Vector>& scores);
  Vector to_network(const Vector& y) const;
  Vector from_network(const Vector& z) const;
};

/// Everything needed to score an unseen subject.
struct Model {
  Dictionary x;
  NetworkWeights theta;
  Hyperparameters hp;
  ScoreScaler scaler;
  std::uint64_t seed = 0;
};

/// Loadings from the nonnegative QP and the network output for them, in
/// network units.
std::pair<Loadings, ScoreVector> predict(const Dictionary& x, const NetworkWeights& theta,
                                         const CorrelationMatrix& gamma, double gamma2);

/// As above, with the network output mapped back to score units.
std::pair<Loadings, ScoreVector> predict(const Model& model, const CorrelationMatrix& gamma);

}  // namespace cdnet
