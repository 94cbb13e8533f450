#include "cdnet/inference.hpp"

#include "cdnet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace cdnet {

double qp_value(const QpProblem& p, const Vector& c) {
  return 0.5 * c.dot(p.h * c) + p.f.dot(c);
}

double kkt_residual(const QpProblem& p, const Vector& c) {
  const Vector g = p.h * c + p.f;
  double r = 0.0;
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    r = std::max(r, c(i) > 0.0 ? std::abs(g(i)) : std::max(-g(i), 0.0));
  }
  return r;
}

QpProblem assemble_qp(const Dictionary& x, const CorrelationMatrix& gamma, double gamma2) {
  if (gamma.size() != x.rows()) {
    throw DimensionError("subject '" + gamma.subject_id() + "' matrix is " +
                         std::to_string(gamma.size()) + " wide but the dictionary has " +
                         std::to_string(x.rows()) + " rows");
  }
  if (!(gamma2 >= 0.0)) throw ValidationError("gamma2 must be nonnegative");
  const Matrix gram = x.transpose() * x;
  QpProblem p;
  p.h = 2.0 * gram.cwiseProduct(gram);
  p.h.diagonal().array() += 2.0 * gamma2;
  p.h = 0.5 * (p.h + p.h.transpose());
  p.f = -2.0 * (x.transpose() * gamma.data() * x).diagonal();
  return p;
}

namespace {

// Direct solve on the free set {i : c_i > 0 or g_i < 0}. Returns false when
// the free-set minimizer leaves the feasible orthant.
bool free_set_solve(const QpProblem& p, const Vector& c, const Vector& g, Vector& out) {
  std::vector<Eigen::Index> free;
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    if (c(i) > 0.0 || g(i) < 0.0) free.push_back(i);
  }
  out = Vector::Zero(c.size());
  if (free.empty()) return true;
  const auto nf = static_cast<Eigen::Index>(free.size());
  Matrix hf(nf, nf);
  Vector ff(nf);
  for (Eigen::Index a = 0; a < nf; ++a) {
    ff(a) = p.f(free[a]);
    for (Eigen::Index b = 0; b < nf; ++b) hf(a, b) = p.h(free[a], free[b]);
  }
  Eigen::LLT<Matrix> llt(hf);
  if (llt.info() != Eigen::Success) return false;
  Vector z = llt.solve(-ff);
  z += llt.solve(-ff - hf * z);  // one step of iterative refinement
  for (Eigen::Index a = 0; a < nf; ++a) {
    if (!(z(a) > 0.0)) return false;
    out(free[a]) = z(a);
  }
  return true;
}

}  // namespace

QpResult projected_gradient_qp(const QpProblem& p, const Vector& start, const QpOptions& opts) {
  const Eigen::Index k = p.f.size();
  if (p.h.rows() != k || p.h.cols() != k || start.size() != k) {
    throw DimensionError("QP dimensions disagree");
  }
  QpResult res;
  Vector c = start.cwiseMax(0.0);
  double value = qp_value(p, c);
  for (res.iterations = 0; res.iterations < opts.max_iter; ++res.iterations) {
    Vector g = p.h * c + p.f;
    res.kkt_residual = kkt_residual(p, c);
    if (res.kkt_residual < opts.kkt_tol) {
      res.converged = true;
      break;
    }

    Vector candidate;
    if (free_set_solve(p, c, g, candidate)) {
      const double cand_value = qp_value(p, candidate);
      if (cand_value <= value) {
        c = candidate;
        value = cand_value;
        if (kkt_residual(p, c) < opts.kkt_tol) continue;
        g = p.h * c + p.f;
      }
    }

    Vector d = -g;
    for (Eigen::Index i = 0; i < k; ++i) {
      if (c(i) <= 0.0 && g(i) > 0.0) d(i) = 0.0;
    }
    const double curvature = d.dot(p.h * d);
    if (!(curvature > 0.0)) break;
    double alpha = d.squaredNorm() / curvature;
    for (int halving = 0; halving < 60; ++halving) {
      Vector trial = (c + alpha * d).cwiseMax(0.0);
      const double trial_value = qp_value(p, trial);
      if (trial_value <= value + 1e-4 * g.dot(trial - c)) {
        c = std::move(trial);
        value = trial_value;
        break;
      }
      alpha *= 0.5;
    }
  }
  res.kkt_residual = kkt_residual(p, c);
  res.converged = res.converged || res.kkt_residual < opts.kkt_tol;
  res.solution = std::move(c);
  return res;
}

Loadings solve_qp(const QpProblem& p, const QpOptions& opts) {
  const Eigen::Index k = p.f.size();
  if (p.h.rows() != k || p.h.cols() != k) throw DimensionError("QP dimensions disagree");
  if (!p.h.allFinite() || !p.f.allFinite()) throw ValidationError("QP has non-finite entries");
  if (k > 0 && (p.h - p.h.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance) {
    throw ValidationError("QP matrix is not symmetric");
  }
  Eigen::LLT<Matrix> llt(p.h);
  if (llt.info() != Eigen::Success) {
    throw ValidationError("QP matrix is not positive definite");
  }
  return projected_gradient_qp(p, Vector::Zero(k), opts).solution;
}

ScoreScaler ScoreScaler::identity(int m) {
  return {Vector::Zero(m), Vector::Ones(m)};
}

ScoreScaler ScoreScaler::fit(const std::vector<Vector>& scores) {
  if (scores.empty()) throw ValidationError("cannot fit a score scaler to no subjects");
  const Eigen::Index m = scores.front().size();
  ScoreScaler s{Vector::Zero(m), Vector::Zero(m)};
  for (const auto& y : scores) s.center += y;
  s.center /= static_cast<double>(scores.size());
  for (const auto& y : scores) s.scale += (y - s.center).cwiseAbs2();
  s.scale = (s.scale / static_cast<double>(scores.size())).cwiseSqrt();
  for (Eigen::Index j = 0; j < m; ++j) {
    if (!(s.scale(j) > 0.0)) s.scale(j) = 1.0;
  }
  return s;
}

Vector ScoreScaler::to_network(const Vector& y) const {
  return (y - center).cwiseQuotient(scale);
}

Vector ScoreScaler::from_network(const Vector& z) const {
  return z.cwiseProduct(scale) + center;
}

std::pair<Loadings, ScoreVector> predict(const Dictionary& x, const NetworkWeights& theta,
                                         const CorrelationMatrix& gamma, double gamma2) {
  if (!(gamma2 > 0.0)) {
    throw ValidationError("prediction needs gamma2 > 0 so the QP is strictly convex");
  }
  Loadings c = solve_qp(assemble_qp(x, gamma, gamma2));
  ScoreVector y = forward(theta, c);
  return {std::move(c), std::move(y)};
}

std::pair<Loadings, ScoreVector> predict(const Model& model, const CorrelationMatrix& gamma) {
  auto [c, z] = predict(model.x, model.theta, gamma, model.hp.gamma2);
  return {std::move(c), model.scaler.from_network(z)};
}

}  // namespace cdnet
