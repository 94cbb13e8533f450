#include "cdnet/model_core.hpp"

#include "cdnet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cdnet {

namespace {

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(a) +
                         " entries, got " + std::to_string(b));
  }
}

void check_dictionary_loadings(const Dictionary& x, const Loadings& c) {
  if (c.size() != x.cols()) {
    throw DimensionError("loadings have length " + std::to_string(c.size()) +
                         " but the dictionary has " + std::to_string(x.cols()) +
                         " columns");
  }
}

void check_subject(const Dictionary& x, const Loadings& c, const CorrelationMatrix& g) {
  check_dictionary_loadings(x, c);
  if (g.size() != x.rows()) {
    throw DimensionError("subject '" + g.subject_id() + "' matrix is " +
                         std::to_string(g.size()) + "x" + std::to_string(g.size()) +
                         " but the dictionary has " + std::to_string(x.rows()) + " rows");
  }
}

}  // namespace

CorrelationMatrix::CorrelationMatrix(const Matrix& data, std::string subject_id)
    : subject_id_(std::move(subject_id)) {
  if (data.rows() != data.cols()) {
    throw DimensionError("matrix for subject '" + subject_id_ + "' is not square (" +
                          std::to_string(data.rows()) + "x" + std::to_string(data.cols()) +
                          ")");
  }
  if (!data.allFinite()) {
    throw ValidationError("matrix for subject '" + subject_id_ + "' has non-finite entries");
  }
  const double asym = (data - data.transpose()).cwiseAbs().maxCoeff();
  if (data.size() > 0 && asym > kSymmetryTolerance) {
    throw ValidationError("matrix for subject '" + subject_id_ +
                          "' is not symmetric (max |A - A^T| = " + std::to_string(asym) + ")");
  }
  data_ = 0.5 * (data + data.transpose());
}

void Hyperparameters::validate() const {
  if (!(gamma1 >= 0.0) || !(gamma2 >= 0.0) || !(lambda_tradeoff >= 0.0)) {
    throw ValidationError("regularization weights must be nonnegative");
  }
  if (k < 1) throw ValidationError("k must be positive");
}

Matrix reconstruct(const Dictionary& x, const Loadings& c) {
  check_dictionary_loadings(x, c);
  Matrix out = x * c.asDiagonal() * x.transpose();
  // Mirror the upper triangle so the result is exactly symmetric.
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    for (Eigen::Index i = j + 1; i < out.rows(); ++i) out(i, j) = out(j, i);
  }
  return out;
}

double dictionary_objective(const Dictionary& x, const std::vector<Loadings>& cs,
                            const std::vector<CorrelationMatrix>& gammas,
                            const Hyperparameters& hp) {
  require_same_size(gammas.size(), cs.size(), "dictionary_objective loadings");
  double total = 0.0;
  for (std::size_t n = 0; n < cs.size(); ++n) {
    check_subject(x, cs[n], gammas[n]);
    total += (gammas[n].data() - reconstruct(x, cs[n])).squaredNorm();
    total += hp.gamma2 * cs[n].squaredNorm();
  }
  return total + hp.gamma1 * x.cwiseAbs().sum();
}

AugmentedTerms augmented_terms(const Dictionary& x, const std::vector<Loadings>& cs,
                               const std::vector<CorrelationMatrix>& gammas,
                               const std::vector<ConstraintState>& states,
                               const Hyperparameters& hp) {
  require_same_size(gammas.size(), cs.size(), "augmented_objective loadings");
  require_same_size(gammas.size(), states.size(), "augmented_objective constraint states");
  AugmentedTerms t;
  for (std::size_t n = 0; n < cs.size(); ++n) {
    check_subject(x, cs[n], gammas[n]);
    const auto& s = states[n];
    if (s.v.rows() != x.rows() || s.v.cols() != x.cols() || s.lambda.rows() != x.rows() ||
        s.lambda.cols() != x.cols()) {
      throw DimensionError("constraint state for subject " + std::to_string(n) +
                           " does not match the dictionary shape");
    }
    const Matrix residual = s.v - x * cs[n].asDiagonal();
    t.data += (gammas[n].data() - s.v * x.transpose()).squaredNorm();
    t.ridge += hp.gamma2 * cs[n].squaredNorm();
    t.lagrangian += (s.lambda.array() * residual.array()).sum() + 0.5 * residual.squaredNorm();
  }
  t.sparsity = hp.gamma1 * x.cwiseAbs().sum();
  return t;
}

double augmented_objective(const Dictionary& x, const std::vector<Loadings>& cs,
                           const std::vector<CorrelationMatrix>& gammas,
                           const std::vector<ConstraintState>& states,
                           const Hyperparameters& hp) {
  return augmented_terms(x, cs, gammas, states, hp).total();
}

double soft_threshold(double v, double tau) {
  if (v > tau) return v - tau;
  if (v < -tau) return v + tau;
  return 0.0;
}

Matrix soft_threshold(const Matrix& m, double tau) {
  return m.unaryExpr([tau](double v) { return soft_threshold(v, tau); });
}

Eigenpair leading_eigenpair(const Matrix& symmetric) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetric);
  if (solver.info() != Eigen::Success) {
    throw DivergenceError("symmetric eigensolver failed to converge");
  }
  const Eigen::Index last = symmetric.rows() - 1;
  Eigenpair pair{solver.eigenvalues()(last), solver.eigenvectors().col(last)};
  for (Eigen::Index i = 0; i < pair.vector.size(); ++i) {
    if (pair.vector(i) != 0.0) {
      if (pair.vector(i) < 0.0) pair.vector = -pair.vector;
      break;
    }
  }
  return pair;
}

CorrelationMatrix eigen_residualize(const CorrelationMatrix& gamma) {
  if (gamma.size() == 0) return gamma;
  const Eigenpair lead = leading_eigenpair(gamma.data());
  Matrix residual = gamma.data() - lead.value * lead.vector * lead.vector.transpose();
  residual = 0.5 * (residual + residual.transpose());
  return CorrelationMatrix(residual, gamma.subject_id());
}

Vector mean_abs_spectrum(const std::vector<CorrelationMatrix>& gammas) {
  if (gammas.empty()) throw ValidationError("eigenspectrum of an empty cohort");
  const Eigen::Index p = gammas.front().size();
  Vector mean = Vector::Zero(p);
  for (const auto& g : gammas) {
    if (g.size() != p) throw DimensionError("subject '" + g.subject_id() + "' has wrong size");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(g.data(), Eigen::EigenvaluesOnly);
    Vector s = solver.eigenvalues().cwiseAbs();
    std::sort(s.data(), s.data() + s.size(), std::greater<>());
    mean += s;
  }
  return mean / static_cast<double>(gammas.size());
}

int knee_point(const Vector& s, int k_max) {
  if (k_max < 1) throw ValidationError("k_max must be positive");
  const int last = std::min<int>(k_max, static_cast<int>(s.size()) - 2);
  int best = 1;
  double best_curv = -std::numeric_limits<double>::infinity();
  for (int j = 1; j <= last; ++j) {
    const double curv = s(j - 1) - 2.0 * s(j) + s(j + 1);
    if (curv > best_curv) {
      best_curv = curv;
      best = j;
    }
  }
  return best;
}

int knee_point_k(const std::vector<CorrelationMatrix>& gammas, int k_max) {
  if (gammas.empty()) throw ValidationError("knee_point_k needs at least one subject");
  return knee_point(mean_abs_spectrum(gammas), k_max);
}

}  // namespace cdnet
