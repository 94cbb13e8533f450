#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace cdnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// P x K basis. Columns are the shared co-activation patterns.
using Dictionary = Matrix;
/// Per-subject nonnegative loadings, length K.
using Loadings = Vector;

/// Elementwise symmetry tolerance applied when matrices are ingested.
inline constexpr double kSymmetryTolerance = 1e-10;

/// Symmetric P x P subject matrix. Construction validates and symmetrizes.
class CorrelationMatrix {
 public:
  CorrelationMatrix() = default;
  /// Throws ValidationError if `data` is not square, has non-finite entries,
  /// or deviates from symmetry by more than kSymmetryTolerance.
  explicit CorrelationMatrix(const Matrix& data, std::string subject_id = {});

  const Matrix& data() const { return data_; }
  const std::string& subject_id() const { return subject_id_; }
  Eigen::Index size() const { return data_.rows(); }

 private:
  Matrix data_;
  std::string subject_id_;
};

struct Hyperparameters {
  double gamma1 = 10.0;          // l1 weight on the dictionary
  double gamma2 = 0.1;           // l2 weight on the loadings
  double lambda_tradeoff = 0.1;  // weight of the network loss
  int k = 8;                     // number of basis columns

  void validate() const;
};

/// Split variable V_n = X diag(c_n) and its multiplier.
struct ConstraintState {
  Matrix v;
  Matrix lambda;
};

/// X diag(c) X^T, symmetric by construction.
Matrix reconstruct(const Dictionary& x, const Loadings& c);

/// Sum_n [ ||G_n - X diag(c_n) X^T||_F^2 + gamma2 ||c_n||^2 ] + gamma1 ||X||_1
double dictionary_objective(const Dictionary& x, const std::vector<Loadings>& cs,
                            const std::vector<CorrelationMatrix>& gammas,
                            const Hyperparameters& hp);

/// Per-term breakdown of the augmented objective.
struct AugmentedTerms {
  double data = 0.0;        // sum_n ||G_n - V_n X^T||_F^2
  double ridge = 0.0;       // gamma2 sum_n ||c_n||^2
  double sparsity = 0.0;    // gamma1 ||X||_1
  double lagrangian = 0.0;  // sum_n Tr[L_n^T R_n] + 0.5 ||R_n||_F^2, R_n = V_n - X diag(c_n)
  double total() const { return data + ridge + sparsity + lagrangian; }
};

AugmentedTerms augmented_terms(const Dictionary& x, const std::vector<Loadings>& cs,
                               const std::vector<CorrelationMatrix>& gammas,
                               const std::vector<ConstraintState>& states,
                               const Hyperparameters& hp);

/// Dictionary objective with each data term in split form ||G_n - V_n X^T||^2
/// plus the augmented Lagrangian coupling terms.
double augmented_objective(const Dictionary& x, const std::vector<Loadings>& cs,
                           const std::vector<CorrelationMatrix>& gammas,
                           const std::vector<ConstraintState>& states,
                           const Hyperparameters& hp);

/// sign(v) max(|v| - tau, 0)
double soft_threshold(double v, double tau);
Matrix soft_threshold(const Matrix& m, double tau);

/// Leading eigenpair of a symmetric matrix. Eigenvector sign is fixed so that
/// its first nonzero component is positive.
struct Eigenpair {
  double value = 0.0;
  Vector vector;
};
Eigenpair leading_eigenpair(const Matrix& symmetric);

/// G - l1 v1 v1^T for the algebraically largest eigenpair (l1, v1).
CorrelationMatrix eigen_residualize(const CorrelationMatrix& gamma);

/// Descending mean of the per-subject |eigenvalue| spectra.
Vector mean_abs_spectrum(const std::vector<CorrelationMatrix>& gammas);

/// Knee of a descending spectrum s: the index j (0-based, 1 <= j <= k_max)
/// maximizing s[j-1] - 2 s[j] + s[j+1]. Equivalently, the number of
/// eigenvalues that sit above the knee.
int knee_point(const Vector& descending_spectrum, int k_max);
int knee_point_k(const std::vector<CorrelationMatrix>& gammas, int k_max);

}  // namespace cdnet
