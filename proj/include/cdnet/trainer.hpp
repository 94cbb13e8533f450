#pragma once

#include "cdnet/ann.hpp"
#include "cdnet/inference.hpp"
#include "cdnet/model_core.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace cdnet {

/// Training cohort: one matrix and one raw score vector per subject.
struct TrainingSet {
  std::vector<CorrelationMatrix> gammas;
  std::vector<Vector> scores;

  std::size_t size() const { return gammas.size(); }
};

struct TrainConfig {
  Hyperparameters hp;
  double prox_lr = 1e-4;
  int prox_backtracks = 20;
  double dual_lr0 = 1e-4;
  double dual_decay = 0.75;
  int dual_max_cycles = 25;
  double dual_tol = 1e-6;
  int lbfgs_memory = 10;
  int lbfgs_max_iter = 20;
  double lbfgs_pg_tol = 1e-6;
  int lbfgs_subproblem_iter = 100;
  double delta_step = 0.9;
  int outer_max = 50;
  double outer_tol = 1e-5;
  std::uint64_t seed = 0;
  AdamSchedule adam;
  /// Train the network on per-dimension z-scores of the training targets.
  bool standardize_scores = true;
  /// When non-empty, fit() writes the per-iteration objective trace here.
  std::filesystem::path trace_path;

  void validate() const;
};

/// One row of the objective trace.
struct TraceRecord {
  int outer_iter = 0;
  double dict_term = 0.0;        // split data term + ridge + l1
  double ann_term = 0.0;         // lambda * sum_n ||yhat_n - y_n||^2 (network units)
  double lagrangian_term = 0.0;  // trace and quadratic coupling terms
  double residual = 0.0;         // mean_n ||V_n - X diag(c_n)||_F
  double total() const { return dict_term + ann_term + lagrangian_term; }
};

struct TrainState {
  Dictionary x;
  NetworkWeights theta;
  std::vector<Loadings> cs;
  std::vector<ConstraintState> constraints;
  ScoreScaler scaler;
  int outer_iter = 0;
  std::vector<double> objective_trace;
  std::vector<TraceRecord> records;
  /// Objective right after initialize().
  TraceRecord initial;

  Model model(const Hyperparameters& hp, std::uint64_t seed) const;
};

/// Spectral start: X from the leading eigenpairs of the mean matrix, c_n by
/// per-column projection, V_n = X diag(c_n), Lambda_n = 0, random network.
TrainState initialize(const TrainingSet& data, const TrainConfig& config,
                      std::mt19937_64& rng);

/// Recomputes every term of the joint objective from scratch.
TraceRecord evaluate(const TrainState& state, const TrainingSet& data, const TrainConfig& config);

/// Smooth part of the augmented objective as a function of X (everything
/// except the l1 term), and its gradient.
double smooth_objective_x(const Dictionary& x, const TrainState& state, const TrainingSet& data);
Matrix smooth_gradient_x(const Dictionary& x, const TrainState& state, const TrainingSet& data);

/// One proximal gradient step on X with step halving on increase.
Dictionary prox_step_x(const TrainState& state, const TrainingSet& data,
                       const TrainConfig& config);

/// Per-subject loading objective (network term weighted by lambda) and its
/// analytic gradient.
double loading_objective(const TrainState& state, const TrainingSet& data,
                         const TrainConfig& config, std::size_t n, const Loadings& c);
Vector loading_gradient(const TrainState& state, const TrainingSet& data,
                        const TrainConfig& config, std::size_t n, const Loadings& c);

struct LoadingUpdate {
  Loadings c;
  std::vector<double> objective_history;  // one entry per accepted iterate, starting value first
  int iterations = 0;
  bool converged = false;
};

/// Bound-constrained L-BFGS on the loading objective.
LoadingUpdate update_cn_detailed(const TrainState& state, const TrainingSet& data,
                                 const TrainConfig& config, std::size_t n);
Loadings update_cn(const TrainState& state, const TrainingSet& data, const TrainConfig& config,
                   std::size_t n);

/// Closed-form split variable for fixed X, c_n, Lambda_n.
Matrix closed_form_v(const Dictionary& x, const Loadings& c, const CorrelationMatrix& gamma,
                     const Matrix& lambda);

/// Alternates the closed-form V_n and a dual ascent step on Lambda_n.
std::vector<ConstraintState> update_constraints(const TrainState& state, const TrainingSet& data,
                                                const TrainConfig& config);

/// Called after every outer iteration.
using FitObserver = std::function<void(const TrainState&)>;

TrainState fit(const TrainingSet& data, const TrainConfig& config,
               const FitObserver& observer = {});

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRecord>& records);

}  // namespace cdnet
