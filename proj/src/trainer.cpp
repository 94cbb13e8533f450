#include "cdnet/trainer.hpp"

#include "cdnet/csv.hpp"
#include "cdnet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iostream>

namespace cdnet {

void TrainConfig::validate() const {
  hp.validate();
  if (!(prox_lr > 0.0) || !(dual_lr0 > 0.0)) {
    throw ValidationError("prox_lr and dual_lr0 must be positive");
  }
  if (!(dual_decay > 0.0 && dual_decay < 1.0)) throw ValidationError("dual_decay must be in (0,1)");
  if (!(delta_step > 0.0 && delta_step <= 1.0)) throw ValidationError("delta_step must be in (0,1]");
  if (lbfgs_memory < 1 || lbfgs_max_iter < 0 || lbfgs_subproblem_iter < 1) {
    throw ValidationError("invalid L-BFGS settings");
  }
  if (outer_max < 0 || !(outer_tol >= 0.0) || dual_max_cycles < 1 || prox_backtracks < 0) {
    throw ValidationError("invalid iteration limits");
  }
}

Model TrainState::model(const Hyperparameters& hp, std::uint64_t seed) const {
  return Model{x, theta, hp, scaler, seed};
}

namespace {

void check_data(const TrainingSet& data) {
  if (data.gammas.empty()) throw ValidationError("training set is empty");
  if (data.scores.size() != data.gammas.size()) {
    throw ValidationError("every subject needs a score vector");
  }
  const Eigen::Index p = data.gammas.front().size();
  const Eigen::Index m = data.scores.front().size();
  for (std::size_t n = 0; n < data.size(); ++n) {
    if (data.gammas[n].size() != p) {
      throw DimensionError("subject '" + data.gammas[n].subject_id() + "' matrix has wrong size");
    }
    if (data.scores[n].size() != m || m < 1) {
      throw DimensionError("subject '" + data.gammas[n].subject_id() + "' score vector has wrong length");
    }
  }
}

Vector network_target(const TrainState& state, const TrainingSet& data, std::size_t n) {
  return state.scaler.to_network(data.scores[n]);
}

std::vector<Vector> network_targets(const TrainState& state, const TrainingSet& data) {
  std::vector<Vector> ys;
  ys.reserve(data.size());
  for (std::size_t n = 0; n < data.size(); ++n) ys.push_back(network_target(state, data, n));
  return ys;
}

double unit_loss(const NetworkWeights& theta, const std::vector<Loadings>& cs,
                 const std::vector<Vector>& ys) {
  return network_loss(theta, cs, ys, 1.0);
}

}  // namespace

TrainState initialize(const TrainingSet& data, const TrainConfig& config, std::mt19937_64& rng) {
  config.validate();
  check_data(data);
  const Eigen::Index p = data.gammas.front().size();
  const int k = config.hp.k;
  if (k > p) {
    throw ValidationError("k = " + std::to_string(k) + " exceeds the number of regions " +
                          std::to_string(p));
  }
  Matrix mean = Matrix::Zero(p, p);
  for (const auto& g : data.gammas) mean += g.data();
  mean /= static_cast<double>(data.size());

  Eigen::SelfAdjointEigenSolver<Matrix> solver(mean);
  if (solver.info() != Eigen::Success) throw DivergenceError("eigensolver failed at initialization");
  TrainState s;
  s.x.resize(p, k);
  for (int j = 0; j < k; ++j) {
    const Eigen::Index col = p - 1 - j;
    Vector u = solver.eigenvectors().col(col);
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      if (u(i) != 0.0) {
        if (u(i) < 0.0) u = -u;
        break;
      }
    }
    // |eigenvalue| keeps every column nonzero when the mean is indefinite.
    s.x.col(j) = std::sqrt(std::abs(solver.eigenvalues()(col))) * u;
  }

  const Vector col_sq = s.x.colwise().squaredNorm().transpose();
  s.cs.reserve(data.size());
  s.constraints.reserve(data.size());
  for (const auto& g : data.gammas) {
    const Vector proj = (s.x.transpose() * g.data() * s.x).diagonal();
    Loadings c(k);
    for (int j = 0; j < k; ++j) {
      const double denom = col_sq(j) * col_sq(j);
      c(j) = denom > 0.0 ? std::max(proj(j) / denom, 0.0) : 0.0;
    }
    s.constraints.push_back({s.x * c.asDiagonal(), Matrix::Zero(p, k)});
    s.cs.push_back(std::move(c));
  }

  const int m = static_cast<int>(data.scores.front().size());
  s.theta = NetworkWeights::random(k, m, rng);
  s.scaler = config.standardize_scores ? ScoreScaler::fit(data.scores) : ScoreScaler::identity(m);
  s.initial = evaluate(s, data, config);
  return s;
}

TraceRecord evaluate(const TrainState& state, const TrainingSet& data, const TrainConfig& config) {
  const AugmentedTerms terms =
      augmented_terms(state.x, state.cs, data.gammas, state.constraints, config.hp);
  TraceRecord r;
  r.outer_iter = state.outer_iter;
  r.dict_term = terms.data + terms.ridge + terms.sparsity;
  r.lagrangian_term = terms.lagrangian;
  r.ann_term = network_loss(state.theta, state.cs, network_targets(state, data),
                            config.hp.lambda_tradeoff);
  double res = 0.0;
  for (std::size_t n = 0; n < data.size(); ++n) {
    res += (state.constraints[n].v - state.x * state.cs[n].asDiagonal()).norm();
  }
  r.residual = res / static_cast<double>(data.size());
  return r;
}

double smooth_objective_x(const Dictionary& x, const TrainState& state, const TrainingSet& data) {
  double total = 0.0;
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto& s = state.constraints[n];
    const Matrix residual = s.v - x * state.cs[n].asDiagonal();
    total += (data.gammas[n].data() - s.v * x.transpose()).squaredNorm();
    total += (s.lambda.array() * residual.array()).sum() + 0.5 * residual.squaredNorm();
  }
  return total;
}

Matrix smooth_gradient_x(const Dictionary& x, const TrainState& state, const TrainingSet& data) {
  Matrix grad = Matrix::Zero(x.rows(), x.cols());
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto& s = state.constraints[n];
    const auto d = state.cs[n].asDiagonal();
    grad -= 2.0 * (data.gammas[n].data() * s.v - x * (s.v.transpose() * s.v));
    grad -= s.lambda * d;
    grad -= (s.v - x * d) * d;
  }
  return grad;
}

Dictionary prox_step_x(const TrainState& state, const TrainingSet& data,
                       const TrainConfig& config) {
  const double gamma1 = config.hp.gamma1;
  const Matrix grad = smooth_gradient_x(state.x, state, data);
  if (!grad.allFinite()) {
    throw DivergenceError("non-finite dictionary gradient at outer iteration " +
                          std::to_string(state.outer_iter));
  }
  const double current =
      smooth_objective_x(state.x, state, data) + gamma1 * state.x.cwiseAbs().sum();
  double eta = config.prox_lr;
  for (int attempt = 0; attempt <= config.prox_backtracks; ++attempt) {
    Dictionary candidate = soft_threshold(state.x - eta * grad, eta * gamma1);
    const double value =
        smooth_objective_x(candidate, state, data) + gamma1 * candidate.cwiseAbs().sum();
    if (value <= current) return candidate;
    eta *= 0.5;
  }
  return state.x;
}

double loading_objective(const TrainState& state, const TrainingSet& data,
                         const TrainConfig& config, std::size_t n, const Loadings& c) {
  const auto& s = state.constraints[n];
  const Matrix residual = s.v - state.x * c.asDiagonal();
  double value = config.hp.gamma2 * c.squaredNorm() + (s.lambda.array() * residual.array()).sum() +
                 0.5 * residual.squaredNorm();
  if (config.hp.lambda_tradeoff > 0.0) {
    value += config.hp.lambda_tradeoff *
             (forward(state.theta, c) - network_target(state, data, n)).squaredNorm();
  }
  return value;
}

Vector loading_gradient(const TrainState& state, const TrainingSet& data,
                        const TrainConfig& config, std::size_t n, const Loadings& c) {
  const auto& s = state.constraints[n];
  const Matrix& x = state.x;
  const Vector gram_diag = x.colwise().squaredNorm().transpose();
  const Vector coupling = (s.lambda.cwiseProduct(x) + s.v.cwiseProduct(x)).colwise().sum().transpose();
  Vector g = c.cwiseProduct(gram_diag) - coupling + 2.0 * config.hp.gamma2 * c;
  if (config.hp.lambda_tradeoff > 0.0) {
    g += config.hp.lambda_tradeoff *
         backprop_input(state.theta, c, network_target(state, data, n));
  }
  return g;
}

namespace {

Matrix bfgs_matrix(double scale, const std::deque<std::pair<Vector, Vector>>& pairs,
                   Eigen::Index k) {
  Matrix b = scale * Matrix::Identity(k, k);
  for (const auto& [s, y] : pairs) {
    const Vector bs = b * s;
    b += -(bs * bs.transpose()) / s.dot(bs) + (y * y.transpose()) / y.dot(s);
  }
  return 0.5 * (b + b.transpose());
}

double projected_gradient_norm(const Loadings& c, const Vector& g) {
  double r = 0.0;
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    r = std::max(r, std::abs(c(i) - std::max(c(i) - g(i), 0.0)));
  }
  return r;
}

}  // namespace

LoadingUpdate update_cn_detailed(const TrainState& state, const TrainingSet& data,
                                 const TrainConfig& config, std::size_t n) {
  LoadingUpdate out;
  Loadings c = state.cs[n].cwiseMax(0.0);
  const Eigen::Index k = c.size();
  double value = loading_objective(state, data, config, n, c);
  Vector g = loading_gradient(state, data, config, n, c);
  out.objective_history.push_back(value);

  // Scalar start for the Hessian model: curvature of the quadratic part.
  const double base_scale =
      std::max(state.x.colwise().squaredNorm().mean() + 2.0 * config.hp.gamma2, 1e-8);
  std::deque<std::pair<Vector, Vector>> pairs;

  for (out.iterations = 0; out.iterations < config.lbfgs_max_iter; ++out.iterations) {
    if (!g.allFinite() || !std::isfinite(value)) {
      throw DivergenceError("non-finite loading gradient for subject " + std::to_string(n) +
                            " at outer iteration " + std::to_string(state.outer_iter));
    }
    if (projected_gradient_norm(c, g) < config.lbfgs_pg_tol) {
      out.converged = true;
      break;
    }
    double scale = base_scale;
    if (!pairs.empty()) scale = pairs.back().second.squaredNorm() / pairs.back().first.dot(pairs.back().second);
    const Matrix b = bfgs_matrix(scale, pairs, k);

    // Direction subproblem in the shifted variable q = c + p >= 0.
    const QpProblem sub{b, g - b * c};
    QpOptions opts;
    opts.max_iter = config.lbfgs_subproblem_iter;
    opts.kkt_tol = 1e-12;
    const Vector p = projected_gradient_qp(sub, c, opts).solution - c;
    if (p.lpNorm<Eigen::Infinity>() == 0.0 || g.dot(p) >= 0.0) {
      out.converged = true;
      break;
    }

    double delta = config.delta_step;
    bool accepted = false;
    Loadings next;
    double next_value = value;
    for (int halving = 0; halving < 30; ++halving) {
      next = (c + delta * p).cwiseMax(0.0);
      next_value = loading_objective(state, data, config, n, next);
      if (next_value <= value) {
        accepted = true;
        break;
      }
      delta *= 0.5;
    }
    if (!accepted) {
      out.converged = true;
      break;
    }
    const Vector next_g = loading_gradient(state, data, config, n, next);
    Vector s = next - c;
    Vector y = next_g - g;
    if (s.dot(y) > 1e-10 * s.norm() * y.norm()) {
      pairs.emplace_back(std::move(s), std::move(y));
      if (static_cast<int>(pairs.size()) > config.lbfgs_memory) pairs.pop_front();
    }
    c = std::move(next);
    g = next_g;
    value = next_value;
    out.objective_history.push_back(value);
  }
  out.c = std::move(c);
  return out;
}

Loadings update_cn(const TrainState& state, const TrainingSet& data, const TrainConfig& config,
                   std::size_t n) {
  return update_cn_detailed(state, data, config, n).c;
}

namespace {

Matrix split_system(const Dictionary& x) {
  return 2.0 * x.transpose() * x + Matrix::Identity(x.cols(), x.cols());
}

}  // namespace

Matrix closed_form_v(const Dictionary& x, const Loadings& c, const CorrelationMatrix& gamma,
                     const Matrix& lambda) {
  const Eigen::LLT<Matrix> llt(split_system(x));
  const Matrix rhs = 2.0 * gamma.data() * x - lambda + x * c.asDiagonal();
  return llt.solve(rhs.transpose()).transpose();
}

std::vector<ConstraintState> update_constraints(const TrainState& state, const TrainingSet& data,
                                                const TrainConfig& config) {
  const Dictionary& x = state.x;
  const Matrix system = split_system(x);
  const Eigen::LLT<Matrix> llt(system);
  if (llt.info() != Eigen::Success) throw DivergenceError("split system is not positive definite");
  {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(system, Eigen::EigenvaluesOnly);
    const double cond = eig.eigenvalues().maxCoeff() / eig.eigenvalues().minCoeff();
    if (cond > 1e12) {
      std::clog << "warning: split system condition number " << cond << " at outer iteration "
                << state.outer_iter << '\n';
    }
  }
  std::vector<ConstraintState> out = state.constraints;
  for (std::size_t n = 0; n < data.size(); ++n) {
    const Matrix xd = x * state.cs[n].asDiagonal();
    const Matrix two_gx = 2.0 * data.gammas[n].data() * x;
    auto& s = out[n];
    double eta = config.dual_lr0;
    double previous = std::numeric_limits<double>::infinity();
    for (int cycle = 0; cycle < config.dual_max_cycles; ++cycle) {
      s.v = llt.solve((two_gx - s.lambda + xd).transpose()).transpose();
      const Matrix residual = s.v - xd;
      s.lambda += eta * residual;
      eta *= config.dual_decay;
      const double r = residual.norm();
      if (std::abs(previous - r) < config.dual_tol) break;
      previous = r;
    }
  }
  return out;
}

TrainState fit(const TrainingSet& data, const TrainConfig& config, const FitObserver& observer) {
  std::mt19937_64 rng(config.seed);
  TrainState state = initialize(data, config, rng);
  const double initial = state.initial.total();
  double previous = initial;

  for (int it = 1; it <= config.outer_max; ++it) {
    state.outer_iter = it;
    state.x = prox_step_x(state, data, config);

    {
      const std::vector<Vector> ys = network_targets(state, data);
      const double before = unit_loss(state.theta, state.cs, ys);
      NetworkWeights trained = train_theta(state.theta, state.cs, ys, config.adam, rng);
      // Keep the previous weights if the epoch sweep made the full-batch fit worse.
      if (unit_loss(trained, state.cs, ys) <= before) state.theta = std::move(trained);
    }

    std::vector<Loadings> cs(data.size());
    for (std::size_t n = 0; n < data.size(); ++n) cs[n] = update_cn(state, data, config, n);
    state.cs = std::move(cs);

    state.constraints = update_constraints(state, data, config);

    TraceRecord rec = evaluate(state, data, config);
    state.records.push_back(rec);
    state.objective_trace.push_back(rec.total());
    if (observer) observer(state);

    const double total = rec.total();
    if (!std::isfinite(total) || total > 10.0 * std::abs(initial) + 1e-12) {
      if (!config.trace_path.empty()) write_trace_csv(config.trace_path, state.records);
      std::string trace;
      for (double v : state.objective_trace) trace += ' ' + csv::format(v);
      throw DivergenceError("objective diverged at outer iteration " + std::to_string(it) +
                            " (initial " + csv::format(initial) + ", trace:" + trace + ")");
    }
    const double change = std::abs(total - previous) / std::max(std::abs(previous), 1e-300);
    previous = total;
    if (change < config.outer_tol) break;
  }
  if (!config.trace_path.empty()) write_trace_csv(config.trace_path, state.records);
  return state;
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRecord>& records) {
  std::string out = "outer_iter,dict_term,ann_term,lagrangian_term,residual\n";
  for (const auto& r : records) {
    out += std::to_string(r.outer_iter) + ',' + csv::format(r.dict_term) + ',' +
           csv::format(r.ann_term) + ',' + csv::format(r.lagrangian_term) + ',' +
           csv::format(r.residual) + '\n';
  }
  csv::write_atomically(path, out);
}

}  // namespace cdnet
