#include "cdnet/config.hpp"

#include "cdnet/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace cdnet {

namespace {

using nlohmann::json;

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse(const std::string& text, const char* what) {
  try {
    json j = json::parse(text);
    if (!j.is_object()) throw ValidationError(std::string(what) + " must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw ValidationError(std::string(what) + " does not parse: " + e.what());
  }
}

void reject_unknown(const json& j, const std::set<std::string>& known, const char* what) {
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ValidationError(std::string(what) + ": unknown key '" + key + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ValidationError(std::string("bad value for '") + key + "': " + e.what());
    }
  }
}

TrainConfig config_from(const json& j) {
  reject_unknown(j,
                 {"gamma1", "gamma2", "lambda", "k", "prox_lr", "prox_backtracks", "dual_lr0",
                  "dual_decay", "dual_max_cycles", "dual_tol", "lbfgs_memory", "lbfgs_max_iter",
                  "lbfgs_pg_tol", "lbfgs_subproblem_iter", "delta_step", "outer_max", "outer_tol",
                  "seed", "adam_epochs", "adam_batch_size", "adam_lr", "adam_decay",
                  "adam_decay_every", "standardize_scores"},
                 "config");
  TrainConfig c;
  read(j, "gamma1", c.hp.gamma1);
  read(j, "gamma2", c.hp.gamma2);
  read(j, "lambda", c.hp.lambda_tradeoff);
  read(j, "k", c.hp.k);
  read(j, "prox_lr", c.prox_lr);
  read(j, "prox_backtracks", c.prox_backtracks);
  read(j, "dual_lr0", c.dual_lr0);
  read(j, "dual_decay", c.dual_decay);
  read(j, "dual_max_cycles", c.dual_max_cycles);
  read(j, "dual_tol", c.dual_tol);
  read(j, "lbfgs_memory", c.lbfgs_memory);
  read(j, "lbfgs_max_iter", c.lbfgs_max_iter);
  read(j, "lbfgs_pg_tol", c.lbfgs_pg_tol);
  read(j, "lbfgs_subproblem_iter", c.lbfgs_subproblem_iter);
  read(j, "delta_step", c.delta_step);
  read(j, "outer_max", c.outer_max);
  read(j, "outer_tol", c.outer_tol);
  read(j, "seed", c.seed);
  read(j, "adam_epochs", c.adam.epochs);
  read(j, "adam_batch_size", c.adam.batch_size);
  read(j, "adam_lr", c.adam.lr0);
  read(j, "adam_decay", c.adam.decay);
  read(j, "adam_decay_every", c.adam.decay_every);
  read(j, "standardize_scores", c.standardize_scores);
  c.validate();
  return c;
}

}  // namespace

TrainConfig train_config_from_json(const std::string& text) {
  return config_from(parse(text, "config"));
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  return train_config_from_json(slurp(path));
}

std::string train_config_to_json(const TrainConfig& c) {
  json j = {{"gamma1", c.hp.gamma1},
            {"gamma2", c.hp.gamma2},
            {"lambda", c.hp.lambda_tradeoff},
            {"k", c.hp.k},
            {"prox_lr", c.prox_lr},
            {"prox_backtracks", c.prox_backtracks},
            {"dual_lr0", c.dual_lr0},
            {"dual_decay", c.dual_decay},
            {"dual_max_cycles", c.dual_max_cycles},
            {"dual_tol", c.dual_tol},
            {"lbfgs_memory", c.lbfgs_memory},
            {"lbfgs_max_iter", c.lbfgs_max_iter},
            {"lbfgs_pg_tol", c.lbfgs_pg_tol},
            {"lbfgs_subproblem_iter", c.lbfgs_subproblem_iter},
            {"delta_step", c.delta_step},
            {"outer_max", c.outer_max},
            {"outer_tol", c.outer_tol},
            {"seed", c.seed},
            {"adam_epochs", c.adam.epochs},
            {"adam_batch_size", c.adam.batch_size},
            {"adam_lr", c.adam.lr0},
            {"adam_decay", c.adam.decay},
            {"adam_decay_every", c.adam.decay_every},
            {"standardize_scores", c.standardize_scores}};
  return j.dump(2) + "\n";
}

SynthSpec synth_spec_from_json(const std::string& text) {
  const json j = parse(text, "synth spec");
  reject_unknown(j,
                 {"p", "k_true", "n", "m", "sparsity", "noise_sigma", "score_noise_sigma", "seed",
                  "score_map", "score_names", "score_ranges"},
                 "synth spec");
  SynthSpec s;
  read(j, "p", s.p);
  read(j, "k_true", s.k_true);
  read(j, "n", s.n);
  read(j, "m", s.m);
  read(j, "sparsity", s.sparsity);
  read(j, "noise_sigma", s.noise_sigma);
  read(j, "score_noise_sigma", s.score_noise_sigma);
  read(j, "seed", s.seed);
  if (j.contains("score_map")) {
    const auto kind = j.at("score_map").get<std::string>();
    if (kind == "linear") {
      s.score_map = ScoreMapKind::linear;
    } else if (kind == "mlp") {
      s.score_map = ScoreMapKind::mlp;
    } else {
      throw ValidationError("score_map must be 'linear' or 'mlp'");
    }
  }
  read(j, "score_names", s.score_names);
  if (j.contains("score_ranges")) {
    for (const auto& r : j.at("score_ranges")) {
      s.score_ranges.emplace_back(r.at(0).get<double>(), r.at(1).get<double>());
    }
  }
  s.validate();
  return s;
}

SynthSpec load_synth_spec(const std::filesystem::path& path) {
  return synth_spec_from_json(slurp(path));
}

GridSpec load_grid(const std::filesystem::path& path) {
  const json j = parse(slurp(path), "grid");
  reject_unknown(j, {"gamma1", "gamma2", "lambda", "folds", "base"}, "grid");
  GridSpec g;
  if (j.contains("base")) g.base = config_from(j.at("base"));
  g.gamma1 = {g.base.hp.gamma1};
  g.gamma2 = {g.base.hp.gamma2};
  g.lambda = {g.base.hp.lambda_tradeoff};
  read(j, "gamma1", g.gamma1);
  read(j, "gamma2", g.gamma2);
  read(j, "lambda", g.lambda);
  read(j, "folds", g.folds);
  if (g.gamma1.empty() || g.gamma2.empty() || g.lambda.empty()) {
    throw ValidationError("grid axes must be nonempty");
  }
  if (g.folds < 2) throw ValidationError("grid needs at least 2 folds");
  return g;
}

}  // namespace cdnet
