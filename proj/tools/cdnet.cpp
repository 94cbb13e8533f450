// Command-line front end: synth, train, predict, crossval, eval, gridsearch.

#include "cdnet/checkpoint.hpp"
#include "cdnet/config.hpp"
#include "cdnet/crossval.hpp"
#include "cdnet/csv.hpp"
#include "cdnet/dataset.hpp"
#include "cdnet/errors.hpp"
#include "cdnet/inference.hpp"
#include "cdnet/metrics.hpp"
#include "cdnet/synth.hpp"
#include "cdnet/trainer.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>

namespace fs = std::filesystem;
using namespace cdnet;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitDivergence = 3;

TrainConfig config_or_default(const std::string& path) {
  return path.empty() ? TrainConfig{} : load_train_config(path);
}

int run_synth(const std::string& spec_path, const std::string& out, std::optional<std::uint64_t> seed) {
  SynthSpec spec = spec_path.empty() ? SynthSpec{} : load_synth_spec(spec_path);
  if (seed) spec.seed = *seed;
  const auto [data, truth] = generate(spec);
  const fs::path manifest = write_dataset(out, data, &truth);
  std::cout << "wrote " << data.size() << " subjects to " << manifest.string() << '\n';
  return 0;
}

int run_train(const std::string& data_path, const std::string& config_path, const std::string& out,
              std::optional<std::uint64_t> seed, const std::string& trace) {
  const Dataset data = load_dataset(data_path);
  TrainConfig cfg = config_or_default(config_path);
  if (seed) cfg.seed = *seed;
  if (!trace.empty()) cfg.trace_path = trace;
  const TrainState state = fit(data.training_set(), cfg);
  checkpoint_save({state.model(cfg.hp, cfg.seed), data.score_names}, out);
  std::cout << "trained " << state.outer_iter << " outer iterations, final objective "
            << csv::format(state.objective_trace.empty() ? state.initial.total()
                                                         : state.objective_trace.back())
            << "\ncheckpoint: " << out << '\n';
  return 0;
}

int run_predict(const std::string& ckpt_path, const std::string& data_path, const std::string& out) {
  const Checkpoint ckpt = checkpoint_load(ckpt_path);
  const Dataset data = load_dataset(data_path);
  const Eigen::Index k = ckpt.model.x.cols();
  std::string text = "subject_id";
  for (Eigen::Index j = 0; j < k; ++j) text += ",c_" + std::to_string(j + 1);
  for (const auto& name : ckpt.score_names) text += ',' + name;
  text += '\n';
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto [c, y] = predict(ckpt.model, data.gammas[n]);
    text += data.ids[n];
    for (Eigen::Index j = 0; j < c.size(); ++j) text += ',' + csv::format(c(j));
    for (Eigen::Index j = 0; j < y.size(); ++j) text += ',' + csv::format(y(j));
    text += '\n';
  }
  csv::write_atomically(out, text);
  std::cout << "wrote predictions for " << data.size() << " subjects to " << out << '\n';
  return 0;
}

int run_crossval(const std::string& data_path, const std::string& config_path, int folds,
                 std::uint64_t seed, const std::string& out) {
  const Dataset data = load_dataset(data_path);
  const TrainConfig cfg = config_or_default(config_path);
  const CrossValResult cv = cross_validate(data, cfg, folds, seed);
  write_metrics_csv(fs::path(out) / "metrics.csv", cv.reports);
  write_scatter_csv(fs::path(out) / "scatter.csv", cv.scatter);
  for (const auto& name : data.score_names) {
    const auto& test = find_report(cv, name, "test", "mean");
    const auto& pooled = find_report(cv, name, "test", "pooled");
    std::cout << name << ": mean test MAE " << csv::format(test.mae) << ", pooled test MI "
              << csv::format(pooled.mi) << '\n';
  }
  return 0;
}

int run_eval(const std::string& predictions, const std::string& scores_path, const std::string& out) {
  const ScoreTable truth = read_scores(scores_path);
  const csv::Table pred = csv::read_table(predictions);
  if (pred.header.empty() || pred.header.front() != "subject_id") {
    throw ValidationError("predictions file needs a subject_id column");
  }
  std::map<std::string, std::size_t> row_of;
  for (std::size_t r = 0; r < truth.ids.size(); ++r) row_of[truth.ids[r]] = r;
  std::vector<MetricsReport> reports;
  for (std::size_t j = 0; j < truth.names.size(); ++j) {
    const auto col = std::find(pred.header.begin(), pred.header.end(), truth.names[j]);
    if (col == pred.header.end()) {
      throw ValidationError("predictions have no column '" + truth.names[j] + "'");
    }
    const std::size_t c = static_cast<std::size_t>(col - pred.header.begin());
    std::vector<double> a, p;
    for (const auto& row : pred.rows) {
      if (row.size() != pred.header.size()) throw DimensionError("ragged predictions row");
      const auto it = row_of.find(row.front());
      if (it == row_of.end()) throw ValidationError("no score row for subject '" + row.front() + "'");
      a.push_back(truth.rows[it->second](static_cast<Eigen::Index>(j)));
      p.push_back(csv::parse_double(row[c]));
    }
    const Vector av = Eigen::Map<Vector>(a.data(), static_cast<Eigen::Index>(a.size()));
    const Vector pv = Eigen::Map<Vector>(p.data(), static_cast<Eigen::Index>(p.size()));
    MetricsReport r{truth.names[j], "all", "all", mae(av, pv)};
    if (av.size() >= 4) {
      r.mi = mutual_information(av, pv);
      r.has_mi = true;
    }
    std::cout << r.score << ": MAE " << csv::format(r.mae) << ", MI " << csv::format(r.mi) << '\n';
    reports.push_back(r);
  }
  write_metrics_csv(out, reports);
  return 0;
}

int run_gridsearch(const std::string& data_path, const std::string& grid_path, std::uint64_t seed,
                   const std::string& out) {
  const Dataset data = load_dataset(data_path);
  const GridSpec grid = load_grid(grid_path);
  const auto rows = grid_search(data, grid.base, grid.gamma1, grid.gamma2, grid.lambda, grid.folds, seed);
  write_grid_csv(out, rows, data.score_names);
  std::cout << "evaluated " << rows.size() << " grid points; ranked table in " << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint dictionary learning and score regression for connectivity matrices"};
  app.require_subcommand(1);

  std::string spec, out, data, config, trace, checkpoint, predictions, scores, grid;
  std::uint64_t seed = 0;
  int folds = 10;

  auto* synth = app.add_subcommand("synth", "Generate a planted synthetic cohort");
  synth->add_option("--spec", spec, "Synthetic spec (JSON)");
  synth->add_option("--out", out, "Output directory")->required();
  auto* synth_seed = synth->add_option("--seed", seed, "Random seed (overrides the spec)");

  auto* train = app.add_subcommand("train", "Fit the joint model");
  train->add_option("--data", data, "Dataset manifest")->required();
  train->add_option("--config", config, "Training config (JSON)");
  train->add_option("--out", out, "Checkpoint path")->required();
  auto* train_seed = train->add_option("--seed", seed, "Random seed (overrides the config)");
  train->add_option("--trace", trace, "Objective trace CSV");

  auto* pred = app.add_subcommand("predict", "Score subjects with a trained checkpoint");
  pred->add_option("--checkpoint", checkpoint, "Checkpoint path")->required();
  pred->add_option("--data", data, "Dataset manifest")->required();
  pred->add_option("--out", out, "Predictions CSV")->required();

  auto* cv = app.add_subcommand("crossval", "K-fold cross-validation");
  cv->add_option("--data", data, "Dataset manifest")->required();
  cv->add_option("--config", config, "Training config (JSON)");
  cv->add_option("--folds", folds, "Number of folds")->check(CLI::Range(2, 1000000));
  cv->add_option("--seed", seed, "Random seed");
  cv->add_option("--out", out, "Output directory")->required();

  auto* ev = app.add_subcommand("eval", "MAE and MI of a predictions file");
  ev->add_option("--predictions", predictions, "Predictions CSV")->required();
  ev->add_option("--scores", scores, "Scores CSV")->required();
  ev->add_option("--out", out, "Metrics CSV")->required();

  auto* gs = app.add_subcommand("gridsearch", "Cross-validated sweep over gamma1, gamma2, lambda");
  gs->add_option("--data", data, "Dataset manifest")->required();
  gs->add_option("--grid", grid, "Grid spec (JSON)")->required();
  gs->add_option("--seed", seed, "Random seed");
  gs->add_option("--out", out, "Ranked table CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    auto opt_seed = [&](CLI::Option* o) {
      return o->count() ? std::optional<std::uint64_t>(seed) : std::nullopt;
    };
    if (*synth) return run_synth(spec, out, opt_seed(synth_seed));
    if (*train) return run_train(data, config, out, opt_seed(train_seed), trace);
    if (*pred) return run_predict(checkpoint, data, out);
    if (*cv) return run_crossval(data, config, folds, seed, out);
    if (*ev) return run_eval(predictions, scores, out);
    if (*gs) return run_gridsearch(data, grid, seed, out);
  } catch (const DivergenceError& e) {
    std::cerr << "numerical divergence: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const IoError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
