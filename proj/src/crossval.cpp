#include "cdnet/crossval.hpp"

#include "cdnet/csv.hpp"
#include "cdnet/errors.hpp"
#include "cdnet/inference.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

namespace cdnet {

std::vector<int> assign_folds(std::size_t n, int folds, std::uint64_t seed) {
  if (folds < 2) throw ValidationError("cross-validation needs at least 2 folds");
  if (n < static_cast<std::size_t>(folds)) {
    throw ValidationError("cannot split " + std::to_string(n) + " subjects into " +
                          std::to_string(folds) + " folds");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> fold_of(n);
  for (std::size_t i = 0; i < n; ++i) fold_of[order[i]] = static_cast<int>(i % folds);
  return fold_of;
}

std::uint64_t fold_seed(std::uint64_t seed, int fold) {
  // splitmix64 of (seed, fold)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(fold + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

MetricsReport make_report(const std::string& score, const std::string& split,
                          const std::string& fold, const Vector& actual, const Vector& predicted) {
  MetricsReport r{score, split, fold};
  r.mae = mae(actual, predicted);
  if (actual.size() >= 4) {
    r.mi = mutual_information(actual, predicted);
    r.has_mi = true;
  }
  return r;
}

Vector column(const std::vector<Vector>& rows, Eigen::Index j) {
  Vector v(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) v(static_cast<Eigen::Index>(i)) = rows[i](j);
  return v;
}

}  // namespace

CrossValResult cross_validate(const Dataset& data, const TrainConfig& config, int folds,
                              std::uint64_t seed) {
  if (!data.has_scores()) throw ValidationError("cross-validation needs scores");
  CrossValResult out;
  out.fold_of = assign_folds(data.size(), folds, seed);
  out.test_predictions.resize(data.size());
  const int m = data.m();

  // Pooled actual/predicted per split across folds.
  std::vector<Vector> pooled_train_actual, pooled_train_pred;
  std::vector<std::vector<MetricsReport>> per_fold(folds);

  for (int f = 0; f < folds; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < data.size(); ++i) (out.fold_of[i] == f ? test : train).push_back(i);
    TrainConfig cfg = config;
    cfg.seed = fold_seed(seed, f);
    cfg.trace_path.clear();
    const Dataset train_set = data.subset(train);
    const TrainState state = fit(train_set.training_set(), cfg);
    const Model model = state.model(cfg.hp, cfg.seed);

    for (const auto& [split, idx] : {std::pair{std::string("train"), &train},
                                     std::pair{std::string("test"), &test}}) {
      std::vector<Vector> actual, predicted;
      for (std::size_t i : *idx) {
        Vector y = predict(model, data.gammas[i]).second;
        for (int j = 0; j < m; ++j) {
          out.scatter.push_back({data.scores[i](j), y(j), data.score_names[j], split, f, data.ids[i]});
        }
        actual.push_back(data.scores[i]);
        if (split == "test") out.test_predictions[i] = y;
        predicted.push_back(std::move(y));
      }
      for (int j = 0; j < m; ++j) {
        per_fold[f].push_back(make_report(data.score_names[j], split, std::to_string(f),
                                          column(actual, j), column(predicted, j)));
      }
      if (split == "train") {
        pooled_train_actual.insert(pooled_train_actual.end(), actual.begin(), actual.end());
        pooled_train_pred.insert(pooled_train_pred.end(), predicted.begin(), predicted.end());
      }
    }
  }

  for (const auto& rows : per_fold) out.reports.insert(out.reports.end(), rows.begin(), rows.end());

  for (const std::string split : {"train", "test"}) {
    for (int j = 0; j < m; ++j) {
      MetricsReport mean{data.score_names[j], split, "mean"};
      int with_mi = 0;
      for (const auto& rows : per_fold) {
        for (const auto& r : rows) {
          if (r.split != split || r.score != data.score_names[j]) continue;
          mean.mae += r.mae / folds;
          if (r.has_mi) {
            mean.mi += r.mi;
            ++with_mi;
          }
        }
      }
      if (with_mi > 0) {
        mean.mi /= with_mi;
        mean.has_mi = true;
      }
      out.reports.push_back(mean);
    }
  }
  for (int j = 0; j < m; ++j) {
    out.reports.push_back(make_report(data.score_names[j], "train", "pooled",
                                      column(pooled_train_actual, j), column(pooled_train_pred, j)));
  }
  for (int j = 0; j < m; ++j) {
    out.reports.push_back(make_report(data.score_names[j], "test", "pooled", column(data.scores, j),
                                      column(out.test_predictions, j)));
  }
  return out;
}

const MetricsReport& find_report(const CrossValResult& r, const std::string& score,
                                 const std::string& split, const std::string& fold) {
  for (const auto& rep : r.reports) {
    if (rep.score == score && rep.split == split && rep.fold == fold) return rep;
  }
  throw std::out_of_range("no report for " + score + "/" + split + "/" + fold);
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsReport>& reports) {
  std::string out = "fold,split,score,mae,mi\n";
  for (const auto& r : reports) {
    out += r.fold + ',' + r.split + ',' + r.score + ',' + csv::format(r.mae) + ',' +
           (r.has_mi ? csv::format(r.mi) : std::string()) + '\n';
  }
  csv::write_atomically(path, out);
}

void write_scatter_csv(const std::filesystem::path& path, const std::vector<ScatterRow>& rows) {
  std::string out = "actual,predicted,score,split,fold,subject_id\n";
  for (const auto& r : rows) {
    out += csv::format(r.actual) + ',' + csv::format(r.predicted) + ',' + r.score + ',' + r.split +
           ',' + std::to_string(r.fold) + ',' + r.subject_id + '\n';
  }
  csv::write_atomically(path, out);
}

std::vector<GridRow> grid_search(const Dataset& data, const TrainConfig& base,
                                 const std::vector<double>& gamma1, const std::vector<double>& gamma2,
                                 const std::vector<double>& lambda, int folds, std::uint64_t seed) {
  std::vector<GridRow> rows;
  for (double g1 : gamma1) {
    for (double g2 : gamma2) {
      for (double l : lambda) {
        TrainConfig cfg = base;
        cfg.hp.gamma1 = g1;
        cfg.hp.gamma2 = g2;
        cfg.hp.lambda_tradeoff = l;
        cfg.validate();
        const CrossValResult cv = cross_validate(data, cfg, folds, seed);
        GridRow row;
        row.gamma1 = g1;
        row.gamma2 = g2;
        row.lambda = l;
        for (int j = 0; j < data.m(); ++j) {
          const double test_mae = find_report(cv, data.score_names[j], "test", "mean").mae;
          row.test_mae.push_back(test_mae);
          row.pooled_mi.push_back(find_report(cv, data.score_names[j], "test", "pooled").mi);
          double range = 1.0;
          if (!data.score_ranges.empty()) {
            range = data.score_ranges[j].second - data.score_ranges[j].first;
          }
          row.normalized_mae += test_mae / range / data.m();
        }
        rows.push_back(std::move(row));
      }
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const GridRow& a, const GridRow& b) {
    return a.normalized_mae < b.normalized_mae;
  });
  return rows;
}

void write_grid_csv(const std::filesystem::path& path, const std::vector<GridRow>& rows,
                    const std::vector<std::string>& score_names) {
  std::string out = "rank,gamma1,gamma2,lambda,normalized_mae";
  for (const auto& s : score_names) out += ",test_mae_" + s;
  for (const auto& s : score_names) out += ",pooled_mi_" + s;
  out += '\n';
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    out += std::to_string(r + 1) + ',' + csv::format(row.gamma1) + ',' + csv::format(row.gamma2) +
           ',' + csv::format(row.lambda) + ',' + csv::format(row.normalized_mae);
    for (double v : row.test_mae) out += ',' + csv::format(v);
    for (double v : row.pooled_mi) out += ',' + csv::format(v);
    out += '\n';
  }
  csv::write_atomically(path, out);
}

}  // namespace cdnet
