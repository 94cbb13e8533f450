#include "cdnet/synth.hpp"

#include "cdnet/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

namespace cdnet {

namespace {

const std::vector<std::string> kDefaultNames = {"ADOS", "SRS", "Praxis"};
const std::vector<std::pair<double, double>> kDefaultRanges = {{0.0, 30.0}, {70.0, 200.0}, {0.0, 100.0}};
constexpr int kMapHidden = 16;

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, sd);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  }
  return m;
}

}  // namespace

void SynthSpec::validate() const {
  if (p < 1 || k_true < 1 || k_true > p) throw ValidationError("need 1 <= k_true <= p");
  if (n < 1 || m < 1) throw ValidationError("need at least one subject and one score");
  if (!(sparsity > 0.0 && sparsity <= 1.0)) throw ValidationError("sparsity must be in (0,1]");
  if (!(noise_sigma >= 0.0) || !(score_noise_sigma >= 0.0)) {
    throw ValidationError("noise levels must be nonnegative");
  }
  if (!score_names.empty() && static_cast<int>(score_names.size()) != m) {
    throw ValidationError("score_names must have m entries");
  }
  if (!score_ranges.empty() && static_cast<int>(score_ranges.size()) != m) {
    throw ValidationError("score_ranges must have m entries");
  }
  for (const auto& [lo, hi] : ranges()) {
    if (!(lo < hi)) throw ValidationError("every score range needs lo < hi");
  }
}

std::vector<std::string> SynthSpec::names() const {
  if (!score_names.empty()) return score_names;
  std::vector<std::string> out;
  for (int j = 0; j < m; ++j) {
    out.push_back(j < 3 ? kDefaultNames[j] : kDefaultNames[j % 3] + std::to_string(j / 3));
  }
  return out;
}

std::vector<std::pair<double, double>> SynthSpec::ranges() const {
  if (!score_ranges.empty()) return score_ranges;
  std::vector<std::pair<double, double>> out;
  for (int j = 0; j < m; ++j) out.push_back(kDefaultRanges[j % 3]);
  return out;
}

Vector ScoreMap::raw(const Loadings& c) const {
  const Vector centered = c.array() - 1.0;
  if (kind == ScoreMapKind::linear) return w1 * centered + b1;
  return w2 * (w1 * centered + b1).array().tanh().matrix() + b2;
}

Vector ScoreMap::apply(const Loadings& c) const {
  return raw(c).cwiseProduct(affine_scale) + affine_offset;
}

std::pair<Dataset, GroundTruth> generate(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  GroundTruth truth;

  const int nnz = std::max(1, static_cast<int>(std::lround(spec.sparsity * spec.p)));
  truth.x = Matrix::Zero(spec.p, spec.k_true);
  std::vector<int> rows(spec.p);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  for (int k = 0; k < spec.k_true; ++k) {
    std::iota(rows.begin(), rows.end(), 0);
    std::shuffle(rows.begin(), rows.end(), rng);
    for (int i = 0; i < nnz; ++i) truth.x(rows[i], k) = std_normal(rng);
    truth.x.col(k).normalize();
  }

  ScoreMap& g = truth.score_map;
  g.kind = spec.score_map;
  if (g.kind == ScoreMapKind::linear) {
    g.w1 = gaussian(spec.m, spec.k_true, 1.0 / std::sqrt(spec.k_true), rng);
    g.b1 = Vector::Zero(spec.m);
  } else {
    g.w1 = gaussian(kMapHidden, spec.k_true, 2.0 / std::sqrt(spec.k_true), rng);
    g.b1 = gaussian(kMapHidden, 1, 0.5, rng);
    g.w2 = gaussian(spec.m, kMapHidden, 1.0 / std::sqrt(kMapHidden), rng);
    g.b2 = Vector::Zero(spec.m);
  }

  Dataset data;
  data.score_names = spec.names();
  data.score_ranges = spec.ranges();
  std::normal_distribution<double> loading(1.0, 0.5);
  std::normal_distribution<double> score_noise(0.0, 1.0);
  std::vector<Vector> raw_scores;
  for (int n = 0; n < spec.n; ++n) {
    Loadings c(spec.k_true);
    for (int k = 0; k < spec.k_true; ++k) c(k) = std::abs(loading(rng));
    Matrix gamma = reconstruct(truth.x, c);
    if (spec.noise_sigma > 0.0) {
      const Matrix e = gaussian(spec.p, spec.p, 1.0, rng);
      gamma += spec.noise_sigma * 0.5 * (e + e.transpose());
    }
    char id[32];
    std::snprintf(id, sizeof(id), "sub%03d", n);
    data.ids.emplace_back(id);
    data.gammas.emplace_back(gamma, data.ids.back());
    Vector y = g.raw(c);
    for (Eigen::Index j = 0; j < y.size(); ++j) y(j) += spec.score_noise_sigma * score_noise(rng);
    raw_scores.push_back(std::move(y));
    truth.cs.push_back(std::move(c));
  }

  // Stretch each dimension onto its declared range.
  g.affine_scale.resize(spec.m);
  g.affine_offset.resize(spec.m);
  for (int j = 0; j < spec.m; ++j) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& y : raw_scores) {
      lo = std::min(lo, y(j));
      hi = std::max(hi, y(j));
    }
    const auto [rlo, rhi] = data.score_ranges[j];
    g.affine_scale(j) = hi > lo ? (rhi - rlo) / (hi - lo) : 0.0;
    g.affine_offset(j) = hi > lo ? rlo - lo * g.affine_scale(j) : 0.5 * (rlo + rhi);
  }
  for (auto& y : raw_scores) {
    Vector mapped = y.cwiseProduct(g.affine_scale) + g.affine_offset;
    for (int j = 0; j < spec.m; ++j) {
      mapped(j) = std::clamp(mapped(j), data.score_ranges[j].first, data.score_ranges[j].second);
    }
    data.scores.push_back(std::move(mapped));
  }
  return {std::move(data), std::move(truth)};
}

namespace {

nlohmann::json matrix_json(const Matrix& m) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto flat = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols) {
    throw IoError("matrix payload has " + std::to_string(flat.size()) + " values, expected " +
                  std::to_string(rows * cols));
  }
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = flat[static_cast<std::size_t>(i * cols + c)];
  }
  return m;
}

Vector vector_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

void write_ground_truth(const std::filesystem::path& path, const GroundTruth& truth,
                        const std::vector<std::string>& ids) {
  nlohmann::json j;
  j["x"] = matrix_json(truth.x);
  nlohmann::json loadings = nlohmann::json::object();
  for (std::size_t n = 0; n < truth.cs.size(); ++n) {
    loadings[n < ids.size() ? ids[n] : std::to_string(n)] = to_std(truth.cs[n]);
  }
  j["loadings"] = loadings;
  j["subjects"] = ids;
  const ScoreMap& g = truth.score_map;
  nlohmann::json map;
  map["kind"] = g.kind == ScoreMapKind::linear ? "linear" : "mlp";
  map["w1"] = matrix_json(g.w1);
  map["b1"] = to_std(g.b1);
  if (g.kind == ScoreMapKind::mlp) {
    map["w2"] = matrix_json(g.w2);
    map["b2"] = to_std(g.b2);
  }
  map["affine_scale"] = to_std(g.affine_scale);
  map["affine_offset"] = to_std(g.affine_offset);
  j["score_map"] = map;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

GroundTruth read_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    GroundTruth t;
    t.x = matrix_from_json(j.at("x"));
    for (const auto& id : j.at("subjects")) {
      t.cs.push_back(vector_from_json(j.at("loadings").at(id.get<std::string>())));
    }
    const auto& map = j.at("score_map");
    t.score_map.kind = map.at("kind") == "linear" ? ScoreMapKind::linear : ScoreMapKind::mlp;
    t.score_map.w1 = matrix_from_json(map.at("w1"));
    t.score_map.b1 = vector_from_json(map.at("b1"));
    if (t.score_map.kind == ScoreMapKind::mlp) {
      t.score_map.w2 = matrix_from_json(map.at("w2"));
      t.score_map.b2 = vector_from_json(map.at("b2"));
    }
    t.score_map.affine_scale = vector_from_json(map.at("affine_scale"));
    t.score_map.affine_offset = vector_from_json(map.at("affine_offset"));
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

namespace {

// Hungarian algorithm, minimizing total cost over a square matrix.
std::vector<int> min_cost_assignment(const Matrix& cost) {
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n);
  for (int j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace

BasisMatch match_bases(const Dictionary& x_est, const Dictionary& x_true) {
  if (x_est.rows() != x_true.rows() || x_est.cols() != x_true.cols()) {
    throw DimensionError("match_bases: dictionaries have different shapes");
  }
  const Eigen::Index k = x_true.cols();
  Matrix cosine = Matrix::Zero(k, k);  // (true, est)
  for (Eigen::Index t = 0; t < k; ++t) {
    for (Eigen::Index e = 0; e < k; ++e) {
      const double denom = x_true.col(t).norm() * x_est.col(e).norm();
      cosine(t, e) = denom > 0.0 ? x_true.col(t).dot(x_est.col(e)) / denom : 0.0;
    }
  }
  BasisMatch match;
  if (k == 0) return match;
  match.permutation = min_cost_assignment(-cosine.cwiseAbs());
  double total = 0.0;
  for (Eigen::Index t = 0; t < k; ++t) {
    const double c = cosine(t, match.permutation[t]);
    match.signs.push_back(c < 0.0 ? -1 : 1);
    total += std::min(std::abs(c), 1.0);
  }
  match.mean_abs_cosine = total / static_cast<double>(k);
  return match;
}

Loadings aligned_loadings(const Loadings& c, const Dictionary& x, const BasisMatch& match) {
  Loadings out(static_cast<Eigen::Index>(match.permutation.size()));
  for (std::size_t t = 0; t < match.permutation.size(); ++t) {
    const int e = match.permutation[t];
    out(static_cast<Eigen::Index>(t)) = c(e) * x.col(e).squaredNorm();
  }
  return out;
}

double pearson(const Vector& a, const Vector& b) {
  if (a.size() != b.size() || a.size() < 2) throw DimensionError("pearson: need equal lengths >= 2");
  const Vector da = a.array() - a.mean();
  const Vector db = b.array() - b.mean();
  const double denom = da.norm() * db.norm();
  return denom > 0.0 ? da.dot(db) / denom : 0.0;
}

}  // namespace cdnet
