#include "cdnet/checkpoint.hpp"

#include "cdnet/csv.hpp"
#include "cdnet/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace cdnet {

namespace {

using nlohmann::json;

json flat(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) a.push_back(m(i, j));
  }
  return a;
}

Matrix unflat(const json& a, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != rows * cols) {
    throw CorruptionError(std::string("checkpoint field '") + name + "' should hold " +
                          std::to_string(rows * cols) + " values");
  }
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      const json& v = a[static_cast<std::size_t>(i * cols + j)];
      if (!v.is_number()) throw CorruptionError(std::string("non-numeric value in '") + name + "'");
      m(i, j) = v.get<double>();
    }
  }
  return m;
}

}  // namespace

std::string checkpoint_to_string(const Checkpoint& ckpt) {
  const Model& m = ckpt.model;
  json j;
  j["format"] = "cdnet-checkpoint";
  j["version"] = kCheckpointVersion;
  j["dims"] = {{"p", m.x.rows()}, {"k", m.x.cols()}, {"m", m.theta.outputs()},
               {"hidden", m.theta.hidden()}};
  j["hyperparameters"] = {{"gamma1", m.hp.gamma1},
                          {"gamma2", m.hp.gamma2},
                          {"lambda", m.hp.lambda_tradeoff},
                          {"k", m.hp.k}};
  j["seed"] = m.seed;
  j["score_names"] = ckpt.score_names;
  j["x"] = flat(m.x);
  j["theta"] = {{"w1", flat(m.theta.w1)}, {"b1", flat(m.theta.b1)}, {"w2", flat(m.theta.w2)},
                {"b2", flat(m.theta.b2)}, {"w3", flat(m.theta.w3)}, {"b3", flat(m.theta.b3)}};
  j["score_center"] = flat(m.scaler.center);
  j["score_scale"] = flat(m.scaler.scale);
  return j.dump(1) + "\n";
}

Checkpoint checkpoint_from_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw CorruptionError(std::string("checkpoint does not parse: ") + e.what());
  }
  try {
    if (!j.is_object() || j.value("format", "") != "cdnet-checkpoint") {
      throw CorruptionError("not a cdnet checkpoint");
    }
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw VersionError("checkpoint format version " + std::to_string(version) +
                         " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
    }
    const auto& d = j.at("dims");
    const auto p = d.at("p").get<Eigen::Index>();
    const auto k = d.at("k").get<Eigen::Index>();
    const auto m = d.at("m").get<Eigen::Index>();
    const auto h = d.at("hidden").get<Eigen::Index>();
    if (p < 1 || k < 1 || m < 1 || h < 1) throw CorruptionError("checkpoint dimensions must be positive");
    Checkpoint c;
    const auto& hp = j.at("hyperparameters");
    c.model.hp.gamma1 = hp.at("gamma1").get<double>();
    c.model.hp.gamma2 = hp.at("gamma2").get<double>();
    c.model.hp.lambda_tradeoff = hp.at("lambda").get<double>();
    c.model.hp.k = hp.at("k").get<int>();
    c.model.seed = j.at("seed").get<std::uint64_t>();
    c.score_names = j.at("score_names").get<std::vector<std::string>>();
    c.model.x = unflat(j.at("x"), p, k, "x");
    const auto& t = j.at("theta");
    c.model.theta.w1 = unflat(t.at("w1"), h, k, "w1");
    c.model.theta.b1 = unflat(t.at("b1"), h, 1, "b1");
    c.model.theta.w2 = unflat(t.at("w2"), h, h, "w2");
    c.model.theta.b2 = unflat(t.at("b2"), h, 1, "b2");
    c.model.theta.w3 = unflat(t.at("w3"), m, h, "w3");
    c.model.theta.b3 = unflat(t.at("b3"), m, 1, "b3");
    c.model.scaler.center = unflat(j.at("score_center"), m, 1, "score_center");
    c.model.scaler.scale = unflat(j.at("score_scale"), m, 1, "score_scale");
    if (static_cast<Eigen::Index>(c.score_names.size()) != m) {
      throw CorruptionError("checkpoint names " + std::to_string(c.score_names.size()) +
                            " scores but declares m = " + std::to_string(m));
    }
    if (c.model.hp.k != k) throw CorruptionError("checkpoint hyperparameter k disagrees with dims");
    return c;
  } catch (const json::exception& e) {
    throw CorruptionError(std::string("checkpoint is incomplete: ") + e.what());
  }
}

void checkpoint_save(const Checkpoint& ckpt, const std::filesystem::path& path) {
  csv::write_atomically(path, checkpoint_to_string(ckpt));
}

Checkpoint checkpoint_load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_string(ss.str());
}

}  // namespace cdnet
