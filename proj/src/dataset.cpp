#include "cdnet/dataset.hpp"

#include "cdnet/csv.hpp"
#include "cdnet/errors.hpp"
#include "cdnet/synth.hpp"

#include <json.hpp>

#include <fstream>
#include <optional>
#include <set>

namespace cdnet {

namespace fs = std::filesystem;

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.score_names = score_names;
  out.score_ranges = score_ranges;
  for (std::size_t i : indices) {
    out.ids.push_back(ids.at(i));
    out.gammas.push_back(gammas.at(i));
    if (has_scores()) out.scores.push_back(scores.at(i));
  }
  return out;
}

TrainingSet Dataset::training_set() const {
  if (!has_scores()) throw ValidationError("dataset has no scores to train on");
  return TrainingSet{gammas, scores};
}

ScoreTable read_scores(const fs::path& path) {
  const csv::Table table = csv::read_table(path);
  if (table.header.size() < 2 || table.header.front() != "subject_id") {
    throw IoError(path.string() + ": expected a 'subject_id' column followed by score columns");
  }
  ScoreTable out;
  out.names.assign(table.header.begin() + 1, table.header.end());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.header.size()) {
      throw DimensionError(path.string() + ": row " + std::to_string(r + 1) + " has " +
                           std::to_string(row.size()) + " cells, expected " +
                           std::to_string(table.header.size()));
    }
    out.ids.push_back(row.front());
    Vector y(static_cast<Eigen::Index>(out.names.size()));
    for (std::size_t j = 1; j < row.size(); ++j) y(static_cast<Eigen::Index>(j - 1)) = csv::parse_double(row[j]);
    out.rows.push_back(std::move(y));
  }
  return out;
}

Dataset load_dataset(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open manifest " + manifest_path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("manifest " + manifest_path.string() + " does not parse: " + e.what());
  }
  const fs::path base = manifest_path.parent_path();
  Dataset data;
  try {
    const auto p = j.at("p").get<Eigen::Index>();
    const bool raw = j.value("raw", false);
    if (j.contains("score_names")) data.score_names = j.at("score_names").get<std::vector<std::string>>();
    if (j.contains("score_ranges")) {
      for (const auto& r : j.at("score_ranges")) data.score_ranges.emplace_back(r.at(0).get<double>(), r.at(1).get<double>());
    }
    if (j.contains("m") && j.at("m").get<std::size_t>() != data.score_names.size()) {
      throw ValidationError("manifest declares m = " + j.at("m").dump() + " but names " +
                            std::to_string(data.score_names.size()) + " scores");
    }
    if (!data.score_ranges.empty() && data.score_ranges.size() != data.score_names.size()) {
      throw ValidationError("manifest has " + std::to_string(data.score_ranges.size()) +
                            " score ranges for " + std::to_string(data.score_names.size()) + " scores");
    }

    std::optional<ScoreTable> scores;
    if (j.contains("scores_file")) {
      const fs::path sp = base / j.at("scores_file").get<std::string>();
      if (!fs::exists(sp)) throw IoError("missing scores file " + sp.string());
      scores = read_scores(sp);
      if (data.score_names.empty()) data.score_names = scores->names;
      if (scores->names != data.score_names) {
        throw ValidationError("score table columns do not match the manifest's score_names");
      }
    }

    std::set<std::string> seen;
    for (const auto& entry : j.at("subjects")) {
      const auto id = entry.at("id").get<std::string>();
      if (!seen.insert(id).second) throw ValidationError("duplicate subject id '" + id + "'");
      const fs::path mp = base / entry.at("matrix").get<std::string>();
      if (!fs::exists(mp)) throw IoError("missing matrix file for subject '" + id + "': " + mp.string());
      const Matrix m = csv::read_matrix(mp);
      if (m.rows() != p || m.cols() != p) {
        throw DimensionError("subject '" + id + "' matrix is " + std::to_string(m.rows()) + "x" +
                             std::to_string(m.cols()) + ", manifest declares p = " + std::to_string(p));
      }
      CorrelationMatrix gamma(m, id);
      data.gammas.push_back(raw ? eigen_residualize(gamma) : std::move(gamma));
      data.ids.push_back(id);
      if (scores) {
        const auto row = entry.at("score_row").get<std::size_t>();
        if (row >= scores->rows.size()) {
          throw DimensionError("subject '" + id + "' points at score row " + std::to_string(row) +
                               " but the table has " + std::to_string(scores->rows.size()));
        }
        if (scores->ids[row] != id) {
          throw ValidationError("score row " + std::to_string(row) + " belongs to '" + scores->ids[row] +
                                "', not '" + id + "'");
        }
        data.scores.push_back(scores->rows[row]);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("manifest " + manifest_path.string() + " is malformed: " + e.what());
  }
  if (data.gammas.empty()) throw ValidationError("manifest lists no subjects");
  return data;
}

fs::path write_dataset(const fs::path& dir, const Dataset& data, const GroundTruth* truth, bool raw) {
  fs::create_directories(dir / "matrices");
  nlohmann::json j;
  j["format"] = "cdnet-dataset";
  j["version"] = 1;
  j["p"] = data.p();
  j["m"] = data.m();
  j["raw"] = raw;
  j["score_names"] = data.score_names;
  nlohmann::json ranges = nlohmann::json::array();
  for (const auto& [lo, hi] : data.score_ranges) ranges.push_back({lo, hi});
  j["score_ranges"] = ranges;
  nlohmann::json subjects = nlohmann::json::array();
  for (std::size_t n = 0; n < data.size(); ++n) {
    const std::string rel = "matrices/" + data.ids[n] + ".csv";
    csv::write_matrix(dir / rel, data.gammas[n].data());
    nlohmann::json s = {{"id", data.ids[n]}, {"matrix", rel}};
    if (data.has_scores()) s["score_row"] = n;
    subjects.push_back(s);
  }
  j["subjects"] = subjects;
  if (data.has_scores()) {
    std::string out = "subject_id";
    for (const auto& name : data.score_names) out += ',' + name;
    out += '\n';
    for (std::size_t n = 0; n < data.size(); ++n) {
      out += data.ids[n];
      for (Eigen::Index k = 0; k < data.scores[n].size(); ++k) out += ',' + csv::format(data.scores[n](k));
      out += '\n';
    }
    csv::write_atomically(dir / "scores.csv", out);
    j["scores_file"] = "scores.csv";
  }
  if (truth) {
    write_ground_truth(dir / "ground_truth.json", *truth, data.ids);
    j["ground_truth"] = "ground_truth.json";
  }
  const fs::path manifest = dir / "manifest.json";
  csv::write_atomically(manifest, j.dump(2) + "\n");
  return manifest;
}

}  // namespace cdnet
