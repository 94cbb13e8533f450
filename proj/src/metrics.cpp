#include "cdnet/metrics.hpp"

#include "cdnet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <vector>

namespace cdnet {

double mae(const Vector& actual, const Vector& predicted) {
  if (actual.size() != predicted.size()) throw DimensionError("mae: lengths differ");
  if (actual.size() == 0) throw ValidationError("mae of an empty vector");
  std::vector<double> r(static_cast<std::size_t>(actual.size()));
  for (Eigen::Index i = 0; i < actual.size(); ++i) r[i] = std::abs(actual(i) - predicted(i));
  std::sort(r.begin(), r.end());
  const std::size_t n = r.size();
  return n % 2 ? r[n / 2] : 0.5 * (r[n / 2 - 1] + r[n / 2]);
}

namespace {

std::vector<int> bin(const Vector& v, int bins) {
  const double lo = v.minCoeff();
  const double width = v.maxCoeff() - lo;
  std::vector<int> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const int b = static_cast<int>(std::floor((v(i) - lo) / width * bins));
    out[i] = std::clamp(b, 0, bins - 1);
  }
  return out;
}

}  // namespace

double mutual_information(const Vector& actual, const Vector& predicted) {
  if (actual.size() != predicted.size()) throw DimensionError("mutual_information: lengths differ");
  if (actual.size() < 4) throw ValidationError("mutual_information needs at least 4 points");
  if (!actual.allFinite() || !predicted.allFinite()) {
    throw ValidationError("mutual_information: non-finite input");
  }
  if (actual.maxCoeff() == actual.minCoeff() || predicted.maxCoeff() == predicted.minCoeff()) {
    std::clog << "warning: mutual_information on a constant vector is 0\n";
    return 0.0;
  }
  const auto n = static_cast<std::int64_t>(actual.size());
  const int bins = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
  const std::vector<int> a = bin(actual, bins), b = bin(predicted, bins);
  std::vector<std::int64_t> na(bins, 0), nb(bins, 0);
  std::map<std::pair<int, int>, std::int64_t> joint;
  for (std::int64_t i = 0; i < n; ++i) {
    ++na[a[i]];
    ++nb[b[i]];
    ++joint[{a[i], b[i]}];
  }
  // Each cell term is symmetric in its arguments; summing the terms in sorted
  // order makes MI(a, b) and MI(b, a) bitwise equal.
  std::vector<double> terms;
  terms.reserve(joint.size());
  for (const auto& [cell, count] : joint) {
    const double ratio = static_cast<double>(n * count) /
                         static_cast<double>(na[cell.first] * nb[cell.second]);
    terms.push_back(static_cast<double>(count) * std::log(ratio));
  }
  std::sort(terms.begin(), terms.end());
  double total = 0.0;
  for (double t : terms) total += t;
  return std::max(total / static_cast<double>(n), 0.0);
}

}  // namespace cdnet
