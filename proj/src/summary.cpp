#include "repsel/summary.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "repsel/error.hpp"

namespace repsel {

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(ErrorCode::EmptySeries, "quantile of empty data");
  const double rank = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

BoxStats box_stats(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptySeries, "box statistics of empty data");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());

  BoxStats s;
  s.count = sorted.size();
  s.min = sorted.front();
  s.max = sorted.back();
  s.q1 = quantile_sorted(sorted, 0.25);
  s.median = quantile_sorted(sorted, 0.5);
  s.q3 = quantile_sorted(sorted, 0.75);
  const double iqr = s.q3 - s.q1;
  const double lower = s.q1 - 1.5 * iqr;
  const double upper = s.q3 + 1.5 * iqr;
  s.outliers = static_cast<std::size_t>(std::count_if(
      sorted.begin(), sorted.end(), [&](double v) { return v < lower || v > upper; }));
  return s;
}

void to_json(Json& j, const BoxStats& s) {
  j = Json{{"count", s.count}, {"min", s.min},       {"q1", s.q1},
           {"median", s.median}, {"q3", s.q3}, {"max", s.max}, {"outliers", s.outliers}};
}

}  // namespace repsel
