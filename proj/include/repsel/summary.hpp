#pragma once

#include <cstddef>
#include <span>

#include "repsel/core.hpp"

namespace repsel {

/// Box-plot statistics. Quartiles interpolate linearly between order
/// statistics at rank p * (count - 1); outliers lie outside the
/// 1.5 * IQR fences.
struct BoxStats {
  std::size_t count = 0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  std::size_t outliers = 0;
};

BoxStats box_stats(std::span<const double> values);

/// Value at fraction p in [0,1] of sorted, non-empty data.
double quantile_sorted(std::span<const double> sorted, double p);

void to_json(Json& j, const BoxStats& s);

}  // namespace repsel
