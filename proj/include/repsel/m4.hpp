#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "repsel/core.hpp"

namespace repsel {

/// Reduced point sequence of one series: strictly increasing in t, a subset
/// of the original points, at most 4 points per segment.
struct M4Sample {
  std::string series_id;
  std::size_t segments = 0;
  std::vector<TimePoint> points;

  std::vector<double> values() const;

  friend bool operator==(const M4Sample&, const M4Sample&) = default;
};

/// Indices (ascending) of the points M4 keeps. The time range
/// [t_first, t_last] is split into `segments` equal-width intervals, half-open
/// except the last. Each non-empty interval contributes its first point,
/// last point, and the first occurrences of its maximum and minimum value.
/// `points` must be strictly increasing in t.
std::vector<std::size_t> m4_indices(std::span<const TimePoint> points, std::size_t segments);

M4Sample m4_sample(const TimeSeries& series, std::size_t segments);

/// M4 with one segment per pixel column. Returns the series unchanged when
/// it already has no more points than the display is wide.
M4Sample display_downsample(const TimeSeries& series, std::size_t width_px);

void to_json(Json& j, const M4Sample& s);
void from_json(const Json& j, M4Sample& s);

}  // namespace repsel
