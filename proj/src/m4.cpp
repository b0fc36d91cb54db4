#include "repsel/m4.hpp"

#include <algorithm>

#include "repsel/error.hpp"

namespace repsel {

namespace {

// Segment of t, computed exactly in 128-bit integers so that boundaries do
// not depend on floating-point rounding.
std::size_t segment_of(Tick t, Tick t_first, Tick t_last, std::size_t segments) {
  if (t >= t_last) return segments - 1;
  const auto span = static_cast<unsigned __int128>(static_cast<__int128>(t_last) - t_first);
  if (span == 0) return 0;
  const auto offset = static_cast<unsigned __int128>(static_cast<__int128>(t) - t_first);
  const auto idx = offset * segments / span;
  return static_cast<std::size_t>(std::min<unsigned __int128>(idx, segments - 1));
}

void check_segments(std::size_t segments) {
  if (segments < 1) throw Error(ErrorCode::InvalidParams, "segments must be >= 1");
}

}  // namespace

std::vector<double> M4Sample::values() const {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p.v);
  return out;
}

std::vector<std::size_t> m4_indices(std::span<const TimePoint> points, std::size_t segments) {
  check_segments(segments);
  if (points.empty()) throw Error(ErrorCode::EmptySeries, "cannot sample an empty series");

  const Tick t_first = points.front().t;
  const Tick t_last = points.back().t;
  std::vector<std::size_t> out;
  out.reserve(std::min(points.size(), 4 * segments));

  std::size_t begin = 0;
  while (begin < points.size()) {
    const std::size_t seg = segment_of(points[begin].t, t_first, t_last, segments);
    std::size_t end = begin + 1;
    std::size_t imax = begin, imin = begin;
    while (end < points.size() && segment_of(points[end].t, t_first, t_last, segments) == seg) {
      if (points[end].v > points[imax].v) imax = end;
      if (points[end].v < points[imin].v) imin = end;
      ++end;
    }
    std::size_t picked[4] = {begin, imax, imin, end - 1};
    std::sort(std::begin(picked), std::end(picked));
    const auto last = std::unique(std::begin(picked), std::end(picked));
    out.insert(out.end(), std::begin(picked), last);
    begin = end;
  }
  return out;
}

M4Sample m4_sample(const TimeSeries& series, std::size_t segments) {
  if (series.points.empty()) {
    throw Error(ErrorCode::EmptySeries, "series '" + series.id + "' has no points");
  }
  M4Sample sample;
  sample.series_id = series.id;
  sample.segments = segments;
  const auto idx = m4_indices(series.points, segments);
  sample.points.reserve(idx.size());
  for (std::size_t i : idx) sample.points.push_back(series.points[i]);
  return sample;
}

M4Sample display_downsample(const TimeSeries& series, std::size_t width_px) {
  check_segments(width_px);
  if (series.points.empty()) {
    throw Error(ErrorCode::EmptySeries, "series '" + series.id + "' has no points");
  }
  if (width_px >= series.points.size()) {
    return M4Sample{series.id, width_px, series.points};
  }
  return m4_sample(series, width_px);
}

void to_json(Json& j, const M4Sample& s) {
  j = Json{{"series_id", s.series_id}, {"segments", s.segments}, {"points", s.points}};
}

void from_json(const Json& j, M4Sample& s) {
  j.at("series_id").get_to(s.series_id);
  j.at("segments").get_to(s.segments);
  j.at("points").get_to(s.points);
}

}  // namespace repsel
