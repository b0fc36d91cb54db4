#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace repsel {

using Json = nlohmann::json;

// Integer time ticks. Fractional and ISO-8601 inputs are converted to
// milliseconds at ingestion; integer inputs are kept as given.
using Tick = std::int64_t;

struct TimePoint {
  Tick t = 0;
  double v = 0.0;

  friend bool operator==(const TimePoint&, const TimePoint&) = default;
};

struct SeriesStats {
  double mean = 0.0;
  double std = 0.0;  // population
  double min = 0.0;
  double max = 0.0;
  std::size_t count = 0;

  friend bool operator==(const SeriesStats&, const SeriesStats&) = default;
};

/// One named univariate series. Points are strictly increasing in t and all
/// values are finite; stats describe the raw (pre-normalization) values.
struct TimeSeries {
  std::string id;
  std::string name;
  std::vector<TimePoint> points;
  SeriesStats stats;

  std::vector<double> values() const;

  friend bool operator==(const TimeSeries&, const TimeSeries&) = default;
};

struct CategoricalColumn {
  std::string name;
  std::size_t distinct_count = 0;

  friend bool operator==(const CategoricalColumn&, const CategoricalColumn&) = default;
};

struct Provenance {
  std::string source;
  std::size_t row_count = 0;
  bool normalized = false;
  std::vector<std::string> warnings;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// The collection of series selected over. Immutable once built; share it
/// through std::shared_ptr<const Dataset>.
struct Dataset {
  std::string id;
  std::vector<TimeSeries> series;
  std::vector<CategoricalColumn> categorical_columns;
  Provenance provenance;

  std::size_t size() const noexcept { return series.size(); }
  std::optional<std::size_t> find(std::string_view name) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

enum class MissingPolicy { DropPoint };

struct PreprocessConfig {
  std::optional<std::string> time_column;
  double numeric_threshold = 0.95;
  bool normalize = true;
  MissingPolicy missing_policy = MissingPolicy::DropPoint;
  char delimiter = ',';
  // Segment count for the matrix build started right after ingestion.
  std::size_t segments = 25;

  void validate() const;

  friend bool operator==(const PreprocessConfig&, const PreprocessConfig&) = default;
};

struct SelectionParams {
  std::size_t k = 5;
  double alpha = 0.5;
  std::size_t segments = 25;
  std::optional<std::size_t> dtw_window;

  // Checks alpha and segments; k is checked against n by the selector.
  void validate() const;

  friend bool operator==(const SelectionParams&, const SelectionParams&) = default;
};

/// Content address of a dataset: SHA-256 over the source bytes and the
/// canonical form of the preprocessing config, hex encoded.
std::string dataset_fingerprint(std::string_view source_bytes, const PreprocessConfig& config);

/// Series identity is (dataset id, column name).
std::string make_series_id(std::string_view dataset_id, std::string_view name);

void to_json(Json& j, const TimePoint& p);
void from_json(const Json& j, TimePoint& p);
void to_json(Json& j, const SeriesStats& s);
void from_json(const Json& j, SeriesStats& s);
void to_json(Json& j, const TimeSeries& s);
void from_json(const Json& j, TimeSeries& s);
void to_json(Json& j, const CategoricalColumn& c);
void from_json(const Json& j, CategoricalColumn& c);
void to_json(Json& j, const Provenance& p);
void from_json(const Json& j, Provenance& p);
void to_json(Json& j, const Dataset& d);
void from_json(const Json& j, Dataset& d);
void to_json(Json& j, const PreprocessConfig& c);
void from_json(const Json& j, PreprocessConfig& c);
void to_json(Json& j, const SelectionParams& p);
void from_json(const Json& j, SelectionParams& p);

}  // namespace repsel
