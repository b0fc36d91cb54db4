#include "repsel/core.hpp"

#include <cmath>

#include "repsel/error.hpp"
#include "repsel/hash.hpp"

namespace repsel {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptySource: return "EmptySource";
    case ErrorCode::HeaderMissing: return "HeaderMissing";
    case ErrorCode::RowOverflow: return "RowOverflow";
    case ErrorCode::MalformedCsv: return "MalformedCsv";
    case ErrorCode::DuplicateColumn: return "DuplicateColumn";
    case ErrorCode::NoNumericColumns: return "NoNumericColumns";
    case ErrorCode::NoUsableTimestamps: return "NoUsableTimestamps";
    case ErrorCode::EmptySeries: return "EmptySeries";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::BandTooNarrow: return "BandTooNarrow";
    case ErrorCode::KOutOfRange: return "KOutOfRange";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::EmptyRepresentativeSet: return "EmptyRepresentativeSet";
    case ErrorCode::MatrixMissing: return "MatrixMissing";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

std::vector<double> TimeSeries::values() const {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p.v);
  return out;
}

std::optional<std::size_t> Dataset::find(std::string_view name) const {
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (series[i].name == name) return i;
  }
  return std::nullopt;
}

void PreprocessConfig::validate() const {
  if (!(numeric_threshold > 0.0 && numeric_threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidParams, "numeric_threshold must lie in (0, 1]");
  }
  if (segments < 1) throw Error(ErrorCode::InvalidParams, "segments must be >= 1");
  if (delimiter == '"' || delimiter == '\n' || delimiter == '\r') {
    throw Error(ErrorCode::InvalidParams, "delimiter may not be a quote or line break");
  }
}

void SelectionParams::validate() const {
  if (k < 1) throw Error(ErrorCode::KOutOfRange, "k must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw Error(ErrorCode::InvalidParams, "alpha must lie in [0, 1]");
  }
  if (segments < 1) throw Error(ErrorCode::InvalidParams, "segments must be >= 1");
}

std::string dataset_fingerprint(std::string_view source_bytes, const PreprocessConfig& config) {
  Json canonical = config;
  const std::string config_text = canonical.dump();
  const std::uint64_t source_len = source_bytes.size();

  Sha256 h;
  h.update(std::string_view("repsel.dataset.v1", sizeof("repsel.dataset.v1")));
  h.update(std::span(reinterpret_cast<const std::uint8_t*>(&source_len), sizeof(source_len)));
  h.update(source_bytes);
  h.update(config_text);
  const auto digest = h.finish();
  return to_hex(std::span(digest).first(16));
}

std::string make_series_id(std::string_view dataset_id, std::string_view name) {
  std::string id;
  id.reserve(dataset_id.size() + 1 + name.size());
  id.append(dataset_id).append(":").append(name);
  return id;
}

// JSON

void to_json(Json& j, const TimePoint& p) { j = Json{{"t", p.t}, {"v", p.v}}; }

void from_json(const Json& j, TimePoint& p) {
  j.at("t").get_to(p.t);
  j.at("v").get_to(p.v);
}

void to_json(Json& j, const SeriesStats& s) {
  j = Json{{"mean", s.mean}, {"std", s.std}, {"min", s.min}, {"max", s.max}, {"count", s.count}};
}

void from_json(const Json& j, SeriesStats& s) {
  j.at("mean").get_to(s.mean);
  j.at("std").get_to(s.std);
  j.at("min").get_to(s.min);
  j.at("max").get_to(s.max);
  j.at("count").get_to(s.count);
}

void to_json(Json& j, const TimeSeries& s) {
  j = Json{{"id", s.id}, {"name", s.name}, {"points", s.points}, {"stats", s.stats}};
}

void from_json(const Json& j, TimeSeries& s) {
  j.at("id").get_to(s.id);
  j.at("name").get_to(s.name);
  j.at("points").get_to(s.points);
  j.at("stats").get_to(s.stats);
}

void to_json(Json& j, const CategoricalColumn& c) {
  j = Json{{"name", c.name}, {"distinct_count", c.distinct_count}};
}

void from_json(const Json& j, CategoricalColumn& c) {
  j.at("name").get_to(c.name);
  j.at("distinct_count").get_to(c.distinct_count);
}

void to_json(Json& j, const Provenance& p) {
  j = Json{{"source", p.source},
           {"row_count", p.row_count},
           {"normalized", p.normalized},
           {"warnings", p.warnings}};
}

void from_json(const Json& j, Provenance& p) {
  j.at("source").get_to(p.source);
  j.at("row_count").get_to(p.row_count);
  j.at("normalized").get_to(p.normalized);
  j.at("warnings").get_to(p.warnings);
}

void to_json(Json& j, const Dataset& d) {
  j = Json{{"id", d.id},
           {"series", d.series},
           {"categorical_columns", d.categorical_columns},
           {"provenance", d.provenance}};
}

void from_json(const Json& j, Dataset& d) {
  j.at("id").get_to(d.id);
  j.at("series").get_to(d.series);
  j.at("categorical_columns").get_to(d.categorical_columns);
  j.at("provenance").get_to(d.provenance);
}

void to_json(Json& j, const PreprocessConfig& c) {
  j = Json{{"time_column", c.time_column ? Json(*c.time_column) : Json(nullptr)},
           {"numeric_threshold", c.numeric_threshold},
           {"normalize", c.normalize},
           {"missing_policy", "drop_point"},
           {"delimiter", std::string(1, c.delimiter)},
           {"segments", c.segments}};
}

// Missing keys keep their defaults so partial configs from clients work.
void from_json(const Json& j, PreprocessConfig& c) {
  c = PreprocessConfig{};
  if (auto it = j.find("time_column"); it != j.end() && !it->is_null()) {
    c.time_column = it->get<std::string>();
  }
  c.numeric_threshold = j.value("numeric_threshold", c.numeric_threshold);
  c.normalize = j.value("normalize", c.normalize);
  if (auto it = j.find("missing_policy"); it != j.end() && *it != "drop_point") {
    throw Error(ErrorCode::InvalidParams, "unsupported missing_policy: " + it->dump());
  }
  if (auto it = j.find("delimiter"); it != j.end()) {
    const auto text = it->get<std::string>();
    if (text.size() != 1) throw Error(ErrorCode::InvalidParams, "delimiter must be one character");
    c.delimiter = text[0];
  }
  c.segments = j.value("segments", c.segments);
}

void to_json(Json& j, const SelectionParams& p) {
  j = Json{{"k", p.k},
           {"alpha", p.alpha},
           {"segments", p.segments},
           {"dtw_window", p.dtw_window ? Json(*p.dtw_window) : Json(nullptr)}};
}

void from_json(const Json& j, SelectionParams& p) {
  p = SelectionParams{};
  p.k = j.value("k", p.k);
  p.alpha = j.value("alpha", p.alpha);
  p.segments = j.value("segments", p.segments);
  if (auto it = j.find("dtw_window"); it != j.end() && !it->is_null()) {
    p.dtw_window = it->get<std::size_t>();
  }
}

}  // namespace repsel
