#include "repsel/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "repsel/error.hpp"

namespace repsel {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::optional<std::int64_t> parse_int64(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return std::nullopt;
  std::int64_t out = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return out;
}

bool parse_digits(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  int v = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    v = v * 10 + (s[i] - '0');
  }
  out = v;
  return true;
}

// YYYY-MM-DD[(T| )HH:MM[:SS[.fff...]]][Z|(+|-)HH[:MM]] -> epoch milliseconds.
std::optional<Tick> parse_iso8601_ms(std::string_view s) {
  using namespace std::chrono;
  s = trim(s);
  int y = 0, mo = 0, d = 0;
  if (s.size() < 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  if (!parse_digits(s, 0, 4, y) || !parse_digits(s, 5, 2, mo) || !parse_digits(s, 8, 2, d)) {
    return std::nullopt;
  }
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  std::int64_t ms = sys_days{ymd}.time_since_epoch().count() * 86'400'000LL;

  std::size_t pos = 10;
  if (pos == s.size()) return ms;
  if (s[pos] != 'T' && s[pos] != ' ') return std::nullopt;
  ++pos;
  int hh = 0, mm = 0, ss = 0;
  if (!parse_digits(s, pos, 2, hh) || pos + 2 >= s.size() || s[pos + 2] != ':' ||
      !parse_digits(s, pos + 3, 2, mm)) {
    return std::nullopt;
  }
  pos += 5;
  double frac_ms = 0.0;
  if (pos < s.size() && s[pos] == ':') {
    if (!parse_digits(s, pos + 1, 2, ss)) return std::nullopt;
    pos += 3;
    if (pos < s.size() && (s[pos] == '.' || s[pos] == ',')) {
      std::size_t end = pos + 1;
      while (end < s.size() && s[end] >= '0' && s[end] <= '9') ++end;
      if (end == pos + 1) return std::nullopt;
      double scale = 100.0;
      for (std::size_t i = pos + 1; i < end; ++i, scale /= 10.0) frac_ms += (s[i] - '0') * scale;
      pos = end;
    }
  }
  if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;
  ms += hh * 3'600'000LL + mm * 60'000LL + ss * 1'000LL + std::llround(frac_ms);

  if (pos == s.size()) return ms;
  if (s[pos] == 'Z' && pos + 1 == s.size()) return ms;
  if (s[pos] == '+' || s[pos] == '-') {
    const int sign = s[pos] == '+' ? 1 : -1;
    int oh = 0, om = 0;
    if (!parse_digits(s, pos + 1, 2, oh)) return std::nullopt;
    std::size_t next = pos + 3;
    if (next < s.size() && s[next] == ':') ++next;
    if (next < s.size()) {
      if (!parse_digits(s, next, 2, om) || next + 2 != s.size()) return std::nullopt;
    }
    return ms - sign * (oh * 3'600'000LL + om * 60'000LL);
  }
  return std::nullopt;
}

enum class TimeMode { Integer, Seconds, Iso8601 };

struct TimeColumn {
  std::vector<std::optional<Tick>> ticks;  // one per row
  TimeMode mode = TimeMode::Integer;
};

TimeColumn parse_time_column(const RawTable& table, std::size_t col, const std::string& name) {
  std::size_t non_missing = 0, int_ok = 0, dbl_ok = 0, iso_ok = 0;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const auto cell = table.cell(r, col);
    if (!cell) continue;
    ++non_missing;
    if (parse_int64(*cell)) ++int_ok;
    if (parse_finite_double(*cell)) ++dbl_ok;
    if (parse_iso8601_ms(*cell)) ++iso_ok;
  }
  if (non_missing == 0 || std::max(dbl_ok, iso_ok) == 0) {
    throw Error(ErrorCode::NoUsableTimestamps, "no usable timestamps in column '" + name + "'");
  }

  TimeColumn out;
  if (int_ok == dbl_ok && dbl_ok >= iso_ok) {
    out.mode = TimeMode::Integer;
  } else if (dbl_ok >= iso_ok) {
    out.mode = TimeMode::Seconds;
  } else {
    out.mode = TimeMode::Iso8601;
  }

  out.ticks.resize(table.rows());
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const auto cell = table.cell(r, col);
    if (!cell) continue;
    switch (out.mode) {
      case TimeMode::Integer:
        out.ticks[r] = parse_int64(*cell);
        break;
      case TimeMode::Seconds:
        if (auto v = parse_finite_double(*cell); v && std::abs(*v) < 9.0e15) {
          out.ticks[r] = std::llround(*v * 1000.0);
        }
        break;
      case TimeMode::Iso8601:
        out.ticks[r] = parse_iso8601_ms(*cell);
        break;
    }
  }
  return out;
}

SeriesStats compute_stats(const std::vector<TimePoint>& points) {
  SeriesStats s;
  s.count = points.size();
  if (points.empty()) return s;
  s.min = s.max = points.front().v;
  double sum = 0.0;
  for (const auto& p : points) {
    sum += p.v;
    s.min = std::min(s.min, p.v);
    s.max = std::max(s.max, p.v);
  }
  const double n = static_cast<double>(points.size());
  double mean = sum / n;
  double resid = 0.0;
  for (const auto& p : points) resid += p.v - mean;
  mean += resid / n;
  double ss = 0.0;
  for (const auto& p : points) ss += (p.v - mean) * (p.v - mean);
  s.mean = mean;
  s.std = std::sqrt(ss / n);
  return s;
}

void z_normalize(std::vector<TimePoint>& points, const SeriesStats& stats) {
  if (stats.max == stats.min || stats.std == 0.0) {
    for (auto& p : points) p.v = 0.0;
    return;
  }
  for (auto& p : points) p.v = (p.v - stats.mean) / stats.std;
}

void append_csv_field(std::string& out, std::string_view field, char delimiter) {
  const bool needs_quotes = field.find_first_of(std::string{delimiter, '"', '\n', '\r'}) !=
                            std::string_view::npos;
  if (!needs_quotes) {
    out.append(field);
    return;
  }
  out.push_back('"');
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
}

}  // namespace

std::optional<double> parse_finite_double(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return std::nullopt;
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(out)) {
    return std::nullopt;
  }
  return out;
}

std::optional<std::string_view> RawTable::cell(std::size_t row, std::size_t col) const {
  const std::string_view v = cells_.at(col).at(row);
  if (v.empty()) return std::nullopt;
  return v;
}

std::optional<std::size_t> RawTable::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (header_[i] == name) return i;
  }
  return std::nullopt;
}

RawTable parse_csv(std::string_view source, const PreprocessConfig& config) {
  if (source.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw Error(ErrorCode::EmptySource, "CSV source is empty");
  }
  RawTable table;
  auto owned = std::make_shared<std::string>(source);
  std::string_view text = *owned;
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  table.source_ = owned;

  const char delim = config.delimiter;
  std::size_t pos = 0;
  std::size_t line = 1;
  bool have_header = false;
  std::vector<std::string_view> record;
  std::vector<std::string> header_raw;

  while (pos < text.size()) {
    const std::size_t record_line = line;
    record.clear();
    bool end_of_record = false;
    // An empty physical line is skipped rather than read as a record.
    if (text[pos] == '\n' || text[pos] == '\r') {
      if (text[pos] == '\r' && pos + 1 < text.size() && text[pos + 1] == '\n') ++pos;
      ++pos;
      ++line;
      continue;
    }
    while (!end_of_record) {
      // Skip leading blanks so that ` "x"` still counts as quoted.
      std::size_t start = pos;
      while (start < text.size() && (text[start] == ' ' || text[start] == '\t') &&
             text[start] != delim) {
        ++start;
      }
      if (start < text.size() && text[start] == '"') {
        std::size_t p = start + 1;
        std::string unescaped;
        bool escaped = false;
        std::size_t seg_begin = p;
        for (;;) {
          if (p >= text.size()) {
            throw Error(ErrorCode::MalformedCsv,
                        "unterminated quoted field starting on line " + std::to_string(record_line));
          }
          if (text[p] == '"') {
            if (p + 1 < text.size() && text[p + 1] == '"') {
              unescaped.append(text.substr(seg_begin, p + 1 - seg_begin));
              p += 2;
              seg_begin = p;
              escaped = true;
              continue;
            }
            break;
          }
          if (text[p] == '\n') ++line;
          ++p;
        }
        std::string_view field;
        if (escaped) {
          unescaped.append(text.substr(seg_begin, p - seg_begin));
          table.unescaped_.push_back(std::make_unique<std::string>(std::move(unescaped)));
          field = *table.unescaped_.back();
        } else {
          field = text.substr(start + 1, p - start - 1);
        }
        record.push_back(trim(field));
        pos = p + 1;
        while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
      } else {
        std::size_t p = pos;
        while (p < text.size() && text[p] != delim && text[p] != '\n' && text[p] != '\r') ++p;
        record.push_back(trim(text.substr(pos, p - pos)));
        pos = p;
      }
      if (pos >= text.size()) {
        end_of_record = true;
      } else if (text[pos] == delim) {
        ++pos;
      } else if (text[pos] == '\n' || text[pos] == '\r') {
        if (text[pos] == '\r' && pos + 1 < text.size() && text[pos + 1] == '\n') ++pos;
        ++pos;
        ++line;
        end_of_record = true;
      } else {
        throw Error(ErrorCode::MalformedCsv,
                    "unexpected character after quoted field on line " + std::to_string(record_line));
      }
    }

    if (!have_header) {
      const bool all_empty =
          std::all_of(record.begin(), record.end(), [](std::string_view f) { return f.empty(); });
      if (all_empty) throw Error(ErrorCode::HeaderMissing, "CSV header row is missing or empty");
      std::unordered_set<std::string> seen;
      for (std::size_t i = 0; i < record.size(); ++i) {
        std::string name(record[i]);
        if (name.empty()) name = "column_" + std::to_string(i + 1);
        if (!seen.insert(name).second) {
          throw Error(ErrorCode::DuplicateColumn, "duplicate column name '" + name + "'");
        }
        table.header_.push_back(std::move(name));
      }
      table.cells_.resize(table.header_.size());
      have_header = true;
      continue;
    }
    if (record.size() > table.header_.size()) {
      throw Error(ErrorCode::RowOverflow, "row on line " + std::to_string(record_line) + " has " +
                                              std::to_string(record.size()) + " cells, header has " +
                                              std::to_string(table.header_.size()));
    }
    for (std::size_t c = 0; c < table.header_.size(); ++c) {
      table.cells_[c].push_back(c < record.size() ? record[c] : std::string_view{});
    }
    ++table.rows_;
  }
  if (!have_header) throw Error(ErrorCode::HeaderMissing, "CSV header row is missing");
  return table;
}

ColumnClassification classify_columns(const RawTable& table, const PreprocessConfig& config) {
  std::optional<std::size_t> time_col;
  if (config.time_column) time_col = table.column_index(*config.time_column);

  ColumnClassification out;
  for (std::size_t c = 0; c < table.columns(); ++c) {
    if (time_col && *time_col == c) continue;
    std::size_t present = 0, parsed = 0;
    for (std::size_t r = 0; r < table.rows(); ++r) {
      const auto cell = table.cell(r, c);
      if (!cell) continue;
      ++present;
      if (parse_finite_double(*cell)) ++parsed;
    }
    const bool numeric = present > 0 && static_cast<double>(parsed) / static_cast<double>(present) >=
                                            config.numeric_threshold;
    (numeric ? out.numeric : out.categorical).push_back(table.header()[c]);
  }
  return out;
}

IngestResult build_series(const RawTable& table, const ColumnClassification& columns,
                          const PreprocessConfig& config, std::string dataset_id,
                          std::string source_name) {
  IngestResult result;
  IngestReport& report = result.report;
  Dataset& dataset = result.dataset;
  dataset.id = std::move(dataset_id);
  dataset.provenance.source = std::move(source_name);
  dataset.provenance.row_count = table.rows();
  dataset.provenance.normalized = config.normalize;
  report.rows_read = table.rows();
  report.columns_numeric = columns.numeric;
  report.columns_categorical = columns.categorical;

  if (columns.numeric.empty()) {
    throw Error(ErrorCode::NoNumericColumns, "no numeric columns found");
  }

  // Row timestamps.
  std::vector<std::optional<Tick>> ticks(table.rows());
  if (config.time_column) {
    const auto col = table.column_index(*config.time_column);
    if (!col) {
      throw Error(ErrorCode::NoUsableTimestamps,
                  "time column '" + *config.time_column + "' not found in header");
    }
    ticks = parse_time_column(table, *col, *config.time_column).ticks;
  } else {
    for (std::size_t r = 0; r < table.rows(); ++r) ticks[r] = static_cast<Tick>(r);
  }

  std::vector<std::size_t> usable_rows;
  usable_rows.reserve(table.rows());
  for (std::size_t r = 0; r < table.rows(); ++r) {
    if (ticks[r]) usable_rows.push_back(r);
  }
  report.time_rows_dropped = table.rows() - usable_rows.size();
  if (usable_rows.empty() && table.rows() > 0) {
    throw Error(ErrorCode::NoUsableTimestamps,
                "no parseable timestamps in column '" + config.time_column.value_or("") + "'");
  }
  if (report.time_rows_dropped > 0) {
    dataset.provenance.warnings.push_back(std::to_string(report.time_rows_dropped) +
                                          " rows dropped: unparseable timestamp");
  }
  {
    std::unordered_set<Tick> seen;
    Tick prev = 0;
    bool first = true;
    for (std::size_t r : usable_rows) {
      const Tick t = *ticks[r];
      if (!first && t < prev) report.nonmonotone_rows_sorted = true;
      if (!seen.insert(t).second) ++report.duplicate_timestamps_collapsed;
      prev = t;
      first = false;
    }
  }
  if (report.nonmonotone_rows_sorted) {
    dataset.provenance.warnings.push_back("rows were not in timestamp order; sorted");
  }
  if (report.duplicate_timestamps_collapsed > 0) {
    dataset.provenance.warnings.push_back(std::to_string(report.duplicate_timestamps_collapsed) +
                                          " duplicate timestamps collapsed (first kept)");
  }

  for (const auto& name : columns.numeric) {
    const std::size_t col = *table.column_index(name);
    std::vector<TimePoint> points;
    points.reserve(usable_rows.size());
    std::size_t dropped = 0;
    for (std::size_t r : usable_rows) {
      const auto cell = table.cell(r, col);
      const auto value = cell ? parse_finite_double(*cell) : std::nullopt;
      if (!value) {
        ++dropped;
        continue;
      }
      points.push_back({*ticks[r], *value});
    }
    report.missing_cells_dropped[name] = dropped;

    std::stable_sort(points.begin(), points.end(),
                     [](const TimePoint& a, const TimePoint& b) { return a.t < b.t; });
    points.erase(std::unique(points.begin(), points.end(),
                             [](const TimePoint& a, const TimePoint& b) { return a.t == b.t; }),
                 points.end());

    if (points.size() < 2) {
      report.series_excluded.push_back(name);
      dataset.provenance.warnings.push_back("series '" + name + "' excluded: fewer than 2 points");
      continue;
    }
    TimeSeries series;
    series.id = make_series_id(dataset.id, name);
    series.name = name;
    series.stats = compute_stats(points);
    if (config.normalize) z_normalize(points, series.stats);
    series.points = std::move(points);
    dataset.series.push_back(std::move(series));
  }

  for (const auto& name : columns.categorical) {
    const std::size_t col = *table.column_index(name);
    std::unordered_set<std::string_view> distinct;
    for (std::size_t r = 0; r < table.rows(); ++r) {
      if (auto cell = table.cell(r, col)) distinct.insert(*cell);
    }
    dataset.categorical_columns.push_back({name, distinct.size()});
  }

  if (dataset.series.empty()) {
    throw Error(ErrorCode::NoNumericColumns, "no numeric column has at least 2 usable points");
  }
  return result;
}

IngestResult ingest_csv(std::string_view source, const PreprocessConfig& config,
                        std::string source_name) {
  config.validate();
  const RawTable table = parse_csv(source, config);
  const ColumnClassification columns = classify_columns(table, config);
  return build_series(table, columns, config, dataset_fingerprint(source, config),
                      std::move(source_name));
}

std::string export_csv(const Dataset& dataset, std::string_view time_column) {
  if (dataset.find(time_column)) {
    throw Error(ErrorCode::InvalidParams,
                "time column name '" + std::string(time_column) + "' collides with a series");
  }
  std::vector<Tick> all_ticks;
  for (const auto& s : dataset.series) {
    for (const auto& p : s.points) all_ticks.push_back(p.t);
  }
  std::sort(all_ticks.begin(), all_ticks.end());
  all_ticks.erase(std::unique(all_ticks.begin(), all_ticks.end()), all_ticks.end());

  std::string out;
  append_csv_field(out, time_column, ',');
  for (const auto& s : dataset.series) {
    out.push_back(',');
    append_csv_field(out, s.name, ',');
  }
  out.push_back('\n');

  std::vector<std::size_t> cursor(dataset.series.size(), 0);
  char buf[64];
  for (Tick t : all_ticks) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), t);
    out.append(buf, end);
    for (std::size_t i = 0; i < dataset.series.size(); ++i) {
      out.push_back(',');
      const auto& pts = dataset.series[i].points;
      if (cursor[i] < pts.size() && pts[cursor[i]].t == t) {
        auto [vend, vec] = std::to_chars(buf, buf + sizeof(buf), pts[cursor[i]].v);
        out.append(buf, vend);
        ++cursor[i];
      }
    }
    out.push_back('\n');
  }
  return out;
}

void to_json(Json& j, const IngestReport& r) {
  j = Json{{"rows_read", r.rows_read},
           {"columns_numeric", r.columns_numeric},
           {"columns_categorical", r.columns_categorical},
           {"missing_cells_dropped", r.missing_cells_dropped},
           {"duplicate_timestamps_collapsed", r.duplicate_timestamps_collapsed},
           {"nonmonotone_rows_sorted", r.nonmonotone_rows_sorted},
           {"series_excluded", r.series_excluded},
           {"time_rows_dropped", r.time_rows_dropped}};
}

void from_json(const Json& j, IngestReport& r) {
  j.at("rows_read").get_to(r.rows_read);
  j.at("columns_numeric").get_to(r.columns_numeric);
  j.at("columns_categorical").get_to(r.columns_categorical);
  j.at("missing_cells_dropped").get_to(r.missing_cells_dropped);
  j.at("duplicate_timestamps_collapsed").get_to(r.duplicate_timestamps_collapsed);
  j.at("nonmonotone_rows_sorted").get_to(r.nonmonotone_rows_sorted);
  j.at("series_excluded").get_to(r.series_excluded);
  j.at("time_rows_dropped").get_to(r.time_rows_dropped);
}

}  // namespace repsel
