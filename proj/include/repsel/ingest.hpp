#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "repsel/core.hpp"

namespace repsel {

/// Parsed CSV grid. Cells are views into storage owned by the table; an
/// empty cell (after trimming blanks) is reported as missing.
class RawTable {
 public:
  const std::vector<std::string>& header() const noexcept { return header_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t columns() const noexcept { return header_.size(); }
  std::optional<std::string_view> cell(std::size_t row, std::size_t col) const;
  std::optional<std::size_t> column_index(std::string_view name) const;

 private:
  friend RawTable parse_csv(std::string_view, const PreprocessConfig&);

  std::shared_ptr<const std::string> source_;
  std::vector<std::unique_ptr<std::string>> unescaped_;
  std::vector<std::string> header_;
  std::vector<std::vector<std::string_view>> cells_;  // column-major
  std::size_t rows_ = 0;
};

struct IngestReport {
  std::size_t rows_read = 0;
  std::vector<std::string> columns_numeric;
  std::vector<std::string> columns_categorical;
  std::map<std::string, std::size_t> missing_cells_dropped;
  // Rows whose timestamp repeats an earlier row; later points are dropped.
  std::size_t duplicate_timestamps_collapsed = 0;
  bool nonmonotone_rows_sorted = false;
  std::vector<std::string> series_excluded;  // fewer than 2 surviving points
  std::size_t time_rows_dropped = 0;

  friend bool operator==(const IngestReport&, const IngestReport&) = default;
};

struct ColumnClassification {
  std::vector<std::string> numeric;
  std::vector<std::string> categorical;
};

struct IngestResult {
  Dataset dataset;
  IngestReport report;
};

/// RFC-4180 style parsing: quoted fields, doubled quotes, CRLF or LF line
/// ends, configurable delimiter. Short rows are padded with missing cells.
RawTable parse_csv(std::string_view source, const PreprocessConfig& config);

/// A column is numeric iff at least numeric_threshold of its non-missing
/// cells parse as finite decimals. The time column is in neither list.
ColumnClassification classify_columns(const RawTable& table, const PreprocessConfig& config);

IngestResult build_series(const RawTable& table, const ColumnClassification& columns,
                          const PreprocessConfig& config, std::string dataset_id,
                          std::string source_name);

/// Full pipeline: fingerprint, parse, classify, build.
IngestResult ingest_csv(std::string_view source, const PreprocessConfig& config,
                        std::string source_name = {});

/// Wide CSV with a time column and one column per series; cells are empty
/// where a series has no point at that timestamp. Values are written with
/// round-trip precision, so re-ingesting with normalize=false reproduces the
/// series exactly.
std::string export_csv(const Dataset& dataset, std::string_view time_column = "t");

std::optional<double> parse_finite_double(std::string_view text);

void to_json(Json& j, const IngestReport& r);
void from_json(const Json& j, IngestReport& r);

}  // namespace repsel
