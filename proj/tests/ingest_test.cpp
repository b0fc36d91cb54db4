#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "repsel/error.hpp"
#include "repsel/ingest.hpp"

namespace repsel {
namespace {

using testing::FixtureSpec;
using testing::synthetic_csv;

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::Io;
}

PreprocessConfig with_time(std::string col, bool normalize = true) {
  PreprocessConfig c;
  c.time_column = std::move(col);
  c.normalize = normalize;
  return c;
}

TEST(ParseCsv, MinimalInput) {
  const RawTable t = parse_csv("t,a\n1,2\n2,3", {});
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.header(), (std::vector<std::string>{"t", "a"}));
  EXPECT_EQ(t.cell(1, 1).value(), "3");
}

TEST(ParseCsv, TrailingEmptyCellIsMissing) {
  const RawTable t = parse_csv("t,a\n1,", {});
  ASSERT_EQ(t.rows(), 1u);
  EXPECT_EQ(t.cell(0, 0).value(), "1");
  EXPECT_FALSE(t.cell(0, 1).has_value());
}

TEST(ParseCsv, ShortRowsArePadded) {
  const RawTable t = parse_csv("a,b,c\n1\n1,2,3\n", {});
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_FALSE(t.cell(0, 1));
  EXPECT_FALSE(t.cell(0, 2));
}

TEST(ParseCsv, RowOverflowReportsLine) {
  try {
    parse_csv("a,b\n1,2\n\n1,2,3\n", {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RowOverflow);
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
  }
}

TEST(ParseCsv, EmptyAndHeaderless) {
  EXPECT_EQ(code_of([] { parse_csv("", {}); }), ErrorCode::EmptySource);
  EXPECT_EQ(code_of([] { parse_csv("\n\r\n  ", {}); }), ErrorCode::EmptySource);
  EXPECT_EQ(code_of([] { parse_csv(",,\n1,2,3\n", {}); }), ErrorCode::HeaderMissing);
  EXPECT_EQ(code_of([] { parse_csv("a,a\n1,2\n", {}); }), ErrorCode::DuplicateColumn);
}

TEST(ParseCsv, QuotedFieldsAndCrLf) {
  const RawTable t = parse_csv("name,\"a,b\"\r\n\"he said \"\"hi\"\"\",\"1\r\n2\"\r\nx, 3 \r\n", {});
  EXPECT_EQ(t.header()[1], "a,b");
  ASSERT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cell(0, 0).value(), "he said \"hi\"");
  EXPECT_EQ(t.cell(0, 1).value(), "1\r\n2");
  EXPECT_EQ(t.cell(1, 1).value(), "3");
  EXPECT_EQ(code_of([] { parse_csv("a\n\"open\n", {}); }), ErrorCode::MalformedCsv);
}

TEST(ParseCsv, CustomDelimiterAndBom) {
  PreprocessConfig c;
  c.delimiter = ';';
  const RawTable t = parse_csv("\xEF\xBB\xBFt;a\n1;2,5\n", c);
  EXPECT_EQ(t.header()[0], "t");
  EXPECT_EQ(t.cell(0, 1).value(), "2,5");
}

TEST(ParseCsv, TenThousandRowFixtureLineCount) {
  const std::string csv = synthetic_csv({.series = 3, .rows = 10000, .seed = 5});
  // Independent scan: non-empty lines minus the header.
  std::size_t lines = 0;
  std::size_t start = 0;
  while (start < csv.size()) {
    const std::size_t end = csv.find('\n', start);
    const std::size_t stop = end == std::string::npos ? csv.size() : end;
    if (stop > start) ++lines;
    start = stop + 1;
  }
  const RawTable t = parse_csv(csv, {});
  EXPECT_EQ(t.rows(), lines - 1);
  EXPECT_EQ(ingest_csv(csv, with_time("t")).report.rows_read, 10000u);
}

TEST(ClassifyColumns, ThresholdArithmetic) {
  const RawTable t = parse_csv("x,y\n1,1.5\n2,2e3\nx,\n", {});
  const auto cls = classify_columns(t, {});
  EXPECT_EQ(cls.numeric, std::vector<std::string>{"y"});
  EXPECT_EQ(cls.categorical, std::vector<std::string>{"x"});

  PreprocessConfig loose;
  loose.numeric_threshold = 0.6;
  EXPECT_EQ(classify_columns(t, loose).numeric.size(), 2u);
}

TEST(ClassifyColumns, EmptyColumnIsCategoricalAndTimeExcluded) {
  const RawTable t = parse_csv("t,e,v\n1,,3\n2,,4\n", {});
  const auto cls = classify_columns(t, with_time("t"));
  EXPECT_EQ(cls.numeric, std::vector<std::string>{"v"});
  EXPECT_EQ(cls.categorical, std::vector<std::string>{"e"});
}

TEST(ClassifyColumns, PlantedTextColumnsAreFound) {
  // 100 columns; 7 of them carry text with a few numeric-looking cells.
  std::mt19937_64 rng(3);
  std::set<std::size_t> planted;
  while (planted.size() < 7) planted.insert(rng() % 100);
  std::string csv;
  for (std::size_t c = 0; c < 100; ++c) csv += (c ? ",c" : "c") + std::to_string(c);
  csv += "\n";
  for (int r = 0; r < 60; ++r) {
    for (std::size_t c = 0; c < 100; ++c) {
      if (c) csv += ",";
      if (planted.count(c)) {
        csv += (r % 10 == 0) ? std::to_string(r) : "txt" + std::to_string(r % 4);
      } else if (r % 17 == 3 && c % 5 == 0) {
        // missing cell
      } else {
        csv += std::to_string(r * 0.5 + static_cast<double>(c));
      }
    }
    csv += "\n";
  }
  const auto cls = classify_columns(parse_csv(csv, {}), {});
  std::set<std::string> expected;
  for (std::size_t c : planted) expected.insert("c" + std::to_string(c));
  EXPECT_EQ(std::set<std::string>(cls.categorical.begin(), cls.categorical.end()), expected);
  EXPECT_EQ(cls.numeric.size(), 93u);
}

TEST(BuildSeries, ZNormalizationUsesPopulationStd) {
  const auto r = ingest_csv("a\n2\n4\n6\n", {});
  const auto v = r.dataset.series.at(0).values();
  // Independent recomputation.
  const double mean = (2.0 + 4.0 + 6.0) / 3.0;
  const double sd = std::sqrt(((2 - mean) * (2 - mean) + (4 - mean) * (4 - mean) + (6 - mean) * (6 - mean)) / 3.0);
  ASSERT_EQ(v.size(), 3u);
  EXPECT_NEAR(v[0], (2 - mean) / sd, 1e-12);
  EXPECT_NEAR(v[1], 0.0, 1e-12);
  EXPECT_NEAR(v[2], (6 - mean) / sd, 1e-12);
  EXPECT_NEAR(v[0], -1.22474, 1e-5);
  EXPECT_NEAR(v[2], 1.22474, 1e-5);
  EXPECT_NEAR(r.dataset.series[0].stats.std, std::sqrt(8.0 / 3.0), 1e-12);
  EXPECT_EQ(r.dataset.series[0].stats.mean, 4.0);
}

TEST(BuildSeries, ConstantColumnNormalizesToZero) {
  const auto r = ingest_csv("a\n5\n5\n5\n", {});
  EXPECT_EQ(r.dataset.series[0].values(), (std::vector<double>{0, 0, 0}));
  const auto r2 = ingest_csv("a\n0.1\n0.1\n0.1\n0.1\n0.1\n0.1\n0.1\n", {});
  for (double v : r2.dataset.series[0].values()) EXPECT_EQ(v, 0.0);
}

TEST(BuildSeries, UnorderedRowsAreSorted) {
  const auto r = ingest_csv("t,a\n3,30\n1,10\n2,20\n", with_time("t", false));
  const auto& pts = r.dataset.series[0].points;
  EXPECT_EQ(pts, (std::vector<TimePoint>{{1, 10}, {2, 20}, {3, 30}}));
  EXPECT_TRUE(r.report.nonmonotone_rows_sorted);
  EXPECT_FALSE(r.dataset.provenance.warnings.empty());
}

TEST(BuildSeries, DuplicateTimestampsKeepFirst) {
  const auto r = ingest_csv("t,a,b\n1,10,\n2,20,5\n1,99,7\n3,30,8\n", with_time("t", false));
  EXPECT_EQ(r.report.duplicate_timestamps_collapsed, 1u);
  EXPECT_EQ(r.dataset.series[0].points, (std::vector<TimePoint>{{1, 10}, {2, 20}, {3, 30}}));
  // b's first t=1 cell is missing, so the later t=1 row survives.
  EXPECT_EQ(r.dataset.series[1].points, (std::vector<TimePoint>{{1, 7}, {2, 5}, {3, 8}}));
  EXPECT_EQ(r.report.missing_cells_dropped.at("b"), 1u);
}

TEST(BuildSeries, ShortSeriesAreExcluded) {
  const auto r = ingest_csv("a,b\n1,\n2,\n3,4\n", {});
  ASSERT_EQ(r.dataset.size(), 1u);
  EXPECT_EQ(r.dataset.series[0].name, "a");
  EXPECT_EQ(r.report.series_excluded, std::vector<std::string>{"b"});
}

TEST(BuildSeries, SyntheticIndexWithoutTimeColumn) {
  PreprocessConfig raw;
  raw.normalize = false;
  const auto r = ingest_csv("a,b\n1,4\n2,5\n3,6\n", raw);
  EXPECT_EQ(r.dataset.series[1].points, (std::vector<TimePoint>{{0, 4}, {1, 5}, {2, 6}}));
}

TEST(BuildSeries, Errors) {
  EXPECT_EQ(code_of([] { ingest_csv("a,b\nx,y\nz,w\n", {}); }), ErrorCode::NoNumericColumns);
  EXPECT_EQ(code_of([] { ingest_csv("a,b\n1,2\n", {}); }), ErrorCode::NoNumericColumns);
  EXPECT_EQ(code_of([] { ingest_csv("t,a\n1,2\n2,3\n", with_time("time")); }), ErrorCode::NoUsableTimestamps);
  EXPECT_EQ(code_of([] { ingest_csv("t,a\nx,2\ny,3\n", with_time("t")); }), ErrorCode::NoUsableTimestamps);
}

TEST(BuildSeries, TimestampConversions) {
  const auto iso = ingest_csv(
      "time,a\n1970-01-01T00:00:01Z,1\n1970-01-01 00:00:02.5,2\n1970-01-01T01:00:00+01:00,3\n2024-02-29,4\n",
      with_time("time", false));
  const auto& p = iso.dataset.series[0].points;
  ASSERT_EQ(p.size(), 4u);
  EXPECT_EQ(p[0], (TimePoint{0, 3}));  // offset +01:00 maps to epoch
  EXPECT_EQ(p[1], (TimePoint{1000, 1}));
  EXPECT_EQ(p[2], (TimePoint{2500, 2}));
  EXPECT_EQ(p[3].t, 1709164800000LL);

  const auto secs = ingest_csv("t,a\n0.5,1\n1.25,2\n2,3\n", with_time("t", false));
  EXPECT_EQ(secs.dataset.series[0].points[0].t, 500);
  EXPECT_EQ(secs.dataset.series[0].points[1].t, 1250);
  EXPECT_EQ(secs.dataset.series[0].points[2].t, 2000);

  const auto ticks = ingest_csv("t,a\n10,1\n20,2\nbad,3\n", with_time("t", false));
  EXPECT_EQ(ticks.report.time_rows_dropped, 1u);
  EXPECT_EQ(ticks.dataset.series[0].points.size(), 2u);
}

TEST(BuildSeries, CategoricalColumnsAreRecorded) {
  const auto r = ingest_csv("a,phase\n1,up\n2,down\n3,up\n", {});
  ASSERT_EQ(r.dataset.categorical_columns.size(), 1u);
  EXPECT_EQ(r.dataset.categorical_columns[0].name, "phase");
  EXPECT_EQ(r.dataset.categorical_columns[0].distinct_count, 2u);
}

// Properties over randomized fixtures.

TEST(IngestProperties, SeriesAreOrderedFiniteAndNormalized) {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    FixtureSpec spec{.series = 6, .rows = 200 + seed * 13, .seed = seed, .missing_rate = 0.1,
                     .text_columns = 1, .irregular_time = (seed % 2) == 0};
    const auto r = ingest_csv(synthetic_csv(spec), with_time("t"));
    ASSERT_EQ(r.dataset.size(), 6u);
    for (const auto& s : r.dataset.series) {
      double sum = 0.0, sq = 0.0;
      for (std::size_t i = 0; i < s.points.size(); ++i) {
        ASSERT_TRUE(std::isfinite(s.points[i].v));
        if (i) {
          ASSERT_LT(s.points[i - 1].t, s.points[i].t);
        }
        sum += s.points[i].v;
      }
      const double mean = sum / static_cast<double>(s.points.size());
      for (const auto& p : s.points) sq += (p.v - mean) * (p.v - mean);
      EXPECT_LT(std::abs(mean), 1e-9);
      EXPECT_LT(std::abs(std::sqrt(sq / static_cast<double>(s.points.size())) - 1.0), 1e-9);
    }
  }
}

TEST(IngestProperties, DropPointNeverInventsValues) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const std::string csv = synthetic_csv({.series = 4, .rows = 300, .seed = seed, .missing_rate = 0.2});
    const RawTable table = parse_csv(csv, {});
    const auto r = ingest_csv(csv, with_time("t", false));
    for (const auto& s : r.dataset.series) {
      const std::size_t col = *table.column_index(s.name);
      std::multiset<double> cells;
      for (std::size_t row = 0; row < table.rows(); ++row) {
        if (auto c = table.cell(row, col)) cells.insert(std::stod(std::string(*c)));
      }
      for (const auto& p : s.points) EXPECT_TRUE(cells.count(p.v)) << s.name << " " << p.v;
    }
  }
}

TEST(IngestProperties, ReExportReingestsIdentically) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const std::string csv = synthetic_csv(
        {.series = 5, .rows = 250, .seed = seed, .missing_rate = 0.15, .irregular_time = true});
    const auto first = ingest_csv(csv, with_time("t", false));
    const std::string exported = export_csv(first.dataset, "t");
    const auto second = ingest_csv(exported, with_time("t", false));
    ASSERT_EQ(first.dataset.size(), second.dataset.size());
    for (std::size_t i = 0; i < first.dataset.size(); ++i) {
      EXPECT_EQ(first.dataset.series[i].name, second.dataset.series[i].name);
      EXPECT_EQ(first.dataset.series[i].points, second.dataset.series[i].points);
      EXPECT_EQ(first.dataset.series[i].stats, second.dataset.series[i].stats);
    }
  }
}

TEST(IngestReportJson, RoundTrips) {
  const auto r = ingest_csv("t,a,b,c\n2,1,x,\n1,2,y,\n1,3,z,4\n", with_time("t"));
  EXPECT_EQ(Json::parse(Json(r.report).dump()).get<IngestReport>(), r.report);
}

}  // namespace
}  // namespace repsel
