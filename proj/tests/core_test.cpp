#include <bit>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "repsel/core.hpp"
#include "repsel/error.hpp"

namespace repsel {
namespace {

double random_double(std::mt19937_64& rng) {
  // Arbitrary finite bit patterns cover subnormals and extreme exponents.
  for (;;) {
    const double d = std::bit_cast<double>(rng());
    if (std::isfinite(d)) return d;
  }
}

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

Dataset random_dataset(std::mt19937_64& rng) {
  Dataset d;
  d.id = std::to_string(rng());
  const std::size_t n = 1 + rng() % 4;
  for (std::size_t s = 0; s < n; ++s) {
    TimeSeries ts;
    ts.name = "col" + std::to_string(s) + "\"quoted\", \xC3\xA9";
    ts.id = make_series_id(d.id, ts.name);
    Tick t = static_cast<Tick>(rng() >> 2) - (Tick{1} << 61);
    for (std::size_t i = 0; i < 1 + rng() % 20; ++i) {
      t += 1 + static_cast<Tick>(rng() % 1000);
      ts.points.push_back({t, random_double(rng)});
    }
    ts.stats = {random_double(rng), random_double(rng), random_double(rng), random_double(rng), rng() % 100};
    d.series.push_back(std::move(ts));
  }
  d.categorical_columns.push_back({"phase", rng() % 7});
  d.provenance = {"file.csv", rng() % 1000, (rng() & 1) != 0, {"w1", "w2"}};
  return d;
}

TEST(Fingerprint, DeterministicForSameInput) {
  PreprocessConfig config;
  EXPECT_EQ(dataset_fingerprint("t,a\n1,2\n", config), dataset_fingerprint("t,a\n1,2\n", config));
}

TEST(Fingerprint, ConfigIsPartOfTheKey) {
  PreprocessConfig a, b;
  b.segments = 30;
  EXPECT_NE(dataset_fingerprint("t,a\n1,2\n", a), dataset_fingerprint("t,a\n1,2\n", b));
  PreprocessConfig c;
  c.time_column = "t";
  EXPECT_NE(dataset_fingerprint("t,a\n1,2\n", a), dataset_fingerprint("t,a\n1,2\n", c));
  PreprocessConfig d;
  d.normalize = false;
  EXPECT_NE(dataset_fingerprint("t,a\n1,2\n", a), dataset_fingerprint("t,a\n1,2\n", d));
}

TEST(Fingerprint, EverySingleByteChangeChangesTheId) {
  const std::string source = "t,a,b\n1,2.5,x\n2,3.5,y\n3,-1,z\n";
  PreprocessConfig config;
  std::set<std::string> ids{dataset_fingerprint(source, config)};
  for (std::size_t pos = 0; pos < source.size(); ++pos) {
    std::string mutated = source;
    mutated[pos] = static_cast<char>(mutated[pos] ^ 0x01);
    EXPECT_TRUE(ids.insert(dataset_fingerprint(mutated, config)).second) << "position " << pos;
  }
}

TEST(Fingerprint, InjectiveOverThousandsOfInputs) {
  std::set<std::string> ids;
  PreprocessConfig config;
  for (int i = 0; i < 1500; ++i) {
    const std::string source = "t,a\n" + std::to_string(i) + "," + std::to_string(i * 7 % 13) + "\n";
    ids.insert(dataset_fingerprint(source, config));
  }
  for (std::size_t seg = 1; seg <= 200; ++seg) {
    config.segments = seg;
    ids.insert(dataset_fingerprint("t,a\n1,2\n", config));
  }
  EXPECT_EQ(ids.size(), 1700u);
}

TEST(CoreJson, DatasetRoundTripsBitExactly) {
  std::mt19937_64 rng(7);
  for (int iter = 0; iter < 200; ++iter) {
    const Dataset original = random_dataset(rng);
    const std::string text = Json(original).dump();
    const Dataset back = Json::parse(text).get<Dataset>();
    ASSERT_EQ(back.series.size(), original.series.size());
    for (std::size_t s = 0; s < original.series.size(); ++s) {
      const auto& a = original.series[s];
      const auto& b = back.series[s];
      ASSERT_EQ(a.points.size(), b.points.size());
      for (std::size_t i = 0; i < a.points.size(); ++i) {
        EXPECT_EQ(a.points[i].t, b.points[i].t);
        EXPECT_TRUE(same_bits(a.points[i].v, b.points[i].v));
      }
      EXPECT_TRUE(same_bits(a.stats.mean, b.stats.mean));
      EXPECT_TRUE(same_bits(a.stats.std, b.stats.std));
    }
    EXPECT_EQ(back, original);
  }
}

TEST(CoreJson, ParamsAndConfigRoundTrip) {
  std::mt19937_64 rng(11);
  for (int iter = 0; iter < 200; ++iter) {
    SelectionParams p{1 + rng() % 50, std::uniform_real_distribution<double>(0, 1)(rng), 1 + rng() % 100,
                      (rng() & 1) ? std::optional<std::size_t>(rng() % 10) : std::nullopt};
    EXPECT_EQ(Json::parse(Json(p).dump()).get<SelectionParams>(), p);

    PreprocessConfig c;
    if (rng() & 1) c.time_column = "time " + std::to_string(rng() % 10);
    c.numeric_threshold = std::uniform_real_distribution<double>(0.01, 1.0)(rng);
    c.normalize = (rng() & 1) != 0;
    c.delimiter = ";,\t|"[rng() % 4];
    c.segments = 1 + rng() % 100;
    EXPECT_EQ(Json::parse(Json(c).dump()).get<PreprocessConfig>(), c);
  }
}

TEST(CoreJson, SnakeCaseFieldsAndIntegerTimestamps) {
  TimeSeries s{"d:a", "a", {{5, 1.5}}, {1.5, 0.0, 1.5, 1.5, 1}};
  const Json j = s;
  EXPECT_TRUE(j.at("points").at(0).at("t").is_number_integer());
  EXPECT_TRUE(j.at("points").at(0).at("v").is_number_float());
  const Json p = SelectionParams{};
  EXPECT_TRUE(p.contains("dtw_window"));
  EXPECT_TRUE(p.at("dtw_window").is_null());
}

TEST(SelectionParamsTest, Validation) {
  EXPECT_NO_THROW((SelectionParams{1, 0.0, 1, std::nullopt}.validate()));
  EXPECT_NO_THROW((SelectionParams{3, 1.0, 25, 2}.validate()));
  try {
    SelectionParams{0, 0.5, 25, std::nullopt}.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::KOutOfRange);
  }
  EXPECT_THROW((SelectionParams{1, 1.01, 25, std::nullopt}.validate()), Error);
  EXPECT_THROW((SelectionParams{1, -0.01, 25, std::nullopt}.validate()), Error);
  EXPECT_THROW((SelectionParams{1, 0.5, 0, std::nullopt}.validate()), Error);
}

TEST(PreprocessConfigTest, ThresholdMustBeInUnitInterval) {
  PreprocessConfig c;
  c.numeric_threshold = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c.numeric_threshold = 1.0;
  EXPECT_NO_THROW(c.validate());
  c.numeric_threshold = 1.5;
  EXPECT_THROW(c.validate(), Error);
}

}  // namespace
}  // namespace repsel
