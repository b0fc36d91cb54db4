#pragma once

// Synthetic CSV fixtures standing in for real multivariate recordings.

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "repsel/core.hpp"

namespace repsel::testing {

struct FixtureSpec {
  std::size_t series = 10;
  std::size_t rows = 500;
  std::uint64_t seed = 1;
  std::size_t families = 4;        // distinct underlying shapes
  double noise = 0.05;
  double missing_rate = 0.0;       // per numeric cell
  std::size_t text_columns = 0;    // categorical columns appended at the end
  bool irregular_time = false;
};

// Column "t" plus series s000..; series in one family share a shape with
// random amplitude, offset, and a small phase shift.
inline std::string synthetic_csv(const FixtureSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  struct Shape {
    std::size_t family;
    double amp, offset, phase;
  };
  std::vector<Shape> shapes;
  for (std::size_t s = 0; s < spec.series; ++s) {
    shapes.push_back({s % std::max<std::size_t>(spec.families, 1), 0.5 + 2.0 * unit(rng),
                      10.0 * (unit(rng) - 0.5), 0.3 * unit(rng)});
  }
  auto base = [](std::size_t family, double x) {
    switch (family % 5) {
      case 0: return std::sin(6.283185307179586 * 3.0 * x);
      case 1: return 2.0 * x - 1.0;
      case 2: return x < 0.5 ? -1.0 : 1.0;
      case 3: return std::cos(6.283185307179586 * 7.0 * x) * std::exp(-2.0 * x);
      default: return std::abs(std::sin(6.283185307179586 * 1.5 * x)) - 0.5;
    }
  };

  std::string out = "t";
  char buf[64];
  for (std::size_t s = 0; s < spec.series; ++s) {
    std::snprintf(buf, sizeof(buf), ",s%03zu", s);
    out += buf;
  }
  for (std::size_t c = 0; c < spec.text_columns; ++c) out += ",label" + std::to_string(c);
  out += "\n";

  std::int64_t t = 0;
  for (std::size_t r = 0; r < spec.rows; ++r) {
    t += spec.irregular_time ? 1 + static_cast<std::int64_t>(unit(rng) * 5.0) : 1;
    out += std::to_string(t);
    const double x = spec.rows > 1 ? static_cast<double>(r) / static_cast<double>(spec.rows - 1) : 0.0;
    for (const auto& sh : shapes) {
      out += ",";
      if (spec.missing_rate > 0.0 && unit(rng) < spec.missing_rate) continue;
      const double v = sh.offset + sh.amp * base(sh.family, x + sh.phase * 0.1) + spec.noise * gauss(rng);
      std::snprintf(buf, sizeof(buf), "%.6f", v);
      out += buf;
    }
    for (std::size_t c = 0; c < spec.text_columns; ++c) {
      static const char* kWords[] = {"climb", "cruise", "descent", "taxi"};
      out += ",";
      out += kWords[(r + c) % 4];
    }
    out += "\n";
  }
  return out;
}

// Random series with strictly increasing, irregular timestamps.
inline TimeSeries random_series(std::size_t length, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> step(1, 50);
  std::normal_distribution<double> gauss(0.0, 1.0);
  TimeSeries s;
  s.id = "rand";
  s.name = "rand";
  Tick t = std::uniform_int_distribution<Tick>(-1000, 1000)(rng);
  double v = 0.0;
  for (std::size_t i = 0; i < length; ++i) {
    t += step(rng);
    v += gauss(rng);
    s.points.push_back({t, v});
  }
  return s;
}

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& prefix) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            (prefix + "-" + std::to_string(rd()) + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace repsel::testing
