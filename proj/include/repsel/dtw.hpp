#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "repsel/core.hpp"

namespace repsel {

/// Unnormalized DTW with L1 local cost: the minimum over monotone warping
/// paths from (0,0) to (|a|-1,|b|-1) of the summed |a_i - b_j|. With a
/// window w, paths are confined to |i - j| <= w (Sakoe-Chiba band), which
/// requires w >= ||a| - |b||. Memory is two rows of the shorter length.
double dtw_distance(std::span<const double> a, std::span<const double> b,
                    std::optional<std::size_t> window = std::nullopt);

/// Number of dtw_distance evaluations since process start (or last reset).
std::uint64_t dtw_evaluations() noexcept;
void reset_dtw_evaluations() noexcept;

/// Symmetric pairwise distances with a zero diagonal, stored row-major.
struct DistanceMatrix {
  std::string dataset_id;
  std::string params_fingerprint;
  std::vector<std::string> order;  // series ids in row order
  std::vector<double> d;           // n * n

  std::size_t size() const noexcept { return order.size(); }
  double at(std::size_t i, std::size_t j) const { return d[i * order.size() + j]; }
  double& at(std::size_t i, std::size_t j) { return d[i * order.size() + j]; }

  // Copy with every entry multiplied by `factor`.
  DistanceMatrix scaled(double factor) const;

  friend bool operator==(const DistanceMatrix&, const DistanceMatrix&) = default;
};

/// Identifies what a matrix was computed from besides the dataset:
/// segment count, band, and whether the dataset was normalized.
std::string matrix_fingerprint(const SelectionParams& params, bool normalized);

using ProgressSink = std::function<void(double)>;

struct BuildOptions {
  unsigned threads = 0;  // 0: hardware concurrency
  ProgressSink progress;
};

/// d[i][j] = dtw_distance(M4 values of series i, M4 values of series j) for
/// all i < j, mirrored. Output does not depend on thread count. The progress
/// sink sees non-decreasing fractions ending at 1.
DistanceMatrix build_matrix(const Dataset& dataset, const SelectionParams& params,
                            const BuildOptions& options = {});

std::string matrix_to_csv(const DistanceMatrix& matrix, std::span<const std::string> labels = {});

void to_json(Json& j, const DistanceMatrix& m);
void from_json(const Json& j, DistanceMatrix& m);

}  // namespace repsel
