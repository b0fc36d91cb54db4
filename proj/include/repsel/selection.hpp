#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "repsel/core.hpp"
#include "repsel/dtw.hpp"

namespace repsel {

struct GreedyStep {
  std::size_t picked = 0;
  double delta_div = 0.0;
  double delta_cov = 0.0;
  double score = 0.0;  // alpha * delta_div - (1 - alpha) * delta_cov
  double div_after = 0.0;
  double cov_after = 0.0;
  double objective_after = 0.0;

  friend bool operator==(const GreedyStep&, const GreedyStep&) = default;
};

struct SelectionResult {
  SelectionParams params;
  std::vector<std::size_t> indices;          // greedy order
  std::vector<std::string> representatives;  // series ids, greedy order
  std::vector<GreedyStep> trace;
  double final_div = 0.0;
  double final_cov = 0.0;
  double final_objective = 0.0;

  friend bool operator==(const SelectionResult&, const SelectionResult&) = default;
};

/// Smallest pairwise distance among `chosen`; 0 when fewer than two.
double diversity(std::span<const std::size_t> chosen, const DistanceMatrix& matrix);

/// Mean over all series of the distance to the nearest member of `chosen`.
double coverage(std::span<const std::size_t> chosen, const DistanceMatrix& matrix);

/// alpha * diversity - (1 - alpha) * coverage.
double objective(std::span<const std::size_t> chosen, const DistanceMatrix& matrix, double alpha);

/// Greedy diversity/coverage selection.
///
/// Each step adds the candidate T maximizing
///   alpha * dDiv(T) - (1 - alpha) * dCov(T)
/// where dDiv and dCov are the changes in diversity and coverage caused by
/// adding T. With an empty set, coverage of the empty set is taken as 0 and
/// diversity is 0 below two members, so the first pick is the 1-medoid and
/// the second rewards distance from it. Ties go to the lower resulting
/// coverage, then to the lower series index.
///
/// Coverage is maintained through each series' distance to its nearest
/// representative, making one step O(n^2).
SelectionResult greedy_select(const DistanceMatrix& matrix, const SelectionParams& params);

/// Same contract as greedy_select, but every candidate is scored by
/// recomputing diversity and coverage of the enlarged set from scratch.
/// Intended for small n as a test reference.
SelectionResult greedy_select_oracle(const DistanceMatrix& matrix, const SelectionParams& params);

/// Selection against an already-built matrix. Throws MatrixMissing when
/// `matrix` is null; never evaluates DTW.
SelectionResult reselect(const DistanceMatrix* matrix, const SelectionParams& params);

/// Canonical JSON: representatives also carry their indices and, when
/// `names` is given, their column names.
Json selection_to_json(const SelectionResult& result, std::span<const std::string> names = {});

void to_json(Json& j, const GreedyStep& s);
void from_json(const Json& j, GreedyStep& s);
void to_json(Json& j, const SelectionResult& r);
void from_json(const Json& j, SelectionResult& r);

}  // namespace repsel
