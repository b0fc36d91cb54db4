#include "repsel/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "repsel/error.hpp"

namespace repsel {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_inputs(const DistanceMatrix& matrix, const SelectionParams& params) {
  if (matrix.size() == 0) throw Error(ErrorCode::EmptyMatrix, "distance matrix is empty");
  params.validate();
  if (params.k > matrix.size()) {
    throw Error(ErrorCode::KOutOfRange, "k=" + std::to_string(params.k) + " exceeds n=" +
                                            std::to_string(matrix.size()));
  }
}

// Correctly rounded summation (Shewchuk's partials, as in Python's fsum).
// Coverage sums go through this so that the same multiset of distances gives
// the same double in any order; tied candidates then really compare equal
// and fall through to the index rule.
class ExactSum {
 public:
  void clear() { partials_.clear(); }

  void add(double x) {
    std::size_t used = 0;
    for (double y : partials_) {
      if (std::abs(x) < std::abs(y)) std::swap(x, y);
      const double hi = x + y;
      const double lo = y - (hi - x);
      if (lo != 0.0) partials_[used++] = lo;
      x = hi;
    }
    partials_.resize(used);
    partials_.push_back(x);
  }

  double value() const {
    std::size_t n = partials_.size();
    if (n == 0) return 0.0;
    double hi = partials_[--n];
    double lo = 0.0;
    while (n > 0) {
      const double x = hi;
      const double y = partials_[--n];
      hi = x + y;
      lo = y - (hi - x);
      if (lo != 0.0) break;
    }
    // Round half-even across the remaining partials.
    if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) || (lo > 0.0 && partials_[n - 1] > 0.0))) {
      const double y = lo * 2.0;
      const double x = hi + y;
      if (y == x - hi) hi = x;
    }
    return hi;
  }

 private:
  std::vector<double> partials_;
};

struct Candidate {
  std::size_t index = 0;
  double score = -kInf;
  double cov = kInf;
  double delta_div = 0.0;
  double delta_cov = 0.0;
  double div = 0.0;
  bool valid = false;
};

// Higher score, then lower resulting coverage, then lower index. Candidates
// are offered in ascending index order, so equal (score, cov) keeps the
// incumbent.
bool better(const Candidate& c, const Candidate& best) {
  if (!best.valid) return true;
  if (c.score != best.score) return c.score > best.score;
  if (c.cov != best.cov) return c.cov < best.cov;
  return c.index < best.index;
}

SelectionResult finish(const DistanceMatrix& matrix, const SelectionParams& params,
                       std::vector<std::size_t> chosen, std::vector<GreedyStep> trace) {
  SelectionResult result;
  result.params = params;
  result.indices = std::move(chosen);
  result.trace = std::move(trace);
  result.representatives.reserve(result.indices.size());
  for (std::size_t i : result.indices) result.representatives.push_back(matrix.order[i]);
  result.final_div = diversity(result.indices, matrix);
  result.final_cov = coverage(result.indices, matrix);
  result.final_objective = params.alpha * result.final_div - (1.0 - params.alpha) * result.final_cov;
  return result;
}

}  // namespace

double diversity(std::span<const std::size_t> chosen, const DistanceMatrix& matrix) {
  if (chosen.size() < 2) return 0.0;
  double best = kInf;
  for (std::size_t a = 0; a < chosen.size(); ++a) {
    for (std::size_t b = a + 1; b < chosen.size(); ++b) {
      best = std::min(best, matrix.at(chosen[a], chosen[b]));
    }
  }
  return best;
}

double coverage(std::span<const std::size_t> chosen, const DistanceMatrix& matrix) {
  if (chosen.empty()) {
    throw Error(ErrorCode::EmptyRepresentativeSet, "coverage of an empty representative set");
  }
  const std::size_t n = matrix.size();
  ExactSum sum;
  for (std::size_t i = 0; i < n; ++i) {
    double nearest = kInf;
    for (std::size_t j : chosen) nearest = std::min(nearest, matrix.at(i, j));
    sum.add(nearest);
  }
  return sum.value() / static_cast<double>(n);
}

double objective(std::span<const std::size_t> chosen, const DistanceMatrix& matrix, double alpha) {
  const double cov = coverage(chosen, matrix);
  return alpha * diversity(chosen, matrix) - (1.0 - alpha) * cov;
}

SelectionResult greedy_select(const DistanceMatrix& matrix, const SelectionParams& params) {
  check_inputs(matrix, params);
  const std::size_t n = matrix.size();
  const double alpha = params.alpha;

  // nearest[i]: distance from series i to its closest representative.
  std::vector<double> nearest(n, kInf);
  std::vector<bool> chosen_mask(n, false);
  std::vector<std::size_t> chosen;
  std::vector<GreedyStep> trace;
  chosen.reserve(params.k);
  trace.reserve(params.k);
  double div = 0.0;
  double cov = 0.0;  // empty-set convention
  ExactSum sum;

  for (std::size_t step = 0; step < params.k; ++step) {
    Candidate best;
    for (std::size_t t = 0; t < n; ++t) {
      if (chosen_mask[t]) continue;
      Candidate c;
      c.index = t;
      c.valid = true;
      if (chosen.empty()) {
        c.div = 0.0;
      } else if (chosen.size() == 1) {
        c.div = nearest[t];
      } else {
        c.div = std::min(div, nearest[t]);
      }
      sum.clear();
      for (std::size_t i = 0; i < n; ++i) sum.add(std::min(nearest[i], matrix.at(i, t)));
      c.cov = sum.value() / static_cast<double>(n);
      c.delta_div = c.div - div;
      c.delta_cov = c.cov - cov;
      c.score = alpha * c.delta_div - (1.0 - alpha) * c.delta_cov;
      if (better(c, best)) best = c;
    }

    chosen.push_back(best.index);
    chosen_mask[best.index] = true;
    for (std::size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], matrix.at(i, best.index));
    div = best.div;
    cov = best.cov;
    trace.push_back(GreedyStep{best.index, best.delta_div, best.delta_cov, best.score, div, cov,
                               alpha * div - (1.0 - alpha) * cov});
  }
  return finish(matrix, params, std::move(chosen), std::move(trace));
}

SelectionResult greedy_select_oracle(const DistanceMatrix& matrix, const SelectionParams& params) {
  check_inputs(matrix, params);
  const std::size_t n = matrix.size();
  const double alpha = params.alpha;

  std::vector<std::size_t> chosen;
  std::vector<GreedyStep> trace;
  for (std::size_t step = 0; step < params.k; ++step) {
    const double div_now = diversity(chosen, matrix);
    const double cov_now = chosen.empty() ? 0.0 : coverage(chosen, matrix);
    Candidate best;
    for (std::size_t t = 0; t < n; ++t) {
      if (std::find(chosen.begin(), chosen.end(), t) != chosen.end()) continue;
      std::vector<std::size_t> trial = chosen;
      trial.push_back(t);
      Candidate c;
      c.index = t;
      c.valid = true;
      c.div = diversity(trial, matrix);
      c.cov = coverage(trial, matrix);
      c.delta_div = c.div - div_now;
      c.delta_cov = c.cov - cov_now;
      c.score = alpha * c.delta_div - (1.0 - alpha) * c.delta_cov;
      if (better(c, best)) best = c;
    }
    chosen.push_back(best.index);
    trace.push_back(GreedyStep{best.index, best.delta_div, best.delta_cov, best.score, best.div,
                               best.cov, alpha * best.div - (1.0 - alpha) * best.cov});
  }
  return finish(matrix, params, std::move(chosen), std::move(trace));
}

SelectionResult reselect(const DistanceMatrix* matrix, const SelectionParams& params) {
  if (matrix == nullptr) {
    throw Error(ErrorCode::MatrixMissing, "no distance matrix built for these parameters");
  }
  return greedy_select(*matrix, params);
}

Json selection_to_json(const SelectionResult& result, std::span<const std::string> names) {
  Json j = result;
  if (!names.empty()) {
    for (std::size_t r = 0; r < result.indices.size(); ++r) {
      j["representatives"][r]["name"] = names[result.indices[r]];
    }
  }
  return j;
}

void to_json(Json& j, const GreedyStep& s) {
  j = Json{{"picked", s.picked},
           {"delta_div", s.delta_div},
           {"delta_cov", s.delta_cov},
           {"score", s.score},
           {"div_after", s.div_after},
           {"cov_after", s.cov_after},
           {"objective_after", s.objective_after}};
}

void from_json(const Json& j, GreedyStep& s) {
  j.at("picked").get_to(s.picked);
  j.at("delta_div").get_to(s.delta_div);
  j.at("delta_cov").get_to(s.delta_cov);
  j.at("score").get_to(s.score);
  j.at("div_after").get_to(s.div_after);
  j.at("cov_after").get_to(s.cov_after);
  j.at("objective_after").get_to(s.objective_after);
}

void to_json(Json& j, const SelectionResult& r) {
  Json reps = Json::array();
  for (std::size_t i = 0; i < r.indices.size(); ++i) {
    reps.push_back(Json{{"index", r.indices[i]}, {"id", r.representatives[i]}});
  }
  j = Json{{"params", r.params},
           {"representatives", std::move(reps)},
           {"trace", r.trace},
           {"final_div", r.final_div},
           {"final_cov", r.final_cov},
           {"final_objective", r.final_objective}};
}

void from_json(const Json& j, SelectionResult& r) {
  j.at("params").get_to(r.params);
  r.indices.clear();
  r.representatives.clear();
  for (const auto& rep : j.at("representatives")) {
    r.indices.push_back(rep.at("index").get<std::size_t>());
    r.representatives.push_back(rep.at("id").get<std::string>());
  }
  j.at("trace").get_to(r.trace);
  j.at("final_div").get_to(r.final_div);
  j.at("final_cov").get_to(r.final_cov);
  j.at("final_objective").get_to(r.final_objective);
}

}  // namespace repsel
