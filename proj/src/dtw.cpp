#include "repsel/dtw.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

#include "repsel/error.hpp"
#include "repsel/m4.hpp"

namespace repsel {

namespace {

std::atomic<std::uint64_t> g_dtw_evaluations{0};

}  // namespace

std::uint64_t dtw_evaluations() noexcept { return g_dtw_evaluations.load(std::memory_order_relaxed); }

void reset_dtw_evaluations() noexcept { g_dtw_evaluations.store(0, std::memory_order_relaxed); }

double dtw_distance(std::span<const double> a, std::span<const double> b,
                    std::optional<std::size_t> window) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptySequence, "DTW needs non-empty sequences");
  g_dtw_evaluations.fetch_add(1, std::memory_order_relaxed);

  // Rows over the longer sequence, columns over the shorter one.
  if (b.size() > a.size()) std::swap(a, b);
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  const std::size_t band = window.value_or(std::max(n, m));
  if (band < n - m) {
    throw Error(ErrorCode::BandTooNarrow, "window " + std::to_string(band) +
                                              " is narrower than the length difference " +
                                              std::to_string(n - m));
  }

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(m, kInf);
  std::vector<double> curr(m, kInf);

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i > band ? i - band : 0;
    const std::size_t hi = std::min(m - 1, i + band);
    std::fill(curr.begin(), curr.end(), kInf);
    for (std::size_t j = lo; j <= hi; ++j) {
      const double cost = std::abs(a[i] - b[j]);
      double best;
      if (i == 0 && j == 0) {
        best = 0.0;
      } else {
        best = kInf;
        if (i > 0) best = std::min(best, prev[j]);
        if (j > 0) best = std::min(best, curr[j - 1]);
        if (i > 0 && j > 0) best = std::min(best, prev[j - 1]);
      }
      curr[j] = cost + best;
    }
    std::swap(prev, curr);
  }
  return prev[m - 1];
}

DistanceMatrix DistanceMatrix::scaled(double factor) const {
  DistanceMatrix out = *this;
  for (double& x : out.d) x *= factor;
  return out;
}

std::string matrix_fingerprint(const SelectionParams& params, bool normalized) {
  std::string fp = "segments=" + std::to_string(params.segments);
  fp += ";window=" + (params.dtw_window ? std::to_string(*params.dtw_window) : std::string("none"));
  fp += ";normalize=";
  fp += normalized ? "1" : "0";
  return fp;
}

DistanceMatrix build_matrix(const Dataset& dataset, const SelectionParams& params,
                            const BuildOptions& options) {
  if (params.segments < 1) throw Error(ErrorCode::InvalidParams, "segments must be >= 1");
  const std::size_t n = dataset.series.size();

  DistanceMatrix matrix;
  matrix.dataset_id = dataset.id;
  matrix.params_fingerprint = matrix_fingerprint(params, dataset.provenance.normalized);
  matrix.order.reserve(n);
  for (const auto& s : dataset.series) matrix.order.push_back(s.id);
  matrix.d.assign(n * n, 0.0);

  std::vector<std::vector<double>> samples(n);
  for (std::size_t i = 0; i < n; ++i) {
    try {
      samples[i] = m4_sample(dataset.series[i], params.segments).values();
    } catch (const Error& e) {
      throw Error(e.code(), "sampling series '" + dataset.series[i].id + "': " + e.what());
    }
  }

  const std::size_t total_pairs = n * (n - 1) / 2;
  std::mutex progress_mutex;
  std::size_t done_pairs = 0;
  double reported = 0.0;
  auto report = [&](std::size_t finished) {
    if (!options.progress) return;
    std::lock_guard lock(progress_mutex);
    done_pairs += finished;
    const double fraction =
        total_pairs == 0 ? 1.0 : static_cast<double>(done_pairs) / static_cast<double>(total_pairs);
    if (fraction > reported || done_pairs == total_pairs) {
      reported = std::max(reported, fraction);
      options.progress(reported);
    }
  };

  // Rows are handed out dynamically; each row i fills cells (i, j > i) and
  // their mirrors, so writes from different workers never overlap.
  std::atomic<std::size_t> next_row{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next_row.fetch_add(1);
      if (i >= n) return;
      try {
        for (std::size_t j = i + 1; j < n; ++j) {
          double dist;
          try {
            dist = dtw_distance(samples[i], samples[j], params.dtw_window);
          } catch (const Error& e) {
            throw Error(e.code(), "DTW between '" + dataset.series[i].id + "' and '" +
                                      dataset.series[j].id + "': " + e.what());
          }
          matrix.d[i * n + j] = dist;
          matrix.d[j * n + i] = dist;
        }
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next_row.store(n);
        return;
      }
      report(n - 1 - i);
    }
  };

  unsigned threads = options.threads ? options.threads : std::thread::hardware_concurrency();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);
  if (total_pairs == 0) report(0);
  return matrix;
}

std::string matrix_to_csv(const DistanceMatrix& matrix, std::span<const std::string> labels) {
  const std::size_t n = matrix.size();
  const auto label = [&](std::size_t i) -> const std::string& {
    return labels.size() == n ? labels[i] : matrix.order[i];
  };
  std::string out = "series";
  for (std::size_t j = 0; j < n; ++j) out += "," + label(j);
  out += "\n";
  char buf[64];
  for (std::size_t i = 0; i < n; ++i) {
    out += label(i);
    for (std::size_t j = 0; j < n; ++j) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), matrix.at(i, j));
      out.push_back(',');
      out.append(buf, end);
    }
    out.push_back('\n');
  }
  return out;
}

void to_json(Json& j, const DistanceMatrix& m) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < m.size(); ++i) {
    rows.push_back(std::vector<double>(m.d.begin() + i * m.size(), m.d.begin() + (i + 1) * m.size()));
  }
  j = Json{{"dataset_id", m.dataset_id},
           {"params_fingerprint", m.params_fingerprint},
           {"order", m.order},
           {"d", std::move(rows)}};
}

void from_json(const Json& j, DistanceMatrix& m) {
  j.at("dataset_id").get_to(m.dataset_id);
  j.at("params_fingerprint").get_to(m.params_fingerprint);
  j.at("order").get_to(m.order);
  const auto& rows = j.at("d");
  const std::size_t n = m.order.size();
  if (rows.size() != n) throw Error(ErrorCode::InvalidParams, "matrix row count does not match order");
  m.d.clear();
  m.d.reserve(n * n);
  for (const auto& row : rows) {
    if (row.size() != n) throw Error(ErrorCode::InvalidParams, "matrix is not square");
    for (const auto& x : row) m.d.push_back(x.get<double>());
  }
}

}  // namespace repsel
