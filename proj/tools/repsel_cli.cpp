// repsel: batch front-end for ingestion, DTW matrix building, representative
// selection, and the HTTP service.
//
// Exit codes: 0 success, 1 computation error, 2 usage or I/O error.

#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include "CLI11.hpp"
#include "repsel/dtw.hpp"
#include "repsel/error.hpp"
#include "repsel/ingest.hpp"
#include "repsel/m4.hpp"
#include "repsel/matrix_cache.hpp"
#include "repsel/selection.hpp"
#include "repsel/service.hpp"

namespace fs = std::filesystem;
using namespace repsel;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCompute = 1;
constexpr int kExitUsage = 2;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "no such file: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

Dataset load_dataset(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return Json::parse(text).get<Dataset>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Io, "not a dataset file: " + path.string() + " (" + e.what() + ")");
  }
}

fs::path default_cache_dir() {
  if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg && *xdg) return fs::path(xdg) / "repsel";
  if (const char* home = std::getenv("HOME"); home && *home) return fs::path(home) / ".cache" / "repsel";
  return fs::path(".repsel-cache");
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io:
    case ErrorCode::InvalidParams:
    case ErrorCode::KOutOfRange:
      return kExitUsage;
    default:
      return kExitCompute;
  }
}

// A file whose first line is all numbers is read as headerless.
std::string with_header(std::string text, char delimiter) {
  const std::size_t eol = text.find_first_of("\r\n");
  const std::string first = text.substr(0, eol);
  std::vector<std::string> cells;
  std::stringstream ss(first);
  std::string cell;
  while (std::getline(ss, cell, delimiter)) cells.push_back(cell);
  if (cells.empty()) return text;
  for (const auto& c : cells) {
    if (!parse_finite_double(c)) return text;
  }
  std::string header;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) header.push_back(delimiter);
    header += "v" + std::to_string(i + 1);
  }
  return header + "\n" + text;
}

std::vector<double> read_sequence(const fs::path& path, const std::string& column) {
  PreprocessConfig config;
  config.normalize = false;
  const auto result = ingest_csv(with_header(read_file(path), config.delimiter), config, path.string());
  const auto& series = result.dataset.series;
  if (column.empty()) return series.front().values();
  const auto idx = result.dataset.find(column);
  if (!idx) throw Error(ErrorCode::InvalidParams, "no numeric column '" + column + "' in " + path.string());
  return series[*idx].values();
}

struct SelectArgs {
  fs::path dataset;
  std::size_t k = 0;
  double alpha = 0.5;
  std::size_t segments = 25;
  std::optional<std::size_t> window;
  std::string format = "json";
  fs::path cache_dir;
  unsigned threads = 0;
};

DistanceMatrix obtain_matrix(const Dataset& dataset, const SelectionParams& params,
                             const fs::path& cache_dir, unsigned threads, bool verbose, bool quiet) {
  MatrixCache cache(cache_dir);
  const std::string fp = matrix_fingerprint(params, dataset.provenance.normalized);
  const auto t0 = std::chrono::steady_clock::now();
  if (auto hit = cache.get(dataset.id, fp); hit && hit->size() == dataset.size()) {
    if (verbose) {
      std::cerr << "cache hit: " << cache.path_for(dataset.id, fp).string() << "\n";
    }
    return std::move(*hit);
  }
  if (verbose) std::cerr << "cache miss: building " << dataset.size() << "x" << dataset.size() << " matrix\n";
  BuildOptions options;
  options.threads = threads;
  if (!quiet) {
    int last = -1;
    options.progress = [last](double f) mutable {
      const int pct = static_cast<int>(f * 100.0);
      if (pct != last) {
        last = pct;
        std::cerr << "\rbuilding matrix " << pct << "%" << (pct == 100 ? "\n" : "") << std::flush;
      }
    };
  }
  DistanceMatrix m = build_matrix(dataset, params, options);
  cache.put(m);
  if (verbose) {
    const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "matrix built in " << ms << " ms\n";
  }
  return m;
}

std::string selection_csv(const SelectionResult& r, const Dataset& dataset) {
  std::ostringstream out;
  out.precision(17);
  out << "rank,index,name,delta_div,delta_cov,score,div_after,cov_after,objective_after\n";
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    const auto& s = r.trace[i];
    out << i + 1 << "," << s.picked << "," << dataset.series[s.picked].name << "," << s.delta_div << ","
        << s.delta_cov << "," << s.score << "," << s.div_after << "," << s.cov_after << ","
        << s.objective_after << "\n";
  }
  return out.str();
}

HttpServer* g_server = nullptr;

extern "C" void handle_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"repsel: representative time-series selection"};
  app.require_subcommand(1);
  bool verbose = false;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "Timing and cache diagnostics on stderr");
  app.add_flag("-q,--quiet", quiet, "Suppress progress output");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Parse a CSV file into a dataset JSON");
  fs::path ingest_input, ingest_output, ingest_report;
  std::string time_col;
  bool no_normalize = false;
  std::string delimiter = ",";
  double threshold = 0.95;
  std::size_t ingest_segments = 25;
  ingest->add_option("csv", ingest_input, "Input CSV")->required();
  ingest->add_option("-o,--output", ingest_output, "Dataset JSON output")->required();
  ingest->add_option("--report", ingest_report, "Ingest report JSON (default: <output stem>.report.json)");
  ingest->add_option("--time-col", time_col, "Time column (default: row index)");
  ingest->add_flag("--no-normalize", no_normalize, "Keep raw values");
  ingest->add_option("--delimiter", delimiter, "Field delimiter")->check([](const std::string& s) {
    return s.size() == 1 ? std::string() : std::string("delimiter must be one character");
  });
  ingest->add_option("--numeric-threshold", threshold, "Fraction of parseable cells for numeric columns");
  ingest->add_option("--segments", ingest_segments, "Default M4 segments recorded in the config")
      ->check(CLI::PositiveNumber);

  // select
  auto* select = app.add_subcommand("select", "Select k representative series");
  SelectArgs sel;
  sel.cache_dir = default_cache_dir();
  select->add_option("dataset", sel.dataset, "Dataset JSON")->required();
  select->add_option("--k", sel.k, "Number of representatives")->required();
  select->add_option("--alpha", sel.alpha, "Diversity/coverage trade-off in [0,1]")->required();
  select->add_option("--segments", sel.segments, "M4 segments per series")->check(CLI::PositiveNumber);
  select->add_option("--window", sel.window, "Sakoe-Chiba band half-width");
  select->add_option("--format", sel.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
  select->add_option("--cache", sel.cache_dir, "Matrix cache directory")->envname("REPSEL_CACHE_DIR");
  select->add_option("--threads", sel.threads, "Worker threads for the matrix build (0: all cores)");

  // matrix
  auto* matrix_cmd = app.add_subcommand("matrix", "Build (or load) and export the distance matrix");
  SelectArgs mat;
  mat.cache_dir = default_cache_dir();
  matrix_cmd->add_option("dataset", mat.dataset, "Dataset JSON")->required();
  matrix_cmd->add_option("--segments", mat.segments, "M4 segments per series")->check(CLI::PositiveNumber);
  matrix_cmd->add_option("--window", mat.window, "Sakoe-Chiba band half-width");
  matrix_cmd->add_option("--format", mat.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
  matrix_cmd->add_option("--cache", mat.cache_dir, "Matrix cache directory")->envname("REPSEL_CACHE_DIR");
  matrix_cmd->add_option("--threads", mat.threads, "Worker threads (0: all cores)");

  // dtw
  auto* dtw_cmd = app.add_subcommand("dtw", "DTW distance between two single-series CSV files");
  fs::path dtw_a, dtw_b;
  std::optional<std::size_t> dtw_window;
  std::string dtw_column;
  dtw_cmd->add_option("csv-a", dtw_a)->required();
  dtw_cmd->add_option("csv-b", dtw_b)->required();
  dtw_cmd->add_option("--window", dtw_window, "Sakoe-Chiba band half-width");
  dtw_cmd->add_option("--column", dtw_column, "Column to read (default: first numeric)");

  // m4
  auto* m4_cmd = app.add_subcommand("m4", "Print the M4 sample of one series");
  fs::path m4_dataset;
  std::string m4_series;
  std::size_t m4_segments = 25;
  m4_cmd->add_option("dataset", m4_dataset, "Dataset JSON")->required();
  m4_cmd->add_option("--series", m4_series, "Series name")->required();
  m4_cmd->add_option("--segments", m4_segments, "Segment count")->required()->check(CLI::PositiveNumber);

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  std::string listen = "127.0.0.1:8080";
  ServiceConfig service_config;
  serve->add_option("--listen", listen, "host:port")->envname("REPSEL_LISTEN");
  serve->add_option("--data-dir", service_config.data_dir, "Dataset store")->envname("REPSEL_DATA_DIR");
  serve->add_option("--cache-dir", service_config.cache_dir, "Matrix cache")->envname("REPSEL_CACHE_DIR");
  serve->add_option("--upload-limit", service_config.upload_limit, "Max upload bytes")
      ->envname("REPSEL_UPLOAD_LIMIT");
  serve->add_option("--threads", service_config.build_threads, "Matrix build threads (0: all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*ingest) {
      PreprocessConfig config;
      if (!time_col.empty()) config.time_column = time_col;
      config.normalize = !no_normalize;
      config.delimiter = delimiter[0];
      config.numeric_threshold = threshold;
      config.segments = ingest_segments;
      const std::string source = read_file(ingest_input);
      const auto result = ingest_csv(source, config, ingest_input.filename().string());
      if (ingest_report.empty()) {
        ingest_report = ingest_output;
        ingest_report.replace_extension();
        ingest_report += ".report.json";
      }
      write_file(ingest_output, Json(result.dataset).dump() + "\n");
      write_file(ingest_report, Json(result.report).dump(2) + "\n");
      if (!quiet) {
        std::cerr << "dataset " << result.dataset.id << ": " << result.dataset.size() << " series, "
                  << result.report.rows_read << " rows\n";
        for (const auto& w : result.dataset.provenance.warnings) std::cerr << "warning: " << w << "\n";
      }
      return kExitOk;
    }

    if (*select) {
      const Dataset dataset = load_dataset(sel.dataset);
      SelectionParams params{sel.k, sel.alpha, sel.segments, sel.window};
      params.validate();
      if (params.k > dataset.size()) {
        throw Error(ErrorCode::KOutOfRange, "k=" + std::to_string(params.k) + " exceeds n=" +
                                                std::to_string(dataset.size()));
      }
      const DistanceMatrix m = obtain_matrix(dataset, params, sel.cache_dir, sel.threads, verbose, quiet);
      const auto t0 = std::chrono::steady_clock::now();
      const SelectionResult result = reselect(&m, params);
      if (verbose) {
        std::cerr << "selection in "
                  << std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count()
                  << " ms\n";
      }
      if (sel.format == "csv") {
        std::cout << selection_csv(result, dataset);
      } else {
        std::vector<std::string> names;
        for (const auto& s : dataset.series) names.push_back(s.name);
        std::cout << selection_to_json(result, names).dump(2) << "\n";
      }
      return kExitOk;
    }

    if (*matrix_cmd) {
      const Dataset dataset = load_dataset(mat.dataset);
      SelectionParams params;
      params.segments = mat.segments;
      params.dtw_window = mat.window;
      const DistanceMatrix m = obtain_matrix(dataset, params, mat.cache_dir, mat.threads, verbose, quiet);
      std::vector<std::string> names;
      for (const auto& s : dataset.series) names.push_back(s.name);
      if (mat.format == "csv") {
        std::cout << matrix_to_csv(m, names);
      } else {
        Json j = m;
        j["names"] = names;
        std::cout << j.dump() << "\n";
      }
      return kExitOk;
    }

    if (*dtw_cmd) {
      const auto a = read_sequence(dtw_a, dtw_column);
      const auto b = read_sequence(dtw_b, dtw_column);
      Json out = dtw_distance(a, b, dtw_window);
      std::cout << out.dump() << "\n";
      return kExitOk;
    }

    if (*m4_cmd) {
      const Dataset dataset = load_dataset(m4_dataset);
      const auto idx = dataset.find(m4_series);
      if (!idx) throw Error(ErrorCode::InvalidParams, "no series named '" + m4_series + "'");
      std::cout << Json(m4_sample(dataset.series[*idx], m4_segments)).dump() << "\n";
      return kExitOk;
    }

    if (*serve) {
      const auto colon = listen.rfind(':');
      if (colon == std::string::npos) throw Error(ErrorCode::InvalidParams, "--listen expects host:port");
      const std::string host = listen.substr(0, colon);
      const int port = std::stoi(listen.substr(colon + 1));
      Service service(service_config);
      HttpServer server(service);
      g_server = &server;
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      if (!quiet) std::cerr << "listening on " << host << ":" << port << "\n";
      if (!server.listen(host, port)) throw Error(ErrorCode::Io, "cannot listen on " + listen);
      g_server = nullptr;
      return kExitOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCompute;
  }
  return kExitUsage;
}
