#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "repsel/core.hpp"
#include "repsel/dtw.hpp"
#include "repsel/ingest.hpp"
#include "repsel/matrix_cache.hpp"
#include "repsel/selection.hpp"

namespace httplib {
class Server;
}

namespace repsel {

enum class JobPhase { Ingesting, Sampling, BuildingMatrix, Done, Failed };

struct JobStatus {
  std::string job_id;
  JobPhase phase = JobPhase::Sampling;
  double progress = 0.0;
  std::optional<std::string> error;
};

void to_json(Json& j, const JobStatus& s);

struct ServiceConfig {
  std::filesystem::path data_dir = "repsel-data";
  std::filesystem::path cache_dir = "repsel-cache";
  std::size_t upload_limit = std::size_t{512} << 20;
  std::size_t default_k = 5;
  double default_alpha = 0.5;
  unsigned build_threads = 0;
};

/// Failure with an HTTP status; the body is {"error": code, "message": ...}.
class HttpError : public std::runtime_error {
 public:
  HttpError(int status, std::string code, const std::string& message,
            std::optional<std::string> job_id = std::nullopt)
      : std::runtime_error(message), status_(status), code_(std::move(code)), job_id_(std::move(job_id)) {}

  int status() const noexcept { return status_; }
  const std::string& code() const noexcept { return code_; }
  const std::optional<std::string>& job_id() const noexcept { return job_id_; }
  Json body() const;

 private:
  int status_;
  std::string code_;
  std::optional<std::string> job_id_;
};

/// Dataset store, matrix builds, and selection behind the HTTP API. The
/// member functions are the request handlers minus transport; each returns
/// the JSON response body or throws HttpError.
///
/// Datasets are immutable once published. Matrices are held in memory and
/// persisted through MatrixCache; at most one build per (dataset,
/// fingerprint) runs at a time.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  Json upload(std::string_view csv, const PreprocessConfig& config, std::string source_name);
  Json dataset_info(const std::string& dataset_id) const;
  Json series(const std::string& dataset_id, const std::vector<std::string>& names,
              std::size_t width) const;
  Json summary(const std::string& dataset_id) const;
  Json select(const std::string& dataset_id, const Json& request);
  Json matrix(const std::string& dataset_id, const SelectionParams& params) const;
  Json job(const std::string& job_id) const;
  Json metrics() const;

  /// Params for a dataset with the service defaults filled in.
  SelectionParams default_params(const std::string& dataset_id) const;

  /// Blocks until every background build has finished.
  void wait_idle();

  void register_routes(httplib::Server& server);

  const ServiceConfig& config() const noexcept { return config_; }

 private:
  struct Entry {
    Dataset dataset;
    IngestReport report;
    PreprocessConfig config;
    std::vector<std::string> names;
  };
  using EntryPtr = std::shared_ptr<const Entry>;
  using MatrixPtr = std::shared_ptr<const DistanceMatrix>;

  EntryPtr find_entry(const std::string& dataset_id) const;
  EntryPtr load_entry(const std::string& dataset_id) const;
  void persist_entry(const Entry& entry) const;
  std::string start_build(const EntryPtr& entry, const SelectionParams& params);
  MatrixPtr cached_matrix(const Entry& entry, const std::string& fingerprint) const;
  void run_build(const EntryPtr& entry, SelectionParams params, std::string key,
                 std::string job_id);
  std::string new_job(JobPhase phase);
  void update_job(const std::string& job_id, JobPhase phase, double progress,
                  std::optional<std::string> error = std::nullopt);

  ServiceConfig config_;
  MatrixCache disk_cache_;

  mutable std::shared_mutex datasets_mutex_;
  mutable std::map<std::string, EntryPtr> datasets_;

  mutable std::shared_mutex matrices_mutex_;
  mutable std::map<std::string, MatrixPtr> matrices_;  // key: dataset id | fingerprint
  std::map<std::string, std::string> building_;          // key -> job id

  mutable std::mutex jobs_mutex_;
  std::map<std::string, JobStatus> jobs_;
  std::size_t next_job_ = 1;

  std::mutex threads_mutex_;
  std::vector<std::jthread> threads_;
};

/// httplib server bound to a Service, run on a background thread.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds (port 0 picks a free port) and starts serving; returns the port.
  int start(const std::string& host, int port);
  /// Binds and serves on the calling thread until stop().
  bool listen(const std::string& host, int port);
  void stop();

 private:
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace repsel
