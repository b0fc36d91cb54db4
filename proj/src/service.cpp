#include "repsel/service.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include "httplib.h"
#include "repsel/error.hpp"
#include "repsel/m4.hpp"
#include "repsel/summary.hpp"

namespace repsel {

namespace {

std::string_view phase_name(JobPhase phase) {
  switch (phase) {
    case JobPhase::Ingesting: return "ingesting";
    case JobPhase::Sampling: return "sampling";
    case JobPhase::BuildingMatrix: return "building_matrix";
    case JobPhase::Done: return "done";
    case JobPhase::Failed: return "failed";
  }
  return "unknown";
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::MatrixMissing: return 409;
    case ErrorCode::Io: return 500;
    default: return 400;
  }
}

HttpError from_error(const Error& e) {
  return HttpError(status_for(e.code()), std::string(to_string(e.code())), e.what());
}

bool is_dataset_id(const std::string& id) {
  return id.size() == 32 && id.find_first_not_of("0123456789abcdef") == std::string::npos;
}

std::string matrix_key(const std::string& dataset_id, const std::string& fingerprint) {
  return dataset_id + "|" + fingerprint;
}

std::size_t parse_size(const std::string& text, const char* what) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != text.size() || text.front() == '-') {
    throw HttpError(400, "InvalidParams", std::string(what) + " must be a non-negative integer");
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

void to_json(Json& j, const JobStatus& s) {
  j = Json{{"job_id", s.job_id},
           {"phase", phase_name(s.phase)},
           {"progress", s.progress},
           {"error", s.error ? Json(*s.error) : Json(nullptr)}};
}

Json HttpError::body() const {
  Json j{{"error", code_}, {"message", what()}};
  if (job_id_) j["job_id"] = *job_id_;
  return j;
}

Service::Service(ServiceConfig config) : config_(std::move(config)), disk_cache_(config_.cache_dir) {
  std::error_code ec;
  std::filesystem::create_directories(config_.data_dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create data directory " + config_.data_dir.string());
}

Service::~Service() { wait_idle(); }

void Service::wait_idle() {
  for (;;) {
    std::vector<std::jthread> pending;
    {
      std::lock_guard lock(threads_mutex_);
      pending.swap(threads_);
    }
    if (pending.empty()) return;
    pending.clear();  // joins
  }
}

// Jobs

std::string Service::new_job(JobPhase phase) {
  std::lock_guard lock(jobs_mutex_);
  std::string id = "job-" + std::to_string(next_job_++);
  jobs_[id] = JobStatus{id, phase, phase == JobPhase::Done ? 1.0 : 0.0, std::nullopt};
  return id;
}

void Service::update_job(const std::string& job_id, JobPhase phase, double progress,
                         std::optional<std::string> error) {
  std::lock_guard lock(jobs_mutex_);
  auto& job = jobs_.at(job_id);
  job.phase = phase;
  job.progress = std::max(job.progress, phase == JobPhase::Done ? 1.0 : progress);
  if (error) job.error = std::move(error);
}

Json Service::job(const std::string& job_id) const {
  std::lock_guard lock(jobs_mutex_);
  const auto it = jobs_.find(job_id);
  if (it == jobs_.end()) throw HttpError(404, "NotFound", "unknown job '" + job_id + "'");
  return it->second;
}

// Datasets

void Service::persist_entry(const Entry& entry) const {
  const Json j{{"dataset", entry.dataset}, {"report", entry.report}, {"config", entry.config}};
  const auto path = config_.data_dir / (entry.dataset.id + ".json");
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << j.dump();
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Service::EntryPtr Service::load_entry(const std::string& dataset_id) const {
  const auto path = config_.data_dir / (dataset_id + ".json");
  std::ifstream in(path, std::ios::binary);
  if (!in) return nullptr;
  try {
    const Json j = Json::parse(in);
    auto entry = std::make_shared<Entry>();
    j.at("dataset").get_to(entry->dataset);
    j.at("report").get_to(entry->report);
    j.at("config").get_to(entry->config);
    if (entry->dataset.id != dataset_id) return nullptr;
    for (const auto& s : entry->dataset.series) entry->names.push_back(s.name);
    return entry;
  } catch (const std::exception&) {
    return nullptr;
  }
}

Service::EntryPtr Service::find_entry(const std::string& dataset_id) const {
  if (!is_dataset_id(dataset_id)) {
    throw HttpError(404, "NotFound", "unknown dataset '" + dataset_id + "'");
  }
  {
    std::shared_lock lock(datasets_mutex_);
    if (auto it = datasets_.find(dataset_id); it != datasets_.end()) return it->second;
  }
  auto loaded = load_entry(dataset_id);
  if (!loaded) throw HttpError(404, "NotFound", "unknown dataset '" + dataset_id + "'");
  std::unique_lock lock(datasets_mutex_);
  return datasets_.try_emplace(dataset_id, std::move(loaded)).first->second;
}

SelectionParams Service::default_params(const std::string& dataset_id) const {
  const auto entry = find_entry(dataset_id);
  SelectionParams p;
  p.k = std::min(config_.default_k, entry->dataset.size());
  p.alpha = config_.default_alpha;
  p.segments = entry->config.segments;
  return p;
}

Json Service::upload(std::string_view csv, const PreprocessConfig& config, std::string source_name) {
  try {
    config.validate();
  } catch (const Error& e) {
    throw from_error(e);
  }
  const std::string id = dataset_fingerprint(csv, config);

  EntryPtr entry;
  {
    std::shared_lock lock(datasets_mutex_);
    if (auto it = datasets_.find(id); it != datasets_.end()) entry = it->second;
  }
  if (!entry) entry = load_entry(id);
  if (!entry) {
    auto fresh = std::make_shared<Entry>();
    try {
      IngestResult result = ingest_csv(csv, config, std::move(source_name));
      fresh->dataset = std::move(result.dataset);
      fresh->report = std::move(result.report);
    } catch (const Error& e) {
      throw from_error(e);
    }
    fresh->config = config;
    for (const auto& s : fresh->dataset.series) fresh->names.push_back(s.name);
    persist_entry(*fresh);
    entry = std::move(fresh);
  }
  {
    std::unique_lock lock(datasets_mutex_);
    entry = datasets_.try_emplace(id, entry).first->second;
  }

  SelectionParams params;
  params.segments = entry->config.segments;
  const std::string job_id = start_build(entry, params);
  return Json{{"dataset_id", id}, {"job_id", job_id}, {"report", entry->report}};
}

Json Service::dataset_info(const std::string& dataset_id) const {
  const auto entry = find_entry(dataset_id);
  Json series = Json::array();
  for (const auto& s : entry->dataset.series) {
    series.push_back(Json{{"id", s.id}, {"name", s.name}, {"count", s.points.size()}, {"stats", s.stats}});
  }
  return Json{{"dataset_id", entry->dataset.id},
              {"series", std::move(series)},
              {"categorical_columns", entry->dataset.categorical_columns},
              {"provenance", entry->dataset.provenance},
              {"report", entry->report},
              {"config", entry->config}};
}

Json Service::series(const std::string& dataset_id, const std::vector<std::string>& names,
                     std::size_t width) const {
  const auto entry = find_entry(dataset_id);
  if (width < 1) throw HttpError(400, "InvalidParams", "width must be >= 1");
  std::vector<std::size_t> picked;
  if (names.empty()) {
    for (std::size_t i = 0; i < entry->dataset.size(); ++i) picked.push_back(i);
  } else {
    for (const auto& name : names) {
      const auto idx = entry->dataset.find(name);
      if (!idx) throw HttpError(404, "NotFound", "unknown series '" + name + "'");
      picked.push_back(*idx);
    }
  }
  Json out = Json::array();
  for (std::size_t i : picked) {
    const auto& s = entry->dataset.series[i];
    Json j = display_downsample(s, width);
    j["name"] = s.name;
    j["index"] = i;
    j["total_points"] = s.points.size();
    out.push_back(std::move(j));
  }
  return Json{{"dataset_id", dataset_id}, {"width", width}, {"series", std::move(out)}};
}

Json Service::summary(const std::string& dataset_id) const {
  const auto entry = find_entry(dataset_id);
  Json out = Json::array();
  for (const auto& s : entry->dataset.series) {
    Json j = box_stats(s.values());
    j["id"] = s.id;
    j["name"] = s.name;
    out.push_back(std::move(j));
  }
  return Json{{"dataset_id", dataset_id}, {"series", std::move(out)}};
}

// Matrices

Service::MatrixPtr Service::cached_matrix(const Entry& entry, const std::string& fingerprint) const {
  const std::string key = matrix_key(entry.dataset.id, fingerprint);
  {
    std::shared_lock lock(matrices_mutex_);
    if (auto it = matrices_.find(key); it != matrices_.end()) return it->second;
  }
  auto from_disk = disk_cache_.get(entry.dataset.id, fingerprint);
  if (!from_disk || from_disk->size() != entry.dataset.size()) return nullptr;
  std::unique_lock lock(matrices_mutex_);
  auto ptr = std::make_shared<const DistanceMatrix>(std::move(*from_disk));
  return matrices_.try_emplace(key, std::move(ptr)).first->second;
}

void Service::run_build(const EntryPtr& entry, SelectionParams params, std::string key,
                        std::string job_id) {
  try {
    update_job(job_id, JobPhase::Sampling, 0.0);
    BuildOptions options;
    options.threads = config_.build_threads;
    bool announced = false;
    options.progress = [&](double fraction) {
      if (!announced) {
        announced = true;
        update_job(job_id, JobPhase::BuildingMatrix, 0.0);
      }
      update_job(job_id, JobPhase::BuildingMatrix, std::min(fraction, 1.0) * 0.99);
    };
    auto built = std::make_shared<const DistanceMatrix>(build_matrix(entry->dataset, params, options));
    try {
      disk_cache_.put(*built);
    } catch (const Error&) {
      // Disk cache is best effort; the in-memory copy still serves requests.
    }
    {
      std::unique_lock lock(matrices_mutex_);
      matrices_[key] = std::move(built);
      building_.erase(key);
    }
    update_job(job_id, JobPhase::Done, 1.0);
  } catch (const std::exception& e) {
    {
      std::unique_lock lock(matrices_mutex_);
      building_.erase(key);
    }
    update_job(job_id, JobPhase::Failed, 0.0, std::string(e.what()));
    throw;
  }
}

std::string Service::start_build(const EntryPtr& entry, const SelectionParams& params) {
  const std::string fp = matrix_fingerprint(params, entry->dataset.provenance.normalized);
  const std::string key = matrix_key(entry->dataset.id, fp);
  {
    std::shared_lock lock(matrices_mutex_);
    if (auto it = building_.find(key); it != building_.end()) return it->second;
  }
  if (cached_matrix(*entry, fp)) return new_job(JobPhase::Done);

  std::string job_id;
  {
    std::unique_lock lock(matrices_mutex_);
    if (auto it = building_.find(key); it != building_.end()) return it->second;
    if (matrices_.count(key)) return new_job(JobPhase::Done);
    job_id = new_job(JobPhase::Sampling);
    building_[key] = job_id;
  }
  std::lock_guard lock(threads_mutex_);
  threads_.emplace_back([this, entry, params, key, job_id] {
    try {
      run_build(entry, params, key, job_id);
    } catch (...) {
      // Recorded on the job.
    }
  });
  return job_id;
}

Json Service::select(const std::string& dataset_id, const Json& request) {
  const auto entry = find_entry(dataset_id);
  if (!request.is_object() || !request.contains("k") || !request.contains("alpha")) {
    throw HttpError(400, "InvalidParams", "request needs numeric 'k' and 'alpha'");
  }
  SelectionParams params;
  try {
    if (!request.at("k").is_number_integer() || request.at("k").get<long long>() < 1) {
      throw Error(ErrorCode::KOutOfRange, "k must be a positive integer");
    }
    if (!request.at("alpha").is_number()) throw Error(ErrorCode::InvalidParams, "alpha must be a number");
    params.k = request.at("k").get<std::size_t>();
    params.alpha = request.at("alpha").get<double>();
    params.segments = entry->config.segments;
    if (auto it = request.find("segments"); it != request.end() && !it->is_null()) {
      if (!it->is_number_integer() || it->get<long long>() < 1) {
        throw Error(ErrorCode::InvalidParams, "segments must be a positive integer");
      }
      params.segments = it->get<std::size_t>();
    }
    if (auto it = request.find("dtw_window"); it != request.end() && !it->is_null()) {
      if (!it->is_number_integer() || it->get<long long>() < 0) {
        throw Error(ErrorCode::InvalidParams, "dtw_window must be a non-negative integer");
      }
      params.dtw_window = it->get<std::size_t>();
    }
    params.validate();
    if (params.k > entry->dataset.size()) {
      throw Error(ErrorCode::KOutOfRange, "k=" + std::to_string(params.k) + " exceeds n=" +
                                              std::to_string(entry->dataset.size()));
    }
  } catch (const Error& e) {
    throw from_error(e);
  }

  const std::string fp = matrix_fingerprint(params, entry->dataset.provenance.normalized);
  const std::string key = matrix_key(dataset_id, fp);
  bool served_from_cache = true;
  MatrixPtr matrix;
  {
    std::shared_lock lock(matrices_mutex_);
    if (auto it = matrices_.find(key); it != matrices_.end()) {
      matrix = it->second;
    } else if (auto b = building_.find(key); b != building_.end()) {
      throw HttpError(409, "MatrixBuilding", "distance matrix is still being built", b->second);
    }
  }
  if (!matrix) matrix = cached_matrix(*entry, fp);
  if (!matrix) {
    std::string job_id;
    {
      std::unique_lock lock(matrices_mutex_);
      if (auto b = building_.find(key); b != building_.end()) {
        throw HttpError(409, "MatrixBuilding", "distance matrix is still being built", b->second);
      }
      if (auto it = matrices_.find(key); it != matrices_.end()) matrix = it->second;
      if (!matrix) {
        job_id = new_job(JobPhase::Sampling);
        building_[key] = job_id;
      }
    }
    if (!matrix) {
      try {
        run_build(entry, params, key, job_id);
      } catch (const Error& e) {
        throw from_error(e);
      }
      std::shared_lock lock(matrices_mutex_);
      matrix = matrices_.at(key);
      served_from_cache = false;
    }
  }

  try {
    const SelectionResult result = reselect(matrix.get(), params);
    return Json{{"result", selection_to_json(result, entry->names)},
                {"served_from_cache", served_from_cache}};
  } catch (const Error& e) {
    throw from_error(e);
  }
}

Json Service::matrix(const std::string& dataset_id, const SelectionParams& params) const {
  const auto entry = find_entry(dataset_id);
  const std::string fp = matrix_fingerprint(params, entry->dataset.provenance.normalized);
  {
    std::shared_lock lock(matrices_mutex_);
    if (auto b = building_.find(matrix_key(dataset_id, fp)); b != building_.end()) {
      throw HttpError(409, "MatrixBuilding", "distance matrix is still being built", b->second);
    }
  }
  const auto m = cached_matrix(*entry, fp);
  if (!m) throw HttpError(404, "NotFound", "no matrix built for " + fp);
  Json j = *m;
  j["names"] = entry->names;
  return j;
}

Json Service::metrics() const {
  std::size_t datasets = 0, matrices = 0, building = 0;
  {
    std::shared_lock lock(datasets_mutex_);
    datasets = datasets_.size();
  }
  {
    std::shared_lock lock(matrices_mutex_);
    matrices = matrices_.size();
    building = building_.size();
  }
  return Json{{"dtw_evaluations", dtw_evaluations()},
              {"datasets", datasets},
              {"matrices", matrices},
              {"builds_in_progress", building}};
}

// HTTP

namespace {

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    send_json(res, 200, fn());
  } catch (const HttpError& e) {
    send_json(res, e.status(), e.body());
  } catch (const Error& e) {
    const HttpError mapped = from_error(e);
    send_json(res, mapped.status(), mapped.body());
  } catch (const Json::exception& e) {
    send_json(res, 400, Json{{"error", "InvalidJson"}, {"message", e.what()}});
  } catch (const std::exception& e) {
    send_json(res, 500, Json{{"error", "Internal"}, {"message", e.what()}});
  }
}

std::vector<std::string> split_names(const httplib::Request& req) {
  std::vector<std::string> names;
  const std::size_t count = req.get_param_value_count("names");
  for (std::size_t i = 0; i < count; ++i) {
    const std::string value = req.get_param_value("names", i);
    std::size_t start = 0;
    while (start <= value.size()) {
      const std::size_t comma = value.find(',', start);
      const std::string part = value.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      if (!part.empty()) names.push_back(part);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  return names;
}

SelectionParams params_from_query(const httplib::Request& req, SelectionParams params) {
  if (req.has_param("segments")) {
    params.segments = parse_size(req.get_param_value("segments"), "segments");
    if (params.segments < 1) throw HttpError(400, "InvalidParams", "segments must be >= 1");
  }
  if (req.has_param("dtw_window")) {
    params.dtw_window = parse_size(req.get_param_value("dtw_window"), "dtw_window");
  }
  return params;
}

}  // namespace

void Service::register_routes(httplib::Server& server) {
  server.set_payload_max_length(config_.upload_limit);
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});

  server.Post("/datasets", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      PreprocessConfig config;
      std::string csv;
      std::string source_name = "upload.csv";
      if (req.is_multipart_form_data()) {
        if (!req.has_file("file")) throw HttpError(400, "InvalidParams", "multipart field 'file' missing");
        const auto file = req.get_file_value("file");
        csv = file.content;
        if (!file.filename.empty()) source_name = file.filename;
        if (req.has_file("config")) config = Json::parse(req.get_file_value("config").content);
      } else {
        csv = req.body;
        if (req.has_param("config")) config = Json::parse(req.get_param_value("config"));
        if (req.has_param("filename")) source_name = req.get_param_value("filename");
      }
      return upload(csv, config, source_name);
    });
  });

  server.Get("/datasets/:id", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { return dataset_info(req.path_params.at("id")); });
  });

  server.Get("/datasets/:id/series", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      if (!req.has_param("width")) throw HttpError(400, "InvalidParams", "width is required");
      const std::size_t width = parse_size(req.get_param_value("width"), "width");
      return series(req.path_params.at("id"), split_names(req), width);
    });
  });

  server.Get("/datasets/:id/summary", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { return summary(req.path_params.at("id")); });
  });

  server.Post("/datasets/:id/select", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { return select(req.path_params.at("id"), Json::parse(req.body)); });
  });

  server.Get("/datasets/:id/matrix", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.path_params.at("id");
    if (req.get_param_value("format") == "csv") {
      std::string csv;
      guarded(res, [&] {
        const Json j = matrix(id, params_from_query(req, default_params(id)));
        csv = matrix_to_csv(j.get<DistanceMatrix>(), j.at("names").get<std::vector<std::string>>());
        return Json();
      });
      if (res.status == 200) res.set_content(csv, "text/csv");
      return;
    }
    guarded(res, [&] { return matrix(id, params_from_query(req, default_params(id))); });
  });

  server.Get("/jobs/:id", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { return job(req.path_params.at("id")); });
  });

  server.Get("/metrics", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { return metrics(); });
  });
}

HttpServer::HttpServer(Service& service) : server_(std::make_unique<httplib::Server>()) {
  service.register_routes(*server_);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound <= 0) throw Error(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

bool HttpServer::listen(const std::string& host, int port) { return server_->listen(host, port); }

void HttpServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace repsel
