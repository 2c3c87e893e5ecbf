#include "gridcity/service/server.hpp"

#include <httplib.h>

#include <algorithm>

#include "gridcity/service/pipeline.hpp"

namespace gridcity {

std::string to_string(JobState s) {
  switch (s) {
    case JobState::kQueued: return "queued";
    case JobState::kRunning: return "running";
    case JobState::kDone: return "done";
    case JobState::kFailed: return "failed";
  }
  return "queued";
}

nlohmann::json job_to_json(const JobStatus& job) {
  nlohmann::json j = {{"id", job.id}, {"kind", job.kind}, {"state", to_string(job.state)}, {"progress", job.progress}};
  j["error"] = job.error.empty() ? nlohmann::json(nullptr) : nlohmann::json(job.error);
  j["result"] = job.result;
  return j;
}

JobManager::JobManager() : worker_([this] { loop(); }) {}

JobManager::~JobManager() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  cv_.notify_all();
  worker_.join();
}

std::string JobManager::submit(const std::string& kind, Task task) {
  std::lock_guard lock(mutex_);
  JobStatus job;
  job.id = "job-" + std::to_string(next_id_++);
  job.kind = kind;
  jobs_[job.id] = job;
  queue_.emplace_back(job.id, std::move(task));
  cv_.notify_all();
  return job.id;
}

std::optional<JobStatus> JobManager::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second;
}

std::vector<JobStatus> JobManager::list() const {
  std::lock_guard lock(mutex_);
  std::vector<JobStatus> out;
  for (const auto& [id, j] : jobs_) out.push_back(j);
  return out;
}

JobStatus JobManager::wait(const std::string& id) const {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [&] {
    auto it = jobs_.find(id);
    return it == jobs_.end() || it->second.state == JobState::kDone || it->second.state == JobState::kFailed;
  });
  auto it = jobs_.find(id);
  if (it == jobs_.end()) throw Error("unknown job " + id);
  return it->second;
}

void JobManager::loop() {
  for (;;) {
    std::pair<std::string, Task> item;
    {
      std::unique_lock lock(mutex_);
      cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;
      item = std::move(queue_.front());
      queue_.pop_front();
      jobs_[item.first].state = JobState::kRunning;
    }
    cv_.notify_all();
    const std::string id = item.first;
    auto progress = [&](double p) {
      std::lock_guard lock(mutex_);
      auto& job = jobs_[id];
      if (job.state == JobState::kRunning) job.progress = std::max(job.progress, std::min(1.0, p));
    };
    nlohmann::json result;
    std::string error;
    try {
      result = item.second(progress);
    } catch (const std::exception& e) {
      error = e.what();
    }
    {
      std::lock_guard lock(mutex_);
      auto& job = jobs_[id];
      job.state = error.empty() ? JobState::kDone : JobState::kFailed;
      job.error = error;
      job.result = std::move(result);
      if (error.empty()) job.progress = 1.0;
    }
    cv_.notify_all();
  }
}

std::pair<std::string, int> parse_bind_address(const std::string& text) {
  std::string host = "127.0.0.1";
  std::string port_text = text;
  if (auto colon = text.rfind(':'); colon != std::string::npos) {
    if (colon > 0) host = text.substr(0, colon);
    port_text = text.substr(colon + 1);
  }
  try {
    std::size_t used = 0;
    const int port = std::stoi(port_text, &used);
    if (used != port_text.size() || port < 0 || port > 65535) throw std::out_of_range("port");
    return {host, port};
  } catch (const std::exception&) {
    throw Error("invalid bind address '" + text + "'");
  }
}

Service::Service(std::filesystem::path root, EngineConfig cfg, std::shared_ptr<ModelHub> hub,
                 std::optional<std::filesystem::path> static_dir)
    : store_(std::move(root)),
      cfg_(std::move(cfg)),
      hub_(std::move(hub)),
      static_dir_(std::move(static_dir)),
      server_(std::make_unique<httplib::Server>()) {
  // no SO_REUSEPORT: a second server on the same port must fail to bind
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  mount();
}

Service::~Service() { stop(); }

void Service::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

int Service::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) bound = server_->bind_to_any_port(host);
  else if (!server_->bind_to_port(host, port)) bound = -1;
  if (bound <= 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void Service::run(const std::string& host, int port) {
  if (!server_->bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
  server_->listen_after_bind();
}

nlohmann::json Service::project_json() const {
  const CityProject p = store_.load();
  nlohmann::json districts = nlohmann::json::array();
  for (const auto& [id, d] : p.layout.districts()) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : p.layout.cells_of(id))
      cells.push_back({{"row", c.row}, {"col", c.col}, {"index", *p.layout.tile_at(c)}});
    districts.push_back({{"id", id}, {"name", d.name}, {"description", d.description}, {"cells", cells}});
  }
  nlohmann::json tiles = nlohmann::json::array();
  for (const auto& [cell, idx] : p.layout.tiles()) {
    auto it = p.assets.find(idx);
    const TileAsset asset = it == p.assets.end() ? TileAsset{} : it->second;
    auto d = p.descriptions.find(idx);
    tiles.push_back({{"index", idx},
                     {"row", cell.row},
                     {"col", cell.col},
                     {"district", *p.layout.district_at(cell)},
                     {"status", to_string(asset.status)},
                     {"below_threshold", asset.below_threshold},
                     {"iterations", asset.iterations},
                     {"final_iteration", asset.final_iteration},
                     {"description", d == p.descriptions.end() ? std::string{} : d->second.text},
                     {"image", "/api/tiles/" + std::to_string(idx) + "/image"}});
  }
  return {{"id", p.id},
          {"prompt", p.prompt},
          {"extent", {{"rows", p.layout.rows()}, {"cols", p.layout.cols()}}},
          {"assembled", store_.has_manifest()},
          {"districts", districts},
          {"tiles", tiles},
          {"history_length", p.history.size()}};
}

namespace {

void send_json(httplib::Response& res, const nlohmann::json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(2), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, {{"error", message}}, status);
}

nlohmann::json parse_body(const httplib::Request& req) {
  try {
    auto j = nlohmann::json::parse(req.body.empty() ? std::string("{}") : req.body);
    if (!j.is_object()) throw ParseError("request body must be a JSON object");
    return j;
  } catch (const nlohmann::json::parse_error&) {
    throw ParseError("request body is not valid JSON");
  }
}

nlohmann::json candidates_json(const ExpansionRecord& r, double lambda) {
  nlohmann::json cands = nlohmann::json::array();
  for (const auto& b : r.candidates) cands.push_back(breakdown_to_json(b));
  return {{"chosen", coord_to_json(r.chosen)},
          {"translation", coord_to_json(r.translation)},
          {"tile_index", r.tile_index},
          {"district_id", r.district_id},
          {"lambda", lambda},
          {"scene_graph", scene_graph_to_json(r.scene_graph)},
          {"candidates", cands}};
}

}  // namespace

void Service::mount() {
  auto& srv = *server_;
  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const ParseError& e) {
      send_error(res, 400, e.what());
    } catch (const ConflictError& e) {
      send_error(res, 409, e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  });

  srv.Get("/api/project", [this](const httplib::Request&, httplib::Response& res) {
    if (!store_.has_city()) return send_error(res, 404, "no city has been planned yet");
    send_json(res, project_json());
  });

  srv.Post("/api/plan", [this](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    PlanRequest plan;
    plan.prompt = body.value("prompt", std::string{});
    try {
      if (body.contains("grid_size") && !body["grid_size"].is_null())
        plan.forced_size = parse_grid_size(body["grid_size"].get<std::string>());
      if (body.contains("reference_city") && !body["reference_city"].is_null())
        plan.reference_city = body["reference_city"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what());
    }
    const std::string run = body.value("run", std::string("all"));
    if (run != "all" && run != "plan") throw ParseError("run must be \"all\" or \"plan\"");
    try {
      check_plan_request(store_, plan);
    } catch (const ConflictError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(e.what());
    }
    auto id = jobs_.submit("plan", [this, plan, run](const JobManager::Progress& progress) {
      PipelineObserver obs;
      const bool only_plan = run == "plan";
      obs.on_progress = [&](const std::string& stage, double p) {
        if (stage == "plan") progress(only_plan ? 0.5 * p : 0.1 * p);
        else if (stage == "design") progress(only_plan ? 0.5 + 0.5 * p : 0.1 + 0.1 * p);
        else if (stage == "generate") progress(0.2 + 0.7 * p);
        else if (stage == "assemble") progress(0.9 + 0.1 * p);
      };
      if (run == "plan") plan_city(store_, *hub_, cfg_, plan, obs);
      else run_pipeline(store_, *hub_, cfg_, plan, obs);
      return nlohmann::json{{"project", project_json()}};
    });
    send_json(res, {{"job", id}}, 202);
  });

  srv.Post("/api/expand", [this](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    const std::string request = body.value("request", std::string{});
    if (request.find_first_not_of(" \t\r\n") == std::string::npos) throw ParseError("request must not be empty");
    if (!store_.has_city()) throw ConflictError("no city has been planned yet");
    auto id = jobs_.submit("expand", [this, request](const JobManager::Progress& progress) {
      PipelineObserver obs;
      obs.on_progress = [&](const std::string& stage, double p) {
        if (stage == "expand") progress(p);
      };
      auto out = expand_city(store_, *hub_, cfg_, request, obs);
      return candidates_json(out.record, cfg_.expansion.lambda);
    });
    send_json(res, {{"job", id}}, 202);
  });

  srv.Get("/api/jobs", [this](const httplib::Request&, httplib::Response& res) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& j : jobs_.list()) out.push_back(job_to_json(j));
    send_json(res, out);
  });

  srv.Get(R"(/api/jobs/([A-Za-z0-9\-]+))", [this](const httplib::Request& req, httplib::Response& res) {
    auto job = jobs_.get(req.matches[1]);
    if (!job) return send_error(res, 404, "unknown job");
    send_json(res, job_to_json(*job));
  });

  srv.Get("/api/candidates", [this](const httplib::Request& req, httplib::Response& res) {
    if (req.has_param("job")) {
      auto job = jobs_.get(req.get_param_value("job"));
      if (!job || job->kind != "expand") return send_error(res, 404, "unknown expansion job");
      if (job->state == JobState::kFailed) return send_error(res, 409, "job failed: " + job->error);
      if (job->state != JobState::kDone) return send_error(res, 409, "job has not finished");
      nlohmann::json out = job->result;
      out["job"] = job->id;
      return send_json(res, out);
    }
    auto history = store_.load_history();
    if (history.empty()) return send_error(res, 404, "no expansion has been applied");
    send_json(res, candidates_json(history.back(), cfg_.expansion.lambda));
  });

  srv.Get(R"(/api/tiles/(\d+)/image)", [this](const httplib::Request& req, httplib::Response& res) {
    if (!store_.has_city()) return send_error(res, 404, "no city has been planned yet");
    const int index = std::stoi(req.matches[1]);
    const CityProject p = store_.load();
    auto it = p.assets.find(index);
    if (it == p.assets.end()) return send_error(res, 404, "unknown tile");
    std::optional<Bytes> bytes;
    if (!it->second.image_path.empty()) bytes = store_.read_bytes(it->second.image_path);
    for (int k = 16; !bytes && k >= 1; --k)
      bytes = store_.read_bytes(tile_dir(index) + "/iter" + std::to_string(k) + "/refined.png");
    if (!bytes) return send_error(res, 404, "tile has no image yet");
    res.set_content(std::string(bytes->begin(), bytes->end()), "image/png");
  });

  srv.Get("/api/history", [this](const httplib::Request& req, httplib::Response& res) {
    if (!store_.has_city()) return send_error(res, 404, "no city has been planned yet");
    const CityProject p = store_.load();
    if (req.has_param("step")) {
      int step = 0;
      try {
        step = std::stoi(req.get_param_value("step"));
      } catch (const std::exception&) {
        throw ParseError("step must be an integer");
      }
      if (step < 0 || step > static_cast<int>(p.history.size())) return send_error(res, 404, "step out of range");
      std::vector<ExpansionRecord> prefix(p.history.begin(), p.history.begin() + step);
      return send_json(res, {{"step", step}, {"layout", layout_to_json(replay_history(p.initial_layout, prefix))}});
    }
    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : p.history) records.push_back(expansion_record_to_json(r));
    send_json(res, {{"initial_layout", layout_to_json(p.initial_layout)}, {"records", records}, {"length", p.history.size()}});
  });

  if (static_dir_ && std::filesystem::is_directory(*static_dir_)) srv.set_mount_point("/", static_dir_->string());
}

}  // namespace gridcity
